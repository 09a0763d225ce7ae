"""Training and export glue for small monotone implicit networks.

This package is deliberately independent of the verification toolkit: it
talks to it only through the portable model JSON schema and the command
line.  See train.py for the entry point.
"""

from .train import TrainConfig, train_and_export

__all__ = ["TrainConfig", "train_and_export"]
