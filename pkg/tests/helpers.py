"""Shared non-fixture helpers for the test suite."""

import numpy as np

from fpcert import chzono
from fpcert.mondeq import MonDeqParams


def two_neuron_model():
    """Small hand-checkable model: p=2, q=2, one output logit, m=4.

    Its recurrence matrix works out to [[-4, -1], [1, -4]].
    """
    return MonDeqParams(
        P=np.eye(2),
        Q=np.array([[1.0, 0.0], [1.0, 0.0]]),
        U=np.array([[1.0, 1.0], [-1.0, 1.0]]),
        bias=np.zeros(2),
        V=np.array([[1.0, -1.0]]),
        v=np.zeros(1),
        m=4.0,
    )


def random_improper(rng, p, k, box_scale=0.2):
    """Random improper element with k generator columns and a small box."""
    A = rng.normal(size=(p, k)) / np.sqrt(max(k, 1))
    b = np.abs(rng.normal(size=p)) * box_scale
    a = rng.normal(size=p)
    return chzono.CHZonotope(a, A, b, proper=False)
