"""Synthetic two-moons dataset generation and CSV serialization."""

import numpy as np


def make_two_moons(n, noise=0.1, seed=0):
    """Two interleaving half-circles with Gaussian noise.

    Returns (features, labels) with features of shape (n, 2) and integer
    labels in {0, 1}.  Deterministic for a fixed seed.
    """
    rng = np.random.default_rng(seed)
    n_upper = n // 2
    n_lower = n - n_upper
    theta_upper = rng.uniform(0.0, np.pi, n_upper)
    theta_lower = rng.uniform(0.0, np.pi, n_lower)
    upper = np.column_stack([np.cos(theta_upper), np.sin(theta_upper)])
    lower = np.column_stack([1.0 - np.cos(theta_lower), 0.5 - np.sin(theta_lower)])
    features = np.vstack([upper, lower])
    features += rng.normal(0.0, noise, features.shape)
    labels = np.concatenate([np.zeros(n_upper, dtype=int), np.ones(n_lower, dtype=int)])
    order = rng.permutation(n)
    return features[order], labels[order]


def write_dataset_csv(path, features, labels):
    """Write rows of feature columns plus a trailing integer label column."""
    with open(path, "w") as fh:
        for x, label in zip(features, labels):
            fh.write(",".join(repr(float(c)) for c in x) + f",{int(label)}\n")


def read_dataset_csv(path):
    """Read a feature/label CSV written by write_dataset_csv (no header)."""
    features = []
    labels = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            features.append([float(c) for c in cells[:-1]])
            labels.append(int(cells[-1]))
    return np.asarray(features, dtype=float), np.asarray(labels, dtype=int)
