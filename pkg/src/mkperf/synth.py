"""Synthetic fixtures.

The concentric-rings dataset is the bundled benchmark: radially
separated classes that no homogeneous linear classifier can split,
while the quadratic and rbf kernels in the default bank separate them
cleanly.
"""

from __future__ import annotations

import numpy as np

from .dataio import Dataset


def concentric_rings(count: int = 200, seed: int = 0, inner_radius: float = 1.0,
                     outer_radius: float = 2.0, noise: float = 0.05) -> Dataset:
    """Two balanced classes on noisy circles of different radii.

    The inner ring is the positive class.  ``noise`` is the standard
    deviation of the radial jitter.
    """
    rng = np.random.default_rng(seed)
    n_pos = count // 2
    n_neg = count - n_pos
    radii = np.concatenate([
        inner_radius + rng.normal(0.0, noise, n_pos),
        outer_radius + rng.normal(0.0, noise, n_neg),
    ])
    angles = rng.uniform(0.0, 2.0 * np.pi, count)
    features = np.vstack([radii * np.cos(angles), radii * np.sin(angles)])
    labels = np.concatenate([np.ones(n_pos, dtype=np.int8),
                             -np.ones(n_neg, dtype=np.int8)])
    return Dataset(features, labels)
