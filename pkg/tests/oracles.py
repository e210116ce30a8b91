"""Independent reference computations for the discretized cover problem.

Nothing here calls the branch-and-bound or the batched cover map: membership
is simulated one (point, control) pair at a time and the minimum is found by
enumerating every subset of distinct coverage patterns.
"""

import itertools
import math

import numpy as np

from invpress import Box, ControlSignal, LinearSystem, ScaledNorm
from invpress.potential import birkhoff
from invpress.system import trajectory_in


def tiny_instance():
    """Scalar a = 1, U = [-1, 1], three grid points, five letters, four steps."""
    sys = LinearSystem([[1.0]], [[1.0]], [(-1.0, 1.0)])
    K_points = np.array([[-0.5], [0.0], [0.5]])
    alphabet = np.array([[-1.0], [-0.5], [0.0], [0.5], [1.0]])
    Q = Box([-0.9], [0.9])
    return sys, K_points, alphabet, Q, 0.25, 4, ScaledNorm(1.0, 1)


def brute_force_cover(sys, K_points, alphabet, Q, dt, N, f, delta=None):
    """Return (min weight, coverage patterns) by exhaustive enumeration."""
    delta = dt / 4 if delta is None else delta
    best_for_mask = {}
    for seq in itertools.product(range(len(alphabet)), repeat=N):
        omega = ControlSignal(dt, alphabet[list(seq)])
        mask = 0
        for p, x0 in enumerate(K_points):
            if trajectory_in(sys, x0, omega, N * dt, Q, delta):
                mask |= 1 << p
        if mask == 0:
            continue
        w = math.exp(birkhoff(f, omega, N * dt))
        if mask not in best_for_mask or w < best_for_mask[mask]:
            best_for_mask[mask] = w
    full = (1 << len(K_points)) - 1
    masks = sorted(best_for_mask)
    best = math.inf
    for r in range(1, len(masks) + 1):
        for sub in itertools.combinations(masks, r):
            cov = 0
            for m in sub:
                cov |= m
            if cov == full:
                best = min(best, math.fsum(sorted(best_for_mask[m] for m in sub)))
    return best, best_for_mask
