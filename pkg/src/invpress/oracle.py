"""Discretized a_tau(f, K, Q) as a minimum-weight set cover.

Controls are all length-``N`` sequences over a finite alphabet, held on a
uniform grid of step ``dt``. A control covers a grid point of ``K`` when the
sampled trajectory from that point stays in ``Q``. The weight of a control
is ``exp(S_tau f)``; a_tau is the minimum total weight of a cover. Values
are exact for the discretized problem only.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError, InputError
from .potential import Constant
from .regions import Box, contains
from .system import ControlSignal, sample_times, simulate

ENUMERATION_CAP = 4096
EXACT_MAX_POINTS = 20


@dataclass(frozen=True)
class SearchParams:
    """Discretization settings; ``alphabet=None`` means box corners plus centre."""

    dt: float = 0.25
    N: int = 4
    alphabet: tuple = None
    grid: int = 5
    delta: float = None
    cap: int = ENUMERATION_CAP


@dataclass(frozen=True, eq=False)
class DiscretizedProblem:
    sys: object
    dt: float
    N: int
    alphabet: np.ndarray
    K_points: np.ndarray
    Q: object
    delta: float
    cap: int = ENUMERATION_CAP

    @property
    def tau(self):
        return self.N * self.dt

    @property
    def n_controls(self):
        return len(self.alphabet) ** self.N

    def provenance(self):
        return {
            "dt": self.dt,
            "N": self.N,
            "alphabet_size": len(self.alphabet),
            "grid_points": len(self.K_points),
            "delta": self.delta,
        }


def default_alphabet(U):
    """Vertices of the control box followed by its centre."""
    return np.vstack([U.corners(), U.center[None, :]])


def build_problem(sys, K, Q, params=None, N=None):
    params = params or SearchParams()
    N = params.N if N is None else N
    if isinstance(K, Box):
        pts = K.grid(params.grid)
    else:
        pts = np.atleast_2d(np.asarray(K, dtype=float))
    alphabet = default_alphabet(sys.U) if params.alphabet is None else np.atleast_2d(
        np.asarray(params.alphabet, dtype=float)
    )
    if alphabet.shape[1] != sys.n_inputs:
        alphabet = alphabet.reshape(-1, sys.n_inputs)
    if not np.all(contains(sys.U, alphabet)):
        raise InputError("alphabet values must lie in U")
    delta = params.dt / 4 if params.delta is None else float(params.delta)
    return make_problem(sys, params.dt, N, alphabet, pts, Q, delta, params.cap)


def make_problem(sys, dt, N, alphabet, K_points, Q, delta=None, cap=ENUMERATION_CAP):
    dt = float(dt)
    N = int(N)
    if N < 1 or not dt > 0:
        raise InputError("need N >= 1 and dt > 0")
    delta = dt / 4 if delta is None else float(delta)
    if delta > dt * (1 + 1e-12):
        raise InputError("delta must not exceed dt")
    K_points = np.atleast_2d(np.asarray(K_points, dtype=float))
    if K_points.shape[0] == 0:
        raise InputError("K_points must be non-empty")
    if K_points.shape[1] != sys.dim:
        raise InputError("K_points dimension does not match the system")
    return DiscretizedProblem(
        sys, dt, N, np.atleast_2d(np.asarray(alphabet, dtype=float)), K_points, Q, delta, cap
    )


def control_indices(problem):
    """All alphabet-index sequences in lexicographic order, shape ``(n, N)``."""
    if problem.n_controls > problem.cap:
        raise InputError(
            f"{len(problem.alphabet)}^{problem.N} = {problem.n_controls} controls exceeds cap {problem.cap}"
        )
    return np.array(list(itertools.product(range(len(problem.alphabet)), repeat=problem.N)), dtype=int)


def control_signal(problem, index):
    """The ``index``-th enumerated control as a hold-last ControlSignal."""
    seq = np.unravel_index(index, (len(problem.alphabet),) * problem.N)
    return ControlSignal(problem.dt, problem.alphabet[np.array(seq)])


def cover_map(problem):
    """Boolean matrix ``(n_controls, n_points)``: control ``c`` covers point ``p``.

    States are affine in (initial point, control), so the free response of
    every point and the forced response of every control are simulated
    separately and summed.
    """
    idx = control_indices(problem)
    sys = problem.sys
    ts = sample_times(problem.tau, problem.delta)
    free = simulate(sys, problem.K_points.T, np.zeros((problem.N, sys.n_inputs)), problem.dt, ts)
    # u_steps: (N, m, n_controls)
    u = problem.alphabet[idx].transpose(1, 2, 0)
    forced = simulate(sys, np.zeros((sys.dim, idx.shape[0])), u, problem.dt, ts)
    covers = np.ones((idx.shape[0], problem.K_points.shape[0]), dtype=bool)
    for s in range(ts.size):
        states = forced[s].T[:, None, :] + free[s].T[None, :, :]
        covers &= contains(problem.Q, states)
    return covers


def log_weights(problem, f):
    """``S_tau f`` for every enumerated control (exactly rounded sums)."""
    idx = control_indices(problem)
    per_letter = np.atleast_1d(f(problem.alphabet)) * problem.dt
    return np.array([math.fsum(per_letter[row]) for row in idx])


@dataclass(frozen=True)
class CoverSolution:
    chosen: tuple
    weight: float
    optimal: bool
    provenance: dict = None

    @property
    def log_weight(self):
        return math.log(self.weight)

    @property
    def size(self):
        return len(self.chosen)


def _cover_weight(weights, chosen):
    return math.fsum(weights[c] for c in chosen)


def _masks(cmap):
    n_pts = cmap.shape[1]
    bits = 1 << np.arange(n_pts, dtype=object)
    return [int(sum(bits[row])) if row.any() else 0 for row in cmap]


def _check_feasible(cmap):
    uncovered = np.flatnonzero(~cmap.any(axis=0))
    if uncovered.size:
        raise InfeasibleError(
            f"{uncovered.size} grid point(s) are kept in Q by no control", uncovered.tolist()
        )


def prune_candidates(masks, weights):
    """Drop empty controls and controls dominated in coverage at no lower weight.

    Candidates are visited in (weight, index) order, so each survivor is the
    cheapest, then lexicographically first, control for its coverage.
    """
    order = sorted(range(len(masks)), key=lambda c: (weights[c], c))
    kept = []
    for c in order:
        m = masks[c]
        if m == 0:
            continue
        if any((m | masks[k]) == masks[k] for k in kept):
            continue
        kept.append(c)
    return kept


def a_tau_exact(problem, f, cmap=None):
    """Minimum-weight cover by depth-first branch and bound."""
    if len(problem.K_points) > EXACT_MAX_POINTS:
        raise InputError(f"exact mode supports at most {EXACT_MAX_POINTS} grid points")
    cmap = cover_map(problem) if cmap is None else cmap
    _check_feasible(cmap)
    weights = np.exp(log_weights(problem, f))
    masks = _masks(cmap)
    cands = prune_candidates(masks, weights)
    if len(cands) > problem.cap:
        raise InputError("too many candidates after pruning for exact mode")
    n_pts = cmap.shape[1]
    full = (1 << n_pts) - 1
    by_elem = [[c for c in cands if masks[c] >> e & 1] for e in range(n_pts)]
    min_w = [weights[lst[0]] for lst in by_elem]

    best = {"weight": math.inf, "chosen": None}

    def lower_bound(covered):
        lb = 0.0
        for e in range(n_pts):
            if not covered >> e & 1 and min_w[e] > lb:
                lb = min_w[e]
        return lb

    def search(covered, partial, chosen):
        if covered == full:
            exact = _cover_weight(weights, chosen)
            key = (exact, sorted(chosen))
            if best["chosen"] is None or key < (best["weight"], sorted(best["chosen"])):
                best["weight"], best["chosen"] = exact, list(chosen)
            return
        slack = best["weight"] * (1 + 1e-12)
        # branch on the uncovered point with the fewest covering candidates
        e = min(
            (e for e in range(n_pts) if not covered >> e & 1),
            key=lambda e: (len(by_elem[e]), e),
        )
        for c in by_elem[e]:
            w = partial + weights[c]
            if w > slack:
                break
            nxt = covered | masks[c]
            if w + lower_bound(nxt) > slack:
                continue
            chosen.append(c)
            search(nxt, w, chosen)
            chosen.pop()

    search(0, 0.0, [])
    chosen = tuple(sorted(best["chosen"]))
    return CoverSolution(chosen, best["weight"], True, problem.provenance())


def a_tau_greedy(problem, f, cmap=None):
    """Weighted greedy cover: repeatedly take the least weight per new point."""
    cmap = cover_map(problem) if cmap is None else cmap
    _check_feasible(cmap)
    weights = np.exp(log_weights(problem, f))
    uncovered = np.ones(cmap.shape[1], dtype=bool)
    chosen = []
    while uncovered.any():
        gain = (cmap & uncovered).sum(axis=1)
        ratio = np.where(gain > 0, weights / np.maximum(gain, 1), np.inf)
        c = int(np.argmin(ratio))
        chosen.append(c)
        uncovered &= ~cmap[c]
    chosen = tuple(sorted(chosen))
    return CoverSolution(chosen, _cover_weight(weights, chosen), False, problem.provenance())


def r_inv(problem, cmap=None):
    """Minimal spanning-set cardinality of the discretized problem."""
    return a_tau_exact(problem, Constant(0.0), cmap).size


def final_states(problem, assignment):
    """End states ``phi(tau, x_p, omega_c)`` for ``(point, control)`` pairs."""
    idx = control_indices(problem)
    pts = np.array([problem.K_points[p] for p, _ in assignment]).T
    u = np.stack([problem.alphabet[idx[c]] for _, c in assignment], axis=-1)
    return simulate(problem.sys, pts, u, problem.dt, [problem.tau])[0].T


def assign(cmap, chosen):
    """For each point, the first chosen control (by index) that covers it."""
    out = []
    for p in range(cmap.shape[1]):
        c = next(c for c in chosen if cmap[c, p])
        out.append((p, c))
    return out
