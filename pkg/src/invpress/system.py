"""Linear control systems x' = Ax + Bu under piecewise-constant controls."""

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import numerics
from .errors import InputError
from .regions import Box, contains


def _as_control_box(U, m):
    if isinstance(U, Box):
        box = U
    else:
        arr = np.asarray(U, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise InputError("U must be a Box or a sequence of (lo, hi) pairs")
        box = Box(arr[:, 0], arr[:, 1])
    if box.dim != m:
        raise InputError(f"U has dimension {box.dim}, B has {m} columns")
    if not (np.all(box.lo < 0) and np.all(box.hi > 0)):
        raise InputError("U must contain the origin in its interior (lo < 0 < hi)")
    # U is compact
    return Box(box.lo, box.hi, True, True)


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """``x' = A x + B u`` with ``u`` in the closed axis box ``U``."""

    A: np.ndarray
    B: np.ndarray
    U: Box
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        A = numerics.as_matrix(self.A, "A", square=True)
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B[:, None]
        B = numerics.as_matrix(B, "B")
        if B.shape[0] != A.shape[0]:
            raise InputError(f"B has {B.shape[0]} rows, A is {A.shape[0]}x{A.shape[0]}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "U", _as_control_box(self.U, B.shape[1]))

    @property
    def dim(self):
        return self.A.shape[0]

    @property
    def n_inputs(self):
        return self.B.shape[1]

    def step_matrices(self, h):
        """``(e^{Ah}, Gamma(h) B)`` with ``Gamma(h) = int_0^h e^{As} ds``.

        Both blocks come from one exponential of ``[[A, B], [0, 0]] * h``.
        """
        key = round(float(h), 15)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        d, m = self.dim, self.n_inputs
        M = np.zeros((d + m, d + m))
        M[:d, :d] = self.A
        M[:d, d:] = self.B
        E = scipy.linalg.expm(M * key)
        out = (E[:d, :d], E[:d, d:])
        self._cache[key] = out
        return out

    def to_dict(self):
        return {
            "A": self.A.tolist(),
            "B": self.B.tolist(),
            "U": np.column_stack([self.U.lo, self.U.hi]).tolist(),
        }


class Extension(str, enum.Enum):
    HOLD = "hold-last"
    PERIODIC = "periodic"


@dataclass(frozen=True, eq=False)
class ControlSignal:
    """Piecewise-constant control ``u(t) = values[floor(t / dt)]``.

    Beyond ``len(values) * dt`` the signal either holds its last value or
    repeats periodically.
    """

    dt: float
    values: np.ndarray
    extension: Extension = Extension.HOLD

    def __post_init__(self):
        dt = float(self.dt)
        if not (np.isfinite(dt) and dt > 0):
            raise InputError("dt must be positive and finite")
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        if vals.ndim != 2 or vals.shape[0] < 1:
            raise InputError("control values must be a non-empty (N, m) array")
        if not np.all(np.isfinite(vals)):
            raise InputError("control values must be finite")
        object.__setattr__(self, "dt", dt)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "extension", Extension(self.extension))

    @classmethod
    def constant(cls, u, dt=1.0, extension=Extension.HOLD):
        return cls(dt, np.atleast_1d(np.asarray(u, dtype=float))[None, :], extension)

    @property
    def n_steps(self):
        return self.values.shape[0]

    @property
    def duration(self):
        return self.n_steps * self.dt

    def value(self, k):
        """Control value on interval ``k`` (any ``k >= 0``)."""
        n = self.n_steps
        if k < n:
            return self.values[k]
        if self.extension is Extension.PERIODIC:
            return self.values[k % n]
        return self.values[-1]

    def steps(self, n):
        """First ``n`` interval values as an ``(n, m)`` array."""
        idx = np.arange(n)
        if self.extension is Extension.PERIODIC:
            idx = idx % self.n_steps
        else:
            idx = np.minimum(idx, self.n_steps - 1)
        return self.values[idx]

    def shift(self, n_steps):
        """The control ``t -> u(t + n_steps * dt)`` (shift along the grid)."""
        n = self.n_steps
        if self.extension is Extension.PERIODIC:
            return ControlSignal(self.dt, np.roll(self.values, -(n_steps % n), axis=0), self.extension)
        start = min(n_steps, n - 1)
        return ControlSignal(self.dt, self.values[start:], self.extension)

    def concat(self, other):
        if not np.isclose(self.dt, other.dt, rtol=0, atol=1e-15):
            raise InputError("concatenated signals must share dt")
        return ControlSignal(self.dt, np.vstack([self.values, other.values]), other.extension)

    def __add__(self, other):
        if not isinstance(other, ControlSignal):
            return NotImplemented
        if self.dt != other.dt:
            raise InputError("added signals must share dt")
        n = max(self.n_steps, other.n_steps)
        return ControlSignal(self.dt, self.steps(n) + other.steps(n), self.extension)

    def in_box(self, U, strict=False, margin=0.0):
        return bool(np.all(contains(U, self.values, strict=strict, margin=margin)))


def _intervals(dt, t_end, sample_times=()):
    """Breakpoints merging the control grid and sample times on ``[0, t_end]``."""
    n_full = int(np.floor(t_end / dt + 1e-12))
    grid = dt * np.arange(n_full + 1)
    pts = np.unique(np.concatenate([grid, np.asarray(sample_times, dtype=float), [t_end]]))
    pts = pts[(pts >= 0) & (pts <= t_end)]
    # collapse breakpoints closer than round-off
    keep = np.concatenate([[True], np.diff(pts) > 1e-12 * max(1.0, t_end)])
    pts = pts[keep]
    pts[-1] = t_end
    return pts


def simulate(sys, x0, u_steps, dt, sample_times):
    """States at ``sample_times`` under controls ``u_steps[k]`` on ``[k dt, (k+1) dt)``.

    ``x0`` may be ``(d,)`` or ``(d, P)`` for ``P`` initial states; ``u_steps``
    may be ``(N, m)`` or ``(N, m, P)``. Integration is exact per interval.
    Returns an array of shape ``(S, d)`` or ``(S, d, P)``.
    """
    x = np.array(x0, dtype=float)
    sample_times = np.asarray(sample_times, dtype=float)
    t_end = float(sample_times.max()) if sample_times.size else 0.0
    pts = _intervals(dt, t_end, sample_times)
    u_steps = np.asarray(u_steps, dtype=float)
    if x.ndim == 2 and u_steps.ndim == 2:
        u_steps = u_steps[:, :, None]
    out = np.empty((sample_times.size,) + x.shape)
    tol = 1e-12 * max(1.0, t_end)
    slot = np.searchsorted(pts, sample_times - tol)
    order = np.argsort(slot, kind="stable")
    cursor = 0
    n_u = u_steps.shape[0]
    for j in range(pts.size):
        if j > 0:
            a, b = pts[j - 1], pts[j]
            k = min(int(np.floor(a / dt + 1e-9)), n_u - 1)
            Phi, G = sys.step_matrices(b - a)
            x = Phi @ x + G @ u_steps[k]
        while cursor < order.size and slot[order[cursor]] == j:
            out[order[cursor]] = x
            cursor += 1
    return out


def sample_times(tau, delta):
    """``{0, delta, 2 delta, ..., tau}`` (``tau`` always included)."""
    n = int(np.floor(tau / delta + 1e-9))
    ts = delta * np.arange(n + 1)
    if tau - ts[-1] > 1e-12 * max(1.0, tau):
        ts = np.append(ts, tau)
    return ts


def solve(sys, x0, omega, t):
    """Exact solution ``phi(t, x0, omega)`` of the variation-of-constants formula."""
    t = float(t)
    if not t >= 0:
        raise InputError("t must be non-negative")
    x0 = np.asarray(x0, dtype=float).reshape(sys.dim)
    n = int(np.ceil(t / omega.dt - 1e-12)) + 1
    return simulate(sys, x0, omega.steps(n), omega.dt, [t])[0]


def trajectory(sys, x0, omega, tau, delta=None):
    """Sampled states at ``sample_times(tau, delta)``; ``delta`` defaults to dt/4."""
    delta = omega.dt / 4 if delta is None else float(delta)
    ts = sample_times(float(tau), delta)
    n = int(np.ceil(tau / omega.dt - 1e-12)) + 1
    x0 = np.asarray(x0, dtype=float).reshape(sys.dim)
    return ts, simulate(sys, x0, omega.steps(n), omega.dt, ts)


def trajectory_in(sys, x0, omega, tau, Q, delta=None):
    """Sampled containment of the trajectory on ``[0, tau]`` in ``Q``.

    Only the sample instants are checked; excursions between samples are
    not detected.
    """
    delta = omega.dt / 4 if delta is None else float(delta)
    if delta > omega.dt * (1 + 1e-12):
        raise InputError("delta must not exceed the control step dt")
    if tau < 0:
        raise InputError("tau must be non-negative")
    _, xs = trajectory(sys, x0, omega, tau, delta)
    return bool(np.all(contains(Q, xs)))


def conjugate(sys, T):
    """The system ``(T A T^{-1}, T B, U)``, linearly conjugate via ``x -> T x``."""
    T = numerics.as_matrix(T, "T", square=True)
    if T.shape[0] != sys.dim:
        raise InputError("T dimension does not match the system")
    cond = np.linalg.cond(T)
    if not np.isfinite(cond) or cond > 1e13:
        raise InputError(f"T is singular to working precision (cond={cond:.3g})")
    Tinv = np.linalg.inv(T)
    return LinearSystem(T @ sys.A @ Tinv, T @ sys.B, sys.U)


class Verdict(str, enum.Enum):
    CONFIRMED = "confirmed"
    UNCONFIRMED = "unconfirmed"


def check_admissible(sys, K, Q, search=None):
    """Finite-horizon heuristic check that ``(K, Q)`` is an admissible pair.

    ``search`` is an :class:`invpress.oracle.SearchParams`; every point of a
    grid on ``K`` must be kept in ``Q`` by at least one enumerated control.
    """
    from .oracle import SearchParams, build_problem, cover_map

    search = search or SearchParams()
    if not isinstance(K, Box):
        raise InputError("K must be a Box")
    problem = build_problem(sys, K, Q, search)
    if not np.all(contains(Q, problem.K_points)):
        return Verdict.UNCONFIRMED
    covered = np.any(cover_map(problem), axis=0)
    return Verdict.CONFIRMED if bool(np.all(covered)) else Verdict.UNCONFIRMED
