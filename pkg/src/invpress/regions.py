"""State-space sets: boxes, half-space polytopes and control-set estimates."""

from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from . import numerics
from .errors import HypothesisError, InputError


def _flags(value, n, name):
    arr = np.broadcast_to(np.asarray(value, dtype=bool), (n,)).copy()
    return arr


@dataclass(frozen=True, eq=False)
class Box:
    """Axis-aligned box with per-face open/closed flags.

    ``lo_closed[i]`` / ``hi_closed[i]`` say whether the lower / upper face of
    axis ``i`` belongs to the set.
    """

    lo: np.ndarray
    hi: np.ndarray
    lo_closed: np.ndarray = True
    hi_closed: np.ndarray = True

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float)).copy()
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float)).copy()
        if lo.ndim != 1 or lo.shape != hi.shape:
            raise InputError("Box bounds must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise InputError("Box bounds must be finite")
        if np.any(lo > hi):
            raise InputError("Box requires lo <= hi on every axis")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "lo_closed", _flags(self.lo_closed, lo.size, "lo_closed"))
        object.__setattr__(self, "hi_closed", _flags(self.hi_closed, lo.size, "hi_closed"))

    @classmethod
    def cube(cls, half_width, dim, center=None, closed=True):
        c = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
        return cls(c - half_width, c + half_width, closed, closed)

    @property
    def dim(self):
        return self.lo.size

    @property
    def center(self):
        return 0.5 * (self.lo + self.hi)

    @property
    def half_widths(self):
        return 0.5 * (self.hi - self.lo)

    def corners(self):
        """All 2^dim vertices, shape ``(2**dim, dim)``."""
        d = self.dim
        bits = (np.arange(2**d)[:, None] >> np.arange(d)[None, :]) & 1
        return np.where(bits == 1, self.hi, self.lo)

    def grid(self, per_axis):
        """Uniform tensor grid including the faces; degenerate axes give one point."""
        axes = []
        for lo, hi in zip(self.lo, self.hi):
            axes.append(np.array([lo]) if lo == hi else np.linspace(lo, hi, per_axis))
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def to_hpolytope(self):
        d = self.dim
        eye = np.eye(d)
        normals = np.vstack([eye, -eye])
        offsets = np.concatenate([self.hi, -self.lo])
        closed = np.concatenate([self.hi_closed, self.lo_closed])
        return HPolytope(normals, offsets, closed)

    def to_dict(self):
        return {
            "box": {
                "lo": self.lo.tolist(),
                "hi": self.hi.tolist(),
                "lo_closed": self.lo_closed.tolist(),
                "hi_closed": self.hi_closed.tolist(),
            }
        }

    def __repr__(self):
        parts = []
        for i in range(self.dim):
            left = "[" if self.lo_closed[i] else "("
            right = "]" if self.hi_closed[i] else ")"
            parts.append(f"{left}{self.lo[i]:.6g}, {self.hi[i]:.6g}{right}")
        return "Box(" + " x ".join(parts) + ")"


@dataclass(frozen=True, eq=False)
class HPolytope:
    """``{x : normals[i] . x <= offsets[i]}``, with ``<`` on open rows."""

    normals: np.ndarray
    offsets: np.ndarray
    closed: np.ndarray = True

    def __post_init__(self):
        N = np.atleast_2d(np.asarray(self.normals, dtype=float)).copy()
        b = np.atleast_1d(np.asarray(self.offsets, dtype=float)).copy()
        if N.shape[0] != b.size:
            raise InputError("HPolytope needs one offset per normal row")
        if not (np.all(np.isfinite(N)) and np.all(np.isfinite(b))):
            raise InputError("HPolytope data must be finite")
        object.__setattr__(self, "normals", N)
        object.__setattr__(self, "offsets", b)
        object.__setattr__(self, "closed", _flags(self.closed, b.size, "closed"))

    @property
    def dim(self):
        return self.normals.shape[1]

    def is_empty(self):
        """LP feasibility of the closed relaxation, with strictness for open rows."""
        d = self.dim
        # maximise slack s on open rows: N x + s*open <= b
        open_rows = (~self.closed).astype(float)
        A_ub = np.hstack([self.normals, open_rows[:, None]])
        c = np.zeros(d + 1)
        c[-1] = -1.0
        bounds = [(None, None)] * d + [(0, 1)]
        res = scipy.optimize.linprog(c, A_ub=A_ub, b_ub=self.offsets, bounds=bounds)
        if res.status == 2:
            return True
        if res.status != 0:
            raise InputError(f"emptiness LP failed: {res.message}")
        return bool(open_rows.any() and res.x[-1] <= 0)

    def to_dict(self):
        return {
            "hpolytope": {
                "normals": self.normals.tolist(),
                "offsets": self.offsets.tolist(),
                "closed": self.closed.tolist(),
            }
        }


def contains(r, x, strict=False, margin=0.0):
    """Membership of ``x`` (shape ``(d,)`` or ``(..., d)``) in ``r``.

    ``strict`` treats every face as open. ``margin`` shrinks the set by that
    amount per face before testing (used for interior checks).
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != r.dim:
        raise InputError(f"point has dimension {x.shape[-1]}, region has {r.dim}")
    if isinstance(r, Box):
        lo = r.lo + margin
        hi = r.hi - margin
        lo_ok = np.where(r.lo_closed & (not strict), x >= lo, x > lo)
        hi_ok = np.where(r.hi_closed & (not strict), x <= hi, x < hi)
        return np.all(lo_ok & hi_ok, axis=-1)
    if isinstance(r, HPolytope):
        norms = np.linalg.norm(r.normals, axis=1)
        vals = x @ r.normals.T
        b = r.offsets - margin * norms
        ok = np.where(r.closed & (not strict), vals <= b, vals < b)
        return np.all(ok, axis=-1)
    raise InputError(f"unsupported region type {type(r).__name__}")


def inflate(r, eps):
    """Open infinity-norm ``eps``-neighbourhood of a box."""
    if not isinstance(r, Box):
        raise InputError("inflate supports Box regions only")
    eps = float(eps)
    if not eps > 0:
        raise InputError("eps must be positive")
    return Box(r.lo - eps, r.hi + eps, False, False)


def transport(r, T):
    """Image ``T(r)`` as an HPolytope; face flags are preserved."""
    T = numerics.as_matrix(T, "T", square=True)
    if T.shape[0] != r.dim:
        raise InputError("T dimension does not match region")
    if np.linalg.cond(T) > 1e13:
        raise InputError("T is singular to working precision")
    P = r.to_hpolytope() if isinstance(r, Box) else r
    Tinv = np.linalg.inv(T)
    return HPolytope(P.normals @ Tinv, P.offsets.copy(), P.closed.copy())


def is_subset_box(inner, outer):
    """Closed-hull test ``inner subset outer`` for boxes, honouring open faces."""
    lo_ok = (inner.lo > outer.lo) | ((inner.lo == outer.lo) & (outer.lo_closed | ~inner.lo_closed))
    hi_ok = (inner.hi < outer.hi) | ((inner.hi == outer.hi) & (outer.hi_closed | ~inner.hi_closed))
    return bool(np.all(lo_ok & hi_ok))


@dataclass(frozen=True, eq=False)
class ControlSetEstimate:
    """Product-form estimate of the control set in diagonal coordinates.

    ``region`` lives in the coordinates ``y = T x`` where ``T A T^{-1}`` is
    diagonal with entries ``rates``. Stable axes are closed, unstable open.
    """

    region: Box
    exact: bool
    T: np.ndarray
    rates: np.ndarray
    notes: tuple = field(default=())

    def contains(self, x, strict=False, margin=0.0):
        """Membership of original-coordinate state(s) ``x``."""
        y = np.asarray(x, dtype=float) @ self.T.T
        return contains(self.region, y, strict=strict, margin=margin)

    def in_original_coordinates(self):
        return transport(self.region, np.linalg.inv(self.T))

    def to_dict(self):
        return {
            "coordinates": "diagonal",
            "T": self.T.tolist(),
            "rates": self.rates.tolist(),
            "region": self.region.to_dict(),
            "exact": self.exact,
            "notes": list(self.notes),
        }


def control_set_estimate(sys, T=None):
    """Estimate the unique control set with nonempty interior.

    In diagonal coordinates each axis ``i`` sees ``y_i' = r_i y_i + (T B u)_i``;
    its equilibria over ``u in U`` span an interval that is the axis projection
    of the control set. The product of these intervals is returned.
    """
    spec = numerics.spectral_groups(sys.A)
    if not spec.hyperbolic:
        raise HypothesisError("non_hyperbolic", "A has eigenvalues on the imaginary axis")
    if any(abs(z.imag) > 1e-10 * max(1.0, abs(z)) for z in spec.eigenvalues):
        raise HypothesisError("complex_spectrum", "control-set estimate needs a real spectrum")
    if numerics.kalman_rank(sys.A, sys.B) < sys.dim:
        raise HypothesisError("uncontrollable", "(A, B) is not controllable")
    if T is None:
        found = numerics.diagonalizer(sys.A)
        if found is None:
            raise HypothesisError("not_diagonalizable", "supply a diagonalizing T")
        T, rates = found
    else:
        T = numerics.as_matrix(T, "T", square=True)
        if T.shape[0] != sys.dim:
            raise InputError("T dimension does not match the system")
        if np.linalg.cond(T) > 1e13:
            raise InputError("T is singular to working precision")
        Dm = T @ sys.A @ np.linalg.inv(T)
        off = Dm - np.diag(np.diag(Dm))
        if np.max(np.abs(off)) > 1e-9 * max(1.0, np.max(np.abs(Dm))):
            raise InputError("T does not diagonalize A")
        rates = np.diag(Dm).copy()

    TB = T @ sys.B
    U = sys.U
    # range of (TB u)_i over the box: linear, so attained at per-axis bounds
    cmax = np.sum(np.maximum(TB * U.lo, TB * U.hi), axis=1)
    cmin = np.sum(np.minimum(TB * U.lo, TB * U.hi), axis=1)
    # equilibrium y_i = -(TB u)_i / r_i
    lo = np.where(rates > 0, -cmax / rates, cmin / -rates)
    hi = np.where(rates > 0, -cmin / rates, cmax / -rates)
    stable = rates < 0
    region = Box(lo, hi, stable, stable)

    notes = []
    support = np.abs(TB) > 1e-12 * max(1.0, np.max(np.abs(TB)))
    decoupled = bool(np.all(support.sum(axis=0) <= 1))
    n_stable, n_unstable = int(stable.sum()), int((~stable).sum())
    if sys.dim == 1:
        exact = True
    elif decoupled:
        exact = True
        notes.append("control channels act on disjoint coordinates")
    elif n_stable <= 1 and n_unstable <= 1:
        exact = True
        notes.append("one stable and one unstable axis sharing channels")
    else:
        exact = False
        notes.append("shared control channels within a stability class; product set is an estimate")
    return ControlSetEstimate(region, exact, T, rates, tuple(notes))
