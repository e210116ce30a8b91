"""Potentials f : U -> R and their integrals along controls.

The family is closed on purpose: constants, affine functions and scaled
p-norms (all with an additive offset). Each variant knows its exact minimum
and maximum over an axis box.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .regions import contains


def _as_vec(u):
    return np.atleast_1d(np.asarray(u, dtype=float))


@dataclass(frozen=True)
class Constant:
    c: float = 0.0

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        shape = u.shape[:-1] if u.ndim else ()
        return np.full(shape, float(self.c)) if shape else float(self.c)

    def shift(self, c):
        return Constant(self.c + c)

    def inf_on_box(self, U):
        return float(self.c), np.zeros(U.dim)

    def sup_on_box(self, U):
        return float(self.c), np.zeros(U.dim)

    def to_dict(self):
        return {"type": "constant", "c": self.c}


@dataclass(frozen=True)
class Affine:
    """``u -> c + w . u``."""

    c: float
    w: tuple = field(default=(0.0,))

    def __post_init__(self):
        object.__setattr__(self, "w", tuple(float(x) for x in np.atleast_1d(self.w)))

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        val = self.c + u @ np.asarray(self.w)
        return float(val) if np.ndim(val) == 0 else val

    def shift(self, c):
        return Affine(self.c + c, self.w)

    def inf_on_box(self, U):
        w = np.asarray(self.w)
        # sign of w picks the vertex; w_i == 0 keeps the interior coordinate 0
        u = np.where(w > 0, U.lo, np.where(w < 0, U.hi, 0.0))
        return float(self.c + w @ u), u

    def sup_on_box(self, U):
        w = np.asarray(self.w)
        u = np.where(w > 0, U.hi, np.where(w < 0, U.lo, 0.0))
        return float(self.c + w @ u), u

    def to_dict(self):
        return {"type": "affine", "c": self.c, "w": list(self.w)}


@dataclass(frozen=True)
class ScaledNorm:
    """``u -> offset + alpha * ||u||_p`` with ``p`` in {1, 2, inf}."""

    alpha: float = 1.0
    p: float = 1
    offset: float = 0.0

    def __post_init__(self):
        if self.alpha < 0:
            raise InputError("ScaledNorm needs alpha >= 0")
        p = float(self.p)
        if p not in (1.0, 2.0, math.inf):
            raise InputError("ScaledNorm supports p in {1, 2, inf}")
        object.__setattr__(self, "p", p)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        val = self.offset + self.alpha * np.linalg.norm(u, ord=self.p, axis=-1)
        return float(val) if np.ndim(val) == 0 else val

    def shift(self, c):
        return ScaledNorm(self.alpha, self.p, self.offset + c)

    def inf_on_box(self, U):
        return float(self.offset), np.zeros(U.dim)

    def sup_on_box(self, U):
        # every p-norm is maximised at the vertex of largest |u_i| per axis
        u = np.where(np.abs(U.lo) > np.abs(U.hi), U.lo, U.hi)
        return float(self(u)), u

    def to_dict(self):
        p = "inf" if self.p == math.inf else int(self.p)
        return {"type": "norm", "alpha": self.alpha, "p": p, "offset": self.offset}


def evaluate(f, u, U=None):
    """``f(u)``, rejecting ``u`` outside ``U`` when a box is given."""
    u = _as_vec(u)
    if U is not None and not contains(U, u):
        raise InputError(f"control {u.tolist()} lies outside U")
    return float(f(u))


def birkhoff(f, omega, tau):
    """Exact integral ``int_0^tau f(omega(t)) dt`` for a piecewise-constant signal."""
    tau = float(tau)
    if tau < 0:
        raise InputError("tau must be non-negative")
    if tau == 0:
        return 0.0
    dt = omega.dt
    n_full = int(math.floor(tau / dt + 1e-12))
    rest = tau - n_full * dt
    if rest <= 1e-12 * max(1.0, tau):
        rest = 0.0
    n = n_full + (1 if rest > 0 else 0)
    vals = np.atleast_1d(f(omega.steps(n)))
    lengths = np.full(n, dt)
    if rest > 0:
        lengths[-1] = rest
    return math.fsum(vals * lengths)


def inf_on_box(f, U):
    return f.inf_on_box(U)


def sup_on_box(f, U):
    return f.sup_on_box(U)


def from_dict(spec):
    """Build a potential from a descriptor like ``{"type": "norm", "alpha": 1}``."""
    kind = spec.get("type")
    if kind == "constant":
        return Constant(float(spec.get("c", 0.0)))
    if kind == "affine":
        return Affine(float(spec.get("c", 0.0)), tuple(spec["w"]))
    if kind == "norm":
        p = spec.get("p", 1)
        p = math.inf if p in ("inf", "infinity", math.inf) else float(p)
        return ScaledNorm(float(spec.get("alpha", 1.0)), p, float(spec.get("offset", 0.0)))
    raise InputError(f"unknown potential type {kind!r}")
