"""Closed-form invariance pressure of hyperbolic controllable linear systems."""

import enum
from dataclasses import dataclass, field

import numpy as np

from . import numerics
from .errors import HypothesisError
from .potential import Constant, birkhoff
from .regions import contains, control_set_estimate
from .system import Extension, sample_times, simulate

MARGIN_TOL = 1e-9


class Kind(str, enum.Enum):
    EXACT = "exact"
    UPPER_BOUND = "upper_bound"


@dataclass(frozen=True)
class PressureValue:
    value: float
    kind: Kind
    spectral_part: float
    potential_part: float
    witness: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "value": self.value,
            "kind": self.kind.value,
            "spectral_part": self.spectral_part,
            "potential_part": self.potential_part,
            "witness": self.witness,
        }


def unstable_sum(spec):
    """``sum_j max(0, d_j * rho_j)`` over the Lyapunov groups."""
    return float(sum(max(0.0, d * rho) for rho, d in spec.groups))


def _margin(half_width):
    return MARGIN_TOL * (1.0 + float(np.max(half_width)))


def _check_hyperbolic_controllable(sys):
    spec = numerics.spectral_groups(sys.A)
    if not spec.hyperbolic:
        raise HypothesisError("non_hyperbolic", "A has eigenvalues on the imaginary axis")
    if numerics.kalman_rank(sys.A, sys.B) < sys.dim:
        raise HypothesisError("uncontrollable", "(A, B) is not controllable")
    return spec


def closed_form_pressure(sys, f, T=None):
    """``sum max(0, n_l Re l) + min_U f`` when its hypotheses hold.

    Hypotheses checked, each with its own ``HypothesisError.reason``:
    hyperbolic ``A`` (``non_hyperbolic``), controllable pair
    (``uncontrollable``), minimiser of ``f`` interior to ``U``
    (``argmin_on_boundary``), equilibrium ``x0 = -A^{-1} B u0`` interior to
    the control-set estimate (``equilibrium_not_interior``). When the
    estimate is not exact the value is returned as an upper bound.
    """
    spec = _check_hyperbolic_controllable(sys)
    f_min, u0 = f.inf_on_box(sys.U)
    u_margin = _margin(sys.U.half_widths)
    if not contains(sys.U, u0, strict=True, margin=u_margin):
        raise HypothesisError(
            "argmin_on_boundary", f"minimiser {u0.tolist()} of f is not interior to U"
        )
    x0 = -np.linalg.solve(sys.A, sys.B @ u0) + 0.0
    D = control_set_estimate(sys, T)
    if not D.contains(x0, strict=True, margin=_margin(D.region.half_widths)):
        raise HypothesisError(
            "equilibrium_not_interior",
            f"equilibrium {x0.tolist()} is not interior to the control set",
        )
    h = unstable_sum(spec)
    kind = Kind.EXACT if D.exact else Kind.UPPER_BOUND
    witness = {"u0": u0.tolist(), "x0": x0.tolist(), "control_set_exact": D.exact}
    return PressureValue(h + f_min, kind, h, f_min, witness)


def entropy(sys, T=None):
    """Invariance entropy: the closed form with the zero potential."""
    return closed_form_pressure(sys, Constant(0.0), T)


def periodic_point(sys, omega):
    """Initial state of the periodic orbit driven by a periodic control.

    Solves ``(I - e^{AP}) x0 = int_0^P e^{A(P-s)} B omega(s) ds`` with ``P``
    the signal period; returns ``(x0, condition_number)``.
    """
    P = omega.duration
    forced = simulate(sys, np.zeros(sys.dim), omega.values, omega.dt, [P])[0]
    M = np.eye(sys.dim) - numerics.expm(sys.A, P)
    return np.linalg.solve(M, forced), float(np.linalg.cond(M))


def periodic_bound(sys, f, omega, T=None, delta=None):
    """Upper bound from one periodic control: ``h + (1/P) int_0^P f(omega)``.

    The orbit is checked (at sample instants spaced ``delta``, default dt/4)
    to stay strictly inside the control-set estimate, and the control values
    strictly inside ``U``.
    """
    spec = _check_hyperbolic_controllable(sys)
    if omega.extension is not Extension.PERIODIC:
        omega = type(omega)(omega.dt, omega.values, Extension.PERIODIC)
    if not omega.in_box(sys.U, strict=True, margin=_margin(sys.U.half_widths)):
        raise HypothesisError("control_on_boundary", "periodic control touches the boundary of U")
    x0, cond = periodic_point(sys, omega)
    D = control_set_estimate(sys, T)
    delta = omega.dt / 4 if delta is None else delta
    ts = sample_times(omega.duration, delta)
    orbit = simulate(sys, x0, omega.values, omega.dt, ts)
    if not np.all(D.contains(orbit, strict=True, margin=_margin(D.region.half_widths))):
        raise HypothesisError("orbit_exits_control_set", "periodic orbit leaves the control set interior")
    h = unstable_sum(spec)
    avg = birkhoff(f, omega, omega.duration) / omega.duration
    witness = {
        "x0": x0.tolist(),
        "period": omega.duration,
        "condition_number": cond,
        "closure_error": float(np.max(np.abs(orbit[-1] - x0))),
    }
    return PressureValue(h + avg, Kind.UPPER_BOUND, h, avg, witness)
