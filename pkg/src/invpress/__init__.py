"""Invariance pressure of linear control systems.

Closed-form values, constructive spanning-set upper estimates, a discretized
set-cover oracle and a seeded property suite tying them together.
"""

from .errors import HypothesisError, InfeasibleError, InputError, InvariantError, InvPressError, NumericsError
from .potential import Affine, Constant, ScaledNorm
from .pressure import PressureValue, closed_form_pressure, entropy, periodic_bound
from .regions import Box, HPolytope, control_set_estimate
from .spanning import SpanningConfig, build_spanning_family, pressure_upper_estimate, steer_to_origin
from .system import ControlSignal, LinearSystem, simulate

__version__ = "0.1.0"

__all__ = [
    "Affine",
    "Box",
    "Constant",
    "ControlSignal",
    "HPolytope",
    "HypothesisError",
    "InfeasibleError",
    "InputError",
    "InvPressError",
    "InvariantError",
    "LinearSystem",
    "NumericsError",
    "PressureValue",
    "ScaledNorm",
    "SpanningConfig",
    "build_spanning_family",
    "closed_form_pressure",
    "control_set_estimate",
    "entropy",
    "periodic_bound",
    "pressure_upper_estimate",
    "simulate",
    "steer_to_origin",
]
