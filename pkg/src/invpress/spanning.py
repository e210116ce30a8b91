"""Constructive spanning sets for hyperbolic controllable linear systems.

A cube of half-width ``b0`` around a point of a periodic base orbit is cut
into subcuboids: ``M_j(tau) = floor(e^{(rho_j + xi) tau}) + 1`` pieces per
unstable axis, one per stable axis. The centre ``lam`` of each subcuboid is
steered back to the base orbit within one base period ``tau0`` by a
minimum-energy correction added to the base control; afterwards the base
control runs alone until ``tau = k * tau0``. Concatenating ``n`` such
periods gives a spanning set for horizon ``n * tau``.

Family sizes grow like ``e^{(h + d xi) tau}``, so families are represented
implicitly. Trajectories are affine in (subcuboid centre, offset inside the
subcuboid), which lets a single check on the vertices of the two parameter
boxes certify every member at once.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import numerics
from .errors import HypothesisError, InputError, NumericsError
from .pressure import MARGIN_TOL, periodic_point, unstable_sum
from .regions import Box, contains, control_set_estimate, transport
from .system import ControlSignal, Extension, LinearSystem, sample_times, simulate

STEER_TOL = 1e-8


def partition_counts(spec, tau, xi):
    """Pieces per axis for each Lyapunov group of ``spec`` at horizon ``tau``."""
    if not (tau > 0 and xi > 0):
        raise InputError("tau and xi must be positive")
    return [int(math.floor(math.exp((rho + xi) * tau))) + 1 if rho >= 0 else 1 for rho, _ in spec.groups]


def steering_gain(sys, tau0, n_steps):
    """Gain ``G`` of shape ``(n_steps, m, d)`` with ``u_k = G[k] @ lam``.

    The piecewise-constant control of minimal l2 norm that drives ``lam`` to
    the origin in time ``tau0`` on a grid of ``n_steps`` equal intervals.
    """
    d, m = sys.dim, sys.n_inputs
    h = tau0 / n_steps
    Phi, G = sys.step_matrices(h)
    # column block k is Phi^{n-1-k} G
    blocks = [None] * n_steps
    acc = G
    for k in range(n_steps - 1, -1, -1):
        blocks[k] = acc
        acc = Phi @ acc
    C = np.hstack(blocks)
    sv = np.linalg.svd(C, compute_uv=False)
    if sv[-1] <= 1e-13 * sv[0]:
        raise HypothesisError("gramian_singular", "reachability Gramian is numerically singular")
    PhiN = numerics.expm(sys.A, tau0)
    gain, *_ = np.linalg.lstsq(C, -PhiN, rcond=None)
    return gain.reshape(n_steps, m, d)


@dataclass(frozen=True)
class SteeringResult:
    control: ControlSignal
    residual: float
    sup_norm: float


def steer_to_origin(sys, lam, tau0, dt=None, steer_tol=STEER_TOL, max_refine=4):
    """Piecewise-constant control steering ``lam`` to 0 in time ``tau0``.

    ``dt`` defaults to ``tau0 / 256``; it is halved up to ``max_refine`` times
    while the residual ``||phi(tau0, lam, u)||`` exceeds
    ``steer_tol * (1 + ||lam||)``.
    """
    tau0 = float(tau0)
    if not tau0 > 0:
        raise InputError("tau0 must be positive")
    lam = np.asarray(lam, dtype=float).reshape(sys.dim)
    if numerics.kalman_rank(sys.A, sys.B) < sys.dim:
        raise HypothesisError("uncontrollable", "(A, B) is not controllable")
    n_steps = 256 if dt is None else max(1, int(round(tau0 / float(dt))))
    bound = steer_tol * (1.0 + np.linalg.norm(lam))
    for _ in range(max_refine + 1):
        gain = steering_gain(sys, tau0, n_steps)
        values = gain @ lam
        omega = ControlSignal(tau0 / n_steps, values)
        residual = float(np.linalg.norm(simulate(sys, lam, values, omega.dt, [tau0])[0]))
        if residual <= bound:
            return SteeringResult(omega, residual, float(np.max(np.abs(values))))
        n_steps *= 2
    raise NumericsError(f"steering residual {residual:.3g} exceeds {bound:.3g} at the finest grid")


@dataclass(frozen=True)
class SpanningConfig:
    xi: float = 0.05
    b0: float = 0.1
    tau0: float = 1.0
    k: int = 4
    n: int = 1
    base_control: ControlSignal = None
    steer_steps: int = 256
    substeps: int = 1
    exact_cap: int = 200_000

    def __post_init__(self):
        if not (self.xi > 0 and self.b0 > 0 and self.tau0 > 0):
            raise InputError("xi, b0 and tau0 must be positive")
        if self.k < 1 or self.n < 1:
            raise InputError("k and n must be >= 1")

    def replace(self, **changes):
        kw = {f: getattr(self, f) for f in self.__dataclass_fields__}
        kw.update(changes)
        return SpanningConfig(**kw)


@dataclass(frozen=True, eq=False)
class SpanningFamily:
    """Implicit family of ``count`` controls spanning on ``[0, n * tau]``.

    ``log_sum`` is ``log sum_omega exp(S f(omega))``; it is exact when
    ``log_sum_exact`` and otherwise the convexity upper bound
    ``log(count) + max S f``.
    """

    tau: float
    n: int
    counts: tuple
    centers: tuple
    log_sum: float
    log_sum_exact: bool
    all_contained: bool
    returns_to_cube: bool
    cube_in_control_set: bool
    T: np.ndarray
    base: ControlSignal
    gain: np.ndarray
    x0: np.ndarray
    steer_sup_norm: float
    steer_constant: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def tau_total(self):
        return self.n * self.tau

    @property
    def count_per_period(self):
        return math.prod(self.counts)

    @property
    def count(self):
        return self.count_per_period**self.n

    @property
    def rate(self):
        return self.log_sum / self.tau_total

    def period_control(self, index):
        """Control for subcuboid ``index`` over one period ``[0, tau]`` (original coordinates)."""
        lam = np.array([c[i] for c, i in zip(self.centers, index)])
        n_steer = self.gain.shape[0]
        vals = self.base.steps(self.diagnostics["k"] * n_steer).copy()
        vals[:n_steer] += self.gain @ lam
        return ControlSignal(self.base.dt, vals)

    def controls(self):
        """Lazily yield every member as a full-horizon ControlSignal."""
        per_axis = [range(len(c)) for c in self.centers]
        for combo in itertools.product(itertools.product(*per_axis), repeat=self.n):
            vals = np.vstack([self.period_control(idx).values for idx in combo])
            yield combo, ControlSignal(self.base.dt, vals)

    def subcuboid(self, index):
        """The subcuboid for ``index`` as a Box in diagonal coordinates (relative to T x0)."""
        lam = np.array([c[i] for c, i in zip(self.centers, index)])
        h = np.array([self.diagnostics["b0"] / m for m in self.counts])
        y0 = self.T @ self.x0
        return Box(y0 + lam - h, y0 + lam + h)


@dataclass(frozen=True)
class CenterGrid:
    """Midpoints of ``count`` equal pieces of ``[-b0, b0]`` (never materialised unless asked)."""

    b0: float
    count: int

    def __len__(self):
        return self.count

    def __getitem__(self, i):
        if not 0 <= i < self.count:
            raise IndexError(i)
        return -self.b0 + (2 * i + 1) * self.b0 / self.count

    def array(self):
        return -self.b0 + (2 * np.arange(self.count) + 1) * self.b0 / self.count


def _axis_counts(spec, rates, tau, xi):
    Ms = partition_counts(spec, tau, xi)
    rhos = np.array(spec.rhos)
    out = []
    for r in rates:
        j = int(np.argmin(np.abs(rhos - r)))
        out.append(Ms[j])
    return out


def _resample(base, dt):
    ratio = base.dt / dt
    r = int(round(ratio))
    if r < 1 or abs(ratio - r) > 1e-9 * ratio:
        raise InputError("base control step must be an integer multiple of the steering step")
    return ControlSignal(dt, np.repeat(base.values, r, axis=0), Extension.PERIODIC)


def _hull_vertices(half):
    d = half.size
    bits = (np.arange(2**d)[:, None] >> np.arange(d)[None, :]) & 1
    return np.where(bits == 1, half, -half)


def build_spanning_family(sys, f, config=None, Q=None, x0=None, T=None):
    """Build and verify the spanning family for ``config``.

    ``Q`` (original coordinates) defaults to the control-set estimate. The
    returned family reports ``all_contained`` rather than raising when the
    sampled containment check fails.
    """
    config = config or SpanningConfig()
    spec = numerics.spectral_groups(sys.A)
    if not spec.hyperbolic:
        raise HypothesisError("non_hyperbolic", "A has eigenvalues on the imaginary axis")
    if numerics.kalman_rank(sys.A, sys.B) < sys.dim:
        raise HypothesisError("uncontrollable", "(A, B) is not controllable")
    D = control_set_estimate(sys, T)
    T, rates = D.T, D.rates
    dsys = LinearSystem(np.diag(rates), T @ sys.B, sys.U)
    d = sys.dim

    n_steer = config.steer_steps
    dt = config.tau0 / n_steer
    if config.base_control is None:
        _, u0 = f.inf_on_box(sys.U)
        base = ControlSignal(dt, u0[None, :], Extension.PERIODIC)
    else:
        base = config.base_control
        if base.n_steps > 1 and not math.isclose(base.duration, config.tau0, rel_tol=1e-9):
            raise InputError("base control must have period tau0")
    base = _resample(base, dt)
    if base.n_steps == 1:
        base = ControlSignal(dt, np.repeat(base.values, n_steer, axis=0), Extension.PERIODIC)
    u_margin = MARGIN_TOL * (1 + float(np.max(sys.U.half_widths)))
    if not base.in_box(sys.U, strict=True, margin=u_margin):
        raise HypothesisError("control_on_boundary", "base control must stay in the interior of U")

    if x0 is None:
        x0, _ = periodic_point(sys, base)
    x0 = np.asarray(x0, dtype=float).reshape(d)
    y0 = T @ x0

    k = config.k
    tau = k * config.tau0
    counts = _axis_counts(spec, rates, tau, config.xi)
    b0 = config.b0
    h = np.array([b0 / m for m in counts])
    centers = tuple(CenterGrid(b0, m) for m in counts)
    hull = b0 - h

    gain = steering_gain(dsys, config.tau0, n_steer)

    # every member's values stay in U: affine in lam, check hull vertices
    lam_v = _hull_vertices(hull)
    steer_v = np.einsum("kmd,vd->vkm", gain, lam_v)
    vals_v = base.values[None, :, :] + steer_v
    if not np.all(contains(sys.U, vals_v, strict=True, margin=u_margin)):
        raise HypothesisError("steering_exits_U", "steering controls leave U; decrease b0")
    sup_norm = float(np.max(np.abs(steer_v))) if steer_v.size else 0.0
    lam_norms = np.linalg.norm(lam_v, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratios = np.max(np.abs(steer_v), axis=(1, 2)) / lam_norms
    steer_constant = float(np.nanmax(ratios)) if np.any(lam_norms > 0) else 0.0

    # cube inside the control-set estimate
    cube = Box(y0 - b0, y0 + b0)
    dmargin = MARGIN_TOL * (1 + float(np.max(D.region.half_widths)))
    cube_in_D = bool(np.all(contains(D.region, cube.corners(), strict=True, margin=dmargin)))
    if not cube_in_D:
        raise HypothesisError("cube_outside_control_set", "x0 + C is not inside the control set; decrease b0")

    Qy = D.region if Q is None else transport(Q, T)

    # sampled containment over one period [0, tau]
    delta = dt / config.substeps
    ts0 = sample_times(config.tau0, delta)
    base_traj = simulate(dsys, y0, base.values, dt, ts0)  # (S0, d)
    eye = np.eye(d)
    # column j of Z0 is the response to lam = e_j under its steering control
    Z0 = simulate(dsys, eye, gain, dt, ts0)
    growth = np.exp(np.outer(ts0, rates))  # (S0, d): diagonal e^{At}
    eta_v = _hull_vertices(h)
    ok = True
    end_offsets = None
    Z_start = eye
    for j in range(k):
        # within period j the lam-part is e^{A s} Z(j tau0) (free) or Z0 for j == 0
        if j == 0:
            Zs = Z0
        else:
            Zs = growth[:, :, None] * Z_start[None, :, :]
        Es = growth * np.exp(rates * j * config.tau0)[None, :]
        off = np.einsum("sij,vj->svi", Zs, lam_v)[:, :, None, :] + (Es[:, None, :] * eta_v[None, :, :])[:, None, :, :]
        states = base_traj[:, None, None, :] + off
        ok &= bool(np.all(contains(Qy, states)))
        Z_start = Zs[-1]
        end_offsets = off[-1]
    returns = bool(np.all(contains(Box(-b0 * np.ones(d), b0 * np.ones(d)), end_offsets)))
    closure = float(np.max(np.abs(base_traj[-1] - y0)))
    if closure > 1e-8 * (1 + float(np.max(np.abs(y0)))):
        raise InputError("x0 is not on the periodic orbit of the base control")

    # log sum over one period, then n periods
    per_step = dt
    tail = (k - 1) * float(np.sum(np.atleast_1d(f(base.values)))) * per_step
    log_count = math.fsum(math.log(m) for m in counts)
    count = math.prod(counts)
    if count <= config.exact_cap:
        mesh = np.stack([g.ravel() for g in np.meshgrid(*[c.array() for c in centers], indexing="ij")], axis=-1)
        S = np.empty(count)
        for lo in range(0, count, 4096):
            lam = mesh[lo : lo + 4096]
            u = base.values[None, :, :] + np.einsum("kmd,vd->vkm", gain, lam)
            S[lo : lo + 4096] = np.sum(np.atleast_2d(f(u)), axis=-1) * per_step
        S += tail
        smax = float(np.max(S))
        per_period = log_count + smax + float(logsumexp(S - smax) - math.log(count)) if np.any(S != smax) else log_count + smax
        exact = True
    else:
        u = base.values[None, :, :] + steer_v
        smax = float(np.max(np.sum(np.atleast_2d(f(u)), axis=-1))) * per_step + tail
        per_period = log_count + smax
        exact = False
    log_sum = config.n * per_period

    diagnostics = {
        "b0": b0,
        "xi": config.xi,
        "tau0": config.tau0,
        "k": k,
        "dt": dt,
        "delta": delta,
        "base_closure_error": closure,
        "S0": unstable_sum(spec) + 2 * d * config.xi,
        "log_count_per_period": log_count,
    }
    return SpanningFamily(
        tau=tau,
        n=config.n,
        counts=tuple(counts),
        centers=centers,
        log_sum=log_sum,
        log_sum_exact=exact,
        all_contained=bool(ok and returns),
        returns_to_cube=returns,
        cube_in_control_set=cube_in_D,
        T=T,
        base=base,
        gain=gain,
        x0=x0,
        steer_sup_norm=sup_norm,
        steer_constant=steer_constant,
        diagnostics=diagnostics,
    )


@dataclass(frozen=True)
class EstimateRow:
    k: int
    n: int
    tau_total: float
    value: float
    contained: bool
    log_sum_exact: bool
    count_per_period: int


@dataclass(frozen=True)
class EstimateSeries:
    rows: tuple
    tail_sup: tuple
    tail_inf: tuple


def pressure_upper_estimate(sys, f, config=None, grid=None, Q=None, x0=None, T=None):
    """Finite-horizon upper proxies ``log_sum / (n k tau0)`` over a ``(k, n)`` grid.

    Rows are sorted by total horizon; ``tail_sup[i]`` / ``tail_inf[i]`` are
    the max / min of the values from row ``i`` on (limsup / liminf proxies).
    """
    config = config or SpanningConfig()
    grid = grid or [(k, 1) for k in range(1, config.k + 1)]
    rows = []
    for k, n in grid:
        fam = build_spanning_family(sys, f, config.replace(k=int(k), n=int(n)), Q, x0, T)
        rows.append(
            EstimateRow(int(k), int(n), fam.tau_total, fam.rate, fam.all_contained, fam.log_sum_exact, fam.count_per_period)
        )
    rows.sort(key=lambda r: (r.tau_total, r.k, r.n))
    vals = [r.value for r in rows]
    tail_sup = tuple(max(vals[i:]) for i in range(len(vals)))
    tail_inf = tuple(min(vals[i:]) for i in range(len(vals)))
    return EstimateSeries(tuple(rows), tail_sup, tail_inf)
