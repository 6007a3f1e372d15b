"""Flow engine: KRF / NKRF / potential Monge-Ampere flow on CP^1 profiles,
reparametrization between the flows, evolution residuals, singularity-type
classification and blow-up rescaling.

Profile form of the flows (u = potential-derivative profile, ' = d/ds,
q = u''/u' in x-regular form):

    NKRF (lam = 1):  du/dt = q + u - 1      (fixed point: Fubini-Study)
    KRF  (lam = 0):  du/dt = q - 1          (class shrinks, u(+1) = 2 - 2t)
    potential flow:  dphi/dt = log(u_x / u~_x) + f~ + phi + b(t)

The integrator advances requested macro steps (the stored / diagnostic
sampling) with internal substepping when the explicit RK4 stability bound
of the collocation operator requires it: the FS-linearized operator has
exact eigenvalues -k(k+1)/2, so the spectral radius is about
N(N+1)/2 * max(1/u_x).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import (
    InconclusiveError,
    NoPickError,
    NonPositiveError,
    SingularTimeApproachedError,
    StepRejectedError,
    WindowExceededError,
)
from .fields import HermitianMetricField, ScalarField
from .geometry import (
    radial_basics,
    radial_chart_metric,
    radial_laplacian,
    radial_metric_field,
    radial_volume_element,
)
from .grids import RadialGrid
from .models import RadialProfile

RK4_REAL_AXIS = 2.785  # stability interval of classical RK4 on (-x, 0]


@dataclass
class StepControl:
    """Integrator policy: scheme, macro step, stability and curvature guards."""

    dt: float = 1e-3
    scheme: str = "rk4"          # "rk4" | "imex1"
    substep: str = "auto"        # "auto" | "off"
    cfl_safety: float = 0.8
    curvature_c: float = 0.1     # dt <= curvature_c / K_max
    max_rejects: int = 20
    singular_guard: float = 1e-3  # KRF halts when 1 - t < guard
    kmax_guard: float = 1e6


@dataclass
class PotentialGauge:
    """Potential-flow representation (background, phi, gauge constant)."""

    background_u: np.ndarray
    background_f: np.ndarray
    phi: np.ndarray
    b: float = 0.0


@dataclass
class FlowState:
    """Time-stamped flow state on a radial CP^1 grid."""

    t: float
    lam: float                      # 1 = NKRF, 0 = KRF
    grid: RadialGrid
    u: np.ndarray
    potential: Optional[PotentialGauge] = None

    def metric(self) -> HermitianMetricField:
        prof = RadialProfile(self.grid, self.u, check=False)
        return radial_metric_field(self.grid, self.u, class_tag="pi*c1(CP^1)",
                                   profile=prof)

    def volume(self):
        """Kahler volume pi^n u(+1)^n / n! without quadrature error."""
        from math import factorial, pi

        n = self.grid.complex_dim
        return (pi ** n / factorial(n)) * float(self.u[-1]) ** n


def _rhs_tensor(grid, u, lam):
    ux = grid.d1 @ u
    uxx = grid.d2 @ u
    q = -grid.x + 0.5 * (1.0 - grid.x ** 2) * uxx / ux
    return q + lam * u - 1.0


def _scalar_curvature(grid, u):
    b = radial_basics(grid, u)
    return b.scalar


def _stable_dt(grid, u, control, lam):
    ux = grid.d1 @ u
    if np.any(ux <= 0.0):
        raise NonPositiveError((int(np.argmin(ux)),), float(np.min(ux)))
    rho = 0.5 * grid.n * (grid.n + 1) * float(np.max(1.0 / ux))
    dt_cfl = control.cfl_safety * RK4_REAL_AXIS / rho
    r = _scalar_curvature(grid, u)
    kmax = float(np.max(np.abs(r)))
    dt_curv = control.curvature_c / max(kmax, 1e-12)
    return dt_cfl, dt_curv, kmax


def _rk4(grid, u, dt, lam):
    k1 = _rhs_tensor(grid, u, lam)
    k2 = _rhs_tensor(grid, u + 0.5 * dt * k1, lam)
    k3 = _rhs_tensor(grid, u + 0.5 * dt * k2, lam)
    k4 = _rhs_tensor(grid, u + dt * k3, lam)
    return u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _imex1(grid, u, dt, lam):
    """First-order IMEX: implicit frozen linearization of the q term."""
    x = grid.x
    ux = grid.d1 @ u
    uxx = grid.d2 @ u
    a = 0.5 * (1.0 - x ** 2) / ux
    bcoef = -0.5 * (1.0 - x ** 2) * uxx / ux ** 2
    lin = a[:, None] * grid.d2 + bcoef[:, None] * grid.d1
    lin += lam * np.eye(len(x))
    rhs_full = _rhs_tensor(grid, u, lam)
    mat = np.eye(len(x)) - dt * lin
    return u + dt * np.linalg.solve(mat, rhs_full)


def _pin_endpoints(u, lam, u0_end, u1_end, t):
    # the pole dynamics are exact (RHS vanishes there for NKRF; linear decay
    # for KRF at the north end); pinning removes exponential roundoff growth
    u[0] = u0_end
    u[-1] = u1_end if lam == 1.0 else u1_end - 2.0 * t
    return u


def _advance_tensor(state: FlowState, dt_macro, control: StepControl):
    """One macro step, internally substepped; returns (state, info)."""
    grid = state.grid
    lam = state.lam
    u = state.u.copy()
    rejects = 0
    u0_end = float(state.u[0])
    u1_end = float(state.u[-1]) + (0.0 if lam == 1.0 else 2.0 * state.t)
    while True:
        dt_cfl, dt_curv, kmax = _stable_dt(grid, u, control, lam)
        if lam == 0.0 and kmax > control.kmax_guard:
            raise SingularTimeApproachedError(state.t, kmax)
        if control.substep == "off" or control.scheme == "imex1":
            dt_lim = dt_curv if control.scheme == "imex1" else dt_macro
            n_sub = max(int(np.ceil(dt_macro / max(dt_lim, 1e-300))), 1) \
                if control.scheme == "imex1" else 1
        else:
            dt_lim = min(dt_cfl, dt_curv)
            n_sub = max(int(np.ceil(dt_macro / dt_lim)), 1)
        n_sub <<= rejects  # halve the substep on every rejection
        dt_sub = dt_macro / n_sub
        unew = u
        ok = True
        stepper = _imex1 if control.scheme == "imex1" else _rk4
        for m in range(n_sub):
            unew = stepper(grid, unew, dt_sub, lam)
            t_here = state.t + (m + 1) * dt_sub
            unew = _pin_endpoints(unew, lam, u0_end, u1_end, t_here)
            ux = grid.d1 @ unew
            if not np.all(np.isfinite(unew)) or np.any(ux <= 0.0):
                ok = False
                break
        if ok:
            info = {"substeps": n_sub, "rejects": rejects, "k_max": kmax,
                    "dt": dt_macro}
            new_state = replace(state, t=state.t + dt_macro, u=unew)
            return new_state, info
        rejects += 1
        if rejects > control.max_rejects:
            raise StepRejectedError(
                f"macro step at t={state.t:.6f} rejected {rejects} times")


def nkrf_step(state: FlowState, dt, control: Optional[StepControl] = None):
    """Advance the normalized flow dg/dt = -Rc + g by one macro step."""
    if state.lam != 1.0:
        raise ValueError("nkrf_step needs a state with lam = 1")
    control = control or StepControl(dt=dt)
    new_state, info = _advance_tensor(state, dt, control)
    drift = abs(new_state.volume() - state.volume()) / state.volume()
    if drift > 1e-9:
        raise StepRejectedError(f"volume drift {drift:.3e} in one step")
    return new_state


def krf_step(state: FlowState, dt, control: Optional[StepControl] = None):
    """Advance the unnormalized flow dg/dt = -Rc by one macro step.

    The Kahler class tracks [omega] = (1 - t) pi c1: u(+1) = 2(1 - t).
    """
    if state.lam != 0.0:
        raise ValueError("krf_step needs a state with lam = 0")
    control = control or StepControl(dt=dt)
    if 1.0 - (state.t + dt) < control.singular_guard:
        raise SingularTimeApproachedError(state.t, float("nan"))
    new_state, _ = _advance_tensor(state, dt, control)
    return new_state


def potential_flow_step(state: FlowState, dt,
                        control: Optional[StepControl] = None):
    """Advance the scalar Monge-Ampere flow on the potential.

    The gauge constant is chosen every evaluation so that the flow velocity
    equals the normalized Ricci potential, phi_t = f.
    """
    from .errors import GaugeSolveFailedError
    from .functionals import ricci_potential_profile

    if state.potential is None:
        raise ValueError("potential_flow_step needs a potential representation")
    control = control or StepControl(dt=dt)
    grid = state.grid
    pot = state.potential
    ux_bg = grid.d1 @ pot.background_u
    weights_ref = grid.weights

    def u_of(phi):
        return pot.background_u + grid.ds(phi, "spectral")

    last_b = [pot.b]

    def rhs(phi):
        u = u_of(phi)
        ux = grid.d1 @ u
        if np.any(ux <= 0.0):
            raise NonPositiveError((int(np.argmin(ux)),), float(np.min(ux)))
        f0 = np.log(ux / ux_bg) + pot.background_f + phi
        try:
            f, _ = ricci_potential_profile(grid, u)
        except Exception as exc:  # normalization integral failure
            raise GaugeSolveFailedError(str(exc))
        w = weights_ref * radial_volume_element(grid, u)
        b = float(np.sum(w * (f - f0)) / np.sum(w))
        last_b[0] = b
        return f0 + b

    # stability: same diffusive principal part as the tensor flow
    dt_cfl, dt_curv, kmax = _stable_dt(grid, u_of(pot.phi), control, 1.0)
    if control.substep == "off":
        n_sub = 1
    else:
        n_sub = max(int(np.ceil(dt / min(dt_cfl, dt_curv))), 1)
    dt_sub = dt / n_sub
    phi = pot.phi.copy()
    for _ in range(n_sub):
        k1 = rhs(phi)
        k2 = rhs(phi + 0.5 * dt_sub * k1)
        k3 = rhs(phi + 0.5 * dt_sub * k2)
        k4 = rhs(phi + dt_sub * k3)
        phi = phi + (dt_sub / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    new_pot = PotentialGauge(pot.background_u, pot.background_f, phi,
                             b=last_b[0])
    return replace(state, t=state.t + dt, u=u_of(phi), potential=new_pot)


def gauge_residual(state: FlowState) -> float:
    """sup |phi_t - f|: spatial deviation of the gauge identity."""
    from .functionals import ricci_potential_profile

    pot = state.potential
    grid = state.grid
    u = state.u
    ux_bg = grid.d1 @ pot.background_u
    ux = grid.d1 @ u
    f0 = np.log(ux / ux_bg) + pot.background_f + pot.phi
    f, _ = ricci_potential_profile(grid, u)
    w = grid.weights * radial_volume_element(grid, u)
    b = float(np.sum(w * (f - f0)) / np.sum(w))
    return float(np.max(np.abs(f0 + b - f)))


@dataclass
class Trajectory:
    """Stored macro-step history of one flow run."""

    lam: float
    grid: Optional[RadialGrid]
    times: np.ndarray                    # (steps + 1,)
    dts: np.ndarray                      # (steps,)
    u_profiles: np.ndarray               # (steps + 1, nodes)
    r_profiles: np.ndarray               # (steps + 1, nodes)
    diagnostics: list = field(default_factory=list)  # one row per step
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")
        if len(self.diagnostics) not in (0, len(self.dts)):
            raise ValueError("diagnostics rows must match accepted steps")

    def state(self, i) -> FlowState:
        return FlowState(float(self.times[i]), self.lam, self.grid,
                         self.u_profiles[i].copy())

    @property
    def k_max_series(self):
        return np.max(np.abs(self.r_profiles), axis=1)


def trajectory_metric(traj: Trajectory, i) -> HermitianMetricField:
    u = traj.u_profiles[i]
    prof = RadialProfile(traj.grid, u, check=False)
    return radial_metric_field(traj.grid, u, class_tag="pi*c1(CP^1)",
                               profile=prof)


def run_flow(state0: FlowState, t_end, control: Optional[StepControl] = None,
             on_step=None) -> Trajectory:
    """Integrate to t_end, storing every macro step.

    KRF runs may stop early at the singular-time guard; the trajectory meta
    records the truncation.
    """
    control = control or StepControl()
    grid = state0.grid
    state = state0
    times = [state.t]
    dts = []
    us = [state.u.copy()]
    rs = [_scalar_curvature(grid, state.u)]
    diagnostics = []
    truncated = False
    reason = ""
    step_fn = {1.0: nkrf_step, 0.0: krf_step}.get(state0.lam)
    if state0.potential is not None:
        step_fn = potential_flow_step
    n_steps = int(round((t_end - state0.t) / control.dt))
    for k in range(n_steps):
        dt = min(control.dt, t_end - state.t)
        if dt <= 0:
            break
        try:
            state = step_fn(state, dt, control)
        except SingularTimeApproachedError as exc:
            truncated = True
            reason = str(exc)
            break
        r = _scalar_curvature(grid, state.u)
        times.append(state.t)
        dts.append(dt)
        us.append(state.u.copy())
        rs.append(r)
        w = grid.weights * radial_volume_element(grid, state.u)
        vol = float(np.sum(w))
        row = {
            "t": state.t,
            "dt": dt,
            "vol": vol,
            "R_min": float(np.min(r)),
            "R_max": float(np.max(r)),
            "R_avg": float(np.sum(w * r)) / vol,
            "K_max": float(np.max(np.abs(r))),
            "bisec_min": float(np.min(r)),
        }
        diagnostics.append(row)
        if on_step is not None:
            on_step(state, row)
    return Trajectory(lam=state0.lam, grid=grid, times=np.array(times),
                      dts=np.array(dts), u_profiles=np.array(us),
                      r_profiles=np.array(rs), diagnostics=diagnostics,
                      meta={"truncated": truncated, "reason": reason,
                            "scheme": control.scheme})


def initial_state(metric: HermitianMetricField, lam=1.0,
                  potential=False) -> FlowState:
    """Flow state from a radial CP^1 metric (optionally in potential form)."""
    from .functionals import ricci_potential_profile

    grid = metric.grid
    u = metric.profile.u.copy()
    pot = None
    if potential:
        f_bg, _ = ricci_potential_profile(grid, u)
        pot = PotentialGauge(u.copy(), f_bg, np.zeros_like(u), 0.0)
    return FlowState(0.0, lam, grid, u, potential=pot)


# ----------------------------------------------------------------------------
# Reparametrization (NKRF <-> KRF)
# ----------------------------------------------------------------------------

def reparametrize(traj: Trajectory, window=None) -> Trajectory:
    """Map an NKRF trajectory to KRF, g_hat(s) = (1-s) g(t(s)) with
    s = 1 - e^{-t}, or back (detected from traj.lam)."""
    if traj.lam == 1.0:
        s = 1.0 - np.exp(-traj.times)
        if window is not None and s[-1] < window - 1e-12:
            raise WindowExceededError(
                f"requested s-window {window} beyond coverage {s[-1]:.6f}")
        scale = (1.0 - s)[:, None]
        us = scale * traj.u_profiles
        rs = traj.r_profiles / scale
        return Trajectory(lam=0.0, grid=traj.grid, times=s,
                          dts=np.diff(s), u_profiles=us, r_profiles=rs,
                          meta={"reparametrized_from": "nkrf"})
    t = -np.log(1.0 - traj.times)
    if window is not None and t[-1] < window - 1e-12:
        raise WindowExceededError(
            f"requested t-window {window} beyond coverage {t[-1]:.6f}")
    scale = np.exp(t)[:, None]
    us = scale * traj.u_profiles
    rs = traj.r_profiles / scale
    return Trajectory(lam=1.0, grid=traj.grid, times=t, dts=np.diff(t),
                      u_profiles=us, r_profiles=rs,
                      meta={"reparametrized_from": "krf"})


# ----------------------------------------------------------------------------
# Evolution residuals
# ----------------------------------------------------------------------------

def _time_derivative(series, times):
    """Second-order derivative of a (time, nodes) series on a possibly
    nonuniform time grid; one-sided second-order stencils at the ends."""
    series = np.asarray(series)
    times = np.asarray(times)
    out = np.empty_like(series)
    for i in range(len(times)):
        if 0 < i < len(times) - 1:
            h1 = times[i] - times[i - 1]
            h2 = times[i + 1] - times[i]
            out[i] = (-h2 / (h1 * (h1 + h2)) * series[i - 1]
                      + (h2 - h1) / (h1 * h2) * series[i]
                      + h1 / (h2 * (h1 + h2)) * series[i + 1])
        elif i == 0:
            h1 = times[1] - times[0]
            h2 = times[2] - times[1]
            out[0] = (-(2 * h1 + h2) / (h1 * (h1 + h2)) * series[0]
                      + (h1 + h2) / (h1 * h2) * series[1]
                      - h1 / (h2 * (h1 + h2)) * series[2])
        else:
            h1 = times[-1] - times[-2]
            h2 = times[-2] - times[-3]
            out[-1] = ((2 * h1 + h2) / (h1 * (h1 + h2)) * series[-1]
                       - (h1 + h2) / (h1 * h2) * series[-2]
                       + h1 / (h2 * (h1 + h2)) * series[-3])
    return out


@dataclass
class EvolutionResiduals:
    times: np.ndarray
    scalar_eq: np.ndarray      # d R/dt = Lap R + |Rc|^2 - lam R
    ricci_eq: np.ndarray       # component form on R_{1 1bar}
    volume_eq: np.ndarray      # d(det g)/dt = (lam n - R) det g

    def sup(self):
        return {"scalar_eq": float(np.max(self.scalar_eq)),
                "ricci_eq": float(np.max(self.ricci_eq)),
                "volume_eq": float(np.max(self.volume_eq))}


def evolution_residuals(traj: Trajectory) -> EvolutionResiduals:
    """Sup-norm residuals of the curvature / volume evolution laws per time."""
    if len(traj.times) < 3:
        raise ValueError("need at least 3 states for time differencing")
    grid = traj.grid
    lam = traj.lam
    n = grid.complex_dim
    rdot = _time_derivative(traj.r_profiles, traj.times)
    wseries = []
    lap_r = []
    ric_comp = []
    lap_ric = []
    for i in range(len(traj.times)):
        u = traj.u_profiles[i]
        r = traj.r_profiles[i]
        diag, _ = radial_chart_metric(grid, u)
        w = diag[:, 0]
        wseries.append(w)
        lr = radial_laplacian(grid, u, r)
        lap_r.append(lr)
        ric_comp.append(w * r)
        lap_ric.append(w * lr)  # Lap(R_{1 1bar}) = W * Lap(R) in dim 1
    wseries = np.array(wseries)
    lap_r = np.array(lap_r)
    ric_comp = np.array(ric_comp)
    lap_ric = np.array(lap_ric)
    r = traj.r_profiles
    # (2.10): dR/dt = Lap R + |Rc|^2 - lam R, |Rc|^2 = R^2 in dim 1
    res_scalar = np.max(np.abs(rdot - (lap_r + r ** 2 - lam * r)), axis=1)
    # (2.9): d R_{1 1bar}/dt = Lap Rc + Rm*Rc - Rc*Rc (lambda-free)
    ricdot = _time_derivative(ric_comp, traj.times)
    rm_rc = wseries * r ** 2   # R_{1 1bar 1 1bar} contracted with Ricci
    rc_rc = wseries * r ** 2   # R_{1 kbar} R_{k 1bar} contraction
    res_ricci = np.max(np.abs(ricdot - (lap_ric + rm_rc - rc_rc)), axis=1)
    # volume element: d(det g)/dt = (lam n - R) det g
    wdot = _time_derivative(wseries, traj.times)
    res_vol = np.max(np.abs(wdot - (lam * n - r) * wseries), axis=1)
    return EvolutionResiduals(traj.times, res_scalar, res_ricci, res_vol)


# ----------------------------------------------------------------------------
# Singularity type and blow-up rescaling
# ----------------------------------------------------------------------------

@dataclass
class TypeReport:
    sup_product: float                  # sup (1-s) K_hat_max(s)
    classification: str                 # TypeI | TypeII-suspected | inconclusive
    witness_times: np.ndarray
    product_series: np.ndarray
    nkrf_kmax_bound: float              # sup K_max(t) of the NKRF picture


def classify_type(traj: Trajectory, singular_threshold=50.0,
                  bound_factor=3.0) -> TypeReport:
    """Type I/II dichotomy from the tracked product (1-s) K_hat_max(s).

    Raises Inconclusive when the window never develops large curvature (no
    singularity approached), e.g. on a flat trajectory.
    """
    if traj.lam != 0.0:
        raise ValueError("classification applies to KRF trajectories")
    kmax = traj.k_max_series
    if float(np.max(kmax)) < singular_threshold:
        raise InconclusiveError(
            f"window reaches K_hat_max = {float(np.max(kmax)):.3g} "
            f"< threshold {singular_threshold:.3g}; no singularity resolved")
    s = traj.times
    product = (1.0 - s) * kmax
    med = float(np.median(product))
    sup = float(np.max(product))
    tail = product[int(0.7 * len(product)):]
    growing = len(tail) > 3 and tail[-1] > bound_factor * max(tail[0], 1e-300)
    if sup <= bound_factor * med and not growing:
        cls = "TypeI"
    elif growing:
        cls = "TypeII-suspected"
    else:
        cls = "inconclusive"
    witness = s[np.argsort(product)[-3:]]
    return TypeReport(sup_product=sup, classification=cls,
                      witness_times=np.sort(witness), product_series=product,
                      nkrf_kmax_bound=sup)


def blowup_rescale(traj: Trajectory, pick_rule="type1", threshold=1.0):
    """Space-time dilation by Q_k = |Rm|(x_k, s_k) around the pick point.

    Type I rule: maximize (1 - s) |Rm|; Type II rule: maximize (S - s)|Rm|
    over the stored window ending at S.  Ties break to the earliest time,
    then the smallest grid index (argmax scans time-major).
    """
    if traj.lam != 0.0:
        raise ValueError("blow-up rescaling applies to KRF trajectories")
    s = traj.times
    absrm = np.abs(traj.r_profiles)  # |Rm| = |R| on CP^1 profiles
    if float(np.max(absrm)) < threshold:
        raise NoPickError(
            f"curvature never exceeds the pick threshold {threshold}")
    if pick_rule == "type1":
        weight = (1.0 - s)[:, None] * absrm
    elif pick_rule == "type2":
        weight = (s[-1] - s)[:, None] * absrm
    else:
        raise ValueError(f"unknown pick rule {pick_rule!r}")
    flat = int(np.argmax(weight))
    it, node = np.unravel_index(flat, weight.shape)
    q = float(absrm[it, node])
    t_hat = (s - s[it]) * q
    us = q * traj.u_profiles
    rs = traj.r_profiles / q
    out = Trajectory(lam=0.0, grid=traj.grid, times=t_hat, dts=np.diff(t_hat),
                     u_profiles=us, r_profiles=rs,
                     meta={"Q": q, "pick_time": float(s[it]),
                           "pick_node": int(node),
                           "pick_rule": pick_rule,
                           "omega": float(np.max((1.0 - s) * np.max(absrm, axis=1)))})
    return out
