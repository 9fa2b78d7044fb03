"""
Numerical checks of the boundedness, convergence and descent properties.

The saturation suites integrate a whole batch of drive signals at once:
every state array carries a leading signal dimension.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from app.models import ActuatorFamily, AsymSatConfig, RateSatConfig, SaturationReport, ScenarioConfig
from app.services.saturation import (
    ActuatorState,
    asym_sat_deriv,
    effective_lower_bound,
    effective_upper_bound,
    rate_intermediate_bound,
    rate_sat_deriv,
)
from app.services.simulation_service import SimRecord, actuator_family, disturbance_rate_bound, rk4_step

logger = logging.getLogger(__name__)

BOUND_TOLERANCE = 1e-6
MEAN_HOLD_S = 0.5

# The stiffest mode of either model at its bound gives h*lambda near -0.6
# at this step; the RK4 update is still monotone there, so a step cannot
# carry zeta past an equilibrium.
SUITE_DURATION_S = 100.0
SUITE_DT = 1e-2
DEFAULT_SIGNALS = {ActuatorFamily.ASYM: 10000, ActuatorFamily.MAGRATE: 6}


def worst_case_drives(bound: float) -> np.ndarray:
    """Constant drives at +-bound along each axis."""
    return np.vstack([bound * np.eye(3), -bound * np.eye(3)])


def random_drives(rng: np.random.Generator, count: int, bound: float) -> np.ndarray:
    """
    Uniform random directions; half the draws sit on the bound, the rest inside.
    """
    direction = rng.standard_normal((count, 3))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    magnitude = np.where(rng.random(count) < 0.5, 1.0, rng.random(count)) * bound
    return direction * magnitude[:, None]


class TelegraphDrive:
    """
    A batch of piecewise-constant drive signals bounded in norm.

    The first rows are the axis-aligned worst cases and never switch; the
    rest jump to a fresh random value with mean hold time ``mean_hold``.
    """
    def __init__(self, signals: int, bound: float, dt: float, seed: int = 0, mean_hold: float = MEAN_HOLD_S):
        self.rng = np.random.default_rng(seed)
        self.bound = bound
        self.switch_probability = min(1.0, dt / mean_hold)
        fixed = worst_case_drives(bound)[:signals]
        self.fixed = len(fixed)
        self.values = np.vstack([fixed, random_drives(self.rng, signals - self.fixed, bound)])

    def advance(self) -> np.ndarray:
        free = self.values.shape[0] - self.fixed
        if free > 0:
            switch = self.rng.random(free) < self.switch_probability
            if np.any(switch):
                fresh = random_drives(self.rng, int(switch.sum()), self.bound)
                self.values[self.fixed:][switch] = fresh
        return self.values


def verify_asym_bounds(
    cfg: AsymSatConfig,
    signals: int = 10000,
    duration: float = SUITE_DURATION_S,
    dt: float = SUITE_DT,
    seed: int = 0,
) -> SaturationReport:
    """
    Drive the asymmetric model from rest with bounded signals and check that
    every zeta_i stays in [-tau_i0m, tau_i0M].
    """
    upper = np.array([effective_upper_bound(cfg, i) for i in range(3)])
    lower = -np.array([effective_lower_bound(cfg, i) for i in range(3)])
    drives = TelegraphDrive(signals, cfg.tau_cM, dt, seed)
    zeta = np.zeros((signals, 3))
    seen_max, seen_min = zeta.max(axis=0), zeta.min(axis=0)

    steps = int(round(duration / dt))
    logger.info(f"Asymmetric bound suite: {signals} signals, {steps} steps of {dt:g} s")
    drive = drives.values
    for k in range(steps):
        zeta = rk4_step(zeta, lambda t, z: asym_sat_deriv(ActuatorState(zeta=z), drive, cfg), dt, k * dt)
        seen_max = np.maximum(seen_max, zeta.max(axis=0))
        seen_min = np.minimum(seen_min, zeta.min(axis=0))
        drive = drives.advance()

    passed = bool(np.all(seen_max <= upper + BOUND_TOLERANCE) and np.all(seen_min >= lower - BOUND_TOLERANCE))
    if not passed:
        logger.error(f"Asymmetric bound suite failed: max={seen_max} min={seen_min} bounds=[{lower}, {upper}]")
    return SaturationReport(
        model=ActuatorFamily.ASYM,
        signals=signals,
        duration=duration,
        dt=dt,
        passed=passed,
        measured_max=seen_max.tolist(),
        measured_min=seen_min.tolist(),
        theoretical_upper=upper.tolist(),
        theoretical_lower=lower.tolist(),
    )


def verify_rate_bounds(
    cfg: RateSatConfig,
    signals: int = 6,
    duration: float = SUITE_DURATION_S,
    dt: float = SUITE_DT,
    seed: int = 0,
) -> SaturationReport:
    """
    Drive the magnitude and rate model from rest and check |zeta_i| <= tau_iM,
    |tau_ci| <= (1 - rho1_i) tau_idM and |zeta_dot_i| <= tau_idM.
    """
    tau_M, tau_dM = np.asarray(cfg.tau_M), np.asarray(cfg.tau_dM)
    ceiling = (1.0 - np.asarray(cfg.rho1)) * tau_dM
    drives = TelegraphDrive(signals, cfg.T_M, dt, seed)
    state = np.zeros((signals, 6))

    def deriv(t, x, drive):
        zeta_dot, tau_c_dot = rate_sat_deriv(ActuatorState(zeta=x[:, :3], tau_c=x[:, 3:]), drive, cfg)
        return np.hstack([zeta_dot, tau_c_dot])

    seen_max, seen_min = np.zeros(3), np.zeros(3)
    seen_rate, seen_tau_c = np.zeros(3), np.zeros(3)
    steps = int(round(duration / dt))
    logger.info(f"Rate bound suite: {signals} signals, {steps} steps of {dt:g} s")
    drive = drives.values
    for k in range(steps):
        state = rk4_step(state, lambda t, x: deriv(t, x, drive), dt, k * dt)
        drive = drives.advance()
        zeta, tau_c = state[:, :3], state[:, 3:]
        zeta_dot, _ = rate_sat_deriv(ActuatorState(zeta=zeta, tau_c=tau_c), drive, cfg)
        seen_max = np.maximum(seen_max, zeta.max(axis=0))
        seen_min = np.minimum(seen_min, zeta.min(axis=0))
        seen_rate = np.maximum(seen_rate, np.abs(zeta_dot).max(axis=0))
        seen_tau_c = np.maximum(seen_tau_c, np.abs(tau_c).max(axis=0))

    passed = bool(
        np.all(seen_max <= tau_M + BOUND_TOLERANCE)
        and np.all(seen_min >= -tau_M - BOUND_TOLERANCE)
        and np.all(seen_tau_c <= ceiling + BOUND_TOLERANCE)
        and np.all(seen_rate <= tau_dM + BOUND_TOLERANCE)
    )
    if not passed:
        logger.error(
            f"Rate bound suite failed: zeta in [{seen_min}, {seen_max}] rate={seen_rate} tau_c={seen_tau_c}"
        )
    return SaturationReport(
        model=ActuatorFamily.MAGRATE,
        signals=signals,
        duration=duration,
        dt=dt,
        passed=passed,
        measured_max=seen_max.tolist(),
        measured_min=seen_min.tolist(),
        theoretical_upper=tau_M.tolist(),
        theoretical_lower=(-tau_M).tolist(),
        measured_rate_max=seen_rate.tolist(),
        intermediate_max=seen_tau_c.tolist(),
        intermediate_bound=[rate_intermediate_bound(cfg, i) for i in range(3)],
    )


def verify_saturation(
    model: ActuatorFamily,
    signals: Optional[int] = None,
    duration: Optional[float] = None,
    dt: Optional[float] = None,
    seed: int = 0,
    asym: Optional[AsymSatConfig] = None,
    magrate: Optional[RateSatConfig] = None,
) -> SaturationReport:
    """
    Run one model's bound suite. Unset arguments take the suite defaults:
    10^4 random signals for the asymmetric model, the six constant
    worst-case drives for the rate model.
    """
    model = ActuatorFamily(model)
    signals = signals or DEFAULT_SIGNALS[model]
    duration = duration or SUITE_DURATION_S
    dt = dt or SUITE_DT
    if model == ActuatorFamily.ASYM:
        return verify_asym_bounds(asym or AsymSatConfig(), signals, duration, dt, seed)
    return verify_rate_bounds(magrate or RateSatConfig(), signals, duration, dt, seed)


def observer_decay_rate(times: Sequence[float], errors: np.ndarray, floor: float = 1e-9) -> np.ndarray:
    """
    Per-channel exponential rate fitted to |b - b_hat| on a log scale.

    Samples below ``floor`` are dropped; a channel with fewer than two
    usable samples reports nan.
    """
    times = np.asarray(times, dtype=float)
    magnitude = np.abs(np.asarray(errors, dtype=float))
    rates = np.full(magnitude.shape[1], np.nan)
    for i in range(magnitude.shape[1]):
        usable = magnitude[:, i] > floor
        if np.count_nonzero(usable) < 2:
            continue
        slope = np.polyfit(times[usable], np.log(magnitude[usable, i]), 1)[0]
        rates[i] = -slope
    return rates


def _observer_margin(cfg: ScenarioConfig) -> float:
    # k0 - 1/(2 k2): what is left on |b_e|^2 once z2'b_e is split as
    # k2/2 |z2|^2 + |b_e|^2/(2 k2)
    return min(cfg.gains.K0) - 1.0 / (2.0 * min(cfg.gains.K2))


def descent_rate(cfg: ScenarioConfig, M: np.ndarray) -> float:
    """
    Rate c in dV/dt <= -c V + delta for the scenario's gains and inertia M.
    """
    gains = cfg.gains
    eps = _observer_margin(cfg)
    if eps <= 0:
        raise ValueError("observer gain K0 too small against K2 to bound the residual")
    inertia = float(np.linalg.eigvalsh(0.5 * (M + M.T)).max())
    rates = [2.0 * min(gains.K1), min(gains.K2) / inertia, eps]
    family = actuator_family(cfg)
    if family is not None:
        rates.append(2.0 * min(gains.K3))
    if family == ActuatorFamily.MAGRATE:
        rates.append(2.0 * min(gains.K4))
    return min(rates)


def residual_band(cfg: ScenarioConfig, M: np.ndarray) -> float:
    """
    Ultimate bound delta/c on V. With ||b_dot|| <= b_M the disturbance adds
    at most delta = b_M^2 / (2 eps) to dV/dt; zero without a disturbance.
    """
    b_M = disturbance_rate_bound(cfg.disturbance)
    return b_M ** 2 / (2.0 * _observer_margin(cfg) * descent_rate(cfg, M))


@dataclass
class DescentReport:
    checked: int
    violations: int
    band: float
    worst_increase: float

    @property
    def passed(self) -> bool:
        return self.violations == 0


def lyapunov_descent(
    records: Sequence[SimRecord],
    transient_s: float,
    rel_tol: float = 1e-6,
    tail_fraction: float = 0.25,
    band: Optional[float] = None,
) -> DescentReport:
    """
    Check V is non-increasing step to step after ``transient_s`` wherever it
    sits above the residual band.

    Scenario runs pass the band from ``residual_band``. Without one, the
    largest V over the tail of the records stands in for it.
    """
    if len(records) < 2:
        raise ValueError("lyapunov_descent needs at least two records")
    times = np.array([r.t for r in records])
    values = np.array([r.lyapunov for r in records])
    if band is None:
        tail = max(1, int(np.ceil(len(values) * tail_fraction)))
        band = float(values[-tail:].max())

    increase = np.diff(values)
    candidates = (times[:-1] >= transient_s) & (values[:-1] > band)
    failing = candidates & (increase > rel_tol * values[:-1])
    worst = float(increase[candidates].max()) if np.any(candidates) else 0.0
    report = DescentReport(
        checked=int(np.count_nonzero(candidates)),
        violations=int(np.count_nonzero(failing)),
        band=band,
        worst_increase=worst,
    )
    if report.violations:
        first = float(times[:-1][failing][0])
        logger.warning(f"Lyapunov function increased on {report.violations} steps; first at t={first:.3f}")
    return report
