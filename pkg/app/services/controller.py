"""
Backstepping tracking laws for the fully actuated vessel.

Error coordinates:

    z1 = eta - eta_d (heading wrapped)     alpha1 = J(psi)^T (eta_d_dot - K1 z1)
    z2 = nu - alpha1                       alpha2 = C nu + D nu + M alpha1_dot - K2 z2 - J^T z1 - b_hat
    z3 = tau - alpha2                      (asym)    tau_c = F^-1 (rho tau + alpha2_dot) - K3 z3 - z2
                                           (magrate) alpha3, z4 = tau_c - alpha3, tau_d

Time derivatives of the stabilising functions come from backward
differences at the control rate.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from app.models import ActuatorFamily, AsymSatConfig, Method, RateSatConfig, ScenarioConfig
from app.services.saturation import ActuatorState, asym_gain_factor, rate_decay, rate_gain_factors
from app.services.trajectories import ReferenceSample
from app.services.vessel_model import VesselModel, rotation_matrix

logger = logging.getLogger(__name__)

EPS_INV = 1e-6


def wrap_angle(angle):
    """
    Wrap to (-pi, pi].
    """
    return -((np.pi - angle) % (2.0 * np.pi) - np.pi)


@dataclass
class ControllerScratch:
    z1: np.ndarray = field(default_factory=lambda: np.zeros(3))
    z2: np.ndarray = field(default_factory=lambda: np.zeros(3))
    z3: np.ndarray = field(default_factory=lambda: np.zeros(3))
    z4: np.ndarray = field(default_factory=lambda: np.zeros(3))
    alpha1: np.ndarray = field(default_factory=lambda: np.zeros(3))
    alpha2: np.ndarray = field(default_factory=lambda: np.zeros(3))
    alpha3: np.ndarray = field(default_factory=lambda: np.zeros(3))
    alpha1_dot: np.ndarray = field(default_factory=lambda: np.zeros(3))
    alpha2_dot: np.ndarray = field(default_factory=lambda: np.zeros(3))
    alpha3_dot: np.ndarray = field(default_factory=lambda: np.zeros(3))


def tracking_error_z1(eta: np.ndarray, eta_d: np.ndarray) -> np.ndarray:
    z1 = np.asarray(eta, dtype=float) - np.asarray(eta_d, dtype=float)
    z1[2] = wrap_angle(z1[2])
    return z1


def alpha1(eta: np.ndarray, z1: np.ndarray, eta_d_dot: np.ndarray, K1: np.ndarray) -> np.ndarray:
    return rotation_matrix(eta[2]).T @ (eta_d_dot - K1 @ z1)


def alpha2(
    vessel: VesselModel,
    nu: np.ndarray,
    z1: np.ndarray,
    z2: np.ndarray,
    alpha1_dot: np.ndarray,
    b_hat: np.ndarray,
    eta: np.ndarray,
    K2: np.ndarray,
) -> np.ndarray:
    return (
        vessel.hydrodynamic_load(nu)
        + vessel.M @ alpha1_dot
        - K2 @ z2
        - rotation_matrix(eta[2]).T @ z1
        - b_hat
    )


def _guarded_inverse(factor: np.ndarray, eps_inv: float, label: str) -> np.ndarray:
    small = np.abs(factor) < eps_inv
    if np.any(small):
        logger.warning(
            f"{label} gain factor {factor} within {eps_inv:g} of singular on axes "
            f"{np.flatnonzero(small).tolist()}; actuator state is at its effective bound"
        )
        factor = np.where(small, np.copysign(eps_inv, factor), factor)
    return 1.0 / factor


def control_tau_c(
    scratch: ControllerScratch,
    tau: np.ndarray,
    cfg: AsymSatConfig,
    K3: np.ndarray,
    eps_inv: float = EPS_INV,
) -> np.ndarray:
    inverse = _guarded_inverse(asym_gain_factor(tau, cfg), eps_inv, "asymmetric saturation")
    return inverse * (np.asarray(cfg.rho) * tau + scratch.alpha2_dot) - K3 @ scratch.z3 - scratch.z2


def alpha3(
    scratch: ControllerScratch,
    state: ActuatorState,
    cfg: RateSatConfig,
    K3: np.ndarray,
    eps_inv: float = EPS_INV,
) -> np.ndarray:
    one_minus_g1, _ = rate_gain_factors(state.zeta, state.tau_c, cfg)
    inverse = _guarded_inverse(one_minus_g1, eps_inv, "magnitude")
    return inverse * (rate_decay(cfg) * state.zeta + scratch.alpha2_dot - K3 @ scratch.z3 - scratch.z2)


def control_tau_d(
    scratch: ControllerScratch,
    state: ActuatorState,
    cfg: RateSatConfig,
    K4: np.ndarray,
    eps_inv: float = EPS_INV,
) -> np.ndarray:
    one_minus_g1, one_minus_g2 = rate_gain_factors(state.zeta, state.tau_c, cfg)
    inverse = _guarded_inverse(one_minus_g2, eps_inv, "rate")
    return inverse * (
        np.asarray(cfg.rho2) * state.tau_c
        + scratch.alpha3_dot
        - K4 @ scratch.z4
        - one_minus_g1 * scratch.z3
    )


def baseline_unbounded(scratch: ControllerScratch) -> np.ndarray:
    """
    Two-stage backstepping law applied straight to the vessel.
    """
    return scratch.alpha2.copy()


def baseline_adhoc(
    scratch: ControllerScratch,
    lower: Sequence[float],
    upper: Sequence[float],
    previous: Optional[np.ndarray] = None,
    rate_limit: Optional[Sequence[float]] = None,
    dt: Optional[float] = None,
) -> np.ndarray:
    """
    Clip the unbounded law to [-lower, upper]; optionally limit its per-step change.
    """
    tau = np.clip(scratch.alpha2, -np.asarray(lower), np.asarray(upper))
    if previous is not None and rate_limit is not None and dt is not None:
        step = np.asarray(rate_limit) * dt
        tau = np.clip(tau, previous - step, previous + step)
    return tau


def alpha_derivative(history: Sequence[np.ndarray], dt: float) -> np.ndarray:
    """
    Backward difference of the two most recent samples; zero until two exist.
    """
    if len(history) < 2:
        return np.zeros_like(np.asarray(history[-1], dtype=float)) if history else np.zeros(3)
    return (np.asarray(history[-1]) - np.asarray(history[-2])) / dt


class AlphaDifferentiator:
    """
    Backward-difference estimator for one stabilising function.

    ``warmup`` is the stage depth: the estimate stays zero until the
    upstream derivatives feeding this stage are themselves primed.
    """
    def __init__(self, dt: float, warmup: int = 1):
        self.dt = dt
        self.warmup = warmup
        self.history = []
        self.count = 0

    def update(self, value: np.ndarray) -> np.ndarray:
        self.history = (self.history + [np.array(value, dtype=float)])[-2:]
        self.count += 1
        if self.count <= self.warmup:
            return np.zeros(3)
        return alpha_derivative(self.history, self.dt)


def lyapunov_value(
    scratch: ControllerScratch,
    M: np.ndarray,
    b_error: np.ndarray,
    family: Optional[ActuatorFamily],
) -> float:
    """
    V2 for the baselines, V3 with the asymmetric stack, V4 with the rate stack.
    """
    value = 0.5 * scratch.z1 @ scratch.z1 + 0.5 * scratch.z2 @ M @ scratch.z2 + 0.5 * b_error @ b_error
    if family is None:
        return float(value)
    value += 0.5 * scratch.z3 @ scratch.z3
    if family == ActuatorFamily.MAGRATE:
        value += 0.5 * scratch.z4 @ scratch.z4
    return float(value)


@dataclass
class ControlOutput:
    command: np.ndarray
    scratch: ControllerScratch


class BacksteppingController:
    """
    One controller instance per run; holds the derivative history.

    ``compute`` returns the drive for the proposed methods (tau_c or tau_d)
    and the applied actuation for the baselines.
    """
    def __init__(self, cfg: ScenarioConfig, vessel: VesselModel):
        self.cfg = cfg
        self.vessel = vessel
        self.method = cfg.method
        self.K1 = np.diag(cfg.gains.K1)
        self.K2 = np.diag(cfg.gains.K2)
        self.K3 = np.diag(cfg.gains.K3)
        self.K4 = np.diag(cfg.gains.K4)
        self.eps_inv = cfg.eps_inv
        self._d1 = AlphaDifferentiator(cfg.dt, warmup=1)
        self._d2 = AlphaDifferentiator(cfg.dt, warmup=2)
        self._d3 = AlphaDifferentiator(cfg.dt, warmup=3)
        self._previous_tau: Optional[np.ndarray] = None

    def compute(
        self,
        eta: np.ndarray,
        nu: np.ndarray,
        b_hat: np.ndarray,
        ref: ReferenceSample,
        actuator: Optional[ActuatorState] = None,
    ) -> ControlOutput:
        s = ControllerScratch()
        s.z1 = tracking_error_z1(eta, ref.eta_d)
        s.alpha1 = alpha1(eta, s.z1, ref.eta_d_dot, self.K1)
        s.alpha1_dot = self._d1.update(s.alpha1)
        s.z2 = nu - s.alpha1
        s.alpha2 = alpha2(self.vessel, nu, s.z1, s.z2, s.alpha1_dot, b_hat, eta, self.K2)
        s.alpha2_dot = self._d2.update(s.alpha2)

        if self.method == Method.UNBOUNDED:
            return ControlOutput(command=baseline_unbounded(s), scratch=s)

        if self.method == Method.ADHOC:
            command = self._adhoc(s)
            self._previous_tau = command
            return ControlOutput(command=command, scratch=s)

        s.z3 = actuator.zeta - s.alpha2
        if self.method == Method.PROPOSED_ASYM:
            command = control_tau_c(s, actuator.zeta, self.cfg.asym, self.K3, self.eps_inv)
            return ControlOutput(command=command, scratch=s)

        s.alpha3 = alpha3(s, actuator, self.cfg.magrate, self.K3, self.eps_inv)
        s.alpha3_dot = self._d3.update(s.alpha3)
        s.z4 = actuator.tau_c - s.alpha3
        command = control_tau_d(s, actuator, self.cfg.magrate, self.K4, self.eps_inv)
        return ControlOutput(command=command, scratch=s)

    def _adhoc(self, s: ControllerScratch) -> np.ndarray:
        if self.cfg.actuator_model == ActuatorFamily.MAGRATE:
            bounds = self.cfg.magrate.tau_M
            return baseline_adhoc(
                s, bounds, bounds,
                previous=self._previous_tau,
                rate_limit=self.cfg.magrate.tau_dM,
                dt=self.cfg.dt,
            )
        return baseline_adhoc(s, self.cfg.asym.tau_m, self.cfg.asym.tau_M)
