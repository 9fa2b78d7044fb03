"""
Smooth actuator saturation models.

Asymmetric magnitude model (state zeta, drive tau_c):

    zeta_i_dot = q_i (1 - (zeta_i/tau_iM)^n) tau_ci - rho_i zeta_i
                 + (1 - q_i) (1 - (zeta_i/tau_im)^n) tau_ci

Magnitude and rate model (states zeta, tau_c, drive tau_d):

    zeta_i_dot  = (1 - (zeta_i/tau_iM)^n) tau_ci - rho1_i (tau_idM/tau_iM) zeta_i
    tau_ci_dot  = (1 - (tau_ci/((1 - rho1_i) tau_idM))^n) tau_di - rho2_i tau_ci

The output tau is zeta in both models. All array helpers broadcast over
leading batch dimensions so the bound suites can drive many signals at once.
"""
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from app.models import AsymSatConfig, RateSatConfig


@dataclass
class ActuatorState:
    zeta: np.ndarray
    tau_c: Optional[np.ndarray] = None

    @classmethod
    def at_rest(cls, with_rate: bool = False) -> "ActuatorState":
        return cls(zeta=np.zeros(3), tau_c=np.zeros(3) if with_rate else None)


def q_switch(zeta_i):
    """
    1 where zeta_i > 0, else 0.
    """
    if np.ndim(zeta_i) == 0:
        return 1 if zeta_i > 0 else 0
    return (np.asarray(zeta_i) > 0).astype(float)


def asym_gain_factor(zeta: np.ndarray, cfg: AsymSatConfig) -> np.ndarray:
    """
    Diagonal of Q(I - G_M) + (I - Q)(I - G_m).
    """
    zeta = np.asarray(zeta, dtype=float)
    q = q_switch(zeta)
    inv_M, inv_m = 1.0 / np.asarray(cfg.tau_M), 1.0 / np.asarray(cfg.tau_m)
    # 1/tau_M on the positive branch, 1/tau_m elsewhere
    ratio = zeta * (inv_m + q * (inv_M - inv_m))
    return 1.0 - ratio ** cfg.n


def asym_zeta_dot(zeta: np.ndarray, tau_c: np.ndarray, cfg: AsymSatConfig) -> np.ndarray:
    return asym_gain_factor(zeta, cfg) * tau_c - np.asarray(cfg.rho) * zeta


def asym_sat_deriv(state: ActuatorState, tau_c: np.ndarray, cfg: AsymSatConfig) -> np.ndarray:
    # Both branches agree at zeta_i = 0, so the field is continuous there
    return asym_zeta_dot(state.zeta, np.asarray(tau_c, dtype=float), cfg)


def effective_upper_bound(cfg: AsymSatConfig, i: int) -> float:
    tau_iM, rho_i = cfg.tau_M[i], cfg.rho[i]
    return tau_iM * (cfg.tau_cM / (cfg.tau_cM + rho_i * tau_iM)) ** (1.0 / cfg.n)


def effective_lower_bound(cfg: AsymSatConfig, i: int) -> float:
    """
    Magnitude of the tightest negative excursion, mirror of the upper bound.
    """
    tau_im, rho_i = cfg.tau_m[i], cfg.rho[i]
    return tau_im * (cfg.tau_cM / (cfg.tau_cM + rho_i * tau_im)) ** (1.0 / cfg.n)


def rate_gain_factors(zeta: np.ndarray, tau_c: np.ndarray, cfg: RateSatConfig) -> Tuple[np.ndarray, np.ndarray]:
    """
    Diagonals of (I - G_1) and (I - G_2).
    """
    tau_M, tau_dM, rho1 = np.asarray(cfg.tau_M), np.asarray(cfg.tau_dM), np.asarray(cfg.rho1)
    one_minus_g1 = 1.0 - (zeta / tau_M) ** cfg.n
    one_minus_g2 = 1.0 - (tau_c / ((1.0 - rho1) * tau_dM)) ** cfg.n
    return one_minus_g1, one_minus_g2


def rate_decay(cfg: RateSatConfig) -> np.ndarray:
    """rho1_i * tau_idM / tau_iM, read per axis"""
    return np.asarray(cfg.rho1) * np.asarray(cfg.tau_dM) / np.asarray(cfg.tau_M)


def rate_sat_arrays(zeta: np.ndarray, tau_c: np.ndarray, tau_d: np.ndarray, cfg: RateSatConfig):
    one_minus_g1, one_minus_g2 = rate_gain_factors(zeta, tau_c, cfg)
    zeta_dot = one_minus_g1 * tau_c - rate_decay(cfg) * zeta
    tau_c_dot = one_minus_g2 * tau_d - np.asarray(cfg.rho2) * tau_c
    return zeta_dot, tau_c_dot


def rate_sat_deriv(state: ActuatorState, tau_d: np.ndarray, cfg: RateSatConfig) -> Tuple[np.ndarray, np.ndarray]:
    tau_c = state.tau_c if state.tau_c is not None else np.zeros_like(state.zeta)
    return rate_sat_arrays(state.zeta, tau_c, np.asarray(tau_d, dtype=float), cfg)


def rate_intermediate_bound(cfg: RateSatConfig, i: int) -> float:
    ceiling = (1.0 - cfg.rho1[i]) * cfg.tau_dM[i]
    return (cfg.T_M / (cfg.T_M + cfg.rho2[i] * ceiling)) ** (1.0 / cfg.n) * ceiling


def limit_drive(drive: np.ndarray, bound: float) -> Tuple[np.ndarray, float, bool]:
    """
    Radially scale a drive vector into the ball of radius ``bound``.

    Returns the limited drive, the raw norm and whether scaling happened.
    """
    norm = float(np.linalg.norm(drive))
    if norm <= bound:
        return drive, norm, False
    return drive * (bound / norm), norm, True
