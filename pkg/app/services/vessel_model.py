"""
3-DOF surface vessel model: kinematics, rigid-body plus hydrodynamic dynamics.

    eta_dot = J(psi) nu
    nu_dot  = M^-1 [tau - C(nu) nu - D(nu) nu + b]
"""
import logging
from dataclasses import dataclass
from typing import Union

import numpy as np

from app.errors import ParameterError
from app.models import VesselParams

logger = logging.getLogger(__name__)

CONDITION_LIMIT = 1e10


@dataclass
class VehicleState:
    """
    Earth-frame pose [x, y, psi] and body-frame velocity [u, v, r].

    psi is kept unwrapped; wrapping happens only when forming heading errors.
    """
    eta: np.ndarray
    nu: np.ndarray

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.eta)) and np.all(np.isfinite(self.nu)))


def rotation_matrix(psi: float) -> np.ndarray:
    """
    Earth-from-body rotation about the vertical axis.
    """
    c, s = np.cos(psi), np.sin(psi)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def mass_matrix(p: VesselParams) -> np.ndarray:
    """
    Rigid-body plus added-mass inertia matrix.

    Raises ParameterError when the result is not positive definite.
    """
    m11 = p.m - p.X_udot
    m22 = p.m - p.Y_vdot
    m23 = p.m * p.x_g - p.Y_rdot
    m32 = p.m * p.x_g - p.N_vdot
    m33 = p.I_z - p.N_rdot
    M = np.array([[m11, 0.0, 0.0], [0.0, m22, m23], [0.0, m32, m33]])

    # Leading principal minors of the symmetric part
    sym = 0.5 * (M + M.T)
    minors = [sym[0, 0], np.linalg.det(sym[:2, :2]), np.linalg.det(sym)]
    if any(minor <= 0 for minor in minors):
        raise ParameterError(f"mass matrix is not positive definite (leading minors {minors})")
    return M


def invert_mass_matrix(M: np.ndarray) -> np.ndarray:
    """
    Closed-form cofactor inverse of a 3x3 inertia matrix.
    """
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise ParameterError(f"mass matrix is ill-conditioned (cond={cond:.3e})")

    a, b, c = M[0]
    d, e, f = M[1]
    g, h, i = M[2]
    cofactors = np.array([
        [e * i - f * h, -(d * i - f * g), d * h - e * g],
        [-(b * i - c * h), a * i - c * g, -(a * h - b * g)],
        [b * f - c * e, -(a * f - c * d), a * e - b * d],
    ])
    det = a * cofactors[0, 0] + b * cofactors[0, 1] + c * cofactors[0, 2]
    return cofactors.T / det


def coriolis_matrix(p: Union[VesselParams, np.ndarray], nu: np.ndarray) -> np.ndarray:
    """
    Coriolis-centripetal matrix C(nu), skew-symmetric for every nu.

    Accepts the parameters or an already built inertia matrix.
    """
    M = mass_matrix(p) if isinstance(p, VesselParams) else p
    u, v, r = nu
    m11, m22, m23 = M[0, 0], M[1, 1], M[1, 2]
    c13 = -m22 * v - m23 * r
    c23 = m11 * u
    return np.array([[0.0, 0.0, c13], [0.0, 0.0, c23], [-c13, -c23, 0.0]])


def damping_matrix(p: VesselParams, nu: np.ndarray, cubic_surge: bool = False) -> np.ndarray:
    """
    Linear plus quadratic (absolute-value) hydrodynamic damping D(nu).

    ``cubic_surge`` adds -X_uuu * u^2 to the surge entry.
    """
    u, v, r = nu
    au, av, ar = abs(u), abs(v), abs(r)
    d11 = -p.X_u - p.X_uu * au
    if cubic_surge:
        d11 -= p.X_uuu * u * u
    d22 = -p.Y_v - p.Y_vv * av - p.Y_rv * ar
    d23 = -p.Y_r - p.Y_vr * av - p.Y_rr * ar
    d32 = -p.N_v - p.N_vv * av - p.N_rv * ar
    d33 = -p.N_r - p.N_vr * av - p.N_rr * ar
    return np.array([[d11, 0.0, 0.0], [0.0, d22, d23], [0.0, d32, d33]])


class VesselModel:
    """
    Vessel parameters with the inertia matrix and its inverse cached.

    Parameters are constant over a run, so M and M^-1 are built once here
    and bad parameter sets are rejected at construction.
    """
    def __init__(self, params: VesselParams, cubic_surge: bool = False):
        self.params = params
        self.cubic_surge = cubic_surge
        self.M = mass_matrix(params)
        self.M_inv = invert_mass_matrix(self.M)
        logger.debug(f"Vessel model ready: diag(M)={np.diag(self.M)}")

    def coriolis(self, nu: np.ndarray) -> np.ndarray:
        return coriolis_matrix(self.M, nu)

    def damping(self, nu: np.ndarray) -> np.ndarray:
        return damping_matrix(self.params, nu, self.cubic_surge)

    def hydrodynamic_load(self, nu: np.ndarray) -> np.ndarray:
        """C(nu) nu + D(nu) nu"""
        return self.coriolis(nu) @ nu + self.damping(nu) @ nu


VesselLike = Union[VesselModel, VesselParams]


def as_vessel_model(vessel: VesselLike) -> VesselModel:
    if isinstance(vessel, VesselModel):
        return vessel
    return VesselModel(vessel)


def kinematics_deriv(state: VehicleState) -> np.ndarray:
    return rotation_matrix(state.eta[2]) @ state.nu


def dynamics_deriv(vessel: VesselLike, nu: np.ndarray, tau: np.ndarray, b: np.ndarray) -> np.ndarray:
    model = as_vessel_model(vessel)
    return model.M_inv @ (tau - model.hydrodynamic_load(nu) + b)
