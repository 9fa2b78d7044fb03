"""
Nonlinear disturbance observer.

    b_hat = z + K0 M nu
    z_dot = -K0 z - K0 [tau - C(nu) nu - D(nu) nu + K0 M nu]

For any disturbance the estimation error obeys b_e_dot = b_dot - K0 b_e.
"""
from dataclasses import dataclass, field

import numpy as np

from app.services.vessel_model import VesselLike, as_vessel_model


@dataclass
class ObserverState:
    z: np.ndarray
    K0: np.ndarray = field(default_factory=lambda: 10.0 * np.eye(3))

    @classmethod
    def from_gains(cls, k0_diag, z=None) -> "ObserverState":
        k0 = np.asarray(k0_diag, dtype=float)
        if np.any(k0 <= 0):
            raise ValueError("observer gains must be strictly positive")
        return cls(z=np.zeros(3) if z is None else np.asarray(z, dtype=float), K0=np.diag(k0))


def observer_deriv(obs: ObserverState, vessel: VesselLike, nu: np.ndarray, tau: np.ndarray) -> np.ndarray:
    model = as_vessel_model(vessel)
    K0 = obs.K0
    return -K0 @ obs.z - K0 @ (tau - model.hydrodynamic_load(nu) + K0 @ model.M @ nu)


def estimate(obs: ObserverState, vessel: VesselLike, nu: np.ndarray) -> np.ndarray:
    model = as_vessel_model(vessel)
    return obs.z + obs.K0 @ model.M @ nu
