"""
Time-parameterised reference trajectories with analytic derivatives.
"""
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from app import presets
from app.models import TrajectoryParams, TrajectoryPreset
from app.services.vessel_model import rotation_matrix


@dataclass
class ReferenceSample:
    eta_d: np.ndarray
    eta_d_dot: np.ndarray
    eta_d_ddot: np.ndarray
    nu_d: np.ndarray
    nu_d_dot: np.ndarray


def desired_body_velocity(sample: ReferenceSample) -> np.ndarray:
    """
    nu_d = J(psi_d)^T eta_d_dot, using the desired heading.
    """
    return rotation_matrix(sample.eta_d[2]).T @ sample.eta_d_dot


def desired_body_acceleration(sample: ReferenceSample) -> np.ndarray:
    psi, psi_dot = sample.eta_d[2], sample.eta_d_dot[2]
    c, s = np.cos(psi), np.sin(psi)
    dJt = psi_dot * np.array([[-s, c, 0.0], [-c, -s, 0.0], [0.0, 0.0, 0.0]])
    return dJt @ sample.eta_d_dot + rotation_matrix(psi).T @ sample.eta_d_ddot


def _sample(eta_d, eta_d_dot, eta_d_ddot) -> ReferenceSample:
    sample = ReferenceSample(
        eta_d=np.asarray(eta_d, dtype=float),
        eta_d_dot=np.asarray(eta_d_dot, dtype=float),
        eta_d_ddot=np.asarray(eta_d_ddot, dtype=float),
        nu_d=np.zeros(3),
        nu_d_dot=np.zeros(3),
    )
    sample.nu_d = desired_body_velocity(sample)
    sample.nu_d_dot = desired_body_acceleration(sample)
    return sample


def _heading(t: float, amplitude: float, frequency: float):
    s, c = np.sin(frequency * t), np.cos(frequency * t)
    return amplitude * s, amplitude * frequency * c, -amplitude * frequency ** 2 * s


def ellipse_ref(t: float, params: Optional[TrajectoryParams] = None) -> ReferenceSample:
    """
    x_d = a_x sin(w_x t), y_d = a_y (1 - cos(w_y t)), psi_d = a_psi sin(w_psi t)
    """
    (ax, ay, ap), (wx, wy, wp) = _coefficients(TrajectoryPreset.ELLIPSE, params)
    sx, cx = np.sin(wx * t), np.cos(wx * t)
    sy, cy = np.sin(wy * t), np.cos(wy * t)
    psi, psi_dot, psi_ddot = _heading(t, ap, wp)
    return _sample(
        [ax * sx, ay * (1.0 - cy), psi],
        [ax * wx * cx, ay * wy * sy, psi_dot],
        [-ax * wx ** 2 * sx, ay * wy ** 2 * cy, psi_ddot],
    )


def figure8_ref(t: float, params: Optional[TrajectoryParams] = None) -> ReferenceSample:
    """
    x_d = a_x (cos(w_x t) - 1), y_d = a_y sin(w_y t), psi_d = a_psi sin(w_psi t)
    """
    (ax, ay, ap), (wx, wy, wp) = _coefficients(TrajectoryPreset.FIGURE8, params)
    sx, cx = np.sin(wx * t), np.cos(wx * t)
    sy, cy = np.sin(wy * t), np.cos(wy * t)
    psi, psi_dot, psi_ddot = _heading(t, ap, wp)
    return _sample(
        [ax * (cx - 1.0), ay * sy, psi],
        [-ax * wx * sx, ay * wy * cy, psi_dot],
        [-ax * wx ** 2 * cx, -ay * wy ** 2 * sy, psi_ddot],
    )


def _coefficients(preset: TrajectoryPreset, params: Optional[TrajectoryParams]):
    if params is None:
        data = presets.TRAJECTORIES[preset.value]
        return data["amplitude"], data["frequency"]
    return params.amplitude, params.frequency


def reference_generator(params: TrajectoryParams) -> Callable[[float], ReferenceSample]:
    """
    Bind a trajectory configuration to a function of time.
    """
    if params.preset == TrajectoryPreset.ELLIPSE:
        return lambda t: ellipse_ref(t, params)
    return lambda t: figure8_ref(t, params)
