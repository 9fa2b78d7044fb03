"""
Shipped parameter presets.

The ``cybership2`` preset bundles the CyberShip II model-ship coefficients
and the controller gains used for the published tracking runs. Values are
plain data so that both the pydantic models and the tests can import them
without cycles.
"""
import math

# SNAME-named rigid-body and hydrodynamic coefficients (SI units)
CYBERSHIP2 = {
    "m": 23.8,
    "I_z": 1.76,
    "x_g": 0.046,
    "X_udot": -2.0,
    "Y_vdot": -10.0,
    "Y_rdot": -0.0,
    "N_vdot": -0.0,
    "N_rdot": -0.0,
    "X_u": -0.72253,
    "X_|u|u": -1.32742,
    "X_uuu": -5.86643,
    "Y_v": -2.0,
    "Y_|v|v": -36.47287,
    "Y_|r|v": -0.805,
    "Y_r": -7.250,
    "Y_|v|r": -0.845,
    "Y_|r|r": -3.450,
    "N_v": 0.03130,
    "N_|v|v": 3.95645,
    "N_|r|v": 0.130,
    "N_r": -1.900,
    "N_|v|r": 0.080,
    "N_|r|r": -0.750,
}

# Observer gain is not part of the published gain table
DEFAULT_K0 = [10.0, 10.0, 10.0]

GAINS = {
    "asym": {
        "K0": DEFAULT_K0,
        "K1": [4.0, 3.0, 0.5],
        "K2": [2.0, 3.0, 0.5],
        "K3": [2.0, 3.0, 0.5],
        "K4": [0.2, 0.5, 0.1],
    },
    "magrate": {
        "K0": DEFAULT_K0,
        "K1": [0.02, 0.02, 0.05],
        "K2": [2.0, 3.0, 5.0],
        "K3": [2.0, 1.0, 5.0],
        "K4": [0.2, 0.5, 0.1],
    },
}

ASYM_SATURATION = {
    "tau_M": [5.0, 4.5, 4.0],
    "tau_m": [4.0, 4.0, 3.0],
    "rho": [0.5, 0.5, 0.5],
    "n": 2,
    "tau_cM": 100.0,
}

RATE_SATURATION = {
    "tau_M": [5.0, 5.0, 5.0],
    "tau_dM": [4.0, 4.0, 4.0],
    "rho1": [0.2, 0.2, 0.2],
    "rho2": [2.0, 2.0, 2.0],
    "n": 2,
    "T_M": 100.0,
}

TRAJECTORIES = {
    "ellipse": {
        "amplitude": [4.0, 2.5, 0.02],
        "frequency": [0.02, 0.02, 0.02],
    },
    "figure8": {
        "amplitude": [4.0, 2.5, math.pi],
        "frequency": [0.05, 0.1, 0.02],
    },
}

DEFAULT_DURATION = {"ellipse": 400.0, "figure8": 300.0}

# Initial poses [x, y, psi]; the vessel always starts at rest
INITIAL_CONDITIONS = {
    ("ellipse", "asym"): {
        "P1": [-1.0, 0.0, 0.01],
        "P2": [1.0, -1.0, 0.01],
        "P3": [-1.0, 1.0, 0.01],
    },
    ("figure8", "asym"): {
        "P1": [-1.0, 0.0, 0.01],
        "P2": [0.5, -0.5, 0.01],
        "P3": [-1.0, 1.0, 0.01],
    },
    ("ellipse", "magrate"): {
        "P1": [-1.0, 0.0, 0.01],
        "P2": [1.0, -1.0, 0.01],
        "P3": [-1.0, 1.0, 0.01],
    },
    ("figure8", "magrate"): {
        "P1": [-1.0, 0.0, 0.01],
        "P2": [1.0, -1.0, 0.01],
        "P3": [-1.0, 1.0, 0.01],
    },
}

# Invented disturbance, sized well below the actuator bounds
DEFAULT_DISTURBANCE = {
    "amplitude": [0.4, 0.4, 0.2],
    "frequency": [0.05, 0.04, 0.03],
    "phase": [0.0, 0.0, 0.0],
    "offset": [0.2, 0.2, 0.1],
}
