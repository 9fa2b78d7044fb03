from enum import Enum
from typing import Any, Dict, List, Optional
from datetime import datetime

from pydantic import BaseModel, Field, conlist, root_validator, validator

from app import presets
from app.config import SCHEMA_VERSION

Vector3 = conlist(float, min_items=3, max_items=3)


class Method(str, Enum):
    PROPOSED_ASYM = "proposed-asym"
    PROPOSED_MAGRATE = "proposed-magrate"
    ADHOC = "adhoc"
    UNBOUNDED = "unbounded"


class ActuatorFamily(str, Enum):
    ASYM = "asym"
    MAGRATE = "magrate"


class TrajectoryPreset(str, Enum):
    ELLIPSE = "ellipse"
    FIGURE8 = "figure8"


class DriveBoundPolicy(str, Enum):
    LIMIT = "limit"
    STRICT = "strict"


def _positive(values: List[float], name: str) -> List[float]:
    if any(v <= 0 for v in values):
        raise ValueError(f"{name} entries must be strictly positive")
    return values


# Vessel parameters
class VesselParams(BaseModel):
    """
    Rigid-body and hydrodynamic coefficients of a 3-DOF surface vessel.

    Fields accept the SNAME names as keys (``X_|u|u``, ``Y_vdot`` ...).
    """
    m: float
    I_z: float
    x_g: float
    X_udot: float
    Y_vdot: float
    Y_rdot: float
    N_vdot: float
    N_rdot: float
    X_u: float
    X_uu: float = Field(..., alias="X_|u|u")
    X_uuu: float = 0.0
    Y_v: float
    Y_vv: float = Field(..., alias="Y_|v|v")
    Y_rv: float = Field(..., alias="Y_|r|v")
    Y_r: float
    Y_vr: float = Field(..., alias="Y_|v|r")
    Y_rr: float = Field(..., alias="Y_|r|r")
    N_v: float
    N_vv: float = Field(..., alias="N_|v|v")
    N_rv: float = Field(..., alias="N_|r|v")
    N_r: float
    N_vr: float = Field(..., alias="N_|v|r")
    N_rr: float = Field(..., alias="N_|r|r")

    class Config:
        allow_population_by_field_name = True

    @validator("m", "I_z")
    def check_positive_inertia(cls, v, field):
        if v <= 0:
            raise ValueError(f"{field.name} must be positive")
        return v

    @classmethod
    def cybership2(cls) -> "VesselParams":
        return cls.parse_obj(presets.CYBERSHIP2)


# Actuator models
class AsymSatConfig(BaseModel):
    tau_M: Vector3 = presets.ASYM_SATURATION["tau_M"]
    tau_m: Vector3 = presets.ASYM_SATURATION["tau_m"]
    rho: Vector3 = presets.ASYM_SATURATION["rho"]
    n: int = presets.ASYM_SATURATION["n"]
    tau_cM: float = presets.ASYM_SATURATION["tau_cM"]

    @validator("tau_M", "tau_m", "rho")
    def check_positive(cls, v, field):
        return _positive(v, field.name)

    @validator("n")
    def check_even(cls, v):
        if v < 2 or v % 2:
            raise ValueError("n must be an even integer >= 2")
        return v

    @validator("tau_cM")
    def check_drive_bound(cls, v):
        if v <= 0:
            raise ValueError("tau_cM must be positive")
        return v


class RateSatConfig(BaseModel):
    tau_M: Vector3 = presets.RATE_SATURATION["tau_M"]
    tau_dM: Vector3 = presets.RATE_SATURATION["tau_dM"]
    rho1: Vector3 = presets.RATE_SATURATION["rho1"]
    rho2: Vector3 = presets.RATE_SATURATION["rho2"]
    n: int = presets.RATE_SATURATION["n"]
    T_M: float = presets.RATE_SATURATION["T_M"]

    @validator("tau_M", "tau_dM", "rho2")
    def check_positive(cls, v, field):
        return _positive(v, field.name)

    @validator("rho1")
    def check_unit_interval(cls, v):
        if any(not 0.0 < r < 1.0 for r in v):
            raise ValueError("rho1 entries must lie in (0, 1)")
        return v

    @validator("n")
    def check_even(cls, v):
        if v < 2 or v % 2:
            raise ValueError("n must be an even integer >= 2")
        return v

    @validator("T_M")
    def check_drive_bound(cls, v):
        if v <= 0:
            raise ValueError("T_M must be positive")
        return v


class GainSet(BaseModel):
    """
    Diagonals of the observer (K0) and backstepping (K1..K4) gain matrices.
    """
    K0: Vector3 = presets.DEFAULT_K0
    K1: Vector3
    K2: Vector3
    K3: Vector3
    K4: Vector3 = presets.GAINS["magrate"]["K4"]

    @validator("K0", "K1", "K2", "K3", "K4")
    def check_positive(cls, v, field):
        return _positive(v, field.name)

    @classmethod
    def for_family(cls, family: ActuatorFamily) -> "GainSet":
        return cls.parse_obj(presets.GAINS[ActuatorFamily(family).value])


# Scenario pieces
class TrajectoryParams(BaseModel):
    preset: TrajectoryPreset = TrajectoryPreset.ELLIPSE
    amplitude: Optional[Vector3] = None
    frequency: Optional[Vector3] = None

    @root_validator(skip_on_failure=True)
    def fill_from_preset(cls, values):
        preset = presets.TRAJECTORIES[values["preset"].value]
        if values.get("amplitude") is None:
            values["amplitude"] = list(preset["amplitude"])
        if values.get("frequency") is None:
            values["frequency"] = list(preset["frequency"])
        return values


class DisturbanceSpec(BaseModel):
    """
    Per-axis sinusoid b_i(t) = A_i sin(w_i t + phi_i) + c_i in the body frame.
    """
    amplitude: Vector3 = presets.DEFAULT_DISTURBANCE["amplitude"]
    frequency: Vector3 = presets.DEFAULT_DISTURBANCE["frequency"]
    phase: Vector3 = presets.DEFAULT_DISTURBANCE["phase"]
    offset: Vector3 = presets.DEFAULT_DISTURBANCE["offset"]

    @classmethod
    def none(cls) -> "DisturbanceSpec":
        zero = [0.0, 0.0, 0.0]
        return cls(amplitude=zero, frequency=zero, phase=zero, offset=zero)


class InitialCondition(BaseModel):
    eta: Vector3
    nu: Vector3 = [0.0, 0.0, 0.0]


class IntegratorSettings(BaseModel):
    dt: float = 0.01
    duration: Optional[float] = None

    @validator("dt")
    def check_step(cls, v):
        if v <= 0:
            raise ValueError("dt must be positive")
        return v

    @root_validator(skip_on_failure=True)
    def check_horizon(cls, values):
        duration = values.get("duration")
        if duration is not None and duration < values["dt"]:
            raise ValueError("duration must cover at least one step")
        return values


class OutputOptions(BaseModel):
    csv: bool = True
    plots: bool = True
    settle_position: float = 0.05
    settle_heading: float = 0.05
    final_fraction: float = 0.25


class ScenarioConfig(BaseModel):
    """
    A complete, self-describing simulation scenario.

    Sections left out of a scenario document fall back to the cybership2
    preset: gains follow the actuator family of the chosen method, the
    initial condition follows ``initial_case`` and the trajectory.
    """
    schema_: str = Field(SCHEMA_VERSION, alias="schema")
    name: str = "scenario"
    method: Method = Method.PROPOSED_ASYM
    actuator_model: ActuatorFamily = ActuatorFamily.ASYM
    trajectory: TrajectoryParams = TrajectoryParams()
    initial_case: Optional[str] = "P1"
    initial: InitialCondition
    vessel: VesselParams = VesselParams.cybership2()
    cubic_surge_damping: bool = False
    gains: GainSet
    asym: AsymSatConfig = AsymSatConfig()
    magrate: RateSatConfig = RateSatConfig()
    disturbance: DisturbanceSpec = DisturbanceSpec()
    integrator: IntegratorSettings = IntegratorSettings()
    output: OutputOptions = OutputOptions()
    drive_bound_policy: DriveBoundPolicy = DriveBoundPolicy.STRICT
    eps_inv: float = 1e-6

    class Config:
        allow_population_by_field_name = True

    @root_validator(pre=True)
    def fill_preset_defaults(cls, values):
        values = dict(values)
        method = Method(values.get("method", Method.PROPOSED_ASYM))
        if method == Method.PROPOSED_MAGRATE:
            values["actuator_model"] = ActuatorFamily.MAGRATE
        elif method == Method.PROPOSED_ASYM:
            values["actuator_model"] = ActuatorFamily.ASYM
        family = ActuatorFamily(values.get("actuator_model", ActuatorFamily.ASYM))

        trajectory = values.get("trajectory") or {}
        if isinstance(trajectory, str):
            trajectory = {"preset": trajectory}
            values["trajectory"] = trajectory
        if isinstance(trajectory, TrajectoryParams):
            preset = trajectory.preset
        else:
            preset = TrajectoryPreset(trajectory.get("preset", TrajectoryPreset.ELLIPSE))

        if values.get("gains") is None:
            values["gains"] = dict(presets.GAINS[family.value])

        if values.get("initial") is None:
            case = values.get("initial_case") or "P1"
            cases = presets.INITIAL_CONDITIONS[(preset.value, family.value)]
            if case not in cases:
                raise ValueError(f"unknown initial case {case!r}; expected one of {sorted(cases)}")
            values["initial"] = {"eta": list(cases[case]), "nu": [0.0, 0.0, 0.0]}

        integrator = values.get("integrator")
        if integrator is None:
            integrator = {}
        elif isinstance(integrator, IntegratorSettings):
            integrator = integrator.dict()
        if isinstance(integrator, dict) and integrator.get("duration") is None:
            integrator = dict(integrator, duration=presets.DEFAULT_DURATION[preset.value])
        values["integrator"] = integrator
        return values

    @validator("schema_")
    def check_schema(cls, v):
        if v != SCHEMA_VERSION:
            raise ValueError(f"unsupported scenario schema {v!r}; expected {SCHEMA_VERSION!r}")
        return v

    @validator("eps_inv")
    def check_eps(cls, v):
        if v <= 0:
            raise ValueError("eps_inv must be positive")
        return v

    @property
    def dt(self) -> float:
        return self.integrator.dt

    @property
    def duration(self) -> float:
        return self.integrator.duration

    @property
    def steps(self) -> int:
        return int(round(self.integrator.duration / self.integrator.dt))

    @classmethod
    def preset(
        cls,
        method: Method = Method.PROPOSED_ASYM,
        trajectory: TrajectoryPreset = TrajectoryPreset.ELLIPSE,
        case: str = "P1",
        **overrides: Any,
    ) -> "ScenarioConfig":
        """
        Build a scenario from the cybership2 preset, e.g. the P2 figure-8 run.
        """
        method = Method(method)
        trajectory = TrajectoryPreset(trajectory)
        data: Dict[str, Any] = {
            "name": f"{trajectory.value}-{case}-{method.value}",
            "method": method,
            "trajectory": {"preset": trajectory},
            "initial_case": case,
        }
        data.update(overrides)
        return cls.parse_obj(data)


# Results
class RunMetrics(BaseModel):
    rmse_position: float
    rmse_heading: float
    final_rmse_position: float
    final_rmse_heading: float
    max_abs_tau: Vector3
    max_abs_tau_rate: Vector3
    max_drive_norm: float
    constraint_violation_count: int
    drive_limit_events: int = 0
    settle_time_s: Optional[float] = None
    final_disturbance_error: float

    @property
    def settled(self) -> bool:
        return self.settle_time_s is not None


class SaturationReport(BaseModel):
    model: ActuatorFamily
    signals: int
    duration: float
    dt: float
    passed: bool
    measured_max: Vector3
    measured_min: Vector3
    theoretical_upper: Vector3
    theoretical_lower: Vector3
    measured_rate_max: Optional[Vector3] = None
    intermediate_max: Optional[Vector3] = None
    intermediate_bound: Optional[Vector3] = None


class RunBase(BaseModel):
    name: str
    method: Method
    trajectory: TrajectoryPreset
    status: str


class RunResponse(RunBase):
    id: int
    rmse_position: Optional[float] = None
    rmse_heading: Optional[float] = None
    constraint_violation_count: Optional[int] = None
    settle_time_s: Optional[float] = None
    final_disturbance_error: Optional[float] = None
    output_dir: Optional[str] = None
    created_at: datetime
    updated_at: datetime

    class Config:
        orm_mode = True


class CompareRequest(BaseModel):
    scenario: ScenarioConfig
    methods: List[Method] = [Method.PROPOSED_ASYM, Method.ADHOC, Method.UNBOUNDED]


class VerifySaturationRequest(BaseModel):
    model: ActuatorFamily = ActuatorFamily.ASYM
    signals: Optional[int] = None
    duration: Optional[float] = None
    dt: Optional[float] = None
    seed: int = 0
