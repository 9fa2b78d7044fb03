import copy
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from app.config import sim_instability_threshold, sim_max_workers
from app.errors import DriveBoundError, InstabilityError
from app.models import (
    ActuatorFamily,
    DisturbanceSpec,
    DriveBoundPolicy,
    Method,
    ScenarioConfig,
)
from app.services.controller import BacksteppingController, lyapunov_value
from app.services.observer import ObserverState, estimate, observer_deriv
from app.services.saturation import (
    ActuatorState,
    asym_sat_deriv,
    limit_drive,
    rate_sat_deriv,
)
from app.services.trajectories import ReferenceSample, reference_generator
from app.services.vessel_model import VehicleState, VesselModel, dynamics_deriv, kinematics_deriv

logger = logging.getLogger(__name__)

# Monolithic state layout: [eta, nu, z_obs, zeta, tau_c]
ETA = slice(0, 3)
NU = slice(3, 6)
Z_OBS = slice(6, 9)
ZETA = slice(9, 12)
TAU_C = slice(12, 15)


def disturbance_signal(t: float, spec: DisturbanceSpec) -> np.ndarray:
    """
    b_i(t) = A_i sin(w_i t + phi_i) + c_i
    """
    A, w = np.asarray(spec.amplitude), np.asarray(spec.frequency)
    return A * np.sin(w * t + np.asarray(spec.phase)) + np.asarray(spec.offset)


def disturbance_rate(t: float, spec: DisturbanceSpec) -> np.ndarray:
    A, w = np.asarray(spec.amplitude), np.asarray(spec.frequency)
    return A * w * np.cos(w * t + np.asarray(spec.phase))


def disturbance_rate_bound(spec: DisturbanceSpec) -> float:
    """b_M = ||A o w||, an upper bound on ||b_dot(t)||"""
    return float(np.linalg.norm(np.asarray(spec.amplitude) * np.asarray(spec.frequency)))


def rk4_step(state: np.ndarray, deriv: Callable[[float, np.ndarray], np.ndarray], dt: float, t: float = 0.0) -> np.ndarray:
    """
    One classical Runge-Kutta step. Raises InstabilityError on a non-finite stage.
    """
    k1 = deriv(t, state)
    k2 = deriv(t + 0.5 * dt, state + 0.5 * dt * k1)
    k3 = deriv(t + 0.5 * dt, state + 0.5 * dt * k2)
    k4 = deriv(t + dt, state + dt * k3)
    for label, k in (("k1", k1), ("k2", k2), ("k3", k3), ("k4", k4)):
        if not np.all(np.isfinite(k)):
            raise InstabilityError(
                f"non-finite derivative at stage {label}, t={t:.6g}",
                diagnostics={"t": t, "stage": label},
            )
    return state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@dataclass
class SimRecord:
    t: float
    eta: np.ndarray
    nu: np.ndarray
    eta_d: np.ndarray
    tau: np.ndarray
    tau_rate: np.ndarray
    b: np.ndarray
    b_hat: np.ndarray
    z1: np.ndarray
    lyapunov: float
    drive: np.ndarray = field(default_factory=lambda: np.zeros(3))
    drive_norm: float = 0.0
    drive_limited: bool = False


@dataclass
class ConvergenceReport:
    dts: List[float]
    errors: List[float]
    slope: float


def actuator_family(cfg: ScenarioConfig) -> Optional[ActuatorFamily]:
    """Actuator model integrated with the plant, None for the baselines."""
    if cfg.method == Method.PROPOSED_ASYM:
        return ActuatorFamily.ASYM
    if cfg.method == Method.PROPOSED_MAGRATE:
        return ActuatorFamily.MAGRATE
    return None


def state_size(family: Optional[ActuatorFamily]) -> int:
    return {None: 9, ActuatorFamily.ASYM: 12, ActuatorFamily.MAGRATE: 15}[family]


class ClosedLoopSystem:
    """
    Vector field of the coupled plant, observer and actuator model.

    The drive (tau_c, tau_d, or the applied tau for the baselines) is an
    input, either held over a step or given as a function of time.
    """
    def __init__(self, cfg: ScenarioConfig, vessel: VesselModel):
        self.cfg = cfg
        self.vessel = vessel
        self.family = actuator_family(cfg)
        self.K0 = np.diag(cfg.gains.K0)
        self.K0M = self.K0 @ vessel.M

    def initial_state(self) -> np.ndarray:
        x = np.zeros(state_size(self.family))
        x[ETA] = self.cfg.initial.eta
        x[NU] = self.cfg.initial.nu
        # Start the observer with b_hat(0) = 0
        x[Z_OBS] = -self.K0M @ x[NU]
        return x

    def applied_tau(self, x: np.ndarray, drive: np.ndarray) -> np.ndarray:
        return x[ZETA] if self.family is not None else drive

    def actuator_rates(self, x: np.ndarray, drive: np.ndarray):
        if self.family == ActuatorFamily.ASYM:
            return asym_sat_deriv(ActuatorState(zeta=x[ZETA]), drive, self.cfg.asym), None
        return rate_sat_deriv(ActuatorState(zeta=x[ZETA], tau_c=x[TAU_C]), drive, self.cfg.magrate)

    def observer_state(self, x: np.ndarray) -> ObserverState:
        return ObserverState(z=x[Z_OBS], K0=self.K0)

    def deriv(self, t: float, x: np.ndarray, drive: np.ndarray) -> np.ndarray:
        nu = x[NU]
        tau = self.applied_tau(x, drive)
        b = disturbance_signal(t, self.cfg.disturbance)

        dx = np.empty_like(x)
        dx[ETA] = kinematics_deriv(VehicleState(eta=x[ETA], nu=nu))
        dx[NU] = dynamics_deriv(self.vessel, nu, tau, b)
        dx[Z_OBS] = observer_deriv(self.observer_state(x), self.vessel, nu, tau)
        if self.family is not None:
            zeta_dot, tau_c_dot = self.actuator_rates(x, drive)
            dx[ZETA] = zeta_dot
            if self.family == ActuatorFamily.MAGRATE:
                dx[TAU_C] = tau_c_dot
        return dx

    def b_hat(self, x: np.ndarray) -> np.ndarray:
        return estimate(self.observer_state(x), self.vessel, x[NU])


class SimulationService:
    """
    Runs scenarios: fixed-step RK4 over the monolithic closed-loop state.
    Uses environment variables for configuration.
    """
    def __init__(self):
        self.instability_threshold = sim_instability_threshold()
        self.max_workers = sim_max_workers()

    def run_scenario(self, cfg: ScenarioConfig) -> List[SimRecord]:
        """
        Integrate from t=0 to the configured duration, one record per step.
        """
        vessel = VesselModel(cfg.vessel, cubic_surge=cfg.cubic_surge_damping)
        system = ClosedLoopSystem(cfg, vessel)
        controller = BacksteppingController(cfg, vessel)
        reference = reference_generator(cfg.trajectory)
        family = system.family
        drive_bound = self._drive_bound(cfg, family)

        dt, steps = cfg.dt, cfg.steps
        x = system.initial_state()
        records: List[SimRecord] = []
        previous_tau: Optional[np.ndarray] = None
        limit_events = 0

        logger.info(
            f"Running {cfg.name}: method={cfg.method.value} trajectory={cfg.trajectory.preset.value} "
            f"dt={dt} steps={steps}"
        )
        for k in range(steps + 1):
            t = k * dt
            ref: ReferenceSample = reference(t)
            eta, nu = x[ETA], x[NU]
            b = disturbance_signal(t, cfg.disturbance)
            b_hat = system.b_hat(x)
            actuator = None
            if family is not None:
                actuator = ActuatorState(
                    zeta=x[ZETA].copy(),
                    tau_c=x[TAU_C].copy() if family == ActuatorFamily.MAGRATE else None,
                )

            output = controller.compute(eta, nu, b_hat, ref, actuator)
            command = output.command
            drive, norm, limited = command, float(np.linalg.norm(command)), False
            if family is not None:
                if norm > drive_bound and cfg.drive_bound_policy == DriveBoundPolicy.STRICT:
                    logger.error(f"{cfg.name}: drive norm {norm:.4g} exceeds {drive_bound:g} at t={t:.4f}")
                    raise DriveBoundError(
                        f"drive norm {norm:.4g} exceeds bound {drive_bound:g} at t={t:.4f} "
                        f"with zeta={np.round(x[ZETA], 4).tolist()}",
                        t=t, norm=norm, bound=drive_bound,
                        records=records,
                        diagnostics={
                            "t": t,
                            "drive": np.asarray(command, dtype=float).tolist(),
                            "zeta": x[ZETA].tolist(),
                            "tau_c": x[TAU_C].tolist() if family == ActuatorFamily.MAGRATE else None,
                        },
                    )
                drive, norm, limited = limit_drive(command, drive_bound)
                if limited:
                    limit_events += 1
                    if limit_events == 1:
                        logger.warning(
                            f"{cfg.name}: drive demand {norm:.4g} exceeds {drive_bound:g} at t={t:.4f}; "
                            f"limiting into the bound"
                        )
                tau = x[ZETA].copy()
                tau_rate = system.actuator_rates(x, drive)[0]
            else:
                tau = command.copy()
                tau_rate = np.zeros(3) if previous_tau is None else (tau - previous_tau) / dt
            previous_tau = tau

            records.append(SimRecord(
                t=t,
                eta=eta.copy(),
                nu=nu.copy(),
                eta_d=ref.eta_d.copy(),
                tau=tau,
                tau_rate=np.asarray(tau_rate, dtype=float),
                b=b,
                b_hat=b_hat,
                z1=output.scratch.z1,
                lyapunov=lyapunov_value(output.scratch, vessel.M, b - b_hat, family),
                drive=np.asarray(command, dtype=float).copy(),
                drive_norm=norm,
                drive_limited=limited,
            ))
            if k == steps:
                break

            try:
                x = rk4_step(x, lambda s, y: system.deriv(s, y, drive), dt, t)
            except InstabilityError as e:
                logger.error(f"{cfg.name}: aborted at t={t:.4f}: {e}")
                raise InstabilityError(str(e), records=records, diagnostics=e.diagnostics)
            state_norm = float(np.linalg.norm(x))
            if state_norm > self.instability_threshold:
                logger.error(f"{cfg.name}: state norm {state_norm:.3e} exceeded threshold at t={t + dt:.4f}")
                raise InstabilityError(
                    f"state norm {state_norm:.3e} exceeded {self.instability_threshold:g} at t={t + dt:.4f}",
                    records=records,
                    diagnostics={"t": t + dt, "state_norm": state_norm, "state": x.tolist()},
                )

        if limit_events:
            logger.warning(f"{cfg.name}: drive limited on {limit_events} of {steps + 1} steps")
        logger.info(f"Finished {cfg.name}: {len(records)} records")
        return records

    def compare(self, cfg: ScenarioConfig, methods: Sequence[Method]) -> Dict[Method, List[SimRecord]]:
        """
        Run the same scenario under several methods; runs are independent.
        """
        configs = [self.with_method(cfg, method) for method in methods]
        results = self._run_batch(configs)
        return dict(zip([Method(m) for m in methods], results))

    def sweep(self, cfg: ScenarioConfig, param: str, values: Sequence[Any]) -> List[List[SimRecord]]:
        """
        Re-run a scenario with one dotted-path parameter set to each value.
        """
        configs = [self.with_param(cfg, param, value) for value in values]
        return self._run_batch(configs)

    @staticmethod
    def with_method(cfg: ScenarioConfig, method: Method) -> ScenarioConfig:
        data = cfg.dict(by_alias=True)
        data["method"] = Method(method)
        data["name"] = f"{cfg.name}-{Method(method).value}"
        return ScenarioConfig.parse_obj(data)

    @staticmethod
    def with_param(cfg: ScenarioConfig, param: str, value: Any) -> ScenarioConfig:
        data = copy.deepcopy(cfg.dict(by_alias=True))
        *parents, leaf = param.split(".")
        node = data
        for key in parents:
            if not isinstance(node, dict) or key not in node:
                raise KeyError(f"unknown scenario parameter path {param!r}")
            node = node[key]
        if not isinstance(node, dict) or leaf not in node:
            raise KeyError(f"unknown scenario parameter path {param!r}")
        node[leaf] = value
        data["name"] = f"{cfg.name}-{param}={value}"
        return ScenarioConfig.parse_obj(data)

    def _run_batch(self, configs: List[ScenarioConfig]) -> List[List[SimRecord]]:
        if self.max_workers > 1 and len(configs) > 1:
            with ProcessPoolExecutor(max_workers=self.max_workers) as pool:
                return list(pool.map(_run_in_worker, configs))
        return [self.run_scenario(c) for c in configs]

    def convergence_study(
        self,
        cfg: ScenarioConfig,
        dts: Sequence[float] = (0.04, 0.02, 0.01, 0.005),
        horizon: float = 10.0,
        refine: int = 4,
    ) -> ConvergenceReport:
        """
        Measure the integrator's global order on the scenario's plant.

        The sampled controller is replaced by the reference feedforward,
        a smooth function of time evaluated at every stage, so the only
        discretisation left is the integrator's.
        """
        vessel = VesselModel(cfg.vessel, cubic_surge=cfg.cubic_surge_damping)
        system = ClosedLoopSystem(cfg, vessel)
        reference = reference_generator(cfg.trajectory)

        def feedforward(t: float) -> np.ndarray:
            ref = reference(t)
            return vessel.M @ ref.nu_d_dot + vessel.hydrodynamic_load(ref.nu_d)

        coarse = max(dts)
        dt_ref = min(dts) / refine
        solution_ref = self._open_loop(system, feedforward, dt_ref, horizon)[:: int(round(coarse / dt_ref))]
        errors = []
        for dt in dts:
            solution = self._open_loop(system, feedforward, dt, horizon)[:: int(round(coarse / dt))]
            n = min(len(solution), len(solution_ref))
            errors.append(float(np.max(np.abs(solution[:n] - solution_ref[:n]))))
        slope = float(np.polyfit(np.log(dts), np.log(errors), 1)[0])
        logger.info(f"Convergence study for {cfg.name}: errors={errors} slope={slope:.3f}")
        return ConvergenceReport(dts=list(dts), errors=errors, slope=slope)

    @staticmethod
    def _open_loop(system: ClosedLoopSystem, drive: Callable[[float], np.ndarray], dt: float, horizon: float) -> np.ndarray:
        steps = int(round(horizon / dt))
        x = system.initial_state()
        states = [x]
        for k in range(steps):
            x = rk4_step(x, lambda s, y: system.deriv(s, y, drive(s)), dt, k * dt)
            states.append(x)
        return np.array(states)

    @staticmethod
    def _drive_bound(cfg: ScenarioConfig, family: Optional[ActuatorFamily]) -> float:
        if family == ActuatorFamily.ASYM:
            return cfg.asym.tau_cM
        if family == ActuatorFamily.MAGRATE:
            return cfg.magrate.T_M
        return float("inf")


def _run_in_worker(cfg: ScenarioConfig) -> List[SimRecord]:
    return SimulationService().run_scenario(cfg)
