import numpy as np
import pytest
from unittest.mock import MagicMock, patch
from numpy.testing import assert_allclose

from app.errors import DriveBoundError, InstabilityError
from app.models import DisturbanceSpec, DriveBoundPolicy, Method, ScenarioConfig
from app.services.observer import ObserverState, observer_deriv
from app.services.reporting_service import compute_metrics
from app.services.saturation import ActuatorState, asym_sat_deriv, rate_sat_deriv
from app.services.simulation_service import (
    ETA,
    NU,
    TAU_C,
    ZETA,
    Z_OBS,
    ClosedLoopSystem,
    SimulationService,
    disturbance_rate,
    disturbance_rate_bound,
    disturbance_signal,
    rk4_step,
    state_size,
)
from app.services.trajectories import ellipse_ref
from app.services.verification_service import observer_decay_rate
from app.services.vessel_model import VehicleState, VesselModel, dynamics_deriv, kinematics_deriv


def _short(method=Method.PROPOSED_ASYM, trajectory="ellipse", case="P1", duration=10.0, **overrides):
    return ScenarioConfig.preset(method, trajectory, case, integrator={"dt": 0.01, "duration": duration}, **overrides)


class TestDisturbance:
    """Tests for the injected disturbance signal."""

    def test_zero_spec_is_silent(self):
        spec = DisturbanceSpec.none()
        for t in (0.0, 1.0, 123.4):
            assert_allclose(disturbance_signal(t, spec), np.zeros(3))

    def test_value_and_rate_at_zero(self):
        spec = DisturbanceSpec(amplitude=[1.0, 0.0, 0.0], frequency=[0.1, 0.0, 0.0], offset=[0.0, 0.0, 0.0])
        assert_allclose(disturbance_signal(0.0, spec), np.zeros(3))
        assert_allclose(disturbance_rate(0.0, spec), [0.1, 0.0, 0.0])

    def test_peak_is_amplitude_plus_offset(self):
        spec = DisturbanceSpec()
        samples = np.array([disturbance_signal(t, spec) for t in np.linspace(0.0, 400.0, 40001)])
        assert np.max(np.abs(samples[:, 0])) == pytest.approx(0.6, abs=1e-4)

    def test_rate_bound(self):
        spec = DisturbanceSpec()
        bound = disturbance_rate_bound(spec)
        rates = [np.linalg.norm(disturbance_rate(t, spec)) for t in np.linspace(0.0, 400.0, 2001)]
        assert max(rates) <= bound + 1e-12


class TestRk4Step:
    """Tests for the fixed-step integrator."""

    def test_constant_state(self):
        x = np.array([1.0, -2.0])
        assert_allclose(rk4_step(x, lambda t, y: np.zeros_like(y), 0.1), x)

    def test_linear_decay(self):
        x1 = rk4_step(np.array([1.0]), lambda t, y: -y, 0.01)
        assert x1[0] == pytest.approx(0.9900498337, abs=1e-10)

    def test_time_is_passed_to_stages(self):
        # x_dot = t integrates exactly
        x1 = rk4_step(np.array([0.0]), lambda t, y: np.array([t]), 0.5, t=1.0)
        assert x1[0] == pytest.approx(0.5 * (1.5 ** 2 - 1.0 ** 2))

    def test_non_finite_derivative_aborts(self):
        with pytest.raises(InstabilityError) as excinfo:
            rk4_step(np.array([1.0]), lambda t, y: np.array([np.nan]), 0.01, t=2.0)
        assert excinfo.value.diagnostics["t"] == 2.0


class TestRunScenario:
    """Tests for closed-loop scenario runs."""

    @pytest.fixture
    def service(self, monkeypatch):
        monkeypatch.setenv("SIM_INSTABILITY_THRESHOLD", "1e6")
        monkeypatch.setenv("SIM_MAX_WORKERS", "1")
        return SimulationService()

    def test_single_step_bookkeeping(self, service):
        records = service.run_scenario(_short(duration=0.01))
        assert len(records) == 2
        assert [r.t for r in records] == [0.0, 0.01]

    def test_initial_record(self, service):
        cfg = _short(duration=0.1)
        first = service.run_scenario(cfg)[0]
        assert_allclose(first.eta, [-1.0, 0.0, 0.01])
        assert_allclose(first.nu, np.zeros(3))
        assert_allclose(first.tau, np.zeros(3))
        assert_allclose(first.b_hat, np.zeros(3), atol=1e-12)

    def test_deterministic(self, service):
        cfg = _short(duration=5.0)
        first = service.run_scenario(cfg)
        second = service.run_scenario(cfg)
        for a, b in zip(first, second):
            assert np.array_equal(a.eta, b.eta)
            assert np.array_equal(a.tau, b.tau)
            assert a.lyapunov == b.lyapunov

    def test_times_are_monotone(self, service):
        times = [r.t for r in service.run_scenario(_short(duration=1.0))]
        assert all(b > a for a, b in zip(times, times[1:]))

    def test_starting_on_reference_stays_close(self, service):
        ref = ellipse_ref(0.0)
        cfg = _short(
            duration=40.0,
            initial={"eta": ref.eta_d.tolist(), "nu": ref.nu_d.tolist()},
            disturbance=DisturbanceSpec.none(),
        )
        records = service.run_scenario(cfg)
        assert max(np.linalg.norm(r.z1) for r in records) <= 1e-2

    def test_asymmetric_run_respects_bounds(self, service):
        cfg = _short(duration=60.0)
        records = service.run_scenario(cfg)
        metrics = compute_metrics(records, cfg)
        assert metrics.constraint_violation_count == 0
        tau = np.array([r.tau for r in records])
        assert np.all(tau < np.array([5.0, 4.5, 4.0]))
        assert np.all(tau > -np.array([4.0, 4.0, 3.0]))
        assert np.linalg.norm(records[-1].z1[:2]) < 0.5

    def test_rate_run_respects_rate_bound(self, service):
        cfg = _short(Method.PROPOSED_MAGRATE, "figure8", duration=30.0)
        records = service.run_scenario(cfg)
        tau = np.array([r.tau for r in records])
        assert np.all(np.abs(tau) <= 5.0)
        assert np.all(np.abs(np.diff(tau, axis=0)) / 0.01 <= 4.0 + 1e-3)
        assert compute_metrics(records, cfg).constraint_violation_count == 0

    def test_baseline_rate_column_is_backward_difference(self, service):
        records = service.run_scenario(_short(Method.UNBOUNDED, duration=0.05))
        assert_allclose(records[0].tau_rate, np.zeros(3))
        assert_allclose(records[2].tau_rate, (records[2].tau - records[1].tau) / 0.01)

    def test_strict_policy_raises_on_excess_demand(self, service):
        cfg = _short(duration=1.0, asym={"tau_cM": 1.0}, drive_bound_policy=DriveBoundPolicy.STRICT)
        with pytest.raises(DriveBoundError) as excinfo:
            service.run_scenario(cfg)
        assert excinfo.value.bound == 1.0
        assert excinfo.value.norm > 1.0
        assert excinfo.value.records == []
        assert len(excinfo.value.diagnostics["zeta"]) == 3

    def test_strict_is_the_default_policy(self, service):
        cfg = _short(duration=1.0, asym={"tau_cM": 1.0})
        assert cfg.drive_bound_policy == DriveBoundPolicy.STRICT
        with pytest.raises(DriveBoundError):
            service.run_scenario(cfg)

    def test_limit_policy_counts_engagements(self, service):
        cfg = _short(duration=1.0, asym={"tau_cM": 1.0}, drive_bound_policy=DriveBoundPolicy.LIMIT)
        records = service.run_scenario(cfg)
        assert records[0].drive_limited
        assert records[0].drive_norm > 1.0
        assert compute_metrics(records, cfg).drive_limit_events > 0

    def test_instability_threshold_aborts_with_partial_records(self, monkeypatch):
        monkeypatch.setenv("SIM_INSTABILITY_THRESHOLD", "0.5")
        service = SimulationService()
        with pytest.raises(InstabilityError) as excinfo:
            service.run_scenario(_short(duration=1.0))
        assert len(excinfo.value.records) == 1
        assert excinfo.value.diagnostics["state_norm"] > 0.5

    def test_observer_tracks_constant_offset(self, service):
        k0 = 10.0
        offset = [1.0, 1.0, 0.5]
        cfg = _short(
            duration=5.0,
            disturbance=DisturbanceSpec(amplitude=[0.0] * 3, frequency=[0.0] * 3, offset=offset),
        )
        records = service.run_scenario(cfg)
        window = [r for r in records if r.t <= 5.0 / k0 + 1e-9]
        errors = np.array([r.b - r.b_hat for r in window])
        rates = observer_decay_rate([r.t for r in window], errors)
        assert np.all(rates > k0 / 1.1)
        assert np.all(rates < k0 * 1.1)
        final = records[-1]
        assert np.linalg.norm(final.b - final.b_hat) <= 0.01 * np.linalg.norm(final.b)


class TestClosedLoopSystem:
    """Tests for the assembled vector field."""

    @pytest.mark.parametrize("method", [Method.PROPOSED_ASYM, Method.PROPOSED_MAGRATE, Method.ADHOC])
    def test_deriv_composes_component_fields(self, method):
        cfg = _short(method, "figure8")
        vessel = VesselModel(cfg.vessel)
        system = ClosedLoopSystem(cfg, vessel)
        rng = np.random.default_rng(3)
        x = system.initial_state() + 0.3 * rng.standard_normal(state_size(system.family))
        drive = np.array([2.0, -1.0, 0.5])
        t = 7.3
        dx = system.deriv(t, x, drive)

        tau = drive if system.family is None else x[ZETA]
        b = disturbance_signal(t, cfg.disturbance)
        assert_allclose(dx[ETA], kinematics_deriv(VehicleState(eta=x[ETA], nu=x[NU])))
        assert_allclose(dx[NU], dynamics_deriv(vessel, x[NU], tau, b))
        observer = ObserverState(z=x[Z_OBS], K0=np.diag(cfg.gains.K0))
        assert_allclose(dx[Z_OBS], observer_deriv(observer, vessel, x[NU], tau))
        if method == Method.PROPOSED_ASYM:
            assert_allclose(dx[ZETA], asym_sat_deriv(ActuatorState(zeta=x[ZETA]), drive, cfg.asym))
        if method == Method.PROPOSED_MAGRATE:
            zeta_dot, tau_c_dot = rate_sat_deriv(ActuatorState(zeta=x[ZETA], tau_c=x[TAU_C]), drive, cfg.magrate)
            assert_allclose(dx[ZETA], zeta_dot)
            assert_allclose(dx[TAU_C], tau_c_dot)

    def test_estimate_error_obeys_observer_equation(self):
        # d/dt b_hat = K0 (b - b_hat) holds exactly for b_hat = z + K0 M nu
        cfg = _short()
        vessel = VesselModel(cfg.vessel)
        system = ClosedLoopSystem(cfg, vessel)
        x = system.initial_state()
        x[NU] = [0.4, -0.1, 0.05]
        x[ZETA] = [1.0, -0.5, 0.2]
        t = 3.0
        dx = system.deriv(t, x, np.zeros(3))
        K0 = np.diag(cfg.gains.K0)
        b_hat_dot = dx[Z_OBS] + K0 @ vessel.M @ dx[NU]
        assert_allclose(b_hat_dot, K0 @ (disturbance_signal(t, cfg.disturbance) - system.b_hat(x)), atol=1e-9)

    def test_kinematics_preserve_speed(self):
        cfg = _short()
        system = ClosedLoopSystem(cfg, VesselModel(cfg.vessel))
        x = system.initial_state()
        x[ETA] = [0.0, 0.0, 1.1]
        x[NU] = [0.3, 0.4, -0.2]
        dx = system.deriv(0.0, x, np.zeros(3))
        assert np.linalg.norm(dx[ETA][:2]) == pytest.approx(0.5)
        assert dx[2] == pytest.approx(-0.2)


class TestBatches:
    """Tests for compare, sweep and the integrator-order study."""

    @pytest.fixture
    def service(self, monkeypatch):
        monkeypatch.setenv("SIM_MAX_WORKERS", "1")
        return SimulationService()

    def test_compare_runs_each_method(self, service):
        results = service.compare(_short(duration=0.5), [Method.PROPOSED_ASYM, Method.ADHOC, Method.UNBOUNDED])
        assert list(results) == [Method.PROPOSED_ASYM, Method.ADHOC, Method.UNBOUNDED]
        assert all(len(records) == 51 for records in results.values())

    def test_with_method_keeps_scenario(self):
        cfg = _short(duration=2.0)
        adhoc = SimulationService.with_method(cfg, Method.ADHOC)
        assert adhoc.method == Method.ADHOC
        assert adhoc.initial == cfg.initial
        assert adhoc.duration == 2.0

    def test_with_param_sets_nested_value(self):
        cfg = SimulationService.with_param(_short(), "gains.K1", [1.0, 1.0, 1.0])
        assert cfg.gains.K1 == [1.0, 1.0, 1.0]

    def test_with_param_rejects_unknown_path(self):
        with pytest.raises(KeyError):
            SimulationService.with_param(_short(), "gains.K9", [1.0, 1.0, 1.0])

    def test_sweep_runs_each_value(self, service):
        runs = service.sweep(_short(duration=0.2), "integrator.dt", [0.01, 0.02])
        assert [len(records) for records in runs] == [21, 11]

    def test_process_pool_used_when_configured(self, monkeypatch):
        monkeypatch.setenv("SIM_MAX_WORKERS", "4")
        service = SimulationService()
        pool = MagicMock()
        pool.map.return_value = iter([["a"], ["b"]])
        with patch("app.services.simulation_service.ProcessPoolExecutor") as executor:
            executor.return_value.__enter__.return_value = pool
            results = service.compare(_short(duration=0.1), [Method.ADHOC, Method.UNBOUNDED])
        executor.assert_called_once_with(max_workers=4)
        assert results == {Method.ADHOC: ["a"], Method.UNBOUNDED: ["b"]}

    def test_integrator_order(self, service):
        report = service.convergence_study(_short())
        assert all(a > b for a, b in zip(report.errors, report.errors[1:]))
        assert 3.7 <= report.slope <= 4.3

    def test_figure8_comparison_ordering(self, service):
        cfg = _short(trajectory="figure8", duration=20.0)
        results = service.compare(cfg, [Method.PROPOSED_ASYM, Method.ADHOC, Method.UNBOUNDED])
        metrics = {
            method: compute_metrics(records, SimulationService.with_method(cfg, method))
            for method, records in results.items()
        }
        # The unbounded sway demand runs past twice its actuator limit
        assert metrics[Method.UNBOUNDED].max_abs_tau[1] >= 2.0 * cfg.asym.tau_M[1]
        adhoc_tau = np.array([r.tau for r in results[Method.ADHOC]])
        assert np.all(adhoc_tau <= np.array(cfg.asym.tau_M))
        assert np.all(adhoc_tau >= -np.array(cfg.asym.tau_m))
        assert metrics[Method.PROPOSED_ASYM].constraint_violation_count == 0
