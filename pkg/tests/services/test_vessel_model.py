import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from app.errors import ParameterError
from app.models import VesselParams
from app.services.vessel_model import (
    VehicleState,
    VesselModel,
    coriolis_matrix,
    damping_matrix,
    dynamics_deriv,
    invert_mass_matrix,
    kinematics_deriv,
    mass_matrix,
    rotation_matrix,
)

finite = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False, allow_infinity=False)
velocities = st.tuples(finite, finite, finite).map(np.array)


class TestRotationMatrix:
    """Tests for the heading rotation J(psi)."""

    def test_identity_at_zero_heading(self):
        assert_allclose(rotation_matrix(0.0), np.eye(3))

    def test_quarter_turn(self):
        expected = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
        assert_allclose(rotation_matrix(np.pi / 2), expected, atol=1e-15)

    @settings(max_examples=1000, deadline=None)
    @given(psi=st.floats(min_value=-100.0, max_value=100.0))
    def test_orthonormal_with_unit_determinant(self, psi):
        J = rotation_matrix(psi)
        assert_allclose(J.T @ J, np.eye(3), atol=1e-12)
        assert abs(np.linalg.det(J) - 1.0) < 1e-12


class TestMassMatrix:
    """Tests for the inertia matrix and its inverse."""

    @pytest.fixture
    def params(self):
        return VesselParams.cybership2()

    def test_surge_entry(self, params):
        assert mass_matrix(params)[0, 0] == pytest.approx(25.8)

    def test_coupling_entries(self, params):
        M = mass_matrix(params)
        assert M[1, 2] == pytest.approx(1.0948)
        assert M[2, 1] == pytest.approx(1.0948)

    def test_symmetric_positive_definite(self, params):
        M = mass_matrix(params)
        assert_allclose(M, M.T)
        assert np.all(np.linalg.eigvalsh(M) > 0)

    def test_rejects_non_positive_definite(self, params):
        bad = params.copy(update={"N_rdot": 10.0})
        with pytest.raises(ParameterError):
            mass_matrix(bad)

    def test_closed_form_inverse(self, params):
        M = mass_matrix(params)
        assert_allclose(invert_mass_matrix(M) @ M, np.eye(3), atol=1e-12)

    def test_ill_conditioned_rejected(self):
        M = np.diag([1.0, 1.0, 1e-12])
        with pytest.raises(ParameterError):
            invert_mass_matrix(M)

    def test_parameters_load_from_sname_keys(self):
        params = VesselParams.parse_obj({**VesselParams.cybership2().dict(by_alias=True), "X_|u|u": -2.0})
        assert params.X_uu == -2.0

    def test_non_positive_mass_rejected(self):
        data = VesselParams.cybership2().dict(by_alias=True)
        data["m"] = 0.0
        with pytest.raises(ValueError):
            VesselParams.parse_obj(data)


class TestCoriolisAndDamping:
    """Tests for C(nu) and D(nu)."""

    def test_zero_at_rest(self, vessel):
        assert_allclose(vessel.coriolis(np.zeros(3)), np.zeros((3, 3)))

    def test_c13_entry(self, vessel):
        M = vessel.M
        C = coriolis_matrix(VesselParams.cybership2(), np.array([1.0, 0.5, 0.1]))
        assert C[0, 2] == pytest.approx(-(M[1, 1] * 0.5 + M[1, 2] * 0.1))

    @settings(max_examples=1000, deadline=None)
    @given(nu=velocities)
    def test_skew_symmetric(self, nu):
        M = mass_matrix(VesselParams.cybership2())
        C = coriolis_matrix(M, nu)
        assert_allclose(C + C.T, np.zeros((3, 3)), atol=1e-12)
        assert abs(nu @ C @ nu) < 1e-12 * max(1.0, nu @ nu) * 100

    def test_surge_damping_at_rest(self):
        D = damping_matrix(VesselParams.cybership2(), np.zeros(3))
        assert D[0, 0] == pytest.approx(0.72253)

    def test_surge_damping_at_unit_speed(self):
        D = damping_matrix(VesselParams.cybership2(), np.array([1.0, 0.0, 0.0]))
        assert D[0, 0] == pytest.approx(0.72253 + 1.32742)

    def test_surge_damping_grows_with_speed(self):
        params = VesselParams.cybership2()
        values = [damping_matrix(params, np.array([u, 0.0, 0.0]))[0, 0] for u in (0.1, 0.5, 1.0, 2.0)]
        assert all(b > a for a, b in zip(values, values[1:]))

    def test_cubic_surge_term_is_opt_in(self):
        params = VesselParams.cybership2()
        nu = np.array([2.0, 0.0, 0.0])
        plain = damping_matrix(params, nu)[0, 0]
        cubic = damping_matrix(params, nu, cubic_surge=True)[0, 0]
        assert cubic - plain == pytest.approx(5.86643 * 4.0)


class TestDerivatives:
    """Tests for the kinematic and kinetic state derivatives."""

    def test_aligned_frames(self):
        state = VehicleState(eta=np.zeros(3), nu=np.array([1.0, 0.0, 0.0]))
        assert_allclose(kinematics_deriv(state), [1.0, 0.0, 0.0])

    def test_quarter_turn_kinematics(self):
        state = VehicleState(eta=np.array([0.0, 0.0, np.pi / 2]), nu=np.array([1.0, 0.0, 0.0]))
        assert_allclose(kinematics_deriv(state), [0.0, 1.0, 0.0], atol=1e-15)

    def test_equilibrium(self, vessel):
        assert_allclose(dynamics_deriv(vessel, np.zeros(3), np.zeros(3), np.zeros(3)), np.zeros(3))

    def test_surge_push_from_rest(self, vessel):
        nu_dot = dynamics_deriv(vessel, np.zeros(3), np.array([1.0, 0.0, 0.0]), np.zeros(3))
        assert_allclose(nu_dot, [1.0 / 25.8, 0.0, 0.0], atol=1e-15)

    def test_accepts_raw_parameters(self):
        params = VesselParams.cybership2()
        nu_dot = dynamics_deriv(params, np.zeros(3), np.array([1.0, 0.0, 0.0]), np.zeros(3))
        assert nu_dot[0] == pytest.approx(1.0 / 25.8)

    @settings(max_examples=200, deadline=None)
    @given(nu=velocities, tau=velocities, b=velocities)
    def test_power_balance(self, nu, tau, b):
        model = VesselModel(VesselParams.cybership2())
        nu_dot = dynamics_deriv(model, nu, tau, b)
        lhs = nu @ model.M @ nu_dot
        dissipated = nu @ model.damping(nu) @ nu
        rhs = nu @ tau - dissipated + nu @ b
        scale = 1.0 + abs(nu @ tau) + abs(dissipated) + abs(nu @ b)
        scale += np.linalg.norm(nu) * np.linalg.norm(model.coriolis(nu) @ nu)
        assert abs(lhs - rhs) <= 1e-9 * scale

    @settings(max_examples=200, deadline=None)
    @given(nu=velocities, tau1=velocities, tau2=velocities, b=velocities)
    def test_linear_in_actuation(self, nu, tau1, tau2, b):
        model = VesselModel(VesselParams.cybership2())
        combined = dynamics_deriv(model, nu, tau1 + tau2, b) - dynamics_deriv(model, nu, tau1, b)
        assert_allclose(combined, model.M_inv @ tau2, atol=1e-10)

    def test_state_finiteness(self):
        assert VehicleState(np.zeros(3), np.zeros(3)).is_finite()
        assert not VehicleState(np.array([np.nan, 0.0, 0.0]), np.zeros(3)).is_finite()
