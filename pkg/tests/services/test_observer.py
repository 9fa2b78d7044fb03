import numpy as np
import pytest
from numpy.testing import assert_allclose

from app.services.observer import ObserverState, estimate, observer_deriv
from app.services.simulation_service import rk4_step


class TestObserver:
    """Tests for the disturbance observer equations."""

    @pytest.fixture
    def observer(self):
        return ObserverState.from_gains([10.0, 10.0, 10.0])

    def test_equilibrium(self, observer, vessel):
        assert_allclose(observer_deriv(observer, vessel, np.zeros(3), np.zeros(3)), np.zeros(3))

    def test_estimate_at_rest(self, observer, vessel):
        assert_allclose(estimate(observer, vessel, np.zeros(3)), np.zeros(3))

    def test_estimate_is_additive_in_z(self, vessel):
        obs = ObserverState.from_gains([10.0, 10.0, 10.0], z=[1.0, 0.0, 0.0])
        assert_allclose(estimate(obs, vessel, np.zeros(3)), [1.0, 0.0, 0.0])

    def test_estimate_linear_in_z(self, vessel):
        nu = np.array([0.3, -0.1, 0.05])
        z1, z2 = np.array([1.0, -2.0, 0.5]), np.array([0.2, 0.4, -0.3])
        base = estimate(ObserverState.from_gains([5.0, 6.0, 7.0], z=np.zeros(3)), vessel, nu)
        a = estimate(ObserverState.from_gains([5.0, 6.0, 7.0], z=z1), vessel, nu)
        b = estimate(ObserverState.from_gains([5.0, 6.0, 7.0], z=z2), vessel, nu)
        ab = estimate(ObserverState.from_gains([5.0, 6.0, 7.0], z=z1 + z2), vessel, nu)
        assert_allclose(ab - base, (a - base) + (b - base), atol=1e-12)

    def test_rejects_non_positive_gain(self):
        with pytest.raises(ValueError):
            ObserverState.from_gains([10.0, 0.0, 10.0])

    def test_constant_disturbance_error_decays_exponentially(self, vessel):
        """With constant b the estimation error obeys b_e_dot = -K0 b_e whatever the vessel does."""
        k0 = np.array([10.0, 5.0, 2.0])
        K0 = np.diag(k0)
        b = np.array([1.0, 1.0, 0.5])
        tau = np.array([2.0, -1.0, 0.3])
        nu0 = np.array([0.2, 0.0, 0.0])

        def deriv(t, x):
            nu, z = x[:3], x[3:]
            nu_dot = vessel.M_inv @ (tau - vessel.hydrodynamic_load(nu) + b)
            z_dot = observer_deriv(ObserverState(z=z, K0=K0), vessel, nu, tau)
            return np.concatenate([nu_dot, z_dot])

        x = np.concatenate([nu0, -K0 @ vessel.M @ nu0])
        dt, steps = 0.01, 50
        for k in range(steps):
            x = rk4_step(x, deriv, dt, k * dt)

        b_hat = estimate(ObserverState(z=x[3:], K0=K0), vessel, x[:3])
        assert_allclose(b - b_hat, b * np.exp(-k0 * dt * steps), rtol=1e-4)
