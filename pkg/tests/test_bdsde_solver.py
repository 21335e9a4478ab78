"""
Unit tests for the discrete BDSDE solver.
"""
import math

import numpy as np
import pytest

from src.models.solutions import BDSDECoefficients
from src.services.bdsde_solver import bdsde_residual_report, solve_bdsde, y0_mean
from src.services.probability_core import make_noise
from src.services.registry import CoefficientFactory
from src.utils.exceptions import ConvergenceError, MeasurabilityError, StepSizeError


def zero_map(s, y, z):
    return np.zeros_like(y)


def one_map(s, y, z):
    return np.ones_like(y)


def decay_map(s, y, z):
    return -y


@pytest.fixture
def noise():
    return make_noise(1.0, 6)


class TestExactCases:
    """Cases whose discrete solution is known in closed form."""

    def test_wiener_terminal(self, noise):
        coeffs = BDSDECoefficients(terminal=noise.wiener(6), driver=zero_map, noise_coeff=zero_map, c=0.0)
        sol = solve_bdsde(noise, coeffs)
        for i in range(noise.n + 1):
            assert (sol.y[i] - noise.wiener(i)).max_abs() <= 1e-12, f"Y_{i} != W_t{i}"
        for i in range(noise.n):
            assert np.allclose(sol.z[i].values, 1.0, atol=1e-12), f"Z_{i} != 1"

    def test_unit_noise_coefficient(self, noise):
        """g = 1 and xi = 1 give Y_t = 1 + B_T - B_t and Z = 0."""
        coeffs = BDSDECoefficients(terminal=noise.constant(1.0), driver=zero_map, noise_coeff=one_map, c=0.0)
        sol = solve_bdsde(noise, coeffs)
        for i in range(noise.n + 1):
            assert (sol.y[i] - (noise.brownian_tail(i) + 1.0)).max_abs() <= 1e-12
        for i in range(noise.n):
            assert sol.z[i].max_abs() <= 1e-12

    def test_zero_data(self, noise):
        coeffs = BDSDECoefficients(terminal=noise.zero(), driver=zero_map, noise_coeff=zero_map, c=0.0)
        sol = solve_bdsde(noise, coeffs)
        assert all(y.max_abs() == 0.0 for y in sol.y)
        assert sol.residual_max == 0.0


class TestConvergence:
    """Test the implicit scheme against the ODE limit."""

    def test_linear_decay(self):
        errors = {}
        for n in (5, 10):
            noise = make_noise(1.0, n)
            coeffs = BDSDECoefficients(terminal=noise.constant(1.0), driver=decay_map, noise_coeff=zero_map, c=1.0)
            sol = solve_bdsde(noise, coeffs)
            y0 = y0_mean(sol)[0]
            assert y0 == pytest.approx((1.0 + 1.0 / n) ** -n, abs=1e-10)
            errors[n] = abs(y0 - math.exp(-1.0))

        assert errors[10] <= 0.03
        assert 1.5 <= errors[5] / errors[10] <= 2.5, f"Error ratio {errors[5] / errors[10]}"

    def test_inner_contraction(self):
        noise = make_noise(1.0, 10)
        coeffs = BDSDECoefficients(terminal=noise.constant(1.0), driver=decay_map, noise_coeff=zero_map, c=1.0)
        sol = solve_bdsde(noise, coeffs)
        assert sol.inner_ratios, "Expected recorded inner contraction ratios"
        assert max(sol.inner_ratios) <= noise.dt * (1.0 + 1e-6)


class TestSolverContract:
    """Test preconditions, partial solves and residuals."""

    def test_step_size(self):
        noise = make_noise(1.0, 4)
        coeffs = BDSDECoefficients(terminal=noise.zero(), driver=decay_map, noise_coeff=zero_map, c=4.0)
        with pytest.raises(StepSizeError):
            solve_bdsde(noise, coeffs)

    def test_terminal_must_be_a_w_functional(self, noise):
        coeffs = BDSDECoefficients(terminal=noise.brownian(6), driver=zero_map, noise_coeff=zero_map, c=0.0)
        with pytest.raises(MeasurabilityError):
            solve_bdsde(noise, coeffs)

    def test_inner_iteration_budget(self, noise):
        coeffs = BDSDECoefficients(terminal=noise.constant(1.0), driver=decay_map, noise_coeff=zero_map, c=1.0)
        with pytest.raises(ConvergenceError):
            solve_bdsde(noise, coeffs, inner_max=1)

    def test_partial_solve(self, noise):
        coeffs = BDSDECoefficients(terminal=noise.wiener(6), driver=zero_map, noise_coeff=one_map, c=0.0)
        sol = solve_bdsde(noise, coeffs, start=2)
        assert sol.y[0] is None and sol.y[1] is None
        assert sol.z[1] is None
        assert sol.y[2] is not None
        assert len(sol.inner_iterations) == noise.n - 2

    def test_nonlinear_residual(self, noise):
        f = CoefficientFactory.create("trig", amplitude=0.5, weights=[1.0, 0.5, 0.0])
        g = CoefficientFactory.create("affine", y=0.2, z=0.1, offset=0.05)
        coeffs = BDSDECoefficients.frozen(noise.wiener(6).apply(np.sin), f, g, 0.0, c=0.5, alpha=0.05)
        sol = solve_bdsde(noise, coeffs)
        report = bdsde_residual_report(noise, sol, coeffs)
        assert len(report.per_node) == noise.n
        assert report.max_abs <= 1e-10
        assert sol.residual_max == report.max_abs
