"""
Unit tests for martingale representation on the tree.
"""
import numpy as np
import pytest

from src.models.fields import AlgebraLevel, Orientation
from src.services import sampling
from src.services.probability_core import cond_expect, expect, make_noise
from src.services.representation import (
    backward_mart_rep,
    backward_rep,
    exponential_deviation,
    exponential_martingale,
    exponential_martingale_check,
    exponential_span_check,
    forward_rep,
    mixed_rep,
    uniqueness_check,
)
from src.services.stochastic_integrals import build_process, check_orientation
from src.utils.exceptions import MeasurabilityError, StructuralInputError


class TestForwardRep:
    """Test the forward representation of W-functionals."""

    def setup_method(self):
        self.noise = make_noise(1.0, 6)

    def test_seeded_functionals(self):
        rng = sampling.make_rng(2024)
        for trial in range(100):
            F = sampling.w_functional(self.noise, rng)
            rep = forward_rep(self.noise, F)
            assert rep.reconstruction_error <= 1e-10, f"Trial {trial}: error {rep.reconstruction_error}"
            check_orientation(rep.integrand)

    def test_wiener_squared(self):
        """W_T^2 = T + sum 2 W_{t_i} Delta W_i."""
        w_t = self.noise.wiener(self.noise.n)
        rep = forward_rep(self.noise, w_t * w_t)
        assert rep.mean[0] == pytest.approx(1.0, abs=1e-12)
        for i in range(self.noise.n):
            assert (rep.integrand[i] - self.noise.wiener(i) * 2.0).max_abs() < 1e-12

    def test_rejects_b_dependence(self):
        with pytest.raises(MeasurabilityError):
            forward_rep(self.noise, self.noise.brownian(self.noise.n))


class TestBackwardRep:
    """Test the backward representation of B-functionals."""

    def test_seeded_functionals(self):
        noise = make_noise(1.0, 6)
        rng = sampling.make_rng(99)
        for trial in range(100):
            rep = backward_rep(noise, sampling.b_functional(noise, rng))
            assert rep.reconstruction_error <= 1e-10, f"Trial {trial}: error {rep.reconstruction_error}"
            assert rep.integrand.orientation == Orientation.BACKWARD
            check_orientation(rep.integrand)

    def test_brownian_terminal(self):
        noise = make_noise(1.0, 4)
        rep = backward_rep(noise, noise.brownian(4))
        assert abs(rep.mean[0]) < 1e-15
        for i in range(noise.n):
            assert np.allclose(rep.integrand[i].values, 1.0)

    def test_brownian_terminal_squared(self):
        """B_T^2 = T + sum 2 (B_T - B_{t_{i+1}}) Delta B_i."""
        for n in (4, 6, 8):
            noise = make_noise(1.0, n)
            b_t = noise.brownian(n)
            rep = backward_rep(noise, b_t * b_t)
            assert rep.mean[0] == pytest.approx(1.0, abs=1e-12), f"N={n}: mean {rep.mean}"
            for i in range(n):
                gap = (rep.integrand[i] - noise.brownian_tail(i + 1) * 2.0).max_abs()
                assert gap <= 1e-12, f"N={n}, interval {i}: gap {gap}"

    def test_rejects_w_dependence(self):
        noise = make_noise(1.0, 3)
        with pytest.raises(MeasurabilityError):
            backward_rep(noise, noise.wiener(3))

    def test_backward_martingale_path(self):
        noise = make_noise(1.0, 5)
        F = sampling.b_functional(noise, sampling.make_rng(3))
        path, rep = backward_mart_rep(noise, F)
        assert len(path) == noise.n + 1
        assert np.allclose(path[noise.n].values, expect(F))
        for i in range(noise.n + 1):
            tail = path[i] - expect(F)
            for j in range(i, noise.n):
                tail = tail - rep.integrand[j] * noise.brownian_increment(j)
            assert tail.max_abs() < 1e-12, f"M(t_{i}) is not the tail of the representation"


class TestUniqueness:
    """Test that no second integrand reproduces the same field."""

    def test_perturbation_changes_integral(self):
        noise = make_noise(1.0, 4)
        rng = sampling.make_rng(5)
        rep = forward_rep(noise, sampling.w_functional(noise, rng))
        perturbation = build_process(lambda i: noise.constant(0.1), noise.n, Orientation.FORWARD)
        assert uniqueness_check(noise, rep, perturbation) == pytest.approx(0.01, rel=1e-12)


class TestMixedRep:
    """Test the mixed representation used by the Volterra rows."""

    def setup_method(self):
        self.noise = make_noise(1.0, 4)

    def test_admissible_row(self):
        noise, k = self.noise, 1
        F = noise.wiener(noise.n) * noise.wiener(noise.n) + noise.brownian_tail(k) * 0.5
        for i in range(k, noise.n):
            F = F + noise.wiener(i) * noise.brownian_increment(i)
        row = mixed_rep(noise, F, k)
        assert row.reconstruction_error <= 1e-12
        assert row.y.level == AlgebraLevel.filtration(k, noise.n)
        assert sorted(row.z) == list(range(k, noise.n))
        for i, value in row.z.items():
            assert value.level == AlgebraLevel.filtration(i, noise.n)

    def test_y_is_the_conditional_expectation(self):
        noise, k = self.noise, 2
        F = noise.wiener(noise.n) + noise.brownian_tail(k)
        row = mixed_rep(noise, F, k)
        assert (row.y - cond_expect(F, AlgebraLevel.filtration(k, noise.n))).max_abs() < 1e-14

    def test_rejects_non_admissible_field(self):
        """B_{t_k} is not reachable from F_{t_k} plus W-integrals over [t_k, T]."""
        noise = self.noise
        with pytest.raises(StructuralInputError):
            mixed_rep(noise, noise.brownian(2), 2)


class TestExponentialMartingale:
    """Test the exponential backward martingale and its integrand."""

    def test_unit_mean(self):
        noise = make_noise(1.0, 5)
        value = exponential_martingale(noise, 1.0, 0)
        assert expect(value)[0] == pytest.approx(np.cosh(np.sqrt(0.2)) ** 5 * np.exp(-0.5), rel=1e-12)

    def test_deviation_halves(self):
        report = exponential_martingale_check(1.0, [5, 10], h=1.0)
        assert 1.6 <= report.ratios[0] <= 2.4, f"Ratio {report.ratios}"
        assert report.deviations[0] == pytest.approx(0.07647, abs=1e-4)

    def test_zero_rate_is_exact(self):
        noise = make_noise(1.0, 3)
        assert exponential_deviation(noise, 0.0) == 0.0

    def test_span_is_complete(self):
        noise = make_noise(1.0, 4)
        F = sampling.b_functional(noise, sampling.make_rng(8))
        assert exponential_span_check(noise, F) < 1e-9

    def test_coarse_span_misses_fields(self):
        noise = make_noise(1.0, 4)
        b_t = noise.brownian(4)
        assert exponential_span_check(noise, b_t * b_t * b_t, pieces=1) > 1e-3
