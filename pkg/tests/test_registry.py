"""
Unit tests for the coefficient and terminal registries.
"""
import numpy as np
import pytest

from src.models.fields import AlgebraLevel
from src.services.probability_core import make_noise, measurability_check
from src.services.registry import (
    AffineCoefficient,
    Coefficient,
    CoefficientFactory,
    TerminalFactory,
    TerminalFunctional,
    TrigCoefficient,
)
from src.utils.exceptions import ConfigurationError


class TestAffineCoefficient:
    """Test affine generators."""

    def setup_method(self):
        self.coeff = CoefficientFactory.create("affine", dim=2, y=[1.0, -2.0], zeta=0.5, offset=[0.1, 0.2], offset_t=1.0)

    def test_evaluation(self):
        y = np.array([[1.0, 1.0], [0.0, 2.0]])
        zero = np.zeros_like(y)
        result = self.coeff(0.5, 0.75, y, zero, np.ones_like(y))
        expected = np.array([[1.0 + 0.5 + 0.6, -2.0 + 0.5 + 0.7], [0.5 + 0.6, -4.0 + 0.5 + 0.7]])
        assert np.allclose(result, expected)

    def test_flags_and_constant(self):
        assert self.coeff.is_affine
        assert self.coeff.depends_on_zeta
        assert not self.coeff.depends_on_z
        assert self.coeff.depends_on_time
        assert self.coeff.lipschitz_constant == pytest.approx(4.25)

    def test_stacked_constant(self):
        """The constant is the squared spectral norm of [A_y A_z A_zeta]."""
        coeff = CoefficientFactory.create("affine", y=-0.5, z=0.2)
        assert coeff.lipschitz_constant == pytest.approx(0.29)

    def test_bad_shape(self):
        with pytest.raises(ConfigurationError):
            CoefficientFactory.create("affine", dim=2, y=[1.0, 2.0, 3.0])


class TestTrigCoefficient:
    def test_evaluation_and_constant(self):
        coeff = CoefficientFactory.create("trig", amplitude=0.5, weights=[1.0, 0.5, 0.5], phase=np.pi / 2)
        y = np.zeros((3, 1))
        assert np.allclose(coeff(0.0, 0.0, y, y, y), 0.5)
        assert coeff.lipschitz_constant == pytest.approx(0.375)
        assert coeff.depends_on_zeta and coeff.depends_on_z
        assert not coeff.is_affine

    def test_zero_amplitude_depends_on_nothing(self):
        coeff = CoefficientFactory.create("trig", amplitude=0.0, weights=[1.0, 1.0, 1.0])
        assert not coeff.depends_on_zeta
        assert not coeff.depends_on_z

    def test_weights_length(self):
        with pytest.raises(ConfigurationError):
            CoefficientFactory.create("trig", weights=[1.0, 0.5])


class TestCoefficientFactory:
    """Test the generator registry."""

    def test_known_names(self):
        assert CoefficientFactory.names() == ["affine", "constant", "trig", "zero"]
        assert isinstance(CoefficientFactory.create("trig"), TrigCoefficient)
        assert isinstance(CoefficientFactory.create("affine"), AffineCoefficient)

    def test_zero_and_constant(self):
        y = np.ones((4, 2))
        assert np.array_equal(CoefficientFactory.create("zero", dim=2)(0.0, 0.0, y, y, y), np.zeros((4, 2)))
        constant = CoefficientFactory.create("constant", dim=2, value=[1.0, 3.0])
        assert np.array_equal(constant(0.0, 0.0, y, y, y), np.tile([1.0, 3.0], (4, 1)))
        assert constant.lipschitz_constant == 0.0

    def test_unknown_name(self):
        with pytest.raises(ConfigurationError) as exc_info:
            CoefficientFactory.create("invalid")
        assert "coefficient registry" in str(exc_info.value)

    def test_unknown_parameter(self):
        with pytest.raises(ConfigurationError):
            CoefficientFactory.create("affine", slope=1.0)

    def test_register_custom(self):
        class Doubling(Coefficient):
            name = "doubling"

            @property
            def lipschitz_constant(self):
                return 4.0

            def __call__(self, t, s, y, z, zeta):
                return 2.0 * np.atleast_2d(y)

        CoefficientFactory.register("doubling", Doubling)
        try:
            coeff = CoefficientFactory.create("doubling")
            assert np.allclose(coeff(0.0, 0.0, np.ones((2, 1)), None, None), 2.0)
        finally:
            CoefficientFactory._coefficients.pop("doubling")


class TestTerminalFactory:
    """Test terminal functionals."""

    def setup_method(self):
        self.noise = make_noise(1.0, 3)

    def test_every_terminal_is_a_w_functional(self):
        level = AlgebraLevel.wiener(3, 3)
        for name in TerminalFactory.names():
            psi = TerminalFactory.create(name).build(self.noise)
            assert len(psi) == self.noise.n + 1
            for k in range(self.noise.n + 1):
                ok, _ = measurability_check(psi[k], level)
                assert ok, f"{name} psi(t_{k}) depends on B"

    def test_constant_in_time(self):
        cases = [
            (TerminalFactory.create("wiener_terminal"), True),
            (TerminalFactory.create("poly_t", coefficients=[1.0]), True),
            (TerminalFactory.create("poly_t", coefficients=[1.0, 2.0]), False),
            (TerminalFactory.create("sin_wiener", time_shift=0.5), False),
            (TerminalFactory.create("wiener_adapted"), False),
        ]

        for terminal, expected in cases:
            assert terminal.is_constant_in_time == expected, f"{terminal.name}"

    def test_zero_terminal(self):
        psi = TerminalFactory.create("zero").build(self.noise)
        assert all(value.max_abs() == 0.0 for value in psi.values)

    def test_poly_time_values(self):
        psi = TerminalFactory.create("poly_t", coefficients=[1.0, 0.0, 3.0]).build(self.noise)
        for k in range(4):
            t = self.noise.grid.t(k)
            assert np.allclose(psi[k].values, 1.0 + 3.0 * t * t)

    def test_wiener_adapted_is_adapted(self):
        psi = TerminalFactory.create("wiener_adapted", time_weight=1.0).build(self.noise)
        for k in range(4):
            ok, _ = measurability_check(psi[k], AlgebraLevel.wiener(k, 3))
            assert ok

    def test_dimension_tiling(self):
        psi = TerminalFactory.create("wiener_terminal", dim=3).build(self.noise)
        assert psi[0].dim == 3
        assert np.allclose(psi[0].values[:, 0], psi[0].values[:, 2])

    def test_unknown_name(self):
        with pytest.raises(ConfigurationError) as exc_info:
            TerminalFactory.create("invalid")
        assert "psi registry" in str(exc_info.value)

    def test_abstract_base(self):
        with pytest.raises(TypeError):
            TerminalFunctional()
