"""
Coefficient and terminal-value registries.

Scenario files name generators and terminal values; the factories below turn
those names into vectorized callables. New entries can be registered at runtime.
"""
import logging
from abc import ABC, abstractmethod
from typing import Dict, Sequence, Type, Union

import numpy as np

from src.models.fields import NoiseModel, RandomField
from src.models.solutions import TerminalField
from src.utils.exceptions import ConfigurationError

logger = logging.getLogger(__name__)

MatrixLike = Union[float, Sequence[float], Sequence[Sequence[float]]]


def _as_matrix(value: MatrixLike, dim: int, name: str) -> np.ndarray:
    """A scalar means scalar * I; a vector means a diagonal matrix."""
    array = np.asarray(value, dtype=float)
    if array.ndim == 0:
        return float(array) * np.eye(dim)
    if array.ndim == 1 and array.shape == (dim,):
        return np.diag(array)
    if array.shape == (dim, dim):
        return array
    raise ConfigurationError(f"Parameter '{name}' must be a scalar, a length-{dim} vector or a {dim}x{dim} matrix")


def _as_vector(value: MatrixLike, dim: int, name: str) -> np.ndarray:
    array = np.asarray(value, dtype=float)
    if array.ndim == 0:
        return np.full(dim, float(array))
    if array.shape == (dim,):
        return array
    raise ConfigurationError(f"Parameter '{name}' must be a scalar or a length-{dim} vector")


class Coefficient(ABC):
    """Generator (t, s, y, z, zeta) -> R^k evaluated on rows of atoms."""

    name = "abstract"

    def __init__(self, dim: int = 1):
        self.dim = dim

    @property
    def depends_on_zeta(self) -> bool:
        return False

    @property
    def depends_on_z(self) -> bool:
        return False

    @property
    def depends_on_time(self) -> bool:
        return False

    @property
    def is_affine(self) -> bool:
        return False

    @property
    @abstractmethod
    def lipschitz_constant(self) -> float:
        """Smallest L with |delta|^2 <= L (|dy|^2 + |dz|^2 + |dzeta|^2)."""

    @abstractmethod
    def __call__(self, t, s, y: np.ndarray, z: np.ndarray, zeta: np.ndarray) -> np.ndarray:
        ...

    def _rows(self, y: np.ndarray) -> int:
        return np.atleast_2d(y).shape[0]


class ZeroCoefficient(Coefficient):
    name = "zero"

    @property
    def is_affine(self) -> bool:
        return True

    @property
    def lipschitz_constant(self) -> float:
        return 0.0

    def __call__(self, t, s, y, z, zeta):
        return np.zeros((self._rows(y), self.dim))


class ConstantCoefficient(Coefficient):
    name = "constant"

    def __init__(self, dim: int = 1, value: MatrixLike = 0.0):
        super().__init__(dim)
        self.value = _as_vector(value, dim, "value")

    @property
    def is_affine(self) -> bool:
        return True

    @property
    def lipschitz_constant(self) -> float:
        return 0.0

    def __call__(self, t, s, y, z, zeta):
        return np.tile(self.value, (self._rows(y), 1))


class AffineCoefficient(Coefficient):
    """A_y y + A_z z + A_zeta zeta + offset + offset_t * t + offset_s * s."""

    name = "affine"

    def __init__(
        self,
        dim: int = 1,
        y: MatrixLike = 0.0,
        z: MatrixLike = 0.0,
        zeta: MatrixLike = 0.0,
        offset: MatrixLike = 0.0,
        offset_t: float = 0.0,
        offset_s: float = 0.0,
    ):
        super().__init__(dim)
        self.a_y = _as_matrix(y, dim, "y")
        self.a_z = _as_matrix(z, dim, "z")
        self.a_zeta = _as_matrix(zeta, dim, "zeta")
        self.offset = _as_vector(offset, dim, "offset")
        self.offset_t = float(offset_t)
        self.offset_s = float(offset_s)

    @property
    def depends_on_zeta(self) -> bool:
        return bool(np.any(self.a_zeta))

    @property
    def depends_on_z(self) -> bool:
        return bool(np.any(self.a_z))

    @property
    def depends_on_time(self) -> bool:
        return self.offset_t != 0.0 or self.offset_s != 0.0

    @property
    def is_affine(self) -> bool:
        return True

    @property
    def lipschitz_constant(self) -> float:
        stacked = np.hstack([self.a_y, self.a_z, self.a_zeta])
        return float(np.linalg.norm(stacked, 2) ** 2)

    def offset_at(self, t, s) -> np.ndarray:
        return self.offset + self.offset_t * np.asarray(t, dtype=float) + self.offset_s * np.asarray(s, dtype=float)

    def __call__(self, t, s, y, z, zeta):
        y, z, zeta = np.atleast_2d(y), np.atleast_2d(z), np.atleast_2d(zeta)
        return y @ self.a_y.T + z @ self.a_z.T + zeta @ self.a_zeta.T + self.offset_at(t, s)


class TrigCoefficient(Coefficient):
    """amplitude * sin(w_y y + w_z z + w_zeta zeta + phase + time_coupling (t + s)), componentwise."""

    name = "trig"

    def __init__(
        self,
        dim: int = 1,
        amplitude: float = 1.0,
        weights: Sequence[float] = (1.0, 0.0, 0.0),
        phase: float = 0.0,
        time_coupling: float = 0.0,
    ):
        super().__init__(dim)
        if len(weights) != 3:
            raise ConfigurationError("Parameter 'weights' must hold the (y, z, zeta) weights")
        self.amplitude = float(amplitude)
        self.w_y, self.w_z, self.w_zeta = (float(w) for w in weights)
        self.phase = float(phase)
        self.time_coupling = float(time_coupling)

    @property
    def depends_on_zeta(self) -> bool:
        return self.w_zeta != 0.0 and self.amplitude != 0.0

    @property
    def depends_on_z(self) -> bool:
        return self.w_z != 0.0 and self.amplitude != 0.0

    @property
    def depends_on_time(self) -> bool:
        return self.time_coupling != 0.0

    @property
    def lipschitz_constant(self) -> float:
        return self.amplitude ** 2 * (self.w_y ** 2 + self.w_z ** 2 + self.w_zeta ** 2)

    def __call__(self, t, s, y, z, zeta):
        y, z, zeta = np.atleast_2d(y), np.atleast_2d(z), np.atleast_2d(zeta)
        argument = (
            self.w_y * y
            + self.w_z * z
            + self.w_zeta * zeta
            + self.phase
            + self.time_coupling * (np.asarray(t, dtype=float) + np.asarray(s, dtype=float))
        )
        return self.amplitude * np.sin(argument)


class CoefficientFactory:
    """Factory for named generators."""

    _coefficients: Dict[str, Type[Coefficient]] = {
        "zero": ZeroCoefficient,
        "constant": ConstantCoefficient,
        "affine": AffineCoefficient,
        "trig": TrigCoefficient,
    }

    @classmethod
    def create(cls, name: str, dim: int = 1, **params) -> Coefficient:
        """
        Create a generator instance.

        Args:
            name: Registry name ('zero', 'constant', 'affine', 'trig')
            dim: State dimension k
            **params: Constructor parameters of the generator

        Returns:
            Coefficient instance

        Raises:
            ConfigurationError: If the name is unknown or the parameters do not fit
        """
        coefficient_class = cls._coefficients.get(name)
        if not coefficient_class:
            raise ConfigurationError(
                f"Unknown coefficient '{name}' in the coefficient registry; known: {sorted(cls._coefficients)}"
            )
        try:
            return coefficient_class(dim=dim, **params)
        except TypeError as e:
            raise ConfigurationError(f"Invalid parameters for coefficient '{name}': {e}")

    @classmethod
    def register(cls, name: str, coefficient_class: Type[Coefficient]) -> None:
        cls._coefficients[name] = coefficient_class

    @classmethod
    def names(cls) -> list:
        return sorted(cls._coefficients)


class TerminalFunctional(ABC):
    """psi(t_k) as a function of the W-path, one field per node."""

    name = "abstract"

    def __init__(self, dim: int = 1):
        self.dim = dim

    @abstractmethod
    def at(self, noise: NoiseModel, k: int) -> RandomField:
        ...

    def _tile(self, field: RandomField) -> RandomField:
        if field.dim == self.dim:
            return field
        return RandomField(np.repeat(field.values, self.dim, axis=1), field.level)

    def build(self, noise: NoiseModel) -> TerminalField:
        return TerminalField(tuple(self._tile(self.at(noise, k)) for k in range(noise.n + 1)))

    @property
    def is_constant_in_time(self) -> bool:
        return False


class WienerTerminal(TerminalFunctional):
    """offset + scale * W_T, the same for every t."""

    name = "wiener_terminal"

    def __init__(self, dim: int = 1, scale: float = 1.0, offset: float = 0.0):
        super().__init__(dim)
        self.scale = float(scale)
        self.offset = float(offset)

    @property
    def is_constant_in_time(self) -> bool:
        return True

    def at(self, noise, k):
        return noise.wiener(noise.n) * self.scale + self.offset


class PolyTimeTerminal(TerminalFunctional):
    """sum_j coefficients[j] t^j + wiener_weight * W_T."""

    name = "poly_t"

    def __init__(self, dim: int = 1, coefficients: Sequence[float] = (0.0,), wiener_weight: float = 0.0):
        super().__init__(dim)
        self.coefficients = np.polynomial.Polynomial(np.asarray(coefficients, dtype=float))
        self.wiener_weight = float(wiener_weight)

    @property
    def is_constant_in_time(self) -> bool:
        return self.coefficients.degree() == 0

    def at(self, noise, k):
        return noise.wiener(noise.n) * self.wiener_weight + float(self.coefficients(noise.grid.t(k)))


class SinWienerTerminal(TerminalFunctional):
    """amplitude * sin(frequency * W_T + time_shift * t)."""

    name = "sin_wiener"

    def __init__(self, dim: int = 1, amplitude: float = 1.0, frequency: float = 1.0, time_shift: float = 0.0):
        super().__init__(dim)
        self.amplitude = float(amplitude)
        self.frequency = float(frequency)
        self.time_shift = float(time_shift)

    @property
    def is_constant_in_time(self) -> bool:
        return self.time_shift == 0.0

    def at(self, noise, k):
        shift = self.time_shift * noise.grid.t(k)
        return noise.wiener(noise.n).apply(lambda v: self.amplitude * np.sin(self.frequency * v + shift))


class WienerAdaptedTerminal(TerminalFunctional):
    """offset + time_weight * t + scale * W_t, measurable with respect to the W-history up to t."""

    name = "wiener_adapted"

    def __init__(self, dim: int = 1, offset: float = 0.0, scale: float = 1.0, time_weight: float = 0.0):
        super().__init__(dim)
        self.offset = float(offset)
        self.scale = float(scale)
        self.time_weight = float(time_weight)

    def at(self, noise, k):
        return noise.wiener(k) * self.scale + (self.offset + self.time_weight * noise.grid.t(k))


class TerminalFactory:
    """Factory for named terminal functionals."""

    _terminals: Dict[str, Type[TerminalFunctional]] = {
        "zero": WienerTerminal,
        "wiener_terminal": WienerTerminal,
        "poly_t": PolyTimeTerminal,
        "sin_wiener": SinWienerTerminal,
        "wiener_adapted": WienerAdaptedTerminal,
    }

    @classmethod
    def create(cls, name: str, dim: int = 1, **params) -> TerminalFunctional:
        """
        Create a terminal functional.

        Raises:
            ConfigurationError: If the name is unknown or the parameters do not fit
        """
        terminal_class = cls._terminals.get(name)
        if not terminal_class:
            raise ConfigurationError(
                f"Unknown terminal '{name}' in the psi registry; known: {sorted(cls._terminals)}"
            )
        if name == "zero":
            params = {"scale": 0.0, "offset": 0.0}
        try:
            return terminal_class(dim=dim, **params)
        except TypeError as e:
            raise ConfigurationError(f"Invalid parameters for terminal '{name}': {e}")

    @classmethod
    def register(cls, name: str, terminal_class: Type[TerminalFunctional]) -> None:
        cls._terminals[name] = terminal_class

    @classmethod
    def names(cls) -> list:
        return sorted(cls._terminals)
