"""
Coefficient bundles and solution containers for the BDSDE and BDSVIE solvers.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Protocol, Tuple

import numpy as np

from src.models.fields import RandomField, TwoParamField


class Generator(Protocol):
    """Vectorized map (t, s, y, z, zeta) -> R^k over rows of atoms."""

    depends_on_zeta: bool
    depends_on_z: bool
    depends_on_time: bool
    lipschitz_constant: float

    def __call__(self, t, s, y: np.ndarray, z: np.ndarray, zeta: np.ndarray) -> np.ndarray:
        ...


BDSDEMap = Callable[[float, np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class BDSDECoefficients:
    """
    Terminal value and generators of a BDSDE.

    ``c`` bounds f in (y, z) and the y-part of g; ``alpha`` bounds the z-part of g.
    """

    terminal: RandomField
    driver: BDSDEMap
    noise_coeff: BDSDEMap
    c: float
    alpha: float = 0.0

    @classmethod
    def frozen(
        cls, terminal: RandomField, f: Generator, g: Generator, t: float, c: float, alpha: float
    ) -> "BDSDECoefficients":
        """BDSDE obtained from Volterra generators by freezing the first time argument at t."""

        def driver(s, y, z):
            return f(t, s, y, z, np.zeros_like(z))

        def noise_coeff(s, y, z):
            return g(t, s, y, z, np.zeros_like(z))

        return cls(terminal=terminal, driver=driver, noise_coeff=noise_coeff, c=c, alpha=alpha)


@dataclass
class BDSDESolution:
    """Y per node i (level (i, i)) and Z per interval i (level (i, i)); entries before ``start`` are None."""

    y: List[Optional[RandomField]]
    z: List[Optional[RandomField]]
    start: int = 0
    inner_iterations: List[int] = field(default_factory=list)
    inner_ratios: List[float] = field(default_factory=list)
    residual_max: Optional[float] = None
    residual_l2: Optional[float] = None


@dataclass(frozen=True)
class TerminalField:
    """psi(t_k) for k = 0..N, each a function of the W-path."""

    values: Tuple[RandomField, ...]

    def __getitem__(self, k: int) -> RandomField:
        return self.values[k]

    def __len__(self) -> int:
        return len(self.values)


class Variant(str, Enum):
    SIMPLE = "simple"
    FULL = "full"


class CompletionMode(str, Enum):
    SM = "SM"
    M = "M"
    S = "S"


@dataclass(frozen=True)
class VolterraCoefficients:
    """Generators f and g of the Volterra equation with their declared constants."""

    f: Generator
    g: Generator
    c: float
    alpha: float
    variant: Variant = Variant.SIMPLE

    @property
    def depends_on_zeta(self) -> bool:
        return bool(self.f.depends_on_zeta or self.g.depends_on_zeta)


@dataclass(frozen=True)
class SolverConfig:
    """Picard settings; ``beta`` is a positive number or "auto"."""

    beta: object = "auto"
    picard_tol: float = 1e-10
    picard_max: int = 200
    completion_mode: CompletionMode = CompletionMode.SM
    inner_tol: float = 1e-12


@dataclass(frozen=True)
class FrozenState:
    """Iterate (y, z) of the Picard map; z covers the whole square once completed."""

    y: Tuple[RandomField, ...]
    z: TwoParamField


@dataclass
class Completion:
    """Representation halves X1, X2 and the resulting Z on Delta^c."""

    x1: TwoParamField
    x2: TwoParamField
    z_off: TwoParamField


@dataclass
class SMSolution:
    """Solution pair with its completion halves and solver diagnostics."""

    y: Tuple[RandomField, ...]
    z: TwoParamField
    x1: TwoParamField
    x2: TwoParamField
    beta: float
    iterations: int = 0
    differences: List[float] = field(default_factory=list)
    ratios: List[float] = field(default_factory=list)
    residual_max: Optional[float] = None
    residual_l2: Optional[float] = None
