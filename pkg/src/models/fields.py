"""
Domain types for the two-noise binary scenario tree.

Atoms are sign vectors (eps_1..eps_N, eta_1..eta_N) with uniform weight 4^-N.
A field declared at level (a, b) stores one value per atom of
sigma(eps_1..eps_a, eta_{b+1}..eta_N), laid out as a flat array whose row index
is the bit pattern (eps_1, .., eps_a, eta_{b+1}, .., eta_N) in C order, bit 0
meaning sign -1.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Iterator, Optional, Tuple, Union

import numpy as np

from src.utils.exceptions import ConfigurationError, MeasurabilityError

Scalar = Union[int, float]


@dataclass(frozen=True)
class TimeGrid:
    """Uniform partition t_i = i * dt of [0, T]."""

    horizon: float
    steps: int

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.steps + 1) * self.dt

    def t(self, i: int) -> float:
        """Time of node i."""
        return i * self.dt


@dataclass(frozen=True)
class AlgebraLevel:
    """
    Descriptor of sigma(eps_1..eps_a, eta_{b+1}..eta_N).

    F_{t_i} is (i, i), F^W_{t_i} is (i, N) and F^B_{t_i,T} is (0, i).
    """

    a: int
    b: int
    n: int

    def __post_init__(self):
        if not (0 <= self.a <= self.n and 0 <= self.b <= self.n):
            raise ConfigurationError(f"Invalid algebra level (a={self.a}, b={self.b}) for N={self.n}")

    @classmethod
    def filtration(cls, i: int, n: int) -> "AlgebraLevel":
        return cls(i, i, n)

    @classmethod
    def wiener(cls, i: int, n: int) -> "AlgebraLevel":
        return cls(i, n, n)

    @classmethod
    def brownian(cls, i: int, n: int) -> "AlgebraLevel":
        return cls(0, i, n)

    @classmethod
    def full(cls, n: int) -> "AlgebraLevel":
        return cls(n, 0, n)

    @classmethod
    def trivial(cls, n: int) -> "AlgebraLevel":
        return cls(0, n, n)

    @property
    def n_coords(self) -> int:
        return self.a + self.n - self.b

    @property
    def size(self) -> int:
        return 2 ** self.n_coords

    def shape(self, dim: int) -> Tuple[int, ...]:
        return (2,) * self.n_coords + (dim,)

    def contains(self, other: "AlgebraLevel") -> bool:
        """True when sigma(other) is a sub-algebra of sigma(self)."""
        return other.a <= self.a and other.b >= self.b

    def join(self, other: "AlgebraLevel") -> "AlgebraLevel":
        return AlgebraLevel(max(self.a, other.a), min(self.b, other.b), self.n)

    def meet(self, other: "AlgebraLevel") -> "AlgebraLevel":
        return AlgebraLevel(min(self.a, other.a), max(self.b, other.b), self.n)

    def __str__(self) -> str:
        return f"({self.a},{self.b})"


@dataclass(frozen=True, eq=False)
class RandomField:
    """Real or R^k valued function on the atoms of its declared level."""

    values: np.ndarray
    level: AlgebraLevel

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[0] != self.level.size:
            raise ConfigurationError(
                f"Field of shape {values.shape} does not match level {self.level} "
                f"with {self.level.size} atoms"
            )
        if not np.all(np.isfinite(values)):
            raise ConfigurationError("Field values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def n(self) -> int:
        return self.level.n

    def tensor(self) -> np.ndarray:
        """One axis per coordinate of the level, last axis the component."""
        return self.values.reshape(self.level.shape(self.dim))

    @classmethod
    def from_tensor(cls, tensor: np.ndarray, level: AlgebraLevel) -> "RandomField":
        dim = tensor.shape[-1]
        return cls(np.ascontiguousarray(tensor).reshape(level.size, dim), level)

    @classmethod
    def constant(cls, value, n: int, level: Optional[AlgebraLevel] = None) -> "RandomField":
        vector = np.atleast_1d(np.asarray(value, dtype=float))
        level = level or AlgebraLevel.trivial(n)
        return cls(np.tile(vector, (level.size, 1)), level)

    def lift(self, level: AlgebraLevel) -> "RandomField":
        """Re-express the field on a finer level by broadcasting."""
        if level == self.level:
            return self
        if not level.contains(self.level):
            raise MeasurabilityError(f"Cannot lift a field at level {self.level} to {level}")
        src = self.level
        shape = (
            (2,) * src.a
            + (1,) * (level.a - src.a)
            + (1,) * (src.b - level.b)
            + (2,) * (src.n - src.b)
            + (self.dim,)
        )
        target = np.broadcast_to(self.values.reshape(shape), level.shape(self.dim))
        return RandomField.from_tensor(target, level)

    def apply(self, fn: Callable[[np.ndarray], np.ndarray]) -> "RandomField":
        """Pointwise map over atoms; fn receives the (atoms, k) value array."""
        return RandomField(fn(self.values), self.level)

    def norm_sq(self) -> "RandomField":
        """Atomwise squared Euclidean norm."""
        return RandomField(np.sum(self.values ** 2, axis=1), self.level)

    def _binary(self, other, op) -> "RandomField":
        if isinstance(other, RandomField):
            level = self.level.join(other.level)
            return RandomField(op(self.lift(level).values, other.lift(level).values), level)
        return RandomField(op(self.values, np.asarray(other, dtype=float)), self.level)

    def __add__(self, other) -> "RandomField":
        return self._binary(other, np.add)

    __radd__ = __add__

    def __sub__(self, other) -> "RandomField":
        return self._binary(other, np.subtract)

    def __rsub__(self, other) -> "RandomField":
        return (-self) + other

    def __mul__(self, other) -> "RandomField":
        return self._binary(other, np.multiply)

    __rmul__ = __mul__

    def __truediv__(self, other: Scalar) -> "RandomField":
        return RandomField(self.values / other, self.level)

    def __neg__(self) -> "RandomField":
        return RandomField(-self.values, self.level)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def __repr__(self) -> str:
        return f"RandomField(level={self.level}, dim={self.dim})"


@dataclass(frozen=True)
class NoiseModel:
    """Exhaustive Rademacher tree for the pair (W, B) on a time grid."""

    grid: TimeGrid

    @property
    def n(self) -> int:
        return self.grid.steps

    @property
    def dt(self) -> float:
        return self.grid.dt

    @property
    def increment_scale(self) -> float:
        return float(np.sqrt(self.grid.dt))

    @property
    def atom_weight(self) -> float:
        return 4.0 ** (-self.n)

    def _sign_sum(self, level: AlgebraLevel, eps: range, eta: range) -> RandomField:
        tensor = np.zeros((2,) * level.n_coords)
        signs = np.array([-1.0, 1.0])
        for j in eps:
            axis_shape = [1] * level.n_coords
            axis_shape[j - 1] = 2
            tensor = tensor + signs.reshape(axis_shape)
        for j in eta:
            axis_shape = [1] * level.n_coords
            axis_shape[level.a + j - level.b - 1] = 2
            tensor = tensor + signs.reshape(axis_shape)
        return RandomField.from_tensor(self.increment_scale * tensor[..., None], level)

    def wiener(self, i: int) -> RandomField:
        """W_{t_i}, measurable at (i, N)."""
        return self._sign_sum(AlgebraLevel.wiener(i, self.n), range(1, i + 1), range(0))

    def brownian(self, i: int) -> RandomField:
        """B_{t_i}, measurable at (0, 0)."""
        return self._sign_sum(AlgebraLevel.brownian(0, self.n), range(0), range(1, i + 1))

    def brownian_tail(self, i: int) -> RandomField:
        """B_T - B_{t_i}, measurable at (0, i)."""
        return self._sign_sum(AlgebraLevel.brownian(i, self.n), range(0), range(i + 1, self.n + 1))

    def wiener_increment(self, i: int) -> RandomField:
        """Delta W_i = W_{t_{i+1}} - W_{t_i}, measurable at (i+1, N)."""
        return self._sign_sum(AlgebraLevel.wiener(i + 1, self.n), range(i + 1, i + 2), range(0))

    def brownian_increment(self, i: int) -> RandomField:
        """Delta B_i = B_{t_{i+1}} - B_{t_i}, measurable at (0, i)."""
        return self._sign_sum(AlgebraLevel.brownian(i, self.n), range(0), range(i + 1, i + 2))

    def constant(self, value, dim: Optional[int] = None) -> RandomField:
        vector = np.atleast_1d(np.asarray(value, dtype=float))
        if dim is not None and vector.size == 1:
            vector = np.repeat(vector, dim)
        return RandomField.constant(vector, self.n)

    def zero(self, dim: int = 1) -> RandomField:
        return RandomField.constant(np.zeros(dim), self.n)


class Orientation(str, Enum):
    """Adaptedness side of an interval process."""

    FORWARD = "forward"
    BACKWARD = "backward"


@dataclass(frozen=True)
class IntervalProcess:
    """Per-interval integrands h_0..h_{N-1}; entries before ``start`` are unused."""

    entries: Tuple[Optional[RandomField], ...]
    orientation: Orientation
    start: int = 0

    @property
    def n(self) -> int:
        return len(self.entries)

    def __getitem__(self, i: int) -> RandomField:
        entry = self.entries[i]
        if entry is None:
            raise IndexError(f"Interval {i} is outside the process span starting at {self.start}")
        return entry

    def span(self) -> range:
        return range(self.start, self.n)

    def scaled(self, factor: Scalar) -> "IntervalProcess":
        return IntervalProcess(
            tuple(None if e is None else e * factor for e in self.entries), self.orientation, self.start
        )

    def __add__(self, other: "IntervalProcess") -> "IntervalProcess":
        start = max(self.start, other.start)
        entries = tuple(
            None if i < start else self[i] + other[i] for i in range(self.n)
        )
        return IntervalProcess(entries, self.orientation, start)


Region = str
DELTA: Region = "delta"
DELTA_C: Region = "delta_c"


@dataclass(frozen=True)
class TwoParamField:
    """
    Z(t_k, .) per row k and interval i, both in 0..N-1.

    Entries with i >= k lie in Delta and are claimed F_{t_i}-measurable (level (i, i));
    entries with i < k lie in Delta^c and are claimed measurable at (i, k).
    """

    n: int
    entries: Dict[Tuple[int, int], RandomField] = field(default_factory=dict)

    @staticmethod
    def region(k: int, i: int) -> Region:
        return DELTA if i >= k else DELTA_C

    def claimed_level(self, k: int, i: int) -> AlgebraLevel:
        if i >= k:
            return AlgebraLevel.filtration(i, self.n)
        return AlgebraLevel(i, k, self.n)

    def get(self, k: int, i: int) -> Optional[RandomField]:
        return self.entries.get((k, i))

    def __getitem__(self, key: Tuple[int, int]) -> RandomField:
        return self.entries[key]

    def __contains__(self, key: Tuple[int, int]) -> bool:
        return key in self.entries

    def items(self) -> Iterator[Tuple[Tuple[int, int], RandomField]]:
        return iter(sorted(self.entries.items()))

    def keys_in(self, region: Region) -> list:
        return sorted(key for key in self.entries if self.region(*key) == region)

    def missing(self, region: Optional[Region] = None) -> list:
        keys = [(k, i) for k in range(self.n) for i in range(self.n)]
        if region is not None:
            keys = [key for key in keys if self.region(*key) == region]
        return [key for key in keys if key not in self.entries]

    def is_complete(self) -> bool:
        return not self.missing()

    def restricted(self, region: Region) -> "TwoParamField":
        return TwoParamField(self.n, {key: self.entries[key] for key in self.keys_in(region)})

    def merged(self, other: "TwoParamField") -> "TwoParamField":
        entries = dict(self.entries)
        entries.update(other.entries)
        return TwoParamField(self.n, entries)

    def row(self, k: int) -> Dict[int, RandomField]:
        return {i: f for (r, i), f in self.entries.items() if r == k}
