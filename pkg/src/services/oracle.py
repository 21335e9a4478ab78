"""
Dense linear-system oracles for affine BDSDE and BDSVIE data.

With affine generators the discrete equations are affine in the unknown atom
values. The residual map is evaluated on unit vectors to assemble the matrix, and
the system is solved directly with numpy's least squares (it is consistent and
overdetermined, one equation per full-tree atom).
"""
import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Tuple

import numpy as np

from src.models.fields import AlgebraLevel, NoiseModel, RandomField, TwoParamField
from src.models.solutions import BDSDECoefficients, CompletionMode, FrozenState, TerminalField, VolterraCoefficients
from src.services.bdsvie_solver import assemble_rhs, sm_complete
from src.services.probability_core import cond_expect, pointwise
from src.utils.exceptions import ConfigurationError

logger = logging.getLogger(__name__)

ORACLE_MAX_STEPS = 4


@dataclass(frozen=True)
class Block:
    """One unknown field: its key, level and slice of the stacked vector."""

    key: Tuple[str, int, int]
    level: AlgebraLevel
    start: int
    stop: int


class UnknownLayout:
    """Stacks unknown fields, each at its own level, into one vector."""

    def __init__(self, dim: int):
        self.dim = dim
        self.blocks: Dict[Tuple[str, int, int], Block] = {}
        self.size = 0

    def add(self, key: Tuple[str, int, int], level: AlgebraLevel) -> None:
        length = level.size * self.dim
        self.blocks[key] = Block(key, level, self.size, self.size + length)
        self.size += length

    def field(self, u: np.ndarray, key: Tuple[str, int, int]) -> RandomField:
        block = self.blocks[key]
        return RandomField(u[block.start:block.stop].reshape(block.level.size, self.dim), block.level)


def _solve_affine(residual: Callable[[np.ndarray], np.ndarray], size: int) -> Tuple[np.ndarray, float]:
    """Solve residual(u) = 0 for an affine residual map; returns (u, max remaining defect)."""
    r0 = residual(np.zeros(size))
    matrix = np.empty((r0.size, size))
    unit = np.zeros(size)
    for j in range(size):
        unit[j] = 1.0
        matrix[:, j] = residual(unit) - r0
        unit[j] = 0.0
    u, *_ = np.linalg.lstsq(matrix, -r0, rcond=None)
    defect = float(np.max(np.abs(matrix @ u + r0))) if r0.size else 0.0
    logger.debug(f"Dense oracle: {r0.size} equations, {size} unknowns, defect {defect:.3e}")
    return u, defect


def _require_affine(noise: NoiseModel, *generators) -> None:
    if noise.n > ORACLE_MAX_STEPS:
        raise ConfigurationError(f"Dense oracles are limited to N <= {ORACLE_MAX_STEPS}, got N={noise.n}")
    for generator in generators:
        if not getattr(generator, "is_affine", False):
            raise ConfigurationError("Dense oracles need affine generators")


@dataclass
class OracleSolution:
    y: List[RandomField]
    z: TwoParamField
    defect: float


def solve_bdsde_dense(noise: NoiseModel, coeffs: BDSDECoefficients, f, g) -> OracleSolution:
    """
    Direct solve of the stacked discrete BDSDE.

    Args:
        noise: Tree and grid
        coeffs: The BDSDE whose driver and noise coefficient wrap ``f`` and ``g``
        f, g: The affine registry generators, checked for affinity

    Returns:
        OracleSolution with Y_i, Z_i at level (i, i); Z is stored as row 0 of a TwoParamField
    """
    _require_affine(noise, f, g)
    n, dt = noise.n, noise.dt
    grid = noise.grid
    dim = coeffs.terminal.dim
    full = AlgebraLevel.full(n)
    layout = UnknownLayout(dim)
    for i in range(n):
        layout.add(("y", i, i), AlgebraLevel.filtration(i, n))
        layout.add(("z", i, i), AlgebraLevel.filtration(i, n))
    terminal = cond_expect(coeffs.terminal, AlgebraLevel.filtration(n, n))

    def unpack(u):
        ys = [layout.field(u, ("y", i, i)) for i in range(n)] + [terminal]
        zs = [layout.field(u, ("z", i, i)) for i in range(n)] + [noise.zero(dim)]
        return ys, zs

    def residual(u):
        ys, zs = unpack(u)
        parts = []
        for i in range(n):
            drift = pointwise(lambda y, z: coeffs.driver(grid.t(i), y, z), ys[i], zs[i])
            noise_term = pointwise(lambda y, z: coeffs.noise_coeff(grid.t(i + 1), y, z), ys[i + 1], zs[i + 1])
            defect = (
                ys[i]
                - ys[i + 1]
                - drift * dt
                - noise_term * noise.brownian_increment(i)
                + zs[i] * noise.wiener_increment(i)
            )
            parts.append(defect.lift(full).values.ravel())
        return np.concatenate(parts)

    u, defect = _solve_affine(residual, layout.size)
    ys, zs = unpack(u)
    return OracleSolution(y=ys, z=TwoParamField(n, {(0, i): zs[i] for i in range(n)}), defect=defect)


def solve_bdsvie_dense(
    noise: NoiseModel,
    psi: TerminalField,
    coeffs: VolterraCoefficients,
    mode: CompletionMode = CompletionMode.SM,
) -> OracleSolution:
    """
    Direct solve of the discrete Volterra equation for affine generators.

    Unknowns are Y_k at (k, k) for k < N and Z(k, i) at (i, i) on Delta; Z on
    Delta^c follows from Y through the completion, which is linear in Y.
    """
    _require_affine(noise, coeffs.f, coeffs.g)
    n = noise.n
    dim = psi[0].dim
    full = AlgebraLevel.full(n)
    layout = UnknownLayout(dim)
    for k in range(n):
        layout.add(("y", k, k), AlgebraLevel.filtration(k, n))
        for i in range(k, n):
            layout.add(("z", k, i), AlgebraLevel.filtration(i, n))
    terminal = cond_expect(psi[n], AlgebraLevel.filtration(n, n))

    def unpack(u) -> FrozenState:
        ys = [layout.field(u, ("y", k, k)) for k in range(n)] + [terminal]
        delta = TwoParamField(n, {(k, i): layout.field(u, ("z", k, i)) for k in range(n) for i in range(k, n)})
        completion = sm_complete(noise, ys, delta, mode)
        return FrozenState(y=tuple(ys), z=delta.merged(completion.z_off))

    def residual(u):
        state = unpack(u)
        parts = []
        for k in range(n):
            rhs = assemble_rhs(noise, psi, state, coeffs, k)
            for i in range(k, n):
                rhs = rhs - state.z[(k, i)] * noise.wiener_increment(i)
            parts.append((state.y[k] - rhs).lift(full).values.ravel())
        return np.concatenate(parts)

    u, defect = _solve_affine(residual, layout.size)
    state = unpack(u)
    return OracleSolution(y=list(state.y), z=state.z, defect=defect)


def max_gap(noise: NoiseModel, a_y, a_z: TwoParamField, b_y, b_z: TwoParamField) -> float:
    """Largest atomwise gap on Y (k < N) and on Z over Delta."""
    n = noise.n
    gap = max((a_y[k] - b_y[k]).max_abs() for k in range(n))
    for k in range(n):
        for i in range(k, n):
            gap = max(gap, (a_z[(k, i)] - b_z[(k, i)]).max_abs())
    return gap
