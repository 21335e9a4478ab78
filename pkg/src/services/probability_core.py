"""
Exact expectation and conditional expectation on the two-noise binary tree.

Coordinates are independent and uniform, so projecting onto a level is averaging
over the coordinates the level does not contain.
"""
import logging
from typing import Callable, Optional, Tuple

import numpy as np

from src.config import settings
from src.models.fields import AlgebraLevel, NoiseModel, RandomField, TimeGrid
from src.utils.validators import ensure_grid_params

logger = logging.getLogger(__name__)


def make_grid(horizon: float, steps: int, guard: Optional[int] = None) -> TimeGrid:
    """
    Build the uniform time grid.

    Args:
        horizon: Terminal time T > 0
        steps: Number of intervals N, at most the memory guard
        guard: Memory guard override (defaults to ``settings.memory_guard``)

    Returns:
        TimeGrid with dt = T / N

    Raises:
        ConfigurationError: If T or N is non-positive or N exceeds the guard
    """
    ensure_grid_params(horizon, steps, settings.memory_guard if guard is None else guard)
    return TimeGrid(horizon=float(horizon), steps=int(steps))


def make_noise(horizon: float, steps: int, guard: Optional[int] = None) -> NoiseModel:
    """Grid plus the exhaustive (W, B) tree over it."""
    return NoiseModel(make_grid(horizon, steps, guard))


def expect(f: RandomField) -> np.ndarray:
    """Uniform average over the atoms of the field's level, one entry per component."""
    return f.values.mean(axis=0)


def _average_down(f: RandomField, level: AlgebraLevel) -> RandomField:
    """Average out the coordinates of ``f.level`` that ``level`` (a sub-level) lacks."""
    src = f.level
    eps_axes = tuple(range(level.a, src.a))
    eta_axes = tuple(src.a + j for j in range(level.b - src.b))
    axes = eps_axes + eta_axes
    if not axes:
        return f
    return RandomField.from_tensor(f.tensor().mean(axis=axes), level)


def cond_expect(f: RandomField, target: AlgebraLevel) -> RandomField:
    """
    Conditional expectation of ``f`` given the sub-algebra ``target``.

    Args:
        f: Field to project
        target: Level to condition on

    Returns:
        Field declared at ``target``
    """
    meet = f.level.meet(target)
    return _average_down(f, meet).lift(target)


def measurability_check(
    f: RandomField, claimed: AlgebraLevel, tol: Optional[float] = None
) -> Tuple[bool, float]:
    """
    Check that ``f`` is measurable with respect to ``claimed``.

    Returns:
        Tuple of (is_measurable, max deviation between f and its projection)
    """
    tol = settings.measurability_tol if tol is None else tol
    if claimed.contains(f.level):
        return True, 0.0
    join = f.level.join(claimed)
    deviation = (f.lift(join) - cond_expect(f, claimed).lift(join)).max_abs()
    return deviation <= tol, deviation


def pointwise(fn: Callable[..., np.ndarray], *fields: RandomField) -> RandomField:
    """Evaluate a deterministic map atomwise on fields lifted to their common level."""
    level = fields[0].level
    for f in fields[1:]:
        level = level.join(f.level)
    arrays = [f.lift(level).values for f in fields]
    result = np.asarray(fn(*arrays), dtype=float)
    if result.ndim == 1:
        result = result[:, None]
    if result.shape[0] != level.size:
        result = np.broadcast_to(result, (level.size, result.shape[-1]))
    return RandomField(result, level)


def second_moment(f: RandomField) -> float:
    """E|f|^2 summed over components."""
    return float(np.mean(np.sum(f.values ** 2, axis=1)))


def max_difference(f: RandomField, g: RandomField) -> float:
    """Sup over atoms of |f - g|."""
    return (f - g).max_abs()
