"""
Backward recursion for the discrete BDSDE on the scenario tree.

The scheme is implicit in Y through f, explicit in Z, and takes the g-term at
the right node with (Y_{i+1}, Z_{i+1}); Z_N is 0.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from src.config import settings
from src.models.fields import AlgebraLevel, NoiseModel, RandomField
from src.models.solutions import BDSDECoefficients, BDSDESolution
from src.services.probability_core import cond_expect, measurability_check, pointwise, second_moment
from src.utils.exceptions import ConvergenceError, MeasurabilityError
from src.utils.validators import ensure_step_size

logger = logging.getLogger(__name__)

RATIO_FLOOR = 1e-8


def _evaluate(fn, s: float, y: RandomField, z: RandomField) -> RandomField:
    return pointwise(lambda yv, zv: fn(s, yv, zv), y, z)


def solve_bdsde(
    noise: NoiseModel,
    coeffs: BDSDECoefficients,
    inner_tol: Optional[float] = None,
    inner_max: Optional[int] = None,
    start: int = 0,
) -> BDSDESolution:
    """
    Solve the discrete BDSDE backward from t_N down to t_start.

    Args:
        noise: Tree and grid
        coeffs: Terminal value, generators and declared constants
        inner_tol: Tolerance of the implicit fixed point in Y
        inner_max: Iteration cap of the implicit fixed point
        start: First node of the solution; earlier entries are left empty

    Returns:
        BDSDESolution with Y_i, Z_i at level (i, i) and residual diagnostics

    Raises:
        StepSizeError: If c * dt >= 1
        MeasurabilityError: If the terminal value depends on B
        ConvergenceError: If the fixed point misses inner_tol after inner_max sweeps
    """
    inner_tol = settings.inner_tol if inner_tol is None else inner_tol
    inner_max = settings.inner_max if inner_max is None else inner_max
    n, dt = noise.n, noise.dt
    grid = noise.grid
    ensure_step_size(coeffs.c, dt)

    terminal_level = AlgebraLevel.filtration(n, n)
    ok, deviation = measurability_check(coeffs.terminal, terminal_level)
    if not ok:
        raise MeasurabilityError(f"Terminal value must be a W-path functional (deviation {deviation:.3e})")

    dim = coeffs.terminal.dim
    y: List[Optional[RandomField]] = [None] * (n + 1)
    z: List[Optional[RandomField]] = [None] * n
    y[n] = cond_expect(coeffs.terminal, terminal_level)
    z_next = noise.zero(dim)
    solution = BDSDESolution(y=y, z=z, start=start)

    for i in range(n - 1, start - 1, -1):
        level = AlgebraLevel.filtration(i, n)
        g_val = _evaluate(coeffs.noise_coeff, grid.t(i + 1), y[i + 1], z_next)
        x = y[i + 1] + g_val * noise.brownian_increment(i)
        z[i] = cond_expect(x * noise.wiener_increment(i), level) / dt
        base = cond_expect(x, level)

        current = base
        previous_diff = None
        for sweep in range(1, inner_max + 1):
            candidate = base + _evaluate(coeffs.driver, grid.t(i), current, z[i]) * dt
            diff = (candidate - current).max_abs()
            if previous_diff is not None and previous_diff > RATIO_FLOOR:
                solution.inner_ratios.append(diff / previous_diff)
            current, previous_diff = candidate, diff
            if diff <= inner_tol:
                break
        else:
            raise ConvergenceError(
                f"Implicit step at node {i} did not converge in {inner_max} sweeps (last change {previous_diff:.3e})"
            )
        y[i] = current
        solution.inner_iterations.append(sweep)
        z_next = z[i]
        logger.debug(f"BDSDE node {i}: {sweep} inner sweeps")

    solution.residual_max, solution.residual_l2 = bdsde_residual(noise, solution, coeffs)
    logger.info(
        f"Solved BDSDE on N={n} from node {start}: residual max {solution.residual_max:.3e}, "
        f"max inner sweeps {max(solution.inner_iterations, default=0)}"
    )
    return solution


@dataclass(frozen=True)
class ResidualReport:
    max_abs: float
    weighted_l2: float
    per_node: List[float]


def bdsde_residual_report(noise: NoiseModel, sol: BDSDESolution, coeffs: BDSDECoefficients) -> ResidualReport:
    """
    Defect of Y_i = xi + sum f dt + sum g Delta B - sum Z Delta W per node.

    The sums run over j >= i with f at (t_j, Y_j, Z_j) and g at (t_{j+1}, Y_{j+1}, Z_{j+1}).
    """
    n, dt = noise.n, noise.dt
    grid = noise.grid
    dim = coeffs.terminal.dim
    accumulated = coeffs.terminal
    z_next = noise.zero(dim)
    per_node: List[float] = []
    weighted = 0.0
    for j in range(n - 1, sol.start - 1, -1):
        y_j, z_j, y_next = sol.y[j], sol.z[j], sol.y[j + 1]
        accumulated = (
            accumulated
            + _evaluate(coeffs.driver, grid.t(j), y_j, z_j) * dt
            + _evaluate(coeffs.noise_coeff, grid.t(j + 1), y_next, z_next) * noise.brownian_increment(j)
            - z_j * noise.wiener_increment(j)
        )
        defect = y_j - accumulated
        per_node.append(defect.max_abs())
        weighted += second_moment(defect) * dt
        z_next = z_j
    per_node.reverse()
    return ResidualReport(max_abs=max(per_node, default=0.0), weighted_l2=math.sqrt(weighted), per_node=per_node)


def bdsde_residual(noise: NoiseModel, sol: BDSDESolution, coeffs: BDSDECoefficients):
    """(max abs defect, weighted L2 defect) of the discrete BDSDE identity."""
    report = bdsde_residual_report(noise, sol, coeffs)
    return report.max_abs, report.weighted_l2


def y0_mean(sol: BDSDESolution) -> np.ndarray:
    """E[Y(t_start)], one entry per component."""
    return sol.y[sol.start].values.mean(axis=0)
