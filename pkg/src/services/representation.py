"""
Martingale representation on the scenario tree.

Every integrand is read off as a conditional covariance with the increment,
(1/dt) E[F * Delta | level], which is exact on a binary tree.
"""
import itertools
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.config import settings
from src.models.fields import AlgebraLevel, IntervalProcess, NoiseModel, Orientation, RandomField
from src.services.probability_core import cond_expect, expect, make_noise, measurability_check, second_moment
from src.services.stochastic_integrals import backward_integral, forward_integral, integral
from src.utils.exceptions import MeasurabilityError, StructuralInputError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RepResult:
    """F = mean + integral of ``integrand`` over ``span``."""

    mean: np.ndarray
    integrand: IntervalProcess
    span: range
    reconstruction_error: float = 0.0


def _require_level(F: RandomField, level: AlgebraLevel, what: str) -> None:
    ok, deviation = measurability_check(F, level)
    if not ok:
        raise MeasurabilityError(f"{what} requires a field measurable at {level}, deviation {deviation:.3e}")


def forward_rep(noise: NoiseModel, F: RandomField) -> RepResult:
    """
    Forward representation of a W-path functional.

    Args:
        noise: Tree F lives on
        F: Field measurable with respect to the W-path (level (N, N))

    Returns:
        RepResult with h_i = (1/dt) E[F Delta W_i | F^W_{t_i}]

    Raises:
        MeasurabilityError: If F depends on any eta coordinate
    """
    n, dt = noise.n, noise.dt
    _require_level(F, AlgebraLevel.wiener(n, n), "forward_rep")
    entries = tuple(
        cond_expect(F * noise.wiener_increment(i), AlgebraLevel.wiener(i, n)) / dt for i in range(n)
    )
    h = IntervalProcess(entries, Orientation.FORWARD)
    mean = expect(F)
    error = (F - (forward_integral(noise, h) + mean)).max_abs()
    return RepResult(mean=mean, integrand=h, span=range(n), reconstruction_error=error)


def backward_rep(noise: NoiseModel, F: RandomField) -> RepResult:
    """
    Backward representation F = E[F] + sum f_i Delta B_i of a B-path functional.

    f_i = (1/dt) E[F Delta B_i | F^B_{t_{i+1},T}] is measurable at level (0, i+1).

    Raises:
        MeasurabilityError: If F depends on any eps coordinate
    """
    n, dt = noise.n, noise.dt
    _require_level(F, AlgebraLevel.brownian(0, n), "backward_rep")
    entries = tuple(
        cond_expect(F * noise.brownian_increment(i), AlgebraLevel.brownian(i + 1, n)) / dt for i in range(n)
    )
    f = IntervalProcess(entries, Orientation.BACKWARD)
    mean = expect(F)
    error = (F - (backward_integral(noise, f) + mean)).max_abs()
    return RepResult(mean=mean, integrand=f, span=range(n), reconstruction_error=error)


def backward_mart_rep(noise: NoiseModel, F: RandomField) -> Tuple[List[RandomField], RepResult]:
    """
    Backward martingale M(t_i) = E[F | F^B_{t_i,T}] for i = 0..N with its integrand.

    M(t_i) = E[F] + sum_{j >= i} f_j Delta B_j holds for every i.
    """
    rep = backward_rep(noise, F)
    path = [cond_expect(F, AlgebraLevel.brownian(i, noise.n)) for i in range(noise.n + 1)]
    return path, rep


@dataclass(frozen=True)
class MixedRow:
    """Row k of the mixed representation F = Y_k + sum_{i>=k} Z(k,i) Delta W_i."""

    k: int
    y: RandomField
    z: Dict[int, RandomField]
    reconstruction_error: float


def mixed_rep(noise: NoiseModel, F: RandomField, k: int, tol: Optional[float] = None) -> MixedRow:
    """
    Split F into its F_{t_k} part and forward integrands over [t_k, T].

    Integrands are extracted conditionally on sigma(eps_1..eps_i, eta_{k+1}..eta_N),
    which is finer than F_{t_i}; admissible F yield integrands that are nevertheless
    F_{t_i}-measurable.

    Args:
        noise: Tree F lives on
        F: Field of the form produced by assembling a frozen Volterra right-hand side
        k: Row (time index) of the split
        tol: Tolerance for the reconstruction and measurability checks

    Returns:
        MixedRow with Y_k at level (k, k) and Z(k, i) at level (i, i) for i >= k

    Raises:
        StructuralInputError: If an integrand is not F_{t_i}-measurable or the
            reconstruction misses F
    """
    tol = settings.structural_tol if tol is None else tol
    n, dt = noise.n, noise.dt
    y = cond_expect(F, AlgebraLevel.filtration(k, n))
    z: Dict[int, RandomField] = {}
    rebuilt = y
    for i in range(k, n):
        increment = noise.wiener_increment(i)
        fine = cond_expect(F * increment, AlgebraLevel(i, k, n)) / dt
        ok, deviation = measurability_check(fine, AlgebraLevel.filtration(i, n), tol)
        if not ok:
            raise StructuralInputError(
                f"Row {k}: integrand on interval {i} is not F_t{i}-measurable (deviation {deviation:.3e})"
            )
        z[i] = cond_expect(fine, AlgebraLevel.filtration(i, n))
        rebuilt = rebuilt + z[i] * increment

    error = (F - rebuilt).max_abs()
    if error > tol:
        raise StructuralInputError(f"Row {k}: mixed representation misses the field by {error:.3e}")
    return MixedRow(k=k, y=y, z=z, reconstruction_error=error)


def uniqueness_check(noise: NoiseModel, rep: RepResult, perturbation: IntervalProcess) -> float:
    """
    E|integral(h + delta) - integral(h)|^2 for an orientation-respecting perturbation.

    Positive whenever the perturbation is nonzero, so no second integrand reproduces F.
    """
    perturbed = rep.integrand + perturbation
    diff = integral(noise, perturbed) - integral(noise, rep.integrand)
    return second_moment(diff)


@dataclass
class ExponentialReport:
    steps: List[int]
    deviations: List[float]
    ratios: List[float]


def exponential_martingale(noise: NoiseModel, h: Union[float, Sequence[float]], i: int) -> RandomField:
    """exp(sum_{j>=i} h_j Delta B_j - 1/2 sum_{j>=i} h_j^2 dt), measurable at level (0, i)."""
    rates = _rates(noise, h)
    exponent = noise.zero()
    for j in range(i, noise.n):
        exponent = exponent + noise.brownian_increment(j) * rates[j]
    drift = 0.5 * float(np.sum(rates[i:] ** 2)) * noise.dt
    return exponent.apply(lambda v: np.exp(v - drift))


def _rates(noise: NoiseModel, h: Union[float, Sequence[float]]) -> np.ndarray:
    rates = np.broadcast_to(np.asarray(h, dtype=float), (noise.n,))
    return np.array(rates)


def exponential_deviation(noise: NoiseModel, h: Union[float, Sequence[float]] = 1.0) -> float:
    """
    Relative sup deviation of the backward integrand of the exponential from h_i Y_{t_{i+1}}.

    Y_{t_{i+1}} is the exponential backward martingale over [t_{i+1}, T]; the
    extracted integrand agrees with h_i Y_{t_{i+1}} only to first order in dt.
    """
    rates = _rates(noise, h)
    rep = backward_rep(noise, exponential_martingale(noise, rates, 0))
    worst = 0.0
    for i in range(noise.n):
        target = exponential_martingale(noise, rates, i + 1) * rates[i]
        if target.max_abs() == 0.0:
            worst = max(worst, rep.integrand[i].max_abs())
            continue
        relative = (rep.integrand[i].lift(target.level).values - target.values) / target.values
        worst = max(worst, float(np.max(np.abs(relative))))
    return worst


def exponential_martingale_check(
    horizon: float, steps: Sequence[int], h: float = 1.0, guard: Optional[int] = None
) -> ExponentialReport:
    """Deviation per tree depth and the ratio between consecutive depths."""
    deviations = [exponential_deviation(make_noise(horizon, n, guard), h) for n in steps]
    ratios = [a / b if b > 0 else math.inf for a, b in zip(deviations, deviations[1:])]
    logger.info(f"Exponential martingale deviations {deviations}, ratios {ratios}")
    return ExponentialReport(steps=list(steps), deviations=deviations, ratios=ratios)


def exponential_span_check(
    noise: NoiseModel, F: RandomField, pieces: Optional[int] = None, levels: Sequence[float] = (0.0, 1.0)
) -> float:
    """
    L2 distance from a B-path functional to the span of discrete exponentials.

    The rates h are piecewise constant on ``pieces`` equal blocks of intervals with
    values drawn from ``levels``. With one piece per interval and two distinct
    levels the span is the whole space of B-path functionals.

    Returns:
        sqrt(E|F - projection|^2)
    """
    n = noise.n
    pieces = n if pieces is None else pieces
    level = AlgebraLevel.brownian(0, n)
    _require_level(F, level, "exponential_span_check")
    blocks = np.array_split(np.arange(n), pieces)
    columns = []
    for choice in itertools.product(levels, repeat=pieces):
        rates = np.zeros(n)
        for block, value in zip(blocks, choice):
            rates[block] = value
        columns.append(exponential_martingale(noise, rates, 0).lift(level).values[:, 0])
    basis = np.column_stack(columns)
    target = cond_expect(F, level).values
    coeffs, *_ = np.linalg.lstsq(basis, target, rcond=None)
    residual = target - basis @ coeffs
    return float(math.sqrt(np.mean(np.sum(residual ** 2, axis=1))))
