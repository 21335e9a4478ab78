"""
Weighted norms and inequality checks for Volterra solutions.

All weighted sums use left nodes: e^{beta t_i} for interval i and e^{beta t_k} for
row k. With ``normalized`` the weights are multiplied by e^{-beta T}, which keeps
them at most 1 for large beta without changing any ratio.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.models.fields import NoiseModel, RandomField, TwoParamField
from src.models.scenario import EstimateReport
from src.models.solutions import TerminalField, VolterraCoefficients
from src.services.probability_core import pointwise, second_moment
from src.utils.exceptions import IncompleteStateError, PreconditionError

logger = logging.getLogger(__name__)

RowField = Callable[[int, int], RandomField]
ROUNDOFF = 1e-12
FLOOR = 1e-14


def weights(noise: NoiseModel, beta: float, normalized: bool = False) -> np.ndarray:
    """e^{beta t_i} at every node, optionally divided by e^{beta T}."""
    nodes = noise.grid.nodes
    shift = noise.grid.horizon if normalized else 0.0
    return np.exp(beta * (nodes - shift))


def _entry(z: TwoParamField, k: int, i: int) -> RandomField:
    entry = z.get(k, i)
    if entry is None:
        raise IncompleteStateError(f"Z({k},{i}) is missing")
    return entry


def y_mass(noise: NoiseModel, y: Sequence[RandomField], beta: float, normalized: bool = False) -> float:
    """sum_{k<N} e^{beta t_k} E|Y_k|^2 dt."""
    w = weights(noise, beta, normalized)
    return sum(w[k] * second_moment(y[k]) for k in range(noise.n)) * noise.dt


def z_mass_delta(noise: NoiseModel, z: TwoParamField, beta: float, normalized: bool = False) -> float:
    """sum_k sum_{i>=k} e^{beta t_i} E|Z(k,i)|^2 dt^2."""
    w = weights(noise, beta, normalized)
    n, dt = noise.n, noise.dt
    return sum(w[i] * second_moment(_entry(z, k, i)) for k in range(n) for i in range(k, n)) * dt * dt


def z_mass_off(noise: NoiseModel, z: TwoParamField, beta: float, normalized: bool = False) -> float:
    """sum_k sum_{j<k} e^{beta t_j} E|Z(k,j)|^2 dt^2."""
    w = weights(noise, beta, normalized)
    n, dt = noise.n, noise.dt
    return sum(w[j] * second_moment(_entry(z, k, j)) for k in range(n) for j in range(k)) * dt * dt


def m2_norm(
    noise: NoiseModel, y: Sequence[RandomField], z: TwoParamField, beta: float, normalized: bool = False
) -> float:
    """
    Weighted norm of (Y, Z) with Z restricted to Delta.

    Returns:
        sqrt(sum e^{beta t_k} E|Y_k|^2 dt + sum_{i>=k} e^{beta t_i} E|Z(k,i)|^2 dt^2)
    """
    return math.sqrt(y_mass(noise, y, beta, normalized) + z_mass_delta(noise, z, beta, normalized))


def m2_norm_full(
    noise: NoiseModel, y: Sequence[RandomField], z: TwoParamField, beta: float, normalized: bool = False
) -> float:
    """Weighted norm of (Y, Z) over the whole square."""
    return math.sqrt(
        y_mass(noise, y, beta, normalized)
        + z_mass_delta(noise, z, beta, normalized)
        + z_mass_off(noise, z, beta, normalized)
    )


def _report(name: str, lhs: float, rhs: float, slack: float = 1.0, implied: Optional[float] = None) -> EstimateReport:
    passed = lhs <= slack * rhs * (1.0 + ROUNDOFF) + FLOOR
    if implied is None and rhs > 0:
        implied = lhs / rhs
    return EstimateReport(
        name=name, lhs=lhs, rhs=rhs, margin=rhs - lhs, slack=slack, passed=passed, implied=implied
    )


def check_sm_inequality(
    noise: NoiseModel, y: Sequence[RandomField], z: TwoParamField, beta: float
) -> List[EstimateReport]:
    """
    Delta^c mass against the Y mass, and the full norm against the Delta norm.

    For an SM completion the Delta^c mass is at most 4 times the Y mass, and the
    full squared norm at most 5 times the Delta squared norm. Both hold on the
    tree without slack.
    """
    ym = y_mass(noise, y, beta, normalized=True)
    off = z_mass_off(noise, z, beta, normalized=True)
    delta_sq = ym + z_mass_delta(noise, z, beta, normalized=True)
    return [
        _report("sm_off_diagonal_mass", off, 4.0 * ym),
        _report("sm_norm_equivalence", delta_sq + off, 5.0 * delta_sq),
    ]


def lemma_slack(noise: NoiseModel, beta: float) -> float:
    """Multiplicative slack 1 + 2 beta dt for the summation-by-parts lemmas."""
    return 1.0 + 2.0 * beta * noise.dt


def check_weighted_lemmas(
    noise: NoiseModel, f_rows: RowField, g_rows: RowField, beta: float, slack: Optional[float] = None
) -> List[EstimateReport]:
    """
    Weighted tail-sum inequalities for Volterra rows f(k, i) and g(k, i), i >= k.

    - tail_drift: sum_k dt sum_{i>=k} beta e^{beta t_i} E|sum_{j>=i} f dt|^2 dt
      <= (4/beta) sum_k dt sum_{i>=k} e^{beta t_i} E|f|^2 dt
    - drift_sum: sum_k e^{beta t_k} E|sum_{i>=k} f dt|^2 dt
      <= (1/beta) sum_k sum_{i>=k} e^{beta t_i} E|f|^2 dt^2
    - noise_tail: sum_k dt sum_{i>=k} beta e^{beta t_i} sum_{j>=i} E|g|^2 dt dt
      <= sum_k sum_{i>=k} e^{beta t_i} E|g|^2 dt^2

    Returns:
        Three reports checked at slack 1 + 2 beta dt unless ``slack`` is given
    """
    slack = lemma_slack(noise, beta) if slack is None else slack
    n, dt = noise.n, noise.dt
    w = weights(noise, beta, normalized=True)

    tail_lhs = tail_rhs = sum_lhs = sum_rhs = noise_lhs = noise_rhs = 0.0
    for k in range(n):
        f_row = {i: f_rows(k, i) for i in range(k, n)}
        g_energy = {i: second_moment(g_rows(k, i)) for i in range(k, n)}
        f_energy = {i: second_moment(f_row[i]) for i in range(k, n)}

        tail = None
        tail_g = 0.0
        for i in range(n - 1, k - 1, -1):
            term = f_row[i] * dt
            tail = term if tail is None else tail + term
            tail_g += g_energy[i] * dt
            tail_lhs += dt * beta * w[i] * second_moment(tail) * dt
            noise_lhs += dt * beta * w[i] * tail_g * dt
            tail_rhs += dt * w[i] * f_energy[i] * dt
            sum_rhs += w[i] * f_energy[i] * dt * dt
            noise_rhs += w[i] * g_energy[i] * dt * dt
        sum_lhs += w[k] * second_moment(tail) * dt

    return [
        _report("tail_drift", tail_lhs, 4.0 / beta * tail_rhs, slack),
        _report("drift_sum", sum_lhs, sum_rhs / beta, slack),
        _report("noise_tail", noise_lhs, noise_rhs, slack),
    ]


@dataclass
class LinearData:
    """Explicit data psi, f(k, i), g(k, i) of a linear Volterra equation."""

    psi: TerminalField
    f_rows: RowField
    g_rows: RowField


def _row_masses(noise: NoiseModel, rows: RowField, beta: float) -> Tuple[float, float]:
    """(sum e^{beta t_i} E|r|^2 dt^2, sum e^{beta t_k} sum E|r|^2 dt dt) over i >= k."""
    w = weights(noise, beta, normalized=True)
    n, dt = noise.n, noise.dt
    right = left = 0.0
    for k in range(n):
        for i in range(k, n):
            energy = second_moment(rows(k, i))
            right += w[i] * energy * dt * dt
            left += w[k] * energy * dt * dt
    return right, left


def psi_mass(noise: NoiseModel, psi: TerminalField, beta: float, normalized: bool = True) -> float:
    """sum_{k<N} e^{beta t_k} E|psi(t_k)|^2 dt."""
    return y_mass(noise, psi.values, beta, normalized)


def generator_rows(noise: NoiseModel, fn) -> RowField:
    """Rows fn(t_k, t_i, 0, 0, 0) of a generator at the zero argument."""
    zero = noise.zero(getattr(fn, "dim", 1))

    def rows(k: int, i: int) -> RandomField:
        t, s = noise.grid.t(k), noise.grid.t(i)
        return pointwise(lambda v: fn(t, s, v, v, v), zero)

    return rows


def _ensure_residual(residual: Optional[float], threshold: float) -> None:
    if residual is None:
        raise PreconditionError("A-priori checks need the residual of the solved equation")
    if residual > threshold:
        raise PreconditionError(f"Residual {residual:.3e} exceeds {threshold:.1e}; the pair does not solve the equation")


def check_apriori_linear(
    noise: NoiseModel,
    y: Sequence[RandomField],
    z: TwoParamField,
    data: LinearData,
    beta: float,
    residual: Optional[float],
    slack: float = 1.1,
    threshold: float = 1e-8,
) -> EstimateReport:
    """
    Bound on the solution mass of a linear equation by its data.

    lhs = Y mass + Delta Z mass; rhs = 4 psi mass + (10/beta) f mass
    + g mass weighted at the row + g mass weighted at the interval.

    Raises:
        PreconditionError: If the residual exceeds ``threshold``
    """
    _ensure_residual(residual, threshold)
    lhs = y_mass(noise, y, beta, True) + z_mass_delta(noise, z, beta, True)
    f_right, _ = _row_masses(noise, data.f_rows, beta)
    g_right, g_left = _row_masses(noise, data.g_rows, beta)
    rhs = 4.0 * psi_mass(noise, data.psi, beta) + 10.0 / beta * f_right + g_left + g_right
    return _report("apriori_linear", lhs, rhs, slack)


def check_apriori(
    noise: NoiseModel,
    y: Sequence[RandomField],
    z: TwoParamField,
    psi: TerminalField,
    coeffs: VolterraCoefficients,
    beta: float,
    residual: Optional[float],
    slack: float = 1.1,
    threshold: float = 1e-8,
) -> EstimateReport:
    """
    A-priori estimate of a nonlinear solution.

    Simple variant: (1 - 10c/beta - 2 alpha) M^2 <= 4 psi mass + (10/beta) F0 + 2 G0,
    F0 and G0 being the masses of the generators at the zero argument.
    Full variant: reports the implied constant M^2 / (psi mass + F0 + G0) and passes.

    Raises:
        PreconditionError: If the residual exceeds ``threshold``
    """
    _ensure_residual(residual, threshold)
    mass = y_mass(noise, y, beta, True) + z_mass_delta(noise, z, beta, True)
    f0, _ = _row_masses(noise, generator_rows(noise, coeffs.f), beta)
    g0, _ = _row_masses(noise, generator_rows(noise, coeffs.g), beta)
    psi_part = psi_mass(noise, psi, beta)

    if coeffs.variant == "full":
        data_mass = psi_part + f0 + g0
        implied = mass / data_mass if data_mass > 0 else (0.0 if mass == 0 else math.inf)
        return EstimateReport(
            name="apriori_full", lhs=mass, rhs=data_mass, margin=data_mass - mass, slack=1.0, passed=True, implied=implied
        )

    prefactor = 1.0 - 10.0 * coeffs.c / beta - 2.0 * coeffs.alpha
    rhs = 4.0 * psi_part + 10.0 / beta * f0 + 2.0 * g0
    return _report("apriori_simple", prefactor * mass, rhs, slack)


@dataclass
class ContractionReport:
    ratios: List[float] = field(default_factory=list)
    sup_ratio: float = 0.0
    bound: float = 0.0
    implied_k: Optional[float] = None
    monotone: bool = True

    def to_dict(self) -> Dict[str, object]:
        return {
            "ratios": self.ratios,
            "sup_ratio": self.sup_ratio,
            "bound": self.bound,
            "implied_k": self.implied_k,
            "monotone": self.monotone,
        }


def contraction_ratios(history: Sequence[float]) -> List[float]:
    """Ratios d_{n+1}/d_n; growth out of an exact zero is an infinite ratio."""
    ratios = []
    for a, b in zip(history, history[1:]):
        if a > 0:
            ratios.append(b / a)
        else:
            ratios.append(math.inf if b > 0 else 0.0)
    return ratios


def contraction_diagnostics(
    history: Sequence[float], c: float, alpha: float, horizon: float, beta: float
) -> ContractionReport:
    """
    Empirical contraction of a Picard run.

    Args:
        history: Norm differences d_n between successive iterates
        c, alpha: Declared constants
        horizon: Terminal time T
        beta: Weight exponent of the norm

    Returns:
        ContractionReport with ratios d_{n+1}/d_n, their sup, the structural part
        alpha (T + 8) of the bound and the implied K = beta (sup - alpha (T + 8)) when positive

    Raises:
        PreconditionError: With fewer than two entries
    """
    if len(history) < 2:
        raise PreconditionError("Contraction diagnostics need at least two Picard differences")
    ratios = contraction_ratios(history)
    sup_ratio = max(ratios)
    bound = alpha * (horizon + 8.0)
    excess = sup_ratio - bound
    implied_k = beta * excess if excess > 0 else None
    monotone = all(b <= a for a, b in zip(history, history[1:]))
    if sup_ratio >= 1.0:
        logger.warning(f"Picard differences are not contracting: sup ratio {sup_ratio:.4f}")
    return ContractionReport(ratios=ratios, sup_ratio=sup_ratio, bound=bound, implied_k=implied_k, monotone=monotone)
