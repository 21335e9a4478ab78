"""
Discrete forward and backward Ito integrals on the scenario tree.

Forward integrands are paired with Delta W_i at the left node; backward integrands
are paired with Delta B_i at the right node, so h_i may only depend on the
B-increments after t_{i+1}.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
from numpy.polynomial import Polynomial

from src.models.fields import AlgebraLevel, IntervalProcess, NoiseModel, Orientation, RandomField
from src.services.probability_core import expect, make_noise, measurability_check, second_moment
from src.utils.exceptions import ConfigurationError, IntegrandError

logger = logging.getLogger(__name__)


def orientation_level(orientation: Orientation, i: int, n: int) -> AlgebraLevel:
    """Largest level an integrand of interval i may live on."""
    if orientation == Orientation.FORWARD:
        return AlgebraLevel(i, 0, n)
    return AlgebraLevel(n, i + 1, n)


def build_process(
    fn: Callable[[int], RandomField], n: int, orientation: Orientation, start: int = 0
) -> IntervalProcess:
    """Collect fn(i) for i in start..n-1 into an interval process."""
    entries = tuple(None if i < start else fn(i) for i in range(n))
    return IntervalProcess(entries, Orientation(orientation), start)


def check_orientation(h: IntervalProcess, start: Optional[int] = None, tol: Optional[float] = None) -> None:
    """
    Verify the adaptedness of every entry of ``h`` from ``start`` on.

    Raises:
        IntegrandError: If an entry depends on a coordinate its orientation forbids
    """
    start = h.start if start is None else start
    for i in range(start, h.n):
        claimed = orientation_level(h.orientation, i, h[i].n)
        ok, deviation = measurability_check(h[i], claimed, tol)
        if not ok:
            forbidden = f"eps_{i + 1}.." if h.orientation == Orientation.FORWARD else f"eta_1..eta_{i + 1}"
            raise IntegrandError(
                f"{h.orientation.value} integrand h_{i} depends on {forbidden} "
                f"(deviation {deviation:.3e} from level {claimed})"
            )


def _integral(noise: NoiseModel, h: IntervalProcess, increment: Callable[[int], RandomField], start: int) -> RandomField:
    total = noise.zero()
    for i in range(start, h.n):
        total = total + h[i] * increment(i)
    return total


def forward_integral(noise: NoiseModel, h: IntervalProcess, start: int = 0) -> RandomField:
    """
    Sum of h_i * Delta W_i over intervals start..N-1.

    Args:
        noise: Tree the integrand lives on
        h: Forward-oriented integrand
        start: First interval of the sum

    Returns:
        The integral as a field

    Raises:
        IntegrandError: If some h_i depends on eps_{i+1} or later
    """
    if h.orientation != Orientation.FORWARD:
        raise IntegrandError("forward_integral requires a forward-oriented integrand")
    check_orientation(h, start)
    return _integral(noise, h, noise.wiener_increment, start)


def backward_integral(noise: NoiseModel, h: IntervalProcess, start: int = 0) -> RandomField:
    """
    Sum of h_i * Delta B_i over intervals start..N-1, h_i taken at the right node.

    Raises:
        IntegrandError: If some h_i depends on eta_1..eta_{i+1}
    """
    if h.orientation != Orientation.BACKWARD:
        raise IntegrandError("backward_integral requires a backward-oriented integrand")
    check_orientation(h, start)
    return _integral(noise, h, noise.brownian_increment, start)


def integral(noise: NoiseModel, h: IntervalProcess, start: int = 0) -> RandomField:
    """Dispatch on the orientation of ``h``."""
    if h.orientation == Orientation.FORWARD:
        return forward_integral(noise, h, start)
    return backward_integral(noise, h, start)


@dataclass(frozen=True)
class IsometryReport:
    lhs: float
    rhs: float
    gap: float
    mean: float


def isometry_check(noise: NoiseModel, h: IntervalProcess, start: int = 0) -> IsometryReport:
    """
    Compare E|integral|^2 with the sum of E|h_i|^2 dt.

    Returns:
        IsometryReport with lhs, rhs, their gap and the largest component of E[integral]
    """
    value = integral(noise, h, start)
    lhs = second_moment(value)
    rhs = sum(second_moment(h[i]) for i in range(start, h.n)) * noise.dt
    mean = float(np.max(np.abs(expect(value))))
    return IsometryReport(lhs=lhs, rhs=rhs, gap=abs(lhs - rhs), mean=mean)


@dataclass
class ItoFormulaReport:
    """Defects of the discrete backward Ito formula, one entry per tree depth."""

    steps: List[int]
    sup_defects: List[float] = field(default_factory=list)
    rms_defects: List[float] = field(default_factory=list)
    orders: List[float] = field(default_factory=list)
    correction: float = 0.5

    def to_dict(self) -> dict:
        return {
            "steps": self.steps,
            "sup_defects": self.sup_defects,
            "rms_defects": self.rms_defects,
            "orders": self.orders,
            "correction": self.correction,
        }


ProcessFactory = Callable[[NoiseModel, int], RandomField]


def _as_polynomial(phi) -> Polynomial:
    poly = phi if isinstance(phi, Polynomial) else Polynomial(phi)
    if poly.degree() > 4:
        raise ConfigurationError(f"Test function must have degree at most 4, got {poly.degree()}")
    return poly


def ito_formula_defects(
    noise: NoiseModel,
    phi,
    beta: ProcessFactory,
    gamma: ProcessFactory,
    terminal: float = 0.0,
    correction: float = 0.5,
) -> List[RandomField]:
    """
    Per-node defect of the discrete backward Ito formula.

    alpha is accumulated backward from ``terminal`` with
    alpha_i = alpha_{i+1} - beta_i dt - gamma_i Delta B_i, and the formula's
    integrands are evaluated at the right node alpha_{j+1}.
    """
    poly = _as_polynomial(phi)
    d1, d2 = poly.deriv(1), poly.deriv(2)
    n, dt = noise.n, noise.dt

    beta_proc = build_process(lambda i: beta(noise, i), n, Orientation.BACKWARD)
    gamma_proc = build_process(lambda i: gamma(noise, i), n, Orientation.BACKWARD)
    check_orientation(beta_proc)
    check_orientation(gamma_proc)

    alpha: List[RandomField] = [noise.constant(terminal)] * (n + 1)
    for i in range(n - 1, -1, -1):
        alpha[i] = alpha[i + 1] - beta_proc[i] * dt - gamma_proc[i] * noise.brownian_increment(i)

    defects = [noise.zero()]
    accumulated = noise.zero()
    phi0 = alpha[0].apply(poly)
    for j in range(n):
        right = alpha[j + 1]
        gam = gamma_proc[j]
        accumulated = (
            accumulated
            + right.apply(d1) * beta_proc[j] * dt
            + right.apply(d1) * gam * noise.brownian_increment(j)
            - right.apply(d2) * gam * gam * (correction * dt)
        )
        defects.append(right.apply(poly) - phi0 - accumulated)
    return defects


def backward_ito_formula_check(
    phi,
    beta: ProcessFactory,
    gamma: ProcessFactory,
    steps: Sequence[int],
    horizon: float = 1.0,
    terminal: float = 0.0,
    correction: float = 0.5,
    guard: Optional[int] = None,
) -> ItoFormulaReport:
    """
    Measure the discrete backward Ito formula defect over a sequence of tree depths.

    Args:
        phi: Polynomial (or coefficient list, lowest degree first) of degree <= 4
        beta: Factory (noise, i) -> backward-oriented drift on interval i
        gamma: Factory (noise, i) -> backward-oriented volatility on interval i
        steps: Tree depths N to evaluate
        horizon: Terminal time T
        terminal: Value of alpha at T
        correction: Coefficient of phi'' gamma^2 dt; 1/2 is the Ito correction
        guard: Memory guard override

    Returns:
        ItoFormulaReport with sup and root-mean-square defects per depth and the
        empirical orders between consecutive depths, computed from the RMS defects
    """
    report = ItoFormulaReport(steps=list(steps), correction=correction)
    for n in steps:
        noise = make_noise(horizon, n, guard)
        defects = ito_formula_defects(noise, phi, beta, gamma, terminal, correction)
        report.sup_defects.append(max(d.max_abs() for d in defects))
        report.rms_defects.append(max(math.sqrt(second_moment(d)) for d in defects))
        logger.debug(f"Ito formula N={n}: sup={report.sup_defects[-1]:.3e} rms={report.rms_defects[-1]:.3e}")

    for (n1, e1), (n2, e2) in zip(zip(steps, report.rms_defects), zip(steps[1:], report.rms_defects[1:])):
        if e1 > 0 and e2 > 0:
            report.orders.append(math.log(e1 / e2) / math.log(n2 / n1))
        else:
            report.orders.append(math.inf)
    return report


def constant_process(value: float) -> ProcessFactory:
    """Factory returning the deterministic integrand ``value`` on every interval."""
    return lambda noise, i: noise.constant(value)


def tail_process(scale: float = 1.0) -> ProcessFactory:
    """Factory returning scale * (B_T - B_{t_{i+1}}), a backward-adapted integrand."""
    return lambda noise, i: noise.brownian_tail(i + 1) * scale


@dataclass(frozen=True)
class AgreementReport:
    sup_gap: float
    rms_gap: float


def deterministic_agreement(noise: NoiseModel, h: Callable[[float], float], start: int = 0) -> AgreementReport:
    """
    Compare the two orientation conventions of sum h Delta B_i for a deterministic h(t).

    The forward convention evaluates h at the left node t_i, the backward one at the
    right node t_{i+1}. Constant h gives identical sums; for smooth h the gap is
    sum (h(t_i) - h(t_{i+1})) Delta B_i, whose root mean square is O(dt).

    Returns:
        AgreementReport with the atomwise sup and the root mean square of the gap
    """
    grid = noise.grid
    left = build_process(lambda i: noise.constant(h(grid.t(i))), noise.n, Orientation.FORWARD, start)
    right = build_process(lambda i: noise.constant(h(grid.t(i + 1))), noise.n, Orientation.BACKWARD, start)
    gap = _integral(noise, left, noise.brownian_increment, start) - backward_integral(noise, right, start)
    return AgreementReport(sup_gap=gap.max_abs(), rms_gap=math.sqrt(second_moment(gap)))
