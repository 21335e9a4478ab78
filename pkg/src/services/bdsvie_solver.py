"""
Solvers for the discrete backward doubly stochastic Volterra equation.

Row k of the equation reads

    Y_k = psi_k + sum_{i>=k} f(t_k, t_i, y_i, z(k,i), z(i,k)) dt
                + sum_{i>=k} g(t_k, t_{i+1}, y_{i+1}, z(k,i), z(i+1,k)) Delta B_i
                - sum_{i>=k} Z(k,i) Delta W_i

with z(N, k) = 0. The Picard map freezes every unknown on the right, solves the
resulting linear rows by mixed representation and completes Z on Delta^c.
"""
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.config import settings
from src.models.fields import AlgebraLevel, NoiseModel, RandomField, TwoParamField
from src.models.solutions import (
    BDSDECoefficients,
    Completion,
    CompletionMode,
    FrozenState,
    SMSolution,
    SolverConfig,
    TerminalField,
    Variant,
    VolterraCoefficients,
)
from src.services.bdsde_solver import solve_bdsde
from src.services.norms_estimates import contraction_ratios, m2_norm
from src.services.probability_core import cond_expect, expect, measurability_check, pointwise, second_moment
from src.services.representation import backward_rep, forward_rep, mixed_rep
from src.utils.exceptions import (
    ConfigurationError,
    IncompleteStateError,
    MeasurabilityError,
    NonContractionError,
    NonConvergenceError,
)
from src.utils.validators import ensure_variant_bound

logger = logging.getLogger(__name__)

RowField = Callable[[int, int], RandomField]
MAX_EXPONENT = 700.0


def check_terminal(noise: NoiseModel, psi: TerminalField) -> None:
    """
    Every psi(t_k) must be a function of the W-path.

    Raises:
        ConfigurationError: If psi has the wrong number of nodes
        MeasurabilityError: If some psi(t_k) depends on B
    """
    if len(psi) != noise.n + 1:
        raise ConfigurationError(f"psi must have {noise.n + 1} nodes, got {len(psi)}")
    level = AlgebraLevel.wiener(noise.n, noise.n)
    for k, value in enumerate(psi.values):
        ok, deviation = measurability_check(value, level)
        if not ok:
            raise MeasurabilityError(f"psi(t_{k}) depends on B (deviation {deviation:.3e})")


def zero_state(noise: NoiseModel, dim: int = 1) -> FrozenState:
    """Identically zero (y, z) over the whole square."""
    zero = noise.zero(dim)
    n = noise.n
    entries = {(k, i): zero for k in range(n) for i in range(n)}
    return FrozenState(y=tuple([zero] * (n + 1)), z=TwoParamField(n, entries))


def _frozen(z: TwoParamField, k: int, i: int) -> RandomField:
    entry = z.get(k, i)
    if entry is None:
        raise IncompleteStateError(f"Frozen state lacks z({k},{i})")
    return entry


def assemble_rhs(
    noise: NoiseModel, psi: TerminalField, state: FrozenState, coeffs: VolterraCoefficients, k: int
) -> RandomField:
    """
    Right-hand side of row k with every unknown frozen at ``state``.

    Args:
        noise: Tree and grid
        psi: Terminal field
        state: Frozen (y, z); z must cover Delta and the Delta^c entries (i, k), i > k
        coeffs: Generators f and g
        k: Row index

    Returns:
        psi_k + sum f dt + sum g Delta B_i as a field

    Raises:
        IncompleteStateError: If a needed entry of the frozen state is missing
    """
    n, dt = noise.n, noise.dt
    grid = noise.grid
    t_k = grid.t(k)
    dim = psi[k].dim
    total = psi[k]
    for i in range(k, n):
        z_ki = _frozen(state.z, k, i)
        zeta_f = _frozen(state.z, i, k)
        zeta_g = _frozen(state.z, i + 1, k) if i + 1 < n else noise.zero(dim)
        t_i, t_next = grid.t(i), grid.t(i + 1)
        f_val = pointwise(lambda y, z, w: coeffs.f(t_k, t_i, y, z, w), state.y[i], z_ki, zeta_f)
        g_val = pointwise(lambda y, z, w: coeffs.g(t_k, t_next, y, z, w), state.y[i + 1], z_ki, zeta_g)
        total = total + f_val * dt + g_val * noise.brownian_increment(i)
    return total


@dataclass
class LinearSolution:
    """Y per node (Y_N = psi_N) and Z on Delta."""

    y: Tuple[RandomField, ...]
    z: TwoParamField
    reconstruction_error: float = 0.0


def solve_linear_bdsvie(noise: NoiseModel, psi: TerminalField, f_rows: RowField, g_rows: RowField) -> LinearSolution:
    """
    Solve Y_k = psi_k + sum f(k,i) dt + sum g(k,i) Delta B_i - sum Z(k,i) Delta W_i.

    Args:
        noise: Tree and grid
        psi: Terminal field
        f_rows: Explicit drift f(k, i) for i >= k
        g_rows: Explicit noise coefficient g(k, i) for i >= k, paired with Delta B_i

    Returns:
        LinearSolution with the row-wise mixed representations

    Raises:
        StructuralInputError: If some assembled row is not of the admissible form
    """
    check_terminal(noise, psi)
    n, dt = noise.n, noise.dt
    ys: List[RandomField] = []
    entries: Dict[Tuple[int, int], RandomField] = {}
    worst = 0.0
    for k in range(n):
        rhs = psi[k]
        for i in range(k, n):
            rhs = rhs + f_rows(k, i) * dt + g_rows(k, i) * noise.brownian_increment(i)
        row = mixed_rep(noise, rhs, k)
        ys.append(row.y)
        for i, value in row.z.items():
            entries[(k, i)] = value
        worst = max(worst, row.reconstruction_error)
    ys.append(cond_expect(psi[n], AlgebraLevel.filtration(n, n)))
    return LinearSolution(y=tuple(ys), z=TwoParamField(n, entries), reconstruction_error=worst)


def sm_complete(
    noise: NoiseModel, y: Sequence[RandomField], z_delta: TwoParamField, mode: CompletionMode = CompletionMode.SM
) -> Completion:
    """
    Complete Z on Delta^c from the representation halves of Y.

    X1(k, j), j < k, are the forward integrands of E[Y_k | F^W_{t_k}], mirrored onto
    Delta with a zero diagonal; X2(k, i), i >= k, are the backward integrands of
    E[Y_k | F^B_{t_k,T}], mirrored onto Delta^c. The modes set Z(k, j), j < k, to
    X1(k, j) + X2(j, k) (SM), X1(k, j) (M) or Z(j, k) (S).

    The S completion is not measurable at (j, k) in general, since Z(j, k) sees
    eps up to t_k; it is offered for comparison only.
    """
    n = noise.n
    mode = CompletionMode(mode)
    x1: Dict[Tuple[int, int], RandomField] = {}
    x2: Dict[Tuple[int, int], RandomField] = {}
    for k in range(n):
        w_part = cond_expect(y[k], AlgebraLevel.wiener(k, n))
        forward = forward_rep(noise, w_part)
        for j in range(k):
            x1[(k, j)] = forward.integrand[j]
            x1[(j, k)] = forward.integrand[j]
        x1[(k, k)] = noise.zero(y[k].dim)

        b_part = cond_expect(y[k], AlgebraLevel.brownian(k, n))
        backward = backward_rep(noise, b_part)
        for i in range(k, n):
            x2[(k, i)] = backward.integrand[i]
    for k in range(n):
        for j in range(k):
            x2[(k, j)] = x2[(j, k)]

    off: Dict[Tuple[int, int], RandomField] = {}
    for k in range(n):
        for j in range(k):
            if mode == CompletionMode.SM:
                off[(k, j)] = x1[(k, j)] + x2[(j, k)]
            elif mode == CompletionMode.M:
                off[(k, j)] = x1[(k, j)]
            else:
                mirrored = z_delta.get(j, k)
                if mirrored is None:
                    raise IncompleteStateError(f"S completion needs Z({j},{k}) on Delta")
                off[(k, j)] = mirrored
    return Completion(x1=TwoParamField(n, x1), x2=TwoParamField(n, x2), z_off=TwoParamField(n, off))


def completion_defects(noise: NoiseModel, y: Sequence[RandomField], completion: Completion) -> Dict[str, float]:
    """
    Defects of the identities a completion must satisfy exactly.

    - w_reconstruction: E[Y_k | F^W_{t_k}] = E Y_k + sum_{j<k} X1(k,j) Delta W_j
    - b_reconstruction: E[Y_k | F^B_{t_k,T}] = E Y_k + sum_{i>=k} X2(k,i) Delta B_i
    - x1_symmetry, x2_symmetry: mirror identities of the extensions
    """
    n = noise.n
    w_defect = b_defect = x1_sym = x2_sym = 0.0
    for k in range(n):
        mean = expect(y[k])
        w_sum = noise.zero(y[k].dim) + mean
        for j in range(k):
            w_sum = w_sum + completion.x1[(k, j)] * noise.wiener_increment(j)
        w_defect = max(w_defect, (cond_expect(y[k], AlgebraLevel.wiener(k, n)) - w_sum).max_abs())

        b_sum = noise.zero(y[k].dim) + mean
        for i in range(k, n):
            b_sum = b_sum + completion.x2[(k, i)] * noise.brownian_increment(i)
        b_defect = max(b_defect, (cond_expect(y[k], AlgebraLevel.brownian(k, n)) - b_sum).max_abs())

        for j in range(k):
            x1_sym = max(x1_sym, (completion.x1[(k, j)] - completion.x1[(j, k)]).max_abs())
            x2_sym = max(x2_sym, (completion.x2[(k, j)] - completion.x2[(j, k)]).max_abs())
    return {
        "w_reconstruction": w_defect,
        "b_reconstruction": b_defect,
        "x1_symmetry": x1_sym,
        "x2_symmetry": x2_sym,
    }


def theta_map(
    noise: NoiseModel,
    state: FrozenState,
    psi: TerminalField,
    coeffs: VolterraCoefficients,
    mode: CompletionMode = CompletionMode.SM,
) -> Tuple[FrozenState, Completion]:
    """
    One Picard step: solve the frozen rows, then complete Z on Delta^c.

    Returns:
        The new state (Y_N = psi_N, Z over the whole square) and its completion
    """
    n = noise.n
    ys: List[RandomField] = []
    delta: Dict[Tuple[int, int], RandomField] = {}
    for k in range(n):
        row = mixed_rep(noise, assemble_rhs(noise, psi, state, coeffs, k), k)
        ys.append(row.y)
        for i, value in row.z.items():
            delta[(k, i)] = value
    ys.append(cond_expect(psi[n], AlgebraLevel.filtration(n, n)))
    z_delta = TwoParamField(n, delta)
    completion = sm_complete(noise, ys, z_delta, mode)
    return FrozenState(y=tuple(ys), z=z_delta.merged(completion.z_off)), completion


def state_difference(a: FrozenState, b: FrozenState) -> FrozenState:
    """Entrywise a - b."""
    ys = tuple(ya - yb for ya, yb in zip(a.y, b.y))
    entries = {key: value - b.z[key] for key, value in a.z.items()}
    return FrozenState(y=ys, z=TwoParamField(a.z.n, entries))


def state_norm(noise: NoiseModel, state: FrozenState, beta: float) -> float:
    """Delta-restricted weighted norm with weights normalized by e^{-beta T}."""
    return m2_norm(noise, state.y, state.z, beta, normalized=True)


def simple_beta(c: float, alpha: float) -> float:
    """beta = 10c / (1 - 2 alpha) + 1."""
    return 10.0 * c / (1.0 - 2.0 * alpha) + 1.0


def full_beta_start(c: float, alpha: float, horizon: float) -> float:
    """beta_0 = 10c / (1 - alpha (T + 8)) + 1."""
    return 10.0 * c / (1.0 - alpha * (horizon + 8.0)) + 1.0


def resolve_beta(
    noise: NoiseModel,
    psi: TerminalField,
    coeffs: VolterraCoefficients,
    config: SolverConfig,
    retry_cap: Optional[int] = None,
    target: Optional[float] = None,
) -> float:
    """
    Weight exponent of the Picard norm.

    An explicit beta passes through. For the simple variant "auto" gives
    10c/(1 - 2 alpha) + 1. For the full variant "auto" starts at
    10c/(1 - alpha (T + 8)) + 1 and doubles until the measured ratio
    |Theta^2(0) - Theta(0)| / |Theta(0)| is at most ``target``.

    Raises:
        ConfigurationError: If an explicit beta is not positive
        NonContractionError: If no admissible beta reaches the target
    """
    if config.beta != "auto":
        beta = float(config.beta)
        if beta <= 0:
            raise ConfigurationError(f"beta must be positive, got {beta}")
        return beta

    if Variant(coeffs.variant) == Variant.SIMPLE:
        return simple_beta(coeffs.c, coeffs.alpha)

    retry_cap = settings.beta_retry_cap if retry_cap is None else retry_cap
    target = settings.contraction_target if target is None else target
    horizon = noise.grid.horizon
    dim = psi[0].dim
    zero = zero_state(noise, dim)
    first, _ = theta_map(noise, zero, psi, coeffs, config.completion_mode)
    second, _ = theta_map(noise, first, psi, coeffs, config.completion_mode)
    step = state_difference(second, first)

    beta = full_beta_start(coeffs.c, coeffs.alpha, horizon)
    ratios: List[float] = []
    for attempt in range(retry_cap + 1):
        if beta * horizon > MAX_EXPONENT:
            break
        base = state_norm(noise, first, beta)
        ratio = state_norm(noise, step, beta) / base if base > 0 else 0.0
        ratios.append(ratio)
        logger.debug(f"beta={beta:.4g}: measured contraction ratio {ratio:.4f}")
        if ratio <= target:
            logger.info(f"Resolved beta={beta:.4g} after {attempt} doublings (ratio {ratio:.4f})")
            return beta
        beta *= 2.0
    raise NonContractionError(
        f"No beta up to {beta:.4g} makes the Picard map contract below {target}", ratios=ratios
    )


def _validate(noise: NoiseModel, psi: TerminalField, coeffs: VolterraCoefficients) -> None:
    ensure_variant_bound(Variant(coeffs.variant).value, coeffs.alpha, noise.grid.horizon)
    if Variant(coeffs.variant) == Variant.SIMPLE and coeffs.depends_on_zeta:
        raise ConfigurationError("The simple variant does not admit generators depending on zeta")
    check_terminal(noise, psi)


def solve_bdsvie(
    noise: NoiseModel, psi: TerminalField, coeffs: VolterraCoefficients, config: Optional[SolverConfig] = None
) -> SMSolution:
    """
    Picard iteration of the Theta map from the zero state.

    Args:
        noise: Tree and grid
        psi: Terminal field
        coeffs: Generators with their declared constants and variant
        config: beta, tolerances and completion mode

    Returns:
        SMSolution with the iteration history and the final residual

    Raises:
        HypothesisError: If alpha violates the variant's bound
        NonContractionError: If "auto" finds no contracting beta
        NonConvergenceError: If picard_max iterations do not reach picard_tol
    """
    config = config or SolverConfig(picard_tol=settings.picard_tol, picard_max=settings.picard_max)
    _validate(noise, psi, coeffs)
    beta = resolve_beta(noise, psi, coeffs, config)
    started = time.perf_counter()

    state = zero_state(noise, psi[0].dim)
    differences: List[float] = []
    for iteration in range(1, config.picard_max + 1):
        new_state, completion = theta_map(noise, state, psi, coeffs, config.completion_mode)
        diff = state_norm(noise, state_difference(new_state, state), beta)
        differences.append(diff)
        state = new_state
        logger.debug(f"Picard iteration {iteration}: difference {diff:.3e}")
        if diff <= config.picard_tol:
            break
    else:
        ratios = contraction_ratios(differences)
        raise NonConvergenceError(
            f"Picard iteration did not reach {config.picard_tol:.1e} in {config.picard_max} iterations "
            f"(last difference {differences[-1]:.3e})",
            history=differences,
            ratios=ratios,
        )

    solution = SMSolution(
        y=state.y,
        z=state.z,
        x1=completion.x1,
        x2=completion.x2,
        beta=beta,
        iterations=iteration,
        differences=differences,
        ratios=contraction_ratios(differences),
    )
    solution.residual_max, solution.residual_l2 = bdsvie_residual(noise, solution, psi, coeffs)
    logger.info(
        f"BDSVIE converged in {iteration} iterations at beta={beta:.4g} "
        f"({time.perf_counter() - started:.2f}s, residual {solution.residual_max:.3e})"
    )
    return solution


def bdsvie_residual(
    noise: NoiseModel, sol: SMSolution, psi: TerminalField, coeffs: VolterraCoefficients
) -> Tuple[float, float]:
    """
    Defect of the discrete equation at every row and atom.

    Returns:
        (max abs defect, sqrt(sum_k E|d_k|^2 dt))
    """
    state = FrozenState(y=sol.y, z=sol.z)
    n, dt = noise.n, noise.dt
    worst = 0.0
    weighted = 0.0
    for k in range(n):
        rhs = assemble_rhs(noise, psi, state, coeffs, k)
        for i in range(k, n):
            rhs = rhs - sol.z[(k, i)] * noise.wiener_increment(i)
        defect = sol.y[k] - rhs
        worst = max(worst, defect.max_abs())
        weighted += second_moment(defect) * dt
    return worst, math.sqrt(weighted)


@dataclass
class FamilySolution:
    """Diagonal values of the per-row BDSDE family."""

    y: Tuple[RandomField, ...]
    z: TwoParamField
    inner_iterations: List[int] = field(default_factory=list)


def solve_bdsvie_family(
    noise: NoiseModel, psi: TerminalField, coeffs: VolterraCoefficients, config: Optional[SolverConfig] = None
) -> FamilySolution:
    """
    Solve one BDSDE per row with the first time argument frozen at t_k.

    Row k runs on [t_k, T] with terminal value psi(t_k); Y_k and Z(k, i), i >= k,
    are read from that run at its starting node.

    Raises:
        ConfigurationError: If a generator depends on zeta
    """
    if coeffs.depends_on_zeta:
        raise ConfigurationError("The BDSDE family construction needs generators independent of zeta")
    check_terminal(noise, psi)
    config = config or SolverConfig()
    n = noise.n
    ys: List[RandomField] = []
    entries: Dict[Tuple[int, int], RandomField] = {}
    sweeps: List[int] = []
    for k in range(n):
        frozen = BDSDECoefficients.frozen(psi[k], coeffs.f, coeffs.g, noise.grid.t(k), coeffs.c, coeffs.alpha)
        run = solve_bdsde(noise, frozen, inner_tol=config.inner_tol, start=k)
        ys.append(run.y[k])
        for i in range(k, n):
            entries[(k, i)] = run.z[i]
        sweeps.extend(run.inner_iterations)
    ys.append(cond_expect(psi[n], AlgebraLevel.filtration(n, n)))
    return FamilySolution(y=tuple(ys), z=TwoParamField(n, entries), inner_iterations=sweeps)


def family_discrepancy(noise: NoiseModel, family: FamilySolution, y: Sequence[RandomField], z: TwoParamField) -> float:
    """Largest atomwise gap between the family output and another solution on Y and Delta."""
    n = noise.n
    gap = max((family.y[k] - y[k]).max_abs() for k in range(n))
    for k in range(n):
        for i in range(k, n):
            gap = max(gap, (family.z[(k, i)] - z[(k, i)]).max_abs())
    return gap


def summarize(noise: NoiseModel, y: Sequence[RandomField], z: TwoParamField) -> List[Dict[str, float]]:
    """Per-node E[Y], Var[Y] (averaged over components) and row-wise Z energies."""
    n, dt = noise.n, noise.dt
    rows = []
    for k in range(n + 1):
        values = y[k].values
        mean = values.mean(axis=0)
        var = values.var(axis=0)
        delta = sum(second_moment(z[(k, i)]) for i in range(k, n) if (k, i) in z) * dt
        off = sum(second_moment(z[(k, j)]) for j in range(k) if (k, j) in z) * dt
        rows.append(
            {
                "k": k,
                "t": noise.grid.t(k),
                "mean_Y": float(np.mean(mean)),
                "var_Y": float(np.mean(var)),
                "z_energy_delta": float(delta),
                "z_energy_deltac": float(off),
            }
        )
    return rows
