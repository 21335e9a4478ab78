"""
Lab service containing the command logic behind the CLI.
Coordinates scenario resolution, the solvers, the invariant suites and the repository.
"""
import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Callable, Dict, Iterator, List, Optional, Sequence

import numpy as np

from src.config import settings
from src.models.fields import DELTA_C, AlgebraLevel, NoiseModel, TwoParamField
from src.models.scenario import SUITES, CheckResult, GridSpec, NodeSummary, RunReport, Scenario
from src.models.solutions import (
    BDSDECoefficients,
    Completion,
    CompletionMode,
    SMSolution,
    SolverConfig,
    TerminalField,
    Variant,
    VolterraCoefficients,
)
from src.repository.scenario_repository import ScenarioRepository
from src.repository.scenario_repository import load_scenario as read_scenario
from src.services import sampling
from src.services.bdsde_solver import solve_bdsde
from src.services.bdsvie_solver import (
    completion_defects,
    family_discrepancy,
    sm_complete,
    solve_bdsvie,
    solve_bdsvie_family,
    solve_linear_bdsvie,
    summarize,
)
from src.services.norms_estimates import (
    check_apriori,
    check_apriori_linear,
    check_sm_inequality,
    check_weighted_lemmas,
    contraction_diagnostics,
)
from src.services.oracle import ORACLE_MAX_STEPS, max_gap, solve_bdsvie_dense
from src.services.probability_core import expect, make_noise, measurability_check
from src.services.registry import Coefficient, CoefficientFactory, TerminalFactory, TerminalFunctional
from src.services.representation import (
    backward_rep,
    exponential_deviation,
    exponential_martingale,
    forward_rep,
    uniqueness_check,
)
from src.services.stochastic_integrals import isometry_check
from src.utils.exceptions import ConfigurationError, PreconditionError
from src.utils.validators import ensure_declared_constant, ensure_variant_bound, validate_lipschitz

logger = logging.getLogger(__name__)

COMMANDS = ("solve", "check", "convergence", "repdemo")
SAMPLE_COUNT = 20
LEMMA_BETAS = (1.0, 21.0)
ORACLE_TOL = 1e-9
REDUCTION_TOL = 1e-8
MODE_TOL = 1e-9
EXACT_TOL = 1e-12
RESIDUAL_THRESHOLD = 1e-8
REPDEMO_COLUMNS = ("i", "t_next", "atom", "B_T", "f_BT", "f_BT2", "expected_BT2", "f_exp", "expected_exp")


@dataclass(frozen=True)
class ResolvedScenario:
    """A scenario with its registry entries turned into fields and generators."""

    scenario: Scenario
    noise: NoiseModel
    psi_functional: TerminalFunctional
    psi: TerminalField
    f: Coefficient
    g: Coefficient
    coeffs: VolterraCoefficients
    config: SolverConfig


def _verify_lipschitz(name: str, fn: Coefficient, declared: float, noise: NoiseModel, seed: int) -> None:
    """Sampled check of a declared constant for generators without a closed form."""
    if fn.is_affine:
        return
    is_valid, error_msg = validate_lipschitz(
        fn,
        lambda dy, dz, dzeta: declared * (dy + dz + dzeta),
        fn.dim,
        noise.grid.nodes,
        samples=settings.lipschitz_samples,
        seed=seed,
        tol=settings.lipschitz_tol,
    )
    if not is_valid:
        raise ConfigurationError(f"{name}: {error_msg}")


def resolve_scenario(scenario: Scenario, guard: Optional[int] = None) -> ResolvedScenario:
    """
    Build the tree, psi and the generators named by a scenario.

    Raises:
        ConfigurationError: If N exceeds the guard, a registry name is unknown or a
            declared constant is below the generator's own
        HypothesisError: If alpha violates the variant's bound
    """
    noise = make_noise(scenario.grid.horizon, scenario.grid.steps, guard)
    dim = scenario.dims.k
    psi_functional = TerminalFactory.create(scenario.psi.name, dim, **scenario.psi.params)
    f = CoefficientFactory.create(scenario.f.name, dim, **scenario.f.params)
    g = CoefficientFactory.create(scenario.g.name, dim, **scenario.g.params)

    c = ensure_declared_constant("f", scenario.f.lipschitz, f.lipschitz_constant)
    alpha = ensure_declared_constant("g", scenario.g.lipschitz, g.lipschitz_constant)
    _verify_lipschitz("f", f, c, noise, scenario.seed)
    _verify_lipschitz("g", g, alpha, noise, scenario.seed)

    variant = Variant(scenario.solver.variant)
    ensure_variant_bound(variant.value, alpha, noise.grid.horizon)
    if variant == Variant.SIMPLE and (f.depends_on_zeta or g.depends_on_zeta):
        raise ConfigurationError("The simple variant does not admit generators depending on zeta")

    solver = scenario.solver
    config = SolverConfig(
        beta=solver.beta,
        picard_tol=solver.picard_tol,
        picard_max=solver.picard_max,
        completion_mode=CompletionMode(solver.completion_mode),
        inner_tol=solver.inner_tol,
    )
    return ResolvedScenario(
        scenario=scenario,
        noise=noise,
        psi_functional=psi_functional,
        psi=psi_functional.build(noise),
        f=f,
        g=g,
        coeffs=VolterraCoefficients(f=f, g=g, c=c, alpha=alpha, variant=variant),
        config=config,
    )


def load_scenario(path, guard: Optional[int] = None) -> Scenario:
    """
    Read a scenario file and check that it resolves.

    Raises:
        ConfigurationError: Missing file, bad JSON, unknown registry name or N above the guard
        HypothesisError: alpha outside the variant's bound
        pydantic.ValidationError: Schema violations
    """
    scenario = read_scenario(path)
    resolve_scenario(scenario, guard)
    return scenario


class SuiteContext:
    """Shared state of one ``check`` run; the Picard solution is computed at most once."""

    def __init__(self, resolved: ResolvedScenario):
        self.resolved = resolved
        self.noise = resolved.noise
        self.seed = resolved.scenario.seed

    @cached_property
    def solution(self) -> SMSolution:
        r = self.resolved
        return solve_bdsvie(self.noise, r.psi, r.coeffs, r.config)

    def rng(self, suite: str) -> np.random.Generator:
        return sampling.make_rng(self.seed, SUITES.index(suite))


def _suite_measurability(ctx: SuiteContext) -> CheckResult:
    sol, n = ctx.solution, ctx.noise.n
    y_dev = max(measurability_check(sol.y[k], AlgebraLevel.filtration(k, n))[1] for k in range(n + 1))
    delta_dev = offdiag_dev = 0.0
    for (k, i), value in sol.z.items():
        deviation = measurability_check(value, sol.z.claimed_level(k, i))[1]
        if i >= k:
            delta_dev = max(delta_dev, deviation)
        else:
            offdiag_dev = max(offdiag_dev, deviation)
    tol = settings.measurability_tol
    passed = max(y_dev, delta_dev, offdiag_dev) <= tol
    detail = "" if passed else f"a solver field leaves its claimed level (tolerance {tol:.0e})"
    return CheckResult(
        name="measurability",
        passed=passed,
        detail=detail,
        metrics={"y_deviation": y_dev, "delta_deviation": delta_dev, "deltac_deviation": offdiag_dev},
    )


def _solution_completion(sol: SMSolution) -> Completion:
    return Completion(x1=sol.x1, x2=sol.x2, z_off=sol.z.restricted(DELTA_C))


def _suite_reconstruction(ctx: SuiteContext) -> CheckResult:
    sol = ctx.solution
    defects = completion_defects(ctx.noise, sol.y, _solution_completion(sol))
    metrics = {
        "w_reconstruction": defects["w_reconstruction"],
        "b_reconstruction": defects["b_reconstruction"],
        "residual_max": sol.residual_max,
    }
    passed = (
        max(defects["w_reconstruction"], defects["b_reconstruction"]) <= settings.reconstruction_tol
        and sol.residual_max <= RESIDUAL_THRESHOLD
    )
    return CheckResult(name="reconstruction", passed=passed, metrics=metrics)


def _suite_symmetry(ctx: SuiteContext) -> CheckResult:
    defects = completion_defects(ctx.noise, ctx.solution.y, _solution_completion(ctx.solution))
    metrics = {"x1_symmetry": defects["x1_symmetry"], "x2_symmetry": defects["x2_symmetry"]}
    return CheckResult(name="symmetry", passed=max(metrics.values()) <= EXACT_TOL, metrics=metrics)


def _suite_representation(ctx: SuiteContext) -> CheckResult:
    noise, rng = ctx.noise, ctx.rng("representation")
    forward_error = backward_error = 0.0
    smallest_gap = float("inf")
    for _ in range(SAMPLE_COUNT):
        rep = forward_rep(noise, sampling.w_functional(noise, rng))
        forward_error = max(forward_error, rep.reconstruction_error)
        perturbation = sampling.forward_integrand(noise, rng)
        smallest_gap = min(smallest_gap, uniqueness_check(noise, rep, perturbation))
        backward_error = max(backward_error, backward_rep(noise, sampling.b_functional(noise, rng)).reconstruction_error)
    passed = max(forward_error, backward_error) <= settings.reconstruction_tol and smallest_gap > 0.0
    return CheckResult(
        name="representation",
        passed=passed,
        metrics={
            "forward_error": forward_error,
            "backward_error": backward_error,
            "smallest_perturbation_gap": smallest_gap,
        },
    )


def _suite_isometry(ctx: SuiteContext) -> CheckResult:
    noise, rng = ctx.noise, ctx.rng("isometry")
    worst_gap = worst_mean = 0.0
    for _ in range(SAMPLE_COUNT):
        for h in (sampling.backward_integrand(noise, rng), sampling.forward_integrand(noise, rng)):
            report = isometry_check(noise, h)
            scale = max(1.0, report.rhs)
            worst_gap = max(worst_gap, report.gap / scale)
            worst_mean = max(worst_mean, report.mean / scale)
    passed = worst_gap <= 1e-10 and worst_mean <= 1e-10
    return CheckResult(
        name="isometry", passed=passed, metrics={"relative_gap": worst_gap, "relative_mean": worst_mean}
    )


def _suite_sm_inequality(ctx: SuiteContext) -> CheckResult:
    noise, rng = ctx.noise, ctx.rng("sm_inequality")
    n = noise.n
    estimates = []
    sol = ctx.solution
    if ctx.resolved.config.completion_mode == CompletionMode.SM:
        estimates.extend(check_sm_inequality(noise, sol.y, sol.z, sol.beta))
    dim = ctx.resolved.psi[0].dim
    zero_delta = TwoParamField(n, {(k, i): noise.zero(dim) for k in range(n) for i in range(k, n)})
    for _ in range(SAMPLE_COUNT):
        path = sampling.adapted_path(noise, rng)
        completion = sm_complete(noise, path, zero_delta, CompletionMode.SM)
        estimates.extend(check_sm_inequality(noise, path, zero_delta.merged(completion.z_off), sol.beta))
    worst = max((e.implied for e in estimates if e.implied is not None), default=0.0)
    return CheckResult(
        name="sm_inequality",
        passed=all(e.passed for e in estimates),
        metrics={"largest_ratio": worst},
        estimates=estimates,
    )


def _suite_weighted_lemmas(ctx: SuiteContext) -> CheckResult:
    noise, rng = ctx.noise, ctx.rng("weighted_lemmas")
    estimates = []
    for beta in LEMMA_BETAS:
        for _ in range(SAMPLE_COUNT // 2):
            estimates.extend(
                check_weighted_lemmas(noise, sampling.row_fields(noise, rng), sampling.row_fields(noise, rng), beta)
            )
    margins = {}
    for name in ("tail_drift", "drift_sum", "noise_tail"):
        margins[f"{name}_worst_ratio"] = max(e.implied or 0.0 for e in estimates if e.name == name)
    return CheckResult(
        name="weighted_lemmas", passed=all(e.passed for e in estimates), metrics=margins, estimates=estimates
    )


def _suite_apriori(ctx: SuiteContext) -> CheckResult:
    noise, rng = ctx.noise, ctx.rng("apriori")
    r, sol = ctx.resolved, ctx.solution
    try:
        estimates = [check_apriori(noise, sol.y, sol.z, r.psi, r.coeffs, sol.beta, sol.residual_max)]
        for _ in range(SAMPLE_COUNT // 4):
            data = sampling.linear_data(noise, rng)
            linear = solve_linear_bdsvie(noise, data.psi, data.f_rows, data.g_rows)
            estimates.append(
                check_apriori_linear(noise, linear.y, linear.z, data, sol.beta, linear.reconstruction_error)
            )
    except PreconditionError as e:
        return CheckResult(name="apriori", passed=False, detail=str(e))
    return CheckResult(name="apriori", passed=all(e.passed for e in estimates), estimates=estimates)


def _suite_contraction(ctx: SuiteContext) -> CheckResult:
    r, sol = ctx.resolved, ctx.solution
    try:
        report = contraction_diagnostics(
            sol.differences, r.coeffs.c, r.coeffs.alpha, ctx.noise.grid.horizon, sol.beta
        )
    except PreconditionError as e:
        return CheckResult(name="contraction", passed=True, skipped=True, detail=str(e))
    metrics = {"sup_ratio": report.sup_ratio, "structural_bound": report.bound, "beta": sol.beta}
    if report.implied_k is not None:
        metrics["implied_k"] = report.implied_k
    detail = "" if report.monotone else "Picard differences are not monotone"
    return CheckResult(
        name="contraction", passed=report.sup_ratio < 1.0 and report.monotone, detail=detail, metrics=metrics
    )


def _suite_oracle(ctx: SuiteContext) -> CheckResult:
    r = ctx.resolved
    if not (r.f.is_affine and r.g.is_affine) or ctx.noise.n > ORACLE_MAX_STEPS:
        return CheckResult(
            name="oracle", passed=True, skipped=True, detail=f"needs affine generators and N <= {ORACLE_MAX_STEPS}"
        )
    dense = solve_bdsvie_dense(ctx.noise, r.psi, r.coeffs, r.config.completion_mode)
    sol = ctx.solution
    gap = max_gap(ctx.noise, dense.y, dense.z, sol.y, sol.z)
    return CheckResult(
        name="oracle", passed=gap <= ORACLE_TOL, metrics={"gap": gap, "dense_defect": dense.defect}
    )


def _reduction_applies(r: ResolvedScenario) -> bool:
    return (
        r.psi_functional.is_constant_in_time
        and not r.coeffs.depends_on_zeta
        and not (r.f.depends_on_time or r.g.depends_on_time)
        and not r.g.depends_on_z
    )


def _suite_bdsde_reduction(ctx: SuiteContext) -> CheckResult:
    r, noise = ctx.resolved, ctx.noise
    if not _reduction_applies(r):
        return CheckResult(
            name="bdsde_reduction",
            passed=True,
            skipped=True,
            detail="needs psi constant in time and time-independent generators free of zeta, with g free of z",
        )
    coeffs = BDSDECoefficients.frozen(r.psi[noise.n], r.f, r.g, 0.0, r.coeffs.c, r.coeffs.alpha)
    run = solve_bdsde(noise, coeffs, inner_tol=r.config.inner_tol)
    sol = ctx.solution
    y_gap = max((sol.y[k] - run.y[k]).max_abs() for k in range(noise.n + 1))
    z_gap = max((sol.z[(k, k)] - run.z[k]).max_abs() for k in range(noise.n))
    return CheckResult(
        name="bdsde_reduction",
        passed=max(y_gap, z_gap) <= REDUCTION_TOL,
        metrics={"y_gap": y_gap, "z_diagonal_gap": z_gap},
    )


def _suite_completion_modes(ctx: SuiteContext) -> CheckResult:
    r, noise = ctx.resolved, ctx.noise
    if r.coeffs.depends_on_zeta:
        return CheckResult(
            name="completion_modes", passed=True, skipped=True, detail="generators depend on zeta"
        )
    runs = {
        mode: solve_bdsvie(noise, r.psi, r.coeffs, replace(r.config, completion_mode=mode)) for mode in CompletionMode
    }
    reference = runs[CompletionMode.SM]
    metrics = {
        f"gap_{mode.value}": max_gap(noise, run.y, run.z, reference.y, reference.z)
        for mode, run in runs.items()
        if mode != CompletionMode.SM
    }
    return CheckResult(name="completion_modes", passed=max(metrics.values()) <= MODE_TOL, metrics=metrics)


def _suite_family(ctx: SuiteContext) -> CheckResult:
    r, noise = ctx.resolved, ctx.noise
    if r.coeffs.depends_on_zeta:
        return CheckResult(name="family", passed=True, skipped=True, detail="generators depend on zeta")
    family = solve_bdsvie_family(noise, r.psi, r.coeffs, r.config)
    gap = family_discrepancy(noise, family, ctx.solution.y, ctx.solution.z)
    return CheckResult(
        name="family",
        passed=True,
        detail="per-row BDSDE family against the Picard solution; informational",
        metrics={"discrepancy": gap, "max_inner_sweeps": float(max(family.inner_iterations, default=0))},
    )


SUITE_RUNNERS: Dict[str, Callable[[SuiteContext], CheckResult]] = {
    "measurability": _suite_measurability,
    "reconstruction": _suite_reconstruction,
    "symmetry": _suite_symmetry,
    "representation": _suite_representation,
    "isometry": _suite_isometry,
    "sm_inequality": _suite_sm_inequality,
    "weighted_lemmas": _suite_weighted_lemmas,
    "apriori": _suite_apriori,
    "contraction": _suite_contraction,
    "oracle": _suite_oracle,
    "bdsde_reduction": _suite_bdsde_reduction,
    "completion_modes": _suite_completion_modes,
    "family": _suite_family,
}


class LabService:
    """
    Service layer for the lab commands.
    Orchestrates resolution, solvers, invariant suites and artifact writing.
    """

    def __init__(
        self,
        repository: Optional[ScenarioRepository] = None,
        guard: Optional[int] = None,
        stable_output: bool = False,
    ):
        """
        Initialize the lab service.

        Args:
            repository: Artifact writer (optional; nothing is written without one)
            guard: Memory guard override for N
            stable_output: Leave timings out so reports are byte-identical across runs
        """
        self.repository = repository or ScenarioRepository()
        self.guard = guard
        self.stable_output = stable_output
        self._timings: Dict[str, float] = {}

    @contextmanager
    def _timed(self, stage: str) -> Iterator[None]:
        started = time.perf_counter()
        try:
            yield
        finally:
            self._timings[stage] = self._timings.get(stage, 0.0) + time.perf_counter() - started

    def _finish(self, report: RunReport) -> RunReport:
        report.timings = None if self.stable_output else dict(self._timings)
        self._timings = {}
        return report

    def run(
        self,
        scenario: Scenario,
        command: str,
        suites: Optional[Sequence[str]] = None,
        steps: Optional[Sequence[int]] = None,
    ) -> RunReport:
        """
        Execute one command and write its artifacts.

        Args:
            scenario: Validated scenario
            command: One of solve, check, convergence, repdemo
            suites: Suites for ``check`` (defaults to the scenario's list, then to all)
            steps: N-sequence for ``convergence``

        Returns:
            RunReport (also written as report.json when the repository has a directory)

        Raises:
            ConfigurationError: If the command is unknown or the scenario does not resolve
            ConvergenceError: If a solver fails to converge
        """
        if command not in COMMANDS:
            raise ConfigurationError(f"Unknown command '{command}', expected one of {COMMANDS}")
        logger.info(f"Running '{command}' on T={scenario.grid.horizon}, N={scenario.grid.steps}")
        if command == "solve":
            report = self.solve(scenario)
        elif command == "check":
            report = self.check(scenario, suites)
        elif command == "convergence":
            report = self.convergence(scenario, steps or (4, 6, 8, 10))
        else:
            report = self.repdemo(scenario.grid.horizon, scenario.grid.steps)
        report = self._finish(report)
        self.repository.write_report(report)
        return report

    def solve(self, scenario: Scenario) -> RunReport:
        with self._timed("resolve"):
            resolved = resolve_scenario(scenario, self.guard)
        with self._timed("solve"):
            sol = solve_bdsvie(resolved.noise, resolved.psi, resolved.coeffs, resolved.config)
        rows = summarize(resolved.noise, sol.y, sol.z)
        self.repository.write_summary_csv(rows)
        return RunReport(
            command="solve",
            scenario=scenario,
            beta=sol.beta,
            iterations=sol.iterations,
            differences=sol.differences,
            contraction_ratios=sol.ratios,
            residual_max=sol.residual_max,
            residual_l2=sol.residual_l2,
            summary=[NodeSummary(**row) for row in rows],
        )

    def check(self, scenario: Scenario, suites: Optional[Sequence[str]] = None) -> RunReport:
        """Run the named suites once each; the report passes when no suite fails."""
        names = list(dict.fromkeys(suites or scenario.checks or SUITES))
        unknown = [name for name in names if name not in SUITE_RUNNERS]
        if unknown:
            raise ConfigurationError(f"Unknown check suites {unknown}; known: {list(SUITES)}")
        with self._timed("resolve"):
            ctx = SuiteContext(resolve_scenario(scenario, self.guard))
        results: List[CheckResult] = []
        for name in names:
            with self._timed(name):
                result = SUITE_RUNNERS[name](ctx)
            status = "skipped" if result.skipped else ("passed" if result.passed else "FAILED")
            log = logger.warning if not result.passed else logger.info
            log(f"Suite {name}: {status} {result.detail}".rstrip())
            results.append(result)

        report = RunReport(
            command="check",
            scenario=scenario,
            checks=results,
            estimates=[e for result in results for e in result.estimates],
            passed=all(result.passed or result.skipped for result in results),
        )
        if "solution" in ctx.__dict__:
            sol = ctx.solution
            report.beta, report.iterations = sol.beta, sol.iterations
            report.differences, report.contraction_ratios = sol.differences, sol.ratios
            report.residual_max, report.residual_l2 = sol.residual_max, sol.residual_l2
        return report

    def convergence(self, scenario: Scenario, steps: Sequence[int]) -> RunReport:
        """
        Repeat the solve over an N-sequence and compare E[Y_0] with the finest run.

        Errors are |E[Y_0](N) - E[Y_0](N_max)| for every N but the largest; ratios
        are quotients of consecutive errors.
        """
        steps = sorted(set(int(n) for n in steps))
        if len(steps) < 2:
            raise ConfigurationError("convergence needs at least two values of N")
        means: List[float] = []
        for n in steps:
            refined = scenario.model_copy(update={"grid": GridSpec(T=scenario.grid.horizon, N=n)})
            with self._timed(f"N={n}"):
                resolved = resolve_scenario(refined, self.guard)
                sol = solve_bdsvie(resolved.noise, resolved.psi, resolved.coeffs, resolved.config)
            means.append(float(np.mean(expect(sol.y[0]))))
            logger.info(f"N={n}: E[Y_0]={means[-1]:.10f} after {sol.iterations} Picard iterations")
        errors = [abs(m - means[-1]) for m in means[:-1]]
        ratios = [a / b if b > 0 else float("inf") for a, b in zip(errors, errors[1:])]
        rows = [
            {"N": n, "mean_y0": m, "error": errors[j] if j < len(errors) else 0.0}
            for j, (n, m) in enumerate(zip(steps, means))
        ]
        self.repository.write_table(rows, "convergence.csv", ("N", "mean_y0", "error"))
        return RunReport(
            command="convergence",
            scenario=scenario,
            convergence={"steps": steps, "mean_y0": means, "errors": errors, "ratios": ratios},
        )

    def repdemo(self, horizon: float, steps: int) -> RunReport:
        """
        Backward representations of B_T, B_T^2 and the exponential martingale (h = 1).

        The CSV lists, per interval and per B-atom, the extracted integrands next to
        their closed forms 1, 2 (B_T - B_{t_{i+1}}) and Y_{t_{i+1}}.
        """
        with self._timed("repdemo"):
            noise = make_noise(horizon, steps, self.guard)
            n = noise.n
            level = AlgebraLevel.brownian(0, n)
            b_t = noise.brownian(n)
            exponential = exponential_martingale(noise, 1.0, 0)
            rep_bt = backward_rep(noise, b_t)
            rep_bt2 = backward_rep(noise, b_t * b_t)
            rep_exp = backward_rep(noise, exponential)

            def column(field):
                return field.lift(level).values[:, 0]

            rows = []
            bt2_gap = bt_gap = 0.0
            for i in range(n):
                expected_bt2 = noise.brownian_tail(i + 1) * 2.0
                expected_exp = exponential_martingale(noise, 1.0, i + 1)
                bt2_gap = max(bt2_gap, (rep_bt2.integrand[i] - expected_bt2).max_abs())
                bt_gap = max(bt_gap, (rep_bt.integrand[i] - 1.0).max_abs())
                values = zip(
                    column(b_t),
                    column(rep_bt.integrand[i]),
                    column(rep_bt2.integrand[i]),
                    column(expected_bt2),
                    column(rep_exp.integrand[i]),
                    column(expected_exp),
                )
                for atom, (b, f_bt, f_bt2, e_bt2, f_exp, e_exp) in enumerate(values):
                    rows.append(
                        {
                            "i": i,
                            "t_next": noise.grid.t(i + 1),
                            "atom": atom,
                            "B_T": b,
                            "f_BT": f_bt,
                            "f_BT2": f_bt2,
                            "expected_BT2": e_bt2,
                            "f_exp": f_exp,
                            "expected_exp": e_exp,
                        }
                    )
            bt2_mean_gap = abs(float(rep_bt2.mean[0]) - noise.grid.horizon)
            deviation = exponential_deviation(noise, 1.0)
        self.repository.write_table(rows, "repdemo.csv", REPDEMO_COLUMNS)

        checks = [
            CheckResult(
                name="repdemo_BT",
                passed=bt_gap <= EXACT_TOL and abs(float(rep_bt.mean[0])) <= EXACT_TOL,
                metrics={"integrand_gap": bt_gap, "mean": float(rep_bt.mean[0])},
            ),
            CheckResult(
                name="repdemo_BT2",
                passed=bt2_gap <= EXACT_TOL and bt2_mean_gap <= EXACT_TOL,
                metrics={"integrand_gap": bt2_gap, "mean_gap": bt2_mean_gap},
            ),
            CheckResult(
                name="repdemo_exponential",
                passed=True,
                detail="relative deviation from h Y_{t_{i+1}}; first order in dt",
                metrics={"relative_deviation": deviation},
            ),
        ]
        return RunReport(
            command="repdemo",
            scenario=Scenario(grid=GridSpec(T=horizon, N=steps)),
            checks=checks,
            passed=all(c.passed for c in checks),
        )
