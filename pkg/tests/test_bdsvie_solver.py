"""
Unit tests for the Volterra solvers, the SM completion and the dense oracles.
"""
import numpy as np
import pytest

from src.models.fields import DELTA_C, AlgebraLevel, TwoParamField
from src.models.solutions import (
    BDSDECoefficients,
    Completion,
    CompletionMode,
    FrozenState,
    SolverConfig,
    TerminalField,
    Variant,
    VolterraCoefficients,
)
from src.services import sampling
from src.services.bdsde_solver import solve_bdsde
from src.services.bdsvie_solver import (
    assemble_rhs,
    bdsvie_residual,
    check_terminal,
    completion_defects,
    family_discrepancy,
    resolve_beta,
    simple_beta,
    sm_complete,
    solve_bdsvie,
    solve_bdsvie_family,
    solve_linear_bdsvie,
    summarize,
    zero_state,
)
from src.services.norms_estimates import contraction_diagnostics
from src.services.oracle import max_gap, solve_bdsde_dense, solve_bdsvie_dense
from src.services.probability_core import make_noise, measurability_check
from src.services.registry import CoefficientFactory, TerminalFactory
from src.utils.exceptions import (
    ConfigurationError,
    HypothesisError,
    IncompleteStateError,
    MeasurabilityError,
    NonContractionError,
    NonConvergenceError,
)


def linear_zeta_problem():
    """f = zeta, g = 0, psi = W_T, full variant on N = 3."""
    noise = make_noise(1.0, 3)
    psi = TerminalFactory.create("wiener_terminal").build(noise)
    coeffs = VolterraCoefficients(
        f=CoefficientFactory.create("affine", zeta=1.0),
        g=CoefficientFactory.create("zero"),
        c=1.0,
        alpha=0.0,
        variant=Variant.FULL,
    )
    return noise, psi, coeffs


def reduction_problem(n=6):
    """Time-independent affine data with psi constant in time and g free of z."""
    noise = make_noise(1.0, n)
    psi = TerminalFactory.create("wiener_terminal").build(noise)
    coeffs = VolterraCoefficients(
        f=CoefficientFactory.create("affine", y=-0.5, z=0.2, offset=0.1),
        g=CoefficientFactory.create("affine", y=0.2, offset=0.05),
        c=0.29,
        alpha=0.04,
        variant=Variant.SIMPLE,
    )
    return noise, psi, coeffs


class TestLinearZetaScenario:
    """f = zeta has the fixed point Y_k = W_{t_k} + (T - t_k), Z = 1."""

    def setup_method(self):
        self.noise, self.psi, self.coeffs = linear_zeta_problem()
        self.sol = solve_bdsvie(self.noise, self.psi, self.coeffs, SolverConfig(picard_tol=1e-12))

    def test_closed_form_fixed_point(self):
        noise = self.noise
        for k in range(noise.n + 1):
            expected = noise.wiener(k) + (1.0 - noise.grid.t(k))
            assert (self.sol.y[k] - expected).max_abs() <= 1e-9, f"Y_{k} differs from the closed form"
        for key, value in self.sol.z.items():
            assert np.allclose(value.values, 1.0, atol=1e-9), f"Z{key} != 1"

    def test_contraction_ratios(self):
        assert self.sol.iterations >= 2
        assert all(r < 1.0 for r in self.sol.ratios), f"Ratios {self.sol.ratios}"

    def test_matches_dense_oracle(self):
        dense = solve_bdsvie_dense(self.noise, self.psi, self.coeffs)
        assert dense.defect <= 1e-10
        assert max_gap(self.noise, dense.y, dense.z, self.sol.y, self.sol.z) <= 1e-9

    def test_residual(self):
        residual_max, residual_l2 = bdsvie_residual(self.noise, self.sol, self.psi, self.coeffs)
        assert residual_max <= 1e-9
        assert residual_l2 <= residual_max
        assert self.sol.residual_max == residual_max

    def test_auto_beta(self):
        beta = resolve_beta(self.noise, self.psi, self.coeffs, SolverConfig())
        assert beta == pytest.approx(11.0)
        assert self.sol.beta == beta

    def test_non_contraction(self):
        with pytest.raises(NonContractionError) as exc_info:
            resolve_beta(self.noise, self.psi, self.coeffs, SolverConfig(), retry_cap=0, target=1e-3)
        assert len(exc_info.value.ratios) == 1

    def test_explicit_beta_passes_through(self):
        assert resolve_beta(self.noise, self.psi, self.coeffs, SolverConfig(beta=30.0)) == 30.0


class TestOutputs:
    """Measurability and completion identities of Picard solutions."""

    def setup_method(self):
        self.noise, self.psi, self.coeffs = reduction_problem(n=4)
        self.sol = solve_bdsvie(self.noise, self.psi, self.coeffs, SolverConfig(picard_tol=1e-12))

    def test_measurability(self):
        n = self.noise.n
        for k in range(n + 1):
            ok, deviation = measurability_check(self.sol.y[k], AlgebraLevel.filtration(k, n))
            assert ok, f"Y_{k} deviation {deviation}"
        for (k, i), value in self.sol.z.items():
            ok, deviation = measurability_check(value, self.sol.z.claimed_level(k, i))
            assert ok, f"Z({k},{i}) leaves its claimed level by {deviation}"

    def test_completion_identities(self):
        completion = Completion(x1=self.sol.x1, x2=self.sol.x2, z_off=self.sol.z.restricted(DELTA_C))
        defects = completion_defects(self.noise, self.sol.y, completion)
        for name, value in defects.items():
            assert value <= 1e-10, f"{name} defect {value}"

    def test_whole_square_is_covered(self):
        assert self.sol.z.is_complete()

    def test_summary(self):
        rows = summarize(self.noise, self.sol.y, self.sol.z)
        assert [row["k"] for row in rows] == list(range(self.noise.n + 1))
        assert rows[-1]["z_energy_delta"] == 0.0
        assert rows[0]["z_energy_deltac"] == 0.0
        assert all(row["var_Y"] >= 0.0 for row in rows)


class TestReductions:
    """Cases where the Volterra equation collapses to a BDSDE."""

    def test_bdsde_reduction(self):
        noise, psi, coeffs = reduction_problem()
        sol = solve_bdsvie(noise, psi, coeffs, SolverConfig(picard_tol=1e-12))
        frozen = BDSDECoefficients.frozen(psi[noise.n], coeffs.f, coeffs.g, 0.0, coeffs.c, coeffs.alpha)
        run = solve_bdsde(noise, frozen)
        for k in range(noise.n + 1):
            assert (sol.y[k] - run.y[k]).max_abs() <= 1e-8, f"Diagonal Y_{k} differs from the BDSDE"
        for k in range(noise.n):
            assert (sol.z[(k, k)] - run.z[k]).max_abs() <= 1e-8

    def test_family_matches_reduction(self):
        noise, psi, coeffs = reduction_problem(n=4)
        sol = solve_bdsvie(noise, psi, coeffs, SolverConfig(picard_tol=1e-12))
        family = solve_bdsvie_family(noise, psi, coeffs)
        assert family_discrepancy(noise, family, sol.y, sol.z) <= 1e-8

    def test_family_rejects_zeta(self):
        noise, psi, coeffs = linear_zeta_problem()
        with pytest.raises(ConfigurationError):
            solve_bdsvie_family(noise, psi, coeffs)

    def test_completion_modes_agree_without_zeta(self):
        noise, psi, coeffs = reduction_problem(n=4)
        runs = [
            solve_bdsvie(noise, psi, coeffs, SolverConfig(picard_tol=1e-12, completion_mode=mode))
            for mode in CompletionMode
        ]
        for run in runs[1:]:
            assert max_gap(noise, run.y, run.z, runs[0].y, runs[0].z) <= 1e-9

    def test_bdsde_dense_oracle(self):
        noise = make_noise(1.0, 3)
        f = CoefficientFactory.create("affine", y=-0.5, z=0.2, offset=0.1)
        g = CoefficientFactory.create("affine", y=0.2, z=0.1)
        coeffs = BDSDECoefficients.frozen(noise.wiener(3), f, g, 0.0, 0.3, 0.05)
        run = solve_bdsde(noise, coeffs)
        dense = solve_bdsde_dense(noise, coeffs, f, g)
        for i in range(noise.n):
            assert (dense.y[i] - run.y[i]).max_abs() <= 1e-9
            assert (dense.z[(0, i)] - run.z[i]).max_abs() <= 1e-9


class TestNonlinearPipeline:
    """The trig scenario under the full variant."""

    def test_trig_full_converges(self):
        noise = make_noise(1.0, 6)
        psi = TerminalFactory.create("sin_wiener").build(noise)
        coeffs = VolterraCoefficients(
            f=CoefficientFactory.create("trig", amplitude=0.5, weights=[1.0, 0.5, 0.5]),
            g=CoefficientFactory.create("trig", amplitude=0.1, weights=[1.0, 1.0, 1.0]),
            c=0.5,
            alpha=0.05,
            variant=Variant.FULL,
        )
        sol = solve_bdsvie(noise, psi, coeffs, SolverConfig(picard_tol=1e-12))
        assert max(sol.ratios) <= 0.95, f"Ratios {sol.ratios}"
        assert contraction_diagnostics(sol.differences, coeffs.c, coeffs.alpha, 1.0, sol.beta).monotone
        assert sol.residual_max <= 1e-8


class TestLinearSolver:
    """Explicit linear Volterra equations solved row by row."""

    def test_seeded_linear_data(self):
        noise = make_noise(1.0, 4)
        rng = sampling.make_rng(17)
        for trial in range(5):
            data = sampling.linear_data(noise, rng)
            sol = solve_linear_bdsvie(noise, data.psi, data.f_rows, data.g_rows)
            assert sol.reconstruction_error <= 1e-10, f"Trial {trial}"
            assert len(sol.y) == noise.n + 1
            assert sol.z.missing("delta") == []


class TestPreconditions:
    """Configuration and state errors."""

    def test_full_variant_bound(self):
        noise, psi, _ = linear_zeta_problem()
        coeffs = VolterraCoefficients(
            f=CoefficientFactory.create("zero"),
            g=CoefficientFactory.create("affine", z=0.4),
            c=0.0,
            alpha=0.2,
            variant=Variant.FULL,
        )
        with pytest.raises(HypothesisError) as exc_info:
            solve_bdsvie(noise, psi, coeffs)
        assert "(H3)" in str(exc_info.value)

    def test_simple_variant_rejects_zeta(self):
        noise, psi, coeffs = linear_zeta_problem()
        simple = VolterraCoefficients(f=coeffs.f, g=coeffs.g, c=1.0, alpha=0.0, variant=Variant.SIMPLE)
        with pytest.raises(ConfigurationError):
            solve_bdsvie(noise, psi, simple)

    def test_picard_budget(self):
        noise, psi, coeffs = reduction_problem(n=3)
        with pytest.raises(NonConvergenceError) as exc_info:
            solve_bdsvie(noise, psi, coeffs, SolverConfig(picard_max=2, picard_tol=1e-14))
        assert len(exc_info.value.history) == 2
        assert len(exc_info.value.ratios) == 1

    def test_terminal_must_ignore_b(self):
        noise = make_noise(1.0, 3)
        psi = TerminalField(tuple(noise.brownian(3) for _ in range(4)))
        with pytest.raises(MeasurabilityError):
            check_terminal(noise, psi)

    def test_terminal_node_count(self):
        noise = make_noise(1.0, 3)
        with pytest.raises(ConfigurationError):
            check_terminal(noise, TerminalField((noise.zero(),) * 3))

    def test_incomplete_frozen_state(self):
        noise, psi, coeffs = linear_zeta_problem()
        state = zero_state(noise)
        partial = FrozenState(y=state.y, z=state.z.restricted("delta"))
        with pytest.raises(IncompleteStateError):
            assemble_rhs(noise, psi, partial, coeffs, 0)

    def test_s_completion_needs_delta(self):
        noise = make_noise(1.0, 3)
        y = tuple(noise.wiener(k) for k in range(4))
        with pytest.raises(IncompleteStateError):
            sm_complete(noise, y, TwoParamField(noise.n), CompletionMode.S)


class TestSimpleBeta:
    def test_values(self):
        cases = [((1.0, 0.25), 21.0), ((2.0, 0.0), 21.0), ((0.1, 0.1), 2.25), ((0.29, 0.04), 10 * 0.29 / 0.92 + 1)]

        for (c, alpha), expected in cases:
            assert simple_beta(c, alpha) == pytest.approx(expected), f"c={c}, alpha={alpha}"

    def test_resolved_for_simple_variant(self):
        noise = make_noise(1.0, 3)
        psi = TerminalFactory.create("zero").build(noise)
        coeffs = VolterraCoefficients(
            f=CoefficientFactory.create("zero"),
            g=CoefficientFactory.create("zero"),
            c=1.0,
            alpha=0.25,
            variant=Variant.SIMPLE,
        )
        assert resolve_beta(noise, psi, coeffs, SolverConfig()) == pytest.approx(21.0)
