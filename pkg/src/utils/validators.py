"""
Validation utilities for grids, hypotheses and declared coefficient constants.
"""
import math
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from src.utils.exceptions import ConfigurationError, HypothesisError, StepSizeError

VARIANTS = ("simple", "full")


def validate_grid_params(horizon: float, steps: int, guard: int) -> Tuple[bool, str]:
    """
    Validate the time grid parameters.

    Args:
        horizon: Terminal time T
        steps: Number of intervals N
        guard: Largest admissible N

    Returns:
        Tuple of (is_valid, error_message)
    """
    if not isinstance(horizon, (int, float)) or not math.isfinite(horizon) or horizon <= 0:
        return False, f"Horizon T must be a positive real, got {horizon}"

    if isinstance(steps, bool) or not isinstance(steps, (int, np.integer)) or steps < 1:
        return False, f"Number of steps N must be a positive integer, got {steps}"

    if steps > guard:
        return False, (
            f"N={steps} exceeds the memory guard {guard} "
            f"(full fields carry 4^N atoms); pass --guard-override to raise it"
        )

    return True, ""


def validate_variant_bound(variant: str, alpha: float, horizon: float) -> Tuple[bool, str]:
    """
    Validate the g-constant against the hypothesis of a Volterra variant.

    (H2) for the simple variant requires alpha < 1/2; (H3) for the full variant
    requires alpha < 1/(T+8).

    Returns:
        Tuple of (is_valid, error_message)
    """
    if variant not in VARIANTS:
        return False, f"Unknown variant '{variant}', expected one of {VARIANTS}"

    if alpha < 0:
        return False, f"Lipschitz constant alpha must be non-negative, got {alpha}"

    if variant == "simple" and alpha >= 0.5:
        return False, f"(H2) requires 0 < alpha < 1/2, got alpha={alpha}"

    if variant == "full":
        bound = 1.0 / (horizon + 8.0)
        if alpha >= bound:
            return False, f"(H3) requires 0 < alpha < 1/(T+8) = {bound:.6g}, got alpha={alpha}"

    return True, ""


def validate_step_size(c: float, dt: float) -> Tuple[bool, str]:
    """The implicit BDSDE step contracts only when c * dt < 1."""
    if c * dt >= 1.0:
        return False, f"Implicit step requires c*dt < 1, got c={c}, dt={dt} (c*dt={c * dt:.6g})"
    return True, ""


def validate_lipschitz(
    fn: Callable[..., np.ndarray],
    bound: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray],
    dim: int,
    nodes: Sequence[float],
    samples: int = 64,
    seed: int = 0,
    tol: float = 1e-9,
    scale: float = 3.0,
) -> Tuple[bool, str]:
    """
    Verify a declared Lipschitz bound on sampled argument pairs.

    Args:
        fn: Coefficient map (t, s, y, z, zeta) -> R^k, vectorized over rows
        bound: Map (|dy|^2, |dz|^2, |dzeta|^2) -> admissible |d fn|^2
        dim: State dimension k
        nodes: Time nodes to sample (t, s) from, with t <= s
        samples: Number of argument pairs
        seed: Seed for the sampler
        tol: Relative tolerance on the comparison
        scale: Standard deviation of sampled arguments

    Returns:
        Tuple of (is_valid, error_message)
    """
    rng = np.random.default_rng(seed)
    nodes = np.asarray(nodes, dtype=float)
    first = rng.integers(0, len(nodes), size=samples)
    second = np.maximum(first, rng.integers(0, len(nodes), size=samples))
    t = nodes[first][:, None]
    s = nodes[second][:, None]
    args = [rng.normal(scale=scale, size=(samples, dim)) for _ in range(6)]
    y, z, zeta, y2, z2, zeta2 = args

    lhs = np.sum((fn(t, s, y, z, zeta) - fn(t, s, y2, z2, zeta2)) ** 2, axis=1)
    rhs = bound(
        np.sum((y - y2) ** 2, axis=1),
        np.sum((z - z2) ** 2, axis=1),
        np.sum((zeta - zeta2) ** 2, axis=1),
    )
    worst = int(np.argmax(lhs - rhs * (1.0 + tol)))
    if lhs[worst] > rhs[worst] * (1.0 + tol) + tol:
        return False, (
            f"Declared Lipschitz bound violated: |delta|^2={lhs[worst]:.6g} "
            f"exceeds {rhs[worst]:.6g} on a sampled pair"
        )
    return True, ""


def ensure_grid_params(horizon: float, steps: int, guard: int) -> None:
    """Raise ConfigurationError when the grid parameters are invalid."""
    is_valid, error_msg = validate_grid_params(horizon, steps, guard)
    if not is_valid:
        raise ConfigurationError(error_msg)


def ensure_variant_bound(variant: str, alpha: float, horizon: float) -> None:
    """Raise HypothesisError when alpha is outside the variant's admissible range."""
    is_valid, error_msg = validate_variant_bound(variant, alpha, horizon)
    if not is_valid:
        raise HypothesisError(error_msg)


def ensure_step_size(c: float, dt: float) -> None:
    """Raise StepSizeError when the implicit step would not contract."""
    is_valid, error_msg = validate_step_size(c, dt)
    if not is_valid:
        raise StepSizeError(error_msg)


def ensure_declared_constant(name: str, declared: Optional[float], exact: float) -> float:
    """
    Check a declared Lipschitz constant against the coefficient's own constant.

    Returns:
        The declared constant, or the exact one when none was declared

    Raises:
        ConfigurationError: If the declared constant is below the exact one
    """
    if declared is None:
        return exact
    if declared < 0:
        raise ConfigurationError(f"Declared Lipschitz constant for {name} must be non-negative")
    if declared + 1e-12 < exact:
        raise ConfigurationError(
            f"Declared Lipschitz constant {declared} for {name} is below its actual constant {exact:.6g}"
        )
    return declared
