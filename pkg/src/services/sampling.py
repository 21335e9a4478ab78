"""
Seeded polynomial functionals of W and B for the randomized suites.
"""
from typing import Optional

import numpy as np

from src.models.fields import IntervalProcess, NoiseModel, Orientation, RandomField
from src.models.solutions import TerminalField
from src.services.norms_estimates import LinearData


def make_rng(seed: int, stream: Optional[int] = None) -> np.random.Generator:
    """Generator for ``seed``; distinct streams give independent draws from one seed."""
    if stream is None:
        return np.random.default_rng(seed)
    return np.random.default_rng([seed, stream])


def _poly(rng: np.random.Generator, base: RandomField, degree: int = 2) -> RandomField:
    """Random polynomial of degree <= ``degree`` in ``base``."""
    coeffs = rng.normal(size=degree + 1)
    result = base * 0.0 + coeffs[0]
    power = base
    for c in coeffs[1:]:
        result = result + power * c
        power = power * base
    return result


def w_functional(noise: NoiseModel, rng: np.random.Generator, terms: int = 3) -> RandomField:
    """Sum of random polynomials in W at random nodes (a W-path functional)."""
    total = noise.constant(rng.normal())
    for _ in range(terms):
        j = int(rng.integers(1, noise.n + 1))
        total = total + _poly(rng, noise.wiener(j))
    return total


def b_functional(noise: NoiseModel, rng: np.random.Generator, terms: int = 3) -> RandomField:
    """Sum of random polynomials in B_T - B_{t_j} (a B-path functional)."""
    total = noise.constant(rng.normal())
    for _ in range(terms):
        j = int(rng.integers(0, noise.n))
        total = total + _poly(rng, noise.brownian_tail(j))
    return total


def backward_integrand(noise: NoiseModel, rng: np.random.Generator) -> IntervalProcess:
    """h_i mixing W_T with B_T - B_{t_{i+1}}; never depends on eta_1..eta_{i+1}."""
    a, b, c, d = rng.normal(size=4)
    w_t = noise.wiener(noise.n)
    entries = tuple(
        noise.constant(a) + noise.brownian_tail(i + 1) * b + w_t * c + w_t * noise.brownian_tail(i + 1) * d
        for i in range(noise.n)
    )
    return IntervalProcess(entries, Orientation.BACKWARD)


def forward_integrand(noise: NoiseModel, rng: np.random.Generator) -> IntervalProcess:
    """h_i mixing W_{t_i} with B_T; never depends on eps_{i+1}.."""
    a, b, c, d = rng.normal(size=4)
    b_t = noise.brownian(noise.n)
    entries = tuple(
        noise.constant(a) + noise.wiener(i) * b + noise.wiener(i) * noise.wiener(i) * c + b_t * d
        for i in range(noise.n)
    )
    return IntervalProcess(entries, Orientation.FORWARD)


def adapted_path(noise: NoiseModel, rng: np.random.Generator):
    """Y_k measurable at (k, k) for k = 0..N."""
    a, b, c, d, e = rng.normal(size=5)
    path = []
    for k in range(noise.n + 1):
        w, tail = noise.wiener(k), noise.brownian_tail(k)
        path.append(noise.constant(a) + w * b + w * w * c + tail * d + w * tail * e)
    return tuple(path)


def row_fields(noise: NoiseModel, rng: np.random.Generator):
    """Row fields r(k, i) at level (i, i), returned as a callable."""
    a, b, c, d = rng.normal(size=4)

    def rows(k: int, i: int) -> RandomField:
        t_k = noise.grid.t(k)
        return noise.constant(a + d * t_k) + noise.wiener(i) * b + noise.brownian_tail(i) * c

    return rows


def linear_data(noise: NoiseModel, rng: np.random.Generator) -> LinearData:
    """
    psi_k = p_k + q_k W_{t_k}, f(k, i) = a + b W_{t_i}, g(k, i) = c + d (B_T - B_{t_{i+1}}).

    psi_k is measurable with respect to the W-history up to t_k, the class on
    which the linear a-priori bound holds with its stated constants.
    """
    p = rng.normal(size=noise.n + 1)
    q = rng.normal(size=noise.n + 1)
    a, b, c, d = rng.normal(size=4)
    psi = TerminalField(tuple(noise.wiener(k) * q[k] + p[k] for k in range(noise.n + 1)))

    def f_rows(k: int, i: int) -> RandomField:
        return noise.wiener(i) * b + a

    def g_rows(k: int, i: int) -> RandomField:
        return noise.brownian_tail(i + 1) * d + c

    return LinearData(psi=psi, f_rows=f_rows, g_rows=g_rows)
