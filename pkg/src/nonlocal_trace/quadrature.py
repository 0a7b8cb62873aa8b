"""Quadrature primitives shared by the integral operations.

Deterministic rules (Gauss-Legendre, Gauss-Jacobi) are cached per order;
quasi-Monte Carlo samples come from scrambled Sobol sequences whose seeds are
derived from a single ``numpy.random.SeedSequence`` so results are
reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
import math

import numpy as np
from scipy.special import roots_jacobi, roots_legendre
from scipy.stats import qmc


class QuadratureError(RuntimeError):
    """Raised when a quadrature cannot certify its result."""


@dataclass(frozen=True)
class QuadratureSpec:
    """Resolution knobs for every integral in the package.

    Attributes
    ----------
    order : int
        Gauss points per axis per cell.
    depth : int
        Each smooth interval is split into ``2**depth`` cells.
    split_radius : float
        Fraction of the horizon at which the radial integration is split.
    mc_samples : int
        Sobol points per replicate for the four dimensional integrals.
    seed : int
        Root seed of the scrambling.
    replicates : int
        Independent scramblings used for the error estimate.
    """

    order: int = 8
    depth: int = 3
    split_radius: float = 0.25
    mc_samples: int = 2**13
    seed: int = 0
    replicates: int = 8

    def __post_init__(self):
        if self.order < 2:
            raise ValueError("order must be at least 2")
        if self.depth < 0:
            raise ValueError("depth must be nonnegative")
        if not 0.0 < self.split_radius < 1.0:
            raise ValueError("split_radius must lie in (0, 1)")
        if self.mc_samples < 16:
            raise ValueError("mc_samples must be at least 16")
        if self.replicates < 2:
            raise ValueError("replicates must be at least 2")

    def coarser(self) -> "QuadratureSpec":
        """Companion resolution used to estimate the discretization error."""
        return replace(self, order=max(2, self.order - self.order // 4), depth=max(0, self.depth - 1))

    def refined(self) -> "QuadratureSpec":
        return replace(self, order=self.order * 2, depth=self.depth + 1, mc_samples=self.mc_samples * 2)


@dataclass(frozen=True)
class SeminormResult:
    """Value of an integral quantity with its error estimate."""

    value: float
    err_est: float
    n_evals: int

    def __post_init__(self):
        if not self.err_est >= 0:
            raise ValueError("err_est must be nonnegative")


def root_of_power(res: SeminormResult, p: float) -> SeminormResult:
    """Turn a result for ``I`` into one for ``I**(1/p)`` (first order error)."""
    value = max(res.value, 0.0) ** (1.0 / p)
    if res.value > 0:
        err = value * res.err_est / (p * res.value)
    else:
        err = res.err_est ** (1.0 / p)
    return SeminormResult(value, err, res.n_evals)


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the n-point rule on (0, 1)."""
    x, w = roots_legendre(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def gauss_jacobi(n: int, expo: float) -> tuple[np.ndarray, np.ndarray]:
    """Rule for ``int_0^1 t**expo f(t) dt`` with ``expo > -1``."""
    if expo <= -1.0:
        raise QuadratureError(f"weight exponent {expo} is not integrable")
    if abs(expo) < 1e-14:
        return gauss_legendre(n)
    x, w = roots_jacobi(n, 0.0, expo)
    return 0.5 * (x + 1.0), w * 0.5 ** (expo + 1.0)


def composite_legendre(breaks, order: int, depth: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite rule over consecutive intervals given by sorted ``breaks``."""
    breaks = np.asarray(breaks, dtype=float)
    if breaks.size < 2:
        return np.empty(0), np.empty(0)
    nodes, weights = gauss_legendre(order)
    sub = 2**depth
    a = breaks[:-1]
    h = np.diff(breaks)
    keep = h > 0
    a, h = a[keep], h[keep]
    cell_a = (a[:, None] + h[:, None] * np.arange(sub)[None, :] / sub).ravel()
    cell_h = np.repeat(h / sub, sub)
    x = (cell_a[:, None] + cell_h[:, None] * nodes[None, :]).ravel()
    w = (cell_h[:, None] * weights[None, :]).ravel()
    return x, w


def sobol_replicates(dim: int, n: int, replicates: int, seed: int, stream: int = 0) -> list[np.ndarray]:
    """Independent scrambled Sobol point sets in [0,1)^dim.

    ``stream`` separates sample sets of different sub-integrals so that they
    are not correlated with each other.
    """
    m = int(math.ceil(math.log2(max(n, 2))))
    children = np.random.SeedSequence([seed, stream]).spawn(replicates)
    out = []
    for child in children:
        engine = qmc.Sobol(dim, scramble=True, seed=np.random.default_rng(child))
        out.append(engine.random_base2(m))
    return out


def replicate_mean(values) -> tuple[float, float]:
    """Mean and standard error of per-replicate estimates."""
    values = np.asarray(values, dtype=float)
    mean = math.fsum(values) / values.size
    if values.size < 2:
        return mean, 0.0
    var = math.fsum((values - mean) ** 2) / (values.size - 1)
    return mean, math.sqrt(var / values.size)
