"""Truncated radial kernels with normalized p-th moment."""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from .fields import FieldFunction, as_points
from .quadrature import QuadratureError, QuadratureSpec, SeminormResult, gauss_jacobi

DEGENERATE_GAP = 1e-9


def sphere_area(d: int) -> float:
    """Surface measure of the unit sphere in R^d (2 for d=1, 2*pi for d=2)."""
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


def kernel_normalization(d: int, p: float, beta: float) -> float:
    """Constant making the p-th moment of the kernel equal to one."""
    if d < 1:
        raise ValueError("dimension must be at least 1")
    if not p > 1:
        raise ValueError("p must exceed 1")
    if not 0 <= beta < d + p:
        raise ValueError(f"beta={beta} outside [0, d+p) = [0, {d + p})")
    return (d + p - beta) / sphere_area(d)


@dataclass(frozen=True)
class KernelSpec:
    """Parameters (d, p, beta, delta) of a kernel; ``c_norm`` is derived."""

    d: int
    p: float
    beta: float
    delta: float
    c_norm: float = field(init=False)

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError("only d in {1, 2, 3} is supported")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.beta > self.d + self.p - DEGENERATE_GAP:
            raise ValueError(f"beta={self.beta} too close to or beyond d+p={self.d + self.p}")
        object.__setattr__(self, "c_norm", kernel_normalization(self.d, self.p, self.beta))

    @property
    def excess(self) -> float:
        """The exponent d + p - beta."""
        return self.d + self.p - self.beta

    def with_delta(self, delta: float) -> "KernelSpec":
        return KernelSpec(self.d, self.p, self.beta, delta)


def kernel_eval(spec: KernelSpec, r):
    """Kernel value at distance ``r`` (inf at r=0 when beta > 0)."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("distance must be nonnegative")
    scale = spec.c_norm * spec.delta ** (-spec.excess)
    with np.errstate(divide="ignore"):
        core = np.where(r > 0, np.power(np.where(r > 0, r, 1.0), -spec.beta), np.inf if spec.beta > 0 else 1.0)
    out = np.where(r < spec.delta, scale * core, 0.0)
    return float(out) if out.ndim == 0 else out


def kernel_pth_moment(spec: KernelSpec, quad: QuadratureSpec | None = None) -> SeminormResult:
    """Integral of kernel(|z|) |z|^p over R^d, evaluated in polar form."""
    quad = quad or QuadratureSpec()
    # |z|^p r^(d-1) r^(-beta) becomes the Jacobi weight; the kernel times
    # r^beta is what remains to be sampled at the nodes
    expo = spec.excess - 1.0

    def radial(n):
        t, w = gauss_jacobi(n, expo)
        r = spec.delta * t
        g = kernel_eval(spec, r) * r**spec.beta
        return spec.delta ** (expo + 1.0) * math.fsum(w * g)

    area = sphere_area(spec.d)
    n_coarse = max(2, quad.order // 2)
    fine, coarse = area * radial(quad.order), area * radial(n_coarse)
    if not math.isfinite(fine):
        raise QuadratureError("moment quadrature did not produce a finite value")
    return SeminormResult(fine, abs(fine - coarse), quad.order + n_coarse)


def _sphere_rule(d: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Directions and weights averaging over the unit sphere (weights sum to 1)."""
    if d == 1:
        return np.array([[1.0], [-1.0]]), np.array([0.5, 0.5])
    if d == 2:
        th = 2.0 * math.pi * (np.arange(4 * n) + 0.5) / (4 * n)
        return np.stack([np.cos(th), np.sin(th)], axis=1), np.full(4 * n, 1.0 / (4 * n))
    from .quadrature import gauss_legendre

    z, wz = gauss_legendre(2 * n)
    z = 2.0 * z - 1.0
    th = 2.0 * math.pi * (np.arange(4 * n) + 0.5) / (4 * n)
    zz, tt = np.meshgrid(z, th, indexing="ij")
    s = np.sqrt(1.0 - zz**2)
    dirs = np.stack([zz.ravel(), (s * np.cos(tt)).ravel(), (s * np.sin(tt)).ravel()], axis=1)
    w = np.outer(wz, np.full(4 * n, 1.0 / (4 * n))).ravel()
    return dirs, w


def nonlocal_laplacian(spec: KernelSpec, u: FieldFunction, x, quad: QuadratureSpec | None = None) -> float:
    """The operator 2d * int_{B(x,delta)} kernel(|y-x|) (u(y)-u(x)) dy at one point.

    The radial variable carries the weight r^(d+1-beta) after dividing the
    spherical mean of the increment by r^2, so the singular factor never
    has to be sampled.
    """
    if spec.p != 2:
        raise ValueError("the diffusion normalization needs p = 2")
    quad = quad or QuadratureSpec()
    x = as_points(x, spec.d)[0]
    n = 2 * quad.order
    t, wt = gauss_jacobi(n, spec.d + 1.0 - spec.beta)
    r = spec.delta * t
    dirs, wd = _sphere_rule(spec.d, quad.order)
    ys = x[None, None, :] + r[:, None, None] * dirs[None, :, :]
    vals = u(ys.reshape(-1, spec.d)).reshape(r.size, -1)
    center = u(x[None, :])[0]
    mean_incr = (vals - center) @ wd / r**2
    radial = spec.delta ** (spec.d + 2.0 - spec.beta) * math.fsum(wt * mean_incr)
    return 2.0 * spec.d * spec.c_norm * sphere_area(spec.d) * spec.delta ** (-spec.excess) * radial
