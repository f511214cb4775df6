"""Noise laws with closed-form moments, and Gauss-Legendre quadrature."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import DimensionError, ParameterError
from .poly import Polynomial


@dataclass(frozen=True)
class NoiseDistribution:
    """Product law on R^d: each coordinate Uniform(-1, 1) or Normal(0, sigma^2).

    Gaussian noise has unbounded support, so the compact-domain convergence
    theory does not cover it; the moments are still finite and usable.
    ``sigma = 0`` gives a point mass at the origin.
    """

    kind: str = "uniform"
    d: int = 1
    sigma: tuple = ()

    def __post_init__(self):
        if self.kind not in ("uniform", "gaussian"):
            raise ParameterError(f"unknown noise kind {self.kind!r}")
        if self.d < 0:
            raise ParameterError("noise dimension must be non-negative")
        if self.kind == "gaussian":
            sig = np.atleast_1d(np.asarray(self.sigma, float))
            sig = np.broadcast_to(sig if sig.size else np.ones(1), (self.d,))
            if np.any(sig < 0):
                raise ParameterError("sigma must be non-negative")
            object.__setattr__(self, "sigma", tuple(float(v) for v in sig))
        else:
            object.__setattr__(self, "sigma", ())

    @classmethod
    def uniform(cls, d: int = 1) -> "NoiseDistribution":
        return cls("uniform", d)

    @classmethod
    def gaussian(cls, d: int = 1, sigma=1.0) -> "NoiseDistribution":
        return cls("gaussian", d, tuple(np.broadcast_to(np.asarray(sigma, float), (d,))))

    @classmethod
    def parse(cls, spec: str, d: int = 1) -> "NoiseDistribution":
        """Parse ``uniform`` or ``gaussian:SIGMA``."""
        spec = spec.strip()
        if spec == "uniform":
            return cls.uniform(d)
        if spec.startswith("gaussian"):
            _, _, sig = spec.partition(":")
            return cls.gaussian(d, float(sig) if sig else 1.0)
        raise ParameterError(f"cannot parse noise spec {spec!r}")

    def label(self) -> str:
        if self.kind == "uniform":
            return "uniform"
        return "gaussian:" + format(self.sigma[0] if self.sigma else 1.0, "g")

    def univariate_moment(self, k: int, coord: int = 0) -> float:
        if k < 0:
            raise ParameterError("moment order must be non-negative")
        if k % 2:
            return 0.0
        if self.kind == "uniform":
            return 1.0 / (k + 1)
        sig = self.sigma[coord]
        dfact = 1.0
        for j in range(k - 1, 0, -2):
            dfact *= j
        return sig**k * dfact

    def sample(self, rng: np.random.Generator, size=None) -> np.ndarray:
        shape = (self.d,) if size is None else (size, self.d)
        if self.kind == "uniform":
            return rng.uniform(-1.0, 1.0, size=shape)
        return rng.standard_normal(shape) * np.asarray(self.sigma)


def moment(dist: NoiseDistribution, alpha) -> float:
    """E[w^alpha] for a multi-index over the noise coordinates only."""
    alpha = tuple(alpha)
    if len(alpha) != dist.d:
        raise DimensionError(f"noise multi-index has length {len(alpha)}, expected {dist.d}")
    out = 1.0
    for j, k in enumerate(alpha):
        out *= dist.univariate_moment(k, j)
        if out == 0.0:
            break
    return out


@dataclass(frozen=True)
class Quadrature:
    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, func) -> float:
        """Integral over [-1, 1] of a vectorized callable."""
        return float(np.dot(self.weights, func(self.nodes)))


def gauss_legendre(k: int) -> Quadrature:
    """k-point Gauss-Legendre rule on [-1, 1], exact through degree 2k - 1.

    Nodes come from Newton's method on the three-term Legendre recurrence,
    seeded with Chebyshev-like guesses and refined to 1e-15.
    """
    if int(k) != k or k < 1:
        raise ParameterError("number of quadrature points must be a positive integer")
    k = int(k)
    i = np.arange(1, k + 1)
    x = np.cos(np.pi * (i - 0.25) / (k + 0.5))
    for _ in range(100):
        p0, p1 = np.ones_like(x), x.copy()
        for n in range(2, k + 1):
            p0, p1 = p1, ((2 * n - 1) * x * p1 - (n - 1) * p0) / n
        dp = k * (x * p1 - p0) / (x**2 - 1)
        dx = p1 / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    p0, p1 = np.ones_like(x), x.copy()
    for n in range(2, k + 1):
        p0, p1 = p1, ((2 * n - 1) * x * p1 - (n - 1) * p0) / n
    dp = k * (x * p1 - p0) / (x**2 - 1)
    w = 2.0 / ((1 - x**2) * dp**2)
    order = np.argsort(x)
    x, w = x[order], w[order]
    # enforce exact symmetry
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    return Quadrature(x, w)


def expected_value(c: Polynomial, dist: NoiseDistribution) -> float:
    """E_nu[c(w)] computed exactly from closed-form moments."""
    if c.n_w != dist.d:
        raise DimensionError(f"polynomial has {c.n_w} noise variables, distribution has {dist.d}")
    if c.depends_on_x():
        raise DimensionError("expected_value needs a polynomial in the noise variables only")
    return float(sum(coef * moment(dist, a[c.n_x :]) for a, coef in c.items()))


def quadrature_expectation(c: Polynomial, k: int) -> float:
    """E[c(w)] under Uniform(-1, 1)^d using a tensor Gauss-Legendre grid."""
    if c.depends_on_x():
        raise DimensionError("quadrature_expectation needs a polynomial in the noise variables only")
    q = gauss_legendre(k)
    d = c.n_w
    total = 0.0
    for idx in product(range(k), repeat=d):
        pt = np.concatenate([np.zeros(c.n_x), q.nodes[list(idx)]])
        total += np.prod(q.weights[list(idx)]) * c(pt)
    return total / 2.0**d
