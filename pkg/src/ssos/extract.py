"""Reading answers off solved S-SOS problems.

Moments and uncertainty from the dual moment matrix, the polynomial lower
bound c(w) from the primal, a piecewise-constant bound built from pointwise
SOS problems, gap curves across hierarchy levels, and the Mahalanobis metric.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .basis import MonomialBasis, lasserre_basis
from .errors import DimensionError, ExtractionError, ParameterError
from .noise import NoiseDistribution, gauss_legendre
from .poly import Polynomial
from .sdp import SdpProblem, assemble_dual, assemble_primal
from .solver import SdpSolution, SolverOptions, solve

VARIANCE_FLOOR = 1e-10


@dataclass
class MomentSummary:
    means: np.ndarray
    variances: np.ndarray
    second_moments: np.ndarray
    covariance: np.ndarray = field(repr=False, default=None)


@dataclass
class LowerBoundFn:
    """Either a polynomial c(w) or a step function on a grid.

    The step function takes ``values[i]`` on ``[grid[i], grid[i+1])``; the
    last value also covers the right endpoint.
    """

    poly: Polynomial | None = None
    grid: np.ndarray | None = None
    values: np.ndarray | None = None

    def __post_init__(self):
        if self.poly is None:
            g = np.asarray(self.grid, dtype=float)
            if g.ndim != 1 or len(g) < 2 or np.any(np.diff(g) <= 0):
                raise ParameterError("piecewise grid must be strictly increasing with at least two points")
            self.grid = g
            self.values = np.asarray(self.values, dtype=float)
            if self.values.shape != g.shape:
                raise ParameterError("one value per grid point is required")

    @property
    def is_piecewise(self) -> bool:
        return self.poly is None

    def __call__(self, omega):
        w = np.atleast_1d(np.asarray(omega, dtype=float))
        if self.poly is not None:
            pts = np.column_stack([np.zeros((len(w), self.poly.n_x)), w.reshape(len(w), -1)])
            out = self.poly.evaluate_many(pts)
        else:
            idx = np.clip(np.searchsorted(self.grid, w, side="right") - 1, 0, len(self.grid) - 1)
            out = self.values[idx]
        return out if np.ndim(omega) else float(out[0])

    def to_csv(self, omegas) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["omega", "c_lower"])
        for w, c in zip(omegas, self(np.asarray(omegas))):
            wr.writerow([format(float(w), ".12g"), format(float(c), ".12g")])
        return buf.getvalue()


def _moment_block(sol: SdpSolution, basis: MonomialBasis) -> np.ndarray:
    M = np.asarray(sol.X[0])
    if M.shape != (len(basis), len(basis)):
        raise ExtractionError("first solution block is not a moment matrix over this basis")
    return M


def extract_moments(sol: SdpSolution, basis: MonomialBasis, pinned: dict | None = None) -> MomentSummary:
    """E[x_i] and Var[x_i] from row 0 of the moment matrix.

    Variances use the entry for x_i^2 when the basis holds it, otherwise the
    diagonal entry M[x_i, x_i]; tiny negative values are clamped to zero.
    ``pinned`` maps variables eliminated by hard constraints to their values;
    those get that mean and zero variance.
    """
    if not sol.optimal:
        raise ExtractionError(f"solution status is {sol.status!r}")
    M = _moment_block(sol, basis)
    pinned = dict(pinned or {})
    n_x, nv = basis.n_x, basis.nvars
    free = [i for i in range(n_x) if i not in pinned]
    lin = []
    for i in free:
        e = tuple(1 if v == i else 0 for v in range(nv))
        if e not in basis:
            raise ExtractionError(f"basis lacks the monomial x_{i}")
        lin.append(basis.index(e))
    means = np.empty(n_x)
    second = np.empty(n_x)
    means[free] = M[0, lin]
    for i, li in zip(free, lin):
        sq = tuple(2 if v == i else 0 for v in range(nv))
        second[i] = M[0, basis.index(sq)] if sq in basis else M[li, li]
    for i, v in pinned.items():
        means[i], second[i] = v, v * v
    var = np.maximum(second - means**2, 0.0)
    for i in pinned:
        var[i] = 0.0
    # E[x_i x_j] = v E[x_j] whenever x_i is pinned to v
    cross = np.outer(means, means)
    cross[np.ix_(free, free)] = M[np.ix_(lin, lin)]
    cov = cross - np.outer(means, means)
    return MomentSummary(means, var, second, cov)


def extract_lower_bound(sol: SdpSolution, problem: SdpProblem) -> LowerBoundFn:
    """Recombine c = u - v from the free-variable blocks of a primal problem."""
    meta = problem.meta
    if meta.get("kind") != "primal":
        raise ExtractionError("lower bound needs a primal S-SOS problem")
    if not sol.optimal:
        raise ExtractionError(f"solution status is {sol.status!r}")
    u, v = np.asarray(sol.X[1]), np.asarray(sol.X[2])
    terms = {a: float(u[k] - v[k]) for k, a in enumerate(meta["c_monomials"])}
    return LowerBoundFn(poly=Polynomial(meta["n_x"], meta["n_w"], terms))


def sos_lower_bound(g: Polynomial, s: int, opts: SolverOptions | None = None) -> float:
    """Largest gamma with g - gamma SOS over the degree-s monomial basis (x only)."""
    if g.n_w:
        raise DimensionError("sos_lower_bound expects a polynomial in x only")
    basis = lasserre_basis(g.n_x, 0, s)
    prob = assemble_primal(g, basis, 0, NoiseDistribution.uniform(0))
    sol = solve(prob, opts)
    if not sol.optimal:
        raise ExtractionError(f"SOS bound solve ended with status {sol.status!r}")
    return sol.value


def piecewise_lower_bound(
    f: Polynomial,
    interval: Sequence[float],
    s_p: int,
    s: int,
    opts: SolverOptions | None = None,
) -> LowerBoundFn:
    """Step-function bound from ``s_p`` equispaced pointwise SOS problems in x."""
    if f.n_w != 1:
        raise DimensionError("piecewise bound needs exactly one noise variable")
    if s_p < 2:
        raise ParameterError("need at least two grid points")
    lo, hi = map(float, interval)
    grid = np.linspace(lo, hi, s_p)
    vals = np.empty(s_p)
    for i, w in enumerate(grid):
        try:
            vals[i] = sos_lower_bound(f.fix_noise([w]), s, opts)
        except ExtractionError as exc:
            raise ExtractionError(f"pointwise SOS problem failed at omega={w:.6g}: {exc}") from exc
    return LowerBoundFn(grid=grid, values=vals)


def mahalanobis(truth, means, variances, floor: float = VARIANCE_FLOOR) -> float:
    """sqrt(sum_i (truth_i - mu_i)^2 / max(var_i, floor)), diagonal covariance."""
    t = np.asarray(truth, dtype=float).reshape(-1)
    m = np.asarray(means, dtype=float).reshape(-1)
    v = np.asarray(variances, dtype=float).reshape(-1)
    if not (len(t) == len(m) == len(v)):
        raise DimensionError("truth, means and variances must have equal length")
    if np.any(v < 0):
        raise ParameterError("variances must be non-negative")
    return float(np.sqrt(np.sum((t - m) ** 2 / np.maximum(v, floor))))


def reference_value(c_star: Callable, dist: NoiseDistribution, k: int = 200) -> float:
    """E_nu[c*(w)] for d = 1 by dense Gauss quadrature (Legendre or Hermite)."""
    if dist.d != 1:
        raise DimensionError("reference_value supports one noise variable")
    if dist.kind == "uniform":
        q = gauss_legendre(k)
        return 0.5 * float(np.dot(q.weights, c_star(q.nodes)))
    nodes, weights = np.polynomial.hermite_e.hermegauss(k)
    sig = dist.sigma[0]
    return float(np.dot(weights, c_star(sig * nodes)) / np.sqrt(2 * np.pi))


@dataclass
class ConvergenceRow:
    s: int
    p_star_2s: float
    gap: float
    d_star_2s: float = float("nan")


def convergence_study(
    f: Polynomial,
    dist: NoiseDistribution,
    degrees: Sequence[int],
    p_star: float | None = None,
    c_star: Callable | None = None,
    opts: SolverOptions | None = None,
    with_dual: bool = True,
) -> list:
    """Solve the degree-2s primal (and dual) for each s and report p* - p*_2s.

    Either ``p_star`` or a vectorized ``c_star`` (integrated by quadrature) is
    required.  Raises if a solve fails or the gaps increase by more than 1e-7.
    """
    if p_star is None:
        if c_star is None:
            raise ParameterError("supply p_star or c_star")
        p_star = reference_value(c_star, dist)
    rows = []
    for s in degrees:
        basis = lasserre_basis(f.n_x, f.n_w, s)
        psol = solve(assemble_primal(f, basis, 2 * s, dist), opts)
        if not psol.optimal:
            raise ExtractionError(f"primal solve at s={s} ended with status {psol.status!r}")
        dval = float("nan")
        if with_dual:
            dsol = solve(assemble_dual(f, basis, dist), opts)
            if not dsol.optimal:
                raise ExtractionError(f"dual solve at s={s} ended with status {dsol.status!r}")
            dval = dsol.value
        rows.append(ConvergenceRow(s, psol.value, p_star - psol.value, dval))
    ordered = sorted(rows, key=lambda r: r.s)
    for a, b in zip(ordered, ordered[1:]):
        if b.gap > a.gap + 1e-7:
            raise ExtractionError(f"gap increased from s={a.s} to s={b.s}")
    return rows


def convergence_csv(rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["s", "p_star_2s", "gap"])
    for r in rows:
        wr.writerow([r.s, format(r.p_star_2s, ".12g"), format(r.gap, ".6e")])
    return buf.getvalue()


def robust_sigma(values) -> float:
    """Half the spread between the 16th and 84th percentiles."""
    v = np.asarray(values, dtype=float)
    lo, hi = np.percentile(v, [16, 84])
    return 0.5 * float(hi - lo)
