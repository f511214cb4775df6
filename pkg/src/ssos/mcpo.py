"""Monte Carlo point optimization: sample w, minimize f(., w) locally, aggregate."""
from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, DivergenceError, ParameterError
from .noise import NoiseDistribution
from .poly import Polynomial, gradient

GRAD_TOL = 1e-8
MAX_ITER = 500
ARMIJO_C1 = 1e-4
BACKTRACK = 0.5
MAX_HALVINGS = 60
DIVERGENT_LIMIT = 0.2


def _bfgs(fun, grad, x0, gtol=GRAD_TOL, max_iter=MAX_ITER):
    x = np.array(x0, dtype=float)
    fx = fun(x)
    if not np.isfinite(fx):
        raise DivergenceError("objective is not finite at the starting point")
    g = grad(x)
    n = len(x)
    H = np.eye(n)
    for _ in range(max_iter):
        if n == 0 or np.max(np.abs(g)) <= gtol:
            break
        p = -H @ g
        slope = float(g @ p)
        if slope >= 0:
            H = np.eye(n)
            p, slope = -g, -float(g @ g)
        alpha = 1.0
        for _ in range(MAX_HALVINGS):
            x_new = x + alpha * p
            f_new = fun(x_new)
            if np.isnan(f_new) or f_new == -np.inf:
                # unbounded below along the search direction
                raise DivergenceError("objective became non-finite")
            if np.isfinite(f_new) and f_new <= fx + ARMIJO_C1 * alpha * slope:
                break
            alpha *= BACKTRACK
        else:
            # no acceptable step: we are at the floating-point floor
            break
        g_new = grad(x_new)
        if not np.all(np.isfinite(g_new)):
            raise DivergenceError("gradient became non-finite")
        s, y = x_new - x, g_new - g
        sy = float(s @ y)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            rho = 1.0 / sy
            Hy = H @ y
            H = H - rho * (np.outer(s, Hy) + np.outer(Hy, s)) + (rho * rho * float(y @ Hy) + rho) * np.outer(s, s)
        x, fx, g = x_new, f_new, g_new
    return x, float(fx)


class _Compiled:
    """f and its partial derivatives as one monomial table and coefficient matrix."""

    def __init__(self, f: Polynomial, grads: list):
        polys = [f, *grads]
        alphas = sorted({a for p in polys for a in p.terms})
        pos = {a: i for i, a in enumerate(alphas)}
        self.A = np.array(alphas, dtype=float).reshape(len(alphas), f.nvars)
        self.coef = np.zeros((len(polys), len(alphas)))
        for r, p in enumerate(polys):
            for a, c in p.terms.items():
                self.coef[r, pos[a]] = c
        self._last = None

    def _eval(self, x):
        if self._last is None or not np.array_equal(self._last[0], x):
            with np.errstate(over="ignore", invalid="ignore"):
                mons = np.prod(x[None, :] ** self.A, axis=1)
                self._last = (x.copy(), self.coef @ mons)
        return self._last[1]

    def value(self, x) -> float:
        return float(self._eval(x)[0])

    def grad(self, x) -> np.ndarray:
        return self._eval(x)[1:]


def local_minimize(f: Polynomial, omega, x0, fixed: dict | None = None, gtol: float = GRAD_TOL, max_iter: int = MAX_ITER):
    """BFGS on x -> f(x, omega) from ``x0``.

    Parameters
    ----------
    f : Polynomial
        Objective in x and w.
    omega : array_like
        Noise values substituted before minimizing.
    x0 : array_like
        Starting point of length ``f.n_x``.
    fixed : dict, optional
        ``{index: value}`` coordinates held constant; the rest are optimized.

    Returns
    -------
    x, fval : ndarray, float
    """
    g = f.fix_noise(omega) if f.n_w else f
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if len(x0) != g.n_x:
        raise DimensionError(f"start point has length {len(x0)}, expected {g.n_x}")
    if not np.all(np.isfinite(x0)):
        raise ParameterError("start point must be finite")
    fixed = dict(fixed or {})
    free = [i for i in range(g.n_x) if i not in fixed]
    base = x0.copy()
    for k, v in fixed.items():
        base[k] = v
    ev = _Compiled(g, gradient(g, free))

    def full(z):
        out = base.copy()
        out[free] = z
        return out

    def fun(z):
        return ev.value(full(z))

    def grad(z):
        return ev.grad(full(z))

    with np.errstate(over="ignore", invalid="ignore"):
        z, fval = _bfgs(fun, grad, base[free], gtol, max_iter)
    return full(z), fval


@dataclass
class McpoResult:
    """Aggregates over the non-divergent samples.

    ``samples`` holds ``(omega, x, fval)`` triples; ``I_hat`` is the mean of
    the recorded ``fval``; ``Sigma`` the unbiased empirical covariance of x.
    """

    I_hat: float
    mu: np.ndarray
    Sigma: np.ndarray
    T: int
    samples: list = field(repr=False, default_factory=list)
    n_divergent: int = 0

    @property
    def variances(self) -> np.ndarray:
        return np.diag(self.Sigma).copy()

    def std_error(self) -> float:
        vals = np.array([s[2] for s in self.samples])
        return float(np.std(vals, ddof=1) / np.sqrt(len(vals)))

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        if not self.samples:
            return ""
        d, n = len(self.samples[0][0]), len(self.samples[0][1])
        wr.writerow([f"omega_{j}" for j in range(d)] + [f"x_{i}" for i in range(n)] + ["f"])
        for w, x, fv in self.samples:
            wr.writerow([format(float(v), ".12g") for v in (*w, *x, fv)])
        return buf.getvalue()


def mcpo_run(
    f: Polynomial,
    dist: NoiseDistribution,
    T: int,
    seed=0,
    fixed: dict | None = None,
    workers: int = 1,
) -> McpoResult:
    """Draw T noise samples, minimize from x0 ~ Uniform(-1, 1)^n each time.

    Each sample owns an RNG stream spawned from ``seed`` so results do not
    depend on ``workers``.  More than 20% divergent solves raises
    :class:`DivergenceError`.
    """
    if T < 2:
        raise ParameterError("MCPO needs T >= 2")
    if dist.d != f.n_w:
        raise DimensionError(f"polynomial has {f.n_w} noise variables, distribution has {dist.d}")
    streams = np.random.SeedSequence(seed).spawn(T)

    def one(ss):
        rng = np.random.default_rng(ss)
        w = dist.sample(rng)
        x0 = rng.uniform(-1.0, 1.0, size=f.n_x)
        try:
            x, fv = local_minimize(f, w, x0, fixed)
        except DivergenceError:
            return w, None, None
        if not (np.isfinite(fv) and np.all(np.isfinite(x))):
            return w, None, None
        return w, x, fv

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            out = list(ex.map(one, streams))
    else:
        out = [one(ss) for ss in streams]
    samples = [(w, x, fv) for w, x, fv in out if x is not None]
    n_bad = T - len(samples)
    if n_bad > DIVERGENT_LIMIT * T:
        raise DivergenceError(f"{n_bad} of {T} local solves diverged")
    xs = np.array([s[1] for s in samples])
    fvals = np.array([s[2] for s in samples])
    mu = xs.mean(axis=0)
    if len(samples) > 1:
        Sigma = np.atleast_2d(np.cov(xs, rowvar=False, ddof=1))
    else:
        Sigma = np.zeros((f.n_x, f.n_x))
    return McpoResult(float(fvals.mean()), mu, Sigma, T, samples, n_bad)
