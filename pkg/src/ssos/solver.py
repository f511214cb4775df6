"""Primal-dual interior-point solver for block-diagonal standard-form SDPs.

Infeasible path-following with Nesterov-Todd scaling and a Mehrotra
predictor-corrector step.  Dense linear algebra per block; the Schur
complement is assembled from the sparse constraint matrices.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import ParameterError
from .sdp import SdpProblem

log = logging.getLogger(__name__)

__all__ = ["SolverOptions", "SdpSolution", "solve", "kkt_residuals"]

#: Rounds of iterative refinement of each step against A(dX) = rp.
REFINE_ROUNDS = 6
#: A stalled run whose best iterate is within this factor of every tolerance
#: is reported as "near_optimal" rather than "max_iter".
NEAR_OPTIMAL_FACTOR = 100.0


@dataclass(frozen=True)
class SolverOptions:
    tol_gap: float = 1e-8
    tol_feas: float = 1e-8
    max_iter: int = 200
    verbose: bool = False
    step_fraction: float = 0.98

    def __post_init__(self):
        if self.tol_gap <= 0 or self.tol_feas <= 0:
            raise ParameterError("tolerances must be positive")
        if self.max_iter < 1:
            raise ParameterError("max_iter must be at least 1")


@dataclass
class SdpSolution:
    """Iterates and diagnostics.  Diagonal blocks are stored as 1-D vectors.

    ``status`` is "optimal", "near_optimal" (stalled within 100x of the
    tolerances, the usual fate of rank-deficient optima), "max_iter" or
    "infeasible-suspect"; ``optimal`` accepts the first two.

    ``objective_primal`` and ``objective_dual`` are the standard-form values
    <C, X> and b^T y; ``value`` applies the problem's sense so that it equals
    the modelled objective (e.g. E[c] for a primal S-SOS problem).
    """

    status: str
    X: list
    y: np.ndarray
    Z: list
    objective_primal: float
    objective_dual: float
    iterations: int
    sense: int = 1
    residuals: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status in ("optimal", "near_optimal")

    @property
    def value(self) -> float:
        return self.sense * self.objective_primal

    @property
    def value_dual(self) -> float:
        return self.sense * self.objective_dual


class _Operators:
    """Per-block sparse views of the constraint data."""

    def __init__(self, p: SdpProblem):
        self.m = p.m
        self.sizes = [abs(n) for n in p.block_sizes]
        self.diag = [n < 0 for n in p.block_sizes]
        e = p.entries
        self.A = []
        self.C = []
        for k, n in enumerate(self.sizes):
            sel = e[:, 1] == k
            ek = e[sel]
            obj = ek[ek[:, 0] == 0]
            con = ek[ek[:, 0] > 0]
            i = con[:, 0].astype(int) - 1
            r, c, v = con[:, 2].astype(int), con[:, 3].astype(int), con[:, 4]
            if self.diag[k]:
                self.A.append(sp.csr_matrix((v, (i, r)), shape=(self.m, n)))
                cvec = np.zeros(n)
                cvec[obj[:, 2].astype(int)] = obj[:, 4]
                self.C.append(cvec)
            else:
                off = r != c
                rows = np.concatenate([i, i[off]])
                cols = np.concatenate([r * n + c, c[off] * n + r[off]])
                vals = np.concatenate([v, v[off]])
                self.A.append(sp.csr_matrix((vals, (rows, cols)), shape=(self.m, n * n)))
                C = np.zeros((n, n))
                orow, ocol = obj[:, 2].astype(int), obj[:, 3].astype(int)
                C[orow, ocol] = obj[:, 4]
                C[ocol, orow] = obj[:, 4]
                self.C.append(C)
        self.b = p.b.copy()

    def apply(self, X) -> np.ndarray:
        out = np.zeros(self.m)
        for k, Xk in enumerate(X):
            out += self.A[k] @ Xk.reshape(-1)
        return out

    def adjoint(self, y) -> list:
        out = []
        for k, n in enumerate(self.sizes):
            v = self.A[k].T @ y
            out.append(v if self.diag[k] else v.reshape(n, n))
        return out

    def schur(self, W) -> np.ndarray:
        """sum_k A_k (W_k kron W_k) A_k^T, with diagonal blocks using elementwise W."""
        S = np.zeros((self.m, self.m))
        for k, n in enumerate(self.sizes):
            A = self.A[k]
            if A.nnz == 0:
                continue
            if self.diag[k]:
                S += (A.multiply(W[k][None, :]) @ A.T).toarray()
                continue
            Wk = W[k]
            coo = A.tocoo()
            order = np.lexsort((coo.col, coo.row))
            rows, cols, vals = coo.row[order], coo.col[order], coo.data[order]
            p_idx, q_idx = cols // n, cols % n
            chunk = max(1, int(4e6 // (n * n)))
            for s0 in range(0, len(vals), chunk):
                sl = slice(s0, s0 + chunk)
                E = (vals[sl, None, None] * Wk[:, p_idx[sl]].T[:, :, None] * Wk[q_idx[sl], :][:, None, :]).reshape(-1, n * n)
                urows, local = np.unique(rows[sl], return_inverse=True)
                inc = sp.csr_matrix((np.ones(len(local)), (local, np.arange(len(local)))), shape=(len(urows), len(local)))
                G = inc @ E  # vec(W A_i W) for the constraints touched by this chunk
                S[urows, :] += (A @ G.T).T
        return 0.5 * (S + S.T)


def _inner(X, Z) -> float:
    return float(sum(np.sum(a * b) for a, b in zip(X, Z)))


def _nt_scaling(X, Z, diag):
    """Return (G, Ginv, lam) per block with G^T Z G = G^{-1} X G^{-T} = diag(lam)."""
    out = []
    for Xk, Zk, dk in zip(X, Z, diag):
        if dk:
            g = (Xk / Zk) ** 0.25
            out.append((g, 1.0 / g, np.sqrt(Xk * Zk)))
            continue
        L = np.linalg.cholesky(Xk)
        R = np.linalg.cholesky(Zk)
        U, sv, Vt = np.linalg.svd(R.T @ L)
        isq = 1.0 / np.sqrt(sv)
        G = (L @ Vt.T) * isq[None, :]
        Ginv = (np.sqrt(sv)[:, None] * Vt) @ sla.solve_triangular(L, np.eye(len(sv)), lower=True)
        out.append((G, Ginv, sv))
    return out


def _max_step(lam, dtil, dk) -> float:
    """Largest a with diag(lam) + a * dtil PSD (inf if unbounded)."""
    if dk:
        ratio = dtil / lam
    else:
        s = 1.0 / np.sqrt(lam)
        ratio = np.linalg.eigvalsh(s[:, None] * dtil * s[None, :])
    mn = float(np.min(ratio)) if len(ratio) else 0.0
    return np.inf if mn >= 0 else -1.0 / mn


def _sym(M):
    return 0.5 * (M + M.T)


def solve(p: SdpProblem, opts: SolverOptions | None = None) -> SdpSolution:
    """Solve ``min <C,X> s.t. <A_i,X> = b_i, X PSD`` and its dual ``max b^T y, Z = C - A^T y PSD``."""
    opts = opts or SolverOptions()
    ops = _Operators(p)
    m, sizes, diag = ops.m, ops.sizes, ops.diag
    nu = float(sum(sizes))

    cmax = max((float(np.max(np.abs(C))) if C.size else 0.0) for C in ops.C) if ops.C else 0.0
    bmax = float(np.max(np.abs(ops.b))) if m else 0.0
    tau = 1.0 + max(bmax, cmax)
    X = [np.full(n, tau) if dk else tau * np.eye(n) for n, dk in zip(sizes, diag)]
    Z = [x.copy() for x in X]
    y = np.zeros(m)

    status = "max_iter"
    it = 0
    best = (np.inf, X, y, Z, 0)
    for it in range(1, opts.max_iter + 1):
        AX = ops.apply(X)
        ATy = ops.adjoint(y)
        rp = ops.b - AX
        Rd = [C - Zk - Ak for C, Zk, Ak in zip(ops.C, Z, ATy)]
        pobj = _inner(ops.C, X)
        dobj = float(ops.b @ y)
        xz = _inner(X, Z)
        pres = float(np.max(np.abs(rp) / (1.0 + np.abs(ops.b)))) if m else 0.0
        dres = max((float(np.max(np.abs(R))) if R.size else 0.0) for R in Rd) / (1.0 + cmax)
        gap = max(abs(pobj - dobj), xz) / (1.0 + abs(pobj))
        if opts.verbose:
            log.info("it %3d pobj %+.10e dobj %+.10e pres %.2e dres %.2e gap %.2e", it, pobj, dobj, pres, dres, gap)
        if pres <= opts.tol_feas and dres <= opts.tol_feas and gap <= opts.tol_gap:
            status = "optimal"
            it -= 1
            break
        merit = max(pres / opts.tol_feas, dres / opts.tol_feas, gap / opts.tol_gap)
        if merit < best[0]:
            best = (merit, X, y, Z, it)
        elif it - best[4] > 20:
            log.debug("no progress for 20 iterations, stopping")
            break
        big = max(max(float(np.max(np.abs(Xk))) for Xk in X), max(float(np.max(np.abs(Zk))) for Zk in Z))
        if big > 1e12 * tau:
            status = "infeasible-suspect"
            break

        try:
            scal = _nt_scaling(X, Z, diag)
        except np.linalg.LinAlgError:
            status = "max_iter"
            break
        # for diagonal blocks Wm holds the elementwise multiplier of W . W, i.e. x / z
        Wm = [(g**4) if dk else g @ g.T for (g, _, _), dk in zip(scal, diag)]
        S = ops.schur(Wm)
        factor = None
        for ridge in (0.0, 1e-12 * max(1.0, float(np.max(np.diag(S))) if m else 1.0)):
            try:
                factor = sla.cho_factor(S + ridge * np.eye(m), lower=True, check_finite=False)
                break
            except (np.linalg.LinAlgError, sla.LinAlgError):
                continue
        if factor is None and m:
            status = "max_iter"
            break

        WRdW = [(W * R) if dk else W @ R @ W for W, R, dk in zip(Wm, Rd, diag)]
        mu = xz / nu

        def direction(Rc):
            # Rc is the right-hand side of lam o (dX~ + dZ~) = Rc in scaled space
            GRG = []
            for (G, _, lam), R, dk in zip(scal, Rc, diag):
                if dk:
                    GRG.append(G * G * (R / lam))
                else:
                    Rt = 2.0 * R / (lam[:, None] + lam[None, :])
                    GRG.append(G @ Rt @ G.T)
            rhs = rp - ops.apply(GRG) + ops.apply(WRdW)
            dy = sla.cho_solve(factor, rhs, check_finite=False) if m else np.zeros(0)
            ATdy = ops.adjoint(dy)
            dZ = [R - A for R, A in zip(Rd, ATdy)]
            dX = []
            for W, Gr, dz, dk in zip(Wm, GRG, dZ, diag):
                dX.append(Gr - W * dz if dk else _sym(Gr - W @ dz @ W))
            # the Schur solve is ill-conditioned near the optimum; correct the
            # step against the primal equation A(dX) = rp directly
            for _ in range(REFINE_ROUNDS):
                if not m:
                    break
                r = rp - ops.apply(dX)
                if np.max(np.abs(r)) <= 1e-14 * (1.0 + np.max(np.abs(rp))):
                    break
                ddy = sla.cho_solve(factor, r, check_finite=False)
                corr = ops.adjoint(ddy)
                dy = dy + ddy
                dZ = [d - c for d, c in zip(dZ, corr)]
                dX = [d + W * c if dk else _sym(d + W @ c @ W) for d, W, c, dk in zip(dX, Wm, corr, diag)]
            dZ = [d if dk else _sym(d) for d, dk in zip(dZ, diag)]
            return dX, dy, dZ

        def scaled(dX, dZ):
            xs, zs = [], []
            for (G, Ginv, _), a, bq, dk in zip(scal, dX, dZ, diag):
                if dk:
                    xs.append(Ginv * Ginv * a)
                    zs.append(G * G * bq)
                else:
                    xs.append(_sym(Ginv @ a @ Ginv.T))
                    zs.append(_sym(G.T @ bq @ G))
            return xs, zs

        def steps(dXs, dZs):
            ap = min(_max_step(lam, d, dk) for (_, _, lam), d, dk in zip(scal, dXs, diag))
            ad = min(_max_step(lam, d, dk) for (_, _, lam), d, dk in zip(scal, dZs, diag))
            return ap, ad

        # predictor
        Rc_aff = [-(lam * lam) if dk else -np.diag(lam * lam) for (_, _, lam), dk in zip(scal, diag)]
        dXa, dya, dZa = direction(Rc_aff)
        dXs, dZs = scaled(dXa, dZa)
        ap, ad = steps(dXs, dZs)
        ap, ad = min(1.0, ap), min(1.0, ad)
        xz_aff = _inner([x + ap * d for x, d in zip(X, dXa)], [z + ad * d for z, d in zip(Z, dZa)])
        sigma = float(np.clip((xz_aff / xz) ** 3, 0.0, 1.0)) if xz > 0 else 0.0

        # corrector
        Rc = []
        for (_, _, lam), xs, zs, dk in zip(scal, dXs, dZs, diag):
            if dk:
                Rc.append(sigma * mu - lam * lam - xs * zs)
            else:
                Rc.append(sigma * mu * np.eye(len(lam)) - np.diag(lam * lam) - _sym(xs @ zs))
        dX, dy, dZ = direction(Rc)
        dXs, dZs = scaled(dX, dZ)
        ap, ad = steps(dXs, dZs)
        ap = min(1.0, opts.step_fraction * ap)
        ad = min(1.0, opts.step_fraction * ad)
        X = [x + ap * d for x, d in zip(X, dX)]
        y = y + ad * dy
        Z = [z + ad * d for z, d in zip(Z, dZ)]
    else:
        it = opts.max_iter
    if status != "optimal" and np.isfinite(best[0]):
        merit, X, y, Z, _ = best
        if status == "max_iter" and merit <= NEAR_OPTIMAL_FACTOR:
            status = "near_optimal"

    sol = SdpSolution(
        status=status,
        X=X,
        y=y,
        Z=Z,
        objective_primal=_inner(ops.C, X),
        objective_dual=float(ops.b @ y),
        iterations=it,
        sense=p.sense,
    )
    pr, dr, gp = kkt_residuals(p, sol)
    sol.residuals = {"primal": pr, "dual": dr, "gap": gp}
    return sol


def kkt_residuals(p: SdpProblem, s: SdpSolution):
    """Return ``(max |<A_i,X> - b_i|, ||C - A^T y - Z||_inf, |<C,X> - b^T y|)``."""
    ops = _Operators(p)
    if len(s.X) != len(ops.sizes) or len(s.y) != ops.m:
        raise ValueError("solution shapes do not match the problem")
    rp = ops.apply(s.X) - ops.b
    primal = float(np.max(np.abs(rp))) if ops.m else 0.0
    ATy = ops.adjoint(s.y)
    dual = max((float(np.max(np.abs(C - A - Z))) if C.size else 0.0) for C, A, Z in zip(ops.C, ATy, s.Z))
    gap = abs(_inner(ops.C, s.X) - float(ops.b @ s.y))
    return primal, dual, gap
