"""Block-diagonal SDPs in standard equality form, S-SOS assembly, SDPA I/O.

Standard form::

    minimize   <C, X>
    subject to <A_i, X> = b_i,  i = 1..m
               X = diag(X_1, ..., X_k) PSD

Each block is either a dense symmetric block (positive size) or a diagonal
block (negative size, SDPA convention).  Entries are stored once with
``row <= col``; an off-diagonal value ``v`` contributes ``2 v X_rc`` to the
inner product.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

from .basis import MonomialBasis, lasserre_basis, product_index_table
from .errors import DimensionError, InfeasibleAssemblyError, ParameterError, StructureError
from .noise import NoiseDistribution, moment
from .poly import Polynomial

__all__ = [
    "SdpProblem",
    "HardConstraintSet",
    "assemble_dual",
    "assemble_primal",
    "eliminate_hard",
    "export_sdpa",
    "import_sdpa",
]


@dataclass
class SdpProblem:
    """Sparse standard-form SDP.

    ``entries`` columns are (matno, block, row, col, value) with matno 0 the
    objective C and matno i >= 1 the constraint A_i; block, row and col are
    0-based.  ``meta`` carries assembly bookkeeping and is ignored by equality.
    """

    block_sizes: list
    b: np.ndarray
    entries: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.block_sizes = [int(v) for v in self.block_sizes]
        if any(v == 0 for v in self.block_sizes):
            raise StructureError("block sizes must be non-zero")
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        if self.entries is None:
            self.entries = np.zeros((0, 5))
        self.entries = _canonical_entries(np.asarray(self.entries, dtype=float).reshape(-1, 5))
        self._check()

    @property
    def m(self) -> int:
        return len(self.b)

    @property
    def sense(self) -> int:
        """+1 when <C, X> is the modelled objective, -1 when it is its negative."""
        return int(self.meta.get("sense", 1))

    def _check(self):
        e = self.entries
        if len(e) == 0:
            return
        mat, blk, r, c = (e[:, k].astype(int) for k in range(4))
        if mat.min() < 0 or mat.max() > self.m:
            raise StructureError("matrix number out of range")
        if blk.min() < 0 or blk.max() >= len(self.block_sizes):
            raise StructureError("block number out of range")
        sizes = np.abs(np.array(self.block_sizes))[blk]
        if np.any(r < 0) or np.any(c >= sizes) or np.any(r > c):
            raise StructureError("entry outside its block or below the diagonal")
        diag = np.array(self.block_sizes)[blk] < 0
        if np.any(diag & (r != c)):
            raise StructureError("off-diagonal entry in a diagonal block")

    def __eq__(self, other):
        if not isinstance(other, SdpProblem):
            return NotImplemented
        return (
            self.block_sizes == other.block_sizes
            and np.array_equal(self.b, other.b)
            and np.array_equal(self.entries, other.entries)
        )

    def matrix(self, matno: int, block: int) -> np.ndarray:
        """Dense symmetric matrix (or diagonal vector for diagonal blocks)."""
        n = self.block_sizes[block]
        sel = (self.entries[:, 0] == matno) & (self.entries[:, 1] == block)
        e = self.entries[sel]
        r, c, v = e[:, 2].astype(int), e[:, 3].astype(int), e[:, 4]
        if n < 0:
            out = np.zeros(-n)
            out[r] = v
            return out
        out = np.zeros((n, n))
        out[r, c] = v
        out[c, r] = v
        return out

    def inner(self, matno: int, X) -> float:
        """<A_matno, X> for block list X."""
        total = 0.0
        for k, n in enumerate(self.block_sizes):
            A = self.matrix(matno, k)
            total += float(np.dot(A, X[k])) if n < 0 else float(np.sum(A * X[k]))
        return total


def _canonical_entries(e: np.ndarray) -> np.ndarray:
    """Merge duplicate positions, drop exact zeros, sort by (matno, block, row, col)."""
    if len(e) == 0:
        return np.zeros((0, 5))
    keys = e[:, :4].astype(np.int64)
    order = np.lexsort((keys[:, 3], keys[:, 2], keys[:, 1], keys[:, 0]))
    keys, vals = keys[order], e[order, 4]
    uniq, start = np.unique(keys, axis=0, return_index=True)
    sums = np.add.reduceat(vals, start)
    keep = sums != 0.0
    return np.column_stack([uniq[keep].astype(float), sums[keep]])


@dataclass(frozen=True)
class HardConstraintSet:
    """Pins ``x_k = value`` for each ``(k, value)``: E[x_k] = value and E[x_k^2] = value^2."""

    items: tuple = ()

    def __post_init__(self):
        items = tuple((int(k), float(v)) for k, v in self.items)
        ks = [k for k, _ in items]
        if len(set(ks)) != len(ks):
            raise StructureError("duplicate variable in hard constraint set")
        object.__setattr__(self, "items", items)

    def __iter__(self):
        return iter(self.items)

    def __len__(self):
        return len(self.items)

    def validate(self, n_x: int):
        for k, _ in self.items:
            if not 0 <= k < n_x:
                raise StructureError(f"hard constraint on x_{k} outside the x-block")


def eliminate_hard(f: Polynomial, basis: MonomialBasis, hard: HardConstraintSet):
    """Substitute the pinned values and drop pinned variables from the basis.

    E[x_k] = v and E[x_k^2] = v^2 force x_k = v almost surely, so every
    moment involving x_k is determined by the others.  Solving the reduced
    problem is equivalent to imposing the hard rows, but the reduced moment
    matrix keeps a strictly feasible interior, which the rows destroy.
    Returns ``(f_reduced, basis_reduced)`` with the variable layout unchanged.
    """
    hard.validate(basis.n_x)
    pinned = dict(hard)
    if not pinned:
        return f, basis
    entries = tuple(a for a in basis if not any(a[k] for k in pinned))
    params = dict(basis.params, pinned=tuple(sorted(pinned)))
    return f.substitute(pinned), MonomialBasis(basis.n_x, basis.n_w, entries, basis.kind, params)


def _check_vars(f: Polynomial, basis: MonomialBasis, dist: NoiseDistribution):
    if (f.n_x, f.n_w) != (basis.n_x, basis.n_w):
        raise DimensionError("polynomial and basis have different variable counts")
    if dist.d != basis.n_w:
        raise DimensionError("noise dimension does not match the basis")


def _pair_weight(i: int, j: int) -> float:
    return 1.0 if i == j else 0.5


def assemble_dual(
    f: Polynomial,
    basis: MonomialBasis,
    dist: NoiseDistribution,
    hard: HardConstraintSet | None = None,
) -> SdpProblem:
    """Moment-matrix SDP: minimize sum f_a y_a over PSD M(y) matching the noise moments.

    X is the single moment-matrix block.  For each product multi-index the
    lexicographically first entry (i, j) is its representative; every other
    entry with the same product is tied to it by an equality row.  Pure-noise
    moments (including the normalization M_00 = 1) are fixed to those of
    ``dist``; each hard constraint adds E[x_k] and E[x_k^2] rows.
    """
    _check_vars(f, basis, dist)
    hard = hard or HardConstraintSet()
    hard.validate(basis.n_x)
    table = product_index_table(basis)
    n_x = basis.n_x

    rows: list = []  # (list[(r, c, v)], rhs)
    for alpha in table.distinct:
        pairs = table.pairs[alpha]
        (i0, j0) = pairs[0]
        for (i, j) in pairs[1:]:
            rows.append(([(i0, j0, _pair_weight(i0, j0)), (i, j, -_pair_weight(i, j))], 0.0))
    n_link = len(rows)

    moment_rows = []
    for alpha in table.distinct:
        if any(alpha[:n_x]):
            continue
        i, j = table.pairs[alpha][0]
        target = moment(dist, alpha[n_x:])
        moment_rows.append((alpha, len(rows), target))
        rows.append(([(i, j, _pair_weight(i, j))], target))

    hard_rows = []
    nv = basis.nvars
    for k, value in hard:
        for power, target in ((1, value), (2, value * value)):
            alpha = tuple(power if v == k else 0 for v in range(nv))
            if alpha not in table:
                raise InfeasibleAssemblyError(alpha, f"hard constraint needs moment {alpha}, absent from basis products")
            i, j = table.pairs[alpha][0]
            hard_rows.append((k, power, len(rows)))
            rows.append(([(i, j, _pair_weight(i, j))], target))

    obj = []
    for alpha, coef in f.items():
        if alpha not in table:
            raise InfeasibleAssemblyError(alpha)
        i, j = table.pairs[alpha][0]
        obj.append((0, 0, i, j, coef * _pair_weight(i, j)))

    ent = list(obj)
    for idx, (items, _) in enumerate(rows):
        ent.extend((idx + 1, 0, r, c, v) for r, c, v in items)
    b = np.array([rhs for _, rhs in rows])
    meta = {
        "kind": "dual",
        "sense": 1,
        "basis": basis,
        "representatives": {a: table.pairs[a][0] for a in table.distinct},
        "n_link": n_link,
        "moment_rows": moment_rows,
        "hard_rows": hard_rows,
    }
    return SdpProblem([len(basis)], b, np.array(ent, dtype=float).reshape(-1, 5), meta)


def assemble_primal(f: Polynomial, basis: MonomialBasis, c_degree: int, dist: NoiseDistribution) -> SdpProblem:
    """Gram-matrix SDP: maximize E[c(w)] subject to f - c = m^T W m, W PSD.

    Blocks are ``[|basis|, -n_c, -n_c]``: the Gram matrix W, then the
    non-negative parts u and v of the free coefficients c = u - v over the
    pure-noise monomials of degree <= ``c_degree``.  The solver minimizes
    ``-E[c]``, so ``meta['sense'] == -1``.
    """
    _check_vars(f, basis, dist)
    if c_degree < 0 or c_degree > 2 * basis.degree:
        raise ParameterError(f"c_degree must lie in [0, {2 * basis.degree}]")
    table = product_index_table(basis)
    n_x = basis.n_x

    for alpha in f.terms:
        if alpha not in table:
            raise InfeasibleAssemblyError(alpha)

    c_monos = [a for a in table.distinct if not any(a[:n_x]) and sum(a) <= c_degree]
    expected = _count_noise_monomials(basis.n_w, c_degree)
    if len(c_monos) != expected:
        missing = _first_missing_noise_monomial(basis, table, c_degree)
        raise InfeasibleAssemblyError(missing, f"lower-bound monomial {missing} is not reachable from basis products")
    c_pos = {a: k for k, a in enumerate(c_monos)}
    nc = len(c_monos)

    ent = []
    b = np.zeros(len(table.distinct))
    for row, alpha in enumerate(table.distinct):
        b[row] = f.coefficient(alpha)
        for (i, j) in table.pairs[alpha]:
            ent.append((row + 1, 0, i, j, 1.0))
        if alpha in c_pos:
            k = c_pos[alpha]
            ent.append((row + 1, 1, k, k, 1.0))
            ent.append((row + 1, 2, k, k, -1.0))
    for a, k in c_pos.items():
        m_a = moment(dist, a[n_x:])
        ent.append((0, 1, k, k, -m_a))
        ent.append((0, 2, k, k, m_a))
    meta = {
        "kind": "primal",
        "sense": -1,
        "basis": basis,
        "c_monomials": c_monos,
        "row_alphas": list(table.distinct),
        "n_x": n_x,
        "n_w": basis.n_w,
    }
    return SdpProblem([len(basis), -nc, -nc], b, np.array(ent, dtype=float).reshape(-1, 5), meta)


def _count_noise_monomials(d: int, deg: int) -> int:
    return comb(d + deg, deg)


def _first_missing_noise_monomial(basis, table, deg):
    for a in lasserre_basis(0, basis.n_w, deg).entries:
        full = (0,) * basis.n_x + a
        if full not in table:
            return full
    return (0,) * basis.nvars


# -- SDPA sparse format ------------------------------------------------------

def _fmt(v: float) -> str:
    v = float(v)
    if v == int(v) and abs(v) < 1e15:
        return str(int(v)) if v != 0 else "0"
    return format(v, ".17g")


def export_sdpa(p: SdpProblem) -> str:
    """Serialize to SDPA sparse text (``.dat-s``).

    SDPA reads ``max <F0, Y> s.t. <Fi, Y> = c_i``; the objective matrix is
    therefore written as ``F0 = -C`` so an SDPA solver optimizes the same
    problem.  :func:`import_sdpa` undoes the sign.  Indices are 1-based and
    entries appear in (matno, block, row, col) order.
    """
    lines = [str(p.m), str(len(p.block_sizes)), " ".join(map(str, p.block_sizes)), " ".join(_fmt(v) for v in p.b)]
    for mat, blk, r, c, v in p.entries:
        val = -v if mat == 0 else v
        lines.append(f"{int(mat)} {int(blk) + 1} {int(r) + 1} {int(c) + 1} {_fmt(val)}")
    return "\n".join(lines) + "\n"


def import_sdpa(text: str) -> SdpProblem:
    """Parse SDPA sparse text; comment lines starting with ``"`` or ``*`` are skipped."""
    raw = []
    for ln in text.splitlines():
        s = ln.strip()
        if s.startswith('"') or s.startswith("*"):
            continue
        for ch in ",{}()":
            s = s.replace(ch, " ")
        raw.append(s)
    # drop leading blanks only; a blank b-line is meaningful when m == 0
    while raw and not raw[0]:
        raw.pop(0)
    try:
        m = int(raw[0].split()[0])
        nblocks = int(raw[1].split()[0])
        sizes = [int(float(t)) for t in raw[2].split()[:nblocks]]
    except (IndexError, ValueError) as exc:
        raise StructureError("malformed SDPA header") from exc
    if len(sizes) != nblocks:
        raise StructureError("block size line is short")
    pos = 3
    b: list = []
    while len(b) < m:
        if pos >= len(raw):
            raise StructureError("b vector is short")
        b.extend(float(t) for t in raw[pos].split())
        pos += 1
    if m == 0 and pos < len(raw) and not raw[pos]:
        pos += 1
    ent = []
    for s in raw[pos:]:
        tok = s.split()
        if not tok:
            continue
        if len(tok) != 5:
            raise StructureError(f"bad entry line {s!r}")
        mat, blk, r, c = (int(t) for t in tok[:4])
        v = float(tok[4])
        if r > c:
            r, c = c, r
        ent.append((mat, blk - 1, r - 1, c - 1, -v if mat == 0 else v))
    return SdpProblem(sizes, np.array(b[:m]), np.array(ent, dtype=float).reshape(-1, 5))


def dense_blocks(p: SdpProblem, matno: int) -> list:
    return [p.matrix(matno, k) for k in range(len(p.block_sizes))]
