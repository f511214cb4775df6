"""Monomial bases for the Lasserre and cluster hierarchies."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations_with_replacement
from math import comb

import numpy as np

from .errors import ParameterError, StructureError
from .poly import body_order, grlex_key

__all__ = [
    "ClusterStructure",
    "MonomialBasis",
    "ProductTable",
    "lasserre_basis",
    "cluster_basis",
    "product_index_table",
    "lasserre_size",
]


def lasserre_size(nvars: int, s: int) -> int:
    """Number of monomials of degree <= s in ``nvars`` variables."""
    if nvars < 0 or s < 0:
        raise ParameterError("variable count and degree must be non-negative")
    return comb(nvars + s, s)


def _monomials_upto(nvars: int, s: int):
    yield (0,) * nvars
    for deg in range(1, s + 1):
        for combo in combinations_with_replacement(range(nvars), deg):
            alpha = [0] * nvars
            for v in combo:
                alpha[v] += 1
            yield tuple(alpha)


@dataclass(frozen=True)
class ClusterStructure:
    """Partition of the x-variables into clusters plus a cluster interaction graph.

    ``omega_assignment`` maps a cluster id to the noise indices (0-based within
    the noise block) owned by that cluster.  Noise indices owned by no cluster
    are global and allowed everywhere.
    """

    partition: tuple
    edges: tuple = ()
    omega_assignment: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "partition", tuple(tuple(sorted(int(v) for v in c)) for c in self.partition))
        edges = set()
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                continue
            edges.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", tuple(sorted(edges)))
        object.__setattr__(
            self,
            "omega_assignment",
            {int(k): tuple(sorted(int(w) for w in v)) for k, v in dict(self.omega_assignment).items()},
        )

    @property
    def n_clusters(self) -> int:
        return len(self.partition)

    def validate(self, n_x: int, n_w: int = 0):
        seen = [v for c in self.partition for v in c]
        if sorted(seen) != list(range(n_x)):
            raise StructureError("partition must cover every x index exactly once")
        if any(len(c) == 0 for c in self.partition):
            raise StructureError("empty cluster in partition")
        k = self.n_clusters
        for i, j in self.edges:
            if not (0 <= i < k and 0 <= j < k):
                raise StructureError(f"edge ({i},{j}) references an unknown cluster")
        owned = []
        for cid, ws in self.omega_assignment.items():
            if not 0 <= cid < k:
                raise StructureError(f"noise assignment references unknown cluster {cid}")
            owned.extend(ws)
        if any(not 0 <= w < n_w for w in owned) or len(owned) != len(set(owned)):
            raise StructureError("noise indices must be in range and owned by at most one cluster")

    def allowed_groups(self):
        """(x-index set, owned-noise set) pairs a basis entry may live in."""
        xs = [frozenset(c) for c in self.partition]
        ws = [frozenset(self.omega_assignment.get(c, ())) for c in range(self.n_clusters)]
        groups = [(xs[c], ws[c]) for c in range(self.n_clusters)]
        groups += [(xs[i] | xs[j], ws[i] | ws[j]) for i, j in self.edges]
        return groups

    @classmethod
    def single(cls, n_x: int, n_w: int = 0) -> "ClusterStructure":
        """One cluster holding every variable (the unstructured case)."""
        return cls((tuple(range(n_x)),), (), {0: tuple(range(n_w))})


@dataclass(frozen=True)
class MonomialBasis:
    """Ordered list of multi-indices m(x, w); entry 0 is the constant monomial."""

    n_x: int
    n_w: int
    entries: tuple
    kind: str = "lasserre"
    params: dict = field(default_factory=dict, compare=False)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    @property
    def nvars(self) -> int:
        return self.n_x + self.n_w

    @property
    def degree(self) -> int:
        return max(sum(a) for a in self.entries)

    @cached_property
    def positions(self) -> dict:
        return {a: i for i, a in enumerate(self.entries)}

    def index(self, alpha) -> int:
        return self.positions[tuple(alpha)]

    def __contains__(self, alpha):
        return tuple(alpha) in self.positions

    def as_array(self) -> np.ndarray:
        return np.array(self.entries, dtype=np.int64).reshape(len(self.entries), self.nvars)

    def evaluate(self, point) -> np.ndarray:
        """The feature vector m(z) at a point."""
        z = np.asarray(point, dtype=float)
        return np.prod(z[None, :] ** self.as_array(), axis=1)

    def dump(self) -> str:
        """One multi-index per line in basis order."""
        return "".join(" ".join(map(str, a)) + "\n" for a in self.entries)


def lasserre_basis(n_x: int, n_w: int, s: int) -> MonomialBasis:
    """All monomials in ``n_x + n_w`` variables of total degree at most ``s``."""
    if s < 0:
        raise ParameterError("degree s must be non-negative")
    if n_x < 0 or n_w < 0:
        raise ParameterError("variable counts must be non-negative")
    entries = sorted(_monomials_upto(n_x + n_w, s), key=grlex_key)
    return MonomialBasis(n_x, n_w, tuple(entries), "lasserre", {"s": s})


def cluster_basis(n_x: int, n_w: int, cs: ClusterStructure, b: int, t: int, s: int | None = None) -> MonomialBasis:
    """Cluster-restricted basis of body order <= b and per-variable degree <= t.

    An entry is kept when its x-support lies inside one cluster or inside the
    union of two edge-connected clusters, and any cluster-owned noise variable
    it uses belongs to that same group.  Pure noise monomials of degree <= s
    are always kept.  ``s`` caps the total degree and defaults to ``b * t``.
    """
    if b < 1 or t < 1:
        raise ParameterError("body order b and per-variable degree t must be >= 1")
    cs.validate(n_x, n_w)
    if s is None:
        s = b * t
    owned = {w for ws in cs.omega_assignment.values() for w in ws}
    groups = cs.allowed_groups()

    def keep(alpha):
        xs = {i for i in range(n_x) if alpha[i]}
        if not xs:
            return True
        if body_order(alpha) > b or max(alpha) > t:
            return False
        ws = {k for k in range(n_w) if alpha[n_x + k] and k in owned}
        return any(xs <= gx and ws <= gw for gx, gw in groups)

    entries = sorted((a for a in _monomials_upto(n_x + n_w, s) if keep(a)), key=grlex_key)
    return MonomialBasis(n_x, n_w, tuple(entries), "cluster", {"b": b, "t": t, "s": s, "clusters": cs})


class ProductTable:
    """Pairwise sums of basis multi-indices.

    ``pairs[alpha]`` lists every ``(i, j)`` with ``i <= j`` whose entries add
    to ``alpha``, in lexicographic order of ``(i, j)``; the first one is the
    representative used when a single matrix entry must stand for ``alpha``.
    """

    def __init__(self, basis: MonomialBasis):
        self.basis = basis
        arr = basis.as_array()
        self._arr = arr
        pairs: dict = {}
        n = len(basis)
        for i in range(n):
            sums = arr[i] + arr[i:]
            for off, row in enumerate(map(tuple, sums.tolist())):
                pairs.setdefault(row, []).append((i, i + off))
        self.pairs = pairs
        self.distinct = sorted(pairs, key=grlex_key)

    def __getitem__(self, ij):
        i, j = ij
        return tuple((self._arr[i] + self._arr[j]).tolist())

    def __contains__(self, alpha):
        return tuple(alpha) in self.pairs

    def __len__(self):
        return len(self.distinct)

    def representative(self, alpha):
        return self.pairs[tuple(alpha)][0]


def product_index_table(basis: MonomialBasis) -> ProductTable:
    return ProductTable(basis)
