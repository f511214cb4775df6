"""Sensor network localization instances and their degree-4 potentials."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.cluster.vq import ClusterError, kmeans2

from .basis import ClusterStructure, MonomialBasis, cluster_basis, lasserre_basis, product_index_table
from .errors import GenerationError, ParameterError
from .extract import extract_moments, mahalanobis
from .noise import NoiseDistribution
from .poly import Polynomial
from .sdp import HardConstraintSet, assemble_dual, eliminate_hard
from .solver import SolverOptions, solve

RETRY_BUDGET = 100


@dataclass(frozen=True)
class SnlProblemType:
    """Problem-type knobs.  ``K`` defaults to ``ell + 1`` anchors.

    ``n_noise`` is the number of noise variables d.  With one cluster the d
    variables are dealt round-robin over the observed edges; with several
    clusters there is one variable per cluster and ``n_noise`` must be unset
    or equal to ``n_clusters``.
    """

    ell: int = 1
    N: int = 10
    K: int | None = None
    r: float = 1.5
    eps: float = 0.3
    anchor_mode: str = "soft"
    n_hard: int = 0
    n_clusters: int = 1
    n_noise: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.ell < 1 or self.N < 1:
            raise ParameterError("need ell >= 1 and N >= 1")
        if self.r <= 0:
            raise ParameterError("sensing radius must be positive")
        if self.eps < 0:
            raise ParameterError("noise scale must be non-negative")
        if self.anchor_mode not in ("soft", "hard"):
            raise ParameterError("anchor_mode is 'soft' or 'hard'")
        if self.anchor_mode == "hard" and not 1 <= self.n_hard < self.N:
            raise ParameterError("hard mode needs 1 <= n_hard < N")
        if not 1 <= self.n_clusters <= self.N:
            raise ParameterError("need 1 <= n_clusters <= N")
        if self.n_clusters > 1 and self.n_noise not in (None, self.n_clusters):
            raise ParameterError("with several clusters the noise count equals the cluster count")
        if self.n_noise is not None and self.n_noise < 1:
            raise ParameterError("need at least one noise variable")

    @property
    def n_anchors(self) -> int:
        return self.ell + 1 if self.K is None else self.K

    @property
    def d(self) -> int:
        if self.n_clusters > 1:
            return self.n_clusters
        return 1 if self.n_noise is None else self.n_noise


@dataclass
class SnlInstance:
    """A sampled instance.  Sensor i coordinate a is x-variable ``i * ell + a``.

    ``ss_edges`` rows are ``(i, j, distance, noise_index)`` with i < j;
    ``sa_edges`` rows are ``(i, k, distance, noise_index)`` for sensor i and anchor k.
    """

    ptype: SnlProblemType
    X_true: np.ndarray
    A_true: np.ndarray
    ss_edges: list
    sa_edges: list
    labels: np.ndarray
    partition: ClusterStructure
    hard: HardConstraintSet = field(default_factory=HardConstraintSet)

    @property
    def ell(self) -> int:
        return self.ptype.ell

    @property
    def N(self) -> int:
        return self.ptype.N

    @property
    def n_x(self) -> int:
        return self.N * self.ell

    @property
    def d(self) -> int:
        return self.ptype.d

    def truth_vector(self) -> np.ndarray:
        return self.X_true.reshape(-1)

    def noise_distribution(self) -> NoiseDistribution:
        return NoiseDistribution.uniform(self.d)

    # -- JSON ------------------------------------------------------------
    def to_json(self) -> str:
        doc = {
            "ptype": asdict(self.ptype),
            "X_true": self.X_true.tolist(),
            "A_true": self.A_true.tolist(),
            "ss_edges": [[int(i), int(j), float(dd), int(w)] for i, j, dd, w in self.ss_edges],
            "sa_edges": [[int(i), int(k), float(dd), int(w)] for i, k, dd, w in self.sa_edges],
            "labels": [int(v) for v in self.labels],
            "partition": {
                "clusters": [list(c) for c in self.partition.partition],
                "edges": [list(e) for e in self.partition.edges],
                "omega": {str(k): list(v) for k, v in sorted(self.partition.omega_assignment.items())},
            },
            "hard": [[k, v] for k, v in self.hard],
        }
        return json.dumps(doc, indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SnlInstance":
        doc = json.loads(text)
        part = doc["partition"]
        cs = ClusterStructure(
            tuple(tuple(c) for c in part["clusters"]),
            tuple(tuple(e) for e in part["edges"]),
            {int(k): tuple(v) for k, v in part["omega"].items()},
        )
        return cls(
            SnlProblemType(**doc["ptype"]),
            np.array(doc["X_true"], dtype=float),
            np.array(doc["A_true"], dtype=float).reshape(-1, doc["ptype"]["ell"]),
            [tuple(e) for e in doc["ss_edges"]],
            [tuple(e) for e in doc["sa_edges"]],
            np.array(doc["labels"], dtype=int),
            cs,
            HardConstraintSet(tuple(tuple(h) for h in doc["hard"])),
        )


def kmeans_labels(positions, n_clusters: int, seed=0, retries: int = 10) -> np.ndarray:
    """Lloyd's k-means with k-means++ seeding; reseeds when a cluster empties."""
    pts = np.asarray(positions, dtype=float)
    if not 1 <= n_clusters <= len(pts):
        raise ParameterError("need 1 <= n_clusters <= number of points")
    if n_clusters == 1:
        return np.zeros(len(pts), dtype=int)
    if n_clusters == len(pts):
        return np.arange(len(pts))
    ss = np.random.SeedSequence(seed)
    for child in ss.spawn(retries):
        try:
            _, labels = kmeans2(pts, n_clusters, minit="++", missing="raise", seed=np.random.default_rng(child))
        except ClusterError:
            continue
        if len(np.unique(labels)) == n_clusters:
            return _relabel(labels)
    raise GenerationError(f"k-means left an empty cluster after {retries} reseeds")


def _relabel(labels) -> np.ndarray:
    # order clusters by first appearance so labels are stable across equivalent runs
    mapping = {}
    for v in labels:
        mapping.setdefault(int(v), len(mapping))
    return np.array([mapping[int(v)] for v in labels])


def partition_from_labels(labels, ell: int) -> ClusterStructure:
    """Cluster structure over x-coordinates with ring edges and one noise variable per cluster."""
    labels = np.asarray(labels, dtype=int)
    k = int(labels.max()) + 1
    clusters = [tuple(i * ell + a for i in np.flatnonzero(labels == c) for a in range(ell)) for c in range(k)]
    edges = [(c, (c + 1) % k) for c in range(k)] if k > 1 else []
    omega = {c: (c,) for c in range(k)} if k > 1 else {}
    return ClusterStructure(tuple(clusters), tuple(edges), omega)


def kmeans_partition(positions, n_clusters: int, seed=0) -> ClusterStructure:
    pts = np.asarray(positions, dtype=float)
    labels = kmeans_labels(pts, n_clusters, seed)
    cs = partition_from_labels(labels, pts.shape[1])
    if n_clusters == 1:
        cs = ClusterStructure(cs.partition, (), {0: (0,)})
    return cs


def _connected(N: int, ss_edges, roots) -> bool:
    parent = list(range(N + 1))  # node N is the virtual root

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a, b):
        parent[find(a)] = find(b)

    for i, j, *_ in ss_edges:
        union(i, j)
    for i in roots:
        union(i, N)
    return all(find(i) == find(N) for i in range(N))


def generate_instance(t: SnlProblemType) -> SnlInstance:
    """Sample positions uniformly on [-1, 1]^ell until the observation graph is rooted and connected."""
    rng = np.random.default_rng(t.seed)
    N, ell, K = t.N, t.ell, t.n_anchors
    for _ in range(RETRY_BUDGET):
        X = rng.uniform(-1.0, 1.0, size=(N, ell))
        A = rng.uniform(-1.0, 1.0, size=(K, ell))
        hard_ids = sorted(int(v) for v in rng.permutation(N)[: t.n_hard]) if t.anchor_mode == "hard" else []
        ss = []
        for i in range(N):
            for j in range(i + 1, N):
                dij = float(np.linalg.norm(X[i] - X[j]))
                if dij <= t.r:
                    ss.append([i, j, dij])
        sa = []
        if t.anchor_mode == "soft":
            for i in range(N):
                for k in range(K):
                    dik = float(np.linalg.norm(X[i] - A[k]))
                    if dik <= t.r:
                        sa.append([i, k, dik])
        roots = hard_ids if t.anchor_mode == "hard" else sorted({e[0] for e in sa})
        if not _connected(N, ss, roots):
            continue
        if t.n_clusters > 1:
            labels = kmeans_labels(X, t.n_clusters, seed=int(rng.integers(2**31)))
        else:
            labels = np.zeros(N, dtype=int)
        if t.n_clusters > 1:
            ss = [(i, j, dd, int(labels[i])) for i, j, dd in ss]
            sa = [(i, k, dd, int(labels[i])) for i, k, dd in sa]
            cs = partition_from_labels(labels, ell)
        else:
            ss = [(i, j, dd, e % t.d) for e, (i, j, dd) in enumerate(ss)]
            sa = [(i, k, dd, (len(ss) + e) % t.d) for e, (i, k, dd) in enumerate(sa)]
            cs = ClusterStructure((tuple(range(N * ell)),), (), {0: tuple(range(t.d))})
        hard = HardConstraintSet(tuple((i * ell + a, float(X[i, a])) for i in hard_ids for a in range(ell)))
        return SnlInstance(t, X, A, ss, sa, labels, cs, hard)
    raise GenerationError(f"no connected instance within {RETRY_BUDGET} resamples")


def build_potential(inst: SnlInstance, eps: float | None = None) -> Polynomial:
    """Sum over observed edges of (squared distance - (d* + eps w_k)^2)^2."""
    eps = inst.ptype.eps if eps is None else float(eps)
    n_x, d, ell = inst.n_x, inst.d, inst.ell
    xs, ws = Polynomial.variables(n_x, d)
    one = Polynomial.constant(1.0, n_x, d)

    def noisy_sq(dist, k):
        obs = one * dist + ws[k] * eps
        return obs * obs

    f = Polynomial(n_x, d)
    for i, j, dist, k in inst.ss_edges:
        sq = Polynomial(n_x, d)
        for a in range(ell):
            diff = xs[i * ell + a] - xs[j * ell + a]
            sq = sq + diff * diff
        q = sq - noisy_sq(dist, k)
        f = f + q * q
    for i, kk, dist, k in inst.sa_edges:
        sq = Polynomial(n_x, d)
        for a in range(ell):
            diff = xs[i * ell + a] - float(inst.A_true[kk, a])
            sq = sq + diff * diff
        q = sq - noisy_sq(dist, k)
        f = f + q * q
    return f


def prune_potential(f: Polynomial, basis: MonomialBasis):
    """Drop monomials that are not products of two basis entries.

    Returns ``(pruned, dropped_mass)`` with ``dropped_mass`` the sum of the
    absolute dropped coefficients.
    """
    table = product_index_table(basis)
    kept, dropped = f.restrict_terms(lambda a: a in table)
    mass = float(sum(abs(c) for c in dropped.terms.values()))
    return kept, mass


def restrict_edges(inst: SnlInstance) -> SnlInstance:
    """Copy of ``inst`` without sensor-sensor edges joining non-adjacent clusters.

    Those distances cannot be priced by a cluster basis, so they are
    discarded whole rather than leaving a partial penalty behind.
    """
    xs = [set(c) for c in inst.partition.partition]
    groups = xs + [xs[i] | xs[j] for i, j in inst.partition.edges]
    ell = inst.ell

    def covered(i, j):
        need = {i * ell + a for a in range(ell)} | {j * ell + a for a in range(ell)}
        return any(need <= g for g in groups)

    kept = [e for e in inst.ss_edges if covered(e[0], e[1])]
    return replace(inst, ss_edges=kept)


@dataclass
class SnlResult:
    status: str
    objective: float
    means: np.ndarray
    variances: np.ndarray
    delta_m: float
    basis_size: int
    dropped_mass: float = 0.0


def snl_basis(inst: SnlInstance, kind: str = "full") -> MonomialBasis:
    """Degree-2 basis: full Lasserre, or cluster-restricted (body order 2)."""
    if kind == "full":
        return lasserre_basis(inst.n_x, inst.d, 2)
    if kind == "cluster":
        return cluster_basis(inst.n_x, inst.d, inst.partition, b=2, t=2, s=2)
    raise ParameterError(f"unknown basis kind {kind!r}")


def solve_instance(
    inst: SnlInstance,
    kind: str = "full",
    opts: SolverOptions | None = None,
    hard_mode: str = "eliminate",
) -> SnlResult:
    """Dual S-SOS on an instance; returns recovered means, variances and delta_M.

    With the cluster basis, edges between non-adjacent clusters are dropped
    and any remaining inexpressible monomial is pruned; ``dropped_mass`` is
    the total absolute coefficient removed from the potential.

    Hard-fixed sensors are either substituted out (``hard_mode="eliminate"``,
    exact and well conditioned) or imposed as moment rows (``"rows"``).
    """
    if hard_mode not in ("eliminate", "rows"):
        raise ParameterError("hard_mode is 'eliminate' or 'rows'")
    f_full = build_potential(inst)
    basis = snl_basis(inst, kind)
    f = build_potential(restrict_edges(inst)) if kind == "cluster" else f_full
    f, _ = prune_potential(f, basis)
    dropped = float(sum(abs(c) for c in (f_full - f).terms.values()))
    if hard_mode == "eliminate":
        f, basis = eliminate_hard(f, basis, inst.hard)
        prob = assemble_dual(f, basis, inst.noise_distribution())
        pinned = dict(inst.hard)
    else:
        prob = assemble_dual(f, basis, inst.noise_distribution(), inst.hard)
        pinned = None
    sol = solve(prob, opts)
    if not sol.optimal:
        nan = np.full(inst.n_x, np.nan)
        return SnlResult(sol.status, sol.value, nan, nan, float("nan"), len(basis), dropped)
    mom = extract_moments(sol, basis, pinned)
    dm = mahalanobis(inst.truth_vector(), mom.means, mom.variances)
    return SnlResult(sol.status, sol.value, mom.means, mom.variances, dm, len(basis), dropped)
