from itertools import product
from math import comb

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ssos.basis import (
    ClusterStructure,
    cluster_basis,
    lasserre_basis,
    lasserre_size,
    product_index_table,
)
from ssos.errors import StructureError
from ssos.poly import body_order, grlex_key


def brute_force_monomials(nvars, s):
    return {a for a in product(range(s + 1), repeat=nvars) if sum(a) <= s}


@pytest.mark.parametrize("n_x,n_w,s,expected", [(1, 1, 2, 6), (1, 1, 4, 15), (10, 1, 2, 78), (18, 9, 2, 406), (30, 9, 2, 820)])
def test_lasserre_sizes(n_x, n_w, s, expected):
    assert len(lasserre_basis(n_x, n_w, s)) == expected == lasserre_size(n_x + n_w, s)


@pytest.mark.parametrize("n_x,n_w,s", [(a, b, c) for a in range(4) for b in range(3) for c in range(5) if a + b > 0])
def test_lasserre_matches_enumeration(n_x, n_w, s):
    basis = lasserre_basis(n_x, n_w, s)
    assert len(basis) == comb(n_x + n_w + s, s)
    assert set(basis) == brute_force_monomials(n_x + n_w, s)
    assert basis[0] == (0,) * (n_x + n_w)
    assert list(basis) == sorted(basis, key=grlex_key)
    assert len(set(basis)) == len(basis)


def test_degree_zero_basis_is_constant():
    assert lasserre_basis(3, 1, 0).entries == ((0, 0, 0, 0),)


def test_product_table_counts():
    tab = product_index_table(lasserre_basis(1, 1, 2))
    assert len(tab) == 15 == comb(2 + 4, 4)
    tab = product_index_table(lasserre_basis(1, 0, 1))
    assert tab.distinct == [(0,), (1,), (2,)]


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2), st.integers(1, 3))
def test_product_table_structure(n_x, n_w, s):
    basis = lasserre_basis(n_x, n_w, s)
    tab = product_index_table(basis)
    n = len(basis)
    assert len(tab) == comb(n_x + n_w + 2 * s, 2 * s)
    assert sum(len(v) for v in tab.pairs.values()) == n * (n + 1) // 2
    assert tab[0, 0] == (0,) * (n_x + n_w)
    for j in range(n):
        assert tab[0, j] == basis[j]
    for i in range(n):
        for j in range(n):
            assert tab[i, j] == tab[j, i] == tuple(a + b for a, b in zip(basis[i], basis[j]))


def test_single_cluster_reproduces_lasserre():
    for n_x, n_w, s in [(2, 1, 2), (3, 1, 3), (4, 0, 2), (2, 2, 4)]:
        cs = ClusterStructure.single(n_x, n_w)
        assert cluster_basis(n_x, n_w, cs, b=s, t=s, s=s).entries == lasserre_basis(n_x, n_w, s).entries


def test_one_dimensional_snl_bases_coincide():
    cs = ClusterStructure.single(10, 1)
    assert len(cluster_basis(10, 1, cs, b=2, t=2, s=2)) == 78


def test_b2_t2_has_pair_squares_but_no_fourth_powers():
    cs = ClusterStructure.single(3, 0)
    basis = cluster_basis(3, 0, cs, b=2, t=2)
    assert (2, 2, 0) in basis
    assert (4, 0, 0) not in basis
    assert (1, 1, 1) not in basis


def ring_structure(n_sensors, ell, n_clusters):
    # sensors dealt into clusters in order, one noise variable per cluster
    clusters = [[] for _ in range(n_clusters)]
    for i in range(n_sensors):
        clusters[i % n_clusters].extend(i * ell + a for a in range(ell))
    edges = [(c, (c + 1) % n_clusters) for c in range(n_clusters)]
    return ClusterStructure(tuple(map(tuple, clusters)), tuple(edges), {c: (c,) for c in range(n_clusters)})


@pytest.mark.parametrize("N,full", [(9, 406), (15, 820)])
def test_two_dimensional_cluster_reduction(N, full):
    cs = ring_structure(N, 2, 9)
    cb = cluster_basis(2 * N, 9, cs, b=2, t=2, s=2)
    assert len(lasserre_basis(2 * N, 9, 2)) == full
    assert full / len(cb) >= 2.0


def test_cluster_filters_exhaustive():
    cs = ClusterStructure(((0, 1), (2, 3), (4, 5)), ((0, 1),), {0: (0,), 2: (1,)})
    n_x, n_w, b, t = 6, 3, 2, 2
    basis = cluster_basis(n_x, n_w, cs, b=b, t=t, s=3)
    groups = [({0, 1}, {0}), ({2, 3}, set()), ({4, 5}, {1}), ({0, 1, 2, 3}, {0})]
    kept = set(basis)
    for a in brute_force_monomials(n_x + n_w, 3):
        xs = {i for i in range(n_x) if a[i]}
        owned = {k for k in (0, 1) if a[n_x + k]}
        if not xs:
            expected = True
        else:
            expected = (
                body_order(a) <= b
                and max(a) <= t
                and any(xs <= gx and owned <= gw for gx, gw in groups)
            )
        assert (a in kept) == expected, a
    # noise variable 2 is unowned, hence global
    assert (1, 0, 0, 0, 0, 0, 0, 0, 1) in kept
    assert (0, 0, 0, 0, 1, 0, 1, 0, 0) not in kept


def test_cluster_structure_validation():
    with pytest.raises(StructureError):
        ClusterStructure(((0, 1), (1, 2))).validate(3)
    with pytest.raises(StructureError):
        ClusterStructure(((0,), (1,)), ((0, 5),)).validate(2)
    with pytest.raises(StructureError):
        cluster_basis(2, 0, ClusterStructure(((0,),)), 2, 2)
    cs = ClusterStructure(((0,), (1,)), ((0, 0), (1, 0), (0, 1)))
    assert cs.edges == ((0, 1),)


def test_basis_dump_format():
    text = lasserre_basis(1, 1, 1).dump()
    assert text == "0 0\n1 0\n0 1\n"
