import itertools

import numpy as np
import pytest
from conftest import dense_oracle, random_graph, seeds
from hypothesis import given, settings
from hypothesis import strategies as st

from stoqease.hamiltonian import CoefficientGraph
from stoqease.hardness import (
    CliffordAssignment,
    MaxCutInstance,
    clifford_conjugate,
    clifford_orbit_min_nu1,
    clifford_orbit_scan,
    clifford_orbit_scan_slow,
    conjugate_pauli,
    connected_graphs,
    embed_maxcut,
    ising_energies,
    ising_ground_energy,
    parse_edge_list,
    penalty_weight,
    verify_reduction,
    zflip_minimum,
    zflip_nu1,
)
from stoqease.measures import MeasureSpec, nu_p_closed_form_2local, nu_p_dense

EDGE = MaxCutInstance.from_edges([(0, 1)])
P3 = MaxCutInstance.from_edges([(0, 1), (1, 2)])
K3 = MaxCutInstance.from_edges([(0, 1), (1, 2), (0, 2)])


def full_unitary(A: CliffordAssignment) -> np.ndarray:
    U = np.ones((1, 1))
    for k in range(len(A.w)):
        U = np.kron(U, A.unitary(k))
    return U


def test_instance_validation_and_parsing():
    with pytest.raises(ValueError):
        MaxCutInstance.from_edges([(0, 3)], 3)
    with pytest.raises(ValueError):
        MaxCutInstance(0, frozenset())
    g = parse_edge_list("# triangle\n0 1\n1 2  # second\n\n2 0\n")
    assert g == K3 and g.sorted_edges() == [(0, 1), (0, 2), (1, 2)]
    with pytest.raises(ValueError):
        parse_edge_list("0 1 2\n")
    assert parse_edge_list("0 1", n_vertices=4).n_vertices == 4
    assert not MaxCutInstance.from_edges([(0, 1), (2, 3)]).is_connected()


def test_penalty_weights():
    assert penalty_weight(EDGE) == 4.0 and penalty_weight(K3) == 8.0
    assert penalty_weight(K3, 2.0) == 16.0
    with pytest.raises(ValueError):
        embed_maxcut(MaxCutInstance(2, frozenset()))


def test_embedding_layout():
    inst = embed_maxcut(P3)
    assert inst.n_qubits == 5 and inst.ancilla_qubits == (3, 4)
    g = inst.hamiltonian
    assert g.a == {(0, 1): 1.0, (1, 2): 1.0}
    assert g.c == {(0, 1): 8.0, (0, 3): -8.0, (1, 3): -8.0, (1, 2): 8.0, (1, 4): -8.0, (2, 4): -8.0}


def test_ising_energies():
    assert ising_ground_energy(K3) == (-1, (0, 0, 1))
    assert ising_ground_energy(P3) == (-2, (0, 1, 0))
    assert list(ising_energies(EDGE, [[0, 0], [0, 1], [1, 1]])) == [1, -1, 1]


@pytest.mark.parametrize("g,expected", [(EDGE, 0.0), (P3, 0.0), (K3, 1.0)])
def test_small_instance_minima(g, expected):
    inst = embed_maxcut(g)
    assert zflip_minimum(inst)[0] == expected
    assert clifford_orbit_min_nu1(inst)[0] == pytest.approx(expected, abs=1e-12)


def test_zflip_nu1_counts_monochromatic_edges():
    inst = embed_maxcut(K3)
    for s in itertools.product((0, 1), repeat=3):
        mono = sum(s[i] == s[j] for i, j in K3.edges)
        assert zflip_nu1(inst, s) == mono
    with pytest.raises(ValueError):
        zflip_nu1(inst, (0, 1))


def test_zflip_matches_dense():
    inst = embed_maxcut(P3)
    H = dense_oracle(inst.hamiltonian).real
    for s in itertools.product((0, 1), repeat=3):
        A = CliffordAssignment.zflip(s, inst.n_qubits)
        U = full_unitary(A)
        dense = nu_p_dense(U @ H @ U.T, MeasureSpec(normalization="raw_sum")) / H.shape[0]
        assert zflip_nu1(inst, s) == pytest.approx(dense, abs=1e-12)


def test_penalty_terms_never_contribute():
    # Z Z penalties are diagonal: the Z-flip value does not depend on C
    for C in (0.5, 4.0, 100.0):
        inst = embed_maxcut(K3, C=C)
        assert [zflip_nu1(inst, s) for s in itertools.product((0, 1), repeat=3)] == [3, 1, 1, 1, 1, 1, 1, 3]


def test_disconnected_matching():
    g = MaxCutInstance.from_edges([(0, 1), (2, 3)])
    rep = verify_reduction(g, qubit_cap=6)
    assert rep.ising_energy == -2 and rep.zflip_min == 0.0 and rep.passed


def test_conjugation_rules():
    assert conjugate_pauli("X", 0, 1, 1) == (1, "X")
    assert conjugate_pauli("X", 1, 0, 0) == (0, "Z")
    assert conjugate_pauli("Z", 1, 1, 0) == (1, "X")
    assert conjugate_pauli("Y", 1, 0, 0) == (1, "Y")
    with pytest.raises(ValueError):
        conjugate_pauli("Q", 0, 0, 0)


def assignments(q):
    bits = st.tuples(*[st.integers(0, 1)] * q)
    return st.builds(CliffordAssignment, bits, bits, bits)


@given(seeds, st.data())
@settings(max_examples=30)
def test_symbolic_conjugation_matches_dense(seed, data):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 5))
    g = random_graph(rng, n)
    A = data.draw(assignments(n))
    U = full_unitary(A)
    assert np.allclose(U @ dense_oracle(g) @ U.T, dense_oracle(clifford_conjugate(g, A)), atol=1e-12)


def test_assignment_validation():
    with pytest.raises(ValueError):
        CliffordAssignment((0,), (0, 1), (0,))
    with pytest.raises(ValueError):
        CliffordAssignment((2,), (0,), (0,))
    with pytest.raises(ValueError):
        clifford_conjugate(CoefficientGraph(2, a={(0, 1): 1.0}), CliffordAssignment((0,), (0,), (0,)))


@pytest.mark.parametrize("g", [EDGE, P3])
def test_fast_orbit_matches_slow(g):
    ham = embed_maxcut(g).hamiltonian
    assert clifford_orbit_scan(ham) == clifford_orbit_scan_slow(ham)


@given(seeds, st.sampled_from([1.0, 2.0]))
@settings(max_examples=15)
def test_fast_orbit_matches_slow_random(seed, p):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, int(rng.integers(1, 4)))
    fast, slow = clifford_orbit_scan(g, p), clifford_orbit_scan_slow(g, p)
    assert fast[0] == pytest.approx(slow[0], abs=1e-12)
    assert fast[1] == slow[1]
    assert nu_p_closed_form_2local(clifford_conjugate(g, fast[1]), p) == pytest.approx(fast[0], abs=1e-12)


def test_orbit_workers_agree():
    ham = embed_maxcut(K3).hamiltonian
    assert clifford_orbit_scan(ham, workers=3) == clifford_orbit_scan(ham)


def test_orbit_cap():
    with pytest.raises(ValueError):
        clifford_orbit_scan(CoefficientGraph(9, a={(0, 1): 1.0}))
    with pytest.raises(ValueError):
        clifford_orbit_scan_slow(CoefficientGraph(7, a={(0, 1): 1.0}))


def test_quadratic_penalty_variant():
    g = K3
    inst = embed_maxcut(g, p=2.0)
    assert inst.C == 16.0
    best, _ = clifford_orbit_scan(inst.hamiltonian, 2.0)
    ising = ising_ground_energy(g)[0]
    # nu_2 squared of a Z-flip is the number of monochromatic edges as well
    assert best == pytest.approx((ising + len(g.edges)) / 2, abs=1e-12)


def test_reduction_on_all_small_graphs():
    graphs = connected_graphs(4)
    assert len(graphs) == 1 + 4 + 38
    # full orbits only up to six qubits (edge, P3, K3 and the matching)
    assert all(verify_reduction(g, qubit_cap=6).passed for g in graphs)
