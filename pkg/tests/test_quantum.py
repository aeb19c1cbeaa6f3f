import random

import numpy as np
import pytest

from epiquant import quantum as qm
from epiquant.model import Basis, Sign

RING = [(1, 2), (2, 3), (3, 4), (4, 5), (5, 1)]


def test_graph_state_stabilizers():
    st = qm.graph_state(range(1, 6), RING)
    for v in range(1, 6):
        left, right = (v - 2) % 5 + 1, v % 5 + 1
        assert qm.measure_expectation(st, {v: "X", left: "Z", right: "Z"}) == 1
    assert qm.measure_expectation(st, {1: "X"}) == 0


def test_projection_probabilities_are_exact():
    st = qm.entangle(qm.prep_plus(qm.prep_plus(qm.vacuum([1, 2]), 1), 2), 1, 2)
    r = qm.project(st, 1, Basis.Z, Sign.PLUS)
    assert r.probability == 0.5
    # after Z1=+ qubit 2 is |+>, so X2 is certain
    assert qm.project(r.state, 2, Basis.X, Sign.PLUS).probability == 1.0
    assert qm.project(r.state, 2, Basis.X, Sign.MINUS).probability == 0.0
    assert qm.project(r.state, 2, Basis.X, Sign.MINUS).state is None


def test_functional_projection_leaves_input_unchanged():
    st = qm.graph_state([1, 2], [(1, 2)])
    before = st.canonical()
    r = qm.project(st, 1, Basis.X, Sign.MINUS)
    assert r.probability == 0.5
    assert st.canonical() == before
    assert r.state.canonical() != before


def test_reset_reprepares_a_qubit():
    st = qm.graph_state([1, 2], [(1, 2)])
    st.reset(2, Basis.Y, Sign.MINUS)
    assert qm.measure_expectation(st, {2: "Y"}) == -1
    # forcing qubit 2 to |0> first collapses its neighbour to |+>
    assert qm.measure_expectation(st, {1: "X"}) == 1


def test_dense_matches_tableau_on_graph_state():
    st = qm.graph_state(range(1, 4), [(1, 2), (2, 3)])
    dn = qm.DenseState()
    for v in range(1, 4):
        dn.add_qubit(v)
        dn.reset(v)
    dn.cz(1, 2)
    dn.cz(2, 3)
    for spec in ({1: "X", 2: "Z"}, {1: "Z", 2: "X", 3: "Z"}, {2: "Y", 1: "Z", 3: "Z"}, {1: "Y"}):
        assert dn.expectation(spec) == pytest.approx(qm.measure_expectation(st, spec))
    assert dn.norm() == pytest.approx(1.0)


def test_bell_pair_regression_circuit():
    ops = ["prep 0 X +", "prep 1 X +", "cz 0 1", "h 1", "project 0 X +", "project 1 X +"]
    assert qm.run_circuit(ops) == [(0.5, pytest.approx(0.5)), (1.0, pytest.approx(1.0))]


def test_random_circuits_agree():
    rng = random.Random(3)
    for _ in range(100):
        ops = qm.random_circuit(rng, rng.randint(1, 6), 15)
        assert all(qm.agree(pt, pd) for pt, pd in qm.run_circuit(ops))


def test_agree_requires_exact_tableau_values():
    assert qm.agree(0.5, 0.5 + 1e-12)
    assert not qm.agree(0.5, 0.51)
    assert not qm.agree(0.3, 0.3)


def test_unknown_circuit_op():
    with pytest.raises(qm.QuantumError):
        qm.run_circuit(["swap 0 1"])


def test_dense_vector_is_normalised_after_projection():
    dn = qm.DenseState()
    dn.add_qubit(1)
    dn.reset(1, Basis.Z, Sign.PLUS)
    p, after = qm.dense_project(dn, 1, Basis.X, Sign.MINUS)
    assert p == pytest.approx(0.5)
    assert np.linalg.norm(after.vector()) == pytest.approx(1.0)
