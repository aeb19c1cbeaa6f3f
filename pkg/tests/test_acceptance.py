"""End-to-end acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL line (visible with ``pytest -s``).
"""
import itertools
import json
import random
import time

import pytest

from epiquant import appearance as ap
from epiquant import cli
from epiquant import model as m
from epiquant import quantum as qm
from epiquant import verify as vf
from epiquant.dsl import parse_trace
from epiquant.model import Basis, Sign
from epiquant.rewrite import TerminationError, random_formula, rewrite

from conftest import ACCEPTANCE, amap, network, prop, props, scenario

RING = [(1, 2), (2, 3), (3, 4), (4, 5), (5, 1)]
EDGES = RING + [(6, i) for i in range(1, 6)]


def report(n, ok, detail, seconds):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail}; {seconds:.2f}s)"
    ACCEPTANCE.append(line)
    print(line)


def ring(i):
    return (i - 1) % 5 + 1


def patterns():
    """The four success combinations at every rotation of the ring.

    Neighbours are i, i+1, i+2; a T-shape is i, i+1, i+3 with the first
    letter on the vertex that touches neither of the other two.
    """
    out = []
    for i in range(1, 6):
        nb = (ring(i), ring(i + 1), ring(i + 2))
        out.append(("neighbours-Z", i, {6: "Z", nb[0]: "Z", nb[1]: "X", nb[2]: "Z"}))
        out.append(("neighbours-Y", i, {6: "Y", nb[0]: "X", nb[1]: "Y", nb[2]: "X"}))
        apex, a, b = ring(i + 3), ring(i), ring(i + 1)
        out.append(("T-shape-Z", i, {6: "Z", apex: "X", a: "Y", b: "Y"}))
        out.append(("T-shape-Y", i, {6: "Y", apex: "Y", a: "Z", b: "Z"}))
    return out


def dense_parities(spec):
    """XOR of the four outcomes over every sign assignment of nonzero probability."""
    seen = set()
    qubits = sorted(spec)
    for signs in itertools.product((0, 1), repeat=len(qubits)):
        st = qm.DenseState()
        for v in range(1, 7):
            st.add_qubit(v)
            st.reset(v)
        for a, b in EDGES:
            st.cz(a, b)
        p = 1.0
        for q, s in zip(qubits, signs):
            p *= st.project(q, Basis(spec[q]), Sign.from_bit(s))
            if p < 1e-12:
                break
        if p > 1e-12:
            seen.add(sum(signs) % 2)
    return seen


def test_criterion_1_four_leaves(tmp_path):
    t0 = time.perf_counter()
    out = tmp_path / "heaven.json"
    code = cli.main(["verify", "qss35.dmc", "qss_sharing.prop", "heaven.scn", "-o", str(out)])
    rep = {p["label"]: p for p in json.loads(out.read_text())["properties"]}
    counts = rep["dealer_knows_players_know"]["leaf_counts"]
    assert code == 0 and counts["well_defined"] == 4 and counts["true"] == 4
    seq = prop("qss_sharing.prop", "dealer_knows_players_know")
    r = vf.check_property(seq, amap("qss35.dmc", "heaven.scn"))
    leaves = list(r.tree.leaves())
    reference = parse_trace("P6^{D,+Z} ; P1^{A1,+Z} ; P2^{A2,-X} ; P3^{A3,-Z}")
    projections = [tuple(a for a in n.leaf.lhs if isinstance(a, m.Project)) for n in leaves]
    dt = time.perf_counter() - t0
    ok = (len(leaves) == 4 and all(n.value is True for n in leaves)
          and reference in projections and r.verdict.holds and dt < 10)
    report(1, ok, f"{len(leaves)} well-defined leaves, reference leaf found={reference in projections}", dt)
    assert len(leaves) == 4
    assert all(n.value is True for n in leaves)
    assert reference in projections
    assert dt < 10


def test_criterion_2_correlation_law():
    t0 = time.perf_counter()
    st = qm.graph_state(range(1, 7), EDGES)
    bad = []
    for name, i, spec in patterns():
        e = qm.measure_expectation(st, spec)
        offset = 0 if e == 1 else 1
        if e == 0 or offset != 0 or dense_parities(spec) != {offset}:
            bad.append((name, i, e))
    dt = time.perf_counter() - t0
    report(2, not bad and dt < 5, f"{len(patterns())} pattern instances, {len(bad)} failing", dt)
    assert not bad
    assert dt < 5


def test_criterion_3_qkd_properties():
    t0 = time.perf_counter()
    am = amap("qkd.dmc", "qkd_safe.scn")
    verdicts = {label: vf.check_property(seq, am, label).verdict.holds
                for label, seq in props("qkd.prop").properties}
    dt = time.perf_counter() - t0
    want = {"sharing_AB": True, "sharing_BA": True, "secrecy": True}
    report(3, verdicts == want and dt < 5, f"verdicts {verdicts}", dt)
    assert verdicts == want
    assert dt < 5


def test_criterion_4_adversary_heaven():
    t0 = time.perf_counter()
    am = amap("qss35.dmc", "adversary_heaven.scn")
    labels = ["adversary_knows", "dealer_believes_secret", "player_believes_secret"]
    verdicts = {lb: vf.check_property(prop("adversary_heaven.prop", lb), am, lb).verdict.holds
                for lb in labels}
    # without the belief the adversary's knowledge is real: negated, it fails
    seq = prop("adversary_heaven.prop", "adversary_knows")
    neg = m.Sequent(seq.register, seq.prefix, m.Dyn(seq.rhs.trace, m.Not(seq.rhs.body), "pi"))
    real = vf.check_property(neg, am).verdict.holds
    dt = time.perf_counter() - t0
    ok = all(verdicts.values()) and real is False and dt < 30
    report(4, ok, f"verdicts {verdicts}, E-ignorance holds={real}", dt)
    assert all(verdicts.values())
    assert real is False
    assert dt < 30


def is_subsequence(needle, hay):
    it = iter(hay)
    return all(any(x == y for y in it) for x in needle)


def test_criterion_5_adversary_hell():
    t0 = time.perf_counter()
    am = amap("qss35.dmc", "adversary_hell.scn")
    r = vf.check_property(prop("adversary_hell.prop", "dealer_knows_secret"), am, max_witnesses=10_000)
    path = parse_trace("qco^{D}_{A1} q1 ; qci^{E}_{D} q1 ; P1^{E,+Z} ; N7^{E,+Z} ; "
                       "qco^{E}_{A1} q7 ; qci^{A1}_{E} q7 ; P7^{A1,+Z}")
    found = [a for a in r.attacks if is_subsequence(path, a.actions)]
    dt = time.perf_counter() - t0
    ok = not r.verdict.holds and bool(found) and dt < 60
    report(5, ok, f"fails={not r.verdict.holds}, {len(r.attacks)} attack paths, "
                  f"{len(found)} contain the reference path", dt)
    assert not r.verdict.holds
    assert found
    assert dt < 60


def test_criterion_6_oracle_equivalence():
    t0 = time.perf_counter()
    rng = random.Random(7)
    mismatches = projections = 0
    for _ in range(1000):
        ops = qm.random_circuit(rng, rng.randint(1, 6), 20)
        for pt, pd in qm.run_circuit(ops):
            projections += 1
            mismatches += not qm.agree(pt, pd)
    dt = time.perf_counter() - t0
    report(6, mismatches == 0 and dt < 60, f"{projections} projections, {mismatches} mismatches", dt)
    assert mismatches == 0
    assert dt < 60


def test_criterion_7_termination():
    t0 = time.perf_counter()
    rng = random.Random(11)
    runs = [("qss35.dmc", "qss_sharing.prop", "heaven.scn", ["D", "A1", "A2", "A3", "E"],
             ["1", "2", "3", "6"], 200),
            ("qss35.dmc", "adversary_heaven.prop", "adversary_heaven.scn",
             ["D", "A1", "A2", "A3", "E"], ["1", "2", "3", "6"], 100),
            ("qkd.dmc", "qkd.prop", "qkd_safe.scn", ["A", "B", "E"], ["1", "2"], 200)]
    violations = total = 0
    for net, pf, scn, agents, bits, n in runs:
        am = amap(net, scn)
        pi = props(pf).traces["pi"]
        register = props(pf).properties[0][1].register
        for _ in range(n):
            f = random_formula(rng, agents, bits, depth=4, boxes=2)
            assert m.box_depth(f) <= 2
            try:
                rewrite(m.Sequent(register, (), m.Dyn(pi, f, "pi")), am, check_measure=True)
            except TerminationError:
                violations += 1
            total += 1
    dt = time.perf_counter() - t0
    report(7, violations == 0 and total == 500 and dt < 120,
           f"{total} fuzzed sequents, {violations} measure violations", dt)
    assert total == 500
    assert violations == 0
    assert dt < 120


BUNDLES = [("qss35.dmc", "qss_sharing.prop", "heaven.scn"),
           ("qss35.dmc", "adversary_heaven.prop", "adversary_heaven.scn"),
           ("qss35.dmc", "adversary_hell.prop", "adversary_hell.scn"),
           ("qkd.dmc", "qkd.prop", "qkd_safe.scn")]


def test_criterion_8_determinism(tmp_path):
    t0 = time.perf_counter()
    differing = []
    for bundle in BUNDLES:
        texts = []
        for k in range(2):
            out = tmp_path / f"{bundle[1]}.{k}.json"
            cli.main(["verify", *bundle, "--output", str(out)])
            rep = json.loads(out.read_text())
            texts.append(vf.to_json(vf.strip_timestamp(rep)))
        if texts[0] != texts[1]:
            differing.append(bundle[1])
    dt = time.perf_counter() - t0
    report(8, not differing, f"{len(BUNDLES)} bundles run twice, {len(differing)} differ", dt)
    assert not differing
