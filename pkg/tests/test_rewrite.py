import random

import pytest

from epiquant import model as m
from epiquant import rewrite as rw
from epiquant.dsl import parse_formula, parse_property, parse_trace
from epiquant.semantics import eval_prop

from conftest import amap, prop, props


def ev(expr, config):
    return eval_prop(config, expr.rhs)


def test_termination_measure_orders_rules():
    f = parse_formula("Box_D ~(s1^0 & s2^0)")
    t = parse_trace("qcio^{D}_{A1} q1 ; ccio^{A1} s1")
    assert rw.termination_measure(f, t) == (1, 2, 2)
    assert rw.comm_count(t) == 2


def test_box_counts_add_up():
    am = amap("qss35.dmc", "heaven.scn")
    seq = prop("qss_sharing.prop", "dealer_knows_players_know")
    res = rw.rewrite(seq, am, evaluate=ev)
    boxes = [n for n in res.tree.walk() if n.rule == "box"]
    assert boxes[0].agent == "D" and boxes[0].total == 1728
    for b in boxes:
        assert b.total == sum(b.pruned.values()) + len(b.children) + b.skipped
    assert len(list(res.tree.leaves())) == 4


def test_leaves_are_atomic_expressions():
    am = amap("qkd.dmc", "qkd_safe.scn")
    res = rw.rewrite(prop("qkd.prop", "sharing_AB"), am, evaluate=ev)
    for leaf in res.leaves:
        assert leaf.is_atomic()
        assert not any(m.is_communication(a) for a in leaf.lhs)
    assert all(n.eliminated == 4 for n in res.tree.leaves())


def test_adjunction_resolves_unsigned_projections():
    am = amap("qkd.dmc", "qkd_safe.scn")
    seq = parse_property("q1 (x) q2 |- [N1^{C} ; N2^{C} ; E12^{C} ; H2^{C} ; "
                         "P1^{A,Z} ; P2^{B,Z}] (s1 (+) s2)^0")
    res = rw.rewrite(seq, am, evaluate=ev)
    assert res.tree.rule == "adjunction"
    assert len(res.tree.children) == 2
    assert res.tree.value is True


def test_underivable_prefix_is_vacuous():
    am = amap("qkd.dmc", "qkd_safe.scn")
    seq = parse_property("q1 (x) q2 |- [N1^{C} ; N2^{C} ; E12^{C} ; H2^{C} ; "
                         "P1^{A,+X} ; P2^{B,-X}] s1^1")
    res = rw.rewrite(seq, am, evaluate=ev)
    assert res.tree.value is None
    assert res.tree.note == "trace not derivable" and not res.tree.children


def test_short_circuit_only_below_top_box():
    am = amap("qss35.dmc", "adversary_hell.scn")
    seq = prop("adversary_hell.prop", "player_knows_secret")
    full = rw.rewrite(seq, am, evaluate=ev)
    short = rw.rewrite(seq, am, evaluate=ev, short_circuit=True)
    top_full = next(n for n in full.tree.walk() if n.rule == "box")
    top_short = next(n for n in short.tree.walk() if n.rule == "box")
    assert len(top_full.children) == len(top_short.children)
    assert sum(n.skipped for n in short.tree.walk() if n.rule == "box") > 0
    assert full.tree.value == short.tree.value


def test_register_size_must_match_network():
    am = amap("qkd.dmc", "qkd_safe.scn")
    with pytest.raises(rw.RewriteError):
        rw.rewrite(parse_property("q1 |- s1^0"), am)


def test_box_nesting_limit():
    am = amap("qkd.dmc", "qkd_safe.scn")
    with pytest.raises(rw.RewriteError):
        rw.rewrite(parse_property("q1 (x) q2 |- Box_A Box_B Box_A s1^0"), am)


def test_unknown_agent_in_box():
    am = amap("qkd.dmc", "qkd_safe.scn")
    with pytest.raises(rw.RewriteError):
        rw.rewrite(parse_property("q1 (x) q2 |- Box_Z s1^0"), am)


def test_measure_decreases_on_every_step():
    am = amap("qkd.dmc", "qkd_safe.scn")
    pi = props("qkd.prop").traces["pi"]
    rng = random.Random(5)
    for _ in range(50):
        f = rw.random_formula(rng, ["A", "B", "E"], ["1", "2"], 4)
        res = rw.rewrite(m.Sequent((1, 2), (), m.Dyn(pi, f)), am)
        for n in res.tree.walk():
            for c in n.children:
                assert c.measure < n.measure


def test_render_tree_limit():
    am = amap("qss35.dmc", "heaven.scn")
    res = rw.rewrite(prop("qss_sharing.prop", "dealer_knows"), am, evaluate=ev)
    lines = rw.render_tree(res.tree, limit=3)
    assert len(lines) <= 4
    assert "box D total=1728" in "\n".join(rw.render_tree(res.tree))
