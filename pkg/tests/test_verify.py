import json

from epiquant import model as m
from epiquant import verify as vf
from epiquant.dsl import parse_formula, parse_property, parse_trace
from epiquant.rewrite import AtomicExpression

from conftest import amap, prop, props, scenario


def atomic(trace, rhs):
    return AtomicExpression((1, 2), parse_trace(trace), parse_formula(rhs))


def test_check_atomic_verdicts_agree_with_dense_oracle():
    bell = "N1^{C} ; N2^{C} ; E12^{C} ; H2^{C} ; "
    cases = [(bell + "P1^{A,+X} ; P2^{B,+X}", "s2^0", vf.LeafVerdict.TRUE),
             (bell + "P1^{A,+X} ; P2^{B,+X}", "s2^1", vf.LeafVerdict.FALSE),
             (bell + "P1^{A,+X} ; P2^{B,-X}", "s2^1", vf.LeafVerdict.NOT_WELL_DEFINED),
             (bell + "P1^{A,+Z} ; P2^{B,-X}", "(s1 (+) s2)^1", vf.LeafVerdict.TRUE)]
    for trace, rhs, want in cases:
        e = atomic(trace, rhs)
        assert vf.check_atomic(e).verdict is want
        assert vf.dense_check(e) is want


def test_unbound_bit_is_false_with_diagnostic():
    r = vf.check_atomic(atomic("N1^{C} ; P1^{A,+X}", "s5^0"))
    assert r.verdict is vf.LeafVerdict.FALSE
    assert "s5" in r.diagnostic


def test_holding_property_has_no_witnesses():
    r = vf.check_property(prop("qkd.prop", "secrecy"), amap("qkd.dmc", "qkd_safe.scn"))
    assert r.verdict.holds and r.verdict.witness_count == 0 and r.attacks == []


def test_failing_property_names_witnesses():
    am = amap("qkd.dmc", "qkd_safe.scn")
    seq = parse_property("q1 (x) q2 |- [N1^{C} ; N2^{C} ; E12^{C} ; H2^{C} ; P1^{A,+X} ; "
                         "P2^{B,+X}] Box_E s1^0")
    r = vf.check_property(seq, am)
    assert not r.verdict.holds
    assert r.verdict.witness_count == len(r.verdict.witnesses) > 0
    assert all(w.value is False for w in r.verdict.witnesses)


def test_hell_attack_paths_carry_interceptions():
    r = vf.check_property(prop("adversary_hell.prop", "dealer_knows_secret"),
                          amap("qss35.dmc", "adversary_hell.scn"))
    assert not r.verdict.holds
    a = r.attacks[0]
    assert len(a.interceptions) == 3
    assert "D" in a.deceived
    for start, end in a.interceptions:
        assert isinstance(a.actions[start], m.QSend) and end - start == 6


def test_report_shape_and_determinism():
    am = amap("qss35.dmc", "heaven.scn")
    results = [vf.check_property(s, am, lb) for lb, s in props("qss_sharing.prop").properties]
    one = vf.emit_report(results, scenario("heaven.scn"), "qss35", timestamp="t0")
    two = vf.emit_report(results, scenario("heaven.scn"), "qss35", timestamp="t1")
    assert vf.to_json(vf.strip_timestamp(one)) == vf.to_json(vf.strip_timestamp(two))
    assert set(one) == {"tool", "timestamp", "network", "scenario", "flags", "properties", "summary"}
    p = one["properties"][2]
    assert p["label"] == "dealer_knows_players_know"
    assert p["leaf_counts"]["atomic"] == 4 and p["leaf_counts"]["true"] == 4
    assert one["summary"] == {"properties": 7, "holding": 7, "all_hold": True}
    json.loads(vf.to_json(one))


def test_render_text_mentions_verdicts():
    am = amap("qss35.dmc", "adversary_hell.scn")
    r = vf.check_property(prop("adversary_hell.prop", "player_knows_secret"), am, "pk")
    text = vf.render_text(vf.emit_report([r], scenario("adversary_hell.scn"), "qss35"))
    assert "pk: FAILS" in text and "attack" in text
