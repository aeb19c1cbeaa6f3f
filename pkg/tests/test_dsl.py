import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epiquant import dsl
from epiquant import model as m
from epiquant.model import Basis, Sign

from conftest import read


def test_parse_signed_projections():
    t = dsl.parse_trace("P6^{D,+Z}; P1^{A1,-Z}; P2^{A2,−X}")
    assert t == (m.Project("D", 6, Basis.Z, Sign.PLUS), m.Project("A1", 1, Basis.Z, Sign.MINUS),
                 m.Project("A2", 2, Basis.X, Sign.MINUS))


def test_parse_communication_actions():
    t = dsl.parse_trace("qco^{D}_{A1} q1 ; qci^{E}_{D} q1 ; qcio^{D}_{A2} q2 ; "
                        "ccio^{A1}_{A2,A3} s1=1 ; cco^{A}_{B} s1 ; Z!^{D} ; X!^{A}_{B} ; skip")
    assert t[0] == m.QSend("D", "A1", 1)
    assert t[1] == m.QRecv("E", "D", 1)
    assert t[2] == m.QBroadcast("D", "A2", 2)
    assert t[3] == m.CBroadcast("A1", ("A2", "A3"), m.BitAtom("1", 1))
    assert t[4] == m.CSend("A", "B", m.BitAtom("1"))
    assert t[5] == m.BasisAnnounce("D", Basis.Z)
    assert t[6] == m.BasisAnnounce("A", Basis.X, ("B",))
    assert t[7] == m.Nop()


def test_entangle_forms():
    assert dsl.parse_trace("E12^{C}") == dsl.parse_trace("E_{1,2}^{C}")
    assert dsl.parse_trace("N7^{E,-Z}") == (m.Prep("E", 7, Basis.Z, Sign.MINUS),)


def test_formula_precedence():
    f = dsl.parse_formula("Box_D s6^0 & ~s1^1 | true")
    assert f == m.Or(m.And(m.Box("D", m.Bit("6", 0)), m.Not(m.Bit("1", 1))), m.Top())
    g = dsl.parse_formula("□_{A1} (s6^0 ∧ (s1 ⊕ s2 ⊕ s3)^0)")
    assert g == m.Box("A1", m.And(m.Bit("6", 0), m.Parity(("1", "2", "3"), 0)))
    assert dsl.parse_formula("xor(s1, s2)=1") == m.Parity(("1", "2"), 1)


def test_registers():
    assert dsl.parse_property("⊗_{i=1}^{6} q_i ⊢ s6^0").register == (1, 2, 3, 4, 5, 6)
    assert dsl.parse_property("q1 (x) q2 |- s1^0").register == (1, 2)
    assert dsl.parse_property("q |- true").register is None


def test_property_file_resolves_trace_names():
    pf = dsl.parse_property_file(read("qss_sharing.prop")[0])
    assert "pi" in pf.traces
    label, seq = pf.properties[0]
    assert label == "dealer_knows"
    assert isinstance(seq.rhs, m.Dyn) and seq.rhs.trace == pf.traces["pi"]
    assert len(pf.properties) == 7


def test_property_file_lines_end_after_bare_literals():
    text = "trace t = N1^{A}\nproperty a: q1 |- [t] s1^0\nproperty b: q1 |- [t] s1=1\n"
    pf = dsl.parse_property_file(text)
    assert [lb for lb, _ in pf.properties] == ["a", "b"]


def test_unresolved_trace_name_has_span():
    with pytest.raises(dsl.ParseError) as e:
        dsl.parse_property_file("property a: q1 |- [nope] s1^0\n", file="x.prop")
    assert e.value.span.file == "x.prop"
    assert e.value.span.line == 1 and e.value.span.column == 20
    assert "nope" in str(e.value)


def test_error_span_points_at_offending_token():
    with pytest.raises(dsl.ParseError) as e:
        dsl.parse_trace("N1^{C} ; P2^{A,+W}")
    assert e.value.span.column >= 10
    with pytest.raises(dsl.ParseError):
        dsl.parse_formula("s1^0 &")


def test_network_statement_form(qss):
    assert qss.source == "D"
    assert len(qss.graph) == 10
    assert sum(isinstance(a, m.Entangle) for a in qss.resource) == 10
    assert qss.participants == ("A1", "A2", "A3")
    assert qss.agent("D").params[0][1] == (Basis.Y, Basis.Z)


def test_network_inline_form(qkd):
    assert [a.name for a in qkd.agents] == ["A", "B"]
    assert qkd.resource == dsl.parse_trace("N1^{C} ; N2^{C} ; E12^{C} ; H2^{C}")


def test_network_rejects_shared_qubits():
    text = "name x\nsource S\nresource N1^{S}\nagent A(1) : M1\nagent B(1) : M1\n"
    with pytest.raises(dsl.NetworkError) as e:
        dsl.parse_network(text, "x.dmc")
    assert e.value.span.line == 5


def test_network_rejects_unowned_measurement():
    with pytest.raises(dsl.NetworkError):
        dsl.parse_network("name x\nsource S\nresource N1^{S}\nagent A(1) : M2\n")


def test_network_roundtrip(qss, qkd):
    for net in (qss, qkd):
        assert dsl.parse_network(dsl.pretty_network(net)) == net


def test_scenario_keys():
    c = dsl.parse_scenario(read("adversary_hell.scn")[0])
    assert c.quantum == "unsafe" and c.adversary == "E"
    assert c.suspicious("D") and c.suspicious("A3") and not c.suspicious("A4")
    assert c.targets == (1, 2, 3)
    c = dsl.parse_scenario("attack = 1:Z 2:X\nquantum = unsafe\nadversary = E\n")
    assert c.attack == ((1, Basis.Z), (2, Basis.X))


def test_scenario_rejects_two_adversaries():
    with pytest.raises(dsl.ParseError):
        dsl.parse_scenario("adversary = E\nadversary = F\n")
    with pytest.raises(dsl.ParseError):
        dsl.parse_scenario("adversary = E F\n")


def test_scenario_rejects_unknown_key():
    with pytest.raises(dsl.ParseError) as e:
        dsl.parse_scenario("quantum = safe\ncolour = red\n", "s.scn")
    assert e.value.span.line == 2


# -- generated round trips ---------------------------------------------------

agents = st.sampled_from(["A", "B", "D", "E", "A1", "A2"])
qubits = st.integers(1, 12)
bases = st.sampled_from(list(Basis))
signs = st.sampled_from(list(Sign))
bits = st.builds(m.BitAtom, st.sampled_from(["1", "2", "6"]), st.none() | st.integers(0, 1))


def entangle(owner, a, b):
    return m.Entangle(owner, (a, b if b != a else a % 12 + 1))


actions = st.one_of(
    st.builds(m.Prep, agents, qubits, bases, signs),
    st.builds(entangle, agents, qubits, qubits),
    st.builds(m.Hadamard, agents, qubits),
    st.builds(m.Project, agents, qubits, bases, signs),
    st.builds(m.QSend, agents, agents, qubits),
    st.builds(m.QRecv, agents, agents, qubits),
    st.builds(m.QBroadcast, agents, agents, qubits),
    st.builds(m.CSend, agents, agents, bits),
    st.builds(m.CRecv, agents, agents, bits),
    st.builds(m.CBroadcast, agents, st.none() | st.tuples(agents, agents), bits),
    st.builds(m.BasisAnnounce, agents, bases, st.none() | st.tuples(agents)),
    st.just(m.Nop()),
)

props = st.recursive(
    st.one_of(st.builds(m.Bit, st.sampled_from(["1", "2", "6"]), st.integers(0, 1)),
              st.builds(m.Parity, st.lists(st.sampled_from(["1", "2", "3"]), min_size=2,
                                           max_size=3).map(tuple), st.integers(0, 1)),
              st.just(m.Top()), st.just(m.Bottom())),
    lambda inner: st.one_of(st.builds(m.Not, inner), st.builds(m.And, inner, inner),
                            st.builds(m.Or, inner, inner), st.builds(m.Box, agents, inner)),
    max_leaves=6,
)


@settings(max_examples=200, deadline=None)
@given(st.lists(actions, min_size=1, max_size=6).map(tuple))
def test_trace_roundtrip(trace):
    assert dsl.parse_trace(dsl.pretty_trace(trace)) == trace


@settings(max_examples=200, deadline=None)
@given(props, st.booleans())
def test_formula_roundtrip(f, unicode):
    assert dsl.parse_formula(dsl.pretty_formula(f, unicode=unicode)) == f


@settings(max_examples=100, deadline=None)
@given(st.lists(actions, max_size=3).map(tuple), props)
def test_sequent_roundtrip(trace, f):
    seq = m.Sequent((1, 2, 3), (), m.Dyn(trace, f))
    assert dsl.parse_property(dsl.pretty_sequent(seq)) == seq
