"""Operational semantics: trace generation, sign resolution and derivability."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Optional, Sequence

from . import model as m
from .model import Basis, Sign, SIGNS
from .quantum import StabilizerState


class SemanticsError(ValueError):
    """Ill-formed network or trace."""


class MalformedTrace(SemanticsError):
    """A quantum action touches a qubit that was never prepared.

    Kept distinct from non-derivability, which is a legitimate outcome.
    """


@dataclass
class Configuration:
    quantum: StabilizerState
    store: dict[str, int] = field(default_factory=dict)
    location: dict[int, str] = field(default_factory=dict)
    cursor: int = 0

    def copy(self) -> "Configuration":
        return Configuration(self.quantum.copy(), dict(self.store), dict(self.location), self.cursor)


@dataclass
class DerivationResult:
    derivable: bool
    configs: list[Configuration]
    failed_at: Optional[int] = None

    def __post_init__(self) -> None:
        assert self.derivable == bool(self.configs)


def check_register(register: Optional[Sequence[int]], trace: m.Trace) -> None:
    """The register bounds the qubits the original (non-fresh) actions may use."""
    if register is None:
        return
    if len(set(register)) != len(register):
        raise SemanticsError("register lists a qubit twice")


def step(config: Configuration, action: m.Action) -> float:
    """Apply one action in place; returns the probability of the step."""
    st = config.quantum
    config.cursor += 1
    if isinstance(action, m.Prep):
        if action.qubit not in st.pos:
            st.add_qubit(action.qubit)
        st.reset(action.qubit, action.basis, action.sign)
        config.location[action.qubit] = action.owner
        return 1.0
    if isinstance(action, (m.Entangle, m.Hadamard, m.Project)):
        for q in m.qubits_of(action):
            if q not in st.pos:
                raise MalformedTrace(
                    f"action {config.cursor} uses qubit {q} before it is prepared")
        if isinstance(action, m.Entangle):
            st.cz(*action.qubits)
            return 1.0
        if isinstance(action, m.Hadamard):
            st.h(action.qubit)
            return 1.0
        if action.sign is None:
            raise SemanticsError("derive needs sign-resolved projections")
        x, z = st.single(action.qubit, action.basis)
        p = st.project_pauli(x, z, action.sign.bit)
        if p:
            config.store[str(action.qubit)] = action.sign.bit
        return p
    if isinstance(action, (m.QSend, m.QBroadcast)):
        if action.qubit not in st.pos:
            raise MalformedTrace(f"qubit {action.qubit} sent before it is prepared")
        if isinstance(action, m.QBroadcast):
            config.location[action.qubit] = action.to
        return 1.0
    if isinstance(action, m.QRecv):
        config.location[action.qubit] = action.by
        return 1.0
    return 1.0


def derive(register: Optional[Sequence[int]], trace: m.Trace) -> DerivationResult:
    """Run ``trace`` from the empty register state.

    Preparations bring the register's qubits (and any fresh ones) into
    existence; a projection of probability 0 makes the prefix non-derivable.
    """
    check_register(register, trace)
    config = Configuration(StabilizerState())
    for k, action in enumerate(trace):
        if step(config, action) == 0.0:
            return DerivationResult(False, [], k)
    return DerivationResult(True, [config])


def _bit_value(store: Mapping[str, int], last_sign: Mapping[str, int], bit: m.BitAtom, sender: str):
    if bit.index in store:
        return store[bit.index]
    return last_sign.get(sender)


def fill_bits(trace: m.Trace) -> m.Trace:
    """Give every announced outcome bit the value its projection produced."""
    store: dict[str, int] = {}
    last: dict[str, int] = {}
    out = []
    for a in trace:
        if isinstance(a, m.Project) and a.sign is not None:
            store[str(a.qubit)] = a.sign.bit
            last[a.owner] = a.sign.bit
        elif isinstance(a, (m.CSend, m.CBroadcast)):
            v = _bit_value(store, last, a.bit, a.sender)
            if v is not None and a.bit.value is None:
                a = _with_bit(a, a.bit.with_value(v))
        elif isinstance(a, m.CRecv):
            v = _bit_value(store, last, a.bit, a.sender)
            if v is not None and a.bit.value is None:
                a = m.CRecv(a.by, a.sender, a.bit.with_value(v))
        out.append(a)
    return tuple(out)


def _with_bit(a, bit):
    if isinstance(a, m.CSend):
        return m.CSend(a.sender, a.to, bit)
    return m.CBroadcast(a.sender, a.group, bit)


def resolve_signs(trace: m.Trace) -> list[m.Trace]:
    """Every derivable sign assignment of the trace's unsigned projections.

    Assignments are explored depth first with ``+`` before ``-``; bits
    announced later are filled in from the resolved signs.
    """
    trace = tuple(trace)
    results: list[m.Trace] = []

    def go(k: int, config: Configuration, acc: list) -> None:
        if k == len(trace):
            results.append(fill_bits(tuple(acc)))
            return
        a = trace[k]
        if isinstance(a, m.Project) and a.sign is None:
            for s in SIGNS:
                c = config.copy()
                b = m.Project(a.owner, a.qubit, a.basis, s)
                if step(c, b):
                    go(k + 1, c, acc + [b])
            return
        if step(config, a) == 0.0:
            return
        go(k + 1, config, acc + [a])

    go(0, Configuration(StabilizerState()), [])
    return results


def eval_prop(config: Configuration, p: m.Formula) -> Optional[bool]:
    """Classical truth of a proposition; None when a bit it needs is unbound."""
    if isinstance(p, m.Top):
        return True
    if isinstance(p, m.Bottom):
        return False
    if isinstance(p, m.Bit):
        if p.index not in config.store:
            return None
        return config.store[p.index] == p.value
    if isinstance(p, m.Parity):
        if any(i not in config.store for i in p.indices):
            return None
        acc = 0
        for i in p.indices:
            acc ^= config.store[i]
        return acc == p.value
    if isinstance(p, m.QubitAtom):
        return p.index in config.quantum.pos
    if isinstance(p, m.Tensor):
        return all(q in config.quantum.pos for q in p.qubits)
    if isinstance(p, m.Not):
        v = eval_prop(config, p.body)
        return None if v is None else not v
    if isinstance(p, m.And):
        a, b = eval_prop(config, p.left), eval_prop(config, p.right)
        if a is False or b is False:
            return False
        return None if a is None or b is None else True
    if isinstance(p, m.Or):
        a, b = eval_prop(config, p.left), eval_prop(config, p.right)
        if a is True or b is True:
            return True
        return None if a is None or b is None else False
    raise SemanticsError(f"not a proposition: {type(p).__name__}")


# ---------------------------------------------------------------------------
# Trace enumeration


@dataclass(frozen=True)
class NamedTrace:
    name: str
    trace: m.Trace
    assignment: tuple[tuple[str, str, Basis], ...]
    successful: bool


def participants(net: m.NetworkSpec, players: Optional[Iterable[str]] = None) -> tuple[str, ...]:
    """Agents taking part in a run: every non-player plus the chosen players."""
    if players is None:
        chosen = set(net.participants or net.players)
    else:
        chosen = set(players)
        unknown = chosen - set(net.agent_names)
        if unknown:
            raise SemanticsError(f"unknown players: {', '.join(sorted(unknown))}")
        if net.players and not chosen <= set(net.players):
            raise SemanticsError("only declared players can be selected")
    return tuple(a for a in net.agent_names if a not in net.players or a in chosen)


def _group(net: m.NetworkSpec, sender: str, group, name: str, active: Sequence[str]):
    if group is None:
        return None
    if group == ("@recv",):
        recv = tuple(a.name for a in net.agents if a.name in active and a.name != sender
                     and any(isinstance(e, m.EvRecv) and e.name == name for e in a.events))
        return recv
    if group == ("@peers",):
        return tuple(a for a in active if a in net.players and a != sender)
    return tuple(group)


def _validate(net: m.NetworkSpec) -> None:
    owned: dict[int, str] = {}
    for ag in net.agents:
        for q in ag.qubits:
            if q in owned:
                raise SemanticsError(f"qubit {q} owned by {owned[q]} and {ag.name}")
            owned[q] = ag.name
        for ev in ag.events:
            if isinstance(ev, m.EvProject) and ev.qubit not in ag.qubits:
                raise SemanticsError(f"{ag.name} measures qubit {ev.qubit} it does not own")


def template(net: m.NetworkSpec, active: Sequence[str], bases: Mapping[tuple[str, str], Basis]) -> m.Trace:
    """The canonical trace for one parameter assignment.

    Phases: resource, distribution, projections, basis announcements,
    outcome broadcasts; agents in declaration order inside each phase.
    """
    out: list[m.Action] = list(net.resource)
    prepared = {q for a in net.resource for q in m.qubits_of(a)}
    for q in sorted(prepared):
        for ag in net.agents:
            if q in ag.qubits and ag.name != net.source:
                out.append(m.QBroadcast(net.source, ag.name, q))
    proj, ann, bits = [], [], []
    for ag in net.agents:
        if ag.name not in active:
            continue
        for ev in ag.events:
            if isinstance(ev, m.EvProject):
                basis = ev.basis if ev.param is None else bases[(ag.name, ev.param)]
                proj.append(m.Project(ag.name, ev.qubit, basis))
            elif isinstance(ev, m.EvAnnounce):
                grp = _group(net, ag.name, ev.group, ev.param, active)
                if grp == ():
                    continue
                ann.append(m.BasisAnnounce(ag.name, bases[(ag.name, ev.param)], grp))
            elif isinstance(ev, m.EvBitSend):
                grp = _group(net, ag.name, ev.group, "s" + ev.index, active)
                if grp == ():
                    continue
                bits.append(m.CBroadcast(ag.name, grp, m.BitAtom(ev.index)))
    return tuple(out + proj + ann + bits)


def deterministic_parity(net: m.NetworkSpec, trace: m.Trace) -> Optional[int]:
    """Offset ``v`` with XOR of all outcomes = v when that parity is fixed, else None."""
    st = StabilizerState()
    config = Configuration(st)
    for a in net.resource:
        step(config, a)
    x = z = 0
    for a in trace:
        if isinstance(a, m.Project):
            px, pz = st.single(a.qubit, a.basis)
            x ^= px
            z ^= pz
    if x == 0 and z == 0:
        return None
    e = st.expectation_xz(x, z)
    return None if e == 0 else (0 if e == 1 else 1)


def enumerate_traces(net: m.NetworkSpec, players: Optional[Iterable[str]] = None) -> list[NamedTrace]:
    """One sign-unresolved template per assignment of the active agents' parameters."""
    _validate(net)
    active = participants(net, players)
    params = [(ag.name, p, dom) for ag in net.agents if ag.name in active for p, dom in ag.params]
    out: list[NamedTrace] = []
    n_ok = n_other = 0
    for combo in itertools.product(*(dom for _, _, dom in params)):
        bases = {(a, p): b for (a, p, _), b in zip(params, combo)}
        trace = template(net, active, bases)
        has_proj = any(isinstance(a, m.Project) for a in trace)
        ok = has_proj and deterministic_parity(net, trace) is not None
        if ok:
            name = "pi" + "'" * n_ok
            n_ok += 1
        else:
            n_other += 1
            name = f"tau{n_other}"
        assignment = tuple((a, p, b) for (a, p, _), b in zip(params, combo))
        out.append(NamedTrace(name, trace, assignment, ok))
    return out
