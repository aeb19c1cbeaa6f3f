"""Per-agent appearance maps built from channel-safety assumptions."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Union

from . import model as m
from .model import BASES, SIGNS, Basis, Sign


class AppearanceError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    """Channel safety and adversary assumptions for one analysis.

    ``attack`` describes what the adversary really does: None for no
    interception, ``"matched"`` to intercept every target in the basis its
    recipient measures in, or explicit ``((qubit, basis), ...)`` pairs.
    ``targets`` None means every qubit sent over an unsafe quantum channel.
    """

    name: str = "scenario"
    quantum: str = "safe"
    classical: str = "safe"
    adversary: Optional[str] = None
    presence: str = "absent"
    suspicion: tuple[tuple[str, bool], ...] = ()
    suspect_all: bool = False
    intercept_bases: tuple[Basis, ...] = BASES
    targets: Optional[tuple[int, ...]] = None
    attack: object = None
    private_outsiders: str = "choices"

    def __post_init__(self) -> None:
        for key in ("quantum", "classical"):
            if getattr(self, key) not in ("safe", "unsafe"):
                raise AppearanceError(f"{key} channel must be safe or unsafe")
        if self.presence not in ("absent", "passive"):
            raise AppearanceError("presence must be absent or passive")
        if self.private_outsiders not in ("choices", "nothing"):
            raise AppearanceError("private_outsiders must be choices or nothing")
        if not self.intercept_bases:
            raise AppearanceError("the adversary needs at least one intercept basis")

    def suspicious(self, agent: str) -> bool:
        if agent == self.adversary:
            return False
        for name, flag in self.suspicion:
            if name == agent:
                return flag
        return self.suspect_all

    @property
    def quantum_unsafe(self) -> bool:
        return self.quantum == "unsafe"

    @property
    def classical_unsafe(self) -> bool:
        return self.classical == "unsafe"


# ---------------------------------------------------------------------------
# Segments
#
# Appearance maps work on segments rather than raw actions: a quantum
# delivery (send plus receive of one qubit) is a single unit that may carry
# an interception.  Materializing a segment list renames the intercepted
# qubit to a fresh one for every later action.


@dataclass(frozen=True)
class Plain:
    action: m.Action


@dataclass(frozen=True)
class Delivery:
    """``qco^S_R q; qci^R_S q``, optionally with the adversary in between."""

    sender: str
    recipient: str
    qubit: int
    interception: Optional[tuple[Basis, Sign]] = None
    adversary: str = "E"

    def plain(self) -> "Delivery":
        return Delivery(self.sender, self.recipient, self.qubit, None, self.adversary)

    def intercepted(self, basis: Basis, sign: Sign, adversary: Optional[str] = None) -> "Delivery":
        return Delivery(self.sender, self.recipient, self.qubit, (basis, sign),
                        adversary or self.adversary)


Segment = Union[Plain, Delivery]

CLASSICAL_SEGMENT = (m.BasisAnnounce, m.CBroadcast, m.CSend, m.CRecv, m.Nop)


def is_classical(seg: Segment) -> bool:
    return isinstance(seg, Plain) and isinstance(seg.action, CLASSICAL_SEGMENT)


def interception_actions(d: Delivery, fresh: int) -> m.Trace:
    basis, sign = d.interception
    e = d.adversary
    return (m.QRecv(e, d.sender, d.qubit), m.Project(e, d.qubit, basis, sign),
            m.Prep(e, fresh, basis, sign), m.QSend(e, d.recipient, fresh),
            m.QRecv(d.recipient, e, fresh))


def rename(action: m.Action, ren: dict[int, int]) -> m.Action:
    if not ren:
        return action
    if isinstance(action, m.Entangle):
        a, b = action.qubits
        if a in ren or b in ren:
            return m.Entangle(action.owner, (ren.get(a, a), ren.get(b, b)))
        return action
    if isinstance(action, (m.Prep, m.Hadamard, m.Project, m.QSend, m.QRecv, m.QBroadcast)):
        if action.qubit in ren:
            return replace(action, qubit=ren[action.qubit])
    return action


def materialize_one(seg: Segment, ren: dict[int, int], fresh: int) -> tuple[m.Trace, dict[int, int], int]:
    """Actions of one segment under the current renaming; returns the updated state."""
    if isinstance(seg, Plain):
        return (rename(seg.action, ren),), ren, fresh
    q = ren.get(seg.qubit, seg.qubit)
    if seg.interception is None:
        return (m.QSend(seg.sender, seg.recipient, q), m.QRecv(seg.recipient, seg.sender, q)), ren, fresh
    d = Delivery(seg.sender, seg.recipient, q, seg.interception, seg.adversary)
    acts = (m.QSend(seg.sender, seg.recipient, q),) + interception_actions(d, fresh)
    ren = dict(ren)
    ren[seg.qubit] = fresh
    return acts, ren, fresh + 1


def materialize(segs: Sequence[Segment], first_fresh: int) -> m.Trace:
    """Flatten segments to a trace, numbering adversary qubits from ``first_fresh``."""
    out: list[m.Action] = []
    ren: dict[int, int] = {}
    fresh = first_fresh
    for seg in segs:
        acts, ren, fresh = materialize_one(seg, ren, fresh)
        out.extend(acts)
    return tuple(out)


def segment_trace(trace: m.Trace, config: "ScenarioConfig") -> tuple[Segment, ...]:
    """Split a trace into segments under the scenario's channel assumptions.

    Unsafe channels force broadcasts apart; an explicit interception
    sequence is folded back into an intercepted delivery and the fresh
    qubit is renamed to the original one.
    """
    acts = list(trace)
    segs: list[Segment] = []
    ren: dict[int, int] = {}
    k = 0
    adversary = config.adversary or "E"
    while k < len(acts):
        a = rename(acts[k], ren)
        if isinstance(a, m.QBroadcast) and config.quantum_unsafe:
            segs.append(Delivery(a.sender, a.to, a.qubit, None, adversary))
            k += 1
            continue
        if isinstance(a, m.QSend):
            nxt = acts[k + 1] if k + 1 < len(acts) else None
            if (isinstance(nxt, m.QRecv) and nxt.by == a.to and nxt.sender == a.sender
                    and nxt.qubit == acts[k].qubit):
                if config.quantum_unsafe:
                    segs.append(Delivery(a.sender, a.to, a.qubit, None, adversary))
                else:
                    segs.extend((Plain(a), Plain(rename(nxt, ren))))
                k += 2
                continue
            tail = acts[k + 1:k + 6]
            if len(tail) == 5 and _is_interception(acts[k], tail):
                _, proj, prep, _, _ = tail
                segs.append(Delivery(a.sender, a.to, a.qubit, (proj.basis, proj.sign),
                                     proj.owner))
                ren[prep.qubit] = a.qubit
                k += 6
                continue
        if isinstance(a, m.CBroadcast) and not a.public and config.classical_unsafe:
            segs.extend(Plain(x) for x in m.decompose_broadcast(a))
            k += 1
            continue
        segs.append(Plain(a))
        k += 1
    return tuple(segs)


def _is_interception(send: m.QSend, tail) -> bool:
    r, p, n, s2, r2 = tail
    if not (isinstance(r, m.QRecv) and isinstance(p, m.Project) and isinstance(n, m.Prep)
            and isinstance(s2, m.QSend) and isinstance(r2, m.QRecv)):
        return False
    e = r.by
    return (r.sender == send.sender and r.qubit == send.qubit
            and p.owner == e and p.qubit == send.qubit and p.sign is not None
            and n.owner == e and (n.basis, n.sign) == (p.basis, p.sign)
            and s2.sender == e and s2.to == send.to and s2.qubit == n.qubit
            and r2.by == send.to and r2.sender == e and r2.qubit == n.qubit)


# ---------------------------------------------------------------------------
# Appearance maps


@dataclass(frozen=True)
class AppearanceMap:
    """``f_A`` for every agent under one scenario."""

    config: ScenarioConfig
    net: m.NetworkSpec
    agents: tuple[str, ...]

    @property
    def adversary(self) -> Optional[str]:
        return self.config.adversary

    @property
    def first_fresh(self) -> int:
        return self.net.register_size + 1

    def targeted(self, qubit: int) -> bool:
        t = self.config.targets
        return t is None or qubit in t

    def interceptions(self, d: Delivery) -> tuple[Delivery, ...]:
        return tuple(d.intercepted(b, s, self.adversary) for b in self.config.intercept_bases
                     for s in SIGNS)

    # -- segments ----------------------------------------------------------

    def segment_image(self, agent: str, seg: Segment) -> tuple[Segment, ...]:
        if isinstance(seg, Delivery):
            return self._delivery_image(agent, seg)
        a = seg.action
        if isinstance(a, (m.Prep, m.Entangle, m.Hadamard, m.Nop, m.QBroadcast, m.QSend, m.QRecv)):
            return (seg,)
        if isinstance(a, m.Project):
            if agent == a.owner:
                return (seg,)
            alts = [seg] + [Plain(m.Project(a.owner, a.qubit, b, s))
                            for b in self.net.allowed_bases(a.owner) for s in SIGNS]
            return _dedup(alts)
        if isinstance(a, m.BasisAnnounce):
            if a.public or agent == a.owner or agent in a.group:
                return (seg,)
            if self.config.private_outsiders == "nothing":
                return (Plain(m.Nop()),)
            alts = [seg] + [Plain(m.BasisAnnounce(a.owner, b, a.group))
                            for b in self.net.allowed_bases(a.owner)]
            return _dedup(alts)
        if isinstance(a, m.CBroadcast):
            if a.public or agent == a.sender or agent in a.group:
                return (seg,)
            return self._bit_choices(seg, a.bit, lambda bit: m.CBroadcast(a.sender, a.group, bit))
        if isinstance(a, (m.CSend, m.CRecv)):
            ends = (a.sender, a.to) if isinstance(a, m.CSend) else (a.by, a.sender)
            if agent in ends:
                return (seg,)
            if agent == self.adversary and (self.config.classical_unsafe
                                            or self.config.presence == "passive"):
                return (seg,)
            if isinstance(a, m.CSend):
                return self._bit_choices(seg, a.bit, lambda bit: m.CSend(a.sender, a.to, bit))
            return self._bit_choices(seg, a.bit, lambda bit: m.CRecv(a.by, a.sender, bit))
        raise AppearanceError(f"no appearance rule covers {type(a).__name__}")

    def _bit_choices(self, seg: Plain, bit: m.BitAtom, make) -> tuple[Segment, ...]:
        if self.config.private_outsiders == "nothing":
            return (Plain(m.Nop()),)
        if bit.value is None:
            return (seg,)
        return (seg, Plain(make(bit.with_value(1 - bit.value))))

    def _delivery_image(self, agent: str, d: Delivery) -> tuple[Segment, ...]:
        if not self.config.quantum_unsafe or not self.targeted(d.qubit):
            return (d,)
        if agent == self.adversary:
            return (d,) if d.interception else self.interceptions(d)
        if self.config.suspicious(agent):
            return (d.plain(),) + self.interceptions(d.plain())
        return (d.plain(),)

    def segments_image(self, agent: str, segs: Sequence[Segment]) -> list[tuple[Segment, ...]]:
        return [self.segment_image(agent, s) for s in segs]

    # -- actions and traces --------------------------------------------------

    def apply_action(self, agent: str, action: m.Action, fresh: Optional[int] = None) -> list[m.Trace]:
        """Alternatives of a single action as seen by ``agent``.

        Quantum sends and receives on an unsafe channel show the halves of
        an interception sequence; everything else goes through the segment
        rules.
        """
        j = self.first_fresh if fresh is None else fresh
        e = self.adversary
        if isinstance(action, (m.QSend, m.QRecv)) and self.config.quantum_unsafe:
            if action.qubit <= self.net.register_size and self.targeted(action.qubit):
                if isinstance(action, m.QSend) and action.sender != e:
                    d = Delivery(action.sender, action.to, action.qubit, None, e)
                    seqs = [materialize([x], j)[:5] for x in self.interceptions(d)]
                    if agent == e:
                        return seqs
                    if self.config.suspicious(agent):
                        return [(action,)] + seqs
                    return [(action,)]
                if isinstance(action, m.QRecv) and action.sender != e:
                    d = Delivery(action.sender, action.by, action.qubit, None, e)
                    if agent == e:
                        return [(m.QRecv(action.by, e, j),)]
                    if self.config.suspicious(agent):
                        return [(action,)] + [materialize([x], j)[1:] for x in self.interceptions(d)]
                    return [(action,)]
        if e is not None and _owned_by(action, e) and agent != e:
            if not self.config.suspicious(agent):
                return [(m.Nop(),)]
            return [(action,)]
        segs = segment_trace((action,), self.config)
        return self._expand(agent, segs)

    def apply_trace(self, agent: str, trace: m.Trace) -> list[m.Trace]:
        """Pointwise images composed sequentially; exactly prod(|image|) traces."""
        return self._expand(agent, segment_trace(tuple(trace), self.config))

    def _expand(self, agent: str, segs: Sequence[Segment]) -> list[m.Trace]:
        images = self.segments_image(agent, segs)
        return [materialize(c, self.first_fresh) for c in itertools.product(*images)]

    def image_size(self, agent: str, trace: m.Trace) -> int:
        n = 1
        for img in self.segments_image(agent, segment_trace(tuple(trace), self.config)):
            n *= len(img)
        return n

    # -- reality -------------------------------------------------------------

    def attack_plan(self, segs: Sequence[Segment]) -> dict[int, Basis]:
        """Qubits the scenario's adversary really intercepts, with the basis used."""
        attack = self.config.attack
        if attack is None or not self.config.quantum_unsafe:
            return {}
        deliveries = [s for s in segs if isinstance(s, Delivery) and self.targeted(s.qubit)]
        if attack == "matched":
            plan = {}
            for d in deliveries:
                for s in segs:
                    if (isinstance(s, Plain) and isinstance(s.action, m.Project)
                            and s.action.owner == d.recipient and s.action.qubit == d.qubit):
                        plan[d.qubit] = s.action.basis
            return plan
        return {q: b for q, b in attack if any(d.qubit == q for d in deliveries)}


def _owned_by(action: m.Action, agent: str) -> bool:
    if isinstance(action, m.Nop):
        return False
    return m.owner(action) == agent


def _dedup(alts) -> tuple:
    seen = []
    for a in alts:
        if a not in seen:
            seen.append(a)
    return tuple(seen)


def build(config: ScenarioConfig, net: m.NetworkSpec) -> AppearanceMap:
    if config.quantum_unsafe and config.adversary is None:
        raise AppearanceError("an unsafe quantum channel needs a declared adversary")
    if config.adversary is not None and config.adversary in net.agent_names:
        if any(config.adversary == a.name for a in net.agents if a.events):
            raise AppearanceError(f"adversary {config.adversary} is also a protocol agent")
    agents = net.agent_names + ((config.adversary,) if config.adversary
                                and config.adversary not in net.agent_names else ())
    for name, _ in config.suspicion:
        if name not in agents:
            raise AppearanceError(f"suspicion set for unknown agent {name!r}")
    return AppearanceMap(config, net, agents)
