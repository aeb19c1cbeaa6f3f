"""Domain vocabulary shared by every stage of the verifier.

Actions, traces, propositions, modal formulas, sequents and network
descriptions.  Everything here is an immutable value; the parser in
:mod:`epiquant.dsl` builds these objects and every other module consumes them.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Union


class ModelError(ValueError):
    """Misuse of the vocabulary (e.g. asking the owner of a Nop)."""


class Basis(enum.Enum):
    X = "X"
    Y = "Y"
    Z = "Z"

    def __str__(self) -> str:
        return self.value


class Sign(enum.Enum):
    PLUS = "+"
    MINUS = "-"

    @property
    def bit(self) -> int:
        return 0 if self is Sign.PLUS else 1

    @classmethod
    def from_bit(cls, bit: int) -> "Sign":
        if bit not in (0, 1):
            raise ModelError(f"outcome bit must be 0 or 1, got {bit!r}")
        return cls.PLUS if bit == 0 else cls.MINUS

    def __str__(self) -> str:
        return self.value


SIGNS = (Sign.PLUS, Sign.MINUS)
BASES = (Basis.X, Basis.Y, Basis.Z)

#: Marker for a classical broadcast addressed to everyone.
PUBLIC = None


@dataclass(frozen=True)
class BitAtom:
    """A classical bit ``s_index``; ``value`` is None until the run fixes it."""

    index: str
    value: Optional[int] = None

    def __post_init__(self) -> None:
        if not self.index:
            raise ModelError("bit index must be non-empty")
        if self.value is not None and self.value not in (0, 1):
            raise ModelError(f"bit value must be 0 or 1, got {self.value!r}")

    def with_value(self, value: Optional[int]) -> "BitAtom":
        return BitAtom(self.index, value)


# ---------------------------------------------------------------------------
# Actions


@dataclass(frozen=True)
class Prep:
    """``N_i^C``: prepare qubit ``i`` in the ``sign``-eigenstate of ``basis``."""

    owner: str
    qubit: int
    basis: Basis = Basis.X
    sign: Sign = Sign.PLUS


@dataclass(frozen=True)
class Entangle:
    """``E_{i,j}^C``: controlled-Z between two qubits."""

    owner: str
    qubits: tuple[int, int]

    def __post_init__(self) -> None:
        if self.qubits[0] == self.qubits[1]:
            raise ModelError("entangling a qubit with itself")


@dataclass(frozen=True)
class Hadamard:
    owner: str
    qubit: int


@dataclass(frozen=True)
class Project:
    """``P_i^{A,±α}``; ``sign`` is None in unresolved trace templates."""

    owner: str
    qubit: int
    basis: Basis
    sign: Optional[Sign] = None


@dataclass(frozen=True)
class QSend:
    sender: str
    to: str
    qubit: int


@dataclass(frozen=True)
class QRecv:
    by: str
    sender: str
    qubit: int


@dataclass(frozen=True)
class QBroadcast:
    """``qcio^C_X q``: shorthand for a matched quantum send and receive."""

    sender: str
    to: str
    qubit: int


@dataclass(frozen=True)
class CSend:
    sender: str
    to: str
    bit: BitAtom


@dataclass(frozen=True)
class CRecv:
    by: str
    sender: str
    bit: BitAtom


@dataclass(frozen=True)
class CBroadcast:
    """``ccio^A_β s``; ``group`` is None for a public announcement."""

    sender: str
    group: Optional[tuple[str, ...]]
    bit: BitAtom

    @property
    def public(self) -> bool:
        return self.group is None


@dataclass(frozen=True)
class BasisAnnounce:
    """``Z!^D``: the owner announces the basis it measured in.

    ``group`` restricts the announcement to a set of receivers (QKD's
    ``c!a``); None makes it public.
    """

    owner: str
    basis: Basis
    group: Optional[tuple[str, ...]] = None

    @property
    def public(self) -> bool:
        return self.group is None


@dataclass(frozen=True)
class Nop:
    pass


Action = Union[
    Prep, Entangle, Hadamard, Project, QSend, QRecv, QBroadcast,
    CSend, CRecv, CBroadcast, BasisAnnounce, Nop,
]
Trace = tuple  # tuple[Action, ...]

QUANTUM_ATOMIC = (Prep, Entangle, Hadamard, Project)
QUANTUM_COMM = (QSend, QRecv, QBroadcast)
CLASSICAL_COMM = (CSend, CRecv, CBroadcast, BasisAnnounce)
COMMUNICATION = QUANTUM_COMM + CLASSICAL_COMM


def owner(action: Action) -> str:
    """The agent performing ``action`` (sender for sends, receiver for receives)."""
    if isinstance(action, Nop):
        raise ModelError("the neutral action has no owner")
    if isinstance(action, (Prep, Entangle, Hadamard, Project, BasisAnnounce)):
        return action.owner
    if isinstance(action, (QSend, QBroadcast, CSend, CBroadcast)):
        return action.sender
    if isinstance(action, (QRecv, CRecv)):
        return action.by
    raise ModelError(f"not an action: {action!r}")


def qubits_of(action: Action) -> tuple[int, ...]:
    if isinstance(action, Entangle):
        return action.qubits
    if isinstance(action, (Prep, Hadamard, Project, QSend, QRecv, QBroadcast)):
        return (action.qubit,)
    return ()


def is_communication(action: Action) -> bool:
    return isinstance(action, COMMUNICATION)


def decompose_broadcast(action: Action) -> Trace:
    """Split a broadcast shorthand into its send and receive actions.

    A private classical broadcast to ``k`` agents becomes one send per
    receiver followed by the matching receives, in group order.
    """
    if isinstance(action, QBroadcast):
        return (QSend(action.sender, action.to, action.qubit),
                QRecv(action.to, action.sender, action.qubit))
    if isinstance(action, CBroadcast):
        if action.group is None:
            raise ModelError("public announcements are not decomposed")
        sends = tuple(CSend(action.sender, to, action.bit) for to in action.group)
        recvs = tuple(CRecv(to, action.sender, action.bit) for to in action.group)
        return sends + recvs
    raise ModelError(f"not a broadcast: {action!r}")


def is_resolved(trace: Trace) -> bool:
    return all(a.sign is not None for a in trace if isinstance(a, Project))


# ---------------------------------------------------------------------------
# Propositions and formulas


@dataclass(frozen=True)
class Top:
    pass


@dataclass(frozen=True)
class Bottom:
    pass


@dataclass(frozen=True)
class Bit:
    """``s_index^value``."""

    index: str
    value: int

    def __post_init__(self) -> None:
        if self.value not in (0, 1):
            raise ModelError(f"bit literal value must be 0 or 1, got {self.value!r}")


@dataclass(frozen=True)
class QubitAtom:
    index: int


@dataclass(frozen=True)
class Tensor:
    qubits: tuple[int, ...]


@dataclass(frozen=True)
class Parity:
    """The XOR of the listed bits equals ``value``."""

    indices: tuple[str, ...]
    value: int

    def __post_init__(self) -> None:
        if not self.indices:
            raise ModelError("parity atom needs at least one bit")
        if self.value not in (0, 1):
            raise ModelError(f"parity value must be 0 or 1, got {self.value!r}")


@dataclass(frozen=True)
class Not:
    body: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Box:
    """``□_agent body``: the agent knows ``body``."""

    agent: str
    body: "Formula"


@dataclass(frozen=True)
class Dyn:
    """``[trace] body``; ``name`` only remembers how the trace was referenced."""

    trace: Trace
    body: "Formula"
    name: Optional[str] = field(default=None, compare=False)


ATOMS = (Top, Bottom, Bit, QubitAtom, Tensor, Parity)
Proposition = Union[Top, Bottom, Bit, QubitAtom, Tensor, Parity, Not, And, Or]
Formula = Union[Proposition, Box, Dyn]


def is_proposition(f: Formula) -> bool:
    if isinstance(f, ATOMS):
        return True
    if isinstance(f, Not):
        return is_proposition(f.body)
    if isinstance(f, (And, Or)):
        return is_proposition(f.left) and is_proposition(f.right)
    return False


def free_bits(p: Formula) -> set[str]:
    """Bit indices mentioned anywhere in ``p`` (parity atoms included)."""
    if isinstance(p, Bit):
        return {p.index}
    if isinstance(p, Parity):
        return set(p.indices)
    if isinstance(p, (Not, Box, Dyn)):
        return free_bits(p.body)
    if isinstance(p, (And, Or)):
        return free_bits(p.left) | free_bits(p.right)
    return set()


def box_depth(f: Formula) -> int:
    if isinstance(f, Box):
        return 1 + box_depth(f.body)
    if isinstance(f, (Not, Dyn)):
        return box_depth(f.body)
    if isinstance(f, (And, Or)):
        return max(box_depth(f.left), box_depth(f.right))
    return 0


def modal_depth(f: Formula) -> int:
    """Count of nested box and dynamic modalities."""
    if isinstance(f, (Box, Dyn)):
        return 1 + modal_depth(f.body)
    if isinstance(f, Not):
        return modal_depth(f.body)
    if isinstance(f, (And, Or)):
        return max(modal_depth(f.left), modal_depth(f.right))
    return 0


def connective_count(f: Formula) -> int:
    if isinstance(f, (And, Or)):
        return 1 + connective_count(f.left) + connective_count(f.right)
    if isinstance(f, (Not, Box, Dyn)):
        return (1 if isinstance(f, Not) else 0) + connective_count(f.body)
    return 0


@dataclass(frozen=True)
class Sequent:
    """``register ; prefix ⊢ rhs``.

    ``register`` is None for the bare ``q`` register, whose size is taken
    from the network being verified.
    """

    register: Optional[tuple[int, ...]]
    prefix: Trace
    rhs: Formula


# ---------------------------------------------------------------------------
# Networks


@dataclass(frozen=True)
class EvProject:
    """Measure ``qubit`` in a fixed basis or in the basis bound to ``param``."""

    qubit: int
    basis: Optional[Basis] = None
    param: Optional[str] = None


@dataclass(frozen=True)
class EvAnnounce:
    """Announce the basis held by ``param``.

    ``group`` is None for public, ``("@recv",)`` when receivers are the
    agents with a matching ``c?param`` event, ``("@peers",)`` for the other
    participating players, or an explicit tuple of agent names.
    """

    param: str
    group: Optional[tuple[str, ...]] = None


@dataclass(frozen=True)
class EvBitSend:
    """Broadcast the outcome bit ``s_index``; group conventions as EvAnnounce."""

    index: str
    group: Optional[tuple[str, ...]] = None


@dataclass(frozen=True)
class EvRecv:
    name: str


Event = Union[EvProject, EvAnnounce, EvBitSend, EvRecv]


@dataclass(frozen=True)
class AgentSpec:
    name: str
    params: tuple[tuple[str, tuple[Basis, ...]], ...]
    qubits: tuple[int, ...]
    events: tuple[Event, ...]

    def param_domain(self, name: str) -> tuple[Basis, ...]:
        for pname, dom in self.params:
            if pname == name:
                return dom
        raise KeyError(name)


@dataclass(frozen=True)
class NetworkSpec:
    name: str
    source: str
    resource: Trace
    agents: tuple[AgentSpec, ...]
    graph: tuple[tuple[int, int], ...] = ()
    players: tuple[str, ...] = ()
    participants: tuple[str, ...] = ()

    @property
    def qubits(self) -> tuple[int, ...]:
        seen: set[int] = set()
        for a in self.resource:
            seen.update(qubits_of(a))
        for ag in self.agents:
            seen.update(ag.qubits)
        return tuple(sorted(seen))

    @property
    def register_size(self) -> int:
        return max(self.qubits, default=0)

    def agent(self, name: str) -> AgentSpec:
        for ag in self.agents:
            if ag.name == name:
                return ag
        raise KeyError(name)

    @property
    def agent_names(self) -> tuple[str, ...]:
        return tuple(ag.name for ag in self.agents)

    def allowed_bases(self, name: str) -> tuple[Basis, ...]:
        """Bases an agent's projections may use, as seen by other agents."""
        try:
            ag = self.agent(name)
        except KeyError:
            return BASES
        found: set[Basis] = set()
        for ev in ag.events:
            if isinstance(ev, EvProject):
                if ev.basis is not None:
                    found.add(ev.basis)
                else:
                    found.update(ag.param_domain(ev.param))
        return tuple(b for b in BASES if b in found) or BASES
