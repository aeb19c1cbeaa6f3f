"""Parsers and pretty-printers for ``.dmc``, ``.prop`` and ``.scn`` files.

Every Unicode symbol has an ASCII spelling::

    ⊢  |-      ⊗  (x)     □_A  Box_A     ¬  ~ / not
    ∧  &       ∨  |       ⊕  (+)         ⊤ ⊥  true false
    ∥  ||      −  -

Lines are statements; ``#`` starts a comment.  A statement continues on the
next line while brackets are open or when the line ends with ``;``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

from . import model as m
from .appearance import AppearanceError, ScenarioConfig
from .model import BASES, Basis, Sign


@dataclass(frozen=True)
class SourceSpan:
    file: str
    line: int
    column: int
    length: int = 1

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


class ParseError(ValueError):
    def __init__(self, span: SourceSpan, message: str, expected=()):
        self.span = span
        self.message = message or "syntax error"
        self.expected = tuple(expected)
        text = f"{span}: {self.message}"
        if self.expected and not self.message.startswith("expected"):
            text += f" (expected {', '.join(self.expected)})"
        super().__init__(text)


class NetworkError(ParseError):
    """Well-formed syntax describing an ill-formed network."""


_UNICODE = {
    "−": "-", "–": "-",
}

_WS = re.compile(r"[ \t\r]+|#[^\n]*")
_IDENT = re.compile(r"[A-Za-z][A-Za-z0-9']*")
_INT = re.compile(r"\d+")


class Scanner:
    def __init__(self, text: str, file: str = "<input>"):
        for a, b in _UNICODE.items():
            text = text.replace(a, b)
        self.text = text
        self.file = file
        self.pos = 0
        self.depth = 0

    # -- positions ----------------------------------------------------------

    def span(self, pos: Optional[int] = None, length: int = 1) -> SourceSpan:
        pos = self.pos if pos is None else pos
        pos = max(0, min(pos, len(self.text)))
        line = self.text.count("\n", 0, pos) + 1
        col = pos - (self.text.rfind("\n", 0, pos) + 1) + 1
        return SourceSpan(self.file, line, col, max(1, length))

    def error(self, message: str, expected=(), pos=None, length=1, cls=ParseError):
        return cls(self.span(pos, length), message, expected)

    # -- whitespace ---------------------------------------------------------

    def ws(self) -> None:
        while True:
            mt = _WS.match(self.text, self.pos)
            if mt and mt.end() > self.pos:
                self.pos = mt.end()
                continue
            if self.depth > 0 and self.text.startswith("\n", self.pos):
                self.pos += 1
                continue
            break

    def ws_nl(self) -> None:
        while True:
            self.ws()
            if self.text.startswith("\n", self.pos):
                self.pos += 1
            else:
                break

    def eof(self) -> bool:
        self.ws()
        return self.pos >= len(self.text)

    def at_eol(self) -> bool:
        self.ws()
        return self.pos >= len(self.text) or self.text[self.pos] == "\n"

    def end_statement(self) -> None:
        if not self.at_eol():
            raise self.error(f"unexpected {self.text[self.pos]!r}", ("end of line",))

    # -- tokens -------------------------------------------------------------

    def peek(self, *alts: str) -> Optional[str]:
        self.ws()
        for s in alts:
            if self.text.startswith(s, self.pos):
                return s
        return None

    def accept(self, *alts: str) -> Optional[str]:
        s = self.peek(*alts)
        if s is not None:
            self.pos += len(s)
            if s in ("(", "[", "{"):
                self.depth += 1
            elif s in (")", "]", "}"):
                self.depth = max(0, self.depth - 1)
        return s

    def expect(self, *alts: str) -> str:
        s = self.accept(*alts)
        if s is None:
            got = self.text[self.pos] if self.pos < len(self.text) else "end of input"
            raise self.error(f"unexpected {got!r}", alts)
        return s

    def match(self, pattern: re.Pattern) -> Optional[re.Match]:
        self.ws()
        mt = pattern.match(self.text, self.pos)
        if mt:
            self.pos = mt.end()
        return mt

    def ident(self, what: str = "identifier") -> str:
        mt = self.match(_IDENT)
        if not mt:
            raise self.error(f"expected {what}", (what,))
        return mt.group()

    def integer(self, what: str = "integer") -> int:
        mt = self.match(_INT)
        if not mt:
            raise self.error(f"expected {what}", (what,))
        return int(mt.group())


# ---------------------------------------------------------------------------
# Actions and traces

_ACTION_HEAD = re.compile(
    r"(qcio|qco|qci|ccio|cco|cci|skip|nop)\b|([NEHP])(?=[_{\d])|([XYZ])(?=!)")


def _group_items(sc: Scanner) -> list[str]:
    """``{a,b}`` or a single bare token."""
    if sc.accept("{"):
        items = []
        if not sc.accept("}"):
            while True:
                sc.ws()
                mt = sc.match(re.compile(r"[+-]?\s*[A-Za-z0-9']+"))
                if not mt:
                    raise sc.error("expected item", ("name",))
                items.append(mt.group().replace(" ", ""))
                if sc.accept("}"):
                    break
                sc.expect(",")
        return items
    mt = sc.match(re.compile(r"[+-]?[A-Za-z0-9']+"))
    if not mt:
        raise sc.error("expected name or {...}", ("name", "{"))
    return [mt.group()]


def _qubit_index(sc: Scanner) -> int:
    if sc.text.startswith("_", sc.pos):
        sc.pos += 1
        if sc.accept("{"):
            q = sc.integer("qubit index")
            sc.expect("}")
            return q
    return sc.integer("qubit index")


def _qubit_ref(sc: Scanner) -> int:
    sc.ws()
    if not sc.text.startswith("q", sc.pos):
        raise sc.error("expected qubit reference", ("q<i>",))
    sc.pos += 1
    return _qubit_index(sc)


def _signed_basis(sc: Scanner, text: str, pos: int) -> tuple[Basis, Optional[Sign]]:
    mt = re.fullmatch(r"([+-]?)([XYZ])", text)
    if not mt:
        raise sc.error(f"expected signed basis, got {text!r}", ("+X", "-Z", "Y"), pos=pos)
    sign = {"+": Sign.PLUS, "-": Sign.MINUS, "": None}[mt.group(1)]
    return Basis(mt.group(2)), sign


def _bit_atom(sc: Scanner) -> m.BitAtom:
    sc.ws()
    mt = sc.match(re.compile(r"s_?\{?(\w+?)\}?(?:[ \t]*=[ \t]*([01]))?(?![\w])"))
    if not mt:
        raise sc.error("expected bit atom", ("s<i>=<v>",))
    value = None if mt.group(2) is None else int(mt.group(2))
    return m.BitAtom(mt.group(1), value)


def _super_sub(sc: Scanner) -> tuple[list[str], Optional[list[str]]]:
    sup = None
    sub = None
    for _ in range(2):
        if sc.text.startswith("^", sc.pos):
            sc.pos += 1
            sup = _group_items(sc)
        elif sc.text.startswith("_", sc.pos):
            sc.pos += 1
            sub = _group_items(sc)
    return sup or [], sub


def parse_action_at(sc: Scanner, default_owner: Optional[str] = None) -> m.Action:
    sc.ws()
    start = sc.pos
    paren = sc.accept("(")
    sc.ws()
    mt = _ACTION_HEAD.match(sc.text, sc.pos)
    if not mt:
        raise sc.error("expected an action", ("N", "E", "P", "H", "qcio", "ccio", "Z!", "skip"))
    sc.pos = mt.end()
    word, letter, bletter = mt.groups()

    def need_owner(items, pos):
        if items:
            return items[0]
        if default_owner is None:
            raise sc.error("action needs an owner superscript", ("^{Agent}",), pos=pos)
        return default_owner

    if word in ("skip", "nop"):
        act: m.Action = m.Nop()
    elif letter in ("N", "H", "P"):
        q = _qubit_index(sc)
        pos = sc.pos
        sup, _ = _super_sub(sc)
        who = need_owner(sup, pos)
        if letter == "N":
            if len(sup) > 1:
                basis, sign = _signed_basis(sc, sup[1], pos)
                act = m.Prep(who, q, basis, sign or Sign.PLUS)
            else:
                act = m.Prep(who, q)
        elif letter == "H":
            act = m.Hadamard(who, q)
        else:
            if len(sup) != 2:
                raise sc.error("projection needs ^{Agent,±Basis}", ("^{A,+Z}",), pos=pos)
            basis, sign = _signed_basis(sc, sup[1], pos)
            act = m.Project(who, q, basis, sign)
    elif letter == "E":
        pos = sc.pos
        if sc.text.startswith("_", sc.pos):
            sc.pos += 1
            if sc.accept("{"):
                a = sc.integer("qubit index")
                if sc.accept(","):
                    b = sc.integer("qubit index")
                else:
                    raise sc.error("expected ',' between entangled qubits", (",",))
                sc.expect("}")
            else:
                raise sc.error("expected {i,j}", ("{",))
        else:
            mt2 = re.compile(r"(\d)(\d)").match(sc.text, sc.pos)
            if not mt2:
                raise sc.error("expected two single-digit qubits or _{i,j}", ("E12", "E_{i,j}"))
            sc.pos = mt2.end()
            a, b = int(mt2.group(1)), int(mt2.group(2))
        sup, _ = _super_sub(sc)
        if a == b:
            raise sc.error("entangling a qubit with itself", pos=pos)
        act = m.Entangle(need_owner(sup, pos), (a, b))
    elif bletter:
        sc.expect("!")
        pos = sc.pos
        sup, sub = _super_sub(sc)
        act = m.BasisAnnounce(need_owner(sup, pos), Basis(bletter),
                              tuple(sub) if sub else None)
    else:
        pos = sc.pos
        sup, sub = _super_sub(sc)
        if not sup:
            raise sc.error(f"{word} needs a ^{{sender}} superscript", ("^{Agent}",), pos=pos)
        who = sup[0]
        if word in ("qcio", "qco", "qci"):
            if not sub:
                raise sc.error(f"{word} needs a _{{peer}} subscript", ("_{Agent}",), pos=pos)
            q = _qubit_ref(sc)
            cls = {"qcio": m.QBroadcast, "qco": m.QSend, "qci": m.QRecv}[word]
            act = cls(who, sub[0], q)
        else:
            bit = _bit_atom(sc)
            if word == "ccio":
                act = m.CBroadcast(who, tuple(sub) if sub else None, bit)
            else:
                if not sub:
                    raise sc.error(f"{word} needs a _{{peer}} subscript", ("_{Agent}",), pos=pos)
                act = (m.CSend if word == "cco" else m.CRecv)(who, sub[0], bit)
    if paren:
        sc.expect(")")
    return act


def _starts_action(sc: Scanner) -> bool:
    sc.ws()
    p = sc.pos
    if sc.text.startswith("(", p):
        p += 1
        while p < len(sc.text) and sc.text[p] in " \t":
            p += 1
    return bool(_ACTION_HEAD.match(sc.text, p))


def parse_trace_at(sc: Scanner, default_owner: Optional[str] = None) -> m.Trace:
    actions = [parse_action_at(sc, default_owner)]
    while True:
        if sc.accept(";"):
            sc.ws_nl()
            if not _starts_action(sc):
                break
            actions.append(parse_action_at(sc, default_owner))
        elif _starts_action(sc):
            actions.append(parse_action_at(sc, default_owner))
        else:
            break
    return tuple(actions)


def _whole(text: str, file: str, fn: Callable[[Scanner], object]):
    sc = Scanner(text, file)
    sc.depth = 1
    try:
        out = fn(sc)
    except ParseError:
        raise
    except (m.ModelError, ValueError, KeyError, IndexError) as exc:
        raise sc.error(str(exc) or "invalid input") from exc
    if not sc.eof():
        raise sc.error(f"unexpected {sc.text[sc.pos]!r}", ("end of input",))
    return out


def parse_action(text: str, file: str = "<action>") -> m.Action:
    return _whole(text, file, parse_action_at)


def parse_trace(text: str, file: str = "<trace>") -> m.Trace:
    return _whole(text, file, parse_trace_at)


# ---------------------------------------------------------------------------
# Formulas and sequents

_BIT_LIT = re.compile(r"s_?\{?(\w+?)\}?[ \t]*(?:\^[ \t]*\{?[ \t]*([01])[ \t]*\}?|=[ \t]*([01]))")
_BIT_NAME = re.compile(r"s_?\{?(\w+?)\}?(?![\w^=])")
_QUBIT = re.compile(r"q_?\{?(\d+)\}?")
_XOR = re.compile(r"⊕|\(\+\)")
_TOP = re.compile(r"⊤|true\b|T\b")
_BOT = re.compile(r"⊥|false\b|F\b")
_NOT = re.compile(r"¬|~|not\b")
_BOX = re.compile(r"(?:□|Box)_?")
_PARITY_AHEAD = re.compile(r"\([ \t]*s_?\{?\w+?\}?[ \t]*(?:⊕|\(\+\))")


class _FormulaParser:
    def __init__(self, sc: Scanner, traces: Mapping[str, m.Trace]):
        self.sc = sc
        self.traces = traces

    def formula(self) -> m.Formula:
        return self.disj()

    def disj(self):
        left = self.conj()
        while True:
            sc = self.sc
            sc.ws()
            if sc.text.startswith("|-", sc.pos) or sc.text.startswith("||", sc.pos):
                return left
            if sc.accept("∨", "\\/", "|") or sc.match(re.compile(r"or\b")):
                left = m.Or(left, self.conj())
            else:
                return left

    def conj(self):
        left = self.unary()
        while self.sc.accept("∧", "/\\", "&") or self.sc.match(re.compile(r"and\b")):
            left = m.And(left, self.unary())
        return left

    def unary(self):
        sc = self.sc
        sc.ws()
        if sc.match(_NOT):
            return m.Not(self.unary())
        if sc.match(_BOX):
            items = _group_items(sc)
            if len(items) != 1:
                raise sc.error("a box names exactly one agent", ("Box_A",))
            return m.Box(items[0], self.unary())
        if sc.accept("["):
            sc.ws()
            start = sc.pos
            mt = re.compile(r"[A-Za-z][\w']*").match(sc.text, sc.pos)
            if sc.peek("]"):
                trace, label = (), None
            elif mt and (mt.group() in self.traces or not _starts_action(sc)):
                sc.pos = mt.end()
                name = mt.group()
                if name not in self.traces:
                    raise sc.error(f"unresolved trace name {name!r}", pos=start,
                                   length=len(name))
                trace, label = self.traces[name], name
            else:
                trace, label = parse_trace_at(sc), None
            sc.expect("]")
            return m.Dyn(tuple(trace), self.unary(), label)
        return self.atom()

    def atom(self):
        sc = self.sc
        sc.ws()
        if _PARITY_AHEAD.match(sc.text, sc.pos):
            sc.expect("(")
            names = [self._bit_name()]
            while sc.match(_XOR):
                names.append(self._bit_name())
            sc.expect(")")
            return m.Parity(tuple(names), self._value())
        if sc.match(re.compile(r"xor\b")):
            sc.expect("(")
            names = [self._bit_name()]
            while sc.accept(","):
                names.append(self._bit_name())
            sc.expect(")")
            return m.Parity(tuple(names), self._value())
        if sc.accept("("):
            f = self.formula()
            sc.expect(")")
            return f
        if sc.match(_TOP):
            return m.Top()
        if sc.match(_BOT):
            return m.Bottom()
        mt = sc.match(_BIT_LIT)
        if mt:
            return m.Bit(mt.group(1), int(mt.group(2) or mt.group(3)))
        mt = sc.match(_QUBIT)
        if mt:
            first = int(mt.group(1))
            qs = [first]
            while sc.accept("⊗", "(x)"):
                q = sc.match(_QUBIT)
                if not q:
                    raise sc.error("expected qubit", ("q<i>",))
                qs.append(int(q.group(1)))
            return m.QubitAtom(first) if len(qs) == 1 else m.Tensor(tuple(qs))
        raise sc.error("expected a proposition", ("s<i>^<v>", "q<i>", "true", "(", "Box_A", "["))

    def _bit_name(self) -> str:
        mt = self.sc.match(_BIT_NAME)
        if not mt:
            raise self.sc.error("expected bit name", ("s<i>",))
        return mt.group(1)

    def _value(self) -> int:
        sc = self.sc
        if not sc.accept("^", "="):
            raise sc.error("expected parity value", ("^0", "=1"))
        braced = sc.accept("{")
        v = sc.expect("0", "1")
        if braced:
            sc.expect("}")
        return int(v)


def parse_formula(text: str, traces: Mapping[str, m.Trace] = {}, file: str = "<formula>") -> m.Formula:
    return _whole(text, file, lambda sc: _FormulaParser(sc, traces).formula())


_BIGTENSOR = re.compile(
    r"(?:⊗|\(x\))_\{?\s*i\s*=\s*(\d+)\s*\}?\^\{?\s*(\d+)\s*\}?\s*q_?\{?i\}?")


def _register(sc: Scanner) -> Optional[tuple[int, ...]]:
    sc.ws()
    mt = sc.match(_BIGTENSOR)
    if mt:
        lo, hi = int(mt.group(1)), int(mt.group(2))
        if hi < lo:
            raise sc.error("empty tensor range")
        return tuple(range(lo, hi + 1))
    paren = sc.accept("(")
    mt = sc.match(_QUBIT)
    if not mt:
        if sc.match(re.compile(r"q\b")):
            if paren:
                sc.expect(")")
            return None
        raise sc.error("expected a register", ("q", "q1 (x) q2", "(x)_{i=1}^{n} q_i"))
    qs = [int(mt.group(1))]
    while sc.accept("⊗", "(x)"):
        mt = sc.match(_QUBIT)
        if not mt:
            raise sc.error("expected qubit", ("q<i>",))
        qs.append(int(mt.group(1)))
    if paren:
        sc.expect(")")
    if len(set(qs)) != len(qs):
        raise sc.error("repeated qubit in register")
    return tuple(qs)


def parse_sequent_at(sc: Scanner, traces: Mapping[str, m.Trace]) -> m.Sequent:
    register = _register(sc)
    prefix: m.Trace = ()
    if sc.accept(";"):
        prefix = parse_trace_at(sc)
    sc.expect("⊢", "|-")
    rhs = _FormulaParser(sc, traces).formula()
    return m.Sequent(register, prefix, rhs)


def parse_property(text: str, traces: Mapping[str, m.Trace] = {}, file: str = "<property>") -> m.Sequent:
    """Parse a single sequent ``register [; trace] |- formula``."""
    return _whole(text, file, lambda sc: parse_sequent_at(sc, traces))


@dataclass
class PropertyFile:
    traces: dict[str, m.Trace] = field(default_factory=dict)
    properties: list[tuple[str, m.Sequent]] = field(default_factory=list)


def parse_property_file(text: str, traces: Mapping[str, m.Trace] = {},
                        file: str = "<property>") -> PropertyFile:
    """A ``.prop`` file: ``trace NAME = ...`` bindings and labelled sequents."""
    sc = Scanner(text, file)
    out = PropertyFile(traces=dict(traces))
    n = 0
    try:
        while True:
            sc.ws_nl()
            if sc.eof():
                break
            start = sc.pos
            if sc.match(re.compile(r"trace\b")):
                name = sc.ident("trace name")
                sc.expect("=")
                out.traces[name] = parse_trace_at(sc)
                sc.end_statement()
                continue
            label = None
            mt = sc.match(re.compile(r"property\s+([\w.\-']+)\s*:"))
            if mt:
                label = mt.group(1)
            n += 1
            seq = parse_sequent_at(sc, out.traces)
            sc.end_statement()
            out.properties.append((label or f"p{n}", seq))
    except ParseError:
        raise
    except (m.ModelError, ValueError) as exc:
        raise sc.error(str(exc)) from exc
    return out


# ---------------------------------------------------------------------------
# Networks

_KEYWORDS = ("name", "source", "resource", "graph", "agent", "players",
             "participants", "network")


def _param_domain(sc: Scanner) -> tuple[Basis, ...]:
    items = _group_items(sc)
    try:
        return tuple(Basis(x) for x in items)
    except ValueError:
        raise sc.error(f"basis domain must list X, Y or Z, got {items}") from None


def _agent_header(sc: Scanner):
    name = sc.ident("agent name")
    sc.expect("(")
    params: list[tuple[str, tuple[Basis, ...]]] = []
    qubits: list[int] = []
    if not sc.accept(")"):
        while True:
            sc.ws()
            if sc.text[sc.pos:sc.pos + 1].isdigit():
                qubits.append(sc.integer())
            else:
                pos = sc.pos
                pname = sc.ident("parameter")
                if pname in ("X", "Y", "Z"):
                    raise sc.error("parameter names X, Y, Z are reserved", pos=pos)
                dom = (Basis.X, Basis.Z)
                if sc.match(re.compile(r"in\b")) or sc.accept("∈", ":"):
                    dom = _param_domain(sc)
                params.append((pname, dom))
            if sc.accept(")"):
                break
            sc.expect(",", ";")
    return name, tuple(params), tuple(qubits)


def _group_spec(sc: Scanner) -> Optional[tuple[str, ...]]:
    if sc.text.startswith("_", sc.pos):
        sc.pos += 1
    if sc.peek("{"):
        items = _group_items(sc)
        if items == ["peers"]:
            return ("@peers",)
        return tuple(items)
    return None


def _events(sc: Scanner, params: dict[str, tuple[Basis, ...]]) -> tuple[m.Event, ...]:
    events: list[m.Event] = []
    closers = ("]",)
    while True:
        sc.ws()
        pos = sc.pos
        if sc.peek(*closers) or sc.at_eol():
            break
        mt = sc.match(re.compile(r"H_?(\d+)\s*\^\s*\{?([A-Za-z]\w*)\}?"))
        if mt:
            q, p = int(mt.group(1)), mt.group(2)
            sc.expect(";")
            mt2 = sc.match(re.compile(r"M_?(\d+)"))
            if not mt2 or int(mt2.group(1)) != q:
                raise sc.error(f"H{q}^{p} must be followed by M{q}", (f"M{q}",), pos=pos)
            events.append(_project_event(sc, q, p, params, pos))
        elif (mt := sc.match(re.compile(r"M_?(\d+)"))):
            events.append(m.EvProject(int(mt.group(1)), basis=Basis.Z))
        elif (mt := sc.match(re.compile(r"P_?(\d+)\s*\^\s*\{?([A-Za-z]\w*)\}?"))):
            events.append(_project_event(sc, int(mt.group(1)), mt.group(2), params, pos))
        elif (mt := sc.match(re.compile(r"c\s*([!?])\s*(s_?\d+|[A-Za-z]\w*)"))):
            what = mt.group(2).replace("_", "")
            if mt.group(1) == "?":
                events.append(m.EvRecv(what))
            else:
                events.append(_send_event(sc, what, ("@recv",), params, pos))
        elif (mt := sc.match(re.compile(r"(s_?\d+|[a-z]\w*)\s*!"))):
            what = mt.group(1).replace("_", "")
            events.append(_send_event(sc, what, _group_spec(sc), params, pos))
        else:
            raise sc.error("expected an event", ("P<i>^<basis>", "H<i>^a; M<i>", "c!x", "c?x", "x!"))
        if not sc.accept(";"):
            break
    return tuple(events)


def _project_event(sc, q, p, params, pos):
    if p in ("X", "Y", "Z"):
        return m.EvProject(q, basis=Basis(p))
    if p not in params:
        raise sc.error(f"unknown parameter {p!r}", pos=pos, cls=NetworkError)
    return m.EvProject(q, param=p)


def _send_event(sc, what, group, params, pos):
    if re.fullmatch(r"s\d+", what):
        return m.EvBitSend(what[1:], group)
    if what not in params:
        raise sc.error(f"unknown parameter {what!r}", pos=pos, cls=NetworkError)
    return m.EvAnnounce(what, group)


@dataclass
class _NetBuilder:
    name: str = "network"
    source: str = "C"
    resource: list = field(default_factory=list)
    resource_spans: list = field(default_factory=list)
    graph: list = field(default_factory=list)
    agents: list = field(default_factory=list)
    agent_pos: list = field(default_factory=list)
    players: tuple = ()
    participants: tuple = ()


def _resource_item(sc: Scanner, b: _NetBuilder) -> None:
    mt = sc.match(re.compile(r"E\s*\(\s*(\d+)\s*,\s*(\d+)\s*\)"))
    if mt:
        i, j = int(mt.group(1)), int(mt.group(2))
        b.resource.append(("bell", i, j))
        return
    pos = sc.pos
    b.resource.append(("trace", parse_trace_at(sc, default_owner=None), pos))


def _expand_resource(b: _NetBuilder) -> tuple:
    out: list[m.Action] = []
    for item in b.resource:
        if item[0] == "bell":
            _, i, j = item
            out += [m.Prep(b.source, i), m.Prep(b.source, j),
                    m.Entangle(b.source, (i, j)), m.Hadamard(b.source, j)]
        else:
            out += list(item[1])
    if b.graph:
        verts = sorted({v for e in b.graph for v in e})
        out += [m.Prep(b.source, v) for v in verts]
        out += [m.Entangle(b.source, e) for e in b.graph]
    return tuple(out)


def _inline_network(sc: Scanner, b: _NetBuilder) -> None:
    """``E(1,2) || A(a,1).[...] | B(b,2).[...]``"""
    _resource_item(sc, b)
    while sc.accept("⊗", "(x)"):
        _resource_item(sc, b)
    sc.expect("∥", "||")
    while True:
        sc.ws()
        pos = sc.pos
        name, params, qubits = _agent_header(sc)
        sc.expect(".")
        sc.expect("[")
        events = _events(sc, dict(params))
        sc.expect("]")
        b.agents.append(m.AgentSpec(name, params, qubits, events))
        b.agent_pos.append(pos)
        if not sc.accept("|"):
            break


def parse_network(text: str, file: str = "<network>") -> m.NetworkSpec:
    sc = Scanner(text, file)
    b = _NetBuilder()
    try:
        while True:
            sc.ws_nl()
            if sc.eof():
                break
            pos = sc.pos
            mt = sc.match(re.compile(r"(" + "|".join(_KEYWORDS) + r")\b"))
            kw = mt.group(1) if mt else None
            if kw == "name":
                b.name = sc.ident("network name")
            elif kw == "source":
                b.source = sc.ident("agent name")
            elif kw == "resource":
                _resource_item(sc, b)
                while sc.accept(";") or sc.accept("⊗", "(x)"):
                    sc.ws_nl()
                    _resource_item(sc, b)
            elif kw == "graph":
                while not sc.at_eol():
                    e = sc.match(re.compile(r"(\d+)\s*-\s*(\d+)"))
                    if not e:
                        raise sc.error("expected edge", ("i-j",))
                    i, j = int(e.group(1)), int(e.group(2))
                    if i == j:
                        raise sc.error("self-loop in graph", pos=e.start())
                    b.graph.append((i, j))
                    sc.accept(",")
            elif kw == "agent":
                apos = sc.pos
                name, params, qubits = _agent_header(sc)
                if sc.accept("."):
                    sc.expect("[")
                    events = _events(sc, dict(params))
                    sc.expect("]")
                else:
                    sc.expect(":", "=")
                    events = _events(sc, dict(params))
                b.agents.append(m.AgentSpec(name, params, qubits, events))
                b.agent_pos.append(apos)
            elif kw in ("players", "participants"):
                names = []
                while not sc.at_eol():
                    names.append(sc.ident("agent name"))
                    sc.accept(",")
                setattr(b, kw, tuple(names))
            elif kw == "network":
                _inline_network(sc, b)
            else:
                _inline_network(sc, b)
            sc.end_statement()
    except ParseError:
        raise
    except (m.ModelError, ValueError) as exc:
        raise sc.error(str(exc)) from exc
    return _finish_network(sc, b)


def _finish_network(sc: Scanner, b: _NetBuilder) -> m.NetworkSpec:
    resource = _expand_resource(b)
    # default owner for resource actions written without superscript
    owners: dict[int, str] = {}
    names = [a.name for a in b.agents]
    if len(set(names)) != len(names):
        dup = next(n for n in names if names.count(n) > 1)
        raise sc.error(f"agent {dup!r} declared twice", pos=b.agent_pos[names.index(dup, names.index(dup) + 1)],
                       cls=NetworkError)
    for ag, pos in zip(b.agents, b.agent_pos):
        for q in ag.qubits:
            if q in owners:
                raise sc.error(f"qubit {q} owned by both {owners[q]} and {ag.name}",
                               pos=pos, length=len(ag.name), cls=NetworkError)
            owners[q] = ag.name
        recvs = {e.name for other in b.agents for e in other.events if isinstance(e, m.EvRecv)}
        for ev in ag.events:
            if isinstance(ev, m.EvProject) and ev.qubit not in ag.qubits:
                raise sc.error(f"{ag.name} measures qubit {ev.qubit} it does not own",
                               pos=pos, length=len(ag.name), cls=NetworkError)
    for ag, pos in zip(b.agents, b.agent_pos):
        for ev in ag.events:
            if isinstance(ev, m.EvRecv):
                senders = [o for o in b.agents for e in o.events
                           if isinstance(e, (m.EvAnnounce, m.EvBitSend))
                           and (e.param if isinstance(e, m.EvAnnounce) else "s" + e.index) == ev.name]
                if not senders:
                    raise sc.error(f"{ag.name} receives {ev.name!r} that nobody sends",
                                   pos=pos, length=len(ag.name), cls=NetworkError)
    players = b.players
    for p in players + b.participants:
        if p not in names:
            raise sc.error(f"unknown agent {p!r} in players/participants", cls=NetworkError)
    return m.NetworkSpec(b.name, b.source, resource, tuple(b.agents), tuple(b.graph),
                         players, b.participants)


# ---------------------------------------------------------------------------
# Scenarios

_SCN_KEYS = {"name", "adversary", "presence", "quantum", "classical", "suspicious",
             "intercept_bases", "targets", "attack", "private_outsiders"}


def parse_scenario(text: str, file: str = "<scenario>") -> ScenarioConfig:
    sc = Scanner(text, file)
    seen: dict[str, int] = {}
    values: dict = {}
    try:
        while True:
            sc.ws_nl()
            if sc.eof():
                break
            pos = sc.pos
            key = sc.ident("key")
            if key not in _SCN_KEYS:
                raise sc.error(f"unknown scenario key {key!r}", sorted(_SCN_KEYS), pos=pos, length=len(key))
            if key in seen:
                if key == "adversary":
                    raise sc.error("only one adversary may be declared", pos=pos, length=len(key))
                raise sc.error(f"duplicate key {key!r}", pos=pos, length=len(key))
            seen[key] = pos
            sc.expect("=", ":")
            sc.ws()
            vpos = sc.pos
            end = sc.text.find("\n", sc.pos)
            end = len(sc.text) if end < 0 else end
            raw = sc.text[sc.pos:end].split("#", 1)[0].strip()
            sc.pos = end
            items = [x for x in re.split(r"[\s,]+", raw) if x]
            values[key] = (raw, items, vpos)
    except ParseError:
        raise
    return _build_scenario(sc, values)


def _build_scenario(sc: Scanner, values: dict) -> ScenarioConfig:
    kw: dict = {}

    def single(key):
        raw, items, vpos = values[key]
        if len(items) != 1:
            raise sc.error(f"{key} takes one value", pos=vpos)
        return items[0]

    if "name" in values:
        kw["name"] = values["name"][0]
    for key in ("quantum", "classical", "presence", "private_outsiders"):
        if key in values:
            kw[key] = single(key)
    if "adversary" in values:
        raw, items, vpos = values["adversary"]
        if len(items) > 1:
            raise sc.error("only one adversary may be declared", pos=vpos)
        if items and items[0].lower() != "none":
            kw["adversary"] = items[0]
    if "suspicious" in values:
        raw, items, vpos = values["suspicious"]
        if [i.lower() for i in items] == ["all"]:
            kw["suspect_all"] = True
        elif [i.lower() for i in items] not in ([], ["none"]):
            kw["suspicion"] = tuple((i, True) for i in items)
    if "intercept_bases" in values:
        raw, items, vpos = values["intercept_bases"]
        try:
            kw["intercept_bases"] = tuple(Basis(i) for i in items)
        except ValueError:
            raise sc.error("intercept_bases lists X, Y, Z", pos=vpos) from None
    if "targets" in values:
        raw, items, vpos = values["targets"]
        if [i.lower() for i in items] != ["all"]:
            try:
                kw["targets"] = tuple(int(i.lstrip("q")) for i in items)
            except ValueError:
                raise sc.error("targets lists qubit indices", pos=vpos) from None
    if "attack" in values:
        raw, items, vpos = values["attack"]
        low = [i.lower() for i in items]
        if low in ([], ["none"]):
            kw["attack"] = None
        elif low == ["matched"]:
            kw["attack"] = "matched"
        else:
            pairs = []
            for it in items:
                mt = re.fullmatch(r"q?(\d+):([XYZ])", it)
                if not mt:
                    raise sc.error(f"bad attack entry {it!r}", ("matched", "1:Z"), pos=vpos)
                pairs.append((int(mt.group(1)), Basis(mt.group(2))))
            kw["attack"] = tuple(pairs)
    try:
        return ScenarioConfig(**kw)
    except AppearanceError as exc:
        raise sc.error(str(exc)) from exc


# ---------------------------------------------------------------------------
# Pretty printing


def _sb(basis: Basis, sign: Optional[Sign]) -> str:
    return f"{sign.value if sign else ''}{basis.value}"


def _bit(b: m.BitAtom) -> str:
    return f"s{b.index}" + ("" if b.value is None else f"={b.value}")


def pretty_action(a: m.Action) -> str:
    if isinstance(a, m.Nop):
        return "skip"
    if isinstance(a, m.Prep):
        if a.basis is Basis.X and a.sign is Sign.PLUS:
            return f"N{a.qubit}^{{{a.owner}}}"
        return f"N{a.qubit}^{{{a.owner},{_sb(a.basis, a.sign)}}}"
    if isinstance(a, m.Entangle):
        return f"E_{{{a.qubits[0]},{a.qubits[1]}}}^{{{a.owner}}}"
    if isinstance(a, m.Hadamard):
        return f"H{a.qubit}^{{{a.owner}}}"
    if isinstance(a, m.Project):
        return f"P{a.qubit}^{{{a.owner},{_sb(a.basis, a.sign)}}}"
    if isinstance(a, m.QBroadcast):
        return f"qcio^{{{a.sender}}}_{{{a.to}}} q{a.qubit}"
    if isinstance(a, m.QSend):
        return f"qco^{{{a.sender}}}_{{{a.to}}} q{a.qubit}"
    if isinstance(a, m.QRecv):
        return f"qci^{{{a.by}}}_{{{a.sender}}} q{a.qubit}"
    if isinstance(a, m.CBroadcast):
        group = "" if a.group is None else "_{" + ",".join(a.group) + "}"
        return f"ccio^{{{a.sender}}}{group} {_bit(a.bit)}"
    if isinstance(a, m.CSend):
        return f"cco^{{{a.sender}}}_{{{a.to}}} {_bit(a.bit)}"
    if isinstance(a, m.CRecv):
        return f"cci^{{{a.by}}}_{{{a.sender}}} {_bit(a.bit)}"
    if isinstance(a, m.BasisAnnounce):
        group = "" if a.group is None else "_{" + ",".join(a.group) + "}"
        return f"{a.basis.value}!^{{{a.owner}}}{group}"
    raise TypeError(f"not an action: {a!r}")


def pretty_trace(t: m.Trace) -> str:
    return " ; ".join(pretty_action(a) for a in t)


_SYM = {
    True: {"top": "⊤", "bot": "⊥", "not": "¬", "and": " ∧ ", "or": " ∨ ",
           "box": "□_", "xor": " ⊕ ", "tensor": " ⊗ ", "turnstile": " ⊢ "},
    False: {"top": "true", "bot": "false", "not": "~", "and": " & ", "or": " | ",
            "box": "Box_", "xor": " (+) ", "tensor": " (x) ", "turnstile": " |- "},
}


def pretty_formula(f: m.Formula, unicode: bool = True, names: bool = False) -> str:
    s = _SYM[unicode]

    def prec(g):
        if isinstance(g, m.Or):
            return 1
        if isinstance(g, m.And):
            return 2
        return 3

    def agent(a):
        return a if len(a) == 1 else "{" + a + "}"

    def go(g, ctx: int) -> str:
        if isinstance(g, m.Top):
            out = s["top"]
        elif isinstance(g, m.Bottom):
            out = s["bot"]
        elif isinstance(g, m.Bit):
            out = f"s{g.index}^{g.value}"
        elif isinstance(g, m.QubitAtom):
            out = f"q{g.index}"
        elif isinstance(g, m.Tensor):
            out = "(" + s["tensor"].join(f"q{q}" for q in g.qubits) + ")"
        elif isinstance(g, m.Parity):
            out = "(" + s["xor"].join(f"s{i}" for i in g.indices) + f")^{g.value}"
        elif isinstance(g, m.Not):
            out = s["not"] + go(g.body, 3)
        elif isinstance(g, m.Box):
            out = s["box"] + agent(g.agent) + " " + go(g.body, 3)
        elif isinstance(g, m.Dyn):
            inner = g.name if (names and g.name) else pretty_trace(g.trace)
            out = "[" + inner + "] " + go(g.body, 3)
        elif isinstance(g, m.And):
            out = go(g.left, 2) + s["and"] + go(g.right, 3)
        elif isinstance(g, m.Or):
            out = go(g.left, 1) + s["or"] + go(g.right, 2)
        else:
            raise TypeError(f"not a formula: {g!r}")
        return f"({out})" if prec(g) < ctx else out

    return go(f, 0)


def pretty_register(register: Optional[tuple[int, ...]], unicode: bool = True) -> str:
    if register is None:
        return "q"
    if len(register) > 2 and register == tuple(range(register[0], register[-1] + 1)):
        t = "⊗" if unicode else "(x)"
        return f"{t}_{{i={register[0]}}}^{{{register[-1]}}} q_i"
    return _SYM[unicode]["tensor"].join(f"q{q}" for q in register)


def pretty_sequent(seq: m.Sequent, unicode: bool = True, names: bool = False) -> str:
    lhs = pretty_register(seq.register, unicode)
    if seq.prefix:
        lhs += " ; " + pretty_trace(seq.prefix)
    return lhs + _SYM[unicode]["turnstile"] + pretty_formula(seq.rhs, unicode, names)


def pretty(value, unicode: bool = True) -> str:
    """Canonical text for an action, trace, formula or sequent."""
    if isinstance(value, m.Sequent):
        return pretty_sequent(value, unicode)
    if isinstance(value, tuple):
        return pretty_trace(value)
    if isinstance(value, (m.Prep, m.Entangle, m.Hadamard, m.Project, m.QSend, m.QRecv,
                          m.QBroadcast, m.CSend, m.CRecv, m.CBroadcast, m.BasisAnnounce, m.Nop)):
        return pretty_action(value)
    return pretty_formula(value, unicode)


def pretty_network(net: m.NetworkSpec) -> str:
    lines = [f"name {net.name}", f"source {net.source}"]
    resource = net.resource
    if net.graph:
        # the graph statement generates the tail of the resource
        verts = sorted({v for e in net.graph for v in e})
        resource = resource[:len(resource) - len(verts) - len(net.graph)]
    if resource:
        lines.append("resource " + pretty_trace(resource))
    if net.graph:
        lines.append("graph " + " ".join(f"{i}-{j}" for i, j in net.graph))
    for ag in net.agents:
        items = [f"{p} in {{{','.join(b.value for b in dom)}}}" for p, dom in ag.params]
        items += [str(q) for q in ag.qubits]
        evs = []
        for ev in ag.events:
            if isinstance(ev, m.EvProject):
                evs.append(f"P{ev.qubit}^{ev.param or ev.basis.value}")
            elif isinstance(ev, m.EvRecv):
                evs.append(f"c?{ev.name}")
            else:
                what = ev.param if isinstance(ev, m.EvAnnounce) else "s" + ev.index
                if ev.group == ("@recv",):
                    evs.append(f"c!{what}")
                elif ev.group == ("@peers",):
                    evs.append(f"{what}!{{peers}}")
                elif ev.group is None:
                    evs.append(f"{what}!")
                else:
                    evs.append(f"{what}!{{{','.join(ev.group)}}}")
        lines.append(f"agent {ag.name}({', '.join(items)}) : " + " ; ".join(evs))
    if net.players:
        lines.append("players " + " ".join(net.players))
    if net.participants:
        lines.append("participants " + " ".join(net.participants))
    return "\n".join(lines) + "\n"
