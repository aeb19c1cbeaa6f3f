"""Sequent rewriting down to atomic expressions.

Rules, in the order they are tried on a node ``world ⊢ r``:

* adjunction  ``l ⊢ [π] r  ⇝  l;π ⊢ r`` (unsigned projections in π are
  resolved here, one child per derivable sign assignment)
* box         ``l ⊢ □_A r  ⇝  f_A(l) ⊢ r``, one child per surviving alternative
* not / and / or on the right-hand side
* atomic      communication actions are deleted from ``l``

Box alternatives are enumerated depth first: classical segments first, then
quantum segments in trace order on an incremental stabilizer state.  An
alternative is pruned as soon as it is basis-inconsistent, content-
inconsistent or non-derivable, and the whole subtree it would have spanned
is booked against that reason, so every box node satisfies
``total == pruned + survivors (+ skipped)``.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Sequence

from . import model as m
from .appearance import (AppearanceMap, Delivery, Plain, Segment, is_classical,
                         materialize, materialize_one, segment_trace)
from .model import SIGNS
from .quantum import StabilizerState
from .semantics import Configuration, step

PRUNE_REASONS = ("basis", "content", "not-derivable")


class RewriteError(ValueError):
    """A construct the rules cannot eliminate."""

    def __init__(self, message: str, node: Optional[str] = None):
        self.node = node
        super().__init__(message if node is None else f"{message} (at {node})")


class TerminationError(AssertionError):
    """The termination measure failed to decrease: a bug trap."""


@dataclass(frozen=True)
class AtomicExpression:
    """``register ; atomic quantum actions ⊢ atom``."""

    register: Optional[tuple[int, ...]]
    lhs: m.Trace
    rhs: m.Formula
    polarity: int = 0

    def is_atomic(self) -> bool:
        return (all(isinstance(a, m.QUANTUM_ATOMIC) for a in self.lhs)
                and isinstance(self.rhs, m.ATOMS))


@dataclass
class RewriteNode:
    rule: str
    rhs: m.Formula
    polarity: int
    world: tuple[Segment, ...]
    measure: tuple[int, int, int]
    path: str = "0"
    agent: Optional[str] = None
    children: list["RewriteNode"] = field(default_factory=list)
    total: int = 0
    pruned: dict[str, int] = field(default_factory=dict)
    skipped: int = 0
    leaf: Optional[AtomicExpression] = None
    store: Optional[dict[str, int]] = None
    eliminated: int = 0
    value: Optional[bool] = None
    note: str = ""

    def walk(self) -> Iterator["RewriteNode"]:
        yield self
        for c in self.children:
            yield from c.walk()

    def leaves(self) -> Iterator["RewriteNode"]:
        for n in self.walk():
            if n.rule == "atomic":
                yield n


def comm_count(trace: m.Trace) -> int:
    return sum(1 for a in trace if m.is_communication(a))


def termination_measure(rhs: m.Formula, lhs: m.Trace) -> tuple[int, int, int]:
    """Lexicographic (modal depth, connectives, communication actions)."""
    return (m.modal_depth(rhs), m.connective_count(rhs), comm_count(lhs))


# ---------------------------------------------------------------------------
# Box enumeration


@dataclass
class BoxCounts:
    total: int = 1
    pruned: dict[str, int] = field(default_factory=lambda: dict.fromkeys(PRUNE_REASONS, 0))
    survivors: int = 0


@dataclass
class World:
    segments: tuple[Segment, ...]
    config: Configuration


class _Plan:
    def __init__(self, images: list[tuple[Segment, ...]], base: Sequence[Segment]):
        self.images = images
        n = len(images)
        classical = [k for k in range(n) if is_classical(base[k])]
        quantum = [k for k in range(n) if not is_classical(base[k])]
        self.order = classical + quantum
        self.suffix = [1] * (n + 1)
        for k in range(n - 1, -1, -1):
            self.suffix[k] = self.suffix[k + 1] * len(images[self.order[k]])
        # basis announcements by owner, and bits that must match a projection
        self.announces: dict[str, list[int]] = {}
        self.bits: dict[int, list[int]] = {}
        last_proj: dict[str, int] = {}
        for k, seg in enumerate(base):
            a = seg.action if isinstance(seg, Plain) else None
            if isinstance(a, m.Project):
                last_proj[a.owner] = k
            elif isinstance(a, m.BasisAnnounce):
                self.announces.setdefault(a.owner, []).append(k)
            elif isinstance(a, (m.CBroadcast, m.CSend, m.CRecv)):
                if a.sender in last_proj:
                    self.bits.setdefault(last_proj[a.sender], []).append(k)


def _bit_of(seg: Segment) -> Optional[int]:
    a = seg.action if isinstance(seg, Plain) else None
    if isinstance(a, (m.CBroadcast, m.CSend, m.CRecv)):
        return a.bit.value
    return None


def enumerate_box(amap: AppearanceMap, agent: str, world: Sequence[Segment],
                  counts: Optional[BoxCounts] = None) -> Iterator[World]:
    """Surviving alternatives of ``world`` for ``agent``, in branch order."""
    images = amap.segments_image(agent, world)
    plan = _Plan(images, world)
    counts = counts if counts is not None else BoxCounts()
    counts.total = plan.suffix[0]
    chosen: list[Optional[Segment]] = [None] * len(world)
    order = plan.order
    first_fresh = amap.first_fresh

    def dfs(k: int, config: Configuration, ren: dict, fresh: int) -> Iterator[World]:
        if k == len(order):
            counts.survivors += 1
            yield World(tuple(chosen), config)
            return
        pos = order[k]
        alts = images[pos]
        rest = plan.suffix[k + 1]
        for alt in alts:
            chosen[pos] = alt
            if is_classical(alt):
                yield from dfs(k + 1, config.copy() if len(alts) > 1 else config, ren, fresh)
                continue
            a = alt.action if isinstance(alt, Plain) else None
            if isinstance(a, m.Project):
                reason = _filter(plan, chosen, pos, a)
                if reason:
                    counts.pruned[reason] += rest
                    continue
            c = config.copy() if len(alts) > 1 else config
            acts, ren2, fresh2 = materialize_one(alt, ren, fresh)
            ok = True
            for act in acts:
                if step(c, act) == 0.0:
                    ok = False
                    break
            if not ok:
                counts.pruned["not-derivable"] += rest
                continue
            yield from dfs(k + 1, c, ren2, fresh2)
        chosen[pos] = None

    yield from dfs(0, Configuration(StabilizerState()), {}, first_fresh)


def _filter(plan: _Plan, chosen, pos: int, a: m.Project) -> Optional[str]:
    for c in plan.announces.get(a.owner, ()):
        alt = chosen[c]
        if isinstance(alt, Plain) and isinstance(alt.action, m.BasisAnnounce):
            if alt.action.basis != a.basis:
                return "basis"
    for c in plan.bits.get(pos, ()):
        v = _bit_of(chosen[c])
        if v is not None and a.sign is not None and v != a.sign.bit:
            return "content"
    return None


def derive_world(world: Sequence[Segment], first_fresh: int) -> Optional[Configuration]:
    """Run a segment list; None when some projection has probability 0."""
    config = Configuration(StabilizerState())
    for act in materialize(world, first_fresh):
        if step(config, act) == 0.0:
            return None
    return config


# ---------------------------------------------------------------------------
# Reality: sign resolution and the scenario's attack


def resolve_world(world: Sequence[Segment], first_fresh: int, attack: dict[int, m.Basis]) -> list[World]:
    """Derivable sign assignments of a world, with the attack applied.

    Deliveries of attacked qubits are intercepted in the planned basis;
    the adversary's outcome and every unsigned projection range over both
    signs, ``+`` first.
    """
    out: list[World] = []
    segs = list(world)

    def options(seg: Segment) -> list[Segment]:
        if isinstance(seg, Delivery) and seg.qubit in attack and seg.interception is None:
            return [seg.intercepted(attack[seg.qubit], s) for s in SIGNS]
        if isinstance(seg, Plain) and isinstance(seg.action, m.Project) and seg.action.sign is None:
            a = seg.action
            return [Plain(m.Project(a.owner, a.qubit, a.basis, s)) for s in SIGNS]
        return [seg]

    def dfs(k: int, config: Configuration, ren: dict, fresh: int, acc: list) -> None:
        if k == len(segs):
            out.append(World(_fill(tuple(acc)), config))
            return
        opts = options(segs[k])
        for alt in opts:
            c = config.copy() if len(opts) > 1 else config
            acts, ren2, fresh2 = materialize_one(alt, ren, fresh)
            if all(step(c, a) != 0.0 for a in acts):
                dfs(k + 1, c, ren2, fresh2, acc + [alt])

    dfs(0, Configuration(StabilizerState()), {}, first_fresh, [])
    return out


def _first_per_run(worlds: list[World]) -> list[World]:
    """The adversary's outcomes are part of one run: keep the first per run."""
    seen: set = set()
    out = []
    for w in worlds:
        key = tuple(s.plain() if isinstance(s, Delivery) else s for s in w.segments)
        if key not in seen:
            seen.add(key)
            out.append(w)
    return out


def _fill(segs: tuple[Segment, ...]) -> tuple[Segment, ...]:
    """Unvalued outcome bits take the sender's latest projection sign."""
    last: dict[str, int] = {}
    out = []
    for seg in segs:
        if isinstance(seg, Plain):
            a = seg.action
            if isinstance(a, m.Project) and a.sign is not None:
                last[a.owner] = a.sign.bit
            elif isinstance(a, (m.CBroadcast, m.CSend, m.CRecv)) and a.bit.value is None \
                    and a.sender in last:
                bit = a.bit.with_value(last[a.sender])
                if isinstance(a, m.CBroadcast):
                    seg = Plain(m.CBroadcast(a.sender, a.group, bit))
                elif isinstance(a, m.CSend):
                    seg = Plain(m.CSend(a.sender, a.to, bit))
                else:
                    seg = Plain(m.CRecv(a.by, a.sender, bit))
        out.append(seg)
    return tuple(out)


# ---------------------------------------------------------------------------
# The engine

Evaluator = Callable[[AtomicExpression, Configuration], Optional[bool]]


@dataclass
class RewriteResult:
    tree: RewriteNode
    leaves: list[AtomicExpression]
    steps: int = 0


class Rewriter:
    def __init__(self, amap: AppearanceMap, register: Optional[tuple[int, ...]] = None,
                 evaluate: Optional[Evaluator] = None, short_circuit: bool = False,
                 max_box_depth: int = 2, check_measure: bool = True):
        self.amap = amap
        self.register = register
        self.evaluate = evaluate
        self.short_circuit = short_circuit and evaluate is not None
        self.max_box_depth = max_box_depth
        self.check_measure = check_measure
        self.leaves: list[AtomicExpression] = []
        self.steps = 0

    # -- helpers -------------------------------------------------------------

    def _node(self, rule, rhs, polarity, world, path, **kw) -> RewriteNode:
        lhs = materialize(world, self.amap.first_fresh)
        return RewriteNode(rule, rhs, polarity, tuple(world), termination_measure(rhs, lhs),
                           path, **kw)

    def _check(self, parent: RewriteNode, child: RewriteNode) -> None:
        self.steps += 1
        if self.check_measure and not child.measure < parent.measure:
            raise TerminationError(
                f"measure did not decrease under {parent.rule}: {parent.measure} -> {child.measure}")

    # -- entry ---------------------------------------------------------------

    def run(self, seq: m.Sequent) -> RewriteResult:
        if m.box_depth(seq.rhs) > self.max_box_depth:
            raise RewriteError(f"box nesting deeper than {self.max_box_depth}")
        world = segment_trace(tuple(seq.prefix), self.amap.config)
        root = self._node("sequent", seq.rhs, 0, world, "0")
        if any(isinstance(s, Plain) and isinstance(s.action, m.Project) and s.action.sign is None
               for s in world):
            root.rule = "resolve"
            for i, w in enumerate(resolve_world(world, self.amap.first_fresh, {})):
                child = self._node("sequent", seq.rhs, 0, w.segments, f"0.{i}")
                root.children.append(child)
                self.expand(child, w.config, 0)
            root.value = self._all(root.children)
        else:
            config = derive_world(world, self.amap.first_fresh)
            if config is None:
                root.note = "prefix not derivable"
                root.value = None
            else:
                self.expand(root, config, 0)
        return RewriteResult(root, self.leaves, self.steps)

    @staticmethod
    def _all(children) -> Optional[bool]:
        vals = [c.value for c in children]
        if any(v is False for v in vals):
            return False
        return True if vals else None

    def expand(self, node: RewriteNode, config: Configuration, depth: int) -> None:
        """Rewrite ``node`` in place; ``config`` is the final configuration of its world."""
        rhs, pol, path = node.rhs, node.polarity, node.path
        world = node.world
        if isinstance(rhs, m.Dyn):
            node.rule = "adjunction"
            ext = world + segment_trace(tuple(rhs.trace), self.amap.config)
            attack = self.amap.attack_plan(ext) if depth == 0 else {}
            worlds = resolve_world(ext, self.amap.first_fresh, attack)
            if attack:
                worlds = _first_per_run(worlds)
            if not worlds:
                node.note = "trace not derivable"
            for i, w in enumerate(worlds):
                child = self._node("", rhs.body, pol, w.segments, f"{path}.{i}")
                self._check(node, child)
                node.children.append(child)
                self.expand(child, w.config, depth)
            node.value = self._all(node.children) if worlds else None
            return
        if isinstance(rhs, m.Box):
            node.rule = "box"
            node.agent = rhs.agent
            if rhs.agent not in self.amap.agents:
                raise RewriteError(f"no appearance map for agent {rhs.agent!r}", path)
            counts = BoxCounts()
            value: Optional[bool] = True
            gen = enumerate_box(self.amap, rhs.agent, world, counts)
            for i, w in enumerate(gen):
                child = self._node("", rhs.body, pol, w.segments, f"{path}.{i}")
                self._check(node, child)
                node.children.append(child)
                self.expand(child, w.config, depth + 1)
                if child.value is False:
                    value = False
                    if self.short_circuit and depth >= 1:
                        gen.close()
                        break
            node.total = counts.total
            node.pruned = dict(counts.pruned)
            node.skipped = counts.total - sum(counts.pruned.values()) - len(node.children)
            node.value = value if self.evaluate else None
            return
        if isinstance(rhs, m.Not):
            node.rule = "not"
            child = self._node("", rhs.body, 1 - pol, world, f"{path}.0")
            self._check(node, child)
            node.children.append(child)
            self.expand(child, config, depth)
            node.value = None if child.value is None else not child.value
            return
        if isinstance(rhs, (m.And, m.Or)):
            node.rule = "and" if isinstance(rhs, m.And) else "or"
            for i, part in enumerate((rhs.left, rhs.right)):
                child = self._node("", part, pol, world, f"{path}.{i}")
                self._check(node, child)
                node.children.append(child)
                self.expand(child, config, depth)
            vals = [c.value for c in node.children]
            if None in vals:
                node.value = None
            elif node.rule == "and":
                node.value = all(vals)
            else:
                node.value = any(vals)
            return
        if isinstance(rhs, m.ATOMS):
            self._atomic(node, config)
            return
        raise RewriteError(f"cannot eliminate {type(rhs).__name__}", path)

    def _atomic(self, node: RewriteNode, config: Configuration) -> None:
        lhs = materialize(node.world, self.amap.first_fresh)
        kept = tuple(a for a in lhs if isinstance(a, m.QUANTUM_ATOMIC))
        measure = node.measure
        # one elimination step per deleted communication action
        for a in lhs:
            if m.is_communication(a):
                nxt = (measure[0], measure[1], measure[2] - 1)
                if self.check_measure and not nxt < measure:
                    raise TerminationError("communication elimination did not decrease")
                measure = nxt
                self.steps += 1
        node.rule = "atomic"
        node.eliminated = len(lhs) - len(kept)
        expr = AtomicExpression(self.register, kept, node.rhs, node.polarity)
        if not expr.is_atomic():
            raise RewriteError("leaf is not atomic", node.path)
        node.leaf = expr
        node.store = dict(config.store)
        self.leaves.append(expr)
        if self.evaluate is not None:
            node.value = self.evaluate(expr, config)


def rewrite(seq: m.Sequent, amap: AppearanceMap, evaluate: Optional[Evaluator] = None,
            short_circuit: bool = False, max_box_depth: int = 2,
            check_measure: bool = True) -> RewriteResult:
    """Rewrite a sequent to atomic expressions; see the module docstring."""
    register = seq.register
    if register is not None and len(register) != amap.net.register_size:
        raise RewriteError(f"register has {len(register)} qubits, the network "
                           f"{amap.net.register_size}")
    rw = Rewriter(amap, register, evaluate, short_circuit, max_box_depth, check_measure)
    return rw.run(seq)


def render_tree(node: RewriteNode, indent: int = 0, limit: int = 200) -> list[str]:
    """Indented text of the rewrite tree (at most ``limit`` lines)."""
    lines: list[str] = []

    def go(n: RewriteNode, d: int) -> None:
        if len(lines) >= limit:
            return
        head = f"{'  ' * d}[{n.path}] {n.rule}"
        if n.agent:
            head += f" {n.agent}"
        if n.rule == "box":
            head += (f" total={n.total} survivors={len(n.children)} "
                     + " ".join(f"{k}={v}" for k, v in n.pruned.items())
                     + (f" skipped={n.skipped}" if n.skipped else ""))
        head += f" measure={n.measure}"
        if n.value is not None:
            head += f" value={'T' if n.value else 'F'}"
        if n.note:
            head += f" ({n.note})"
        lines.append(head)
        for c in n.children:
            go(c, d + 1)

    go(node, indent)
    if len(lines) >= limit:
        lines.append("...")
    return lines


# ---------------------------------------------------------------------------
# Random sequents for termination fuzzing


def random_formula(rng: random.Random, agents: Sequence[str], bits: Sequence[str],
                   depth: int, boxes: int = 2) -> m.Formula:
    """A formula with at most ``depth`` operators and ``boxes`` nested boxes."""
    if depth <= 0 or rng.random() < 0.2:
        kind = rng.choice(("bit", "bit", "parity", "top", "bottom"))
        if kind == "bit":
            return m.Bit(rng.choice(bits), rng.randint(0, 1))
        if kind == "parity":
            k = rng.randint(1, min(3, len(bits)))
            return m.Parity(tuple(rng.sample(list(bits), k)), rng.randint(0, 1))
        return m.Top() if kind == "top" else m.Bottom()
    ops = ["not", "and", "or"] + (["box", "box"] if boxes > 0 else [])
    op = rng.choice(ops)
    if op == "not":
        return m.Not(random_formula(rng, agents, bits, depth - 1, boxes))
    if op == "box":
        return m.Box(rng.choice(agents), random_formula(rng, agents, bits, depth - 1, boxes - 1))
    left = random_formula(rng, agents, bits, depth - 1, boxes)
    right = random_formula(rng, agents, bits, depth - 1, boxes)
    return m.And(left, right) if op == "and" else m.Or(left, right)
