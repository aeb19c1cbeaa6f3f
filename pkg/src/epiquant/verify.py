"""Leaf checking, verdict aggregation, attack extraction and JSON reports."""
from __future__ import annotations

import datetime as _dt
import enum
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

from . import __version__
from . import model as m
from .appearance import AppearanceMap, Delivery, ScenarioConfig, materialize
from .dsl import pretty_formula, pretty_sequent, pretty_trace
from .quantum import DenseState
from .rewrite import AtomicExpression, RewriteNode, rewrite
from .semantics import Configuration, derive, eval_prop

#: Design choices that change verdicts; copied into every report.
FLAGS = {
    "negation": "complement-of-verdict",
    "not_well_defined": "vacuously-true",
    "box_pruning": "per-level",
    "filters": ["basis", "content", "not-derivable"],
    "nested_box_order": "outer-first",
}


class LeafVerdict(enum.Enum):
    NOT_WELL_DEFINED = "not-well-defined"
    TRUE = "true"
    FALSE = "false"


@dataclass
class LeafResult:
    verdict: LeafVerdict
    store: Optional[dict[str, int]] = None
    diagnostic: str = ""


def check_atomic(expr: AtomicExpression) -> LeafResult:
    """Derive the lhs and evaluate the rhs in every final configuration."""
    if not expr.is_atomic():
        raise ValueError("check_atomic needs an atomic expression")
    result = derive(expr.register, expr.lhs)
    if not result.derivable:
        return LeafResult(LeafVerdict.NOT_WELL_DEFINED)
    values = [eval_prop(c, expr.rhs) for c in result.configs]
    store = result.configs[0].store
    if any(v is None for v in values):
        return LeafResult(LeafVerdict.FALSE, store,
                          f"unbound bit in {pretty_formula(expr.rhs, unicode=False)}")
    ok = all(values)
    return LeafResult(LeafVerdict.TRUE if ok else LeafVerdict.FALSE, store)


def dense_check(expr: AtomicExpression) -> LeafVerdict:
    """The same check on a state vector; used as an independent oracle."""
    st = DenseState()
    store: dict[str, int] = {}
    for a in expr.lhs:
        if isinstance(a, m.Prep):
            if a.qubit not in st.labels:
                st.add_qubit(a.qubit)
            st.reset(a.qubit, a.basis, a.sign)
        elif isinstance(a, m.Entangle):
            st.cz(*a.qubits)
        elif isinstance(a, m.Hadamard):
            st.h(a.qubit)
        elif isinstance(a, m.Project):
            if st.project(a.qubit, a.basis, a.sign) < 1e-12:
                return LeafVerdict.NOT_WELL_DEFINED
            store[str(a.qubit)] = a.sign.bit
    cfg = Configuration(None, store)
    v = eval_prop(cfg, expr.rhs) if not isinstance(expr.rhs, (m.QubitAtom, m.Tensor)) else \
        all(q in st.labels for q in (expr.rhs.qubits if isinstance(expr.rhs, m.Tensor)
                                     else (expr.rhs.index,)))
    return LeafVerdict.TRUE if v is True else LeafVerdict.FALSE


@dataclass
class AttackPath:
    actions: m.Trace
    property: str
    deceived: tuple[str, ...]
    interceptions: tuple[tuple[int, int], ...]
    branch: str

    def text(self) -> str:
        return pretty_trace(self.actions)

    def intercept_text(self) -> list[str]:
        return [pretty_trace(self.actions[a:b]) for a, b in self.interceptions]


@dataclass
class Verdict:
    holds: bool
    value: Optional[bool]
    witnesses: list[RewriteNode] = field(default_factory=list)
    witness_count: int = 0

    def __post_init__(self) -> None:
        assert self.holds == (self.witness_count == 0)


@dataclass
class PropertyResult:
    label: str
    sequent: m.Sequent
    verdict: Verdict
    tree: RewriteNode
    steps: int
    diagnostics: list[str]
    attacks: list[AttackPath] = field(default_factory=list)


def _witnesses(node: RewriteNode, bad: bool, out: list[RewriteNode]) -> None:
    """Branches responsible for ``node`` evaluating to ``bad``."""
    if node.value is not bad:
        return
    if node.rule == "atomic":
        out.append(node)
    elif node.rule == "box":
        out.extend(c for c in node.children if c.value is bad)
    elif node.rule == "not":
        _witnesses(node.children[0], not bad, out)
    elif node.rule == "or" and bad is True or node.rule == "and" and bad is False:
        for c in node.children:
            if c.value is bad:
                _witnesses(c, bad, out)
                break
    else:
        for c in node.children:
            _witnesses(c, bad, out)


def check_property(seq: m.Sequent, amap: AppearanceMap, label: str = "property",
                   short_circuit: bool = True, max_witnesses: int = 64) -> PropertyResult:
    """Rewrite, evaluate every leaf, and aggregate through the tree."""
    diagnostics: list[str] = []

    def evaluate(expr: AtomicExpression, config: Configuration) -> bool:
        v = eval_prop(config, expr.rhs)
        if v is None:
            diagnostics.append(f"unbound bit in {pretty_formula(expr.rhs, unicode=False)}")
            return False
        return v

    res = rewrite(seq, amap, evaluate=evaluate, short_circuit=short_circuit)
    root = res.tree
    value = root.value
    holds = value is not False
    found: list[RewriteNode] = []
    if not holds:
        _witnesses(root, False, found)
    verdict = Verdict(holds, value, found[:max_witnesses], len(found))
    out = PropertyResult(label, seq, verdict, root, res.steps, sorted(set(diagnostics)))
    out.attacks = extract_attacks(verdict, root, amap, label)
    return out


def extract_attacks(verdict: Verdict, tree: RewriteNode, amap: AppearanceMap,
                    label: str = "property") -> list[AttackPath]:
    """One path per witness branch; empty for a holding verdict."""
    if verdict.holds:
        return []
    agents = {n.path: n.agent for n in tree.walk() if n.rule == "box"}
    paths = []
    for w in verdict.witnesses:
        actions = materialize(w.world, amap.first_fresh)
        spans = _interceptions(actions, amap.adversary)
        # boxes above the witness belong to the agents whose view it is
        above = [agents[p] for p in agents if w.path.startswith(p + ".")]
        deceived = [a for a in above if a != amap.adversary]
        for d in w.world:
            if isinstance(d, Delivery) and d.interception and d.recipient not in deceived:
                deceived.append(d.recipient)
        paths.append(AttackPath(actions, label, tuple(deceived), spans, w.path))
    return paths


def _interceptions(actions: m.Trace, adversary: Optional[str]) -> tuple[tuple[int, int], ...]:
    spans = []
    for k, a in enumerate(actions):
        if (isinstance(a, m.QRecv) and a.by == adversary and k > 0
                and isinstance(actions[k - 1], m.QSend)):
            spans.append((k - 1, min(k + 5, len(actions))))
    return tuple(spans)


# ---------------------------------------------------------------------------
# Reports


def _stats(tree: RewriteNode) -> dict:
    pruned = {"basis": 0, "content": 0, "not-derivable": 0}
    boxes = alternatives = skipped = 0
    depth = 0
    true = false = 0
    for n in tree.walk():
        depth = max(depth, n.path.count("."))
        if n.rule == "box":
            boxes += 1
            alternatives += n.total
            skipped += n.skipped
            for k, v in n.pruned.items():
                pruned[k] += v
        elif n.rule == "atomic":
            if n.value:
                true += 1
            else:
                false += 1
    return {"box_nodes": boxes, "alternatives": alternatives, "pruned": pruned,
            "skipped": skipped, "tree_depth": depth, "leaves_true": true, "leaves_false": false}


def property_report(r: PropertyResult, max_leaves: int = 200, max_attacks: int = 16) -> dict:
    st = _stats(r.tree)
    leaves = list(r.tree.leaves())
    not_wd = st["pruned"]["not-derivable"] + (1 if r.tree.value is None else 0)
    leaf_rows = [{
        "branch": n.path,
        "lhs": pretty_trace(n.leaf.lhs),
        "rhs": pretty_formula(n.leaf.rhs),
        "polarity": n.polarity,
        "verdict": (LeafVerdict.TRUE if n.value else LeafVerdict.FALSE).value,
        "eliminated_communications": n.eliminated,
    } for n in leaves[:max_leaves]]
    return {
        "label": r.label,
        "property": pretty_sequent(r.sequent, names=True),
        "verdict": "holds" if r.verdict.holds else "fails",
        "holds": r.verdict.holds,
        "vacuous": r.verdict.value is None,
        "leaf_counts": {
            "total": len(leaves) + st["pruned"]["basis"] + st["pruned"]["content"]
            + st["pruned"]["not-derivable"] + st["skipped"],
            "atomic": len(leaves),
            "well_defined": len(leaves),
            "true": st["leaves_true"],
            "false": st["leaves_false"],
            "not_well_defined": not_wd,
            "pruned": st["pruned"],
            "skipped": st["skipped"],
        },
        "leaves": leaf_rows,
        "leaves_truncated": max(0, len(leaves) - max_leaves),
        "witness_count": r.verdict.witness_count,
        "witnesses": [w.path for w in r.verdict.witnesses],
        "attacks": [{
            "branch": a.branch,
            "deceived": list(a.deceived),
            "path": a.text(),
            "interceptions": a.intercept_text(),
        } for a in r.attacks[:max_attacks]],
        "stats": {"rewrite_steps": r.steps, "box_nodes": st["box_nodes"],
                  "alternatives": st["alternatives"], "tree_depth": st["tree_depth"]},
        "diagnostics": r.diagnostics,
    }


def emit_report(results: Sequence, config: ScenarioConfig,
                network: str = "", timestamp: Optional[str] = None) -> dict:
    if timestamp is None:
        timestamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    props = [r if isinstance(r, dict) else property_report(r) for r in results]
    return {
        "tool": {"name": "epiquant", "version": __version__},
        "timestamp": timestamp,
        "network": network,
        "scenario": {
            "name": config.name,
            "quantum": config.quantum,
            "classical": config.classical,
            "adversary": config.adversary,
            "presence": config.presence,
            "suspicious": sorted(a for a, f in config.suspicion if f),
            "suspect_all": config.suspect_all,
            "intercept_bases": [b.value for b in config.intercept_bases],
            "targets": list(config.targets) if config.targets is not None else None,
            "attack": _attack_json(config.attack),
            "private_outsiders": config.private_outsiders,
        },
        "flags": FLAGS,
        "properties": props,
        "summary": {"properties": len(props),
                    "holding": sum(p["holds"] for p in props),
                    "all_hold": all(p["holds"] for p in props)},
    }


def _attack_json(attack):
    if attack is None or isinstance(attack, str):
        return attack
    return [[q, b.value] for q, b in attack]


def to_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def strip_timestamp(report: dict) -> dict:
    return {k: v for k, v in report.items() if k != "timestamp"}


def render_text(report: dict) -> str:
    lines = [f"network {report['network']}  scenario {report['scenario']['name']}"]
    for p in report["properties"]:
        c = p["leaf_counts"]
        lines.append(f"{p['label']}: {p['verdict'].upper()}  {p['property']}")
        lines.append(f"  leaves: {c['atomic']} well-defined ({c['true']} true, {c['false']} false), "
                     f"{c['not_well_defined']} not well-defined, pruned basis={c['pruned']['basis']} "
                     f"content={c['pruned']['content']}")
        for a in p["attacks"][:3]:
            lines.append(f"  attack [{a['branch']}] deceives {', '.join(a['deceived'])}:")
            for seq in a["interceptions"]:
                lines.append(f"    {seq}")
    s = report["summary"]
    lines.append(f"{s['holding']}/{s['properties']} properties hold")
    return "\n".join(lines) + "\n"
