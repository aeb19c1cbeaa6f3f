"""Command-line front end: traces, appearances, verify and oracle-check."""
from __future__ import annotations

import argparse
import concurrent.futures as cf
import json
import os
import random
import sys
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from . import appearance as ap
from . import model as m
from . import quantum as qm
from . import verify as vf
from .dsl import (ParseError, parse_network, parse_property_file, parse_scenario,
                  pretty_action, pretty_trace)
from .rewrite import RewriteError, render_tree
from .semantics import SemanticsError, enumerate_traces, resolve_signs

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2
JOBS_ENV = "EPIQUANT_JOBS"


class InputError(Exception):
    """A missing or unreadable input file."""


@dataclass
class Invocation:
    command: str
    paths: tuple[str, ...]
    fmt: str = "json"
    output: Optional[str] = None


def asset_dir() -> Path:
    return Path(str(resources.files("epiquant") / "assets"))


def resolve(path: str) -> Path:
    """A path on disk, or the name of a bundled asset."""
    p = Path(path)
    if p.is_file():
        return p
    bundled = asset_dir() / p.name
    if p.parent == Path(".") and bundled.is_file():
        return bundled
    raise InputError(f"{path}: no such file")


def read(path: str) -> tuple[str, str]:
    p = resolve(path)
    try:
        return p.read_text(encoding="utf-8"), str(path)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from exc


def load_network(path: str) -> m.NetworkSpec:
    text, name = read(path)
    return parse_network(text, name)


def load_scenario(path: str) -> ap.ScenarioConfig:
    text, name = read(path)
    return parse_scenario(text, name)


def emit(inv: Invocation, text: str) -> None:
    if inv.output:
        Path(inv.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def default_jobs() -> int:
    raw = os.environ.get(JOBS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# traces


def cmd_traces(args) -> int:
    inv = Invocation("traces", (args.network,), args.format, args.output)
    net = load_network(args.network)
    players = [p for p in args.players.split(",") if p] if args.players else None
    named = enumerate_traces(net, players)
    if inv.fmt == "json":
        report = {
            "network": net.name,
            "traces": [{"name": t.name, "successful": t.successful,
                        "assignment": [[a, p, b.value] for a, p, b in t.assignment],
                        "trace": pretty_trace(t.trace)} for t in named],
            "summary": {"total": len(named), "successful": sum(t.successful for t in named)},
        }
        emit(inv, vf.to_json(report))
    else:
        lines = []
        for t in named:
            flag = "  # successful" if t.successful else ""
            lines.append(f"trace {t.name} = {pretty_trace(t.trace)}{flag}")
        ok = sum(t.successful for t in named)
        lines.append(f"# {len(named)} traces, {ok} successful")
        emit(inv, "\n".join(lines) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# appearances


def _sample_trace(net: m.NetworkSpec) -> tuple[str, m.Trace]:
    """The first successful run with its first derivable sign assignment."""
    named = enumerate_traces(net)
    pick = next((t for t in named if t.successful), named[0])
    signed = resolve_signs(pick.trace)
    return pick.name, (signed[0] if signed else pick.trace)


def cmd_appearances(args) -> int:
    inv = Invocation("appearances", (args.network, args.scenario), args.format, args.output)
    net = load_network(args.network)
    config = load_scenario(args.scenario)
    amap = ap.build(config, net)
    if args.prop:
        text, name = read(args.prop)
        pf = parse_property_file(text, file=name)
        label = args.trace or next(iter(pf.traces), None)
        if label not in pf.traces:
            raise InputError(f"{args.prop}: no trace named {label!r}")
        trace = pf.traces[label]
    else:
        label, trace = _sample_trace(net)
    agents = [args.agent] if args.agent else list(amap.agents)
    rows = []
    for agent in agents:
        for k, action in enumerate(trace):
            alts = amap.apply_action(agent, action)
            rows.append((agent, k, pretty_action(action), [pretty_trace(a) for a in alts]))
    if inv.fmt == "json":
        emit(inv, vf.to_json({
            "network": net.name, "scenario": config.name, "trace": label,
            "rows": [{"agent": a, "position": k, "action": act, "alternatives": alts}
                     for a, k, act, alts in rows],
        }))
    else:
        lines = [f"# trace {label} under {config.name}"]
        for a, k, act, alts in rows:
            lines.append(f"{a}\t{k}\t{act}\t{' | '.join(alts)}")
        emit(inv, "\n".join(lines) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify


def _verify_one(net_path: str, prop_path: str, scn_path: str, index: int,
                short_circuit: bool, debug: bool) -> tuple[dict, list[str]]:
    """Check a single property; runs in a worker process under ``--jobs``."""
    net = load_network(net_path)
    config = load_scenario(scn_path)
    text, name = read(prop_path)
    label, seq = parse_property_file(text, file=name).properties[index]
    result = vf.check_property(seq, ap.build(config, net), label, short_circuit=short_circuit)
    tree = render_tree(result.tree) if debug else []
    return vf.property_report(result), tree


def cmd_verify(args) -> int:
    inv = Invocation("verify", (args.network, args.prop, args.scenario), args.format, args.output)
    net = load_network(args.network)
    config = load_scenario(args.scenario)
    text, name = read(args.prop)
    pf = parse_property_file(text, file=name)
    ap.build(config, net)
    if not pf.properties:
        raise InputError(f"{args.prop}: no properties")
    jobs = args.jobs or default_jobs()
    short = not args.no_short_circuit
    work = [(args.network, args.prop, args.scenario, k, short, args.debug_tree)
            for k in range(len(pf.properties))]
    if jobs > 1 and len(work) > 1:
        with cf.ProcessPoolExecutor(max_workers=min(jobs, len(work))) as pool:
            done = list(pool.map(_verify_one, *zip(*work)))
    else:
        done = [_verify_one(*w) for w in work]
    if args.debug_tree:
        for (rep, tree) in done:
            sys.stderr.write(f"== {rep['label']}\n" + "\n".join(tree) + "\n")
    report = vf.emit_report([r for r, _ in done], config, net.name)
    emit(inv, vf.to_json(report) if inv.fmt == "json" else vf.render_text(report))
    return EXIT_OK if report["summary"]["all_hold"] else EXIT_FAIL


# ---------------------------------------------------------------------------
# oracle-check


def load_circuit(text: str) -> list[str]:
    ops = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            ops.append(line)
    return ops


def cmd_oracle_check(args) -> int:
    inv = Invocation("oracle-check", (), args.format, args.output)
    if args.circuit:
        text, _ = read(args.circuit)
        circuits = [load_circuit(text)]
    else:
        if args.circuits < 1:
            raise InputError("--circuits must be at least 1")
        if not 1 <= args.qubits <= 6:
            raise InputError("--qubits must be between 1 and 6")
        rng = random.Random(args.seed)
        circuits = [qm.random_circuit(rng, rng.randint(1, args.qubits), args.length)
                    for _ in range(args.circuits)]
    t0 = time.perf_counter()
    projections = 0
    failures = []
    probabilities = []
    for k, ops in enumerate(circuits):
        try:
            pairs = qm.run_circuit(ops)
        except (qm.QuantumError, ValueError, KeyError) as exc:
            raise InputError(f"circuit {k}: {exc}") from exc
        projections += len(pairs)
        probabilities.extend(pairs)
        bad = [(i, pt, pd) for i, (pt, pd) in enumerate(pairs) if not qm.agree(pt, pd)]
        if bad:
            failures.append({"circuit": k, "ops": ops,
                             "mismatches": [{"projection": i, "tableau": pt, "dense": pd}
                                            for i, pt, pd in bad]})
    report = {
        "circuits": len(circuits),
        "seed": None if args.circuit else args.seed,
        "projections": projections,
        "mismatches": len(failures),
        "failures": failures,
        "seconds": round(time.perf_counter() - t0, 3) if args.timing else None,
    }
    if args.circuit:
        report["probabilities"] = [[pt, round(pd, 12)] for pt, pd in probabilities]
    if inv.fmt == "json":
        emit(inv, vf.to_json(report))
    else:
        lines = [f"{len(circuits)} circuits, {projections} projections, {len(failures)} mismatches"]
        if args.circuit:
            lines += [f"projection {i}: tableau {pt} dense {pd:.12f}"
                      for i, (pt, pd) in enumerate(probabilities)]
        for f in failures:
            lines.append(f"circuit {f['circuit']}:")
            lines += [f"  {op}" for op in f["ops"]]
        emit(inv, "\n".join(lines) + "\n")
    return EXIT_FAIL if failures else EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="epiquant",
                                description="Epistemic verification of quantum network protocols.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--format", choices=("json", "text"), default="json")
        sp.add_argument("-o", "--output", help="write to this file instead of stdout")

    t = sub.add_parser("traces", help="list the named traces of a network")
    t.add_argument("network")
    t.add_argument("--players", help="comma separated players taking part")
    common(t)
    t.set_defaults(func=cmd_traces)

    a = sub.add_parser("appearances", help="dump the appearance map for a scenario")
    a.add_argument("network")
    a.add_argument("scenario")
    a.add_argument("--prop", help="property file holding the trace to show")
    a.add_argument("--trace", help="trace name inside --prop")
    a.add_argument("--agent", help="only this agent's rows")
    common(a)
    a.set_defaults(func=cmd_appearances)

    v = sub.add_parser("verify", help="check every property of a property file")
    v.add_argument("network")
    v.add_argument("prop")
    v.add_argument("scenario")
    v.add_argument("--debug-tree", action="store_true", help="print rewrite trees to stderr")
    v.add_argument("--jobs", type=int, default=None,
                   help=f"worker processes (default ${JOBS_ENV} or 1)")
    v.add_argument("--no-short-circuit", action="store_true",
                   help="expand nested boxes completely")
    common(v)
    v.set_defaults(func=cmd_verify)

    o = sub.add_parser("oracle-check", help="cross-check the tableau against the dense simulator")
    o.add_argument("--circuits", type=int, default=1000)
    o.add_argument("--seed", type=int, default=7)
    o.add_argument("--qubits", type=int, default=6, help="maximum qubits per circuit")
    o.add_argument("--length", type=int, default=20, help="operations per circuit")
    o.add_argument("--circuit", help="run one circuit file instead of random ones")
    o.add_argument("--timing", action="store_true", help="include wall time in the report")
    common(o)
    o.set_defaults(func=cmd_oracle_check)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT
    except (InputError, SemanticsError, ap.AppearanceError, RewriteError, m.ModelError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
