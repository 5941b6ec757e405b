"""Command line driver: evaluate a query of a Px program.

    liftex --program twoheads.px --query twoheads --population coins=100
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

from .algebra import Unliftable
from .build import UnsupportedQuery, build_closed
from .ground import QueryError, ground_query
from .inference import LiftedEvaluator, NotLiftable, emit_recurrences
from .lifted import LiftedError, node_count, to_dot
from .program import ParseError, PxError, TypeCheckError, load, map_populations, parse_query

EXIT_OK, EXIT_PARSE, EXIT_TYPE, EXIT_QUERY, EXIT_MISMATCH = 0, 2, 3, 4, 5
MODES = ("lifted", "ground", "auto", "compare")
TOLERANCE = 1e-9


class RunError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


@dataclass
class RunConfig:
    program: str
    query: str
    mode: str = "auto"
    populations: dict = field(default_factory=dict)
    output: str = "text"
    dot: Optional[str] = None
    recurrences: bool = False
    bench: Optional[tuple] = None  # (population, [N, ...])

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode}")
        if self.bench is not None and self.mode not in ("auto", "lifted"):
            raise ValueError("--bench needs mode auto or lifted")


@dataclass
class RunReport:
    probability: float
    mode: str
    verdicts: dict
    lifted_nodes: object  # int or "skipped"
    ground_nodes: object
    seconds: float
    cells: object
    difference: Optional[float] = None
    lifted_probability: Optional[float] = None
    refused: Optional[str] = None
    recurrences: Optional[str] = None

    def to_json(self):
        d = asdict(self)
        if d["recurrences"] is None:
            del d["recurrences"]
        return json.dumps(d, sort_keys=True)

    def to_text(self):
        lines = [f"probability: {self.probability:.12g}",
                 f"mode: {self.mode}"]
        for x, ok in self.verdicts.items():
            lines.append(f"subsumption {x}: {'yes' if ok else 'no'}")
        lines.append(f"lifted nodes: {self.lifted_nodes}")
        lines.append(f"ground nodes: {self.ground_nodes}")
        lines.append(f"memo cells: {self.cells}")
        if self.refused:
            lines.append(f"lifted refused: {self.refused}")
        if self.difference is not None:
            lines.append(f"lifted probability: {self.lifted_probability:.12g}")
            lines.append(f"|lifted - ground|: {self.difference:.3g}")
        lines.append(f"time: {self.seconds:.4f}s")
        if self.recurrences:
            lines.append("")
            lines.append(self.recurrences)
        return "\n".join(lines)


def _load(cfg, sizes=None):
    try:
        with open(cfg.program) as fh:
            text = fh.read()
    except OSError as e:
        raise RunError(f"cannot read {cfg.program}: {e.strerror}", EXIT_PARSE) from None
    try:
        tp = load(text, cfg.program)
    except ParseError as e:
        raise RunError(str(e), EXIT_PARSE) from None
    except TypeCheckError as e:
        raise RunError(str(e), EXIT_TYPE) from None
    try:
        query = parse_query(cfg.query)
    except ParseError as e:
        raise RunError(f"query: {e.message}", EXIT_PARSE) from None
    try:
        popmap = map_populations(tp, sizes if sizes is not None else cfg.populations)
    except TypeCheckError as e:
        raise RunError(e.message, EXIT_TYPE) from None
    if any(not isinstance(a, (int, str)) for a in query.args):
        raise RunError("the query must be ground", EXIT_QUERY)
    if query.key not in {c.head.key for c in tp.clauses}:
        raise RunError(f"undefined predicate {query.pred}/{len(query.args)}", EXIT_QUERY)
    return tp, popmap, query


def _lifted(tp, popmap, query):
    """Closed lifted graph, or the reason it could not be built."""
    try:
        return build_closed(tp, popmap, query), None
    except (UnsupportedQuery, LiftedError, Unliftable) as e:
        return None, str(e)


def _ground(tp, popmap, query):
    try:
        eng, u = ground_query(tp, popmap, query)
    except QueryError as e:
        raise RunError(str(e), EXIT_QUERY) from None
    return eng, u


def run(cfg: RunConfig, sizes=None) -> RunReport:
    t0 = time.perf_counter()
    tp, popmap, query = _load(cfg, sizes)
    g = why = ev = None
    verdicts = {}
    lifted_p = ground_p = None
    eng = u = None
    mode = cfg.mode

    if mode in ("lifted", "auto", "compare"):
        g, why = _lifted(tp, popmap, query)
        if g is not None:
            try:
                ev = LiftedEvaluator(g, tp.switches)
                verdicts = ev.verdicts
                lifted_p = ev.probability()
            except NotLiftable as e:
                why, verdicts, ev = e.reason, e.verdicts, None
        if ev is None:
            if mode == "lifted":
                raise RunError(f"lifted inference refused: {why}", EXIT_QUERY)
            if mode == "auto":
                mode = "ground"
        elif mode == "auto":
            mode = "lifted"

    if mode in ("ground", "compare"):
        eng, u = _ground(tp, popmap, query)
        ground_p = eng.g_prob(u)

    # a refused lifted run leaves nothing to compare against
    diff = abs(lifted_p - ground_p) if mode == "compare" and ev is not None else None

    no_derivation = u == 0 if eng is not None else (g is not None and g.is_false)
    if no_derivation:
        raise RunError(f"query {cfg.query} has no derivation", EXIT_QUERY)

    if cfg.dot:
        with open(cfg.dot, "w") as fh:
            if ev is not None:
                fh.write(to_dot(g, tp.switches))
            else:
                fh.write(eng.to_dot(u))

    rec = None
    if cfg.recurrences:
        if ev is None:
            rec = f"% no recurrences: {why or 'lifted inference not used'}"
        else:
            rec = emit_recurrences(g, tp.switches).render()

    return RunReport(
        probability=lifted_p if mode == "lifted" else ground_p,
        mode=mode,
        verdicts=verdicts,
        lifted_nodes=node_count(g.psi) if g is not None else "skipped",
        ground_nodes=eng.size(u) if eng is not None else "skipped",
        seconds=time.perf_counter() - t0,
        cells=ev.cells if ev is not None else "skipped",
        difference=diff,
        lifted_probability=lifted_p,
        refused=why if ev is None else None,
        recurrences=rec,
    )


def bench(cfg: RunConfig) -> list:
    """Rows ``(N, lifted nodes, memo cells, seconds)`` over the sweep."""
    name, ns = cfg.bench
    rows = []
    for n in ns:
        sizes = {**cfg.populations, name: n}
        r = run(RunConfig(cfg.program, cfg.query, "lifted", sizes), sizes)
        rows.append((n, r.lifted_nodes, r.cells, r.seconds))
    return rows


def format_bench(rows, name="N"):
    out = [f"{name:>8} {'nodes':>6} {'cells':>8} {'seconds':>9}"]
    for n, nodes, cells, sec in rows:
        out.append(f"{n:>8} {nodes:>6} {cells:>8} {sec:>9.4f}")
    return "\n".join(out)


def _population(text):
    name, sep, n = text.partition("=")
    if not sep or not name:
        raise argparse.ArgumentTypeError(f"expected name=N, got {text!r}")
    try:
        return name.strip(), int(n)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad size in {text!r}") from None


def _sweep(text):
    name, sep, ns = text.partition("=")
    try:
        sizes = [int(x) for x in ns.split(",") if x.strip()]
    except ValueError:
        sizes = []
    if not sep or not name or not sizes:
        raise argparse.ArgumentTypeError(f"expected name=N1,N2,..., got {text!r}")
    return name.strip(), sizes


def parser():
    p = argparse.ArgumentParser(prog="liftex", description="Exact inference for Px programs.")
    p.add_argument("--program", required=True, help="Px source file")
    p.add_argument("--query", required=True, help="ground query atom")
    p.add_argument("--mode", choices=MODES, default="auto")
    p.add_argument("--population", action="append", type=_population, default=[],
                   metavar="NAME=N", help="override a population size")
    p.add_argument("--dot", metavar="PATH", help="write the graph used in DOT format")
    p.add_argument("--recurrences", action="store_true", help="print the recurrence system")
    p.add_argument("--json", action="store_true", help="JSON output")
    p.add_argument("--bench", type=_sweep, metavar="NAME=N1,N2,...",
                   help="population sweep with lifted inference")
    return p


def main(argv=None) -> int:
    args = parser().parse_args(argv)
    try:
        cfg = RunConfig(args.program, args.query, args.mode, dict(args.population),
                        "json" if args.json else "text", args.dot, args.recurrences, args.bench)
    except ValueError as e:
        print(f"liftex: {e}", file=sys.stderr)
        return EXIT_PARSE
    try:
        if cfg.bench is not None:
            rows = bench(cfg)
            if cfg.output == "json":
                print(json.dumps([dict(zip(("n", "lifted_nodes", "cells", "seconds"), r))
                                  for r in rows]))
            else:
                print(format_bench(rows, cfg.bench[0]))
            return EXIT_OK
        report = run(cfg)
    except RunError as e:
        print(f"liftex: {e}", file=sys.stderr)
        return e.code
    except PxError as e:
        print(f"liftex: {e}", file=sys.stderr)
        return EXIT_TYPE
    print(report.to_json() if cfg.output == "json" else report.to_text())
    if report.difference is not None and report.difference > TOLERANCE:
        print(f"liftex: lifted and ground results differ by {report.difference:.3g}",
              file=sys.stderr)
        return EXIT_MISMATCH
    return EXIT_OK
