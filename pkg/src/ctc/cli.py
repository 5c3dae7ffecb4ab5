"""The ``ctc`` command: parse, lts, check, laws and normalize.

Exit codes: 0 on success or equivalence, 1 on inequivalence or a law
counterexample, 2 on usage, input or model errors.  Diagnostics go to
stderr and machine output to stdout, written in one piece at the end.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import equiv, laws
from .semantics import PLTS, build_plts, format_label
from .state import StateModel, load_model, trivial_model
from .syntax import (Act, Box, CtcError, GEps, GDelta, Process, Test, parse_definitions,
                     parse_process, pretty, walk)

PROBABILISM = "probabilism"
REVERSIBILITY = "reversibility"
GUARDS = "guards"

CHAPTERS = {
    3: frozenset({GUARDS}),
    4: frozenset({PROBABILISM, REVERSIBILITY}),
    5: frozenset({PROBABILISM, GUARDS}),
    6: frozenset({REVERSIBILITY, GUARDS}),
    7: frozenset({PROBABILISM, REVERSIBILITY, GUARDS}),
}


class UsageError(CtcError):
    pass


def features_of(p: Process) -> set[str]:
    """Optional calculus features a term uses."""
    out = set()
    for q in walk(p):
        if isinstance(q, Box):
            out.add(PROBABILISM)
        elif isinstance(q, Act) and q.key is not None:
            out.add(REVERSIBILITY)
        elif isinstance(q, Test) and not isinstance(q.guard, (GEps, GDelta)):
            out.add(GUARDS)
    return out


def gate(p: Process, enabled: frozenset[str], what: str = "term") -> None:
    missing = sorted(features_of(p) - enabled)
    if missing:
        raise UsageError(f"{what} uses {', '.join(missing)}, which is disabled in this chapter")


# ---------------------------------------------------------------- inputs

def _text(arg: str) -> str:
    """A term argument is either literal text or the path of a file holding it."""
    path = Path(arg)
    try:
        if path.is_file():
            return path.read_text(encoding="utf-8").strip()
    except OSError:
        pass
    return arg


def _read(path: str | None, what: str) -> str | None:
    if path is None:
        return None
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise UsageError(f"cannot read {what} {path}: {e.strerror}") from None


class Context:
    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.features = CHAPTERS[args.chapter]
        text = _read(getattr(args, "model", None), "model")
        self.model: StateModel | None = load_model(text) if text is not None else None
        text = _read(getattr(args, "defs", None), "definitions")
        self.defs = parse_definitions(text) if text else {}
        for name, body in sorted(self.defs.items()):
            gate(body, self.features, f"definition {name}")

    def term(self, arg: str) -> Process:
        text = _text(arg)
        # gate first so a disabled feature is reported before unknown names
        gate(parse_process(text, self.defs, check_consts=False), self.features)
        return parse_process(text, self.defs)

    def model_or_trivial(self) -> StateModel:
        return self.model or trivial_model()

    def build(self, p: Process) -> PLTS:
        model = self.model_or_trivial()
        return build_plts(p, model.initial, model, self.defs, max_configs=self.args.max_configs,
                          faithful_pcomp=self.args.faithful_pcomp)

    @property
    def reversible(self) -> bool:
        return REVERSIBILITY in self.features


def _seed(args: argparse.Namespace) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("CTC_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"CTC_SEED must be an integer, not {env!r}") from None


def _emit(args: argparse.Namespace, kind: str, records: list[dict], out: list[str]) -> None:
    """Records as one line each, or as a single JSON document."""
    if args.format == "doc":
        out.append(json.dumps({"kind": kind, "records": records}, indent=2, sort_keys=True))
        return
    for r in records:
        fields = [r["record"]] + [f"{k}={r[k]}" for k in r if k != "record"]
        out.append("\t".join(str(f) for f in fields))


# ---------------------------------------------------------------- commands

def cmd_parse(ctx: Context, out: list[str]) -> int:
    p = ctx.term(ctx.args.term)
    if ctx.args.format == "doc":
        out.append(json.dumps({"kind": "term", "term": pretty(p),
                               "features": sorted(features_of(p))}, indent=2, sort_keys=True))
    else:
        out.append(pretty(p))
    return 0


def lts_records(lts: PLTS, reversible: bool = True) -> list[dict]:
    recs: list[dict] = []
    for i, c in enumerate(lts.configs):
        recs.append({"record": "config", "id": i, "phase": c.phase, "state": c.state,
                     "done": int(lts.done.get(i, False)), "root": int(i in lts.roots),
                     "term": pretty(c.process, marks=True)})
    for i in range(len(lts.configs)):
        for w, j in lts.prob.get(i, []):
            recs.append({"record": "edge", "kind": "prob", "src": i, "dst": j, "label": "", "p": str(w)})
        for lbl, j in lts.fwd.get(i, []):
            recs.append({"record": "edge", "kind": "fwd", "src": i, "dst": j, "label": format_label(lbl), "p": "1"})
        if reversible:
            for lbl, j in lts.rev.get(i, []):
                recs.append({"record": "edge", "kind": "rev", "src": i, "dst": j, "label": format_label(lbl), "p": "1"})
    return recs


def cmd_lts(ctx: Context, out: list[str]) -> int:
    lts = ctx.build(ctx.term(ctx.args.term))
    _emit(ctx.args, "lts", lts_records(lts, ctx.reversible), out)
    return 0


def cmd_check(ctx: Context, out: list[str]) -> int:
    a = ctx.args
    mode = a.mode or ("fr" if ctx.reversible else "fwd")
    if not ctx.reversible and mode != "fwd":
        raise UsageError(f"mode {mode} needs reversibility, which is disabled in this chapter")
    la, lb = ctx.build(ctx.term(a.left)), ctx.build(ctx.term(a.right))
    if a.equiv == "step":
        res = equiv.check_step_bisim(la, lb, mode, a.strength)
    elif a.equiv == "pomset":
        res = equiv.check_pomset_bisim(la, lb, mode, a.strength, max_seq=a.max_seq)
    else:
        res = equiv.check_hp_bisim(la, lb, mode, a.strength, hereditary=a.equiv == "hhp")
    verdict = "equivalent" if res else "inequivalent"
    _emit(a, "check", [{"record": "verdict", "result": verdict, "equiv": a.equiv,
                        "strength": a.strength, "mode": mode}], out)
    if a.witness:
        lines = []
        for k, block in enumerate(sorted(sorted(b) for b in res.blocks)):
            lines.append(f"block {k}: " + " ".join(f"{'AB'[side]}{kind}{i}" for side, kind, i in block))
        try:
            Path(a.witness).write_text("\n".join(lines) + "\n", encoding="utf-8")
        except OSError as e:
            raise UsageError(f"cannot write witness {a.witness}: {e.strerror}") from None
    return 0 if res else 1


def cmd_laws(ctx: Context, out: list[str]) -> int:
    a = ctx.args
    if a.law and a.all:
        raise UsageError("give either --law or --all")
    ids = None if a.all or not a.law else list(a.law)
    known = set(laws.LAW_IDS) | {laws.EXPANSION_ID}
    for law_id in ids or []:
        if law_id not in known:
            raise UsageError(f"unknown law {law_id}")
    seed = _seed(a)
    cfg = laws.GenConfig(max_depth=a.depth, seed=seed)
    verdicts = laws.run_all(a.trials, cfg, ctx.model, seed=seed, ids=ids)
    if a.format == "doc":
        recs = [{"record": "law", "law": v.law, "trials": v.trials, "skipped": v.skipped,
                 "verdict": "holds" if v.holds else "counterexample", "line": v.line()} for v in verdicts]
        _emit(a, "laws", recs, out)
    else:
        out.extend(v.line() for v in verdicts)
    return 0 if all(v.holds for v in verdicts) else 1


def cmd_normalize(ctx: Context, out: list[str]) -> int:
    p = ctx.term(ctx.args.term)
    nf = laws.expansion_nf(p, ctx.model_or_trivial(), deep=ctx.args.deep, defs=ctx.defs or None)
    if ctx.args.format == "doc":
        out.append(json.dumps({"kind": "normal-form", "input": pretty(p), "term": pretty(nf)},
                              indent=2, sort_keys=True))
    else:
        out.append(pretty(nf))
    return 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="ctc", description="Probabilistic reversible guarded process calculus tools.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", help="state model file (default: one state, no atoms)")
    common.add_argument("--defs", help="file of constant definitions, one 'X := term' per line")
    common.add_argument("--chapter", type=int, choices=sorted(CHAPTERS), default=7,
                        help="feature preset: 3 guards, 4 prob+rev, 5 prob+guards, 6 rev+guards, 7 all")
    common.add_argument("--format", choices=("lines", "doc"), default="lines")
    build = argparse.ArgumentParser(add_help=False)
    build.add_argument("--max-configs", type=int, default=5000)
    build.add_argument("--faithful-pcomp", action="store_true",
                       help="resolve P||Q to P'+Q' as the literal rule reads")
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", parents=[common], help="parse and pretty print a term")
    p.add_argument("term")
    p.set_defaults(run=cmd_parse)

    p = sub.add_parser("lts", parents=[common, build], help="build the transition system of a term")
    p.add_argument("term", help="term text or a file holding it")
    p.set_defaults(run=cmd_lts)

    p = sub.add_parser("check", parents=[common, build], help="decide an equivalence between two terms")
    p.add_argument("left")
    p.add_argument("right")
    p.add_argument("--equiv", choices=("step", "pomset", "hp", "hhp"), default="step")
    p.add_argument("--strength", choices=equiv.STRENGTHS, default="strong")
    p.add_argument("--mode", choices=equiv.MODES, default=None, help="default fr, or fwd without reversibility")
    p.add_argument("--max-seq", type=int, default=2, help="longest step run for pomset checks")
    p.add_argument("--witness", help="write the final partition to this file")
    p.set_defaults(run=cmd_check)

    p = sub.add_parser("laws", parents=[common], help="test algebraic laws on random instances")
    p.add_argument("--law", action="append", help="law id, repeatable")
    p.add_argument("--all", action="store_true")
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--seed", type=int, default=None, help="default CTC_SEED or 0")
    p.add_argument("--depth", type=int, default=4, help="term depth for generated instances")
    p.set_defaults(run=cmd_laws)

    p = sub.add_parser("normalize", parents=[common], help="expansion normal form of a parallel composition")
    p.add_argument("term")
    p.add_argument("--deep", action="store_true", help="normalise continuations too")
    p.set_defaults(run=cmd_normalize)
    return top


def run(argv: list[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 2
    out: list[str] = []
    try:
        code = args.run(Context(args), out)
    except CtcError as e:
        print(f"ctc: {e}", file=stderr)
        return 2
    if out:
        stdout.write("\n".join(out) + "\n")
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
