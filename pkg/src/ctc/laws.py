"""Algebraic law catalog, random term generation and the expansion normaliser.

A law is a pair of templates written in the ordinary concrete syntax.  In a
template the constants ``P Q R S`` stand for processes, the guard atoms
``phi psi phi0 phi1 phi2 wp wpr`` for guards and the actions ``alpha beta``
for actions.  Plain values (probabilities, label sets, relabellings, keys)
are spliced in textually with ``$name`` before parsing.
"""
from __future__ import annotations

import random
import string
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import reduce
from typing import Callable

from .equiv import check_hp_bisim, check_pomset_bisim, check_step_bisim
from .semantics import Config, Semantics, StateSpaceBoundExceeded, build_plts
from .state import StateModel
from .syntax import (Act, Action, Box, Const, CtcError, GAnd, GAtom, GDelta,
                     GEps, GNot, GOr, Guard, Nil, Par, Process, Relabel,
                     Restrict, Seq, Sum, Test, Unfolded, apply_relabel,
                     children, has_past, keys_of, parse_process, pretty,
                     pretty_guard, relabel_fn, sort, strip_marks, walk)


class ShapeError(CtcError):
    pass


class BoundExceeded(CtcError):
    pass


# ---------------------------------------------------------------- generation

@dataclass(frozen=True)
class GenConfig:
    max_depth: int = 3
    actions: tuple[str, ...] = ("a", "b", "c")
    atoms: tuple[str, ...] = ("p", "q")
    allow_recursion: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_depth < 1:
            raise ValueError("max_depth must be at least 1")
        if not self.actions:
            raise ValueError("need at least one action name")


# the one recursive definition generated terms may refer to
RECURSION_DEFS = {"Loop": Seq(Act((Action("a"),)), Const("Loop"))}

_SHAPES = ("nil", "prefix", "guard", "vector", "sum", "box", "par", "restrict", "relabel")
_PROBS = (Fraction(1, 4), Fraction(1, 3), Fraction(1, 2), Fraction(2, 3), Fraction(3, 4))


def gen_action(cfg: GenConfig, rng: random.Random) -> Action:
    return Action(rng.choice(cfg.actions), rng.random() < 0.3)


def gen_guard(cfg: GenConfig, rng: random.Random, depth: int = 2) -> Guard:
    if not cfg.atoms:
        return rng.choice([GEps(), GDelta()])
    if depth <= 1 or rng.random() < 0.4:
        g: Guard = GAtom(rng.choice(cfg.atoms))
        return GNot(g) if rng.random() < 0.5 else g
    ctor = rng.choice([GOr, GAnd, GNot])
    if ctor is GNot:
        return GNot(gen_guard(cfg, rng, depth - 1))
    return ctor(gen_guard(cfg, rng, depth - 1), gen_guard(cfg, rng, depth - 1))


def gen_term(cfg: GenConfig, rng: random.Random | None = None, depth: int | None = None) -> Process:
    """A random standard term of nesting depth at most ``cfg.max_depth``.

    Without ``rng`` the result depends only on ``cfg.seed``.
    """
    rng = rng or random.Random(cfg.seed)
    d = cfg.max_depth if depth is None else depth
    if d <= 1:
        kind = rng.choice(("nil", "prefix", "guard"))
        if kind == "nil":
            return Nil()
        if kind == "prefix":
            return Seq(Act((gen_action(cfg, rng),)), Nil())
        return Seq(Test(gen_guard(cfg, rng)), Nil())
    kind = rng.choice(_SHAPES)
    sub = lambda: gen_term(cfg, rng, d - 1)  # noqa: E731
    if kind == "nil":
        if cfg.allow_recursion and rng.random() < 0.3:
            return Const("Loop")
        return Nil()
    if kind == "prefix":
        return Seq(Act((gen_action(cfg, rng),)), sub())
    if kind == "guard":
        return Seq(Test(gen_guard(cfg, rng)), sub())
    if kind == "vector":
        # vector members must not be complementary, so use distinct names
        names = rng.sample(cfg.actions, min(2, len(cfg.actions)))
        acts = tuple(Action(n, rng.random() < 0.3) for n in names)
        return Seq(Act(acts), sub())
    if kind == "sum":
        return Sum(sub(), sub())
    if kind == "box":
        return Box(rng.choice(_PROBS), sub(), sub())
    if kind == "par":
        return Par(sub(), sub())
    if kind == "restrict":
        return Restrict(sub(), frozenset(rng.sample(cfg.actions, rng.randint(1, len(cfg.actions)))))
    return Relabel(sub(), gen_relabel(cfg, rng))


def gen_relabel(cfg: GenConfig, rng: random.Random) -> tuple[tuple[str, str], ...]:
    while True:
        fn = relabel_fn({a: rng.choice(cfg.actions) for a in cfg.actions})
        if fn:
            return fn


def execute(p: Process, s: str, model: StateModel, rng: random.Random,
            max_steps: int = 20) -> tuple[Process, str]:
    """Run ``p`` forward along random choices until it can no longer move."""
    sem = Semantics(model)
    c = sem.classify(p, s)
    for _ in range(max_steps):
        if c.phase == "u":
            dist = sem.prob_resolve(c)
            c = _pick(dist, rng)
        moves = sem.forward_steps(c)
        if not moves:
            break
        c = rng.choice(moves)[1]
    return strip_marks(c.process), c.state


def _pick(dist: list[tuple[Fraction, Config]], rng: random.Random) -> Config:
    x = Fraction(rng.randrange(10 ** 6), 10 ** 6)
    acc = Fraction(0)
    for w, c in dist:
        acc += w
        if x < acc:
            return c
    return dist[-1][1]


def shift_keys(p: Process, by: int) -> Process:
    if isinstance(p, Act):
        return replace(p, key=p.key + by) if p.key is not None else p
    if isinstance(p, (Seq, Sum, Par)):
        return type(p)(shift_keys(p.left, by), shift_keys(p.right, by))
    if isinstance(p, Box):
        return replace(p, left=shift_keys(p.left, by), right=shift_keys(p.right, by))
    if isinstance(p, (Restrict, Relabel, Unfolded)):
        return replace(p, body=shift_keys(p.body, by))
    return p


# ---------------------------------------------------------------- guards as data

def state_formula(model: StateModel, sid: str) -> Guard:
    """A guard true exactly in the states with the same valuation as ``sid``."""
    on = model.state(sid).atoms
    lits: list[Guard] = [GAtom(a) if a in on else GNot(GAtom(a)) for a in sorted(model.atoms)]
    return reduce(GAnd, lits) if lits else GEps()


def formula_of(model: StateModel, sids) -> Guard:
    sids = sorted(set(sids))
    if not sids:
        return GDelta()
    if len(sids) == len(model.states):
        return GEps()
    return reduce(GOr, [state_formula(model, s) for s in sids])


def wp_guard(model: StateModel, a: Action, phi: Guard) -> Guard:
    """States from which ``a`` leads into ``phi``."""
    return formula_of(model, [s.id for s in model.states if model.test(phi, model.effect(a, s))])


def wp_back_guard(model: StateModel, a: Action, phi: Guard) -> Guard:
    """States every ``a``-predecessor of which satisfies ``phi``."""
    good = []
    for t in model.states:
        pre = [s for s in model.states if model.effect(a, s).id == t.id]
        if all(model.test(phi, s) for s in pre):
            good.append(t.id)
    return formula_of(model, good)


# ---------------------------------------------------------------- substitution

def substitute(p: Process, procs: dict, guards: dict, acts: dict, prev: str | None = None) -> Process:
    """Replace metavariables; ``prev`` is recorded on keyed template actions."""
    if isinstance(p, Const):
        return procs.get(p.name, p)
    if isinstance(p, Test):
        return Test(_sub_guard(p.guard, guards))
    if isinstance(p, Act):
        out = tuple(_sub_action(a, acts) for a in p.actions)
        q = replace(p, actions=out)
        if q.key is not None and q.prev is None and prev is not None:
            q = replace(q, prev=prev)
        return q
    if isinstance(p, (Seq, Sum, Par)):
        return type(p)(substitute(p.left, procs, guards, acts, prev), substitute(p.right, procs, guards, acts, prev))
    if isinstance(p, Box):
        return replace(p, left=substitute(p.left, procs, guards, acts, prev),
                       right=substitute(p.right, procs, guards, acts, prev))
    if isinstance(p, (Restrict, Relabel)):
        return replace(p, body=substitute(p.body, procs, guards, acts, prev))
    return p


def _sub_guard(g: Guard, guards: dict) -> Guard:
    if isinstance(g, GAtom):
        return guards.get(g.name, g)
    if isinstance(g, GNot):
        return GNot(_sub_guard(g.arg, guards))
    if isinstance(g, (GOr, GAnd)):
        return type(g)(_sub_guard(g.left, guards), _sub_guard(g.right, guards))
    return g


def _sub_action(a: Action, acts: dict) -> Action:
    b = acts.get(a.name)
    if b is None:
        return a
    return b.comp() if a.co else b


# ---------------------------------------------------------------- laws

PROC_VARS = ("P", "Q", "R", "S")
GUARD_VARS = ("phi", "psi", "phi0", "phi1", "phi2")


@dataclass(frozen=True)
class Law:
    """``std`` and ``nstd`` name the process metavariables drawn as fresh or as
    executed terms; the others default to fresh.  ``side`` filters bindings
    and ``derive`` adds values computed from them (such as ``wp``)."""
    id: str
    family: str
    lhs: str
    rhs: str
    strength: str = "strong"
    mode: str = "fr"
    nstd: tuple[str, ...] = ()
    side: Callable[[dict, StateModel], bool] | None = None
    derive: Callable[[dict, StateModel], dict] | None = None
    keyed: bool = False
    note: str = ""

    @property
    def text(self) -> str:
        rel = "~" if self.strength == "strong" else "~~"
        return f"{self.lhs}  {rel}{self.mode}  {self.rhs}"

    def metavars(self) -> set[str]:
        return _metavars(self.lhs) | _metavars(self.rhs)


def _metavars(text: str) -> set[str]:
    words = set(text.replace("<", " ").replace(">", " ").replace("!", " ")
                .replace("(", " ").replace(")", " ").replace(".", " ").split())
    names = set(PROC_VARS) | set(GUARD_VARS) | {"alpha", "beta"}
    dollars = {w for w in string.Template.pattern.findall(text) for w in w if w}
    return (words & names) | {"$" + d for d in dollars}


def _sort_names(p: Process) -> set[str]:
    return {a.name for a in sort(p, RECURSION_DEFS) if not a.is_tau}


def _vector_ok(b: dict, model: StateModel) -> bool:
    return b["alpha"].name != b["beta"].name


def _all_states(g: str) -> Callable[[dict, StateModel], bool]:
    return lambda b, m: all(m.test(b[g], s) for s in m.states)


def _some_false(b: dict, m: StateModel) -> bool:
    return all(any(not m.test(b[g], s) for g in ("phi0", "phi1", "phi2")) for s in m.states)


def _some_false_joined(b: dict, m: StateModel) -> bool:
    for s0 in m.states:
        for s1 in m.states:
            for s2 in m.states:
                try:
                    u = m.join(m.join(s0, s1), s2)
                except CtcError:
                    continue
                if all(m.test(b[g], u) for g in ("phi0", "phi1", "phi2")):
                    return False
    return True


def _disjoint_sort(b: dict, m: StateModel) -> bool:
    return not (_sort_names(b["P"]) & b["L"])


def _no_sync_on(b: dict, m: StateModel) -> bool:
    lp, lq = sort(b["P"], RECURSION_DEFS), sort(b["Q"], RECURSION_DEFS)
    return not any(a.comp() in lq and a.name in b["L"] for a in lp if not a.is_tau)


def _same_on_sort(b: dict, m: StateModel) -> bool:
    names = _sort_names(b["P"])
    f, g = dict(b["f"]), dict(b["g"])
    return all(f.get(n, n) == g.get(n, n) for n in names)


def _injective_on_sort(b: dict, m: StateModel) -> bool:
    names = _sort_names(b["P"]) | _sort_names(b["Q"])
    f = dict(b["f"])
    return len({f.get(n, n) for n in names}) == len(names)


def _d_monoid2(b: dict, m: StateModel) -> dict:
    pi, rho = b["pi"], b["rho"]
    top = pi + rho - pi * rho
    return {"pi2": pi / top, "top": top, "pic": 1 - pi}


def _d_sets(b: dict, m: StateModel) -> dict:
    f = dict(b["f"])
    inv = {a for a in b["names"] if f.get(a, a) in b["L"]}
    comp = dict(b["g"])
    both = relabel_fn({a: comp.get(f.get(a, a), f.get(a, a)) for a in b["names"]})
    return {"KL": b["K"] | b["L"], "finvL": inv, "gf": both}


def _d_wp(b: dict, m: StateModel) -> dict:
    return {"wp": wp_guard(m, b["alpha"], b["phi"]), "wpr": wp_back_guard(m, b["alpha"], b["phi"])}


def _catalog() -> list[Law]:
    L = Law
    out = [
        # choice is a commutative idempotent monoid
        L("monoid-1", "monoid", "P + Q", "Q + P"),
        L("monoid-2", "monoid", "P + (Q + R)", "(P + Q) + R"),
        L("monoid-3", "monoid", "P + P", "P"),
        L("monoid-4", "monoid", "P + nil", "P"),
        # probabilistic choice
        L("pmonoid-1", "pmonoid", "P [+$pi] Q", "Q [+$pic] P", derive=_d_monoid2),
        L("pmonoid-2", "pmonoid", "P [+$pi] (Q [+$rho] R)", "(P [+$pi2] Q) [+$top] R", derive=_d_monoid2),
        L("pmonoid-3", "pmonoid", "P [+$pi] P", "P"),
        L("pmonoid-4", "pmonoid", "P [+$pi] nil", "P"),
        # composition, restriction and relabelling
        L("static-1", "static", "P || Q", "Q || P"),
        L("static-2", "static", "P || (Q || R)", "(P || Q) || R"),
        L("static-3", "static", "P || nil", "P"),
        L("static-4", "static", "P \\ {$L}", "P", side=_disjoint_sort),
        L("static-5", "static", "P \\ {$K} \\ {$L}", "P \\ {$KL}", derive=_d_sets),
        L("static-6", "static", "P [$f] \\ {$L}", "(P \\ {$finvL}) [$f]", derive=_d_sets),
        L("static-7", "static", "(P || Q) \\ {$L}", "(P \\ {$L}) || (Q \\ {$L})", side=_no_sync_on),
        L("static-8", "static", "P [$id]", "P"),
        L("static-9", "static", "P [$f]", "P [$g]", side=_same_on_sort),
        L("static-10", "static", "P [$f] [$g]", "P [$gf]", derive=_d_sets),
        L("static-11", "static", "(P || Q) [$f]", "(P [$f]) || (Q [$f])", side=_injective_on_sort),
        # guards
        L("guard-1", "guard", "P + delta", "P"),
        L("guard-2", "guard", "delta . P", "delta"),
        L("guard-3", "guard", "eps . P", "P"),
        L("guard-4", "guard", "P . eps", "P"),
        L("guard-5", "guard", "<phi> . <!phi>", "delta"),
        L("guard-6", "guard", "<phi> + <!phi>", "eps"),
        L("guard-7", "guard", "<phi> [+$pi] <!phi>", "eps"),
        L("guard-8", "guard", "<phi> . delta", "delta"),
        L("guard-9", "guard", "<phi> . (P + Q)", "<phi> . P + <phi> . Q"),
        L("guard-10", "guard", "(P + Q) . <phi>", "P . <phi> + Q . <phi>", nstd=("P", "Q")),
        L("guard-11", "guard", "<phi> . (P [+$pi] Q)", "<phi> . P [+$pi] <phi> . Q"),
        L("guard-12", "guard", "(P [+$pi] Q) . <phi>", "P . <phi> [+$pi] Q . <phi>", nstd=("P", "Q")),
        L("guard-13", "guard", "<phi> . (P . Q)", "(<phi> . P) . Q"),
        L("guard-14", "guard", "(P . Q) . <phi>", "P . (Q . <phi>)", nstd=("P", "Q")),
        L("guard-15", "guard", "(<phi> + <psi>) . P", "<phi> . P + <psi> . P"),
        L("guard-16", "guard", "P . (<phi> + <psi>)", "P . <phi> + P . <psi>", nstd=("P",)),
        L("guard-17", "guard", "(<phi> [+$pi] <psi>) . P", "<phi> . P [+$pi] <psi> . P"),
        L("guard-18", "guard", "P . (<phi> [+$pi] <psi>)", "P . <phi> [+$pi] P . <psi>", nstd=("P",)),
        L("guard-19", "guard", "(<phi> . <psi>) . P", "<phi> . (<psi> . P)"),
        L("guard-20", "guard", "P . (<phi> . <psi>)", "(P . <phi>) . <psi>", nstd=("P",)),
        L("guard-21", "guard", "<phi>", "eps", side=_all_states("phi")),
        L("guard-22", "guard", "<phi0> . <phi1> . <phi2>", "delta", side=_some_false),
        L("guard-23", "guard", "<wp> . alpha . <phi>", "<wp> . alpha", derive=_d_wp),
        L("guard-24", "guard", "<phi> . alpha[$m] . <wpr>", "alpha[$m] . <wpr>", derive=_d_wp, keyed=True),
        L("guard-25", "guard", "<!wp> . alpha . <!phi>", "<!wp> . alpha", derive=_d_wp),
        L("guard-26", "guard", "<!phi> . alpha[$m] . <!wpr>", "alpha[$m] . <!wpr>", derive=_d_wp, keyed=True),
        L("guard-27", "guard", "delta || P", "delta"),
        L("guard-28", "guard", "P || delta", "delta"),
        L("guard-29", "guard", "eps || P", "P"),
        L("guard-30", "guard", "P || eps", "P"),
        L("guard-31", "guard", "<phi> . (P || Q)", "(<phi> . P) || (<phi> . Q)"),
        L("guard-32", "guard", "<phi> || delta", "delta"),
        L("guard-33", "guard", "delta || <phi>", "delta"),
        L("guard-34", "guard", "<phi> || eps", "<phi>"),
        L("guard-35", "guard", "eps || <phi>", "<phi>"),
        L("guard-36", "guard", "<phi> || <!phi>", "delta"),
        L("guard-37", "guard", "<phi0> || <phi1> || <phi2>", "delta", side=_some_false_joined),
        # silent steps
        L("tau-1", "tau", "P", "tau . P", "weak", "fwd"),
        L("tau-2", "tau", "P", "P . tau[$m]", "weak", "rev", nstd=("P",), keyed=True),
        L("tau-3", "tau", "alpha . tau . P", "alpha . P", "weak", "fwd"),
        L("tau-4", "tau", "P . tau[$m] . alpha[$m1]", "P . alpha[$m]", "weak", "rev", nstd=("P",), keyed=True),
        L("tau-5", "tau", "(alpha || beta) . tau . P", "(alpha || beta) . P", "weak", "fwd", side=_vector_ok),
        L("tau-6", "tau", "P . tau[$m] . (alpha[$m1] || beta[$m1])", "P . (alpha[$m] || beta[$m])",
          "weak", "rev", nstd=("P",), side=_vector_ok, keyed=True),
        L("tau-7", "tau", "P + tau . P", "tau . P", "weak", "fwd"),
        L("tau-8", "tau", "P + P . tau[$m]", "P . tau[$m]", "weak", "rev", nstd=("P",), keyed=True),
        L("tau-9", "tau", "P . ((Q + tau . (Q + R)) [+$pi] S)", "P . ((Q + R) [+$pi] S)", "weak", "fwd"),
        L("tau-10", "tau", "((Q + (Q + R) . tau) [+$pi] S) . P", "((Q + R) [+$pi] S) . P", "weak", "rev"),
        L("tau-11", "tau", "P", "tau || P", "weak", "fr"),
    ]
    return out


LAWS: tuple[Law, ...] = tuple(_catalog())
LAW_IDS = {law.id: law for law in LAWS}
EXPANSION_ID = "expansion"


# ---------------------------------------------------------------- instances

@dataclass
class Instance:
    bindings: dict
    lhs: Process
    rhs: Process
    state: str

    def describe(self) -> str:
        parts = []
        for k in sorted(self.bindings):
            v = self.bindings[k]
            if isinstance(v, Process):
                parts.append(f"{k} = {pretty(v)}")
            elif isinstance(v, Guard):
                parts.append(f"{k} = {pretty_guard(v)}")
            elif isinstance(v, Action):
                parts.append(f"{k} = {v}")
        return "; ".join(parts)


def _text_value(v) -> str:
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, (set, frozenset)):
        return ",".join(sorted(v))
    if isinstance(v, tuple):
        return ", ".join(f"{a}->{b}" for a, b in v)
    return str(v)


def draw_bindings(law: Law, cfg: GenConfig, model: StateModel, rng: random.Random) -> tuple[dict, str]:
    """Random values for every metavariable; returns them with the start state."""
    b: dict = {}
    state = model.initial.id
    key = 0
    for v in PROC_VARS:
        if v in law.nstd:
            term = gen_term(cfg, rng)
            done, state = execute(term, state, model, rng)
            done = shift_keys(done, key)
            key = max(keys_of(done), default=key)
            b[v] = done
        else:
            b[v] = gen_term(cfg, rng)
    for v in GUARD_VARS:
        b[v] = gen_guard(cfg, rng)
    b["alpha"] = gen_action(cfg, rng)
    b["beta"] = gen_action(cfg, rng)
    b["pi"], b["rho"] = rng.choice(_PROBS), rng.choice(_PROBS)
    b["pic"] = 1 - b["pi"]
    b["names"] = set(cfg.actions)
    b["L"] = frozenset(rng.sample(cfg.actions, rng.randint(1, len(cfg.actions))))
    b["K"] = frozenset(rng.sample(cfg.actions, rng.randint(1, len(cfg.actions))))
    b["f"], b["g"] = gen_relabel(cfg, rng), gen_relabel(cfg, rng)
    b["id"] = ((cfg.actions[0], cfg.actions[0]),)
    b["m"], b["m1"] = key + 1, key + 2
    b["prev"] = None
    if law.keyed:
        # keyed template actions fire from the state reached so far (or a
        # random one), and the instance starts from where they lead
        pre = model.state(state) if law.nstd else rng.choice(model.states)
        b["prev"] = pre.id
        text = law.lhs + law.rhs
        post = pre
        if "alpha[" in text:
            post = model.effect(b["alpha"], pre)
            if "beta[" in text:
                post = model.join(post, model.effect(b["beta"], pre))
        state = post.id
    return b, state


def instantiate(law: Law, b: dict, model: StateModel, state: str) -> Instance | None:
    if law.derive:
        b = {**b, **law.derive(b, model)}
    if law.side and not law.side(b, model):
        return None
    values = {k: _text_value(v) for k, v in b.items()
              if isinstance(v, (Fraction, int, set, frozenset, tuple)) and not isinstance(v, bool)}
    procs = {k: b[k] for k in PROC_VARS}
    guards = {k: b[k] for k in GUARD_VARS + ("wp", "wpr") if k in b}
    acts = {"alpha": b["alpha"], "beta": b["beta"]}
    sides = []
    for tmpl in (law.lhs, law.rhs):
        text = string.Template(tmpl).substitute(values)
        sides.append(substitute(parse_process(text, check_consts=False), procs, guards, acts, b.get("prev")))
    used = law.metavars()
    shown = {k: v for k, v in b.items() if k in used or "$" + k in used}
    return Instance(shown, sides[0], sides[1], state)


# ---------------------------------------------------------------- checking

@dataclass
class Verdict:
    law: str
    holds: bool
    trials: int = 0
    skipped: int = 0
    checks: dict = field(default_factory=dict)
    counterexample: Instance | None = None
    failed_check: str = ""

    def line(self) -> str:
        status = "holds" if self.holds else "counterexample"
        out = f"{self.law}\t{self.trials}\t{status}"
        if self.counterexample is not None:
            ce = self.counterexample
            out += (f"\t[{self.failed_check}] {pretty(ce.lhs)}  vs  {pretty(ce.rhs)}"
                    f"  @{ce.state}  ({ce.describe()})")
        return out


def _judge(inst: Instance, model: StateModel, law_strength: str, law_mode: str,
           kinds: tuple[str, ...], small: int, max_configs: int) -> tuple[str | None, list[str]]:
    """Name of the first failing check, or None; also the checks that ran."""
    try:
        a = build_plts(inst.lhs, inst.state, model, RECURSION_DEFS, max_configs=max_configs)
        b = build_plts(inst.rhs, inst.state, model, RECURSION_DEFS, max_configs=max_configs)
    except StateSpaceBoundExceeded:
        raise
    ran = []
    for kind in kinds:
        if kind != "step" and (len(a.configs) > small or len(b.configs) > small):
            continue
        if kind == "hp" and not (a.is_acyclic() and b.is_acyclic()):
            continue
        if kind == "step":
            ok = check_step_bisim(a, b, law_mode, law_strength)
        elif kind == "pomset":
            ok = check_pomset_bisim(a, b, law_mode, law_strength)
        else:
            ok = check_hp_bisim(a, b, law_mode, law_strength)
        ran.append(kind)
        if not ok:
            return kind, ran
    return None, ran


def check_law(law: Law, trials: int = 50, cfg: GenConfig | None = None, model: StateModel | None = None,
              *, seed: int | None = None, kinds: tuple[str, ...] = ("step", "pomset", "hp"),
              small: int = 10, max_configs: int = 3000, shrink: bool = True) -> Verdict:
    """Test ``law`` on ``trials`` random instances that meet its side conditions."""
    from .state import powerset_model
    cfg = cfg or GenConfig()
    rng = random.Random(cfg.seed if seed is None else seed)
    if model is None:
        model = powerset_model(list(cfg.atoms), list(cfg.actions), random.Random(rng.random()))
    verdict = Verdict(law.id, True)
    attempts = 0
    while verdict.trials < trials and attempts < trials * 40:
        attempts += 1
        b, state = draw_bindings(law, cfg, model, rng)
        inst = instantiate(law, b, model, state)
        if inst is None:
            continue
        try:
            bad, ran = _judge(inst, model, law.strength, law.mode, kinds, small, max_configs)
        except StateSpaceBoundExceeded:
            verdict.skipped += 1
            continue
        verdict.trials += 1
        for k in ran:
            verdict.checks[k] = verdict.checks.get(k, 0) + 1
        if bad is not None:
            verdict.holds = False
            verdict.failed_check = bad
            verdict.counterexample = _shrink(law, b, state, model, kinds, small, max_configs) if shrink else inst
            break
    return verdict


def _shrink(law: Law, b: dict, state: str, model: StateModel, kinds, small, max_configs) -> Instance:
    """Replace subterms of process bindings by nil while the law still fails."""
    def fails(bb: dict) -> Instance | None:
        inst = instantiate(law, bb, model, state)
        if inst is None:
            return None
        try:
            bad, _ = _judge(inst, model, law.strength, law.mode, kinds, small, max_configs)
        except CtcError:
            return None
        return inst if bad else None

    best = fails(b)
    assert best is not None
    changed = True
    while changed:
        changed = False
        for v in PROC_VARS:
            if v in law.nstd:
                continue
            for cand in _smaller(b[v]):
                trial = {**b, v: cand}
                inst = fails(trial)
                if inst is not None:
                    b, best, changed = trial, inst, True
                    break
    return best


def _smaller(p: Process):
    """Terms obtained by replacing one non-nil subterm of ``p`` with nil, biggest cut first."""
    if not isinstance(p, Nil):
        yield Nil()
    kids = children(p)
    for i, k in enumerate(kids):
        for c in _smaller(k):
            yield _with_child(p, i, c)


def _with_child(p: Process, i: int, c: Process) -> Process:
    if isinstance(p, (Seq, Sum, Par, Box)):
        return replace(p, left=c) if i == 0 else replace(p, right=c)
    return replace(p, body=c)


# ---------------------------------------------------------------- expansion

def _peel(p: Process) -> Process:
    while isinstance(p, (Restrict, Relabel)):
        p = p.body
    return p


def residual(p: Process) -> Process:
    """The standard term describing what is left of ``p`` after its past."""
    if isinstance(p, Act):
        return Test(GEps()) if p.key is not None else replace(p, mark=False)
    if isinstance(p, Seq):
        if has_past(p.right):
            return residual(p.right)
        if not has_past(p.left):
            return p
        left = residual(p.left)
        if left == Test(GEps()):
            return p.right
        return Seq(left, p.right)
    if isinstance(p, Sum):
        if has_past(p.left):
            return residual(p.left)
        if has_past(p.right):
            return residual(p.right)
        return p
    if isinstance(p, Box):
        if has_past(p.left):
            return residual(p.left)
        if has_past(p.right):
            return residual(p.right)
        return replace(p, side=None)
    if isinstance(p, Par):
        return Par(residual(p.left), residual(p.right))
    if isinstance(p, (Restrict, Relabel)):
        return replace(p, body=residual(p.body))
    if isinstance(p, Unfolded):
        return residual(p.body) if has_past(p.body) else Const(p.name)
    return p


def _sum(terms: list[Process]) -> Process:
    return reduce(Sum, terms)


def expansion_nf(p: Process, model: StateModel, state: str | None = None, *,
                 deep: bool = False, max_terms: int = 2000, defs=None) -> Process:
    """Head normal form of a parallel composition as a sum of prefixed continuations.

    Each summand is one step of ``p`` at ``state``: the step's (mapped)
    labels as a vector prefix followed by what remains of the composition.
    A synchronisation contributes a ``tau`` summand.  ``eps`` is added when
    ``p`` is successfully terminated, and the empty sum is ``nil``.  Terms
    with past events get the reverse form: the term before the last step
    followed by that step's keyed vector.  With ``deep`` the continuations
    are normalised too.
    """
    if not isinstance(_peel(p), Par):
        raise ShapeError("expected a parallel composition under restrictions and relabellings")
    sem = Semantics(model, dict(defs or RECURSION_DEFS))
    s = state or model.initial.id
    budget = [max_terms]
    if has_past(p):
        return _reverse_nf(p, s, sem)
    return _forward_nf(p, s, sem, deep, budget)


def _forward_nf(p: Process, s: str, sem: Semantics, deep: bool, budget: list[int]) -> Process:
    budget[0] -= 1
    if budget[0] < 0:
        raise BoundExceeded("normal form grew past the term bound")
    dist = sem.resolve(p, s)
    if len(dist) != 1:
        raise ShapeError("the normal form covers compositions without probabilistic choice only")
    q = dist[0][1]
    found = []
    for i, st in enumerate(sem.steps(q, s)):
        target, _ = sem.fire(q, s, st)
        cont = residual(target)
        if deep:
            cont = _forward_nf(cont, st.state, sem, deep, budget)
        labels = tuple(lbl for lbl, _ in st.events)
        found.append((-len(labels), i, Seq(Act(labels), cont)))
    terms = [t for _, _, t in sorted(found, key=lambda x: x[:2])]
    if sem.done(p, s):
        terms.append(Test(GEps()))
    return _sum(terms) if terms else Nil()


def _reverse_nf(p: Process, s: str, sem: Semantics) -> Process:
    c = sem.classify(p, s)
    terms = []
    for lbl, prev in sem.reverse_steps(c):
        key = lbl[0][1]
        acts = tuple(a for a, _ in lbl)
        terms.append(Seq(prev.process, Act(acts, key=key, prev=prev.state, tags=tuple(range(len(acts))))))
    return _sum(terms) if terms else p


def gen_parallel(rng: random.Random, components: int = 3, actions: int = 2,
                 names: tuple[str, ...] = ("a", "b")) -> Process:
    """A composition of small sequential components, optionally restricted."""
    parts = []
    for _ in range(components):
        body: Process = Nil()
        for _ in range(rng.randint(1, actions)):
            a = Action(rng.choice(names), rng.random() < 0.4)
            body = Seq(Act((a,)), body) if rng.random() < 0.7 else Sum(Seq(Act((a,)), Nil()), body)
        if rng.random() < 0.2:
            body = Relabel(body, relabel_fn({rng.choice(names): rng.choice(names)}))
        parts.append(body)
    p = reduce(Par, parts)
    if rng.random() < 0.3:
        p = Restrict(p, frozenset({rng.choice(names)}))
    return p


def check_expansion(trials: int = 100, seed: int = 0, model: StateModel | None = None) -> Verdict:
    """Soundness of the normal form against the step semantics."""
    from .state import trivial_model
    model = model or trivial_model()
    rng = random.Random(seed)
    verdict = Verdict(EXPANSION_ID, True)
    for _ in range(trials):
        p = gen_parallel(rng, rng.randint(2, 3))
        nf = expansion_nf(p, model)
        a = build_plts(p, model.initial, model, RECURSION_DEFS)
        b = build_plts(nf, model.initial, model, RECURSION_DEFS)
        verdict.trials += 1
        if not check_step_bisim(a, b, "fr", "strong"):
            verdict.holds = False
            verdict.failed_check = "step"
            verdict.counterexample = Instance({"P": p}, p, nf, model.initial.id)
            break
    verdict.checks["step"] = verdict.trials
    return verdict


def run_all(trials: int = 50, cfg: GenConfig | None = None, model: StateModel | None = None,
            seed: int | None = None, ids: list[str] | None = None, **kw) -> list[Verdict]:
    out = []
    for law in LAWS:
        if ids is None or law.id in ids:
            out.append(check_law(law, trials, cfg, model, seed=seed, **kw))
    if ids is None or EXPANSION_ID in ids:
        out.append(check_expansion(trials, 0 if seed is None else seed))
    return out
