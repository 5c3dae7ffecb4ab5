"""Shared generators and property checks for the test modules."""
import random
from fractions import Fraction

from ctc.laws import GenConfig, execute, gen_term
from ctc.semantics import Semantics, StateSpaceBoundExceeded, build_plts
from ctc.state import load_model, powerset_model, trivial_model
from ctc.syntax import parse_process, strip_marks

TWO_STATE = """\
atoms: p
state s0:
state s1: p
effect a s0 -> s1
effect a s1 -> s1
effect b s0 -> s0
effect b s1 -> s0
"""


def two_state_model():
    return load_model(TWO_STATE)


def plts(text, model=None, **kw):
    model = model or trivial_model()
    return build_plts(parse_process(text), model.initial, model, **kw)


def small_pool(seed, size, max_configs=8, depth=3):
    """Random generated terms whose transition systems stay tiny."""
    rng = random.Random(seed)
    cfg = GenConfig(max_depth=depth, actions=("a", "b"), atoms=("p",))
    model = powerset_model(["p"], ["a", "b"], random.Random(seed + 1))
    pool = []
    while len(pool) < size:
        p = gen_term(cfg, rng)
        try:
            pool.append((p, build_plts(p, model.initial, model, max_configs=max_configs)))
        except StateSpaceBoundExceeded:
            continue
    return model, pool


def random_pairs(seed, count, limit=12, pool_size=300):
    """Pairs of tiny systems, about a third of them built from one term twice."""
    rng = random.Random(seed)
    _, pool = small_pool(seed, pool_size)
    out = []
    while len(out) < count:
        (p, a), (q, b) = rng.sample(pool, 2)
        if rng.random() < 0.3:
            q, b = p, a
        if len(a) + len(b) <= limit:
            out.append((p, a, q, b))
    return out


def _acts(label):
    return sorted(x[0] if isinstance(x, tuple) else x for x in label)


def loop_violations(lts):
    """Forward edges without the undoing reverse edge, and reverse edges without their forward edge.

    A forward edge leaves a resolved configuration; undoing it must land on
    the unresolved configuration that resolution came from, with the same
    term (marks aside) and the same data state.
    """
    bad = []
    for i, edges in lts.fwd.items():
        src = lts.parent(i)
        for lbl, j in edges:
            back = [k for l2, k in lts.rev.get(j, []) if k == src and _acts(l2) == _acts(lbl)]
            c, b = lts.configs[i], lts.configs[src] if src is not None else None
            if not back or b is None or b.process != strip_marks(c.process) or b.state != c.state:
                bad.append(("fwd", i, j))
    for j, edges in lts.rev.items():
        for lbl, k in edges:
            ok = any(lts.parent(i) == k and any(t == j and _acts(l1) == _acts(lbl) for l1, t in lts.fwd[i])
                     for i in lts.fwd)
            if not ok:
                bad.append(("rev", j, k))
    return bad


def standard_terms(seed, count, depth=3):
    rng = random.Random(seed)
    cfg = GenConfig(max_depth=depth)
    model = powerset_model(list(cfg.atoms), list(cfg.actions), random.Random(seed))
    out = []
    while len(out) < count:
        p = gen_term(cfg, rng)
        try:
            out.append((p, build_plts(p, model.initial, model, max_configs=400)))
        except StateSpaceBoundExceeded:
            continue
    return model, out


def random_configs(seed, count, depth=4):
    """Unresolved configurations reached by running random terms part of the way."""
    rng = random.Random(seed)
    cfg = GenConfig(max_depth=depth)
    model = powerset_model(list(cfg.atoms), list(cfg.actions), random.Random(seed))
    sem = Semantics(model)
    out = []
    while len(out) < count:
        p = gen_term(cfg, rng)
        q, s = execute(p, model.initial.id, model, rng, max_steps=rng.randint(0, 3))
        c = sem.classify(q, s)
        if c.phase == "u":
            out.append(c)
    return sem, out


def distribution_errors(sem, configs):
    bad = []
    for c in configs:
        dist = sem.prob_resolve(c)
        total = sum((w for w, _ in dist), Fraction(0))
        if total != 1 or any(not isinstance(w, Fraction) or w <= 0 for w, _ in dist):
            bad.append(c)
    return bad
