"""Equivalence checking on finite PLTSs.

Checking runs on a two-sorted graph.  Every unresolved configuration is a
``U`` node carrying its resolution distribution and its reverse edges;
every resolved configuration is an ``R`` node carrying its forward steps
and its √ flag.  An idle configuration is both: a ``U`` node with a Dirac
distribution onto its own ``R`` node.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

from .semantics import PLTS
from .syntax import Action, CtcError, TAU_ACTION, strip_marks

MODES = ("fwd", "rev", "fr")
STRENGTHS = ("strong", "weak")
TAU_STEP = (TAU_ACTION,)


class IncompatibleModels(CtcError):
    pass


class BoundExceeded(CtcError):
    pass


class TooLarge(CtcError):
    pass


class UnstablePartition(CtcError):
    pass


Node = tuple[int, str, int]  # (side, role, config index)


@dataclass
class Graph:
    """Disjoint union of PLTSs as U/R nodes."""
    nodes: list[Node]
    ids: dict[Node, int]
    mu: list[list[tuple[Fraction, int]]]
    fwd: list[list[tuple[tuple, int]]]
    rev: list[list[tuple[tuple, int]]]
    done: list[bool]
    is_u: list[bool]
    roots: list[int]
    plts: list[PLTS]

    @classmethod
    def of(cls, systems: Iterable[PLTS]) -> "Graph":
        systems = list(systems)
        fps = {p.sem.model.fingerprint() for p in systems}
        if len(fps) > 1:
            raise IncompatibleModels("systems were built over different state models")
        nodes: list[Node] = []
        for side, lts in enumerate(systems):
            for i, c in enumerate(lts.configs):
                if c.phase in ("u", "i"):
                    nodes.append((side, "U", i))
                if c.phase in ("r", "i"):
                    nodes.append((side, "R", i))
        ids = {n: k for k, n in enumerate(nodes)}
        mu: list[list[tuple[Fraction, int]]] = []
        fwd: list[list[tuple[tuple, int]]] = []
        rev: list[list[tuple[tuple, int]]] = []
        done: list[bool] = []
        is_u: list[bool] = []
        for side, role, i in nodes:
            lts = systems[side]
            c = lts.configs[i]
            if role == "U":
                if c.phase == "i":
                    mu.append([(Fraction(1), ids[(side, "R", i)])])
                else:
                    mu.append([(w, ids[(side, "R", j)]) for w, j in lts.prob.get(i, [])])
                rev.append([(tuple(sorted(a for a, _ in lbl)), ids[(side, "U", j)]) for lbl, j in lts.rev.get(i, [])])
                fwd.append([])
                done.append(False)
                is_u.append(True)
            else:
                mu.append([])
                rev.append([])
                fwd.append([(lbl, ids[(side, "U", j)]) for lbl, j in lts.fwd.get(i, [])])
                done.append(bool(lts.done.get(i)))
                is_u.append(False)
        roots = [ids[(side, "U", lts.roots[0])] for side, lts in enumerate(systems)]
        return cls(nodes, ids, mu, fwd, rev, done, is_u, roots, systems)

    def __len__(self) -> int:
        return len(self.nodes)

    def dirac(self, u: int) -> int | None:
        m = self.mu[u]
        return m[0][1] if len(m) == 1 else None

    def parent_u(self, r: int) -> int | None:
        """U node whose distribution is the Dirac on ``r``, if any."""
        side, _, i = self.nodes[r]
        lts = self.plts[side]
        c = lts.configs[i]
        if c.phase == "i":
            return self.ids[(side, "U", i)]
        k = lts.index.get((strip_marks(c.process), c.state, "u"))
        if k is None:
            return None
        u = self.ids[(side, "U", k)]
        return u if self.dirac(u) == r else None


# ---------------------------------------------------------------- weak moves

def _silent(lbl: tuple) -> bool:
    return all(a.is_tau for a in lbl)


def _dirac_blocks(g: Graph, strong: list[int]) -> list[list[int] | None]:
    """Per U node, its resolutions when they all sit in one strong class, else None.

    Internal paths may pass such resolutions; a genuine probabilistic
    choice (mass split over classes) is never absorbed.
    """
    out: list[list[int] | None] = []
    for u in range(len(g)):
        if not g.is_u[u]:
            out.append(None)
            continue
        targets = [t for _, t in g.mu[u]]
        out.append(targets if len({strong[t] for t in targets}) == 1 else None)
    return out


def _stays(g: Graph, dirac):
    """Close a node set under 'r was already reached at u', for U nodes u whose
    resolutions include r and all sit in one strong class."""
    up: dict[int, set[int]] = {}
    for u, rs in enumerate(dirac):
        for r in rs or ():
            up.setdefault(r, set()).add(u)

    def close(xs) -> set[int]:
        out = set(xs)
        for x in xs:
            out |= up.get(x, set())
        return out
    return close


@dataclass
class WeakView:
    """τ-saturated moves.

    ``fwd`` of an R node holds (visible step, U node) pairs reachable as
    τ* X τ*, plus (τ, node) for every node reachable silently, the node
    itself included; ``rev`` is the reverse analogue on U nodes.  Visible
    moves end on U nodes, as strong steps do.
    """
    fwd: list[set[tuple[tuple, int]]]
    rev: list[set[tuple[tuple, int]]]
    done: list[bool]
    mu: list[list[tuple[Fraction, int]]]

    @classmethod
    def of(cls, g: Graph, strong: list[int]) -> "WeakView":
        n = len(g)
        dirac = _dirac_blocks(g, strong)
        stay = _stays(g, dirac)
        memo: dict[int, tuple[set[int], set[int]]] = {}

        def closure(r: int) -> tuple[set[int], set[int]]:
            """R and U nodes reachable from R node ``r`` by silent steps."""
            if r in memo:
                return memo[r]
            rs, us = {r}, set()
            todo = [r]
            while todo:
                x = todo.pop()
                for lbl, u in g.fwd[x]:
                    if _silent(lbl) and u not in us:
                        us.add(u)
                        for d in dirac[u] or ():
                            if d not in rs:
                                rs.add(d)
                                todo.append(d)
            memo[r] = (rs, us)
            return rs, us

        def after(u: int) -> tuple[set[int], set[int]]:
            rs, us = set(), {u}
            for d in dirac[u] or ():
                r2, u2 = closure(d)
                rs |= r2
                us |= u2
            return rs, us

        fwd: list[set[tuple[tuple, int]]] = [set() for _ in range(n)]
        done = [False] * n
        for r in range(n):
            if g.is_u[r]:
                continue
            rs, us = closure(r)
            done[r] = any(g.done[x] for x in rs)
            fwd[r].update((TAU_STEP, x) for x in stay(rs | us))
            for x in rs:
                for lbl, u in g.fwd[x]:
                    if _silent(lbl):
                        continue
                    vis = tuple(a for a in lbl if not a.is_tau)
                    r2, u2 = after(u)
                    fwd[r].update((vis, y) for y in stay(r2 | u2) if g.is_u[y])

        def rclos(u: int) -> set[int]:
            return _reach(u, lambda x: [y for lbl, y in g.rev[x] if _silent(lbl)])

        rev: list[set[tuple[tuple, int]]] = [set() for _ in range(n)]
        mu: list[list[tuple[Fraction, int]]] = [[] for _ in range(n)]
        for u in range(n):
            if not g.is_u[u]:
                continue
            before = rclos(u)
            rev[u].update((TAU_STEP, x) for x in before)
            for x in before:
                for lbl, y in g.rev[x]:
                    if _silent(lbl):
                        continue
                    vis = tuple(a for a in lbl if not a.is_tau)
                    rev[u].update((vis, z) for z in rclos(y))
            mu[u] = g.mu[_inert_end(g, u, dirac, strong)]
        return cls(fwd, rev, done, mu)


def _inert_end(g: Graph, u: int, dirac, strong: list[int]) -> int:
    """Follow resolutions whose only option is one silent step into one class."""
    seen = {u}
    while True:
        rs = dirac[u]
        if not rs:
            return u
        targets = set()
        for r in rs:
            if g.done[r] or len(g.fwd[r]) != 1 or not _silent(g.fwd[r][0][0]):
                return u
            targets.add(g.fwd[r][0][1])
        if len({strong[t] for t in targets}) != 1:
            return u
        nxt = min(targets)
        if nxt in seen:
            return u
        seen.add(nxt)
        u = nxt


# ---------------------------------------------------------------- refinement

def _refine(n: int, initial: list, signature) -> list[int]:
    """Signature-based partition refinement; returns block ids, numbered by first member."""
    block = _renumber(initial)
    while True:
        sigs = [(block[i], signature(i, block)) for i in range(n)]
        new = _renumber(sigs)
        if max(new, default=-1) == max(block, default=-1):
            return new
        block = new


def _renumber(keys: list) -> list[int]:
    seen: dict = {}
    out = []
    for k in keys:
        if k not in seen:
            seen[k] = len(seen)
        out.append(seen[k])
    return out


def _mu_sig(dist: list[tuple[Fraction, int]], block: list[int]) -> tuple:
    acc: dict[int, Fraction] = {}
    for w, t in dist:
        acc[block[t]] = acc.get(block[t], Fraction(0)) + w
    return tuple(sorted(acc.items()))


@dataclass
class Result:
    equivalent: bool
    blocks: list[list[Node]]

    def __bool__(self) -> bool:
        return self.equivalent


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise CtcError(f"mode must be one of {MODES}")


def _moves(g: Graph, strength: str, mode: str):
    fwd = [set(es) for es in g.fwd]
    rev = [set(es) for es in g.rev]
    if strength == "strong":
        return fwd, rev, g.done, g.mu
    if strength != "weak":
        raise CtcError(f"strength must be one of {STRENGTHS}")
    strong = _partition(g, mode, fwd, rev, g.done, g.mu)
    w = WeakView.of(g, strong)
    return w.fwd, w.rev, w.done, w.mu


def _partition(g: Graph, mode: str, fwd, rev, done, mu) -> list[int]:
    _check_mode(mode)
    use_f = mode in ("fwd", "fr")
    use_r = mode in ("rev", "fr")

    def sig(i: int, block: list[int]):
        if g.is_u[i]:
            r = frozenset((lbl, block[t]) for lbl, t in rev[i]) if use_r else None
            return ("U", r, _mu_sig(mu[i], block))
        f = frozenset((lbl, block[t]) for lbl, t in fwd[i]) if use_f else None
        return ("R", done[i], f)

    initial = [("U",) if g.is_u[i] else ("R", done[i]) for i in range(len(g))]
    return _refine(len(g), initial, sig)


def _result(g: Graph, block: list[int]) -> Result:
    groups: dict[int, list[Node]] = {}
    for i, b in enumerate(block):
        groups.setdefault(b, []).append(g.nodes[i])
    return Result(block[g.roots[0]] == block[g.roots[1]], [groups[k] for k in sorted(groups)])


def check_step_bisim(a: PLTS, b: PLTS, mode: str = "fr", strength: str = "strong") -> Result:
    """Step bisimulation by partition refinement; the witness is the stable partition."""
    g = Graph.of([a, b])
    fwd, rev, done, mu = _moves(g, strength, mode)
    return _result(g, _partition(g, mode, fwd, rev, done, mu))


def step_partition(lts: PLTS, mode: str = "fr", strength: str = "strong") -> tuple[Graph, list[int]]:
    g = Graph.of([lts])
    fwd, rev, done, mu = _moves(g, strength, mode)
    return g, _partition(g, mode, fwd, rev, done, mu)


# ---------------------------------------------------------------- pomset

def _sequences(g: Graph, fwd, rev, max_seq: int, weak: bool = False):
    """Labels enriched to runs of up to ``max_seq`` consecutive steps.

    Events of a later step are ordered after every event of an earlier
    one, so a run's label is the tuple of its steps; intermediate
    resolutions may be any resolution of the intermediate configuration.
    Weak runs never continue with a silent move, which the visible moves
    already absorb.
    """
    n = len(g)
    fseq: list[set[tuple[tuple, int]]] = [set() for _ in range(n)]
    rseq: list[set[tuple[tuple, int]]] = [set() for _ in range(n)]
    for i in range(n):
        if g.is_u[i]:
            frontier = {((), i)}
            for _ in range(max_seq):
                nxt = set()
                for lbl, u in frontier:
                    for x, v in rev[u]:
                        if not (weak and lbl and _silent(x)):
                            nxt.add((lbl + (x,), v))
                rseq[i] |= nxt
                frontier = nxt
        else:
            frontier = {((), i)}
            for depth in range(max_seq):
                nxt = set()
                for lbl, r in frontier:
                    for x, u in fwd[r]:
                        if not (weak and lbl and _silent(x)):
                            nxt.add((lbl + (x,), u))
                fseq[i] |= nxt
                frontier = set()
                for lbl, u in nxt:
                    for _, r2 in g.mu[u]:
                        frontier.add((lbl, r2))
    return fseq, rseq


def check_pomset_bisim(a: PLTS, b: PLTS, mode: str = "fr", strength: str = "strong", max_seq: int = 2) -> Result:
    if max_seq < 1:
        raise CtcError("maxSeq must be at least 1")
    g = Graph.of([a, b])
    fwd, rev, done, mu = _moves(g, strength, mode)
    fseq, rseq = _sequences(g, fwd, rev, max_seq, strength == "weak")
    return _result(g, _partition(g, mode, fseq, rseq, done, mu))


# ---------------------------------------------------------------- history preserving

Event = tuple[int, int]


def _histories(g: Graph, strength: str):
    """Per node: event labels and causal order (τ events dropped in weak mode)."""
    out = []
    for side, _, i in g.nodes:
        lts = g.plts[side]
        labels, order = lts.sem.history(lts.configs[i].process)
        if strength == "weak":
            keep = {e for e, l in labels.items() if not l.is_tau}
            labels = {e: labels[e] for e in keep}
            order = {(x, y) for x, y in _closure(order) if x in keep and y in keep}
        else:
            order = _closure(order)
        out.append((labels, frozenset(order)))
    return out


def _closure(order: set) -> set:
    order = set(order)
    changed = True
    while changed:
        changed = False
        for x, y in list(order):
            for y2, z in list(order):
                if y == y2 and (x, z) not in order:
                    order.add((x, z))
                    changed = True
    return order


def _is_iso(f: dict, h1, h2) -> bool:
    l1, o1 = h1
    l2, o2 = h2
    if set(f) != set(l1) or set(f.values()) != set(l2):
        return False
    if any(l1[e] != l2[f[e]] for e in f):
        return False
    return all(((f[x], f[y]) in o2) == ((x, y) in o1) for x in f for y in f if x != y)


def _extensions(f: dict, h1, h2):
    """All isomorphisms between the histories that extend ``f``."""
    new1 = sorted(set(h1[0]) - set(f))
    new2 = sorted(set(h2[0]) - set(f.values()))
    if len(new1) != len(new2):
        return
    for perm in itertools.permutations(new2):
        g = dict(f)
        g.update(zip(new1, perm))
        if _is_iso(g, h1, h2):
            yield g


def _restrict(f: dict, h1, h2) -> dict | None:
    g = {e: v for e, v in f.items() if e in h1[0]}
    if set(g.values()) != set(h2[0]):
        return None
    return g


def _key(f: dict) -> frozenset:
    return frozenset(f.items())


def check_hp_bisim(a: PLTS, b: PLTS, mode: str = "fr", strength: str = "strong", hereditary: bool = False,
                   max_triples: int = 200000) -> Result:
    """History-preserving bisimulation by explicit search over posetal triples.

    The hereditary variant additionally requires the relation to be closed
    under undoing the most recent step, whatever the mode.
    """
    _check_mode(mode)
    for lts in (a, b):
        if not lts.is_acyclic():
            raise CtcError("history-preserving checks are refused on cyclic systems")
    g = Graph.of([a, b])
    fwd, rev, done, mu = _moves(g, strength, mode)
    hist = _histories(g, strength)
    use_f = mode in ("fwd", "fr")
    use_r = mode in ("rev", "fr") or hereditary

    triples: dict[tuple[int, int, frozenset], dict] = {}
    succ: dict[tuple, list] = {}
    r1, r2 = g.roots
    # roots that already carry past events start from every matching of their histories
    starts = [(r1, r2, _key(f0)) for f0 in _extensions({}, hist[r1], hist[r2])]
    todo = list(starts)
    for k in starts:
        triples[k] = dict(k[2])
    while todo:
        t = todo.pop()
        n1, n2, _ = t
        f = triples[t]
        entries: list = []
        if g.is_u[n1]:
            pairs = [(r1, r2) for _, r1 in mu[n1] for _, r2 in mu[n2]]
            entries.append(("mu", [(r1, r2, f) for r1, r2 in pairs]))
            if use_r:
                for side, (src, dst) in enumerate(((n1, n2), (n2, n1))):
                    for lbl, x in rev[src]:
                        opts = []
                        for lbl2, y in rev[dst]:
                            if lbl2 != lbl:
                                continue
                            hx, hy = (hist[x], hist[y]) if side == 0 else (hist[y], hist[x])
                            g2 = _restrict(f, hx, hy)
                            if g2 is not None and _is_iso(g2, hx, hy):
                                opts.append((x, y, g2) if side == 0 else (y, x, g2))
                        entries.append(("any", opts))
        else:
            if use_f:
                for side, (src, dst) in enumerate(((n1, n2), (n2, n1))):
                    for lbl, x in fwd[src]:
                        opts = []
                        for lbl2, y in fwd[dst]:
                            if lbl2 != lbl:
                                continue
                            hx, hy = (hist[x], hist[y]) if side == 0 else (hist[y], hist[x])
                            for g2 in _extensions(f, hx, hy):
                                opts.append((x, y, g2) if side == 0 else (y, x, g2))
                        entries.append(("any", opts))
        keyed = []
        for kind, opts in entries:
            ks = []
            for x, y, g2 in opts:
                k = (x, y, _key(g2))
                if k not in triples:
                    if len(triples) >= max_triples:
                        raise BoundExceeded(f"more than {max_triples} posetal triples")
                    triples[k] = g2
                    todo.append(k)
                ks.append(k)
            keyed.append((kind, ks))
        succ[t] = keyed

    alive = set(triples)
    changed = True
    while changed:
        changed = False
        for t in list(alive):
            if not _triple_ok(t, succ[t], alive, g, done, mu):
                alive.discard(t)
                changed = True
    blocks = [[g.nodes[x], g.nodes[y]] for x, y, _ in sorted(alive, key=lambda k: (k[0], k[1]))]
    return Result(any(k in alive for k in starts), blocks)


def _triple_ok(t, entries, alive, g: Graph, done, mu) -> bool:
    n1, n2, _ = t
    if g.is_u[n1] != g.is_u[n2]:
        return False
    if not g.is_u[n1] and done[n1] != done[n2]:
        return False
    for kind, ks in entries:
        if kind == "any":
            if not any(k in alive for k in ks):
                return False
        else:
            live = [k for k in ks if k in alive]
            if not _mu_matches(mu[n1], mu[n2], [(x, y) for x, y, _ in live]):
                return False
    return True


def _mu_matches(d1, d2, pairs) -> bool:
    """Distributions agree on every class of the equivalence generated by ``pairs``."""
    parent: dict = {}

    def find(x):
        while parent.setdefault(x, x) != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for x, y in pairs:
        parent[find(("a", x))] = find(("b", y))
    acc: dict = {}
    for w, x in d1:
        k = find(("a", x))
        acc[k] = acc.get(k, 0) + w
    for w, y in d2:
        k = find(("b", y))
        acc[k] = acc.get(k, 0) - w
    return all(v == 0 for v in acc.values())


# ---------------------------------------------------------------- brute force

DEFINITIONS = tuple(f"{kind}-{mode}-{strength}" for kind in ("step", "pomset", "hp", "hhp")
                    for mode in MODES for strength in STRENGTHS)


def brute_oracle(a: PLTS, b: PLTS, definition: str, max_configs: int = 12, max_seq: int = 2) -> bool:
    """Exhaustive greatest-fixpoint check used as a test reference.

    Starts from every same-sort pair of nodes (or every posetal triple) and
    discards pairs that break a transfer condition until nothing changes.
    Weak moves are enumerated path by path rather than by closure.
    """
    if len(a) + len(b) > max_configs:
        raise TooLarge(f"{len(a) + len(b)} configurations exceed {max_configs}")
    kind, mode, strength = definition.split("-")
    if kind not in ("step", "pomset", "hp", "hhp") or mode not in MODES or strength not in STRENGTHS:
        raise CtcError(f"unknown definition {definition}")
    g = Graph.of([a, b])
    fwd, rev, done, mu = _brute_moves(g, strength, mode)
    if kind == "pomset":
        fwd, rev = _brute_sequences(g, fwd, rev, max_seq, strength == "weak")
    if kind in ("hp", "hhp"):
        return _brute_hp(g, fwd, rev, done, mu, mode, strength, kind == "hhp")
    rel = _brute_rel(g, fwd, rev, done, mu, mode)
    return (g.roots[0], g.roots[1]) in rel


def _brute_rel(g: Graph, fwd, rev, done, mu, mode: str) -> set[tuple[int, int]]:
    use_f = mode in ("fwd", "fr")
    use_r = mode in ("rev", "fr")
    n = len(g)
    rel = {(x, y) for x in range(n) for y in range(n) if g.is_u[x] == g.is_u[y]}
    while True:
        classes = _classes(n, rel)
        bad = set()
        for x, y in rel:
            if g.is_u[x]:
                if _dist(mu[x], classes) != _dist(mu[y], classes):
                    bad.add((x, y))
                elif use_r and not (_simulates(rev[x], rev[y], rel) and _simulates(rev[y], rev[x], rel)):
                    bad.add((x, y))
            else:
                if done[x] != done[y]:
                    bad.add((x, y))
                elif use_f and not (_simulates(fwd[x], fwd[y], rel) and _simulates(fwd[y], fwd[x], rel)):
                    bad.add((x, y))
        if not bad:
            return rel
        rel -= bad


def _simulates(moves_x, moves_y, rel) -> bool:
    return all(any(l2 == l1 and (t1, t2) in rel for l2, t2 in moves_y) for l1, t1 in moves_x)


def _classes(n: int, rel) -> list[int]:
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for x, y in rel:
        parent[find(x)] = find(y)
    return [find(x) for x in range(n)]


def _dist(d, classes) -> dict:
    acc: dict = {}
    for w, t in d:
        acc[classes[t]] = acc.get(classes[t], 0) + w
    return acc


def _brute_moves(g: Graph, strength: str, mode: str):
    n = len(g)
    fwd0, rev0 = [list(x) for x in g.fwd], [list(x) for x in g.rev]
    if strength == "strong":
        return fwd0, rev0, list(g.done), list(g.mu)
    strong = _classes(n, _brute_rel(g, fwd0, rev0, g.done, g.mu, mode))

    def one_class(u: int) -> bool:
        return len({strong[t] for _, t in g.mu[u]}) == 1

    stay = _stays(g, [[t for _, t in g.mu[u]] if g.is_u[u] and one_class(u) else None
                      for u in range(n)])

    def silent_from(r: int):
        """Every node on a silent path from R node r, found by depth-first path enumeration."""
        found = {r}
        stack = [(r, (r,))]
        while stack:
            x, path = stack.pop()
            for lbl, u in g.fwd[x]:
                if not _silent(lbl):
                    continue
                found.add(u)
                if one_class(u):
                    for _, d in g.mu[u]:
                        found.add(d)
                        if d not in path:
                            stack.append((d, path + (d,)))
        return found

    fwd = [[] for _ in range(n)]
    done = [False] * n
    for r in range(n):
        if g.is_u[r]:
            continue
        reach = silent_from(r)
        rs = [x for x in reach if not g.is_u[x]]
        done[r] = any(g.done[x] for x in rs)
        moves = {(TAU_STEP, x) for x in stay(reach)}
        for x in rs:
            for lbl, u in g.fwd[x]:
                if _silent(lbl):
                    continue
                vis = tuple(a for a in lbl if not a.is_tau)
                moves.add((vis, u))
                if one_class(u):
                    for _, d in g.mu[u]:
                        moves.update((vis, y) for y in stay(silent_from(d)) if g.is_u[y])
        fwd[r] = sorted(moves, key=repr)
    rev = [[] for _ in range(n)]
    mu = [[] for _ in range(n)]
    back = lambda x: [y for l, y in g.rev[x] if _silent(l)]
    for u in range(n):
        if not g.is_u[u]:
            continue
        before = _reach(u, back)
        moves = {(TAU_STEP, x) for x in before}
        for x in before:
            for lbl, y in g.rev[x]:
                if _silent(lbl):
                    continue
                vis = tuple(a for a in lbl if not a.is_tau)
                moves.update((vis, z) for z in _reach(y, back))
        rev[u] = sorted(moves, key=repr)
        end = u
        seen = {u}
        while one_class(end):
            rs = [t for _, t in g.mu[end]]
            if any(g.done[r] or len(g.fwd[r]) != 1 or not _silent(g.fwd[r][0][0]) for r in rs):
                break
            targets = {g.fwd[r][0][1] for r in rs}
            if len({strong[t] for t in targets}) != 1 or min(targets) in seen:
                break
            end = min(targets)
            seen.add(end)
        mu[u] = g.mu[end]
    return fwd, rev, done, mu


def _reach(start: int, nxt) -> set[int]:
    seen = {start}
    stack = [start]
    while stack:
        x = stack.pop()
        for y in nxt(x):
            if y not in seen:
                seen.add(y)
                stack.append(y)
    return seen


def _brute_sequences(g: Graph, fwd, rev, max_seq: int, weak: bool = False):
    n = len(g)
    fs = [[] for _ in range(n)]
    rs = [[] for _ in range(n)]

    def run_f(r: int, prefix: tuple, depth: int, out: list):
        for lbl, u in fwd[r]:
            if weak and prefix and _silent(lbl):
                continue
            out.append((prefix + (lbl,), u))
            if depth + 1 < max_seq:
                for _, r2 in g.mu[u]:
                    run_f(r2, prefix + (lbl,), depth + 1, out)

    def run_r(u: int, prefix: tuple, depth: int, out: list):
        for lbl, v in rev[u]:
            if weak and prefix and _silent(lbl):
                continue
            out.append((prefix + (lbl,), v))
            if depth + 1 < max_seq:
                run_r(v, prefix + (lbl,), depth + 1, out)

    for i in range(n):
        out: list = []
        if g.is_u[i]:
            run_r(i, (), 0, out)
            rs[i] = sorted(set(out), key=repr)
        else:
            run_f(i, (), 0, out)
            fs[i] = sorted(set(out), key=repr)
    return fs, rs


def _brute_hp(g: Graph, fwd, rev, done, mu, mode: str, strength: str, hereditary: bool) -> bool:
    for lts in g.plts:
        if not lts.is_acyclic():
            raise CtcError("history-preserving checks are refused on cyclic systems")
    hist = _histories(g, strength)
    use_f = mode in ("fwd", "fr")
    use_r = mode in ("rev", "fr") or hereditary
    n = len(g)
    rel: set = set()
    for x in range(n):
        for y in range(n):
            if g.is_u[x] != g.is_u[y]:
                continue
            for f in _extensions({}, hist[x], hist[y]):
                rel.add((x, y, _key(f)))
    while True:
        bad = set()
        for t in rel:
            x, y, fk = t
            f = dict(fk)
            if g.is_u[x]:
                pairs = [(r1, r2) for (r1, r2, k) in rel if k == fk and not g.is_u[r1]]
                if not _mu_matches(mu[x], mu[y], pairs):
                    bad.add(t)
                    continue
                if use_r and not _hp_rev_ok(x, y, f, rev, hist, rel):
                    bad.add(t)
            else:
                if done[x] != done[y]:
                    bad.add(t)
                    continue
                if use_f and not _hp_fwd_ok(x, y, f, fwd, hist, rel):
                    bad.add(t)
        if not bad:
            break
        rel -= bad
    r1, r2 = g.roots
    return any(x == r1 and y == r2 for x, y, _ in rel)


def _hp_fwd_ok(x, y, f, fwd, hist, rel) -> bool:
    for a, b, inv in ((x, y, False), (y, x, True)):
        fa = {v: k for k, v in f.items()} if inv else f
        for lbl, t in fwd[a]:
            ok = False
            for lbl2, t2 in fwd[b]:
                if lbl2 != lbl:
                    continue
                for g2 in _extensions(fa, hist[t], hist[t2]):
                    trip = (t2, t, _key({v: k for k, v in g2.items()})) if inv else (t, t2, _key(g2))
                    if trip in rel:
                        ok = True
                        break
                if ok:
                    break
            if not ok:
                return False
    return True


def _hp_rev_ok(x, y, f, rev, hist, rel) -> bool:
    for a, b, inv in ((x, y, False), (y, x, True)):
        fa = {v: k for k, v in f.items()} if inv else f
        for lbl, t in rev[a]:
            ok = False
            for lbl2, t2 in rev[b]:
                if lbl2 != lbl:
                    continue
                g2 = _restrict(fa, hist[t], hist[t2])
                if g2 is None or not _is_iso(g2, hist[t], hist[t2]):
                    continue
                trip = (t2, t, _key({v: k for k, v in g2.items()})) if inv else (t, t2, _key(g2))
                if trip in rel:
                    ok = True
                    break
            if not ok:
                return False
    return True


# ---------------------------------------------------------------- quotient

def quotient(lts: PLTS, witness: list[int] | None = None, mode: str = "fr", strength: str = "strong") -> "Quotient":
    """Minimised system: one node per block of a stable strong partition."""
    g, block = step_partition(lts, mode, strength)
    if witness is not None:
        if len(witness) != len(block):
            raise UnstablePartition("witness does not cover the system")
        fwd, rev, done, mu = _moves(g, strength, mode)
        again = _partition_from(g, mode, fwd, rev, done, mu, witness)
        if max(again) != max(_renumber(witness)):
            raise UnstablePartition("witness partition is not stable")
        block = _renumber(witness)
    return Quotient.build(g, block)


def _partition_from(g, mode, fwd, rev, done, mu, initial):
    use_f = mode in ("fwd", "fr")
    use_r = mode in ("rev", "fr")

    def sig(i: int, block: list[int]):
        if g.is_u[i]:
            r = frozenset((lbl, block[t]) for lbl, t in rev[i]) if use_r else None
            return ("U", r, _mu_sig(mu[i], block))
        f = frozenset((lbl, block[t]) for lbl, t in fwd[i]) if use_f else None
        return ("R", done[i], f)

    return _refine(len(g), list(initial), sig)


@dataclass
class Quotient:
    """A minimised two-sorted system; ``blocks`` lists original node ids per block."""
    is_u: list[bool]
    done: list[bool]
    mu: list[tuple[tuple[Fraction, int], ...]]
    fwd: list[frozenset]
    rev: list[frozenset]
    root: int
    blocks: list[list[Node]]

    @classmethod
    def build(cls, g: Graph, block: list[int]) -> "Quotient":
        k = max(block) + 1
        is_u = [False] * k
        done = [False] * k
        mu: list = [()] * k
        fwd: list = [frozenset()] * k
        rev: list = [frozenset()] * k
        members: list[list[Node]] = [[] for _ in range(k)]
        for i, b in enumerate(block):
            members[b].append(g.nodes[i])
            if members[b][0] != g.nodes[i]:
                continue
            is_u[b] = g.is_u[i]
            done[b] = g.done[i]
            mu[b] = _mu_sig(g.mu[i], block)
            fwd[b] = frozenset((lbl, block[t]) for lbl, t in g.fwd[i])
            rev[b] = frozenset((lbl, block[t]) for lbl, t in g.rev[i])
        return cls(is_u, done, [tuple((w, t) for t, w in m) for m in mu], fwd, rev, block[g.roots[0]], members)

    def __len__(self) -> int:
        return len(self.is_u)

    def requotient(self) -> "Quotient":
        """Refine the quotient again; stable quotients come back unchanged."""
        n = len(self)
        initial = [("U",) if self.is_u[i] else ("R", self.done[i]) for i in range(n)]

        def sig(i, block):
            if self.is_u[i]:
                return ("U", frozenset((l, block[t]) for l, t in self.rev[i]), _mu_sig(list(self.mu[i]), block))
            return ("R", self.done[i], frozenset((l, block[t]) for l, t in self.fwd[i]))

        block = _refine(n, initial, sig)
        k = max(block) + 1
        out = Quotient([False] * k, [False] * k, [()] * k, [frozenset()] * k, [frozenset()] * k,
                       block[self.root], [[] for _ in range(k)])
        for i, b in enumerate(block):
            out.blocks[b].extend(self.blocks[i])
            out.is_u[b] = self.is_u[i]
            out.done[b] = self.done[i]
            out.mu[b] = tuple((w, t) for t, w in _mu_sig(list(self.mu[i]), block))
            out.fwd[b] = frozenset((l, block[t]) for l, t in self.fwd[i])
            out.rev[b] = frozenset((l, block[t]) for l, t in self.rev[i])
        return out
