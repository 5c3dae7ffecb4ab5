"""Operational semantics: resolution, forward steps, reverse steps, PLTS.

A configuration alternates between two phases.  An *unresolved* term is
resolved by ``prob_resolve`` into a distribution over *resolved* terms
(marked actions, chosen ``Box`` sides); a resolved term fires forward
steps, whose targets are unmarked again.  Terms with nothing to resolve
are *idle*: they play both roles and carry no probabilistic edges.

Reversal is last-in-first-out: only the events carrying the largest key
may be undone, and the data state goes back to the one recorded when
that key was fired.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Mapping

from .state import DataState, StateModel
from .syntax import (Act, Action, Box, Const, CtcError, Nil, Par, Process,
                     Relabel, Restrict, Seq, Sum, TAU_ACTION, Test, Unfolded,
                     apply_relabel, complementary, has_past, keys_of,
                     strip_marks, walk)

ONE = Fraction(1)

Path = tuple[int, ...]
FwdLabel = tuple[Action, ...]
RevLabel = tuple[tuple[Action, int], ...]


class UnguardedRecursion(CtcError):
    pass


class StateSpaceBoundExceeded(CtcError):
    pass


class UnknownKey(CtcError):
    pass


@dataclass(frozen=True)
class Config:
    process: Process
    state: str
    phase: str  # "u" unresolved, "r" resolved, "i" idle
    terminated: bool = False


@dataclass(frozen=True)
class Step:
    """One forward step before key allocation.

    ``events`` lists, per event, the visible label and the atoms that take
    part in it as (path, action index) pairs; a synchronisation is one
    ``tau`` event with two atoms.
    """
    events: tuple[tuple[Action, tuple[tuple[Path, int], ...]], ...]
    state: str

    @property
    def label(self) -> FwdLabel:
        return tuple(sorted(lbl for lbl, _ in self.events))


class KeyAllocator:
    """Fresh keys are one above the largest key already in the term.

    This makes allocation a function of the configuration, so the same
    configuration reached twice allocates the same key; along any run the
    keys still increase monotonically.
    """

    def fresh(self, p: Process) -> int:
        return max(keys_of(p), default=0) + 1


@dataclass
class Semantics:
    model: StateModel
    defs: Mapping[str, Process] = field(default_factory=dict)
    max_unfold: int = 32
    faithful_pcomp: bool = False
    keygen: KeyAllocator = field(default_factory=KeyAllocator)

    def __post_init__(self) -> None:
        self._res: dict[tuple[Process, str], list[tuple[Fraction, Process, bool]]] = {}
        self._done: dict[tuple[Process, str, bool], bool] = {}
        self._steps: dict[tuple[Process, str], list[Step]] = {}

    # ------------------------------------------------------------ √

    def done(self, p: Process, s: str) -> bool:
        """Successful termination of ``p`` at ``s`` (the observable √).

        ``nil`` is inert rather than successful, so it is never done.
        """
        key = (p, s, True)
        if key not in self._done:
            self._done[key] = self._done_raw(p, s, frozenset(), True)
        return self._done[key]

    def finished(self, p: Process, s: str) -> bool:
        """Whether ``p`` lets a sequential continuation start; ``nil`` counts."""
        key = (p, s, False)
        if key not in self._done:
            self._done[key] = self._done_raw(p, s, frozenset(), False)
        return self._done[key]

    def _done_raw(self, p: Process, s: str, seen: frozenset[str], strict: bool, frozen: bool = False) -> bool:
        # ``frozen``: the part lies before a continuation that has started, so
        # its guards already passed and are not looked at again
        rec = lambda q, fz=frozen: self._done_raw(q, s, seen, strict, fz)  # noqa: E731
        if isinstance(p, Nil):
            return not strict
        if isinstance(p, Test):
            return True if frozen else self.model.test(p.guard, s)
        if isinstance(p, Act):
            return p.key is not None
        if isinstance(p, Const):
            if p.name in seen:
                return False
            return self._done_raw(self._body(p.name), s, seen | {p.name}, strict, frozen)
        if isinstance(p, Seq) and has_past(p.right):
            return rec(p.left, True) and rec(p.right)
        if isinstance(p, (Seq, Par)):
            return rec(p.left) and rec(p.right)
        if isinstance(p, Sum):
            branch = _past_branch(p.left, p.right)
            if branch is not None:
                return rec(branch)
            return rec(p.left) or rec(p.right)
        if isinstance(p, Box):
            use_l, use_r = self._box_live(p, s)
            return (use_l and rec(p.left)) or (use_r and rec(p.right))
        if isinstance(p, (Restrict, Relabel, Unfolded)):
            return rec(p.body)
        raise TypeError(p)

    def _box_live(self, p: Box, s: str) -> tuple[bool, bool]:
        """Which branches of a Box are live, honouring history and resolution."""
        if p.side == "L":
            return True, False
        if p.side == "R":
            return False, True
        side = _committed(p)
        if side is not None:
            return side == 0, side == 1
        if p.side == "B":
            return True, True
        cl, cr = self.resolvable(p.left, s), self.resolvable(p.right, s)
        if cl or cr:
            return cl, cr
        return True, True

    def _body(self, name: str) -> Process:
        try:
            return self.defs[name]
        except KeyError:
            from .syntax import UnknownConstant
            raise UnknownConstant(name) from None

    def resolvable(self, p: Process, s: str) -> bool:
        """Whether some resolution of ``p`` in state ``s`` marks an action.

        Actions behind a false, unfinished guard never get marked, so
        ``delta.a.nil`` is no more resolvable than ``delta``.
        """
        return any(flag for _, _, flag in self.resolve(p, s))

    # ------------------------------------------------------------ resolution

    def resolve(self, p: Process, s: str) -> list[tuple[Fraction, Process, bool]]:
        """Distribution of resolved terms; the flag says whether anything got marked."""
        key = (p, s)
        if key not in self._res:
            self._res[key] = _merge(self._resolve(p, s, 0))
        return self._res[key]

    def _resolve(self, p: Process, s: str, depth: int) -> list[tuple[Fraction, Process, bool]]:
        if isinstance(p, (Nil, Test)):
            return [(ONE, p, False)]
        if isinstance(p, Act):
            if p.key is not None:
                return [(ONE, p, False)]
            return [(ONE, replace(p, mark=True), True)]
        if isinstance(p, Const):
            if depth >= self.max_unfold:
                raise UnguardedRecursion(f"unfolding {p.name} exceeded {self.max_unfold} levels")
            out = self._resolve(self._body(p.name), s, depth + 1)
            if not any(flag for _, _, flag in out):
                return [(ONE, p, False)]
            return [(w, Unfolded(p.name, q), flag) for w, q, flag in out]
        if isinstance(p, Unfolded):
            return [(w, Unfolded(p.name, q), flag) for w, q, flag in self._resolve(p.body, s, depth)]
        if isinstance(p, Seq):
            left = self._resolve(p.left, s, depth)
            if has_past(p.right) or self.finished(p.left, s):
                right = self._resolve(p.right, s, depth)
            else:
                right = [(ONE, p.right, False)]
            return _product(left, right, Seq)
        if isinstance(p, Sum):
            side = _committed(p)
            if side == 0:
                return [(w, Sum(q, p.right), f) for w, q, f in self._resolve(p.left, s, depth)]
            if side == 1:
                return [(w, Sum(p.left, q), f) for w, q, f in self._resolve(p.right, s, depth)]
            return _product(self._resolve(p.left, s, depth), self._resolve(p.right, s, depth), Sum)
        if isinstance(p, Box):
            side = _committed(p)
            if side == 0:
                return [(w, Box(p.prob, q, p.right, "L"), f) for w, q, f in self._resolve(p.left, s, depth)]
            if side == 1:
                return [(w, Box(p.prob, p.left, q, "R"), f) for w, q, f in self._resolve(p.right, s, depth)]
            cl, cr = self.resolvable(p.left, s), self.resolvable(p.right, s)
            if not cl and not cr:
                return [(w, Box(p.prob, a, b, "B"), fa or fb)
                        for (w, (a, b), fa, fb) in _pairs(self._resolve(p.left, s, depth),
                                                          self._resolve(p.right, s, depth))]
            out: list[tuple[Fraction, Process, bool]] = []
            if cl:
                wl = p.prob if cr else ONE
                out += [(wl * w, Box(p.prob, q, p.right, "L"), f) for w, q, f in self._resolve(p.left, s, depth)]
            if cr:
                wr = (1 - p.prob) if cl else ONE
                out += [(wr * w, Box(p.prob, p.left, q, "R"), f) for w, q, f in self._resolve(p.right, s, depth)]
            return out
        if isinstance(p, Par):
            left, right = self._resolve(p.left, s, depth), self._resolve(p.right, s, depth)
            if self.faithful_pcomp:
                return _product(left, right, Sum)
            return _product(left, right, Par)
        if isinstance(p, Restrict):
            return [(w, Restrict(q, p.labels), f) for w, q, f in self._resolve(p.body, s, depth)]
        if isinstance(p, Relabel):
            return [(w, Relabel(q, p.fn), f) for w, q, f in self._resolve(p.body, s, depth)]
        raise TypeError(p)

    def prob_resolve(self, c: Config) -> list[tuple[Fraction, Config]]:
        """Resolution distribution of an unresolved configuration."""
        if c.terminated:
            raise CtcError("terminated configurations do not resolve")
        out = []
        for w, q, flag in self.resolve(c.process, c.state):
            out.append((w, Config(q, c.state, "r" if flag else "i")))
        return out

    # ------------------------------------------------------------ forward

    def steps(self, p: Process, s: str) -> list[Step]:
        key = (p, s)
        if key not in self._steps:
            self._steps[key] = self._steps_raw(p, s)
        return self._steps[key]

    def stuck(self, p: Process, s: str) -> bool:
        """Unfinished and unable to move even with restrictions lifted.

        Such a component (a false guard, ``delta``) halts a composition; one
        that is only held back by a restriction does not.
        """
        return not self.finished(p, s) and not self.steps(_open(p), s)

    def _steps_raw(self, p: Process, s: str) -> list[Step]:
        if isinstance(p, Act):
            if p.key is not None or not p.mark:
                return []
            st = self.model.effect(p.actions[0], s)
            for a in p.actions[1:]:
                st = self.model.join(st, self.model.effect(a, s))
            return [Step(tuple((a, (((), i),)) for i, a in enumerate(p.actions)), st.id)]
        if isinstance(p, (Nil, Test, Const)):
            return []
        if isinstance(p, Seq):
            out = []
            if not has_past(p.right):
                out += _shift(self.steps(p.left, s), 0)
            if has_past(p.right) or self.finished(p.left, s):
                out += _shift(self.steps(p.right, s), 1)
            return out
        if isinstance(p, Sum):
            side = _committed(p)
            if side is not None:
                return _shift(self.steps(p.right if side else p.left, s), side)
            return _shift(self.steps(p.left, s), 0) + _shift(self.steps(p.right, s), 1)
        if isinstance(p, Box):
            use_l, use_r = self._box_live(p, s)
            return ((_shift(self.steps(p.left, s), 0) if use_l else [])
                    + (_shift(self.steps(p.right, s), 1) if use_r else []))
        if isinstance(p, Par):
            left = _shift(self.steps(p.left, s), 0)
            right = _shift(self.steps(p.right, s), 1)
            if (not left and self.stuck(p.left, s)) or (not right and self.stuck(p.right, s)):
                return []
            out = left + right
            for x in left:
                for y in right:
                    lx = [lbl for lbl, _ in x.events]
                    ly = [lbl for lbl, _ in y.events]
                    if len(lx) == 1 and len(ly) == 1 and complementary(lx[0], ly[0]):
                        # a synchronisation is a silent step and leaves the data alone
                        atoms = x.events[0][1] + y.events[0][1]
                        out.append(Step(((TAU_ACTION, atoms),), s))
                        continue
                    if _has_sync(x) or _has_sync(y):
                        continue
                    st = self.model.join(x.state, y.state).id
                    if not any(complementary(a, b) for a in lx for b in ly):
                        out.append(Step(x.events + y.events, st))
            return out
        if isinstance(p, Restrict):
            return [st for st in _shift(self.steps(p.body, s), 0)
                    if all(lbl.is_tau or lbl.name not in p.labels for lbl, _ in st.events)]
        if isinstance(p, Relabel):
            return [Step(tuple((apply_relabel(p.fn, lbl), atoms) for lbl, atoms in st.events), st.state)
                    for st in _shift(self.steps(p.body, s), 0)]
        if isinstance(p, Unfolded):
            return _shift(self.steps(p.body, s), 0)
        raise TypeError(p)

    def fire(self, p: Process, s: str, step: Step) -> tuple[Process, int]:
        """Apply ``step`` to resolved term ``p``; return the unmarked target and the key."""
        key = self.keygen.fresh(p)
        where: dict[Path, dict[int, int]] = {}
        for tag, (_, atoms) in enumerate(step.events):
            for path, idx in atoms:
                where.setdefault(path, {})[idx] = tag
        return strip_marks(_fire(p, (), where, key, s)), key

    def forward_steps(self, c: Config) -> list[tuple[FwdLabel, Config]]:
        """Steps of a resolved configuration, targets unresolved."""
        if c.phase == "u":
            raise CtcError("forward steps need a resolved configuration")
        out = []
        for st in self.steps(c.process, c.state):
            q, _ = self.fire(c.process, c.state, st)
            out.append((st.label, self.classify(q, st.state)))
        return out

    def classify(self, p: Process, s: str) -> Config:
        """Wrap an unresolved term as a configuration of the right phase."""
        dist = self.resolve(p, s)
        if len(dist) == 1 and not dist[0][2]:
            return Config(p, s, "i")
        return Config(p, s, "u")

    # ------------------------------------------------------------ reverse

    def reverse_steps(self, c: Config) -> list[tuple[RevLabel, Config]]:
        """Undo the most recent step; empty on standard terms or resolved configurations."""
        if c.phase == "r":
            return []
        p = c.process
        ks = keys_of(p)
        if not ks:
            return []
        key = max(ks)
        events, prevs, blocked = _undo_view(p, key)
        if blocked:
            return []
        label = []
        for t in sorted(events):
            lbls = events[t]
            if len(lbls) == 2 and complementary(lbls[0], lbls[1]):
                label.append((TAU_ACTION, key))
            else:
                label.extend((lbl, key) for lbl in lbls)
        prev = prevs.pop() if len(prevs) == 1 else None
        if prev is None:
            acts = sorted(a for a, _ in label)
            if len(acts) != 1:
                raise UnknownKey(f"key {key} has no recorded provenance")
            try:
                prev = self.model.uneffect(acts[0], c.state).id
            except CtcError:
                if self.model.identity_default:
                    prev = c.state
                else:
                    raise UnknownKey(f"key {key} has no recorded provenance and no inverse effect") from None
        q = strip_marks(_unfire(p, key))
        return [(tuple(sorted(label)), self.classify(q, prev))]

    def history(self, p: Process) -> tuple[dict[tuple[int, int], Action], set[tuple[tuple[int, int], tuple[int, int]]]]:
        """Executed events of ``p`` with labels and the causal order between them."""
        return _history(p)


def _has_sync(st: Step) -> bool:
    # a synchronisation never joins a concurrent step, which keeps || associative
    return any(lbl.is_tau and len(atoms) > 1 for lbl, atoms in st.events)


def _open(p: Process) -> Process:
    """``p`` with every restriction removed."""
    if isinstance(p, Restrict):
        return _open(p.body)
    if isinstance(p, (Seq, Sum, Par)):
        return type(p)(_open(p.left), _open(p.right))
    if isinstance(p, Box):
        return replace(p, left=_open(p.left), right=_open(p.right))
    if isinstance(p, (Relabel, Unfolded)):
        return replace(p, body=_open(p.body))
    return p


def _undo_view(p: Process, key: int) -> tuple[dict[int, list[Action]], set[str | None], bool]:
    """Labels per event of ``key`` as seen from the top, recorded prior states, and
    whether a restriction hides one of them."""
    prevs: set[str | None] = set()
    blocked = False

    def go(q: Process) -> dict[int, list[Action]]:
        nonlocal blocked
        if isinstance(q, Act):
            if q.key != key:
                return {}
            prevs.add(q.prev)
            tags = q.tags or tuple(range(len(q.actions)))
            out: dict[int, list[Action]] = {}
            for a, t in zip(q.actions, tags):
                out.setdefault(t, []).append(a)
            return out
        if isinstance(q, Relabel):
            return {t: [apply_relabel(q.fn, a) for a in lbls] for t, lbls in go(q.body).items()}
        merged: dict[int, list[Action]] = {}
        for ch in _kids(q):
            for t, lbls in go(ch).items():
                merged.setdefault(t, []).extend(lbls)
        if isinstance(q, Restrict):
            for lbls in merged.values():
                if len(lbls) == 2 and complementary(lbls[0], lbls[1]):
                    continue
                if any(not a.is_tau and a.name in q.labels for a in lbls):
                    blocked = True
        return merged

    events = go(p)
    return events, prevs, blocked


def _walk(p: Process):
    yield p
    for c in _kids(p):
        yield from _walk(c)


def _walk_ctx(p: Process, fn: tuple):
    yield p, fn
    if isinstance(p, Relabel):
        yield from _walk_ctx(p.body, (p.fn,) + fn)
        return
    for c in _kids(p):
        yield from _walk_ctx(c, fn)


def _kids(p: Process) -> tuple[Process, ...]:
    if isinstance(p, (Seq, Sum, Box, Par)):
        return (p.left, p.right)
    if isinstance(p, (Restrict, Relabel, Unfolded)):
        return (p.body,)
    return ()


def _committed(p: Process) -> int | None:
    """Index of the only branch of a choice holding past events, if any.

    A choice with past on both sides (only written by hand) stays open.
    """
    lp, rp = has_past(p.left), has_past(p.right)  # type: ignore[attr-defined]
    if lp and not rp:
        return 0
    if rp and not lp:
        return 1
    return None


def _past_branch(left: Process, right: Process) -> Process | None:
    side = _committed(Sum(left, right))
    return None if side is None else (left, right)[side]


def _merge(dist: list[tuple[Fraction, Process, bool]]) -> list[tuple[Fraction, Process, bool]]:
    acc: dict[Process, list] = {}
    for w, q, f in dist:
        if q in acc:
            acc[q][0] += w
            acc[q][1] = acc[q][1] or f
        else:
            acc[q] = [w, f]
    return [(w, q, f) for q, (w, f) in acc.items()]


def _pairs(a, b):
    for wa, qa, fa in a:
        for wb, qb, fb in b:
            yield wa * wb, (qa, qb), fa, fb


def _product(a, b, ctor) -> list[tuple[Fraction, Process, bool]]:
    return [(w, ctor(qa, qb), fa or fb) for w, (qa, qb), fa, fb in _pairs(a, b)]


def _shift(steps: Iterable[Step], i: int) -> list[Step]:
    return [Step(tuple((lbl, tuple(((i,) + path, idx) for path, idx in atoms)) for lbl, atoms in st.events),
                 st.state) for st in steps]


def _fire(p: Process, path: Path, where: dict[Path, dict[int, int]], key: int, prev: str) -> Process:
    if not any(w[:len(path)] == path for w in where):
        return p
    if isinstance(p, Act):
        tags = tuple(where[path][i] for i in range(len(p.actions)))
        return Act(p.actions, key=key, prev=prev, tags=tags)
    if isinstance(p, (Seq, Sum, Par)):
        return type(p)(_fire(p.left, path + (0,), where, key, prev), _fire(p.right, path + (1,), where, key, prev))
    if isinstance(p, Box):
        return Box(p.prob, _fire(p.left, path + (0,), where, key, prev),
                   _fire(p.right, path + (1,), where, key, prev), p.side)
    if isinstance(p, Restrict):
        return Restrict(_fire(p.body, path + (0,), where, key, prev), p.labels)
    if isinstance(p, Relabel):
        return Relabel(_fire(p.body, path + (0,), where, key, prev), p.fn)
    if isinstance(p, Unfolded):
        return Unfolded(p.name, _fire(p.body, path + (0,), where, key, prev))
    raise TypeError(p)


def _unfire(p: Process, key: int) -> Process:
    if isinstance(p, Act):
        return Act(p.actions, mark=True) if p.key == key else p
    if isinstance(p, (Seq, Sum, Par)):
        return type(p)(_unfire(p.left, key), _unfire(p.right, key))
    if isinstance(p, Box):
        return Box(p.prob, _unfire(p.left, key), _unfire(p.right, key), p.side)
    if isinstance(p, Restrict):
        return Restrict(_unfire(p.body, key), p.labels)
    if isinstance(p, Relabel):
        return Relabel(_unfire(p.body, key), p.fn)
    if isinstance(p, Unfolded):
        return Unfolded(p.name, _unfire(p.body, key))
    return p


def _history(p: Process):
    """Events are (key, tag); ``a < b`` when a sits left of b in some Seq."""
    labels: dict[tuple[int, int], Action] = {}
    atoms: dict[tuple[int, int], list[Action]] = {}

    def events_in(q: Process, fn: tuple) -> set[tuple[int, int]]:
        out: set[tuple[int, int]] = set()
        for node, f in _walk_ctx(q, fn):
            if isinstance(node, Act) and node.key is not None:
                tags = node.tags or tuple(range(len(node.actions)))
                for a, t in zip(node.actions, tags):
                    lbl = a
                    for g in f:
                        lbl = apply_relabel(g, lbl)
                    out.add((node.key, t))
        return out

    for node, f in _walk_ctx(p, ()):
        if isinstance(node, Act) and node.key is not None:
            tags = node.tags or tuple(range(len(node.actions)))
            for a, t in zip(node.actions, tags):
                lbl = a
                for g in f:
                    lbl = apply_relabel(g, lbl)
                atoms.setdefault((node.key, t), []).append(lbl)
    for e, lbls in atoms.items():
        if len(lbls) == 2 and complementary(lbls[0], lbls[1]):
            labels[e] = TAU_ACTION
        else:
            labels[e] = lbls[0]
    order: set[tuple[tuple[int, int], tuple[int, int]]] = set()
    for node, f in _walk_ctx(p, ()):
        if isinstance(node, Seq):
            before = events_in(node.left, f)
            after = events_in(node.right, f)
            order.update((x, y) for x in before for y in after if x != y)
    return labels, order


# ---------------------------------------------------------------- PLTS

@dataclass
class PLTS:
    configs: list[Config]
    index: dict[tuple[Process, str, str], int]
    prob: dict[int, list[tuple[Fraction, int]]]
    fwd: dict[int, list[tuple[FwdLabel, int]]]
    rev: dict[int, list[tuple[RevLabel, int]]]
    done: dict[int, bool]
    roots: list[int]
    sem: Semantics

    def __len__(self) -> int:
        return len(self.configs)

    def parent(self, i: int) -> int | None:
        """Unresolved configuration a resolved one came from."""
        c = self.configs[i]
        if c.phase == "i":
            return i
        if c.phase == "u":
            return None
        return self.index.get((strip_marks(c.process), c.state, "u"))

    def is_acyclic(self) -> bool:
        """No forward cycle (reverse edges always close cycles and are ignored)."""
        succ: dict[int, list[int]] = {i: [] for i in range(len(self.configs))}
        for i, es in self.prob.items():
            succ[i] += [j for _, j in es]
        for i, es in self.fwd.items():
            succ[i] += [j for _, j in es]
        color = [0] * len(self.configs)
        for root in range(len(self.configs)):
            if color[root]:
                continue
            stack = [(root, iter(succ[root]))]
            color[root] = 1
            while stack:
                node, it = stack[-1]
                nxt = next(it, None)
                if nxt is None:
                    color[node] = 2
                    stack.pop()
                elif color[nxt] == 1:
                    return False
                elif color[nxt] == 0:
                    color[nxt] = 1
                    stack.append((nxt, iter(succ[nxt])))
        return True


def build_plts(root: Process | Iterable[Process], s0: DataState | str, model: StateModel,
               defs: Mapping[str, Process] | None = None, *, max_configs: int = 5000,
               max_unfold: int = 32, faithful_pcomp: bool = False,
               sem: Semantics | None = None) -> PLTS:
    """Breadth-first closure of the phase-alternating rule relations."""
    if max_configs <= 0 or max_unfold <= 0:
        raise CtcError("bounds must be positive")
    sem = sem or Semantics(model, dict(defs or {}), max_unfold, faithful_pcomp)
    sid = s0 if isinstance(s0, str) else s0.id
    roots_in = [root] if isinstance(root, Process) else list(root)
    configs: list[Config] = []
    index: dict[tuple[Process, str, str], int] = {}
    queue: list[int] = []

    def intern(c: Config) -> int:
        k = (c.process, c.state, c.phase)
        if k not in index:
            if len(configs) >= max_configs:
                raise StateSpaceBoundExceeded(f"more than {max_configs} configurations")
            # executed unfoldings stay in the term, so recursion through past
            # events only ever deepens it; stop before it outgrows the stack
            if sum(isinstance(n, Unfolded) for n in walk(c.process)) > max_unfold:
                raise StateSpaceBoundExceeded(f"a configuration holds more than {max_unfold} unfoldings")
            index[k] = len(configs)
            configs.append(c)
            queue.append(index[k])
        return index[k]

    roots = [intern(sem.classify(r, sid)) for r in roots_in]
    prob: dict[int, list[tuple[Fraction, int]]] = {}
    fwd: dict[int, list[tuple[FwdLabel, int]]] = {}
    rev: dict[int, list[tuple[RevLabel, int]]] = {}
    done: dict[int, bool] = {}
    head = 0
    while head < len(queue):
        i = queue[head]
        head += 1
        c = configs[i]
        if c.phase == "u":
            prob[i] = [(w, intern(t)) for w, t in sem.prob_resolve(c)]
        if c.phase in ("r", "i"):
            done[i] = sem.done(c.process, c.state)
            fwd[i] = sorted({(lbl, intern(t)) for lbl, t in sem.forward_steps(c)}, key=_edge_key)
        if c.phase in ("u", "i"):
            rev[i] = sorted({(lbl, intern(t)) for lbl, t in sem.reverse_steps(c)}, key=_edge_key)
    for i, c in enumerate(configs):
        if c.phase == "i" and not fwd.get(i) and not rev.get(i):
            configs[i] = replace(c, terminated=True)
    return PLTS(configs, index, prob, fwd, rev, done, roots, sem)


def _edge_key(e):
    lbl, j = e
    return (tuple(str(x) for x in lbl), j)


def format_label(lbl) -> str:
    parts = []
    for x in lbl:
        if isinstance(x, tuple):
            parts.append(f"{x[0]}[{x[1]}]")
        else:
            parts.append(str(x))
    return "{" + ",".join(parts) + "}"
