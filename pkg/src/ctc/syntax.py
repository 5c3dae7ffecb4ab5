"""Term language: AST, parser, pretty-printer and structural predicates.

Processes are immutable, hashable dataclasses so they can be interned as
configuration keys.  Sequential composition is a single binary node
``Seq``; a prefix ``a.P`` is ``Seq(Act((a,)), P)`` and an executed event
``P.a[3]`` is ``Seq(P, Act((a,), key=3))``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Iterator, Mapping

TAU = "tau"
KEYWORDS = {"nil", "tau", "eps", "delta"}


class CtcError(Exception):
    """Base class for every error raised by the package."""


class ParseError(CtcError):
    def __init__(self, pos: int, expected: str, text: str = ""):
        self.pos = pos
        self.expected = expected
        near = text[pos:pos + 12] if text else ""
        super().__init__(f"syntax error at {pos}: expected {expected}" + (f" near {near!r}" if near else ""))


class UnknownConstant(CtcError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unknown constant {name}")


class BadProbability(CtcError):
    pass


class UnguardedDefinition(CtcError):
    pass


# ---------------------------------------------------------------- labels

@dataclass(frozen=True, order=True)
class Action:
    """A visible label ``name`` / ``'name`` or the silent action ``tau``."""
    name: str
    co: bool = False

    @property
    def is_tau(self) -> bool:
        return self.name == TAU

    def comp(self) -> "Action":
        if self.is_tau:
            return self
        return Action(self.name, not self.co)

    def __str__(self) -> str:
        return ("'" if self.co else "") + self.name


Label = Action
TAU_ACTION = Action(TAU)


def complementary(a: Action, b: Action) -> bool:
    return not a.is_tau and a.name == b.name and a.co != b.co


# ---------------------------------------------------------------- guards

@dataclass(frozen=True)
class Guard:
    pass


@dataclass(frozen=True)
class GEps(Guard):
    pass


@dataclass(frozen=True)
class GDelta(Guard):
    pass


@dataclass(frozen=True)
class GAtom(Guard):
    name: str


@dataclass(frozen=True)
class GNot(Guard):
    arg: Guard


@dataclass(frozen=True)
class GOr(Guard):
    left: Guard
    right: Guard


@dataclass(frozen=True)
class GAnd(Guard):
    left: Guard
    right: Guard


def guard_atoms(g: Guard) -> set[str]:
    if isinstance(g, GAtom):
        return {g.name}
    if isinstance(g, GNot):
        return guard_atoms(g.arg)
    if isinstance(g, (GOr, GAnd)):
        return guard_atoms(g.left) | guard_atoms(g.right)
    return set()


# ---------------------------------------------------------------- processes

@dataclass(frozen=True)
class Process:
    pass


@dataclass(frozen=True)
class Nil(Process):
    pass


@dataclass(frozen=True)
class Const(Process):
    name: str


@dataclass(frozen=True)
class Test(Process):
    """A bare guard used as a process; ``eps`` and ``delta`` are guards too."""
    guard: Guard


@dataclass(frozen=True)
class Act(Process):
    """An action vector.  ``key`` is set once the vector has fired.

    ``prev`` is the data state the firing step started from and ``tags``
    numbers the events of the step the actions belong to (two partners of
    a synchronisation share a tag).  ``mark`` is the resolution mark; it
    never appears in parsed input.
    """
    actions: tuple[Action, ...]
    key: int | None = None
    prev: str | None = field(default=None, compare=True)
    tags: tuple[int, ...] | None = None
    mark: bool = False


@dataclass(frozen=True)
class Seq(Process):
    left: Process
    right: Process


@dataclass(frozen=True)
class Sum(Process):
    left: Process
    right: Process


@dataclass(frozen=True)
class Box(Process):
    """Probabilistic choice taking ``left`` with probability ``prob``.

    ``side`` records the resolved branch ("L", "R" or "B" when neither
    branch can resolve); it is only set on resolved terms.
    """
    prob: Fraction
    left: Process
    right: Process
    side: str | None = None


@dataclass(frozen=True)
class Par(Process):
    left: Process
    right: Process


@dataclass(frozen=True)
class Restrict(Process):
    body: Process
    labels: frozenset[str]


@dataclass(frozen=True)
class Relabel(Process):
    """``fn`` is a sorted tuple of (source name, target name) pairs.

    A pair maps ``a`` to ``b`` and ``'a`` to ``'b``; names outside the
    domain are left alone and ``tau`` is always fixed.
    """
    body: Process
    fn: tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class Unfolded(Process):
    """A constant whose body has been opened by the resolution phase."""
    name: str
    body: Process


def prefix(actions: Iterable[Action], body: Process) -> Process:
    return Seq(Act(tuple(actions)), body)


def past_suffix(body: Process, actions: Iterable[Action], key: int) -> Process:
    acts = tuple(actions)
    return Seq(body, Act(acts, key=key, tags=tuple(range(len(acts)))))


def relabel_fn(pairs: Mapping[str, str] | Iterable[tuple[str, str]]) -> tuple[tuple[str, str], ...]:
    items = pairs.items() if isinstance(pairs, Mapping) else pairs
    return tuple(sorted((a, b) for a, b in items if a != b))


def apply_relabel(fn: tuple[tuple[str, str], ...], a: Action) -> Action:
    if a.is_tau:
        return a
    for src, dst in fn:
        if src == a.name:
            return Action(dst, a.co)
    return a


def make_box(prob: Fraction | str | int, left: Process, right: Process) -> Box:
    p = Fraction(prob)
    if not 0 < p < 1:
        raise BadProbability(f"probability {p} outside (0,1)")
    return Box(p, left, right)


def children(p: Process) -> tuple[Process, ...]:
    if isinstance(p, (Seq, Sum, Box, Par)):
        return (p.left, p.right)
    if isinstance(p, (Restrict, Relabel, Unfolded)):
        return (p.body,)
    return ()


def walk(p: Process) -> Iterator[Process]:
    yield p
    for c in children(p):
        yield from walk(c)


def has_past(p: Process) -> bool:
    return any(isinstance(n, Act) and n.key is not None for n in walk(p))


def is_std(p: Process) -> bool:
    """No executed (keyed) event anywhere in ``p``."""
    return not has_past(p)


def is_nstd(p: Process) -> bool:
    """Every action occurrence in ``p`` is keyed; vacuously true without actions."""
    return all(n.key is not None for n in walk(p) if isinstance(n, Act))


def keys_of(p: Process) -> set[int]:
    return {n.key for n in walk(p) if isinstance(n, Act) and n.key is not None}


# ---------------------------------------------------------------- sorts

def sort(p: Process, defs: Mapping[str, Process] | None = None) -> frozenset[Action]:
    """Visible labels ``p`` may ever use, with constants resolved by fixed point."""
    defs = defs or {}

    def go(q: Process, env: dict[str, frozenset[Action]]) -> frozenset[Action]:
        if isinstance(q, Act):
            return frozenset(a for a in q.actions if not a.is_tau)
        if isinstance(q, Const):
            if q.name not in defs:
                raise UnknownConstant(q.name)
            return env.get(q.name, frozenset())
        if isinstance(q, Restrict):
            return frozenset(a for a in go(q.body, env) if a.name not in q.labels)
        if isinstance(q, Relabel):
            return frozenset(apply_relabel(q.fn, a) for a in go(q.body, env))
        out: frozenset[Action] = frozenset()
        for c in children(q):
            out |= go(c, env)
        return out

    reach = constants_reachable(p, defs)
    env = {n: frozenset() for n in reach}
    changed = True
    while changed:
        changed = False
        for n in sorted(reach):
            v = go(defs[n], env)
            if v != env[n]:
                env[n] = v
                changed = True
    return go(p, env)


def constants_reachable(p: Process, defs: Mapping[str, Process]) -> set[str]:
    seen: set[str] = set()
    todo = [p]
    while todo:
        q = todo.pop()
        for n in walk(q):
            if isinstance(n, Const) and n.name not in seen:
                if n.name not in defs:
                    raise UnknownConstant(n.name)
                seen.add(n.name)
                todo.append(defs[n.name])
    return seen


def check_guarded(defs: Mapping[str, Process]) -> None:
    """Every constant occurrence in a definition body must sit under a prefix."""

    def go(q: Process, guarded: bool) -> None:
        if isinstance(q, Const) and not guarded:
            raise UnguardedDefinition(f"constant {q.name} is not under a prefix")
        if isinstance(q, Seq):
            go(q.left, guarded)
            go(q.right, guarded or any(isinstance(n, Act) for n in walk(q.left)))
            return
        for c in children(q):
            go(c, guarded)

    for name in sorted(defs):
        go(defs[name], False)


# ---------------------------------------------------------------- pretty

def pretty_guard(g: Guard, level: int = 0) -> str:
    if isinstance(g, GEps):
        return "eps"
    if isinstance(g, GDelta):
        return "delta"
    if isinstance(g, GAtom):
        return g.name
    if isinstance(g, GNot):
        return "!" + pretty_guard(g.arg, 2)
    if isinstance(g, GOr):
        s = f"{pretty_guard(g.left, 0)} + {pretty_guard(g.right, 1)}"
        return f"({s})" if level > 0 else s
    if isinstance(g, GAnd):
        s = f"{pretty_guard(g.left, 1)} * {pretty_guard(g.right, 2)}"
        return f"({s})" if level > 1 else s
    raise TypeError(g)


def _act(a: Act, marks: bool = False) -> str:
    def one(x: Action) -> str:
        return str(x) + (f"[{a.key}]" if a.key is not None else "")
    body = "||".join(one(x) for x in a.actions)
    body = f"({body})" if len(a.actions) > 1 else body
    return "~" + body if marks and a.mark else body


# precedence levels, loosest first
_BOX, _SUM, _PAR, _POST, _SEQ, _ATOM = range(6)


def _level(p: Process) -> int:
    if isinstance(p, Box):
        return _BOX
    if isinstance(p, Sum):
        return _SUM
    if isinstance(p, Par):
        return _PAR
    if isinstance(p, (Restrict, Relabel)):
        return _POST
    if isinstance(p, Seq):
        return _SEQ
    return _ATOM


def _bare_par(p: Process) -> bool:
    if isinstance(p, Par):
        return _bare_par(p.left) and _bare_par(p.right)
    return isinstance(p, Act) and len(p.actions) == 1


def pretty(p: Process, marks: bool = False) -> str:
    """Canonical concrete syntax; ``parse_process(pretty(p)) == p`` for parsed terms.

    With ``marks`` a resolution mark shows as ``~`` before the action and a
    resolved choice shows its side after the probability, as in
    ``[+1/2:L]``; that form is for display only.
    """
    return _pp(p, _BOX, marks)


def _wrap(p: Process, need: int, marks: bool = False) -> str:
    s = _pp(p, need, marks)
    return f"({s})" if _level(p) < need else s


def _pp(p: Process, need: int, marks: bool = False) -> str:
    if isinstance(p, Nil):
        return "nil"
    if isinstance(p, Const):
        return p.name
    if isinstance(p, Test):
        g = p.guard
        if isinstance(g, (GEps, GDelta)):
            return pretty_guard(g)
        return f"<{pretty_guard(g)}>"
    if isinstance(p, Act):
        return _act(p, marks)
    if isinstance(p, Unfolded):
        return p.name
    if isinstance(p, Seq):
        right = _pp(p.right, _SEQ, marks) if isinstance(p.right, Seq) else _wrap(p.right, _ATOM, marks)
        return f"{_wrap(p.left, _ATOM, marks)}.{right}"
    if isinstance(p, Restrict):
        names = ",".join(sorted(p.labels))
        return f"{_wrap(p.body, _POST, marks)} \\ {{{names}}}"
    if isinstance(p, Relabel):
        fn = ", ".join(f"{a}->{b}" for a, b in p.fn)
        return f"{_wrap(p.body, _POST, marks)} [{fn}]"
    if isinstance(p, Par):
        left = _wrap(p.left, _PAR, marks)
        if _bare_par(p) and isinstance(p.left, Act):
            # keep "(a || b)" from reading back as a vector prefix
            left = f"({left})"
        return f"{left} || {_wrap(p.right, _POST, marks)}"
    if isinstance(p, Sum):
        return f"{_wrap(p.left, _SUM, marks)} + {_wrap(p.right, _PAR, marks)}"
    if isinstance(p, Box):
        pr = p.prob
        side = f":{p.side}" if marks and p.side else ""
        return f"{_wrap(p.left, _BOX, marks)} [+{pr.numerator}/{pr.denominator}{side}] {_wrap(p.right, _SUM, marks)}"
    raise TypeError(p)


# ---------------------------------------------------------------- parser

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>\d+(?:/\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>\|\||->|:=|\[\+|[.+()\[\]{}\\,'<>!*])
""", re.VERBOSE)


@dataclass
class _Tok:
    kind: str
    text: str
    pos: int


def _lex(text: str) -> list[_Tok]:
    out: list[_Tok] = []
    i = 0
    while i < len(text):
        m = _TOKEN.match(text, i)
        if not m:
            raise ParseError(i, "a token", text)
        kind = m.lastgroup or ""
        if kind != "ws":
            out.append(_Tok(kind, m.group(), i))
        i = m.end()
    out.append(_Tok("eof", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str, defs: Mapping[str, Process] | None, check_consts: bool):
        self.text = text
        self.toks = _lex(text)
        self.i = 0
        self.defs = defs
        self.check_consts = check_consts

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> _Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def fail(self, expected: str) -> ParseError:
        return ParseError(self.tok.pos, expected, self.text)

    def eat(self, text: str) -> _Tok:
        if self.tok.text != text:
            raise self.fail(repr(text))
        t = self.tok
        self.i += 1
        return t

    def accept(self, text: str) -> bool:
        if self.tok.text == text:
            self.i += 1
            return True
        return False

    def done(self) -> None:
        if self.tok.kind != "eof":
            raise self.fail("end of input")

    # box := sum ('[+' num ']' sum)*   (left associative)
    def box(self) -> Process:
        p = self.sum()
        while self.tok.text == "[+":
            self.i += 1
            t = self.tok
            if t.kind != "num":
                raise self.fail("a probability p/q")
            self.i += 1
            self.eat("]")
            try:
                prob = Fraction(t.text)
            except (ValueError, ZeroDivisionError):
                raise BadProbability(f"bad probability {t.text}") from None
            p = make_box(prob, p, self.sum())
        return p

    def sum(self) -> Process:
        p = self.par()
        while self.accept("+"):
            p = Sum(p, self.par())
        return p

    def par(self) -> Process:
        p = self.post()
        while self.accept("||"):
            p = Par(p, self.post())
        return p

    def post(self) -> Process:
        p = self.seq()
        while True:
            if self.tok.text == "\\":
                self.i += 1
                p = Restrict(p, self.label_set())
            elif self.tok.text == "[" and self.peek().kind == "name" and self.peek(2).text == "->":
                self.i += 1
                pairs = []
                while True:
                    a = self.ident()
                    self.eat("->")
                    b = self.ident()
                    pairs.append((a, b))
                    if not self.accept(","):
                        break
                self.eat("]")
                p = Relabel(p, relabel_fn(pairs))
            else:
                return p

    def ident(self) -> str:
        t = self.tok
        if t.kind != "name" or t.text in KEYWORDS or not t.text[0].islower():
            raise self.fail("a label name")
        self.i += 1
        return t.text

    def label_set(self) -> frozenset[str]:
        self.eat("{")
        names: set[str] = set()
        if not self.accept("}"):
            while True:
                self.accept("'")
                names.add(self.ident())
                if not self.accept(","):
                    break
            self.eat("}")
        return frozenset(names)

    # seq := atom ('.' atom)*   (right associative)
    def seq(self) -> Process:
        items = [self.atom()]
        while self.accept("."):
            items.append(self.atom())
        p = items[-1]
        for q in reversed(items[:-1]):
            p = Seq(q, p)
        return p

    def action(self) -> tuple[Action, int | None]:
        co = self.accept("'")
        t = self.tok
        if t.kind != "name" or not t.text[0].islower() or t.text in KEYWORDS - {TAU}:
            raise self.fail("an action")
        if co and t.text == TAU:
            raise self.fail("a label (tau has no complement)")
        self.i += 1
        key = None
        if self.tok.text == "[" and self.peek().kind == "num":
            self.i += 1
            num = self.tok.text
            if "/" in num:
                raise self.fail("an integer key")
            self.i += 1
            self.eat("]")
            key = int(num)
        return Action(t.text, co), key

    def vector(self) -> Act | None:
        """Try ``(a||b||...)``; restore the position and return None otherwise."""
        start = self.i
        try:
            self.eat("(")
            items = [self.action()]
            while self.accept("||"):
                items.append(self.action())
            self.eat(")")
        except ParseError:
            self.i = start
            return None
        if len(items) < 2:
            self.i = start
            return None
        return self.make_act(items, self.toks[start].pos)

    def make_act(self, items: list[tuple[Action, int | None]], pos: int) -> Act:
        acts = tuple(a for a, _ in items)
        keys = {k for _, k in items}
        if len(keys) != 1:
            raise ParseError(pos, "all actions of a vector keyed alike", self.text)
        for i, a in enumerate(acts):
            for b in acts[i + 1:]:
                if a == b or complementary(a, b):
                    raise ParseError(pos, "pairwise distinct, non-complementary vector actions", self.text)
        key = keys.pop()
        return Act(acts, key=key, tags=None if key is None else tuple(range(len(acts))))

    def atom(self) -> Process:
        t = self.tok
        if t.text == "(":
            v = self.vector()
            if v is not None:
                return v
            self.i += 1
            p = self.box()
            self.eat(")")
            return p
        if t.text == "<":
            self.i += 1
            g = self.guard()
            self.eat(">")
            return Test(g)
        if t.kind == "name":
            if t.text == "nil":
                self.i += 1
                return Nil()
            if t.text == "eps":
                self.i += 1
                return Test(GEps())
            if t.text == "delta":
                self.i += 1
                return Test(GDelta())
            if t.text[0].isupper():
                self.i += 1
                if self.check_consts and (self.defs is None or t.text not in self.defs):
                    raise UnknownConstant(t.text)
                return Const(t.text)
        if t.text == "'" or t.kind == "name":
            return self.make_act([self.action()], t.pos)
        raise self.fail("a process")

    def guard(self) -> Guard:
        g = self.gprod()
        while self.accept("+"):
            g = GOr(g, self.gprod())
        return g

    def gprod(self) -> Guard:
        g = self.gunary()
        while self.accept("*"):
            g = GAnd(g, self.gunary())
        return g

    def gunary(self) -> Guard:
        if self.accept("!"):
            return GNot(self.gunary())
        if self.accept("("):
            g = self.guard()
            self.eat(")")
            return g
        t = self.tok
        if t.kind == "name" and t.text[0].islower() and t.text not in ("nil", TAU):
            self.i += 1
            if t.text == "eps":
                return GEps()
            if t.text == "delta":
                return GDelta()
            return GAtom(t.text)
        raise self.fail("a guard")


def parse_process(text: str, defs: Mapping[str, Process] | None = None, *, check_consts: bool = True) -> Process:
    """Parse one term.  Constants must be defined in ``defs`` unless ``check_consts`` is off."""
    p = _Parser(text, defs, check_consts)
    out = p.box()
    p.done()
    return out


def parse_guard(text: str) -> Guard:
    p = _Parser(text, None, False)
    g = p.guard()
    p.done()
    return g


def parse_definitions(text: str) -> dict[str, Process]:
    """Read ``Name := term`` lines; blank lines and ``#`` comments are skipped."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        name, sep, body = line.partition(":=")
        name = name.strip()
        if not sep or not re.fullmatch(r"[A-Z][A-Za-z0-9_]*", name):
            raise ParseError(0, f"'Name := term' on line {lineno}", line)
        if name in raw:
            raise CtcError(f"constant {name} defined twice")
        raw[name] = body
    defs: dict[str, Process] = {}
    for name, body in raw.items():
        defs[name] = parse_process(body, raw, check_consts=False)
    for name in defs:
        constants_reachable(defs[name], defs)
    check_guarded(defs)
    return defs


def strip_marks(p: Process) -> Process:
    """Remove resolution marks and close constants that have not started."""
    if isinstance(p, Act):
        return replace(p, mark=False) if p.mark else p
    if isinstance(p, Box):
        return Box(p.prob, strip_marks(p.left), strip_marks(p.right))
    if isinstance(p, Unfolded):
        body = strip_marks(p.body)
        return Const(p.name) if not has_past(body) else Unfolded(p.name, body)
    if isinstance(p, (Seq, Sum, Par)):
        return type(p)(strip_marks(p.left), strip_marks(p.right))
    if isinstance(p, Restrict):
        return Restrict(strip_marks(p.body), p.labels)
    if isinstance(p, Relabel):
        return Relabel(strip_marks(p.body), p.fn)
    return p
