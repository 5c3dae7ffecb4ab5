"""Finite data-state models: states, guard evaluation, effects, joins, wp."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .syntax import (Action, CtcError, GAnd, GAtom, GDelta, GEps, GNot, GOr,
                     Guard, ParseError, TAU)


class UnknownAtom(CtcError):
    pass


class MissingEffect(CtcError):
    def __init__(self, action: str, state: str):
        super().__init__(f"no effect declared for {action} in state {state}")


class NonJoinableStates(CtcError):
    def __init__(self, a: str, b: str):
        super().__init__(f"states {a} and {b} have no declared join")


class UnknownState(CtcError):
    pass


@dataclass(frozen=True)
class DataState:
    id: str
    atoms: frozenset[str]


EPS = "eps"


def _akey(a: Action | str) -> str:
    return a if isinstance(a, str) else str(a)


@dataclass(frozen=True)
class StateModel:
    """An immutable finite model.

    ``effects`` maps (action text, state id) to a state id, ``joins`` maps an
    unordered pair of ids to an id and ``inverse`` optionally maps
    (action text, state id) back to the state the action started from.  When
    ``identity_default`` is set, undeclared effects leave the state alone.
    """
    states: tuple[DataState, ...]
    atoms: frozenset[str]
    effects: dict[tuple[str, str], str] = field(default_factory=dict, hash=False, compare=False)
    joins: dict[frozenset[str], str] = field(default_factory=dict, hash=False, compare=False)
    inverse: dict[tuple[str, str], str] = field(default_factory=dict, hash=False, compare=False)
    identity_default: bool = False

    def __post_init__(self) -> None:
        ids = [s.id for s in self.states]
        if len(set(ids)) != len(ids):
            raise CtcError("duplicate state id")
        if not self.states:
            raise CtcError("a model needs at least one state")
        for s in self.states:
            if not s.atoms <= self.atoms:
                raise UnknownAtom(f"state {s.id} uses undeclared atoms {sorted(s.atoms - self.atoms)}")
        object.__setattr__(self, "_by_id", {s.id: s for s in self.states})

    @property
    def initial(self) -> DataState:
        return self.states[0]

    def state(self, sid: str) -> DataState:
        try:
            return self._by_id[sid]  # type: ignore[attr-defined]
        except KeyError:
            raise UnknownState(f"unknown state {sid}") from None

    def fingerprint(self) -> tuple:
        return (self.states, self.atoms, tuple(sorted(self.effects.items())),
                tuple(sorted((tuple(sorted(k)), v) for k, v in self.joins.items())),
                tuple(sorted(self.inverse.items())), self.identity_default)

    # ------------------------------------------------------------ predicates

    def test(self, g: Guard, s: DataState | str) -> bool:
        st = self.state(s) if isinstance(s, str) else s
        return _test(g, st, self.atoms)

    def effect(self, a: Action | str, s: DataState | str) -> DataState:
        sid = s if isinstance(s, str) else s.id
        name = _akey(a)
        if name == EPS:
            return self.state(sid)
        if name == "delta":
            raise CtcError("delta has no effect")
        out = self.effects.get((name, sid))
        if out is None:
            if name == TAU or self.identity_default:
                return self.state(sid)
            raise MissingEffect(name, sid)
        return self.state(out)

    def uneffect(self, a: Action | str, s: DataState | str) -> DataState:
        """Prior state of an executed action, from the inverse table."""
        sid = s if isinstance(s, str) else s.id
        out = self.inverse.get((_akey(a), sid))
        if out is None:
            raise MissingEffect(f"inverse of {_akey(a)}", sid)
        return self.state(out)

    def join(self, a: DataState | str, b: DataState | str) -> DataState:
        x = self.state(a) if isinstance(a, str) else a
        y = self.state(b) if isinstance(b, str) else b
        if x.id == y.id:
            return x
        out = self.joins.get(frozenset((x.id, y.id)))
        if out is not None:
            return self.state(out)
        want = x.atoms | y.atoms
        for s in self.states:
            if s.atoms == want:
                return s
        raise NonJoinableStates(x.id, y.id)

    def wp(self, a: Action | str, g: Guard) -> bool:
        """True iff ``g`` holds after ``a`` from every state."""
        return all(self.test(g, self.effect(a, s)) for s in self.states)

    def actions(self) -> set[str]:
        return {a for a, _ in self.effects}

    # ------------------------------------------------------------ text form

    def dumps(self) -> str:
        lines = ["atoms: " + " ".join(sorted(self.atoms))]
        for s in self.states:
            lines.append(f"state {s.id}: " + " ".join(sorted(s.atoms)))
        if self.identity_default:
            lines.append("default: identity")
        for (a, s), t in sorted(self.effects.items()):
            lines.append(f"effect {a} {s} -> {t}")
        for k, v in sorted(self.joins.items(), key=lambda kv: sorted(kv[0])):
            x, y = sorted(k)
            lines.append(f"join {x} {y} -> {v}")
        for (a, s), t in sorted(self.inverse.items()):
            lines.append(f"inverse {a} {s} -> {t}")
        return "\n".join(lines) + "\n"


def _test(g: Guard, s: DataState, atoms: frozenset[str]) -> bool:
    if isinstance(g, GEps):
        return True
    if isinstance(g, GDelta):
        return False
    if isinstance(g, GAtom):
        if g.name not in atoms:
            raise UnknownAtom(f"unknown atom {g.name}")
        return g.name in s.atoms
    if isinstance(g, GNot):
        return not _test(g.arg, s, atoms)
    if isinstance(g, GOr):
        return _test(g.left, s, atoms) or _test(g.right, s, atoms)
    if isinstance(g, GAnd):
        return _test(g.left, s, atoms) and _test(g.right, s, atoms)
    raise TypeError(g)


def load_model(text: str) -> StateModel:
    """Read the line-oriented model format; the first declared state is initial."""
    atoms: set[str] = set()
    states: list[DataState] = []
    effects: dict[tuple[str, str], str] = {}
    joins: dict[frozenset[str], str] = {}
    inverse: dict[tuple[str, str], str] = {}
    identity = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        words = line.replace(":", " : ").split()
        head = words[0]
        try:
            if head == "atoms":
                atoms.update(words[2:])
            elif head == "state":
                states.append(DataState(words[1], frozenset(words[3:])))
            elif head == "default":
                if words[2:] != ["identity"]:
                    raise ValueError
                identity = True
            elif head in ("effect", "inverse"):
                _, a, s, arrow, t = words
                if arrow != "->":
                    raise ValueError
                (effects if head == "effect" else inverse)[(a, s)] = t
            elif head == "join":
                _, x, y, arrow, t = words
                if arrow != "->":
                    raise ValueError
                joins[frozenset((x, y))] = t
            else:
                raise ValueError
        except ValueError:
            raise ParseError(0, f"a model declaration on line {lineno}", line) from None
    model = StateModel(tuple(states), frozenset(atoms), effects, joins, inverse, identity)
    ids = {s.id for s in states}
    for table in (effects, inverse):
        for (a, s), t in table.items():
            if s not in ids or t not in ids:
                raise UnknownState(f"undeclared state in {a} {s} -> {t}")
    for k, v in joins.items():
        if not k <= ids or v not in ids:
            raise UnknownState(f"undeclared state in join {sorted(k)} -> {v}")
    return model


def trivial_model() -> StateModel:
    """One state, no atoms, every action leaves the state alone."""
    return StateModel((DataState("s0", frozenset()),), frozenset(), identity_default=True)


def powerset_model(atom_names: list[str], actions: list[str], rng) -> StateModel:
    """A random total model whose states are all valuations of ``atom_names``.

    Joins are atom-set unions, which always exist because every valuation is
    a state.
    """
    states = []
    for bits in itertools.product([False, True], repeat=len(atom_names)):
        on = frozenset(a for a, b in zip(atom_names, bits) if b)
        sid = "s" + "".join("1" if b else "0" for b in bits) if atom_names else "s0"
        states.append(DataState(sid, on))
    effects = {}
    for a in actions:
        for s in states:
            effects[(a, s.id)] = rng.choice(states).id
    return StateModel(tuple(states), frozenset(atom_names), effects, identity_default=True)
