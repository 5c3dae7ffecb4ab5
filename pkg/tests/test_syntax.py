import random
import re
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from ctc.laws import GenConfig, execute, gen_term
from ctc.state import powerset_model
from ctc.syntax import (Action, BadProbability, Box, Nil, ParseError, Restrict, Sum,
                        UnguardedDefinition, UnknownConstant, is_nstd, is_std, make_box,
                        parse_definitions, parse_guard, parse_process, past_suffix, prefix,
                        pretty, pretty_guard, sort)

A, B, C = Action("a"), Action("b"), Action("c")


def test_parse_sum():
    assert parse_process("a.nil + b.nil") == Sum(prefix([A], Nil()), prefix([B], Nil()))


def test_parse_box():
    assert parse_process("a.nil [+1/3] b.nil") == Box(Fraction(1, 3), prefix([A], Nil()), prefix([B], Nil()))


def test_parse_vector_under_restriction():
    assert parse_process("(a||b).nil \\ {c}") == Restrict(prefix([A, B], Nil()), frozenset({"c"}))


def test_pretty_basic_shapes():
    assert pretty(Sum(prefix([A], Nil()), Nil())) == "a.nil + nil"
    assert pretty(past_suffix(Nil(), [A], 1)) == "nil.a[1]"
    assert pretty(make_box("1/2", Nil(), Nil())) == "nil [+1/2] nil"


@pytest.mark.parametrize("text", [
    "a.nil + b.nil || c.nil",
    "a.nil [+1/4] b.nil + c.nil",
    "(a.nil || b.nil) \\ {a,b} [a->c]",
    "<p * !q + q>.a.nil",
    "eps.delta",
    "(a||'b).nil.c[3]",
    "tau.(a.nil [+2/3] nil)",
])
def test_round_trip_examples(text):
    p = parse_process(text)
    assert parse_process(pretty(p)) == p


def test_precedence_box_loosest():
    p = parse_process("a.nil [+1/2] b.nil + c.nil")
    assert isinstance(p, Box) and isinstance(p.right, Sum)


@pytest.mark.parametrize("text, std, nstd", [
    ("a.nil", True, False),
    ("nil.a[1]", False, True),
    ("a.nil + nil.b[2]", False, False),
    ("(nil.a[1]).b.nil", False, False),
])
def test_standard_forms(text, std, nstd):
    p = parse_process(text)
    assert is_std(p) is std
    assert is_nstd(p) is nstd


@pytest.mark.parametrize("text, expected", [
    ("a.nil + 'b.nil", {Action("a"), Action("b", True)}),
    ("(a.nil) \\ {a}", set()),
    ("tau.a.nil", {A}),
])
def test_sort(text, expected):
    assert sort(parse_process(text)) == expected


def test_sort_of_recursive_constant():
    defs = parse_definitions("X := a.Y\nY := b.X + c.nil")
    assert sort(parse_process("X", defs), defs) == {A, B, C}


@pytest.mark.parametrize("bad", ["a.", "a + ", "(a.nil", "a.nil [+1/2]", "<p.a.nil"])
def test_syntax_errors(bad):
    with pytest.raises(ParseError):
        parse_process(bad)


@pytest.mark.parametrize("prob", ["0", "1", "3/2"])
def test_probability_bounds(prob):
    with pytest.raises(BadProbability):
        parse_process(f"a.nil [+{prob}] b.nil")


def test_unknown_constant():
    with pytest.raises(UnknownConstant):
        parse_process("a.X")


def test_unguarded_definition():
    with pytest.raises(UnguardedDefinition):
        parse_definitions("X := X + a.nil")


def test_guard_round_trip():
    g = parse_guard("!(p + q) * eps")
    assert parse_guard(pretty_guard(g)) == g


# an independent textual scan: strip guards, relabellings, label sets and
# probabilities, then classify every remaining action token by its key
_NOISE = re.compile(r"<[^>]*>|\[[^\]]*->[^\]]*\]|\{[^}]*\}|\[\+[^\]]*\]")
_TOKEN = re.compile(r"'?\b(?!nil\b|eps\b|delta\b)([a-z]\w*)(\[\d+\])?")


def _scan(text):
    tokens = _TOKEN.findall(_NOISE.sub(" ", text))
    keyed = [k for _, k in tokens if k]
    return len(keyed) == 0, len(keyed) == len(tokens)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 4), st.booleans())
def test_round_trip_and_forms_on_random_terms(seed, depth, run):
    rng = random.Random(seed)
    cfg = GenConfig(max_depth=depth)
    p = gen_term(cfg, rng)
    if run:
        model = powerset_model(list(cfg.atoms), list(cfg.actions), random.Random(seed))
        p, _ = execute(p, model.initial.id, model, rng)
    text = pretty(p)
    q = parse_process(text, check_consts=False)
    assert pretty(q) == text
    assert (is_std(q), is_nstd(q)) == _scan(text)
