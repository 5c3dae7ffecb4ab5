import copy
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from ctc.equiv import check_step_bisim
from ctc.semantics import (Semantics, StateSpaceBoundExceeded, UnknownKey, build_plts,
                           format_label)
from ctc.state import load_model, trivial_model
from ctc.syntax import parse_definitions, parse_process, pretty, relabel_fn, Relabel
from helpers import (TWO_STATE, distribution_errors, loop_violations, plts, random_configs,
                     standard_terms)


def _show(c):
    return pretty(c.process, marks=True), c.state, c.phase


def _resolve(sem, text, s="s0"):
    return [(w, _show(c)) for w, c in sem.prob_resolve(sem.classify(parse_process(text), s))]


def _first(sem, text, s="s0"):
    return sem.prob_resolve(sem.classify(parse_process(text), s))[0][1]


def test_prefix_resolves_to_its_mark(two_state):
    assert _resolve(Semantics(two_state), "a.nil") == [(1, ("~a.nil", "s0", "r"))]


def test_box_weights():
    got = _resolve(Semantics(trivial_model()), "a.nil [+1/3] b.nil")
    assert got == [(Fraction(1, 3), ("~a.nil [+1/3:L] b.nil", "s0", "r")),
                   (Fraction(2, 3), ("a.nil [+1/3:R] ~b.nil", "s0", "r"))]


def test_sum_resolves_both_sides_jointly():
    got = _resolve(Semantics(trivial_model()), "(a.nil [+1/2] b.nil) + c.nil")
    assert got == [(Fraction(1, 2), ("(~a.nil [+1/2:L] b.nil) + ~c.nil", "s0", "r")),
                   (Fraction(1, 2), ("(a.nil [+1/2:R] ~b.nil) + ~c.nil", "s0", "r"))]


def test_forward_step_allocates_key_and_moves_state(two_state):
    sem = Semantics(two_state)
    steps = sem.forward_steps(_first(sem, "a.nil"))
    # the executed prefix stays in place, keyed and remembering its start state
    assert [(format_label(l), _show(c)) for l, c in steps] == [("{a}", ("a[1].nil", "s1", "i"))]
    assert steps[0][1].process.left.prev == "s0"


def test_synchronisation_shares_a_key():
    sem = Semantics(trivial_model())
    steps = {format_label(l): c for l, c in sem.forward_steps(_first(sem, "a.nil || 'a.nil"))}
    assert set(steps) == {"{a}", "{'a}", "{tau}"}
    tau = steps["{tau}"]
    assert pretty(tau.process) == "a[1].nil || 'a[1].nil"
    undo = [(format_label(l), _show(c)) for l, c in sem.reverse_steps(tau)]
    assert undo == [("{tau[1]}", ("a.nil || 'a.nil", "s0", "u"))]


def test_complementary_actions_never_fire_together():
    sem = Semantics(trivial_model())
    labels = {format_label(l) for l, _ in sem.forward_steps(_first(sem, "a.nil || 'a.nil || b.nil"))}
    assert "{'a,a}" not in labels and "{a,'a}" not in labels
    assert "{a,b}" in labels and "{tau}" in labels


def test_failing_guard_blocks(two_state):
    sem = Semantics(two_state)
    c = sem.classify(parse_process("<p>.a.nil"), "s0")
    assert all(sem.forward_steps(r) == [] for _, r in sem.prob_resolve(c))


def test_joint_undo_of_a_synchronised_pair():
    sem = Semantics(trivial_model())
    c = sem.classify(parse_process("nil.a[3] || nil.'a[3]"), "s0")
    assert [format_label(l) for l, _ in sem.reverse_steps(c)] == ["{tau[3]}"]


def test_undo_without_provenance_uses_the_inverse_table():
    model = load_model(TWO_STATE + "inverse a s1 -> s0\n")
    sem = Semantics(model)
    back = sem.reverse_steps(sem.classify(parse_process("nil.a[1]"), "s1"))
    assert [(format_label(l), c.state) for l, c in back] == [("{a[1]}", "s0")]
    with pytest.raises(UnknownKey):
        Semantics(load_model(TWO_STATE)).reverse_steps(sem.classify(parse_process("nil.a[1]"), "s1"))


def test_standard_terms_cannot_undo(two_state):
    sem = Semantics(two_state)
    assert sem.reverse_steps(sem.classify(parse_process("a.nil + b.c.nil"), "s0")) == []


def test_nil_system():
    lts = plts("nil")
    assert len(lts) == 1 and lts.configs[0].terminated
    assert not lts.fwd[0] and not lts.rev[0] and not lts.prob


def test_prefix_system_over_two_states(two_state):
    lts = plts("a.nil", two_state)
    assert [_show(c) for c in lts.configs] == [("a.nil", "s0", "u"), ("~a.nil", "s0", "r"),
                                               ("a[1].nil", "s1", "i")]
    assert lts.prob[0] == [(1, 1)]
    assert [(format_label(l), j) for l, j in lts.fwd[1]] == [("{a}", 2)]
    assert [(format_label(l), j) for l, j in lts.rev[2]] == [("{a[1]}", 0)]


def test_idempotent_choice_system():
    assert check_step_bisim(plts("a.nil + a.nil"), plts("a.nil"))


def test_eps_is_successful_and_nil_is_not():
    assert plts("eps").done[0] and not plts("nil").done[0]


def test_delta_blocks_a_parallel_partner():
    lts = plts("delta || a.nil")
    assert not any(lts.fwd.values())


def test_recursion_keeps_its_history():
    # executed unfoldings stay in the term, so a.X never returns to X
    defs = parse_definitions("X := a.X")
    with pytest.raises(StateSpaceBoundExceeded):
        build_plts(parse_process("X", defs), "s0", trivial_model(), defs)


def test_state_space_bound():
    defs = parse_definitions("X := a.(X || X)")
    with pytest.raises(StateSpaceBoundExceeded):
        build_plts(parse_process("X", defs), "s0", trivial_model(), defs, max_configs=50)


def test_faithful_composition_flag_changes_resolution():
    text = "(a.nil [+1/2] b.nil) || c.nil"
    default = plts(text)
    literal = plts(text, faithful_pcomp=True)
    assert pretty(default.configs[1].process).count("||") == 1
    assert any("+" in pretty(c.process).replace("[+", "") for c in literal.configs)


def test_build_is_deterministic():
    a = plts("(a.nil [+1/3] b.nil) || ('a.nil + c.nil)")
    b = plts("(a.nil [+1/3] b.nil) || ('a.nil + c.nil)")
    assert a.configs == b.configs and a.fwd == b.fwd and a.rev == b.rev and a.prob == b.prob


def test_loop_check_detects_a_missing_undo(two_state):
    lts = plts("a.nil || b.nil", two_state)
    assert loop_violations(lts) == []
    broken = copy.copy(lts)
    broken.rev = {k: [] for k in lts.rev}
    assert loop_violations(broken)


def test_loop_property_on_random_terms():
    _, terms = standard_terms(7, 40, depth=4)
    for p, lts in terms:
        assert loop_violations(lts) == [], pretty(p)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_distributions_are_exact(seed):
    sem, configs = random_configs(seed, 10)
    assert distribution_errors(sem, configs) == []


def test_relabelling_maps_labels():
    p = parse_process("a.nil || b.c.nil")
    fn = relabel_fn({"a": "b", "c": "a"})
    plain, mapped = plts(pretty(p)), build_plts(Relabel(p, fn), "s0", trivial_model())
    assert len(plain) == len(mapped)
    rename = {"a": "b", "c": "a"}
    for i in plain.fwd:
        want = sorted(format_label(tuple(sorted(type(x)(rename.get(x.name, x.name), x.co) for x in l)))
                      for l, _ in plain.fwd[i])
        assert sorted(format_label(l) for l, _ in mapped.fwd[i]) == want


def test_blocked_guard_hides_its_continuation_from_a_box():
    # delta.P marks nothing when resolved, so the Box drops it just like delta
    lhs = plts("delta.(a.nil [+1/2] b.nil) [+1/3] c.nil")
    rhs = plts("delta [+1/3] c.nil")
    assert check_step_bisim(lhs, rhs, "fr", "strong")
    assert check_step_bisim(rhs, plts("c.nil"), "fr", "strong")
