import pytest

from ctc.equiv import (MODES, STRENGTHS, IncompatibleModels, TooLarge, brute_oracle,
                       check_hp_bisim, check_pomset_bisim, check_step_bisim, quotient)
from ctc.state import load_model
from helpers import TWO_STATE, plts, random_pairs, small_pool

ALL = [(m, s) for m in MODES for s in STRENGTHS]


def test_reflexive():
    a = plts("a.nil")
    assert check_step_bisim(a, a)
    assert check_hp_bisim(a, a, hereditary=True)


def test_choice_commutes():
    assert check_step_bisim(plts("a.nil + b.nil"), plts("b.nil + a.nil"), "fr", "strong")


def test_different_actions():
    assert not check_step_bisim(plts("a.nil"), plts("b.nil"))
    assert not brute_oracle(plts("a.nil"), plts("b.nil"), "step-fr-strong")
    assert brute_oracle(plts("nil"), plts("nil"), "step-fr-strong")


def test_tau_absorbed_only_when_weak():
    a, b = plts("a.nil"), plts("tau.a.nil")
    for mode in ("fwd", "fr"):
        assert not check_step_bisim(a, b, mode, "strong")
        assert check_step_bisim(a, b, mode, "weak")


def test_reverse_only_relates_standard_roots():
    # neither root can undo anything, so the reverse clause alone is vacuous there
    assert check_step_bisim(plts("a.nil"), plts("b.nil"), "rev", "strong")


def test_weak_tau_branch_example():
    # a forward observer cannot tell the extra a.c branch apart; undoing it
    # from c lands in a state with no b-option, which the reverse clause sees
    a = plts("a.(b.nil + tau.c.nil)")
    b = plts("a.(b.nil + tau.c.nil) + a.c.nil")
    assert check_step_bisim(a, b, "fwd", "weak")
    assert brute_oracle(a, b, "step-fwd-weak", max_configs=30)
    assert not check_step_bisim(a, b, "fr", "weak")


def test_sequential_and_concurrent_pair():
    a, b = plts("a.b.nil"), plts("(a||b).nil")
    assert not check_pomset_bisim(a, b, max_seq=2)
    assert not brute_oracle(a, b, "pomset-fr-strong")


def test_interleaving_and_vector_sum():
    a, b = plts("a.nil || b.nil"), plts("(a||b).nil + a.b.nil + b.a.nil")
    assert check_step_bisim(a, b)
    assert check_pomset_bisim(a, b)
    # the summands order a and b causally, the composition does not
    assert not check_hp_bisim(a, b)


def test_concurrency_is_not_interleaving():
    a, b = plts("a.nil || b.nil"), plts("a.b.nil + b.a.nil")
    for mode in ("fwd", "fr"):
        for strength in STRENGTHS:
            assert not check_step_bisim(a, b, mode, strength)
            assert not check_hp_bisim(a, b, mode, strength)


def test_probabilities_matter():
    assert check_step_bisim(plts("a.nil [+1/3] b.nil"), plts("b.nil [+2/3] a.nil"))
    assert not check_step_bisim(plts("a.nil [+1/3] b.nil"), plts("a.nil [+2/3] b.nil"))
    assert check_step_bisim(plts("a.nil [+1/2] a.nil"), plts("a.nil"))


def test_termination_is_observed():
    assert not check_step_bisim(plts("nil"), plts("eps"))
    assert check_step_bisim(plts("eps.a.nil"), plts("a.nil"))


def test_pomset_with_unit_runs_is_step():
    for _, a, _, b in random_pairs(11, 40):
        for mode, strength in ALL:
            assert bool(check_pomset_bisim(a, b, mode, strength, max_seq=1)) == bool(
                check_step_bisim(a, b, mode, strength))


def test_checkers_agree_with_the_oracle():
    for p, a, q, b in random_pairs(5, 40):
        for mode, strength in ALL:
            for kind, fn in (("step", check_step_bisim), ("pomset", check_pomset_bisim),
                             ("hp", check_hp_bisim)):
                assert bool(fn(a, b, mode, strength)) == brute_oracle(a, b, f"{kind}-{mode}-{strength}"), \
                    (kind, mode, strength, p, q)


def test_hierarchy_on_random_pairs():
    for _, a, _, b in random_pairs(9, 40):
        for mode in MODES:
            for strength in STRENGTHS:
                hp = bool(check_hp_bisim(a, b, mode, strength))
                pom = bool(check_pomset_bisim(a, b, mode, strength))
                assert not hp or pom
                assert not pom or check_step_bisim(a, b, mode, strength)
            assert not check_step_bisim(a, b, mode, "strong") or check_step_bisim(a, b, mode, "weak")


def test_oracle_size_limit():
    big = plts("(a.nil || b.nil) || (c.nil || a.nil)")
    with pytest.raises(TooLarge):
        brute_oracle(big, big, "step-fr-strong")


def test_models_must_match():
    other = load_model(TWO_STATE)
    with pytest.raises(IncompatibleModels):
        check_step_bisim(plts("a.nil"), plts("a.nil", other))


def test_quotient_merges_duplicate_branches():
    assert len(quotient(plts("a.nil + a.nil"))) == len(quotient(plts("a.nil")))


def test_quotient_is_idempotent():
    q = quotient(plts("(a.nil [+1/2] a.nil) || b.nil"))
    again = q.requotient()
    assert len(again) == len(q)
    assert sorted(map(sorted, again.blocks)) == sorted(map(sorted, q.blocks))


def test_witness_blocks_cover_both_systems():
    a, b = plts("a.nil + b.nil"), plts("b.nil + a.nil")
    res = check_step_bisim(a, b)
    sides = {side for block in res.blocks for side, _, _ in block}
    assert sides == {0, 1}


def test_step_equivalence_is_an_equivalence():
    _, pool = small_pool(17, 25, depth=2)
    n = len(pool)
    eq = [[bool(check_step_bisim(pool[i][1], pool[j][1], "fr", "strong")) for j in range(n)] for i in range(n)]
    classes = 0
    for i in range(n):
        assert eq[i][i]
        classes += not any(eq[i][:i])
        for j in range(n):
            assert eq[i][j] == eq[j][i]
            for k in range(n):
                assert not (eq[i][j] and eq[j][k]) or eq[i][k]
    # the check is only meaningful if some distinct terms are related
    assert classes < n
