from __future__ import annotations

import random
from fractions import Fraction

import pytest

from congame import (
    Selector,
    approximate_game_value,
    check_determinacy_bracket,
    compute_W2,
    strategy_value_reach,
    strategy_value_safety,
    swap_players,
)
from congame.reach_si import STATUS_EPS, STATUS_EXACT

from conftest import ONE, random_concurrent_game

F = Fraction

# 2 - sqrt(2) to 30 decimal digits, as an exact rational bracket.
TWO_MINUS_SQRT2_LO = F("585786437626904951198311275790") / 10**30
TWO_MINUS_SQRT2_HI = F("585786437626904951198311275791") / 10**30


def test_certify_fig2_exact(fig2):
    safe = [s for s in fig2.states if s != "s4"]
    bracket = approximate_game_value(fig2, safe, F(1, 100))
    assert bracket.status == STATUS_EXACT
    assert bracket.exact_values is not None
    assert bracket.exact_values["s0"] == F(2, 3)
    assert bracket.safety_lower["s0"] == F(2, 3)
    assert bracket.reach_lower["s0"] == F(1, 3)
    assert bracket.gap == 0
    # exact values satisfy the safety fixpoint identity v = min([F], Pre1(v))
    from congame.matrix import pre1

    v = bracket.exact_values
    pre_vals, _ = pre1(fig2, v)
    for s in fig2.states:
        bound = ONE if s in set(safe) else F(0)
        assert v[s] == min(bound, pre_vals[s])


def test_certify_ex3full_eps(ex3full):
    safe = [s for s in ex3full.states if s != "s2"]
    bracket = approximate_game_value(ex3full, safe, F(1, 100))
    assert bracket.status == STATUS_EPS
    assert bracket.gap <= F(1, 100)
    assert bracket.safety_lower["s3"] == F(3, 5)
    v0 = bracket.safety_lower["s0"]
    assert TWO_MINUS_SQRT2_LO - F(1, 100) <= v0 <= TWO_MINUS_SQRT2_HI
    # both bounds bracket the true value
    assert v0 <= TWO_MINUS_SQRT2_HI
    assert ONE - bracket.reach_lower["s0"] >= TWO_MINUS_SQRT2_LO


def test_certify_all_safe(ex3step1):
    bracket = approximate_game_value(ex3step1, ex3step1.states, F(1, 100))
    assert bracket.status == STATUS_EXACT
    assert bracket.exact_values == {s: ONE for s in ex3step1.states}


def test_certify_witnesses_achieve_bounds(ex3full):
    safe = [s for s in ex3full.states if s != "s2"]
    bracket = approximate_game_value(ex3full, safe, F(1, 100))
    achieved = strategy_value_safety(ex3full, bracket.safety_strategy, safe)
    assert achieved == bracket.safety_lower
    swapped = swap_players(ex3full)
    complement = ["s2"]
    w2 = compute_W2(swapped, complement)
    as_p1 = Selector(1, bracket.reach_strategy.choice)
    achieved2 = strategy_value_reach(swapped, as_p1, complement, w2)
    assert achieved2 == bracket.reach_lower


def test_certify_vi_flavor(ex3full):
    safe = [s for s in ex3full.states if s != "s2"]
    bracket = approximate_game_value(ex3full, safe, F(1, 100), reach_method="vi")
    assert bracket.status == STATUS_EPS
    assert bracket.gap <= F(1, 100)
    assert bracket.reach_strategy is None


def test_certify_rejects_bad_eps(fig2):
    with pytest.raises(ValueError):
        approximate_game_value(fig2, fig2.states, F(0))


def test_determinacy_bracket_fig1_complement(fig1):
    safe = [s for s in fig1.states if s != "s0"]
    report = check_determinacy_bracket(fig1, safe, iters=3)
    assert report.ok
    assert report.gaps[0] == 0


def test_determinacy_bracket_trivial_one_state():
    from congame.model import GameStructure

    game = GameStructure(
        ("s",), ("x",), {"s": ("x",)}, {"s": ("x",)}, {("s", "x", "x"): {"s": ONE}}
    )
    report = check_determinacy_bracket(game, {"s"}, iters=2)
    assert report.ok
    assert report.gaps[0] == 0


def test_determinacy_bracket_random():
    rng = random.Random(61)
    for _ in range(8):
        game = random_concurrent_game(rng, n_states=3)
        safe = set(rng.sample(game.states, rng.randint(1, 2)))
        report = check_determinacy_bracket(game, safe, iters=10)
        assert report.ok, report.violations
        for earlier, later in zip(report.gaps, report.gaps[1:]):
            assert later <= earlier


def test_sandwich_lower_iterates_below_upper_iterates(ex3full):
    # Every achieved safety value sits below every upper-iteration bound,
    # and every reachability iterate sits below the certified upper bound.
    from congame import (
        reach_value_iteration,
        run_convergent_safety_si,
        safety_value_iteration_upper,
    )

    safe = [s for s in ex3full.states if s != "s2"]
    uppers = safety_value_iteration_upper(ex3full, safe, steps=8)
    lowers = run_convergent_safety_si(ex3full, safe, max_outer=4).valuations
    for v in lowers:
        for w in uppers:
            assert all(v[s] <= w[s] for s in ex3full.states)

    bracket = approximate_game_value(ex3full, safe, F(1, 100))
    swapped = swap_players(ex3full)
    trace = reach_value_iteration(swapped, ["s2"], max_steps=10)
    # player 2's reach iterates stay below 1 - (player 1's safety lower bounds)
    for u in trace.valuations:
        assert all(u[s] <= 1 - bracket.safety_lower[s] for s in ex3full.states)


def test_certify_exact_on_turn_based_matches_oracle():
    # Both sides terminate on turn-based games, so certify must return the
    # exact value; the dual reachability oracle provides the reference.
    import random as _random

    from congame.model import encode_turn_based_as_concurrent
    from conftest import random_tb_game
    from oracles import tb_reach_value_oracle
    from congame.model import P1, P2, TurnBasedGame

    rng = _random.Random(62)
    for _ in range(12):
        tb = random_tb_game(rng, n_states=4, max_succ=2)
        safe = set(rng.sample(tb.states, rng.randint(1, 3)))
        game = encode_turn_based_as_concurrent(tb)
        bracket = approximate_game_value(game, safe, F(1, 1000), max_rounds=400)
        assert bracket.status == STATUS_EXACT
        swapped = TurnBasedGame(
            tb.states,
            {
                s: (P1 if kind == P2 else P2 if kind == P1 else kind)
                for s, kind in tb.partition.items()
            },
            tb.edges,
            tb.prob,
        )
        complement = [s for s in tb.states if s not in safe]
        dual = tb_reach_value_oracle(swapped, complement)
        assert bracket.exact_values == {s: 1 - dual[s] for s in tb.states}
