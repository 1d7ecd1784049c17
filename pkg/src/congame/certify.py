"""Two-sided approximation of concurrent game values with a stopping rule.

Safety values can only be approached from below by strategy improvement and
from above by value iteration, and neither sequence knows how close it is.
Determinacy closes the gap: player 1's safety value and player 2's value
for reaching the complement sum to one at every state.  Running player 2's
reachability improvement (a monotone lower bound u) alongside player 1's
convergent safety improvement (a monotone lower bound v) therefore yields
the two-sided bracket v <= value <= 1 - u, and max_s(1 - u - v) <= eps is a
sound stopping criterion.  If either sequence reaches its natural fixpoint
first, the value is exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

from .model import GameStructure, Selector, Valuation, ONE, swap_players
from .reach_si import (
    ReachSIRunner,
    STATUS_CAPPED,
    STATUS_EPS,
    STATUS_EXACT,
)
from .safety_si import ConvergentSafetyRunner
from .matrix import pre1
from .value_iter import reach_value_iteration


class _ReachVIRunner:
    """Value-iteration stand-in for the reachability side (no witness)."""

    def __init__(self, game: GameStructure, T: Iterable[str]):
        self.trace = reach_value_iteration(game, T, max_steps=0)
        self.finished = False

    @property
    def values(self) -> Valuation:
        return self.trace.valuations[-1]

    @property
    def selector(self) -> Selector | None:
        return None

    def step(self) -> bool:
        if self.finished:
            return False
        u = self.trace.valuations[-1]
        nxt, witness = pre1(self.trace.game, u)
        self.trace.valuations.append(nxt)
        self.trace.witnesses.append(witness)
        if nxt == u:
            self.finished = True
            self.trace.converged = True
            return False
        return True


@dataclass
class ValueBracket:
    """Simultaneous lower bounds for both players with their gap.

    ``safety_lower`` bounds player 1's Safe(F) value from below and
    ``reach_lower`` bounds player 2's Reach(S - F) value from below, so
    pointwise safety_lower <= va(Safe(F)) <= 1 - reach_lower.  When a
    natural fixpoint fired, ``exact_values`` holds va(Safe(F)) itself.
    """

    safety_lower: Valuation
    reach_lower: Valuation
    gap: Fraction
    status: str
    rounds: int
    exact_values: Valuation | None
    safety_strategy: Selector | None
    reach_strategy: Selector | None


def _gap(game: GameStructure, u: Valuation, v: Valuation) -> Fraction:
    worst = None
    for s in game.states:
        slack = ONE - u[s] - v[s]
        if slack < 0:
            raise AssertionError(
                f"determinacy violated at {s!r}: u={u[s]}, v={v[s]}"
            )
        if worst is None or slack > worst:
            worst = slack
    assert worst is not None
    return worst


def _as_player2(selector: Selector | None) -> Selector | None:
    if selector is None:
        return None
    return Selector(2, {s: dict(d) for s, d in selector.choice.items()})


def approximate_game_value(
    game: GameStructure,
    F: Iterable[str],
    eps: Fraction,
    max_rounds: int = 200,
    reach_method: str = "si",
) -> ValueBracket:
    """Interleave both monotone sequences until the bracket closes.

    One outer step of each side alternates per round, checking the three
    stopping criteria after every step: player 2's sequence hit its fixpoint
    (exact), player 1's sequence hit its stopping condition (exact), or the
    bracket gap fell to ``eps`` (eps-approx).  A round cap returns the best
    bracket so far, flagged capped.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if max_rounds < 1:
        raise ValueError("max_rounds must be at least 1")
    safe = frozenset(F) & frozenset(game.states)
    complement = [s for s in game.states if s not in safe]
    safety = ConvergentSafetyRunner(game, safe)
    if reach_method == "si":
        reach = ReachSIRunner(swap_players(game), complement)
    elif reach_method == "vi":
        reach = _ReachVIRunner(swap_players(game), complement)
    else:
        raise ValueError(f"unknown reach_method {reach_method!r}")

    rounds = 0
    status = STATUS_CAPPED
    exact: Valuation | None = None

    def criteria() -> str | None:
        if safety.values is None:
            return None
        if reach.finished:
            return "reach-fixpoint"
        if safety.finished:
            return "safety-fixpoint"
        if _gap(game, reach.values, safety.values) <= eps:
            return "gap"
        return None

    hit = None
    while rounds < max_rounds:
        rounds += 1
        safety.step()
        hit = criteria()
        if hit:
            break
        reach.step()
        hit = criteria()
        if hit:
            break
    v = safety.values
    u = reach.values
    assert v is not None
    if hit == "reach-fixpoint":
        status = STATUS_EXACT
        exact = {s: ONE - u[s] for s in game.states}
    elif hit == "safety-fixpoint":
        status = STATUS_EXACT
        exact = dict(v)
    elif hit == "gap":
        status = STATUS_EPS
    return ValueBracket(
        safety_lower=dict(v),
        reach_lower=dict(u),
        gap=_gap(game, u, v),
        status=status,
        rounds=rounds,
        exact_values=exact,
        safety_strategy=safety.selector,
        reach_strategy=_as_player2(reach.selector),
    )


@dataclass
class DeterminacyReport:
    rounds: int
    ok: bool
    violations: list[tuple[int, str, Fraction, Fraction]]
    gaps: list[Fraction]
    reach_lower: list[Valuation]
    safety_lower: list[Valuation]


def check_determinacy_bracket(
    game: GameStructure, F: Iterable[str], iters: int
) -> DeterminacyReport:
    """Run both sequences for a fixed number of rounds and audit the bracket:
    u + v <= 1 pointwise at every round, and the gap never widens."""
    safe = frozenset(F) & frozenset(game.states)
    complement = [s for s in game.states if s not in safe]
    safety = ConvergentSafetyRunner(game, safe)
    reach = ReachSIRunner(swap_players(game), complement)
    violations: list[tuple[int, str, Fraction, Fraction]] = []
    gaps: list[Fraction] = []
    u_hist: list[Valuation] = []
    v_hist: list[Valuation] = []
    for round_index in range(iters):
        if not safety.finished:
            safety.step()
        if not reach.finished:
            reach.step()
        u = reach.values
        v = safety.values
        assert v is not None
        u_hist.append(dict(u))
        v_hist.append(dict(v))
        worst = max(ONE - u[s] - v[s] for s in game.states)
        for s in game.states:
            if u[s] + v[s] > 1:
                violations.append((round_index, s, u[s], v[s]))
        if gaps and worst > gaps[-1]:
            violations.append((round_index, "<gap-widened>", worst, gaps[-1]))
        gaps.append(worst)
        if safety.finished and reach.finished:
            break
    return DeterminacyReport(
        rounds=len(gaps),
        ok=not violations,
        violations=violations,
        gaps=gaps,
        reach_lower=u_hist,
        safety_lower=v_hist,
    )
