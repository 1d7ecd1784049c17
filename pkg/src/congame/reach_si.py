"""Strategy improvement for concurrent reachability games.

The loop keeps a proper player-1 selector, recomputes its exact value by
solving the induced MDP, and rewrites the selector on exactly the states
where the one-step operator can beat the current value.  Starting from the
uniform selector (which is always proper) every iterate stays proper, the
values increase monotonically, and a natural stop (no improvable state)
certifies the exact game value.  On turn-based games the improvements can
be kept pure, which forces termination; the initial pure proper selector
comes from the attractor construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

from .matrix import pre1
from .mdp import (
    compute_W2,
    improper_witness,
    strategy_value_reach,
    tb_attractor,
)
from .model import (
    GameStructure,
    P1,
    Selector,
    TurnBasedGame,
    Valuation,
    edge_move,
    encode_turn_based_as_concurrent,
    make_absorbing,
    pure_selector,
    tb_make_absorbing,
    uniform_selector,
)

STATUS_EXACT = "exact"
STATUS_EPS = "eps-approx"
STATUS_CAPPED = "capped"


@dataclass
class ReachSIState:
    """One point of the improvement loop: current selector, its exact value,
    and the improvement set found when stepping away from it."""

    iteration: int
    selector: Selector
    valuation: Valuation
    improve_set: frozenset[str]
    history: list[tuple[Selector, Valuation]] = field(default_factory=list)


def improve_step_reach(
    game: GameStructure, state: ReachSIState, T: Iterable[str], W2: Iterable[str]
) -> ReachSIState:
    """One improvement step on a normalized game (T and W2 absorbing).

    Rewrites the selector to a one-step-optimal mixture on the states where
    Pre1 strictly beats the current value; elsewhere the selector is kept.
    Returns the fixpoint state unchanged (empty improvement set) if there is
    nothing to improve.
    """
    done = set(T) | set(W2)
    v = state.valuation
    pre_vals, witness = pre1(game, v)
    improvable = frozenset(
        s for s in game.states if s not in done and pre_vals[s] > v[s]
    )
    if not improvable:
        return ReachSIState(state.iteration + 1, state.selector, v, improvable, state.history)
    choice = {
        s: dict(witness.choice[s] if s in improvable else state.selector.choice[s])
        for s in game.states
    }
    nxt = Selector(1, choice)
    trapped = improper_witness(game, nxt, T, W2)
    if trapped is not None:
        raise AssertionError(
            f"improvement lost properness; trapped component {sorted(trapped)}"
        )
    value = strategy_value_reach(game, nxt, T, W2)
    for s in game.states:
        if value[s] < pre_vals[s]:
            raise AssertionError(f"improvement step decreased the bound at {s!r}")
    for s in improvable:
        if not value[s] > v[s]:
            raise AssertionError(f"no strict improvement at {s!r}")
    history = state.history + [(state.selector, v)]
    return ReachSIState(state.iteration + 1, nxt, value, improvable, history)


@dataclass
class ReachSIResult:
    valuations: list[Valuation]
    final_selector: Selector
    status: str
    iterations: int
    game: GameStructure
    target: frozenset[str]
    w2: frozenset[str]

    @property
    def values(self) -> Valuation:
        return self.valuations[-1]


class ReachSIRunner:
    """Stepwise driver for the improvement loop (used directly by the
    two-sided certifier, which interleaves it with the safety sequence)."""

    def __init__(
        self,
        game: GameStructure,
        T: Iterable[str],
        initial: Selector | None = None,
    ):
        self.target = frozenset(T) & frozenset(game.states)
        self.w2 = compute_W2(game, self.target)
        self.game = make_absorbing(game, self.target | self.w2)
        selector = initial if initial is not None else uniform_selector(self.game)
        trapped = improper_witness(self.game, selector, self.target, self.w2)
        if trapped is not None:
            raise AssertionError(
                f"initial selector is improper; trapped component {sorted(trapped)}"
            )
        value = strategy_value_reach(self.game, selector, self.target, self.w2)
        self.state = ReachSIState(0, selector, value, frozenset())
        self.valuations: list[Valuation] = [value]
        self.finished = False
        self.iterations = 0

    @property
    def values(self) -> Valuation:
        return self.state.valuation

    @property
    def selector(self) -> Selector:
        return self.state.selector

    def step(self) -> bool:
        """Run one improvement; returns True if the value changed."""
        if self.finished:
            return False
        self.iterations += 1
        nxt = improve_step_reach(self.game, self.state, self.target, self.w2)
        if not nxt.improve_set:
            self.finished = True
            self.state = nxt
            return False
        self.state = nxt
        self.valuations.append(nxt.valuation)
        return True


def run_reach_si(
    game: GameStructure,
    T: Iterable[str],
    max_iters: int = 1000,
    eps: Fraction | None = None,
    upper: Mapping[str, Fraction] | None = None,
    initial: Selector | None = None,
) -> ReachSIResult:
    """Full reachability strategy improvement from the uniform selector.

    Stops when no state is improvable (exact value), when the valuation is
    within ``eps`` of a supplied upper bound, or at the iteration cap.
    """
    runner = ReachSIRunner(game, T, initial=initial)
    status = STATUS_CAPPED
    while runner.iterations < max_iters:
        if eps is not None and upper is not None:
            if max(upper[s] - runner.values[s] for s in runner.game.states) <= eps:
                status = STATUS_EPS
                break
        runner.step()
        if runner.finished:
            status = STATUS_EXACT
            break
    return ReachSIResult(
        runner.valuations,
        runner.selector,
        status,
        runner.iterations,
        runner.game,
        runner.target,
        runner.w2,
    )


@dataclass
class TurnBasedReachResult:
    values: Valuation
    strategy: dict[str, str]
    iterations: int
    selector: Selector
    game: GameStructure
    target: frozenset[str]
    w2: frozenset[str]


def run_reach_si_turn_based(tb: TurnBasedGame, T: Iterable[str]) -> TurnBasedReachResult:
    """Exact solution of a turn-based reachability game by pure improvement.

    The attractor selector provides a pure proper starting point; each
    improvement moves a player-1 state to its best successor (first in edge
    order on ties).  Pure selectors are finite, so the loop terminates with
    the exact value and an optimal pure memoryless strategy.
    """
    game = encode_turn_based_as_concurrent(tb)
    target = frozenset(T) & frozenset(tb.states)
    w2 = compute_W2(game, target)
    frozen_states = target | w2
    normalized = make_absorbing(game, frozen_states)
    tb_norm = tb_make_absorbing(tb, frozen_states)
    _, attract_choice = tb_attractor(tb_norm, frozen_states)

    def selector_from(strategy: Mapping[str, str]) -> Selector:
        picks = {s: edge_move(t) for s, t in strategy.items()}
        return pure_selector(normalized, 1, picks)

    strategy = dict(attract_choice)
    selector = selector_from(strategy)
    trapped = improper_witness(normalized, selector, target, w2)
    if trapped is not None:
        raise AssertionError(
            f"attractor selector is improper; trapped component {sorted(trapped)}"
        )
    v = strategy_value_reach(normalized, selector, target, w2)
    iterations = 0
    p1_states = [
        s
        for s in tb.states
        if tb_norm.partition[s] == P1 and s not in frozen_states
    ]
    while True:
        iterations += 1
        improved = {}
        for s in p1_states:
            best = max(v[t] for t in tb_norm.edges[s])
            if best > v[s]:
                improved[s] = next(t for t in tb_norm.edges[s] if v[t] == best)
        if not improved:
            break
        strategy.update(improved)
        selector = selector_from(strategy)
        nxt = strategy_value_reach(normalized, selector, target, w2)
        for s in tb.states:
            if nxt[s] < v[s]:
                raise AssertionError(f"turn-based improvement regressed at {s!r}")
        v = nxt
    return TurnBasedReachResult(v, strategy, iterations, selector, normalized, target, w2)
