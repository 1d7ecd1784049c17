"""Value iteration for reachability, entry times, and selector extraction.

The reachability iteration ``u_{k+1} = Pre1(u_k)`` starting from the target
indicator converges to the game value from below but carries no witness
strategy by itself: the per-step optimal mixtures can be improper (they may
let the adversary trap the play outside the target).  The fix is the entry
time construction: replay, at each state, the witness recorded at the first
iteration where the state reached its current value.  Under a positivity
hypothesis the resulting selector is proper and achieves the previous
iterate's values.

The dual safety iteration ``w_{i+1} = min([F], Pre1(w_i))`` descends to the
safety value from above; at an exact fixpoint the per-state matrix-game
witnesses form a memoryless optimal safety strategy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

from .matrix import pre1
from .mdp import compute_W2, is_proper, strategy_value_reach
from .model import (
    GameStructure,
    GameError,
    ONE,
    Selector,
    Valuation,
    ZERO,
    indicator,
    make_absorbing,
    uniform_selector,
)


class HypothesisViolation(GameError):
    """A diagnostic check was invoked outside its guaranteed regime."""


class NotAFixpoint(GameError):
    """The supplied valuation does not satisfy the required fixpoint identity."""


@dataclass
class IterationTrace:
    """Record of a reachability value iteration.

    ``valuations[k]`` is the k-th iterate; ``witnesses[k]`` (for k >= 1) is
    the optimal selector that produced it from ``valuations[k-1]``.  The
    trace keeps the normalized game (target and value-zero states absorbing)
    so selectors extracted from it can be evaluated directly.
    """

    game: GameStructure
    target: frozenset[str]
    w2: frozenset[str]
    valuations: list[Valuation] = field(default_factory=list)
    witnesses: list[Selector | None] = field(default_factory=list)
    converged: bool = False

    def entry_time(self, s: str, k: int) -> int:
        """Least j <= k with u_j(s) = u_k(s)."""
        goal = self.valuations[k][s]
        for j in range(k + 1):
            if self.valuations[j][s] == goal:
                return j
        raise AssertionError("unreachable: u_k(s) always equals itself")

    def steps(self) -> int:
        return len(self.valuations) - 1


def reach_value_iteration(
    game: GameStructure,
    T: Iterable[str],
    max_steps: int,
    gap: Fraction | None = None,
    upper: Mapping[str, Fraction] | None = None,
) -> IterationTrace:
    """Iterate ``u_{k+1} = Pre1(u_k)`` from the target indicator.

    Stops at an exact fixpoint (the repeated valuation is kept in the trace
    so equality is visible), after ``max_steps`` applications, or once the
    supplied upper bound is approached within ``gap``.
    """
    target = frozenset(T) & frozenset(game.states)
    w2 = compute_W2(game, target)
    normalized = make_absorbing(game, target | w2)
    trace = IterationTrace(normalized, target, w2)
    u = indicator(normalized, target)
    trace.valuations.append(u)
    trace.witnesses.append(None)
    for _ in range(max_steps):
        nxt, witness = pre1(normalized, u)
        trace.valuations.append(nxt)
        trace.witnesses.append(witness)
        if nxt == u:
            trace.converged = True
            break
        u = nxt
        if gap is not None and upper is not None:
            if max(upper[s] - u[s] for s in normalized.states) <= gap:
                break
    return trace


def extract_eta_selector(trace: IterationTrace, k: int) -> Selector:
    """Entry-time selector for iterate k: at each state, replay the witness
    recorded when the state first reached its current value (uniform for
    states that never moved)."""
    if k >= len(trace.valuations):
        raise GameError(f"trace has {len(trace.valuations)} iterates, need k={k} < that")
    game = trace.game
    fallback = uniform_selector(game)
    choice: dict[str, dict[str, Fraction]] = {}
    for s in game.states:
        ell = trace.entry_time(s, k)
        if ell == 0:
            choice[s] = dict(fallback.choice[s])
        else:
            witness = trace.witnesses[ell]
            assert witness is not None
            choice[s] = dict(witness.choice[s])
    return Selector(1, choice)


def eta_is_value_achieving(
    game: GameStructure,
    trace: IterationTrace,
    k: int,
    T: Iterable[str],
    W2: Iterable[str],
) -> bool:
    """Check that the entry-time selector for iterate k is proper and that
    its exact strategy value dominates iterate k-1 pointwise.

    Only meaningful when ``u_{k-1}`` is positive outside the value-zero
    region; outside that regime a HypothesisViolation is raised instead of
    a misleading boolean.
    """
    if k < 1:
        raise GameError("k must be >= 1")
    w2 = frozenset(W2)
    previous = trace.valuations[k - 1]
    bad = [s for s in trace.game.states if s not in w2 and previous[s] == 0]
    if bad:
        raise HypothesisViolation(
            f"u_{k - 1} vanishes outside the value-zero region at {sorted(bad)}"
        )
    eta = extract_eta_selector(trace, k)
    if not is_proper(trace.game, eta, T, w2):
        return False
    achieved = strategy_value_reach(trace.game, eta, T, w2)
    return all(achieved[s] >= previous[s] for s in trace.game.states)


def safety_value_iteration_upper(
    game: GameStructure, F: Iterable[str], steps: int
) -> list[Valuation]:
    """Descending iteration ``w_{i+1} = min([F], Pre1(w_i))`` from all-ones.

    Every iterate is an upper bound on the safety value; the sequence is
    returned up to ``steps`` applications or an exact fixpoint, whichever
    comes first (the repeated valuation is kept so equality is visible).
    """
    safe = set(F)
    w = {s: ONE for s in game.states}
    out = [dict(w)]
    for _ in range(steps):
        pre_vals, _ = pre1(game, w)
        nxt = {
            s: min(ONE if s in safe else ZERO, pre_vals[s]) for s in game.states
        }
        out.append(nxt)
        if nxt == w:
            break
        w = nxt
    return out


def extract_optimal_safety_selector(
    game: GameStructure, v: Mapping[str, Fraction], F: Iterable[str]
) -> Selector:
    """Memoryless optimal safety strategy from a safety fixpoint valuation.

    Requires, on the game with unsafe states absorbing, v = Pre1(v) exactly
    and v = 0 outside F; the per-state optimal matrix-game mixtures then
    guarantee Safe(F) with probability at least v.
    """
    safe = set(F)
    frozen = make_absorbing(game, set(game.states) - safe)
    for s in game.states:
        if s not in safe and v[s] != 0:
            raise NotAFixpoint(f"v({s!r}) = {v[s]} but {s!r} is unsafe")
    pre_vals, witness = pre1(frozen, v)
    mismatch = [s for s in game.states if pre_vals[s] != v[s]]
    if mismatch:
        raise NotAFixpoint(
            f"Pre1(v) differs from v at {sorted(mismatch)}; not a safety fixpoint"
        )
    return witness
