"""Strategy improvement for concurrent safety games.

Local one-step improvement alone does not converge to safety values: the
adversary can be indifferent among all successors of a state while a better
strategy exists (it only pays off once the adversary is forced to commit).
The fix is a non-local step.  When no state improves locally, build a
turn-based game in which player 1 picks a (support, counter-move-set) pair
of an optimal mixture at each state and player 2 is restricted to the
counter-optimal responses of that mixture; the almost-sure safe region of
this game marks the states where switching mixtures forces the adversary to
concede, and the stored mixture witnesses become the new selector there.

Even with the non-local step the plain loop may converge below the value.
The convergent variant restricts each round to k-uniform mixtures (finitely
many, so each inner run terminates at the exact k-uniform optimum) and
grows k; the resulting outer sequence of strategy values rises to the value
of the game.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .linprog import EQ, GEQ, LPInfeasible, solve_lp
from .matrix import (
    MatrixGame,
    enumerate_k_uniform,
    one_step_matrix,
    pre1,
    pre1_k,
    solve_matrix_game,
)
from .mdp import (
    almost_sure_safe_strategy,
    strategy_value_safety,
    tb_almost_sure_safe,
)
from .model import (
    GameStructure,
    GameError,
    ONE,
    P1,
    P2,
    RANDOM,
    Selector,
    TurnBasedGame,
    Valuation,
    ZERO,
    make_absorbing,
    uniform_selector,
)
from .reach_si import STATUS_CAPPED, STATUS_EPS, STATUS_EXACT


@dataclass(frozen=True)
class SupportPair:
    """A feasible (support, counter-move-set) pair at a state.

    ``witness`` is a player-1 mixture with support exactly ``A`` achieving
    the one-step optimum at the state; ``B`` is exactly the set of player-2
    moves that hold it to that optimum (all others strictly exceed it).
    """

    state: str
    A: tuple[str, ...]
    B: tuple[str, ...]
    witness: dict[str, Fraction]


def _nonempty_subsets(items: Sequence[str]) -> list[tuple[str, ...]]:
    out = []
    for size in range(1, len(items) + 1):
        out.extend(itertools.combinations(items, size))
    return out


def _column_values(matrix: MatrixGame, mix: Mapping[str, Fraction]) -> dict[str, Fraction]:
    weights = [mix.get(a, ZERO) for a in matrix.rows]
    return {
        b: sum((w * matrix.payoff[i][j] for i, w in enumerate(weights) if w), ZERO)
        for j, b in enumerate(matrix.cols)
    }


def _feasible_unrestricted(
    matrix: MatrixGame, target: Fraction, A: tuple[str, ...], B: tuple[str, ...]
) -> dict[str, Fraction] | None:
    """Maximize a shared slack below the support probabilities and above the
    strict inequalities; a positive optimum is exactly strict feasibility."""
    a_index = {a: i for i, a in enumerate(A)}
    n = len(A) + 1  # mixture over A plus the slack variable
    t_col = len(A)
    rows: list[list[Fraction]] = []
    senses: list[str] = []
    rhs: list[Fraction] = []
    for i in range(len(A)):
        row = [ZERO] * n
        row[i] = ONE
        row[t_col] = -ONE
        rows.append(row)
        senses.append(GEQ)
        rhs.append(ZERO)
    rows.append([ONE] * len(A) + [ZERO])
    senses.append(EQ)
    rhs.append(ONE)
    b_set = set(B)
    for j, b in enumerate(matrix.cols):
        row = [matrix.payoff[matrix.rows.index(a)][j] for a in A]
        if b in b_set:
            rows.append(row + [ZERO])
            senses.append(EQ)
            rhs.append(target)
        else:
            rows.append(row + [-ONE])
            senses.append(GEQ)
            rhs.append(target)
    objective = [ZERO] * len(A) + [ONE]
    try:
        slack, point = solve_lp(objective, rows, senses, rhs, maximize=True)
    except LPInfeasible:
        return None
    if slack <= 0:
        return None
    return {a: point[a_index[a]] for a in A}


def _k_uniform_pairs(
    game: GameStructure, v: Mapping[str, Fraction], s: str, k: int
) -> dict[tuple[tuple[str, ...], tuple[str, ...]], dict[str, Fraction]]:
    """All (support, counter-set) pairs realizable by k-uniform optimal
    mixtures at ``s``, each with the first witness in enumeration order."""
    matrix = one_step_matrix(game, v, s)
    target, _ = pre1_k(game, v, s, k)
    moves = game.moves1[s]
    out: dict[tuple[tuple[str, ...], tuple[str, ...]], dict[str, Fraction]] = {}
    for dist in enumerate_k_uniform(len(moves), k):
        mix = {a: p for a, p in zip(moves, dist) if p > 0}
        cols = _column_values(matrix, mix)
        if min(cols.values()) != target:
            continue
        support = tuple(a for a in moves if mix.get(a, ZERO) > 0)
        counter = tuple(b for b in matrix.cols if cols[b] == target)
        key = (support, counter)
        if key not in out:
            out[key] = mix
    return out


def opt_sel_feasible(
    game: GameStructure,
    v: Mapping[str, Fraction],
    s: str,
    A: Iterable[str],
    B: Iterable[str],
    k: int | None = None,
) -> SupportPair | None:
    """Witness an optimal mixture at ``s`` with support exactly A whose
    counter-optimal move set is exactly B, or None if there is none.

    Unrestricted mixtures are decided by a slack linear program; k-uniform
    mixtures by enumeration against the k-restricted one-step optimum.
    """
    moves1, moves2 = game.moves1[s], game.moves2[s]
    A = tuple(a for a in moves1 if a in set(A))
    B = tuple(b for b in moves2 if b in set(B))
    if not A or not B:
        raise GameError("support and counter set must be nonempty subsets")
    if k is None:
        matrix = one_step_matrix(game, v, s)
        target = solve_matrix_game(matrix).value
        witness = _feasible_unrestricted(matrix, target, A, B)
        if witness is None:
            return None
        return SupportPair(s, A, B, witness)
    pairs = _k_uniform_pairs(game, v, s, k)
    witness = pairs.get((A, B))
    if witness is None:
        return None
    return SupportPair(s, A, B, witness)


def opt_sel_count(
    game: GameStructure, v: Mapping[str, Fraction], s: str, k: int | None = None
) -> list[SupportPair]:
    """All feasible (support, counter-set) pairs at ``s``, in subset order
    (by size, then position), each with a stored witness mixture."""
    subsets_a = _nonempty_subsets(game.moves1[s])
    subsets_b = _nonempty_subsets(game.moves2[s])
    out: list[SupportPair] = []
    if k is None:
        matrix = one_step_matrix(game, v, s)
        target = solve_matrix_game(matrix).value
        for A in subsets_a:
            for B in subsets_b:
                witness = _feasible_unrestricted(matrix, target, A, B)
                if witness is not None:
                    out.append(SupportPair(s, A, B, witness))
        return out
    pairs = _k_uniform_pairs(game, v, s, k)
    for A in subsets_a:
        for B in subsets_b:
            witness = pairs.get((A, B))
            if witness is not None:
                out.append(SupportPair(s, A, B, witness))
    return out


@dataclass
class TBReduction:
    """Turn-based game over (state, support, counter-set) choices.

    ``back_map`` sends each turn-based state to its origin; ``witness_store``
    keeps the optimal mixture backing every player-1 choice so the improved
    selector can be read off an almost-sure winning strategy.
    """

    game: TurnBasedGame
    safe_bar: frozenset[str]
    back_map: dict[str, tuple]
    witness_store: dict[tuple[str, tuple[str, ...], tuple[str, ...]], dict[str, Fraction]]


def _pair_node(s: str, A: tuple[str, ...], B: tuple[str, ...]) -> str:
    return f"{s}/[{'+'.join(A)}]/[{'+'.join(B)}]"


def _resp_node(s: str, A: tuple[str, ...], b: str) -> str:
    return f"{s}/[{'+'.join(A)}]/{b}"


def tb_reduction(
    game: GameStructure, v: Mapping[str, Fraction], F: Iterable[str], k: int | None = None
) -> TBReduction:
    """Build the turn-based game of optimal-support choices under ``v``.

    Player 1 picks a feasible (support, counter-set) pair at each original
    state; player 2 then picks a move from the counter set; a uniform random
    state spreads over every successor the supported moves can produce
    against that response.
    """
    safe = set(F)
    order = {t: i for i, t in enumerate(game.states)}
    states: list[str] = list(game.states)
    partition: dict[str, str] = {s: P1 for s in game.states}
    edges: dict[str, tuple[str, ...]] = {}
    prob: dict[str, dict[str, Fraction]] = {}
    back_map: dict[str, tuple] = {s: ("state", s) for s in game.states}
    witness_store: dict[tuple[str, tuple[str, ...], tuple[str, ...]], dict[str, Fraction]] = {}
    safe_bar: set[str] = {s for s in game.states if s in safe}
    for s in game.states:
        pair_nodes = []
        for pair in opt_sel_count(game, v, s, k):
            node = _pair_node(s, pair.A, pair.B)
            pair_nodes.append(node)
            states.append(node)
            partition[node] = P2
            back_map[node] = ("pair", s, pair.A, pair.B)
            witness_store[(s, pair.A, pair.B)] = pair.witness
            if s in safe:
                safe_bar.add(node)
            resp_nodes = []
            for b in pair.B:
                resp = _resp_node(s, pair.A, b)
                resp_nodes.append(resp)
                if resp in partition:
                    # (state, support, response) nodes are shared between
                    # pairs with the same support.
                    continue
                states.append(resp)
                partition[resp] = RANDOM
                back_map[resp] = ("resp", s, pair.A, b)
                if s in safe:
                    safe_bar.add(resp)
                successors: set[str] = set()
                for a in pair.A:
                    successors |= game.dest(s, a, b)
                ordered = sorted(successors, key=order.__getitem__)
                edges[resp] = tuple(ordered)
                share = Fraction(1, len(ordered))
                prob[resp] = {t: share for t in ordered}
            edges[node] = tuple(resp_nodes)
        edges[s] = tuple(pair_nodes)
    tb = TurnBasedGame(tuple(states), partition, edges, prob)
    return TBReduction(tb, frozenset(safe_bar), back_map, witness_store)


@dataclass
class SafetySIState:
    iteration: int
    selector: Selector
    valuation: Valuation
    improve_set: frozenset[str]
    nonlocal_set: frozenset[str]
    finished: bool
    fired_nonlocal: bool
    history: list[tuple[Selector, Valuation]] = field(default_factory=list)


def _replace(selector: Selector, updates: Mapping[str, Mapping[str, Fraction]]) -> Selector:
    choice = {
        s: dict(updates[s]) if s in updates else dict(selector.choice[s])
        for s in selector.choice
    }
    return Selector(1, choice)


def safety_si_step(
    game: GameStructure,
    state: SafetySIState,
    F: Iterable[str],
    W1: Iterable[str],
    k: int | None = None,
) -> SafetySIState:
    """One round of safety improvement on a normalized game (W1 and the
    unsafe states absorbing).

    Tries the local step first (rewrite where the one-step optimum strictly
    beats the value); otherwise plays the non-local step through the
    turn-based reduction.  ``k`` restricts every mixture considered to
    k-uniform ones.
    """
    safe = set(F)
    done = set(W1) | (set(game.states) - safe)
    v = state.valuation
    if k is None:
        pre_vals, witness = pre1(game, v)
        local_witness = {s: witness.choice[s] for s in game.states}
    else:
        pre_vals = {}
        local_witness = {}
        for s in game.states:
            pre_vals[s], local_witness[s] = pre1_k(game, v, s, k)
    improvable = frozenset(
        s for s in game.states if s not in done and pre_vals[s] > v[s]
    )
    history = state.history + [(state.selector, v)]
    if improvable:
        nxt = _replace(state.selector, {s: local_witness[s] for s in improvable})
        value = strategy_value_safety(game, nxt, safe)
        for s in game.states:
            if value[s] < v[s]:
                raise AssertionError(f"safety improvement regressed at {s!r}")
        for s in improvable:
            if not value[s] > v[s]:
                raise AssertionError(f"no strict local improvement at {s!r}")
        return SafetySIState(
            state.iteration + 1, nxt, value, improvable, frozenset(), False, False, history
        )
    reduction = tb_reduction(game, v, safe, k)
    winning, tb_strategy = tb_almost_sure_safe(reduction.game, reduction.safe_bar)
    switchable = frozenset(
        s for s in game.states if s in winning and s not in set(W1) and s in safe
    )
    if not switchable:
        return SafetySIState(
            state.iteration + 1,
            state.selector,
            v,
            frozenset(),
            frozenset(),
            True,
            False,
            history,
        )
    updates = {}
    for s in switchable:
        chosen = reduction.back_map[tb_strategy[s]]
        _, _, A, B = chosen
        updates[s] = reduction.witness_store[(s, A, B)]
    nxt = _replace(state.selector, updates)
    value = strategy_value_safety(game, nxt, safe)
    for s in game.states:
        if value[s] < v[s]:
            raise AssertionError(f"non-local safety improvement regressed at {s!r}")
    if not any(value[s] > v[s] for s in switchable):
        raise AssertionError("non-local step produced no strict improvement")
    return SafetySIState(
        state.iteration + 1, nxt, value, frozenset(), switchable, False, True, history
    )


@dataclass
class SafetySIResult:
    valuations: list[Valuation]
    final_selector: Selector
    status: str
    iterations: int
    fired_nonlocal: bool
    game: GameStructure
    w1: frozenset[str]

    @property
    def values(self) -> Valuation:
        return self.valuations[-1]


@dataclass(frozen=True)
class SafetyContext:
    """Normalized game (value-1 region and unsafe states absorbing) plus the
    pure winning choices on the value-1 region, used to turn selectors for
    the normalized game back into strategies for the original one."""

    game: GameStructure
    w1: frozenset[str]
    safe: set[str]
    w1_actions: dict[str, str]

    def portable(self, selector: Selector) -> Selector:
        """Overwrite the selector on the value-1 region with the winning
        choice; values on the normalized game are unchanged (those states
        are absorbing there) and the result achieves its valuation on the
        original game as well."""
        choice = {s: dict(d) for s, d in selector.choice.items()}
        for s, a in self.w1_actions.items():
            choice[s] = {a: ONE}
        return Selector(1, choice)


def _normalize_safety(game: GameStructure, F: Iterable[str]) -> SafetyContext:
    safe = set(F) & set(game.states)
    w1, w1_actions = almost_sure_safe_strategy(game, safe)
    unsafe = set(game.states) - safe
    normalized = make_absorbing(game, w1 | unsafe)
    return SafetyContext(normalized, w1, safe, w1_actions)


def run_safety_si(game: GameStructure, F: Iterable[str], max_iters: int = 100) -> SafetySIResult:
    """Safety strategy improvement from the uniform selector.

    Monotone; a natural stop (neither step can move) certifies the exact
    value, but on genuinely concurrent games the loop may improve forever,
    so the iteration cap flags a partial trace instead.
    """
    ctx = _normalize_safety(game, F)
    normalized, w1, safe = ctx.game, ctx.w1, ctx.safe
    selector = uniform_selector(normalized)
    value = strategy_value_safety(normalized, selector, safe)
    state = SafetySIState(0, selector, value, frozenset(), frozenset(), False, False)
    valuations = [value]
    fired = False
    status = STATUS_CAPPED
    iterations = 0
    while iterations < max_iters:
        iterations += 1
        state = safety_si_step(normalized, state, safe, w1)
        fired = fired or state.fired_nonlocal
        if state.finished:
            status = STATUS_EXACT
            break
        valuations.append(state.valuation)
    return SafetySIResult(
        valuations, ctx.portable(state.selector), status, iterations, fired, normalized, w1
    )


def round_to_k_uniform(
    dist: Mapping[str, Fraction], eta: Fraction
) -> tuple[int, dict[str, Fraction]]:
    """Round a positive distribution to one with a small common denominator.

    Rounds each probability up to the next multiple of 1/l for
    l = ceil(m / (eta * c)) (m the support size, c the least probability),
    then renormalizes.  Both ratio distortions old/new and new/old stay
    within 1 + eta, and the returned denominator bound k is the exact common
    denominator of the result.
    """
    if eta <= 0:
        raise GameError("eta must be positive")
    items = [(a, p) for a, p in dist.items() if p != 0]
    if any(p < 0 for _, p in items):
        raise GameError("distribution must be positive on its support")
    if sum((p for _, p in items), ZERO) != 1:
        raise GameError("distribution must sum to 1")
    m = len(items)
    if m == 1:
        return 1, {items[0][0]: ONE}
    c = min(p for _, p in items)
    ratio = Fraction(m) / (eta * c)
    ell = -((-ratio.numerator) // ratio.denominator)  # ceil
    numerators = {a: -((-(p * ell).numerator) // (p * ell).denominator) for a, p in items}
    total = sum(numerators.values())
    rounded = {a: Fraction(n, total) for a, n in numerators.items()}
    for a, p in items:
        q = rounded[a]
        if p / q > 1 + eta or q / p > 1 + eta:
            raise AssertionError(f"rounding bound violated at {a!r}: {p} -> {q}")
    return total, rounded


@dataclass
class KUniformResult:
    values: Valuation
    selector: Selector
    iterations: int
    fired_nonlocal: bool
    k: int
    game: GameStructure
    w1: frozenset[str]


def run_k_uniform_si(
    game: GameStructure,
    F: Iterable[str],
    k: int,
    max_iters: int = 10_000,
    _context: "SafetyContext | None" = None,
) -> KUniformResult:
    """Safety improvement restricted to k-uniform mixtures.

    k is raised to the total number of moves so the uniform start is itself
    k-uniform.  Values rise strictly whenever the selector changes and the
    k-uniform selectors are finite, so the loop terminates; the fixpoint is
    the exact optimum over k-uniform memoryless strategies.
    """
    if k < 1:
        raise GameError("k must be >= 1")
    ctx = _context if _context is not None else _normalize_safety(game, F)
    normalized, w1, safe = ctx.game, ctx.w1, ctx.safe
    k = max(k, len(game.moves))
    selector = uniform_selector(normalized)
    value = strategy_value_safety(normalized, selector, safe)
    state = SafetySIState(0, selector, value, frozenset(), frozenset(), False, False)
    fired = False
    iterations = 0
    while True:
        if iterations >= max_iters:
            raise RuntimeError("k-uniform improvement failed to terminate within budget")
        iterations += 1
        previous = state.valuation
        state = safety_si_step(normalized, state, safe, w1, k=k)
        fired = fired or state.fired_nonlocal
        if state.finished:
            break
        if not any(state.valuation[s] > previous[s] for s in normalized.states):
            raise AssertionError("k-uniform step changed nothing but did not finish")
    return KUniformResult(
        state.valuation, ctx.portable(state.selector), iterations, fired, k, normalized, w1
    )


class ConvergentSafetyRunner:
    """Outer loop growing k: each step runs the k-uniform improvement to its
    fixpoint, records its exact strategy value, and tests the unrestricted
    stopping condition (no local improvement and an empty non-local set)."""

    def __init__(self, game: GameStructure, F: Iterable[str]):
        self.original = game
        self.context = _normalize_safety(game, F)
        self.normalized = self.context.game
        self.w1 = self.context.w1
        self.safe = self.context.safe
        self.k = max(1, len(game.moves))
        self.valuations: list[Valuation] = []
        self.selectors: list[Selector] = []
        self.inner_fired: list[bool] = []
        self.ks: list[int] = []
        self.finished = False
        self.iterations = 0

    @property
    def values(self) -> Valuation | None:
        return self.valuations[-1] if self.valuations else None

    @property
    def selector(self) -> Selector | None:
        return self.selectors[-1] if self.selectors else None

    def step(self) -> bool:
        """One outer round; returns True while progress is possible."""
        if self.finished:
            return False
        self.iterations += 1
        inner = run_k_uniform_si(
            self.original,
            self.safe,
            self.k,
            _context=self.context,
        )
        if self.valuations:
            previous = self.valuations[-1]
            for s in self.normalized.states:
                if inner.values[s] < previous[s]:
                    raise AssertionError(f"outer sequence regressed at {s!r}")
        self.valuations.append(inner.values)
        self.selectors.append(inner.selector)
        self.inner_fired.append(inner.fired_nonlocal)
        self.ks.append(inner.k)
        v = inner.values
        done = self.w1 | (set(self.normalized.states) - self.safe)
        pre_vals, _ = pre1(self.normalized, v)
        local = any(
            pre_vals[s] > v[s] for s in self.normalized.states if s not in done
        )
        if not local:
            reduction = tb_reduction(self.normalized, v, self.safe)
            winning, _ = tb_almost_sure_safe(reduction.game, reduction.safe_bar)
            pending = {
                s
                for s in self.normalized.states
                if s in winning and s not in self.w1 and s in self.safe
            }
            if not pending:
                self.finished = True
        self.k += 1
        return not self.finished


@dataclass
class ConvergentResult:
    valuations: list[Valuation]
    selectors: list[Selector]
    inner_fired: list[bool]
    ks: list[int]
    status: str
    iterations: int
    game: GameStructure
    w1: frozenset[str]

    @property
    def values(self) -> Valuation:
        return self.valuations[-1]

    @property
    def final_selector(self) -> Selector:
        return self.selectors[-1]


# Public name for the normalization used by every safety solver.
normalize_safety = _normalize_safety


def run_convergent_safety_si(
    game: GameStructure,
    F: Iterable[str],
    max_outer: int = 50,
    eps: Fraction | None = None,
    upper: Mapping[str, Fraction] | None = None,
) -> ConvergentResult:
    """Convergent safety improvement: k-uniform fixpoints for growing k.

    Stops naturally when the unrestricted condition certifies optimality,
    or at the optional gap against a supplied upper bound, or at the cap.
    """
    runner = ConvergentSafetyRunner(game, F)
    status = STATUS_CAPPED
    while runner.iterations < max_outer:
        runner.step()
        if runner.finished:
            status = STATUS_EXACT
            break
        if eps is not None and upper is not None:
            v = runner.values
            assert v is not None
            if max(upper[s] - v[s] for s in runner.normalized.states) <= eps:
                status = STATUS_EPS
                break
    return ConvergentResult(
        runner.valuations,
        runner.selectors,
        runner.inner_fired,
        runner.ks,
        status,
        runner.iterations,
        runner.normalized,
        runner.w1,
    )
