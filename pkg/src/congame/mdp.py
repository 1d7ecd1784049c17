"""Analysis of the MDPs obtained by fixing one player's memoryless strategy.

Fixing a player-1 selector turns a concurrent game into a player-2 MDP.
Everything the improvement algorithms need from that MDP lives here: exact
maximal reachability values (linear program over rationals), maximal end
component decomposition, properness checks, and the qualitative winning-set
computations (value-zero states for reachability, almost-sure safety, and
the attractor construction on turn-based games).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

from .linprog import GEQ, solve_lp
from .model import (
    GameStructure,
    GameError,
    ONE,
    P1,
    P2,
    Selector,
    TurnBasedGame,
    ZERO,
    make_absorbing,
)


@dataclass(frozen=True)
class InducedMDP:
    """Player-2 MDP obtained by mixing player 1's moves with a selector."""

    states: tuple[str, ...]
    actions: dict[str, tuple[str, ...]]
    delta2: dict[tuple[str, str], dict[str, Fraction]]

    def dest(self, s: str, b: str) -> frozenset[str]:
        return frozenset(t for t, p in self.delta2[(s, b)].items() if p > 0)


def induce_mdp(game: GameStructure, xi1: Selector) -> InducedMDP:
    """Mixture transition function: delta2(s, b) = sum_a delta(s, a, b) xi1(s)(a)."""
    actions = {s: game.moves2[s] for s in game.states}
    delta2: dict[tuple[str, str], dict[str, Fraction]] = {}
    for s in game.states:
        mix = xi1.choice[s]
        for b in game.moves2[s]:
            dist: dict[str, Fraction] = {}
            for a, pa in mix.items():
                if pa == 0:
                    continue
                for t, p in game.delta[(s, a, b)].items():
                    if p == 0:
                        continue
                    dist[t] = dist.get(t, ZERO) + pa * p
            delta2[(s, b)] = dist
    return InducedMDP(game.states, actions, delta2)


@dataclass(frozen=True)
class EndComponent:
    states: frozenset[str]
    actions: dict[str, tuple[str, ...]]


@dataclass(frozen=True)
class EndComponentSet:
    components: tuple[EndComponent, ...]

    def state_sets(self) -> list[frozenset[str]]:
        return [c.states for c in self.components]


def _sccs(nodes: list[str], succ: Mapping[str, Iterable[str]]) -> list[list[str]]:
    """Tarjan's strongly connected components, iterative."""
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    out: list[list[str]] = []
    counter = 0
    for root in nodes:
        if root in index:
            continue
        work = [(root, iter(succ[root]))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            node, it = work[-1]
            advanced = False
            for nxt in it:
                if nxt not in index:
                    index[nxt] = low[nxt] = counter
                    counter += 1
                    stack.append(nxt)
                    on_stack.add(nxt)
                    work.append((nxt, iter(succ[nxt])))
                    advanced = True
                    break
                if nxt in on_stack:
                    low[node] = min(low[node], index[nxt])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                comp = []
                while True:
                    top = stack.pop()
                    on_stack.discard(top)
                    comp.append(top)
                    if top == node:
                        break
                out.append(comp)
    return out


def mec_decomposition(mdp: InducedMDP) -> EndComponentSet:
    """All maximal end components, by iterative SCC pruning."""
    order = {s: i for i, s in enumerate(mdp.states)}
    found: list[EndComponent] = []
    work: list[frozenset[str]] = [frozenset(mdp.states)]
    while work:
        candidate = work.pop()
        while True:
            allowed = {
                s: tuple(b for b in mdp.actions[s] if mdp.dest(s, b) <= candidate)
                for s in candidate
            }
            dead = {s for s in candidate if not allowed[s]}
            if not dead:
                break
            candidate = candidate - dead
        if not candidate:
            continue
        nodes = sorted(candidate, key=order.__getitem__)
        succ = {
            s: sorted(
                {t for b in allowed[s] for t in mdp.dest(s, b)},
                key=order.__getitem__,
            )
            for s in nodes
        }
        comps = _sccs(nodes, succ)
        if len(comps) == 1 and len(comps[0]) == len(candidate):
            found.append(EndComponent(candidate, allowed))
        else:
            for comp in comps:
                work.append(frozenset(comp))
    found.sort(key=lambda c: sorted(c.states))
    return EndComponentSet(tuple(found))


def max_reach_values(mdp: InducedMDP, targets: Iterable[str]) -> dict[str, Fraction]:
    """Exact maximal probabilities of reaching ``targets``.

    Least solution of the standard reachability linear program; states with
    no path to the target are fixed to zero first, which keeps the program
    small and its optimum unique.
    """
    targets = set(targets) & set(mdp.states)
    # Backward reachability: which states have any path into the target.
    pred: dict[str, set[str]] = {s: set() for s in mdp.states}
    for s in mdp.states:
        for b in mdp.actions[s]:
            for t in mdp.dest(s, b):
                pred[t].add(s)
    can_reach = set(targets)
    frontier = list(targets)
    while frontier:
        t = frontier.pop()
        for s in pred[t]:
            if s not in can_reach:
                can_reach.add(s)
                frontier.append(s)
    values: dict[str, Fraction] = {}
    for s in mdp.states:
        if s in targets:
            values[s] = ONE
        elif s not in can_reach:
            values[s] = ZERO
    free = [s for s in mdp.states if s not in values]
    if not free:
        return values
    col = {s: i for i, s in enumerate(free)}
    n = len(free)
    rows = []
    senses = []
    rhs = []
    for s in free:
        for b in mdp.actions[s]:
            row = [ZERO] * n
            row[col[s]] = ONE
            shift = ZERO
            for t, p in mdp.delta2[(s, b)].items():
                if p == 0:
                    continue
                if t in col:
                    row[col[t]] -= p
                else:
                    shift += p * values[t]
            rows.append(row)
            senses.append(GEQ)
            rhs.append(shift)
    objective = [ONE] * n
    _, point = solve_lp(objective, rows, senses, rhs, maximize=False)
    for s, i in col.items():
        values[s] = point[i]
    return values


class ImproperSelectorError(GameError):
    """Raised when an operation that needs a proper selector gets one whose
    induced MDP has an end component trapped outside the target and the
    value-zero region.  Carries the trapped component."""

    def __init__(self, witness: frozenset[str]):
        super().__init__(f"selector is not proper; trapped end component {sorted(witness)}")
        self.witness = witness


def improper_witness(
    game: GameStructure, xi1: Selector, T: Iterable[str], W2: Iterable[str]
) -> frozenset[str] | None:
    """First maximal end component of the induced MDP that avoids T and W2,
    or None if the selector is proper.  T and W2 must be absorbing."""
    done = set(T) | set(W2)
    mecs = mec_decomposition(induce_mdp(game, xi1))
    for component in mecs.components:
        if not (component.states & done):
            return component.states
    return None


def is_proper(game: GameStructure, xi1: Selector, T: Iterable[str], W2: Iterable[str]) -> bool:
    return improper_witness(game, xi1, T, W2) is None


def compute_W2(game: GameStructure, T: Iterable[str]) -> frozenset[str]:
    """States of reachability value zero for player 1.

    Greatest fixpoint inside S minus T of "player 2 has a move confining the
    game, whatever player 1 does"; stabilizes within |S| rounds.
    """
    target = set(T)
    current = set(game.states) - target
    while True:
        nxt = set()
        for s in current:
            for b in game.moves2[s]:
                if all(game.dest(s, a, b) <= current for a in game.moves1[s]):
                    nxt.add(s)
                    break
        if nxt == current:
            return frozenset(current)
        current = nxt


def almost_sure_safe_concurrent(game: GameStructure, F: Iterable[str]) -> frozenset[str]:
    """States where player 1 wins Safe(F) with probability one.

    Greatest fixpoint of "some player-1 move keeps the game inside, whatever
    player 2 answers".  If every move of player 1 leaks outside against some
    answer, any mixture leaks with positive probability too, so pruning such
    states is sound; the surviving set is exactly the value-1 region.
    """
    return almost_sure_safe_strategy(game, F)[0]


def almost_sure_safe_strategy(
    game: GameStructure, F: Iterable[str]
) -> tuple[frozenset[str], dict[str, str]]:
    """Value-1 region for Safe(F) together with a pure winning choice: at
    each winning state, the first move all of whose responses stay inside."""
    current = set(F) & set(game.states)
    witness: dict[str, str] = {}
    while True:
        nxt = set()
        witness.clear()
        for s in current:
            for a in game.moves1[s]:
                if all(game.dest(s, a, b) <= current for b in game.moves2[s]):
                    nxt.add(s)
                    witness[s] = a
                    break
        if nxt == current:
            return frozenset(current), witness
        current = nxt


def tb_attractor(
    tb: TurnBasedGame, base: Iterable[str]
) -> tuple[list[frozenset[str]], dict[str, str]]:
    """Positive-probability attractor of ``base`` for player 1.

    Returns the level sets up to stabilization and the pure selector that
    moves each newly attracted player-1 state into the previous level.
    """
    attracted = set(base) & set(tb.states)
    levels = [frozenset(attracted)]
    selector: dict[str, str] = {}
    while True:
        added = []
        for s in tb.states:
            if s in attracted:
                continue
            kind = tb.partition[s]
            succ = tb.edges[s]
            if kind == P2:
                if all(t in attracted for t in succ):
                    added.append(s)
            else:
                if any(t in attracted for t in succ):
                    added.append(s)
                    if kind == P1:
                        selector[s] = next(t for t in succ if t in attracted)
        if not added:
            return levels, selector
        attracted |= set(added)
        levels.append(frozenset(attracted))


def tb_almost_sure_safe(
    tb: TurnBasedGame, safe: Iterable[str]
) -> tuple[frozenset[str], dict[str, str]]:
    """Almost-sure winning states for Safe(safe) in a turn-based game.

    Iterative pruning: a player-1 state survives while it has a surviving
    successor; player-2 and random states survive only if all successors
    do.  The returned strategy sends each surviving player-1 state to its
    first surviving successor in input order.
    """
    alive = set(safe) & set(tb.states)
    while True:
        kept = set()
        for s in alive:
            succ = tb.edges[s]
            if tb.partition[s] == P1:
                if any(t in alive for t in succ):
                    kept.add(s)
            else:
                if all(t in alive for t in succ):
                    kept.add(s)
        if kept == alive:
            break
        alive = kept
    strategy = {
        s: next(t for t in tb.edges[s] if t in alive)
        for s in alive
        if tb.partition[s] == P1
    }
    return frozenset(alive), strategy


def strategy_value_safety(
    game: GameStructure, xi1: Selector, F: Iterable[str]
) -> dict[str, Fraction]:
    """Exact value of Safe(F) under the memoryless strategy of ``xi1``:
    one minus the adversary's maximal probability of reaching the unsafe set."""
    unsafe = set(game.states) - set(F)
    frozen = make_absorbing(game, unsafe)
    reach = max_reach_values(induce_mdp(frozen, xi1), unsafe)
    return {s: ONE - reach[s] for s in game.states}


def strategy_value_reach(
    game: GameStructure, xi1: Selector, T: Iterable[str], W2: Iterable[str]
) -> dict[str, Fraction]:
    """Exact value of Reach(T) under a proper selector.

    Against a proper selector the adversary's best response maximizes the
    probability of reaching the value-zero region, so the value is one minus
    that maximal probability.  Improper selectors are rejected with the
    trapped end component as witness, because the identity fails for them.
    """
    T = set(T)
    W2 = set(W2)
    frozen = make_absorbing(game, T | W2)
    witness = improper_witness(frozen, xi1, T, W2)
    if witness is not None:
        raise ImproperSelectorError(witness)
    reach = max_reach_values(induce_mdp(frozen, xi1), W2)
    return {s: ONE - reach[s] for s in game.states}
