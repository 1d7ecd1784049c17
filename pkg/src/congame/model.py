"""Core data model for two-player concurrent stochastic games.

A concurrent game has a finite state space; at every round both players
pick a move simultaneously and the pair selects a probability distribution
over successor states.  Turn-based stochastic games (player-1 / player-2 /
random partitioned graphs) are supported natively and can be embedded into
the concurrent representation.

All probabilities and values are exact `fractions.Fraction` objects.  The
solvers depend on exact equality tests (fixpoint detection, value classes,
optimal-selector membership), so nothing in this package ever touches
floating point.

Objects are immutable after construction and safe to share.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

Valuation = dict[str, Fraction]

P1 = "P1"
P2 = "P2"
RANDOM = "R"

ZERO = Fraction(0)
ONE = Fraction(1)


class GameError(ValueError):
    """Structural problem in a game, selector, or valuation."""


def _check_distribution(dist: Mapping[str, Fraction], where: str) -> None:
    total = ZERO
    for key, p in dist.items():
        if not isinstance(p, Fraction):
            raise GameError(f"{where}: probability of {key!r} is not an exact rational")
        if p < 0:
            raise GameError(f"{where}: negative probability {p} for {key!r}")
        total += p
    if total != 1:
        raise GameError(f"{where}: probabilities sum to {total}, expected 1")


@dataclass(frozen=True)
class GameStructure:
    """Finite concurrent game structure.

    ``moves1[s]`` / ``moves2[s]`` are the nonempty move sets available to
    each player at ``s`` (input order is preserved and used for all
    deterministic tie-breaking).  ``delta[(s, a, b)]`` is the successor
    distribution, defined for exactly the pairs in ``moves1[s] x moves2[s]``.
    """

    states: tuple[str, ...]
    moves: tuple[str, ...]
    moves1: dict[str, tuple[str, ...]]
    moves2: dict[str, tuple[str, ...]]
    delta: dict[tuple[str, str, str], dict[str, Fraction]]

    def __post_init__(self) -> None:
        known = set(self.states)
        if len(known) != len(self.states):
            raise GameError("duplicate state ids")
        move_pool = set(self.moves)
        for s in self.states:
            for player, assignment in ((1, self.moves1), (2, self.moves2)):
                if s not in assignment or not assignment[s]:
                    raise GameError(f"state {s!r}: empty move set for player {player}")
                for a in assignment[s]:
                    if a not in move_pool:
                        raise GameError(f"state {s!r}: move {a!r} not declared")
        expected = set()
        for s in self.states:
            for a in self.moves1[s]:
                for b in self.moves2[s]:
                    expected.add((s, a, b))
                    if (s, a, b) not in self.delta:
                        raise GameError(f"missing transition for ({s!r}, {a!r}, {b!r})")
        for key in self.delta:
            if key not in expected:
                raise GameError(f"transition {key!r} outside the move assignments")
        for (s, a, b), dist in self.delta.items():
            for t in dist:
                if t not in known:
                    raise GameError(f"({s!r}, {a!r}, {b!r}): unknown successor {t!r}")
            _check_distribution(dist, f"delta({s!r}, {a!r}, {b!r})")

    def dest(self, s: str, a: str, b: str) -> frozenset[str]:
        """Support of delta(s, a, b)."""
        return frozenset(t for t, p in self.delta[(s, a, b)].items() if p > 0)

    def is_absorbing(self, s: str) -> bool:
        return all(
            self.delta[(s, a, b)].get(s, ZERO) == 1
            for a in self.moves1[s]
            for b in self.moves2[s]
        )

    def state_set(self) -> frozenset[str]:
        return frozenset(self.states)


@dataclass(frozen=True)
class TurnBasedGame:
    """Turn-based stochastic game: a graph partitioned into P1/P2/random states.

    Random states carry a successor distribution supported exactly on their
    edge set; player states pick a successor edge.
    """

    states: tuple[str, ...]
    partition: dict[str, str]
    edges: dict[str, tuple[str, ...]]
    prob: dict[str, dict[str, Fraction]]

    def __post_init__(self) -> None:
        known = set(self.states)
        if len(known) != len(self.states):
            raise GameError("duplicate state ids")
        for s in self.states:
            kind = self.partition.get(s)
            if kind not in (P1, P2, RANDOM):
                raise GameError(f"state {s!r}: partition entry missing or invalid")
            succ = self.edges.get(s)
            if not succ:
                raise GameError(f"state {s!r}: no successors")
            for t in succ:
                if t not in known:
                    raise GameError(f"state {s!r}: unknown successor {t!r}")
            if len(set(succ)) != len(succ):
                raise GameError(f"state {s!r}: duplicate successor edges")
            if kind == RANDOM:
                dist = self.prob.get(s)
                if dist is None:
                    raise GameError(f"random state {s!r}: no distribution")
                if set(t for t, p in dist.items() if p > 0) != set(succ):
                    raise GameError(
                        f"random state {s!r}: distribution support differs from edges"
                    )
                _check_distribution(dist, f"prob({s!r})")
            elif s in self.prob:
                raise GameError(f"non-random state {s!r} has a distribution")


@dataclass(frozen=True)
class Selector:
    """Per-state mixed move distribution for one player.

    ``choice[s]`` maps moves to positive probabilities summing to one; the
    support must lie inside the player's move set at ``s``.  Playing a
    selector forever is a memoryless strategy.
    """

    player: int
    choice: dict[str, dict[str, Fraction]]

    def support(self, s: str) -> tuple[str, ...]:
        return tuple(a for a, p in self.choice[s].items() if p > 0)

    def prob(self, s: str, a: str) -> Fraction:
        return self.choice[s].get(a, ZERO)


def validate_selector(game: GameStructure, sel: Selector) -> None:
    assignment = game.moves1 if sel.player == 1 else game.moves2
    for s in game.states:
        dist = sel.choice.get(s)
        if dist is None:
            raise GameError(f"selector undefined at state {s!r}")
        for a, p in dist.items():
            if p > 0 and a not in assignment[s]:
                raise GameError(f"selector at {s!r} plays unavailable move {a!r}")
        _check_distribution(dist, f"selector({s!r})")


def validate_valuation(game: GameStructure, v: Mapping[str, Fraction]) -> None:
    for s in game.states:
        if s not in v:
            raise GameError(f"valuation undefined at state {s!r}")
        if not (0 <= v[s] <= 1):
            raise GameError(f"valuation at {s!r} is {v[s]}, outside [0, 1]")


@dataclass(frozen=True)
class ValueClassIndex:
    """Partition of the state space by exact valuation value."""

    classes: dict[Fraction, frozenset[str]]

    def class_of(self, r: Fraction) -> frozenset[str]:
        return self.classes.get(r, frozenset())

    def values(self) -> list[Fraction]:
        return sorted(self.classes)


def value_classes(v: Mapping[str, Fraction]) -> ValueClassIndex:
    """Group states by exact rational equality of their values."""
    buckets: dict[Fraction, set[str]] = {}
    for s, r in v.items():
        buckets.setdefault(r, set()).add(s)
    return ValueClassIndex({r: frozenset(cell) for r, cell in buckets.items()})


def make_absorbing(game: GameStructure, keep: Iterable[str]) -> GameStructure:
    """Replace every transition of the states in ``keep`` by a self-loop.

    Move sets are unchanged, so any selector valid for ``game`` stays valid
    for the result.  Idempotent.
    """
    keep = set(keep)
    unknown = keep - set(game.states)
    if unknown:
        raise GameError(f"make_absorbing: unknown states {sorted(unknown)}")
    delta = dict(game.delta)
    for s in keep:
        for a in game.moves1[s]:
            for b in game.moves2[s]:
                delta[(s, a, b)] = {s: ONE}
    return GameStructure(game.states, game.moves, game.moves1, game.moves2, delta)


def destinations(game: GameStructure, s: str, xi1: Selector, xi2: Selector) -> frozenset[str]:
    """Possible successors of ``s`` under the supports of both selectors."""
    out: set[str] = set()
    for a in xi1.support(s):
        for b in xi2.support(s):
            out |= game.dest(s, a, b)
    return frozenset(out)


def uniform_selector(game: GameStructure, restrict: Iterable[str] | None = None) -> Selector:
    """Player-1 selector playing all available moves uniformly at random.

    ``restrict`` is advisory: states outside it still get the uniform
    distribution, which is harmless because solvers only normalize games
    whose remaining states are absorbing.
    """
    del restrict
    choice = {}
    for s in game.states:
        avail = game.moves1[s]
        n = len(avail)
        choice[s] = {a: Fraction(1, n) for a in avail}
    return Selector(1, choice)


def pure_selector(game: GameStructure, player: int, picks: Mapping[str, str]) -> Selector:
    """Pure selector from a state -> move map; missing states default to the
    first available move."""
    assignment = game.moves1 if player == 1 else game.moves2
    choice = {}
    for s in game.states:
        a = picks.get(s, assignment[s][0])
        if a not in assignment[s]:
            raise GameError(f"pure selector at {s!r}: move {a!r} unavailable")
        choice[s] = {a: ONE}
    return Selector(player, choice)


def swap_players(game: GameStructure) -> GameStructure:
    """Exchange the roles of the two players (player 1 of the result is
    player 2 of the input)."""
    delta = {}
    for (s, a, b), dist in game.delta.items():
        delta[(s, b, a)] = dict(dist)
    return GameStructure(game.states, game.moves, dict(game.moves2), dict(game.moves1), delta)


NOOP_MOVE = "⊥"  # the bottom symbol, used for the trivial player


def edge_move(target: str) -> str:
    return f"to-{target}"


def encode_turn_based_as_concurrent(tb: TurnBasedGame) -> GameStructure:
    """Embed a turn-based game into the concurrent representation.

    Player states get one synthesized move per outgoing edge for the owner
    and the noop move for the other player; random states get noop for both
    with the given distribution.
    """
    moves: list[str] = [NOOP_MOVE]
    seen = {NOOP_MOVE}
    moves1: dict[str, tuple[str, ...]] = {}
    moves2: dict[str, tuple[str, ...]] = {}
    delta: dict[tuple[str, str, str], dict[str, Fraction]] = {}
    for s in tb.states:
        kind = tb.partition[s]
        if kind == RANDOM:
            moves1[s] = (NOOP_MOVE,)
            moves2[s] = (NOOP_MOVE,)
            delta[(s, NOOP_MOVE, NOOP_MOVE)] = dict(tb.prob[s])
            continue
        succ_moves = tuple(edge_move(t) for t in tb.edges[s])
        for m in succ_moves:
            if m not in seen:
                seen.add(m)
                moves.append(m)
        if kind == P1:
            moves1[s] = succ_moves
            moves2[s] = (NOOP_MOVE,)
            for t in tb.edges[s]:
                delta[(s, edge_move(t), NOOP_MOVE)] = {t: ONE}
        else:
            moves1[s] = (NOOP_MOVE,)
            moves2[s] = succ_moves
            for t in tb.edges[s]:
                delta[(s, NOOP_MOVE, edge_move(t))] = {t: ONE}
    return GameStructure(tb.states, tuple(moves), moves1, moves2, delta)


def is_turn_based(game: GameStructure) -> TurnBasedGame | None:
    """Recover a turn-based view of a concurrent game, if one exists.

    A state with several moves for both players is genuinely concurrent and
    makes the whole game non-turn-based.  States where the owning player's
    moves are all deterministic become P1/P2 states; states where both move
    sets are singletons become random states (including degenerate player
    states with a single successor).
    """
    partition: dict[str, str] = {}
    edges: dict[str, tuple[str, ...]] = {}
    prob: dict[str, dict[str, Fraction]] = {}
    for s in game.states:
        m1, m2 = game.moves1[s], game.moves2[s]
        if len(m1) > 1 and len(m2) > 1:
            return None
        if len(m1) > 1 or len(m2) > 1:
            owner, avail, other = (P1, m1, m2[0]) if len(m1) > 1 else (P2, m2, m1[0])
            succ = []
            for a in avail:
                key = (s, a, other) if owner == P1 else (s, other, a)
                dist = game.delta[key]
                support = [t for t, p in dist.items() if p > 0]
                if len(support) != 1:
                    return None
                if support[0] not in succ:
                    succ.append(support[0])
            partition[s] = owner
            edges[s] = tuple(succ)
        else:
            dist = game.delta[(s, m1[0], m2[0])]
            partition[s] = RANDOM
            edges[s] = tuple(t for t in game.states if dist.get(t, ZERO) > 0)
            prob[s] = {t: p for t, p in dist.items() if p > 0}
    return TurnBasedGame(game.states, partition, edges, prob)


def tb_make_absorbing(tb: TurnBasedGame, keep: Iterable[str]) -> TurnBasedGame:
    """Turn the given states of a turn-based game into random self-loops."""
    keep = set(keep)
    partition = dict(tb.partition)
    edges = dict(tb.edges)
    prob = dict(tb.prob)
    for s in keep:
        partition[s] = RANDOM
        edges[s] = (s,)
        prob[s] = {s: ONE}
    return TurnBasedGame(tb.states, partition, edges, prob)


def indicator(game: GameStructure, inside: Iterable[str]) -> Valuation:
    inside = set(inside)
    return {s: (ONE if s in inside else ZERO) for s in game.states}


def constant_valuation(game: GameStructure, value: Fraction) -> Valuation:
    return {s: value for s in game.states}
