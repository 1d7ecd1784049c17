"""Zero-sum matrix games and the one-step Pre operators built on them.

``Pre1(v)(s)``, the best expectation of a valuation ``v`` that player 1 can
guarantee in one step from ``s``, is the value of a one-shot matrix game
whose payoff entries are expected successor values.  Matrix games are solved
exactly: the maximin linear program is run through the rational simplex for
each side, and the two optimal values are checked for equality before the
solution is returned.

``pre1_k`` restricts player 1 to k-uniform mixtures (all probabilities
multiples of ``1/l`` for a common denominator ``l <= k``) and maximizes by
enumeration.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

from .linprog import EQ, GEQ, LEQ, solve_lp
from .model import GameStructure, Selector, ZERO, ONE

# Guard for the k-uniform enumerations (compositions of l <= k over a move
# set); pathological inputs should fail loudly instead of hanging.
MAX_KUNIFORM_ENUMERATION = 500_000


@dataclass(frozen=True)
class MatrixGame:
    """One-shot zero-sum game; the row player maximizes."""

    rows: tuple[str, ...]
    cols: tuple[str, ...]
    payoff: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self) -> None:
        if not self.rows or not self.cols:
            raise ValueError("matrix game needs nonempty rows and cols")
        if len(self.payoff) != len(self.rows) or any(
            len(r) != len(self.cols) for r in self.payoff
        ):
            raise ValueError("payoff shape does not match labels")

    def entry(self, a: str, b: str) -> Fraction:
        return self.payoff[self.rows.index(a)][self.cols.index(b)]


@dataclass(frozen=True)
class MatrixSolution:
    value: Fraction
    row_strategy: tuple[Fraction, ...]
    col_strategy: tuple[Fraction, ...]


def _row_value(payoff, mix, col: int) -> Fraction:
    return sum((p * payoff[i][col] for i, p in enumerate(mix)), ZERO)


def _solve_rows_lp(payoff, n_rows: int, n_cols: int) -> tuple[Fraction, list[Fraction]]:
    # Variables: x_0..x_{m-1}, g+, g-; maximize g = g+ - g-.
    objective = [ZERO] * n_rows + [ONE, -ONE]
    rows = []
    senses = []
    rhs = []
    for b in range(n_cols):
        rows.append([payoff[a][b] for a in range(n_rows)] + [-ONE, ONE])
        senses.append(GEQ)
        rhs.append(ZERO)
    rows.append([ONE] * n_rows + [ZERO, ZERO])
    senses.append(EQ)
    rhs.append(ONE)
    value, point = solve_lp(objective, rows, senses, rhs, maximize=True)
    return value, point[:n_rows]


def _solve_cols_lp(payoff, n_rows: int, n_cols: int) -> tuple[Fraction, list[Fraction]]:
    objective = [ZERO] * n_cols + [ONE, -ONE]
    rows = []
    senses = []
    rhs = []
    for a in range(n_rows):
        rows.append([payoff[a][b] for b in range(n_cols)] + [-ONE, ONE])
        senses.append(LEQ)
        rhs.append(ZERO)
    rows.append([ONE] * n_cols + [ZERO, ZERO])
    senses.append(EQ)
    rhs.append(ONE)
    value, point = solve_lp(objective, rows, senses, rhs, maximize=False)
    return value, point[:n_cols]


def solve_matrix_game(game: MatrixGame) -> MatrixSolution:
    """Exact value and one optimal mixed strategy per player.

    Deterministic: degenerate shapes take closed forms with first-index tie
    breaking, and the general case inherits the simplex pivoting order.
    """
    payoff = game.payoff
    m, n = len(game.rows), len(game.cols)
    if n == 1:
        best = max(range(m), key=lambda a: (payoff[a][0], -a))
        row = tuple(ONE if a == best else ZERO for a in range(m))
        return MatrixSolution(payoff[best][0], row, (ONE,))
    if m == 1:
        best = min(range(n), key=lambda b: (payoff[0][b], b))
        col = tuple(ONE if b == best else ZERO for b in range(n))
        return MatrixSolution(payoff[0][best], (ONE,), col)
    row_value, row_mix = _solve_rows_lp(payoff, m, n)
    col_value, col_mix = _solve_cols_lp(payoff, m, n)
    if row_value != col_value:
        raise AssertionError(
            f"matrix game duality gap: {row_value} vs {col_value}"
        )
    return MatrixSolution(row_value, tuple(row_mix), tuple(col_mix))


def one_step_matrix(game: GameStructure, v: Mapping[str, Fraction], s: str) -> MatrixGame:
    """Matrix of expected ``v``-values, one entry per move pair at ``s``."""
    rows = game.moves1[s]
    cols = game.moves2[s]
    payoff = tuple(
        tuple(
            sum((p * v[t] for t, p in game.delta[(s, a, b)].items()), ZERO)
            for b in cols
        )
        for a in rows
    )
    return MatrixGame(rows, cols, payoff)


def pre_sel_sel(
    game: GameStructure,
    v: Mapping[str, Fraction],
    s: str,
    xi1: Selector,
    xi2: Selector,
) -> Fraction:
    """Expected next-step value when both players play their selectors at s."""
    total = ZERO
    for a, pa in xi1.choice[s].items():
        if pa == 0:
            continue
        for b, pb in xi2.choice[s].items():
            if pb == 0:
                continue
            dist = game.delta[(s, a, b)]
            total += pa * pb * sum((p * v[t] for t, p in dist.items()), ZERO)
    return total


def pre_mix_move(
    game: GameStructure,
    v: Mapping[str, Fraction],
    s: str,
    mix: Mapping[str, Fraction],
    b: str,
) -> Fraction:
    """Expected next-step value for a player-1 mixture against a pure move b."""
    total = ZERO
    for a, pa in mix.items():
        if pa == 0:
            continue
        dist = game.delta[(s, a, b)]
        total += pa * sum((p * v[t] for t, p in dist.items()), ZERO)
    return total


def pre1_sel(game: GameStructure, v: Mapping[str, Fraction], s: str, xi1: Selector) -> Fraction:
    """Worst case over player 2 of the one-step expectation; the infimum is
    attained at a pure move."""
    return min(pre_mix_move(game, v, s, xi1.choice[s], b) for b in game.moves2[s])


def pre1_state(game: GameStructure, v: Mapping[str, Fraction], s: str) -> tuple[Fraction, dict[str, Fraction]]:
    """Value of Pre1(v) at one state, with the optimal mixture as witness."""
    solution = solve_matrix_game(one_step_matrix(game, v, s))
    mix = {
        a: p for a, p in zip(game.moves1[s], solution.row_strategy) if p > 0
    }
    return solution.value, mix


def pre1(game: GameStructure, v: Mapping[str, Fraction]) -> tuple[dict[str, Fraction], Selector]:
    """Pointwise sup-inf one-step operator with a witness selector."""
    values: dict[str, Fraction] = {}
    choice: dict[str, dict[str, Fraction]] = {}
    for s in game.states:
        values[s], choice[s] = pre1_state(game, v, s)
    return values, Selector(1, choice)


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def enumerate_k_uniform(n_moves: int, k: int) -> list[tuple[Fraction, ...]]:
    """All distributions over ``n_moves`` moves whose probabilities share a
    denominator ``l <= k``, deduplicated, in a fixed enumeration order."""
    if k < 1:
        raise ValueError("k must be >= 1")
    seen: set[tuple[Fraction, ...]] = set()
    out: list[tuple[Fraction, ...]] = []
    count = 0
    for denom in range(1, k + 1):
        for comp in _compositions(denom, n_moves):
            count += 1
            if count > MAX_KUNIFORM_ENUMERATION:
                raise RuntimeError(
                    f"k-uniform enumeration budget exceeded (k={k}, moves={n_moves})"
                )
            dist = tuple(Fraction(c, denom) for c in comp)
            if dist not in seen:
                seen.add(dist)
                out.append(dist)
    return out


def pre1_k(
    game: GameStructure, v: Mapping[str, Fraction], s: str, k: int
) -> tuple[Fraction, dict[str, Fraction]]:
    """Best one-step value over k-uniform player-1 mixtures at ``s``.

    Ties go to the earliest mixture in the enumeration order, so the result
    is deterministic.
    """
    moves = game.moves1[s]
    cols = game.moves2[s]
    best_value: Fraction | None = None
    best_mix: tuple[Fraction, ...] | None = None
    for dist in enumerate_k_uniform(len(moves), k):
        mix = {a: p for a, p in zip(moves, dist) if p > 0}
        value = min(pre_mix_move(game, v, s, mix, b) for b in cols)
        if best_value is None or value > best_value:
            best_value = value
            best_mix = dist
    assert best_value is not None and best_mix is not None
    return best_value, {a: p for a, p in zip(moves, best_mix) if p > 0}
