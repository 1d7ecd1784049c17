"""Command-line front end.

Subcommands:

* ``solve``: run a solver on a game file and print per-state values
  (exact rationals plus 20-digit decimal approximations), the witness
  memoryless strategy, iteration count and status.
* ``dump-tb``: emit the turn-based reduction of a game at a valuation,
  round-trippable in the input format, with back-map annotations.
* ``validate``: parse and check a game file.
* ``examples``: list or write the bundled example games.

Exit codes: 0 success, 1 input error, 2 iteration cap reached without the
requested guarantee.  Identical invocations produce byte-identical output;
nothing here depends on wall time, machine, or hash order.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from .certify import approximate_game_value
from .examples import EXAMPLE_NAMES, EXAMPLE_OBJECTIVES, example_text
from .gamefile import GameFormatError, load_game, parse_fraction, serialize_game
from .matrix import pre1
from .mdp import (
    ImproperSelectorError,
    compute_W2,
    strategy_value_reach,
    strategy_value_safety,
)
from .model import (
    GameError,
    GameStructure,
    Selector,
    TurnBasedGame,
    encode_turn_based_as_concurrent,
    swap_players,
)
from .reach_si import (
    STATUS_CAPPED,
    STATUS_EXACT,
    run_reach_si,
    run_reach_si_turn_based,
)
from .safety_si import (
    normalize_safety,
    run_convergent_safety_si,
    run_k_uniform_si,
    run_safety_si,
    tb_reduction,
)
from .mdp import tb_almost_sure_safe
from .value_iter import (
    HypothesisViolation,
    eta_is_value_achieving,
    extract_eta_selector,
    extract_optimal_safety_selector,
    reach_value_iteration,
    safety_value_iteration_upper,
)

APPROX_DIGITS = 20


class CliError(Exception):
    """User-facing input problem; printed and mapped to exit code 1."""


def decimal_string(x: Fraction, digits: int = APPROX_DIGITS) -> str:
    """Round-to-nearest decimal rendering of a nonnegative exact rational."""
    scale = 10**digits
    scaled = x * scale
    n = (2 * scaled.numerator + scaled.denominator) // (2 * scaled.denominator)
    whole, frac = divmod(n, scale)
    return f"{whole}.{frac:0{digits}d}"


def parse_objective(text: str, states: tuple[str, ...]) -> tuple[str, list[str]]:
    """Parse ``reach:s0,s1`` / ``safe:not-s4`` into a kind and a state list.

    A leading ``not-`` complements the comma-separated list against the
    declared states.
    """
    if ":" not in text:
        raise CliError("objective must look like reach:STATES or safe:STATES")
    kind, _, expr = text.partition(":")
    if kind not in ("reach", "safe"):
        raise CliError(f"objective kind must be reach or safe, got {kind!r}")
    complement = False
    if expr.startswith("not-"):
        complement = True
        expr = expr[len("not-") :]
    names = [s for s in expr.split(",") if s]
    if not names:
        raise CliError("objective needs at least one state")
    unknown = [s for s in names if s not in states]
    if unknown:
        raise CliError(f"objective names unknown states: {', '.join(unknown)}")
    if complement:
        chosen = [s for s in states if s not in set(names)]
    else:
        chosen = [s for s in states if s in set(names)]
    if not chosen:
        raise CliError("objective resolves to the empty state set")
    return kind, chosen


def _strategy_doc(game: GameStructure, selector: Selector | None) -> dict | None:
    if selector is None:
        return None
    return {
        s: {a: str(p) for a, p in selector.choice[s].items() if p > 0}
        for s in game.states
    }


def _values_doc(game: GameStructure, values) -> dict:
    return {
        s: {"exact": str(values[s]), "approx": decimal_string(values[s])}
        for s in game.states
    }


def _split_algorithm(raw: str) -> tuple[str, str | None]:
    name, _, arg = raw.partition(":")
    return name, (arg or None)


def _load(path: str) -> tuple[GameStructure, TurnBasedGame | None]:
    try:
        game = load_game(path)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}") from exc
    except GameFormatError as exc:
        raise CliError(f"{path}: {exc}") from exc
    if isinstance(game, TurnBasedGame):
        return encode_turn_based_as_concurrent(game), game
    return game, None


def _solve(args: argparse.Namespace) -> tuple[dict, int]:
    game, tb = _load(args.input)
    algorithm, inline = _split_algorithm(args.algorithm)
    kind, chosen = parse_objective(args.objective, game.states)
    report: dict = {
        "input": args.input,
        "objective": {"kind": kind, "states": chosen},
        "algorithm": algorithm,
    }
    max_iters = args.max_iters
    eps = parse_fraction(inline, "--algorithm certify:EPS") if (
        algorithm == "certify" and inline
    ) else (parse_fraction(args.eps, "--eps") if args.eps else Fraction(1, 100))
    if algorithm == "k-uniform" and inline:
        try:
            k = int(inline)
        except ValueError as exc:
            raise CliError(f"--algorithm k-uniform:K needs an integer, got {inline!r}") from exc
    else:
        k = args.k if args.k else len(game.moves)

    trace = None
    witness = None
    witness_values = None
    extra: dict = {}

    if algorithm == "vi" and kind == "reach":
        result = reach_value_iteration(game, chosen, max_steps=max_iters or 100)
        status = STATUS_EXACT if result.converged else STATUS_CAPPED
        values = result.valuations[-1]
        trace = result.valuations
        report["iterations"] = result.steps()
        extra["w2"] = sorted(result.w2)
        try:
            last = len(result.valuations) - 1
            if eta_is_value_achieving(game, result, last, chosen, result.w2):
                witness = extract_eta_selector(result, last)
                witness_values = strategy_value_reach(
                    result.game, witness, chosen, result.w2
                )
        except (HypothesisViolation, ImproperSelectorError):
            witness = None
    elif algorithm == "vi" and kind == "safe":
        iterates = safety_value_iteration_upper(game, chosen, steps=max_iters or 100)
        exact = len(iterates) >= 2 and iterates[-1] == iterates[-2]
        status = STATUS_EXACT if exact else STATUS_CAPPED
        values = iterates[-1]
        trace = iterates
        report["iterations"] = len(iterates) - 1
        extra["bound_side"] = "exact" if exact else "upper"
        if exact:
            witness = extract_optimal_safety_selector(game, values, chosen)
            witness_values = strategy_value_safety(game, witness, chosen)
    elif algorithm == "reach-si":
        if kind != "reach":
            raise CliError("reach-si solves reach objectives; use a safety algorithm for safe")
        if tb is not None:
            result = run_reach_si_turn_based(tb, chosen)
            status = STATUS_EXACT
            values = result.values
            report["iterations"] = result.iterations
            witness = result.selector
            witness_values = result.values
            extra["pure_strategy"] = {s: result.strategy[s] for s in sorted(result.strategy)}
        else:
            result = run_reach_si(game, chosen, max_iters=max_iters or 1000)
            status = result.status
            values = result.values
            trace = result.valuations
            report["iterations"] = result.iterations
            witness = result.final_selector
            witness_values = result.values
    elif algorithm == "safety-si":
        if kind != "safe":
            raise CliError("safety-si solves safe objectives")
        result = run_safety_si(game, chosen, max_iters=max_iters or 100)
        status = result.status
        values = result.values
        trace = result.valuations
        report["iterations"] = result.iterations
        witness = result.final_selector
        witness_values = result.values
        extra["nonlocal_step_fired"] = result.fired_nonlocal
    elif algorithm == "k-uniform":
        if kind != "safe":
            raise CliError("k-uniform solves safe objectives")
        result = run_k_uniform_si(game, chosen, k)
        values = result.values
        report["iterations"] = result.iterations
        report["k"] = result.k
        witness = result.selector
        witness_values = result.values
        extra["nonlocal_step_fired"] = result.fired_nonlocal
        status = _k_uniform_status(result, chosen)
    elif algorithm == "convergent":
        if kind != "safe":
            raise CliError("convergent solves safe objectives")
        result = run_convergent_safety_si(game, chosen, max_outer=max_iters or 50)
        status = result.status
        values = result.values
        trace = result.valuations
        report["iterations"] = result.iterations
        report["ks"] = result.ks
        witness = result.final_selector
        witness_values = result.values
    elif algorithm == "certify":
        if kind != "safe":
            raise CliError("certify takes a safe objective (the reach side is derived)")
        bracket = approximate_game_value(game, chosen, eps, max_rounds=max_iters or 200)
        status = bracket.status
        values = bracket.safety_lower
        report["iterations"] = bracket.rounds
        report["bracket"] = {
            "safety_lower": _values_doc(game, bracket.safety_lower),
            "reach_lower": _values_doc(game, bracket.reach_lower),
            "upper": _values_doc(
                game, {s: 1 - bracket.reach_lower[s] for s in game.states}
            ),
            "gap": {"exact": str(bracket.gap), "approx": decimal_string(bracket.gap)},
        }
        if bracket.exact_values is not None:
            report["exact_values"] = _values_doc(game, bracket.exact_values)
        witness = bracket.safety_strategy
        witness_values = bracket.safety_lower
        report["strategy2"] = _strategy_doc(game, bracket.reach_strategy)
        extra["reach_witness_values"] = {
            s: str(bracket.reach_lower[s]) for s in game.states
        }
        extra["_reach_strategy_obj"] = bracket.reach_strategy
    else:
        raise CliError(f"unknown algorithm {args.algorithm!r}")

    report["status"] = status
    report["values"] = _values_doc(game, values)
    report["strategy"] = _strategy_doc(game, witness)
    if witness_values is not None:
        report["witness_values"] = {s: str(witness_values[s]) for s in game.states}
    if args.trace and trace is not None:
        report["trace"] = [{s: str(v[s]) for s in game.states} for v in trace]
    report.update({key: value for key, value in extra.items() if not key.startswith("_")})

    if args.verify:
        if witness is None or witness_values is None:
            report["verify_note"] = "no witness strategy to verify"
        else:
            report["verified"] = _verify(game, kind, chosen, witness, witness_values, extra)

    exit_code = 0 if status in (STATUS_EXACT, "eps-approx") else 2
    return report, exit_code


def _k_uniform_status(result, chosen) -> str:
    """A k-uniform fixpoint is exact for the whole game only if the
    unrestricted stopping condition also holds (no local improvement with
    arbitrary mixtures and an empty non-local set)."""
    v = result.values
    game = result.game
    safe = set(chosen)
    done = set(result.w1) | (set(game.states) - safe)
    pre_vals, _ = pre1(game, v)
    if any(pre_vals[s] > v[s] for s in game.states if s not in done):
        return STATUS_CAPPED
    reduction = tb_reduction(game, v, safe)
    winning, _ = tb_almost_sure_safe(reduction.game, reduction.safe_bar)
    if any(s in winning and s not in result.w1 and s in safe for s in game.states):
        return STATUS_CAPPED
    return STATUS_EXACT


def _verify(game, kind, chosen, witness, witness_values, extra) -> bool:
    """Self-audit: rerun the reported witness strategy from scratch and
    compare with the reported values, exactly."""
    if kind == "safe":
        recomputed = strategy_value_safety(game, witness, chosen)
        if recomputed != witness_values:
            return False
        reach_strategy = extra.get("_reach_strategy_obj")
        if reach_strategy is not None:
            swapped = swap_players(game)
            complement = [s for s in game.states if s not in set(chosen)]
            w2 = compute_W2(swapped, complement)
            as_p1 = Selector(1, reach_strategy.choice)
            u = strategy_value_reach(swapped, as_p1, complement, w2)
            expected = {
                s: parse_fraction(p, "reach_witness_values")
                for s, p in extra["reach_witness_values"].items()
            }
            if u != expected:
                return False
        return True
    w2 = compute_W2(game, chosen)
    recomputed = strategy_value_reach(game, witness, chosen, w2)
    return recomputed == witness_values


def _render_text(report: dict) -> str:
    lines = []
    lines.append(f"input: {report['input']}")
    objective = report["objective"]
    lines.append(f"objective: {objective['kind']} {{{', '.join(objective['states'])}}}")
    lines.append(f"algorithm: {report['algorithm']}")
    lines.append(f"status: {report['status']}")
    if "iterations" in report:
        lines.append(f"iterations: {report['iterations']}")
    if "k" in report:
        lines.append(f"k: {report['k']}")
    lines.append("values:")
    for s, cell in report["values"].items():
        lines.append(f"  {s} = {cell['exact']} ~ {cell['approx']}")
    if report.get("bracket"):
        bracket = report["bracket"]
        lines.append("bracket:")
        for s in report["values"]:
            lo = bracket["safety_lower"][s]["exact"]
            hi = bracket["upper"][s]["exact"]
            lines.append(f"  {s} in [{lo}, {hi}]")
        lines.append(
            f"  gap = {bracket['gap']['exact']} ~ {bracket['gap']['approx']}"
        )
    if report.get("strategy") is not None:
        lines.append("strategy (player 1):")
        for s, dist in report["strategy"].items():
            inner = ", ".join(f"{a}={p}" for a, p in dist.items())
            lines.append(f"  {s}: {inner}")
    if report.get("strategy2") is not None:
        lines.append("strategy (player 2):")
        for s, dist in report["strategy2"].items():
            inner = ", ".join(f"{a}={p}" for a, p in dist.items())
            lines.append(f"  {s}: {inner}")
    if report.get("witness_values") is not None:
        lines.append("witness values:")
        for s, p in report["witness_values"].items():
            lines.append(f"  {s} = {p}")
    if "trace" in report:
        lines.append("trace:")
        for i, step in enumerate(report["trace"]):
            cells = ", ".join(f"{s}={p}" for s, p in step.items())
            lines.append(f"  [{i}] {cells}")
    if "verified" in report:
        lines.append(f"verify: {'ok' if report['verified'] else 'FAILED'}")
    return "\n".join(lines) + "\n"


def _emit(report: dict, fmt: str) -> None:
    if fmt == "json":
        sys.stdout.write(json.dumps(report, indent=2, ensure_ascii=False) + "\n")
    else:
        sys.stdout.write(_render_text(report))


def _dump_tb(args: argparse.Namespace) -> int:
    game, _ = _load(args.input)
    kind, chosen = parse_objective(args.objective, game.states)
    if kind != "safe":
        raise CliError("dump-tb takes a safe objective")
    ctx = normalize_safety(game, chosen)
    if args.valuation:
        try:
            with open(args.valuation, "r", encoding="utf-8") as handle:
                doc = json.load(handle)
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read valuation {args.valuation}: {exc}") from exc
        if not isinstance(doc, dict):
            raise CliError("valuation file must map states to rationals")
        missing = [s for s in game.states if s not in doc]
        if missing:
            raise CliError(f"valuation missing states: {', '.join(missing)}")
        v = {s: parse_fraction(doc[s], f"valuation[{s!r}]") for s in game.states}
        for s, value in v.items():
            if not (0 <= value <= 1):
                raise CliError(f"valuation[{s!r}] = {value} outside [0, 1]")
    else:
        result = run_safety_si(game, chosen, max_iters=args.si_iters)
        v = result.values
    reduction = tb_reduction(ctx.game, v, ctx.safe, args.k)
    winning, _ = tb_almost_sure_safe(reduction.game, reduction.safe_bar)
    back_map_doc = {}
    for node, origin in reduction.back_map.items():
        if origin[0] == "state":
            back_map_doc[node] = ["state", origin[1]]
        elif origin[0] == "pair":
            back_map_doc[node] = ["pair", origin[1], list(origin[2]), list(origin[3])]
        else:
            back_map_doc[node] = ["resp", origin[1], list(origin[2]), origin[3]]
    extra = {
        "back_map": back_map_doc,
        "safe_states": [s for s in reduction.game.states if s in reduction.safe_bar],
        "almost_sure_safe": [s for s in reduction.game.states if s in winning],
        "valuation": {s: str(v[s]) for s in game.states},
    }
    sys.stdout.write(serialize_game(reduction.game, extra=extra) + "\n")
    return 0


def _validate(args: argparse.Namespace) -> int:
    game, tb = _load(args.input)
    kind = "turn-based" if tb is not None else "concurrent"
    sys.stdout.write(
        f"ok: {kind} game, {len(game.states)} states, {len(game.moves)} moves\n"
    )
    return 0


def _examples(args: argparse.Namespace) -> int:
    if args.write:
        import os

        os.makedirs(args.write, exist_ok=True)
        for name in EXAMPLE_NAMES:
            path = os.path.join(args.write, f"{name}.game")
            with open(path, "w", encoding="utf-8") as handle:
                handle.write(example_text(name))
            sys.stdout.write(path + "\n")
        return 0
    for name in EXAMPLE_NAMES:
        kind, states = EXAMPLE_OBJECTIVES[name]
        if kind == "safe-complement":
            objective = f"safe:not-{','.join(states)}"
        else:
            objective = f"reach:{','.join(states)}"
        sys.stdout.write(f"{name}\t--objective {objective}\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="congame",
        description="Exact solvers for concurrent stochastic reachability and safety games",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="solve a game file")
    solve.add_argument("input")
    solve.add_argument("--objective", required=True, help="reach:STATES or safe:STATES (not- complements)")
    solve.add_argument(
        "--algorithm",
        required=True,
        help="vi | reach-si | safety-si | k-uniform[:K] | convergent | certify[:EPS]",
    )
    solve.add_argument("--max-iters", type=int, default=None)
    solve.add_argument("--eps", default=None, help="rational like 1/100")
    solve.add_argument("--k", type=int, default=None)
    solve.add_argument("--verify", action="store_true", help="recompute the witness value and compare")
    solve.add_argument("--trace", action="store_true", help="include the valuation trace")
    solve.add_argument("--format", choices=("text", "json"), default="text")

    dump = sub.add_parser("dump-tb", help="emit the turn-based reduction at a valuation")
    dump.add_argument("input")
    dump.add_argument("--objective", required=True)
    dump.add_argument("--valuation", default=None, help="JSON file state -> rational")
    dump.add_argument("--si-iters", type=int, default=0, help="derive the valuation by running this many safety improvement iterations")
    dump.add_argument("--k", type=int, default=None, help="restrict mixtures to k-uniform")

    validate = sub.add_parser("validate", help="parse and check a game file")
    validate.add_argument("input")

    examples = sub.add_parser("examples", help="list or write the bundled example games")
    examples.add_argument("--write", default=None, metavar="DIR")

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "solve":
            report, code = _solve(args)
            _emit(report, args.format)
            return code
        if args.command == "dump-tb":
            return _dump_tb(args)
        if args.command == "validate":
            return _validate(args)
        if args.command == "examples":
            return _examples(args)
        raise CliError(f"unknown command {args.command!r}")
    except (CliError, GameError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
