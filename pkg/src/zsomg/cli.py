"""``zsomg`` command line: solve, oracle and eval subcommands.

Exit codes: 0 success, 1 bad input, 2 bad configuration, 3 solver budget
exhausted before the gap closed, 4 enumeration too large, 5 a strategy file
does not cover a reachable history.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .hsvi import BudgetWarning, ConfigError, SolverConfig, extract_strategies, solve
from .model import BUILTINS, ModelError, PosgModel, builtin, load_model
from .occupancy import initial_occupancy
from .oracle import exploitability, oracle_solution, write_golden
from .strategy import BehavioralStrategy, CoverageError, ExplosionError, evaluate_profile

EXIT_OK, EXIT_INPUT, EXIT_CONFIG, EXIT_BUDGET, EXIT_EXPLOSION, EXIT_COVERAGE = range(6)


@dataclass
class RunManifest:
    command: str
    model: str
    model_hash: str
    config: dict
    outputs: list[str] = field(default_factory=list)
    version: str = __version__

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=1, sort_keys=True) + "\n")


def manifest_path(output) -> Path:
    p = Path(output)
    return p.with_name(p.name + ".manifest.json")


def _emit(manifest: RunManifest) -> None:
    for out in manifest.outputs:
        manifest.write(manifest_path(out))


def _load(args) -> PosgModel:
    m = builtin(args.builtin) if args.builtin else load_model(args.model)
    if getattr(args, "horizon", None) is not None:
        if args.horizon < 1:
            raise ModelError("--horizon must be positive")
        m = m.with_horizon(args.horizon)
    return m


def _source(args) -> str:
    return f"builtin:{args.builtin}" if args.builtin else str(args.model)


def _add_model_args(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--model", type=Path, help="model JSON file")
    src.add_argument("--builtin", choices=sorted(BUILTINS))
    p.add_argument("--horizon", type=int, help="override the model horizon")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zsomg", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="bound the game value to within epsilon")
    _add_model_args(p)
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--rho", type=float, default=None, help="default: half its maximum")
    p.add_argument("--local-tol", type=float, default=None, help="default: epsilon / 10")
    p.add_argument("--local-budget", type=int, default=None)
    p.add_argument("--max-trials", type=int, default=10_000)
    p.add_argument("--time-limit", type=float, default=None, help="seconds")
    p.add_argument("--lipschitz", choices=("static", "refined"), default="static")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trace", type=Path, help="per-update CSV")
    p.add_argument("--out", type=Path, help="summary JSON")
    p.add_argument("--strategies", type=Path, help="directory for extracted strategies")

    p = sub.add_parser("oracle", help="exact value by normal-form enumeration")
    _add_model_args(p)
    p.add_argument("--write-golden", type=Path)

    p = sub.add_parser("eval", help="value of a strategy pair")
    _add_model_args(p)
    p.add_argument("--p1", type=Path, required=True)
    p.add_argument("--p2", type=Path, required=True)
    p.add_argument("--exploitability", action="store_true")
    return parser


def cmd_solve(args) -> int:
    m = _load(args)
    kw = dict(epsilon=args.epsilon, rho=args.rho, local_tol=args.local_tol,
              max_trials=args.max_trials, lipschitz=args.lipschitz, seed=args.seed,
              time_limit=args.time_limit)
    if args.local_budget is not None:
        kw["local_budget"] = args.local_budget
    cfg = SolverConfig(**kw)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BudgetWarning)
        res = solve(m, cfg)
    summary = res.summary()
    print(json.dumps(summary, sort_keys=True))
    manifest = RunManifest("solve", _source(args), m.content_hash(), asdict(cfg))
    if args.out:
        res.write_summary(args.out)
        manifest.outputs.append(str(args.out))
    if args.trace:
        res.write_trace(args.trace)
        manifest.outputs.append(str(args.trace))
    if args.strategies:
        args.strategies.mkdir(parents=True, exist_ok=True)
        s1, s2 = extract_strategies(res)
        for s in (s1, s2):
            path = args.strategies / f"player{s.player}.json"
            s.save(path)
            manifest.outputs.append(str(path))
    _emit(manifest)
    if not res.converged:
        print(f"gap {res.gap:.6g} still above epsilon after {res.trials_run} trials", file=sys.stderr)
        return EXIT_BUDGET
    return EXIT_OK


def _support(mix) -> dict[str, float]:
    return {str(i): round(float(p), 12) for i, p in enumerate(mix) if p > 1e-12}


def cmd_oracle(args) -> int:
    m = _load(args)
    if m.horizon is None:
        raise ConfigError("the oracle needs a finite horizon; pass --horizon")
    g, sol = oracle_solution(m)
    print(json.dumps({"value": sol.value, "shape": list(g.shape),
                      "row_support": _support(sol.row_mix), "col_support": _support(sol.col_mix)}))
    if args.write_golden:
        write_golden(args.write_golden, m, m.horizon, sol)
        _emit(RunManifest("oracle", _source(args), m.content_hash(), {"horizon": m.horizon},
                          [str(args.write_golden)]))
    return EXIT_OK


def cmd_eval(args) -> int:
    m = _load(args)
    if m.horizon is None:
        raise ConfigError("evaluation needs a finite horizon; pass --horizon")
    try:
        s1, s2 = BehavioralStrategy.load(args.p1), BehavioralStrategy.load(args.p2)
    except (OSError, ValueError, KeyError) as exc:
        raise ModelError(f"cannot read strategies: {exc}") from None
    if s1.player != 1 or s2.player != 2:
        raise ModelError("--p1 must hold a player-1 strategy and --p2 a player-2 strategy")
    out = {"value": evaluate_profile(m, initial_occupancy(m), s1, s2)}
    if args.exploitability:
        out["exploitability"] = exploitability(m, s1, s2)
    print(json.dumps(out))
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "oracle": cmd_oracle, "eval": cmd_eval}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except ModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ExplosionError as exc:
        print(f"too large: {exc}", file=sys.stderr)
        return EXIT_EXPLOSION
    except CoverageError as exc:
        print(f"strategy coverage: {exc}", file=sys.stderr)
        return EXIT_COVERAGE


if __name__ == "__main__":
    sys.exit(main())
