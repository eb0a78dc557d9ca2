"""Command-line interface.

Subcommands:
    gen-demos    sample expert demonstrations to a file
    fit          fit a reward model from a demo file
    eval         score a stored model by expected value difference
    bench        run the full benchmark grid to CSV/JSONL
    show-config  print the resolved experiment configuration

Exit codes: 0 success, 1 invalid input (arguments, config, file contents),
2 runtime failure (numerical breakdown or unexpected error).
"""

from __future__ import annotations

import argparse
import json
import sys

from .benchmark import (
    ExperimentConfig,
    cell_stream_id,
    experiment_config_to_dict,
    load_experiment_config,
    run_benchmark,
    _environment,
)
from .bnn import BnnSettings, bnn_irl_details
from .demonstrations import generate_demos, load_demos, save_demos
from .errors import (
    ConfigParseError,
    ConfigValidationError,
    DemoCompatibilityError,
    DemoFormatError,
    NumericalError,
)
from .gpirl import fit_gpirl
from .maxent import fit_linear
from .numerics import RngStream
from .serialization import (
    bnn_payload,
    gpirl_payload,
    linear_payload,
    load_model,
    reward_from_document,
    save_model,
)
from .solver import (
    expected_value_difference,
    monte_carlo_evd,
)

FIT_METHODS = ("maxent_linear", "gpirl", "bnn")


class CliUsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad arguments; the interface reserves 2
    # for runtime failures, so turn usage problems into a catchable error.
    def error(self, message):
        raise CliUsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lob-irl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-demos", help="sample expert demonstrations")
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--count", required=True, type=int, help="number of trajectories")
    p.add_argument("--seed", type=int, default=None, help="master seed (default: config master_seed)")
    p.add_argument("--out", required=True, help="output demo file")

    p = sub.add_parser("fit", help="fit a reward model from demos")
    p.add_argument("--config", required=True)
    p.add_argument("--method", required=True, choices=FIT_METHODS)
    p.add_argument("--demos", required=True, help="demo file from gen-demos")
    p.add_argument("--out", required=True, help="output model JSON")

    p = sub.add_parser("eval", help="score a stored model")
    p.add_argument("--config", required=True)
    p.add_argument("--model", required=True, help="model JSON from fit")
    p.add_argument(
        "--mc-trajectories",
        type=int,
        default=None,
        help="also estimate EVD by Monte Carlo with this many rollouts",
    )

    p = sub.add_parser("bench", help="run the benchmark grid")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None, help="output CSV (default: config output_path)")
    p.add_argument("--workers", type=int, default=None, help="process pool size")

    p = sub.add_parser("show-config", help="print the resolved config")
    p.add_argument("--config", required=True)
    return parser


def _cmd_gen_demos(args) -> int:
    config = load_experiment_config(args.config)
    if args.count < 1:
        raise CliUsageError("--count must be >= 1")
    seed = config.master_seed if args.seed is None else args.seed
    if seed < 0:
        raise CliUsageError("--seed must be non-negative")
    env = _environment(config)
    demos = generate_demos(
        config.mdp, env.transition, env.solution, args.count, RngStream(seed, 0)
    )
    save_demos(demos, args.out)
    print(f"wrote {len(demos)} trajectories to {args.out}")
    return 0


def _cmd_fit(args) -> int:
    config = load_experiment_config(args.config)
    demos = load_demos(args.demos, expected_config=config.mdp)
    env = _environment(config)
    stream = RngStream(
        config.master_seed,
        cell_stream_id(args.method, config.mdp.reward.kind, len(demos), 0),
    )
    if args.method == "maxent_linear":
        model = fit_linear(demos, env.features, env.transition, config.mdp)
        payload = linear_payload(model)
        diag = model.diagnostics
    elif args.method == "gpirl":
        model = fit_gpirl(demos, env.transition, config.mdp, env.features, rng=stream)
        payload = gpirl_payload(model)
        diag = model.diagnostics
    else:
        result = bnn_irl_details(
            demos, env.transition, config.mdp, env.features, BnnSettings(), rng=stream
        )
        payload = bnn_payload(result.posterior, result.architecture, result.reward)
        diag = result.tabular.diagnostics
    save_model(args.out, args.method, payload, config.mdp, env.features.name)
    print(
        f"fit {args.method} on {len(demos)} trajectories "
        f"({diag.iterations} iterations, converged={diag.converged}); wrote {args.out}"
    )
    return 0


def _cmd_eval(args) -> int:
    config = load_experiment_config(args.config)
    document = load_model(args.model, expected_config=config.mdp)
    inferred = reward_from_document(document)
    env = _environment(config)
    report = {
        "kind": document["kind"],
        "evd_exact": expected_value_difference(
            env.true_reward, inferred, env.transition, config.mdp
        ),
        "uniform_policy_gap": env.uniform_gap,
    }
    if args.mc_trajectories is not None:
        if args.mc_trajectories < 1:
            raise CliUsageError("--mc-trajectories must be >= 1")
        stream = RngStream(config.master_seed, cell_stream_id("eval", document["kind"], 0, 0))
        evd_mc, stderr = monte_carlo_evd(
            env.true_reward,
            inferred,
            env.transition,
            config.mdp,
            args.mc_trajectories,
            stream,
        )
        report["evd_mc"] = evd_mc
        report["mc_stderr"] = stderr
    print(json.dumps(report, indent=2))
    return 0


def _cmd_bench(args) -> int:
    config = load_experiment_config(args.config)
    out = args.out if args.out is not None else config.output_path
    if out is None:
        raise CliUsageError("no output path: pass --out or set output_path in the config")
    records = run_benchmark(config, out, workers=args.workers)
    errors = sum(1 for r in records if r.error is not None)
    print(f"wrote {len(records)} records to {out} ({errors} cell errors)")
    return 0


def _cmd_show_config(args) -> int:
    config = load_experiment_config(args.config)
    print(json.dumps(experiment_config_to_dict(config), indent=2))
    return 0


_COMMANDS = {
    "gen-demos": _cmd_gen_demos,
    "fit": _cmd_fit,
    "eval": _cmd_eval,
    "bench": _cmd_bench,
    "show-config": _cmd_show_config,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except CliUsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (
        CliUsageError,
        ConfigParseError,
        ConfigValidationError,
        DemoFormatError,
        DemoCompatibilityError,
        FileNotFoundError,
        IsADirectoryError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, Exception) as exc:  # noqa: B014 - NumericalError named for clarity
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
