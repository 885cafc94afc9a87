"""Command line front end.

Subcommands: gen (write a graph file), spectral (print the spectral
summary of a graph file), run (experiment from a key=value config file),
replay (re-run a recorded activation log against the matrix-form twin).

Exit codes: 0 success, 1 runtime/data error, 2 usage or config error,
3 verification failure. No command reads the clock or global RNG state;
all randomness flows from seeds named in arguments or config.
"""

from __future__ import annotations

import argparse
import os.path
import sys

from .gossip import (
    DEFAULT_MOMENTUM_BETA,
    METHOD_ACCGOSSIP_OPT1,
    METHOD_ACCGOSSIP_OPT2,
    METHOD_PAIRWISE,
    METHOD_SHB,
    PROTOCOL_METHODS,
    ActivationLog,
    run_protocol,
)
from .harness import (
    ExperimentConfig,
    activation_stream,
    build_graph,
    build_schedules,
    resolve_verify,
    run_experiment_detailed,
    emit_csv,
    emit_svg,
    trajectory_gap,
    trial_start_vector,
    verify_option2_bound,
    verify_rk_bound,
)
from .kaczmarz import option1_schedule, option2_schedule
from .spectral import rates, summarize, w_pinv
from .topology import (
    GenerationError,
    build_system,
    make_cycle,
    make_grid,
    make_rgg,
    read_edge_list,
    write_edge_list,
)

EXIT_OK = 0
EXIT_DATA = 1
EXIT_USAGE = 2
EXIT_VERIFY = 3

CONFIG_KEYS = (
    "topology", "n", "side", "methods", "trials", "rounds", "seed", "lambda",
    "mu", "momentum_beta", "record_every", "csv", "svg", "verify",
    "verify_rk_ks", "lyapunov_max_k",
)


def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def cmd_gen(args) -> int:
    try:
        if args.topology == "cycle":
            graph = make_cycle(args.size)
        elif args.topology == "grid":
            graph = make_grid(args.size)
        else:
            graph = make_rgg(args.size, args.seed)
    except GenerationError as exc:
        return _fail(str(exc), EXIT_DATA)
    except ValueError as exc:
        return _fail(str(exc), EXIT_USAGE)
    if args.out is None:
        print(f"{graph.n} {graph.m}")
        for i, j in graph.edges:
            print(f"{i} {j}")
        return EXIT_OK
    try:
        write_edge_list(graph, args.out)
    except OSError as exc:
        return _fail(str(exc), EXIT_DATA)
    return EXIT_OK


def cmd_spectral(args) -> int:
    try:
        graph = read_edge_list(args.graph)
    except (OSError, ValueError) as exc:
        return _fail(str(exc), EXIT_DATA)
    summary = summarize(build_system(graph))
    r = rates(summary)
    for key, value in (
        ("n", summary.n),
        ("m", summary.m),
        ("lambda_min_plus_ata", summary.lambda_min_plus_ata),
        ("lambda_min_plus_w", summary.lambda_min_plus_w),
        ("lambda_min_plus_l", summary.lambda_min_plus_l),
        ("nu", summary.nu),
        ("rho", r.rho),
        ("sigma1", r.sigma1),
        ("sigma2", r.sigma2),
        ("option2_rate", r.option2_rate),
    ):
        print(f"{key}={_fmt(value)}")
    return EXIT_OK


def parse_config_text(text: str) -> dict[str, str]:
    """Flat key=value lines; blank lines and # comments ignored."""
    pairs: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if key in pairs:
            raise ValueError(f"config line {lineno}: duplicate key {key!r}")
        pairs[key] = value
    return pairs


def config_from_pairs(pairs: dict[str, str]) -> ExperimentConfig:
    for key in pairs:
        if key not in CONFIG_KEYS:
            raise ValueError(f"unknown config key {key!r}")
    topology = pairs.get("topology")
    if topology is None:
        raise ValueError("config needs a topology")
    if topology == "grid":
        if "side" not in pairs:
            raise ValueError("grid topology needs side=")
        if "n" in pairs:
            raise ValueError("grid topology takes side=, not n=")
        size_key = "side"
    else:
        if "n" not in pairs:
            raise ValueError(f"{topology} topology needs n=")
        if "side" in pairs:
            raise ValueError(f"{topology} topology takes n=, not side=")
        size_key = "n"
    if "methods" not in pairs:
        raise ValueError("config needs methods=")

    def get_int(key, default=None):
        if key not in pairs:
            return default
        try:
            return int(pairs[key])
        except ValueError:
            raise ValueError(f"config key {key!r} expects an integer, got {pairs[key]!r}")

    def get_float(key, default=None):
        if key not in pairs:
            return default
        try:
            return float(pairs[key])
        except ValueError:
            raise ValueError(f"config key {key!r} expects a number, got {pairs[key]!r}")

    methods = tuple(part.strip() for part in pairs["methods"].split(",") if part.strip())
    kwargs = dict(
        topology=topology,
        size=get_int(size_key),
        methods=methods,
        trials=get_int("trials", 1),
        rounds=get_int("rounds", 0),
        seed=get_int("seed", 0),
        lam=get_float("lambda"),
        mu=get_float("mu"),
        record_every=get_int("record_every"),
        csv_path=pairs.get("csv"),
        svg_path=pairs.get("svg"),
        verify=pairs.get("verify", "auto"),
    )
    if "momentum_beta" in pairs:
        kwargs["momentum_beta"] = get_float("momentum_beta")
    if "verify_rk_ks" in pairs:
        parts = [p.strip() for p in pairs["verify_rk_ks"].split(",") if p.strip()]
        try:
            kwargs["verify_rk_ks"] = tuple(int(p) for p in parts)
        except ValueError:
            raise ValueError(f"config key 'verify_rk_ks' expects integers, "
                             f"got {pairs['verify_rk_ks']!r}")
    if "lyapunov_max_k" in pairs:
        kwargs["lyapunov_max_k"] = get_int("lyapunov_max_k")
    return ExperimentConfig(**kwargs)


def load_config(path, overrides) -> ExperimentConfig:
    with open(path, "r", encoding="ascii") as fh:
        pairs = parse_config_text(fh.read())
    for item in overrides or ():
        if "=" not in item:
            raise ValueError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        pairs[key.strip()] = value.strip()
    return config_from_pairs(pairs)


def default_output_paths(config_path, config: ExperimentConfig) -> tuple[str, str]:
    stem, _ = os.path.splitext(str(config_path))
    csv_path = config.csv_path if config.csv_path is not None else stem + ".csv"
    svg_path = config.svg_path if config.svg_path is not None else stem + ".svg"
    return csv_path, svg_path


def cmd_run(args) -> int:
    try:
        config = load_config(args.config, args.set)
    except OSError as exc:
        return _fail(str(exc), EXIT_DATA)
    except ValueError as exc:
        return _fail(str(exc), EXIT_USAGE)
    try:
        checks = resolve_verify(config)
    except ValueError as exc:
        return _fail(str(exc), EXIT_USAGE)
    # validate topology parameters and lambda before the long run
    try:
        graph = build_graph(config)
    except GenerationError as exc:
        return _fail(str(exc), EXIT_DATA)
    except ValueError as exc:
        return _fail(str(exc), EXIT_USAGE)
    try:
        build_schedules(config, summarize(build_system(graph)))
    except ValueError as exc:
        return _fail(str(exc), EXIT_USAGE)

    result = run_experiment_detailed(config)
    csv_path, svg_path = default_output_paths(args.config, config)
    try:
        emit_csv(result.all_traces(), csv_path)
        emit_svg(result.all_traces(), svg_path)
    except OSError as exc:
        return _fail(str(exc), EXIT_DATA)

    print(f"topology={config.topology}")
    print(f"n={result.graph.n}")
    print(f"m={result.graph.m}")
    print(f"trials={config.trials}")
    print(f"rounds={config.rounds}")
    print(f"seed={config.seed}")
    print(f"csv={csv_path}")
    print(f"svg={svg_path}")
    for method in config.methods:
        agg = result.runs[method].aggregate
        print(f"final_mean_error.{method}={_fmt(float(agg.mean[-1]))}")

    reports = []
    if "rk" in checks:
        reports.append(verify_rk_bound(
            result.runs[METHOD_PAIRWISE].aggregate,
            rates(result.summary),
            ks=config.verify_rk_ks))
    if "option2" in checks:
        reports.append(verify_option2_bound(
            result.runs[METHOD_ACCGOSSIP_OPT2].snapshots,
            result.summary,
            mu=config.mu,
            gram=w_pinv(result.system)))
    failures = []
    for report in reports:
        print()
        for line in report.lines():
            print(line)
        failures.extend(report.failures())
    if failures:
        listing = ",".join(f"{method}:k={k}" for method, k in failures)
        return _fail(f"bound check failed at {listing}", EXIT_VERIFY)
    return EXIT_OK


def cmd_replay(args) -> int:
    if args.generate is not None and args.generate < 1:
        return _fail("--generate expects a positive round count", EXIT_USAGE)
    try:
        graph = read_edge_list(args.graph)
    except (OSError, ValueError) as exc:
        return _fail(str(exc), EXIT_DATA)
    c = trial_start_vector(args.seed, args.trial, graph.n)
    system = build_system(graph)
    try:
        if args.generate is not None:
            _, log = run_protocol(
                graph, c, METHOD_PAIRWISE, rounds=args.generate,
                seed=activation_stream(args.seed, args.trial, 0),
                seed_label=args.trial)
            log.write(args.log)
        else:
            log = ActivationLog.read(args.log)
    except (OSError, ValueError) as exc:
        return _fail(str(exc), EXIT_DATA)
    print(f"method={args.method}")
    print(f"rounds={len(log)}")
    try:
        if args.method == METHOD_SHB:
            trace, _ = run_protocol(graph, c, args.method, activation_log=log,
                                    momentum_beta=args.momentum_beta,
                                    seed_label=args.trial)
            print(f"final_error={_fmt(trace.final_error)}")
            print("twin=none")
            return EXIT_OK
        summary = summarize(system)
        if args.method == METHOD_PAIRWISE:
            schedule = None
            twin = "rk"
        elif args.method == METHOD_ACCGOSSIP_OPT1:
            lam = args.lam if args.lam is not None else summary.lambda_min_plus_ata
            schedule = option1_schedule(summary.m, lam)
            twin = "accrk-opt1"
        else:
            schedule = option2_schedule(summary)
            twin = "accrk-opt2"
        gap = trajectory_gap(system, schedule, c, log)
    except ValueError as exc:
        return _fail(str(exc), EXIT_DATA)
    print(f"twin={twin}")
    print(f"gap={_fmt(gap)}")
    print(f"tol={_fmt(args.tol)}")
    if gap > args.tol:
        return _fail(f"trajectory gap {gap:.3e} exceeds tolerance {args.tol:.3e} "
                     f"({args.method}:k={len(log)})", EXIT_VERIFY)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="accgossip",
        description="accelerated randomized gossip simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a graph and write its edge list")
    gen.add_argument("topology", choices=("cycle", "grid", "rgg"))
    gen.add_argument("size", type=int,
                     help="node count (cycle, rgg) or side length (grid)")
    gen.add_argument("--seed", type=int, default=0, help="placement seed (rgg)")
    gen.add_argument("--out", default=None, help="output path (default: stdout)")
    gen.set_defaults(func=cmd_gen)

    spectral = sub.add_parser("spectral", help="print spectral summary of a graph file")
    spectral.add_argument("graph", help="edge-list file")
    spectral.set_defaults(func=cmd_spectral)

    run = sub.add_parser("run", help="run an experiment from a config file")
    run.add_argument("config", help="flat key=value config file")
    run.add_argument("--set", action="append", metavar="KEY=VALUE",
                     help="override a config key")
    run.set_defaults(func=cmd_run)

    replay = sub.add_parser(
        "replay", help="re-run an activation log against the matrix-form twin")
    replay.add_argument("graph", help="edge-list file")
    replay.add_argument("log", help="activation log file")
    replay.add_argument("--method", required=True, choices=sorted(PROTOCOL_METHODS))
    replay.add_argument("--seed", type=int, default=0, help="master seed")
    replay.add_argument("--trial", type=int, default=0,
                        help="trial index for the starting vector")
    replay.add_argument("--tol", type=float, default=1e-12,
                        help="trajectory gap tolerance")
    replay.add_argument("--generate", type=int, default=None, metavar="ROUNDS",
                        help="record a fresh seeded log to LOG first")
    replay.add_argument("--lambda", dest="lam", type=float, default=None,
                        help="recurrence-schedule lambda (accgossip-opt1)")
    replay.add_argument("--momentum-beta", type=float, default=DEFAULT_MOMENTUM_BETA)
    replay.set_defaults(func=cmd_replay)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
