"""``selora`` command-line entry point.

Subcommands: ``train``, ``sweep``, ``check``, ``analyze`` and ``export``.
Exit codes: 0 success, 1 other failure (I/O, internal), 2 bad configuration
or usage, 3 numeric failure, 4 unreadable checkpoint or metrics file. Every
failure prints exactly one line to stderr::

    selora: error: category=config type=DegenerateSparsityError msg=...
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .adapter import merge
from .analysis import amplification_factors, variance_report
from .checkpoint import load_checkpoint, save_checkpoint
from .checks import run_checks
from .config import RunConfig
from .errors import ConfigError, SeLoRAError
from .metrics import dumps_metrics
from .trainer import sweep, train

EXIT_CODES = {"config": 2, "numeric": 3, "format": 4, "runtime": 1, "io": 1}


class _CheckFailure(SeLoRAError):
    category = "numeric"


class _MetricsFormatError(SeLoRAError):
    category = "format"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"usage: {message}")


def _json_dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _load_config(args) -> RunConfig:
    overrides = list(args.set or [])
    if getattr(args, "out", None):
        overrides.append(f"output.dir = {args.out}")
    return RunConfig.load(args.config, overrides)


def _cmd_train(args, out) -> int:
    config = _load_config(args)
    task, adapter_config = config.validate()
    v = config.values
    metrics, adapters, state = train(
        task, adapter_config, v["optimizer.steps"], seed=v["seed"],
        optimizer=config.optimizer_config(), batch_size=v["optimizer.batch_size"],
        return_adapters=True,
    )
    out_dir = Path(v["output.dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.txt").write_text(config.dumps())
    (out_dir / "metrics.json").write_text(_json_dump(metrics.to_dict()))
    (name,) = adapters
    save_checkpoint(adapters[name], state, out_dir / "checkpoint.selora")
    print(f"final_metric={metrics.final_metric!r} params={metrics.trainable_params} out={out_dir}", file=out)
    return 0


def _cmd_sweep(args, out) -> int:
    overrides = list(args.set or [])
    for key, value in (("sweep.axis", args.axis), ("sweep.grid", args.grid),
                       ("sweep.seeds", args.seeds), ("optimizer.steps", args.steps)):
        if value is not None:
            overrides.append(f"{key} = {value}")
    if args.out:
        overrides.append(f"output.dir = {args.out}")
    config = RunConfig.load(args.config, overrides)
    task, adapter_config = config.validate()
    v = config.values
    report = sweep(
        v["sweep.axis"], v["sweep.grid"], task, adapter_config, v["sweep.seeds"],
        steps=v["optimizer.steps"], optimizer=config.optimizer_config(),
        batch_size=v["optimizer.batch_size"],
    )
    out_dir = Path(v["output.dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "sweep.json").write_text(_json_dump(report.to_dict()))
    print(f"entries={len(report.entries)} skipped={len(report.skipped)} out={out_dir / 'sweep.json'}", file=out)
    return 0


def _cmd_check(args, out) -> int:
    results = run_checks(args.seed)
    for res in results:
        print(f"{'PASS' if res.ok else 'FAIL'} {res.name}: {res.detail}", file=out)
    failed = [r.name for r in results if not r.ok]
    if failed:
        raise _CheckFailure(f"failed checks: {', '.join(failed)}")
    return 0


def _cmd_analyze(args, out) -> int:
    adapter, _ = load_checkpoint(args.checkpoint)
    rank = args.rank or adapter.config.rank
    W0 = adapter.W0
    report = amplification_factors(W0, merge(adapter) - W0, rank)
    print(_json_dump({"subspace": report.to_dict(), "variance": variance_report(adapter)}), end="", file=out)
    return 0


def _cmd_export(args, out) -> int:
    try:
        data = json.loads(Path(args.input).read_text())
    except json.JSONDecodeError as exc:
        raise _MetricsFormatError(f"{args.input} is not valid JSON: {exc.msg}") from None
    if not isinstance(data, dict) or not ({"entries", "final_metric"} & set(data)):
        raise _MetricsFormatError(f"{args.input} holds neither a run nor a sweep report")
    text = dumps_metrics(data, args.format)
    if args.out:
        Path(args.out).write_text(text)
    else:
        out.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="selora", description="Spectral-encoding low-rank adapters.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="single run: metrics, checkpoint, config echo")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
    p.add_argument("--out", help="output directory (overrides output.dir)")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("sweep", help="grid of runs to a sweep report")
    p.add_argument("--config")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--axis", help="sparse-ratio, rank, basis or schema")
    p.add_argument("--grid", help="comma-separated grid values")
    p.add_argument("--seeds", help="comma-separated seeds")
    p.add_argument("--steps", type=int)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("check", help="run the property battery")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("analyze", help="subspace and variance report for a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("--rank", type=int, help="subspace rank (default: adapter rank)")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("export", help="metrics JSON to CSV or JSON plot data")
    p.add_argument("input")
    p.add_argument("--format", default="json", choices=["csv", "json"])
    p.add_argument("--out")
    p.set_defaults(func=_cmd_export)
    return parser


def _error_line(category: str, exc: BaseException) -> str:
    msg = " ".join(str(exc).split())
    return f"selora: error: category={category} type={type(exc).__name__} msg={msg}"


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        return args.func(args, out)
    except SeLoRAError as exc:
        print(_error_line(exc.category, exc), file=err)
        return EXIT_CODES[exc.category]
    except OSError as exc:
        print(_error_line("io", exc), file=err)
        return EXIT_CODES["io"]


if __name__ == "__main__":
    sys.exit(main())
