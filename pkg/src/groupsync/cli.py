"""Command line interface.

    groupsync run    --mode phase --n 2000 --p 0.5 --sigma 1 --trials 100 --checks risk_ratio
    groupsync sweep  --mode phase --n 2000 --p 0.5 --axis sigma --values 1,2.236,4.472
    groupsync audit  --mode orthogonal --d 2 --count 100 --generator mixed
    groupsync dump-instance --mode phase --n 50 --p 0.3 --sigma 0.5 --out inst.json

Settings come from built-in defaults, then ``--config FILE.json``, then
explicit flags (highest precedence).  Exit status: 0 when every enabled check
passed, 1 on a check failure or aborted run, 2 on usage or I/O errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .harness import (
    CHECKS,
    ExperimentAborted,
    ExperimentConfig,
    emit_audit,
    emit_results,
    emit_sweep,
    run_experiment,
    run_lemma_audit,
    run_sweep,
)
from .model import RngStream, assemble_orthogonal_instance, assemble_phase_instance, dump_instance

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE = 0, 1, 2


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _float_list(text: str) -> list[float]:
    return [float(t) for t in _csv_list(text)]


def _common(parser: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    parser.add_argument("--config", default=S, help="JSON file with default settings")
    parser.add_argument("--mode", choices=("phase", "orthogonal"), default=S)
    parser.add_argument("--n", type=int, default=S)
    parser.add_argument("--d", type=int, default=S)
    parser.add_argument("--p", type=float, default=S)
    parser.add_argument("--sigma", type=float, default=S)
    parser.add_argument("--seed", type=int, default=S)
    parser.add_argument("--truth", dest="truth_kind", default=S,
                        help="uniform|fixed_ones (phase), haar|fixed_identity (orthogonal)")
    parser.add_argument("--out", default=S, help="output path")
    parser.add_argument("--format", choices=("csv", "json"), default=S)


def _experiment_flags(parser: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    parser.add_argument("--trials", type=int, default=S)
    parser.add_argument("--checks", type=_csv_list, default=S,
                        help=f"comma separated subset of {','.join(CHECKS)}")
    parser.add_argument("--truth-policy", dest="truth_policy",
                        choices=("per_trial", "fixed"), default=S)
    parser.add_argument("--ratio-window", dest="ratio_window", type=_float_list, default=S,
                        help="LO,HI window for the risk_ratio check")
    parser.add_argument("--exact-tol", dest="exact_tol", type=float, default=S)
    parser.add_argument("--workers", type=int, default=S)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="groupsync", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Monte Carlo experiment at one parameter point")
    _common(run)
    _experiment_flags(run)

    sweep = sub.add_parser("sweep", help="experiments along one parameter axis")
    _common(sweep)
    _experiment_flags(sweep)
    sweep.add_argument("--axis", choices=("n", "p", "sigma"), default=argparse.SUPPRESS)
    sweep.add_argument("--values", type=_float_list, default=argparse.SUPPRESS)

    audit = sub.add_parser("audit", help="audit the eigenvector/eigenspace perturbation bounds")
    _common(audit)
    audit.add_argument("--count", type=int, default=argparse.SUPPRESS)
    audit.add_argument("--generator", choices=("mixed", "sync_instances", "random_hermitian"),
                       default=argparse.SUPPRESS)

    dump = sub.add_parser("dump-instance", help="write one generated instance as JSON")
    _common(dump)
    dump.add_argument("--stream", type=int, default=argparse.SUPPRESS)
    return parser


def _settings(args: argparse.Namespace) -> dict:
    values = vars(args).copy()
    values.pop("command")
    merged = {}
    if "config" in values:
        path = values.pop("config")
        try:
            merged.update(json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise OSError(f"cannot read config {path}: {exc}") from exc
    merged.update(values)
    return merged


def _split(settings: dict, extra: tuple) -> tuple[ExperimentConfig, dict]:
    rest = {k: settings.pop(k) for k in extra if k in settings}
    return ExperimentConfig.from_dict(settings).validate(), rest


def _report(payload: dict) -> None:
    print(json.dumps(payload, indent=1, default=str))


def _cmd_run(settings: dict) -> int:
    cfg, _ = _split(settings, ())
    result = run_experiment(cfg)
    if cfg.out:
        emit_results(result, cfg.format, cfg.out)
    _report({"summary": result.summary, "checks": result.checks})
    return EXIT_OK if result.passed else EXIT_CHECK_FAILED


def _cmd_sweep(settings: dict) -> int:
    cfg, rest = _split(settings, ("axis", "values"))
    if "axis" not in rest or "values" not in rest:
        raise ValueError("sweep needs --axis and --values")
    sweep = run_sweep(cfg, rest["axis"], rest["values"])
    if cfg.out:
        emit_sweep(sweep, cfg.format, cfg.out)
    _report({"table": sweep.table(), "trend": sweep.trend,
             "checks": [r.checks for r in sweep.results]})
    return EXIT_OK if sweep.passed else EXIT_CHECK_FAILED


def _cmd_audit(settings: dict) -> int:
    mode = settings.get("mode", "phase")
    d = int(settings.get("d", 2))
    seed = int(settings.get("seed", 0))
    audit = run_lemma_audit(mode, int(settings.get("count", 100)), seed,
                            settings.get("generator", "mixed"), d=d, sigma=settings.get("sigma"))
    if settings.get("out"):
        emit_audit(audit, settings.get("format", "json"), settings["out"], seed=seed)
    _report(audit.tally())
    return EXIT_OK if audit.passed else EXIT_CHECK_FAILED


def _cmd_dump(settings: dict) -> int:
    mode = settings.get("mode", "phase")
    n = int(settings.get("n", 20))
    p = float(settings.get("p", 0.5))
    sigma = float(settings.get("sigma", 0.5))
    stream = RngStream(int(settings.get("seed", 0)), int(settings.get("stream", 0)))
    out = settings.get("out")
    if not out:
        raise ValueError("dump-instance needs --out")
    if mode == "phase":
        inst = assemble_phase_instance(n, p, sigma, stream, settings.get("truth_kind", "uniform"))
    else:
        inst = assemble_orthogonal_instance(n, int(settings.get("d", 2)), p, sigma, stream,
                                            settings.get("truth_kind", "haar"))
    dump_instance(inst, out)
    _report({"written": str(out), "metadata": inst.metadata()})
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "sweep": _cmd_sweep, "audit": _cmd_audit, "dump-instance": _cmd_dump}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = _settings(args)
        return COMMANDS[args.command](settings)
    except ExperimentAborted as exc:
        print(f"groupsync: aborted: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    except (ValueError, TypeError, OSError) as exc:
        print(f"groupsync: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
