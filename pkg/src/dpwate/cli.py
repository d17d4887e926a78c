"""Command line interface: ``dpwate analyze | simulate | plan``.

Exit codes: 0 success, 2 invalid parameters, 3 data error, 4 degenerate
partitions.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

from ._serialize import dumps
from .dataset import Schema, count_records, load_csv
from .diagnostics import DEFAULT_A, plan_M
from .exceptions import AggregationError, DataError, DPWateError, ParameterError
from .pipeline import dp_wate, nonprivate_wate, validate_parameters
from .posterior import PosteriorConfig
from .privacy import PrivacyLedger
from .simlab import SimulationConfig, expand_sweep, run_study, write_reports
from .wate import ALL_ESTIMANDS, Estimand

EXIT_OK, EXIT_PARAM, EXIT_DATA, EXIT_DEGENERATE = 0, 2, 3, 4

ANALYZE_DEFAULTS = {
    "estimand": "all",
    "m": 100,
    "a": 0.05,
    "epsilon": 1.0,
    "pi": 0.5,
    "draws": 10000,
    "seed": 0,
    "sampler": "exact",
    "unsafe_debug": False,
    "allow_fallback": False,
}


class CliError(Exception):
    def __init__(self, code, exc):
        super().__init__(str(exc))
        self.code = code
        self.exc = exc


def _exit_code(exc) -> int:
    if isinstance(exc, AggregationError):
        return EXIT_DEGENERATE
    if isinstance(exc, DataError):
        return EXIT_DATA
    return EXIT_PARAM


def _read_json(path, what):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ParameterError(f"{what} file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ParameterError(f"{what} file {path} is not valid JSON: {exc}") from None


def _emit(text: str, out):
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def _analyze_options(args) -> dict:
    opts = dict(ANALYZE_DEFAULTS)
    if args.config:
        cfg = _read_json(args.config, "config")
        unknown = set(cfg) - set(ANALYZE_DEFAULTS) - {"input", "schema", "out", "ledger"}
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")
        opts.update({k.replace("-", "_"): v for k, v in cfg.items()})
    for key, value in vars(args).items():
        if value is not None and key not in ("command", "config", "func"):
            opts[key] = value
    return opts


def cmd_analyze(args) -> int:
    opts = _analyze_options(args)
    if not opts.get("input"):
        raise ParameterError("--input is required")
    names = [e.value for e in ALL_ESTIMANDS] if str(opts["estimand"]).lower() == "all" else [opts["estimand"]]
    estimands = [Estimand.parse(e) for e in names]
    if opts["sampler"] not in ("exact", "mcmc"):
        raise ParameterError(f"--sampler must be exact or mcmc, got {opts['sampler']!r}")
    posterior = PosteriorConfig(L=int(opts["draws"]), sampler_mode=opts["sampler"])
    validate_parameters(int(opts["m"]), float(opts["a"]), float(opts["epsilon"]), float(opts["pi"]))
    # M against n is checked from the row count, before any value is parsed
    validate_parameters(int(opts["m"]), float(opts["a"]), float(opts["epsilon"]), float(opts["pi"]),
                        count_records(opts["input"]))
    schema = Schema.from_dict(_read_json(opts["schema"], "schema")) if opts.get("schema") else Schema()
    data = load_csv(opts["input"], schema)
    data.require_both_arms()

    ledger = PrivacyLedger(opts.get("ledger"))
    results = dp_wate(
        data,
        estimands,
        M=int(opts["m"]),
        a=float(opts["a"]),
        epsilon=float(opts["epsilon"]),
        pi=float(opts["pi"]),
        seed=int(opts["seed"]),
        posterior=posterior,
        allow_fallback=bool(opts["allow_fallback"]),
        ledger=ledger,
    )
    dataset_id = data.fingerprint()
    report = {
        "parameters": {
            "estimands": [e.value for e in estimands],
            "M": int(opts["m"]),
            "a": float(opts["a"]),
            "epsilon": float(opts["epsilon"]),
            "pi": float(opts["pi"]),
            "n": data.n,
            "n_partition": data.n // int(opts["m"]),
            "draws": posterior.L,
            "sampler": posterior.sampler_mode,
            "seed": int(opts["seed"]),
        },
        "results": {},
        "ledger": ledger.state(dataset_id),
    }
    for est, r in results.items():
        rel = r.release
        report["results"][est.value] = {
            "point": r.summary.point,
            "lower": r.summary.lower,
            "upper": r.summary.upper,
            "budget": {"epsilon": rel.epsilon, "epsilon_tau": rel.epsilon_tau, "epsilon_v": rel.epsilon_v},
            "release": rel.to_dict(),
            "used_fallback": rel.used_fallback,
        }
    if opts["unsafe_debug"]:
        report["unsafe_debug"] = _debug_section(data, results)
    _emit(dumps(report), opts.get("out"))
    return EXIT_OK


def _debug_section(data, results) -> dict:
    """Confidential intermediates; only written under --unsafe-debug."""
    out = {"warning": "contains statistics that are NOT differentially private"}
    for est, r in results.items():
        np_est = nonprivate_wate(data, est)
        lo, hi = np_est.confidence_interval()
        out[est.value] = {
            "tau_bar": r.debug.tau_bar,
            "v_bar": r.debug.v_bar,
            "per_partition_tau": list(r.debug.tau),
            "per_partition_v": list(r.debug.v),
            "fallback_indices": list(r.debug.fallback_indices),
            "nonprivate": {"tau_hat": np_est.tau_hat, "v_hat": np_est.v_hat, "lower": lo, "upper": hi},
        }
    return out


def cmd_simulate(args) -> int:
    cfg = _read_json(args.config, "study config") if args.config else {}
    sweep = cfg.pop("sweep", None)
    for key in ("replications", "seed", "n_jobs"):
        value = getattr(args, key)
        if value is not None:
            cfg[key] = value
    base = SimulationConfig.from_dict(cfg)
    scenarios = expand_sweep(base, sweep)
    summaries = {label: run_study(c) for label, c in scenarios.items()}
    paths = write_reports(summaries, args.out)
    print(dumps({k: str(v) for k, v in paths.items()}))
    return EXIT_OK


def cmd_plan(args) -> int:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        plan = plan_M(
            args.epsilon,
            args.pi,
            args.a,
            args.n,
            args.delta,
            allow_simplified=not args.strict,
            treated_fraction=args.treated_fraction,
        )
    _emit(dumps(plan.to_dict()), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dpwate", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    an = sub.add_parser("analyze", help="private WATE estimates for a CSV file")
    an.add_argument("--config", help="JSON file of flag values (flags override it)")
    an.add_argument("--input", help="CSV file with the confidential data")
    an.add_argument("--schema", help="JSON column mapping")
    an.add_argument("--estimand", choices=["ate", "att", "atc", "all", "ATE", "ATT", "ATC"])
    an.add_argument("--m", type=int, help="number of partitions M")
    an.add_argument("--a", type=float, help="propensity truncation level")
    an.add_argument("--epsilon", type=float, help="total privacy budget per estimand")
    an.add_argument("--pi", type=float, help="budget fraction for the variance")
    an.add_argument("--draws", type=int, help="posterior draws L")
    an.add_argument("--seed", type=int)
    an.add_argument("--sampler", choices=["exact", "mcmc"])
    an.add_argument("--out", help="report path (default: stdout)")
    an.add_argument("--ledger", help="JSON file accumulating spent epsilon across runs")
    an.add_argument("--unsafe-debug", action="store_true", default=None,
                    help="also write confidential intermediates (NOT private)")
    an.add_argument("--allow-fallback", action="store_true", default=None,
                    help="fill degenerate partitions with uniform draws instead of failing")
    an.set_defaults(func=cmd_analyze)

    sim = sub.add_parser("simulate", help="run a simulation study")
    sim.add_argument("--config", help="JSON study config (SimulationConfig keys, optional 'sweep')")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--replications", type=int)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--n-jobs", dest="n_jobs", type=int)
    sim.set_defaults(func=cmd_simulate)

    pl = sub.add_parser("plan", help="rule-of-thumb number of partitions")
    pl.add_argument("--epsilon", type=float, required=True)
    pl.add_argument("--pi", type=float, default=0.5)
    pl.add_argument("--a", type=float, default=DEFAULT_A)
    pl.add_argument("--n", type=int, required=True)
    pl.add_argument("--delta", type=float, required=True, help="target margin of error")
    pl.add_argument("--treated-fraction", dest="treated_fraction", type=float)
    pl.add_argument("--strict", action="store_true", help="fail instead of falling back to the simplified formula")
    pl.add_argument("--out")
    pl.set_defaults(func=cmd_plan)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DPWateError, ValueError) as exc:
        code = _exit_code(exc)
        print(dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}), file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
