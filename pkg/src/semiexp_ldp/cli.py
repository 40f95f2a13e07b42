"""Command line front end.

Subcommands mirror the library: rate, regimes, sample, simulate, sweep,
verify.  Every run echoes its fully resolved configuration (defaults
included) into the output, emits JSON or CSV with seed/version provenance,
and is byte-for-byte reproducible for a fixed seed.  Progress and
diagnostics go to stderr; stdout carries data only.

Exit codes: 0 success, 2 domain/usage error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import enum
import json
import sys
from dataclasses import asdict, is_dataclass

import numpy as np

from . import dist, rate, simulate, verify
from .errors import DomainError, NumericError

EXIT_OK = 0
EXIT_DOMAIN = 2
EXIT_NUMERIC = 3


def _version() -> str:
    from . import __version__
    return __version__


class _Opt:
    def __init__(self, name, type_, default=None, required=False, help=""):
        self.name = name
        self.type = type_
        self.default = default
        self.required = required
        self.help = help


_COMMON = [
    _Opt("seed", int, 42, help="base RNG seed"),
    _Opt("threads", int, 1, help="worker threads for chunked estimators"),
    _Opt("format", str, "json", help="output format: json or csv"),
    _Opt("output", str, None, help="output path (default: stdout)"),
]

_OPTIONS = {
    "rate": [
        _Opt("epsilon", float, required=True),
        _Opt("q", float, required=True),
        _Opt("sigma2", float, required=True),
        _Opt("C", float, required=True),
    ],
    "regimes": [
        _Opt("epsilon", float, required=True),
        _Opt("q", float, required=True),
        _Opt("sigma2", float, required=True),
        _Opt("alpha", float, required=True),
        _Opt("c", float, 1.0),
    ],
    "sample": [
        _Opt("epsilon", float, required=True),
        _Opt("q", float, required=True),
        _Opt("gamma-order", float, 1.0),
        _Opt("kind", str, "raw", help="raw, conditional, or tilted"),
        _Opt("count", int, 10),
        _Opt("a", float, 0.0, help="lower threshold for conditional samples"),
        _Opt("cutoff", float, None, help="centered cutoff for tilted samples"),
        _Opt("tilt", float, 0.0),
        _Opt("grid-points", int, 1024),
    ],
    "simulate": [
        _Opt("epsilon", float, required=True),
        _Opt("q", float, required=True),
        _Opt("gamma-order", float, 1.0),
        _Opt("method", str, "decomposition",
             help="naive, pi, decomposition, or maxjump"),
        _Opt("n", int, required=True),
        _Opt("x", float, required=True),
        _Opt("samples", int, 10000),
        _Opt("m", int, 0, help="number of jump summands for --method pi"),
        _Opt("m-max", int, None, help="explicit decomposition order"),
        _Opt("cutoff", float, None),
        _Opt("tilt", float, None),
        _Opt("chunks", int, 8),
        _Opt("jump-integrated", bool, False,
             help="integrate one jump analytically (pi terms with m >= 1)"),
    ],
    "sweep": [
        _Opt("epsilon", float, required=True),
        _Opt("q", float, required=True),
        _Opt("gamma-order", float, 1.0),
        _Opt("regime", str, required=True,
             help="gaussian, transition, or maxjump"),
        _Opt("alpha", float, None,
             help="sequence exponent (implied for --regime transition)"),
        _Opt("c", float, required=True, help="prefactor of x_n = c * n**alpha"),
        _Opt("c-units", str, "physical",
             help="physical, or reduced for c in (q*sigma2)^(1/(1+eps)) units"),
        _Opt("n", str, required=True, help="comma separated n values"),
        _Opt("samples", int, 10000),
        _Opt("estimator", str, None,
             help="naive, decomposition, or exact-max (regime default)"),
        _Opt("chunks", int, 8),
    ],
    "verify": [
        _Opt("check", str, required=True,
             help="interpolation, pi0, or bounds"),
        _Opt("epsilon", float, required=True),
        _Opt("q", float, required=True),
        _Opt("gamma-order", float, 1.0),
        _Opt("sigma2", float, None, help="for --check interpolation"),
        _Opt("C", float, None),
        _Opt("C-list", str, None, help="comma separated C values"),
        _Opt("t", float, 1.0),
        _Opt("n", str, None, help="comma separated n values"),
        _Opt("u", str, None,
             help="comma separated thresholds, as fractions of x_n"),
        _Opt("delta", float, 0.15),
        _Opt("applicable-from-n", int, 1000),
        _Opt("samples", int, 10000),
    ],
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semiexp-ldp",
        description="rate functions and rare-event Monte Carlo for "
                    "Weibull-like sums")
    parser.add_argument("--version", action="version", version=_version())
    sub = parser.add_subparsers(dest="command", required=True)
    for name, opts in _OPTIONS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", default=None,
                       help="JSON file with option defaults (flags override)")
        for opt in opts + _COMMON:
            flag = "--" + opt.name
            if opt.type is bool:
                p.add_argument(flag, action="store_true",
                               default=argparse.SUPPRESS, help=opt.help)
            else:
                p.add_argument(flag, type=opt.type,
                               default=argparse.SUPPRESS, help=opt.help)
    return parser


def _resolve_config(command: str, provided: dict, config_path) -> dict:
    """Merge defaults, config-file values, and explicit flags (in that order)."""
    opts = {o.name: o for o in _OPTIONS[command] + _COMMON}
    resolved = {name: o.default for name, o in opts.items()}
    if config_path is not None:
        with open(config_path, "r", encoding="utf-8") as fh:
            loaded = json.load(fh)
        if isinstance(loaded, dict) and "config" in loaded \
                and isinstance(loaded["config"], dict):
            loaded = loaded["config"]  # accept a previously emitted artifact
        loaded = dict(loaded)
        file_command = loaded.pop("command", command)
        if file_command != command:
            raise DomainError(
                f"config file is for command {file_command!r}, not {command!r}")
        unknown = sorted(set(loaded) - set(opts))
        if unknown:
            raise DomainError(f"unknown config keys: {', '.join(unknown)}")
        resolved.update(loaded)
    resolved.update(provided)
    missing = [n for n, o in opts.items()
               if o.required and resolved.get(n) is None]
    if missing:
        raise DomainError(f"missing required options: {', '.join(missing)}")
    return resolved


def _plain(obj):
    """Convert dataclasses, enums, and numpy scalars to JSON-friendly values."""
    if is_dataclass(obj) and not isinstance(obj, type):
        return _plain(asdict(obj))
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def _floats(text: str) -> list[float]:
    values = [float(tok) for tok in text.split(",") if tok.strip()]
    if not values:
        raise DomainError("expected a nonempty comma separated list of numbers")
    return values


def _ints(text: str) -> list[int]:
    return [int(v) for v in _floats(text)]


def _spec(cfg: dict) -> dist.WeibullLikeSpec:
    return dist.WeibullLikeSpec.from_tail(cfg["q"], cfg["epsilon"],
                                          cfg.get("gamma-order", 1.0))


def _kv_rows(results: dict):
    return [("key", "value"), sorted(results.items())]


def _run_rate(cfg):
    rt = rate.rate_transition(cfg["epsilon"], cfg["q"], cfg["sigma2"], cfg["C"])
    c_prime, c_eps = rate.critical_constants(cfg["epsilon"], cfg["q"],
                                             cfg["sigma2"])
    results = {"C": rt.C, "t_star": rt.t_star, "J": rt.J,
               "branch": rt.branch.value, "c_prime": c_prime, "c_eps": c_eps}
    return results, _kv_rows(results)


def _run_regimes(cfg):
    spec = rate.classify_regime(cfg["alpha"], cfg["c"], cfg["epsilon"],
                                cfg["q"], cfg["sigma2"])
    results = _plain(spec)
    return results, _kv_rows(results)


def _run_sample(cfg):
    spec = _spec(cfg)
    rng = np.random.default_rng(np.random.SeedSequence(cfg["seed"] & (2**64 - 1)))
    count = cfg["count"]
    kind = cfg["kind"]
    if kind == "raw":
        values = dist.sample_raw(spec, 1.0 - rng.random(count))
    elif kind == "conditional":
        values = dist.sample_conditional(spec, cfg["a"],
                                         1.0 - rng.random(count))
    elif kind == "tilted":
        if cfg["cutoff"] is None:
            raise DomainError("tilted sampling requires --cutoff")
        table = dist.build_tilted_table(spec, cfg["cutoff"], cfg["tilt"],
                                        cfg["grid-points"])
        values = dist.sample_tilted(table, rng.random(count))
    else:
        raise DomainError(f"unknown sample kind {kind!r}")
    values = np.atleast_1d(values)
    return {"values": values.tolist()}, [("index", "value"),
                                         list(enumerate(values.tolist()))]


def _sim_config(cfg) -> simulate.SimulationConfig:
    return simulate.SimulationConfig(
        spec=_spec(cfg), n=cfg["n"], x=cfg["x"], num_samples=cfg["samples"],
        seed=cfg["seed"], cutoff=cfg["cutoff"], chunk_count=cfg["chunks"],
        tilt=cfg["tilt"])


def _run_simulate(cfg):
    method = cfg["method"]
    if method == "maxjump":
        spec = _spec(cfg)
        p_max, n_tail = simulate.max_jump_exact(spec, cfg["n"], cfg["x"])
        results = {"p_max": p_max, "n_tail": n_tail,
                   "log_p_max": float(np.log(p_max)) if p_max > 0 else -np.inf}
        return results, [("key", "value"), sorted(results.items())]
    config = _sim_config(cfg)
    threads = cfg["threads"]
    if method == "naive":
        rec = simulate.estimate_naive(config, threads=threads)
    elif method == "pi":
        rec = simulate.estimate_pi(config, cfg["m"],
                                   jump_integrated=cfg.get("jump-integrated",
                                                           False),
                                   threads=threads)
    elif method == "decomposition":
        rec = simulate.estimate_decomposition(config, m_max=cfg["m-max"],
                                              threads=threads)
    else:
        raise DomainError(f"unknown simulate method {method!r}")
    flat = _plain(rec)
    rows = sorted((k, v) for k, v in flat.items() if k != "terms")
    return flat, [("key", "value"), rows]


_SWEEP_COLUMNS = ("n", "x_n", "log_p_hat", "std_err_log", "normalized",
                  "theory_limit")


def _sweep_rows(result: verify.SweepResult):
    return [(r.n, r.x_n, r.log_p_hat, r.std_err_log, r.normalized,
             result.theory_limit) for r in result.rows]


def _run_sweep(cfg):
    spec = _spec(cfg)
    c = cfg["c"]
    if cfg["c-units"] == "reduced":
        c *= (spec.q * spec.sigma2) ** (1.0 / (1.0 + spec.epsilon))
    elif cfg["c-units"] != "physical":
        raise DomainError("c-units must be 'physical' or 'reduced'")
    name = cfg["regime"]
    if name == "transition":
        alpha = 1.0 / (1.0 + spec.epsilon)
    elif cfg["alpha"] is None:
        raise DomainError(f"--alpha is required for --regime {name}")
    else:
        alpha = cfg["alpha"]
    regime = rate.classify_regime(alpha, c, spec.epsilon, spec.q, spec.sigma2)
    expected = {"gaussian": rate.Regime.GAUSSIAN,
                "transition": rate.Regime.TRANSITION,
                "maxjump": rate.Regime.MAX_JUMP}
    if name not in expected:
        raise DomainError(f"unknown regime {name!r}")
    if regime.regime is not expected[name]:
        raise DomainError(
            f"alpha={alpha} classifies as {regime.regime.value}, "
            f"not {name}: check 1/2 < alpha vs 1/(1+epsilon)")
    estimator = cfg["estimator"] or (
        "exact_max" if name == "maxjump" else "decomposition")
    estimator = estimator.replace("-", "_")
    n_list = _ints(cfg["n"])
    config = simulate.SimulationConfig(
        spec=spec, n=n_list[0], x=1.0, num_samples=cfg["samples"],
        seed=cfg["seed"], chunk_count=cfg["chunks"])
    result = verify.sweep(config, regime, n_list, estimator=estimator,
                          threads=cfg["threads"])
    return _plain(result), [_SWEEP_COLUMNS, _sweep_rows(result)]


def _run_verify(cfg):
    check = cfg["check"]
    if check == "interpolation":
        if cfg["sigma2"] is None or cfg["C-list"] is None:
            raise DomainError("interpolation needs --sigma2 and --C-list")
        rows = verify.check_interpolation(cfg["epsilon"], cfg["q"],
                                          cfg["sigma2"], _floats(cfg["C-list"]))
        header = tuple(rows[0].keys())
        return {"rows": rows}, [header, [tuple(r.values()) for r in rows]]
    spec = _spec(cfg)
    if check == "pi0":
        if cfg["C"] is None or cfg["n"] is None:
            raise DomainError("pi0 needs --C and --n")
        result = verify.check_pi0_limit(spec, cfg["C"], cfg["t"],
                                        _ints(cfg["n"]), cfg["samples"],
                                        cfg["seed"], threads=cfg["threads"])
        return _plain(result), [_SWEEP_COLUMNS, _sweep_rows(result)]
    if check == "bounds":
        if cfg["C"] is None or cfg["n"] is None or cfg["u"] is None:
            raise DomainError("bounds needs --C, --n, and --u")
        params = verify.BoundParams(cfg["delta"], cfg["applicable-from-n"])
        rows = []
        for n in _ints(cfg["n"]):
            x_n = cfg["C"] * n ** (1.0 / (1.0 + spec.epsilon))
            for u in _floats(cfg["u"]):
                config = simulate.SimulationConfig(
                    spec=spec, n=n, x=u * x_n, num_samples=cfg["samples"],
                    seed=cfg["seed"], cutoff=x_n ** spec.epsilon - spec.mu)
                rec = simulate.estimate_pi(config, 0, threads=cfg["threads"])
                bound = verify.bound_small(params, n, u * x_n, spec.sigma2)
                rows.append({"n": n, "u": u * x_n, "bound": bound,
                             "log_p_hat": rec.log_p_hat,
                             "std_err_log": rec.std_err_log,
                             "margin": bound - rec.log_p_hat})
        header = tuple(rows[0].keys())
        return {"rows": rows}, [header, [tuple(r.values()) for r in rows]]
    raise DomainError(f"unknown verify check {check!r}")


_RUNNERS = {
    "rate": _run_rate,
    "regimes": _run_regimes,
    "sample": _run_sample,
    "simulate": _run_simulate,
    "sweep": _run_sweep,
    "verify": _run_verify,
}


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, bool):
        return str(value).lower()
    return str(value)


def _emit(command: str, cfg: dict, results, csv_payload, out) -> None:
    echo = {"command": command}
    echo.update({k: v for k, v in sorted(cfg.items())})
    if cfg["format"] == "json":
        doc = {"config": _plain(echo), "results": _plain(results),
               "provenance": {"seed": cfg["seed"], "version": _version()}}
        out.write(json.dumps(doc, indent=2, sort_keys=True))
        out.write("\n")
        return
    if cfg["format"] != "csv":
        raise DomainError(f"unknown format {cfg['format']!r}")
    out.write(f"# semiexp-ldp {command}\n")
    out.write(f"# version={_version()}\n")
    for key, value in sorted(echo.items()):
        if key != "command":
            out.write(f"# {key}={_fmt(value)}\n")
    if csv_payload is None:
        raise DomainError(f"command {command!r} has no CSV representation; "
                          "use --format json")
    header, rows = csv_payload
    out.write(",".join(header) + "\n")
    for row in rows:
        out.write(",".join(_fmt(_plain(v)) for v in row) + "\n")


def run(command: str, cfg: dict) -> int:
    results, csv_payload = _RUNNERS[command](cfg)
    if cfg["output"]:
        with open(cfg["output"], "w", encoding="utf-8") as fh:
            _emit(command, cfg, results, csv_payload, fh)
        print(f"wrote {cfg['output']}", file=sys.stderr)
    else:
        _emit(command, cfg, results, csv_payload, sys.stdout)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = vars(parser.parse_args(argv))
    command = args.pop("command")
    config_path = args.pop("config", None)
    provided = {k.replace("_", "-"): v for k, v in args.items()}
    try:
        cfg = _resolve_config(command, provided, config_path)
        return run(command, cfg)
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    raise SystemExit(main())
