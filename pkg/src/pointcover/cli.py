"""Command-line experiment runner.

Subcommands::

    analytic       rate-distortion tables (CSV)
    cover-sim      random covering code on sampled patterns
    adversary-sim  the same code on fixed-family or file-supplied patterns
    wz-sim         binned code with decoder side information
    transform      snap an interval-set code to the slot grid

Options may also come from a flat ``key = value`` file given by ``--config``;
command-line flags override it.  Exit codes: 0 success, 2 usage error,
3 search-budget refusal, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, fields
from fractions import Fraction
from typing import Optional

from . import analytic
from ._backend import kernels
from .core import exact
from .covering import (DEFAULT_BUDGET, BudgetExceeded, CodebookSpec, check_budget, codebook_size,
                       expected_covered_distortion, run_covering_trials)
from .rng import SeedSpec
from .sources import KINDS, SourceConfig, read_pattern
from .transform import ApproximationError, parse_code, transform_code
from .wyner_ziv import AMBIGUOUS, ENC_FAIL, OK, WzSpec, default_nu, run_wz_trials, wz_rate_bounds

EXIT_OK, EXIT_USAGE, EXIT_BUDGET, EXIT_IO = 0, 2, 3, 4
COMMANDS = ("analytic", "cover-sim", "adversary-sim", "wz-sim", "transform")

COVER_COLUMNS = ["trial", "T", "delta", "lambda", "D", "rate_bits_per_s", "M", "k_ones",
                 "index", "fallback", "distortion"]
WZ_COLUMNS = ["trial", "T", "delta", "lambda", "p", "nu", "D", "R", "Rtilde", "mu_count",
              "known_count", "outcome", "distortion", "charged_bits"]
ANALYTIC_COLUMNS = ["D", "lambda", "delta", "rd_poisson_bits_per_s", "rd_discrete_bits_per_symbol",
                    "rd_discrete_bits_per_s", "p_star_1_given_0"]


class UsageError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    command: str
    lam: float = 1.0
    D: float = 0.5
    T: float = 16.0
    delta: float = 0.01
    rate: float = 1.3
    rate_tilde: float = 0.8
    p: float = 0.5
    nu: Optional[float] = None
    trials: int = 100
    seed: int = 0
    workers: int = 1
    budget: int = DEFAULT_BUDGET
    out: Optional[str] = None
    source: str = "poisson"
    shape: float = 2.0
    burst: int = 4
    burst_width: float = 1e-3
    pattern_file: Optional[str] = None
    sweep: Optional[str] = None
    code_file: Optional[str] = None
    approx_file: Optional[str] = None
    epsilon: float = 0.0


# option name -> (dest, type, help)
_OPTIONS = {
    "lambda": ("lam", float, "intensity, points per second"),
    "D": ("D", float, "distortion budget"),
    "T": ("T", float, "horizon in seconds"),
    "delta": ("delta", float, "slot width in seconds"),
    "rate": ("rate", float, "rate R in bits per second"),
    "rate-tilde": ("rate_tilde", float, "bin rate R~ in bits per second (wz-sim)"),
    "p": ("p", float, "probability a point is known to the decoder (wz-sim)"),
    "nu": ("nu", float, "hidden-point budget per second (wz-sim; default (1-p)*lambda*1.1)"),
    "trials": ("trials", int, "number of Monte Carlo trials"),
    "seed": ("seed", int, "master seed"),
    "workers": ("workers", int, "worker threads (results do not depend on it)"),
    "budget": ("budget", int, "largest codebook the encoder may search"),
    "out": ("out", str, "output directory (sims, transform) or CSV file (analytic)"),
    "source": ("source", str, f"pattern generator, one of {', '.join(KINDS)}"),
    "shape": ("shape", float, "gamma shape for renewal sources"),
    "burst": ("burst", int, "points per burst for cluster sources"),
    "burst-width": ("burst_width", float, "burst window in seconds for cluster sources"),
    "pattern-file": ("pattern_file", str, "fixed pattern file (adversary-sim)"),
    "sweep": ("sweep", str, "analytic sweep, e.g. D=0.1:0.9:0.1"),
    "code-file": ("code_file", str, "interval code file (transform)"),
    "approx-file": ("approx_file", str, "approximations, same format as the code file (transform)"),
    "epsilon": ("epsilon", float, "exception-set budget (transform)"),
}

_COMMAND_OPTIONS = {
    "analytic": ["lambda", "D", "delta", "sweep", "out"],
    "cover-sim": ["lambda", "D", "T", "delta", "rate", "trials", "seed", "workers", "budget",
                  "out", "source", "shape", "burst", "burst-width"],
    "adversary-sim": ["lambda", "D", "T", "delta", "rate", "trials", "seed", "workers", "budget",
                      "out", "source", "burst", "burst-width", "pattern-file"],
    "wz-sim": ["lambda", "D", "T", "delta", "rate", "rate-tilde", "p", "nu", "trials", "seed",
               "workers", "budget", "out"],
    "transform": ["T", "delta", "epsilon", "code-file", "approx-file", "out"],
}

# each simulation's defaults reproduce its acceptance configuration
_COMMAND_DEFAULTS = {
    "wz-sim": {"lam": 2.0, "T": 8.0, "rate": 1.8, "rate_tilde": 0.8, "p": 0.5, "trials": 500},
    "cover-sim": {"trials": 500},
    "adversary-sim": {"source": "grid", "trials": 500},
}


def _build_parser():
    parser = argparse.ArgumentParser(prog="pointcover", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--config", help="flat key = value file; flags override it")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}
    for cmd, opts in _COMMAND_OPTIONS.items():
        sp = sub.add_parser(cmd, formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        sp.add_argument("--config", help="flat key = value file; flags override it")
        defaults = ExperimentConfig(cmd, **_COMMAND_DEFAULTS.get(cmd, {}))
        for name in opts:
            dest, typ, text = _OPTIONS[name]
            sp.add_argument(f"--{name}", dest=dest, type=typ, default=getattr(defaults, dest), help=text)
        subs[cmd] = sp
    return parser, subs


def read_config_file(path) -> dict:
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            k, v = (s.strip() for s in line.split("=", 1))
            out[k.replace("_", "-") if k.replace("_", "-") in _OPTIONS else k] = v
    return out


def parse_config(argv, config_file=None) -> ExperimentConfig:
    """Flags over file values over defaults; raises UsageError on any problem."""
    parser, subs = _build_parser()
    argv = list(argv)

    def fail(message):
        raise UsageError(message)

    parser.error = fail
    for sp in subs.values():
        sp.error = fail
    ns = parser.parse_args(argv)
    path = config_file or getattr(ns, "config", None)
    if path:
        try:
            values = read_config_file(path)
        except OSError as e:
            raise UsageError(f"cannot read config file {path}: {e}") from None
        allowed = _COMMAND_OPTIONS[ns.command]
        sp = subs[ns.command]
        for key, val in values.items():
            if key not in allowed:
                raise UsageError(f"unknown key {key!r} in {path} for {ns.command}")
            dest, typ, _ = _OPTIONS[key]
            try:
                sp.set_defaults(**{dest: typ(val)})
            except ValueError:
                raise UsageError(f"bad value {val!r} for {key} in {path}") from None
        ns = parser.parse_args(argv)
    kw = {f.name: getattr(ns, f.name) for f in fields(ExperimentConfig) if hasattr(ns, f.name)}
    cfg = ExperimentConfig(**kw)
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig):
    """Check each module's preconditions before any work starts."""
    def need(cond, msg):
        if not cond:
            raise UsageError(msg)

    c = cfg.command
    if c in ("analytic", "cover-sim", "adversary-sim", "wz-sim"):
        need(cfg.D > 0, f"D={cfg.D}: rd_poisson requires D > 0")
        need(cfg.lam >= 0, f"lambda={cfg.lam}: intensity must be >= 0")
    need(cfg.delta > 0, f"delta={cfg.delta}: slot width must be positive")
    if c == "analytic":
        if cfg.sweep:
            _sweep_values(cfg.sweep)
        return
    need(cfg.T > 0, f"T={cfg.T}: horizon must be positive")
    if c == "transform":
        need(cfg.code_file is not None, "transform needs --code-file")
        need(cfg.epsilon >= 0, "epsilon must be >= 0")
        return
    need(0 < cfg.D < 1, f"D={cfg.D}: the covering codes need D in (0, 1)")
    need(cfg.rate >= 0, f"rate={cfg.rate}: must be >= 0")
    need(cfg.trials >= 1, "trials must be >= 1")
    need(cfg.workers >= 1, "workers must be >= 1")
    need(cfg.budget >= 2, "budget must be >= 2")
    if c in ("cover-sim", "adversary-sim"):
        need(cfg.source in KINDS, f"unknown source {cfg.source!r}; expected one of {KINDS}")
        need(cfg.shape > 0 and cfg.burst >= 1 and cfg.burst_width > 0,
             "shape, burst and burst-width must be positive")
        check_budget(max(2, codebook_size(cfg.rate, cfg.T)), cfg.budget)
    if c == "wz-sim":
        need(0 <= cfg.p <= 1, f"p={cfg.p}: must lie in [0, 1]")
        need(cfg.rate_tilde >= 0, "rate-tilde must be >= 0")
        need(cfg.nu is None or cfg.nu >= 0, "nu must be >= 0")
        check_budget(max(1, codebook_size(cfg.rate, cfg.T)) * max(1, codebook_size(cfg.rate_tilde, cfg.T)),
                     cfg.budget, "binned codebook")


def _sweep_values(text: str):
    try:
        key, rng = text.split("=", 1)
        start, stop, step = (Fraction(s) for s in rng.split(":"))
    except ValueError:
        raise UsageError(f"bad sweep {text!r}; expected KEY=start:stop:step") from None
    key = key.strip()
    if key not in ("D", "lambda", "delta"):
        raise UsageError(f"sweep key must be D, lambda or delta, not {key!r}")
    if step <= 0 or stop < start:
        raise UsageError(f"bad sweep range {rng!r}")
    count = math.floor((stop - start) / step) + 1
    return key, [float(start + i * step) for i in range(count)]


# -- formatting ------------------------------------------------------------------------


def _num(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, int):
        return str(x)
    return repr(float(x))


def _write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_num(v) if not isinstance(v, str) else v for v in row])


def _json_default(o):
    if isinstance(o, Fraction):
        return float(o)
    if hasattr(o, "item"):
        return o.item()
    raise TypeError(type(o).__name__)


def _write_manifest(path, cfg, extra):
    body = {"config": asdict(cfg), "kernel_backend": kernels.BACKEND, **extra}
    with open(path, "w") as fh:
        json.dump(body, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _out_dir(cfg) -> str:
    d = cfg.out or os.path.join("runs", cfg.command)
    os.makedirs(d, exist_ok=True)
    return d


def _ci(values, z=1.96):
    n = len(values)
    m = sum(values) / n
    if n < 2:
        return m, m, m
    var = sum((v - m) ** 2 for v in values) / (n - 1)
    h = z * math.sqrt(var / n)
    return m, m - h, m + h


# -- subcommands -----------------------------------------------------------------------


def analytic_rows(cfg: ExperimentConfig):
    base = {"D": cfg.D, "lambda": cfg.lam, "delta": cfg.delta}
    if cfg.sweep:
        key, vals = _sweep_values(cfg.sweep)
        grid = [{**base, key: v} for v in vals]
    else:
        grid = [base]
    rows = []
    for g in grid:
        D, lam, delta = g["D"], g["lambda"], g["delta"]
        rp = analytic.rd_poisson(D, lam)
        try:
            rd = analytic.rd_discrete(D, lam, delta)
            pstar = 1.0 if D >= 1 else analytic.optimal_test_channel(D, lam, delta).p_hat1_given_0
            rds = rd / delta
        except analytic.InfeasibleError:
            rd = rds = pstar = None
        rows.append([D, lam, delta, rp, rd, rds, pstar])
    return rows


def run_analytic(cfg):
    rows = analytic_rows(cfg)
    if cfg.out:
        _write_csv(cfg.out, ANALYTIC_COLUMNS, rows)
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(ANALYTIC_COLUMNS)
        for r in rows:
            w.writerow([_num(v) for v in r])
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


def _cover_source(cfg):
    if cfg.command == "adversary-sim" and cfg.pattern_file:
        pat = read_pattern(cfg.pattern_file)
        if pat.horizon != exact(cfg.T):
            raise UsageError(f"pattern horizon {pat.horizon} differs from --T {cfg.T}")
        return pat
    return SourceConfig(cfg.lam, cfg.T, cfg.source, cfg.shape, cfg.burst, cfg.burst_width)


def run_cover(cfg):
    source = _cover_source(cfg)
    spec = CodebookSpec(cfg.rate, cfg.T, cfg.delta, cfg.D, SeedSpec(cfg.seed), cfg.budget)
    res = run_covering_trials(spec, source, cfg.trials, SeedSpec(cfg.seed), cfg.workers)
    d = _out_dir(cfg)
    rows = [[r.trial, cfg.T, cfg.delta, cfg.lam, cfg.D, cfg.rate, spec.M, r.k_ones, r.index,
             r.fallback, float(r.distortion)] for r in res.records]
    _write_csv(os.path.join(d, "trials.csv"), COVER_COLUMNS, rows)
    dist = [float(r.distortion) for r in res.records]
    fb = [float(r.fallback) for r in res.records]
    ks = [float(r.k_ones) for r in res.records]
    covered = [float(r.distortion) for r in res.records if not r.fallback]
    pred = res.prediction or {}
    summary = [
        ["mean_distortion", *_ci(dist), pred.get("mean_distortion")],
        ["fallback_rate", *_ci(fb), pred.get("fallback_rate")],
        ["covered_mean_distortion", *(_ci(covered) if covered else (None,) * 3),
         pred.get("covered_distortion")],
        ["mean_k_ones", *_ci(ks), pred.get("mean_k")],
        ["covered_distortion_formula", None, None, None,
         expected_covered_distortion(cfg.lam, cfg.delta, cfg.D) if cfg.lam * cfg.delta <= 1 else None],
    ]
    _write_csv(os.path.join(d, "summary.csv"), ["metric", "empirical", "ci_low", "ci_high", "predicted"],
               summary)
    _write_manifest(os.path.join(d, "manifest.json"), cfg, {
        "M": spec.M, "n": spec.n,
        "predictions": {
            "rd_poisson_bits_per_s": analytic.rd_poisson(cfg.D, cfg.lam),
            "covered_distortion_D_plus": summary[4][4],
            **pred,
        },
        "empirical": {"mean_distortion": res.mean_distortion, "fallback_rate": res.fallback_rate,
                      "mean_k_ones": res.mean_k},
        "wall_time_s": res.wall_time,
    })
    return EXIT_OK


def run_wz(cfg):
    nu = cfg.nu if cfg.nu is not None else default_nu(cfg.lam, cfg.p)
    spec = WzSpec(cfg.rate, cfg.rate_tilde, cfg.T, cfg.delta, cfg.D, nu, SeedSpec(cfg.seed),
                  None, cfg.budget)
    res = run_wz_trials(spec, cfg.lam, cfg.p, cfg.trials, SeedSpec(cfg.seed), cfg.workers)
    d = _out_dir(cfg)
    charged = spec.charged_bits()
    rows = [[r.trial, cfg.T, cfg.delta, cfg.lam, cfg.p, nu, cfg.D, cfg.rate, cfg.rate_tilde,
             r.mu_count, r.known_count, r.outcome, float(r.distortion), charged] for r in res.records]
    _write_csv(os.path.join(d, "trials.csv"), WZ_COLUMNS, rows)
    pred = res.prediction or {}
    dist = [float(r.distortion) for r in res.records]
    flag = lambda o: [float(r.outcome == o) for r in res.records]
    fail = [float(r.outcome != OK) for r in res.records]
    summary = [
        ["mean_distortion", *_ci(dist), pred.get("mean_distortion")],
        ["ambiguity_rate", *_ci(flag(AMBIGUOUS)), pred.get("ambiguity_rate")],
        ["enc_fail_rate", *_ci(flag(ENC_FAIL)), pred.get("enc_fail_rate")],
        ["failure_rate", *_ci(fail), pred.get("failure_rate")],
        ["rate_bits_per_s", cfg.rate, None, None, None],
        ["charged_rate_bits_per_s", charged / float(exact(cfg.T)), None, None, None],
        ["rd_poisson_no_side_info", None, None, None, analytic.rd_poisson(cfg.D, cfg.lam)],
        ["rd_wyner_ziv", None, None, None, analytic.rd_wyner_ziv(cfg.D, cfg.lam, cfg.p)],
    ]
    _write_csv(os.path.join(d, "summary.csv"), ["metric", "empirical", "ci_low", "ci_high", "predicted"],
               summary)
    mean_mu = sum(r.mu_count for r in res.records) / len(res.records)
    _write_manifest(os.path.join(d, "manifest.json"), cfg, {
        "M": spec.M, "L": spec.L, "n": spec.n, "nu": nu, "charged_bits": charged,
        "predictions": {
            "rd_poisson_bits_per_s": analytic.rd_poisson(cfg.D, cfg.lam),
            "rd_wyner_ziv_bits_per_s": analytic.rd_wyner_ziv(cfg.D, cfg.lam, cfg.p),
            "rate_bounds_bits_at_mean_count": wz_rate_bounds(round(mean_mu), nu, cfg.T, cfg.D),
            **pred,
        },
        "empirical": {"mean_distortion": res.mean_distortion, "failure_rate": res.failure_rate,
                      "ambiguity_rate": res.rate(AMBIGUOUS), "enc_fail_rate": res.rate(ENC_FAIL),
                      "eq14_holds_all": all(r.eq14_ok for r in res.records)},
        "wall_time_s": res.wall_time,
    })
    return EXIT_OK


def run_transform(cfg):
    with open(cfg.code_file) as fh:
        code = parse_code(fh.read(), cfg.T)
    approx = None
    if cfg.approx_file:
        with open(cfg.approx_file) as fh:
            approx = parse_code(fh.read(), code.horizon).codewords
    try:
        tc = transform_code(code, cfg.delta, cfg.epsilon, approx)
    except ApproximationError as e:
        raise UsageError(str(e)) from None
    grid_lines = ["".join(map(str, tc.codeword(m).bits.tolist())) for m in range(1, tc.M + 1)]
    report = [[r.index, r.intervals, float(r.measure_approx), float(r.measure_grid),
               float(r.inflation), float(r.bound), r.ok] for r in tc.reports()]
    cols = ["codeword", "N_m", "measure_approx", "measure_grid", "inflation", "bound_2NmDelta", "ok"]
    if cfg.out:
        os.makedirs(cfg.out, exist_ok=True)
        with open(os.path.join(cfg.out, "grid_code.txt"), "w") as fh:
            fh.write("\n".join(grid_lines) + "\n")
        _write_csv(os.path.join(cfg.out, "bounds.csv"), cols, report)
        with open(os.path.join(cfg.out, "exception.txt"), "w") as fh:
            fh.write(";".join(f"{a},{b}" for a, b in tc.exception.intervals) + "\n")
    else:
        sys.stdout.write("\n".join(grid_lines) + "\n")
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(cols)
        for r in report:
            w.writerow([_num(v) for v in r])
    return EXIT_OK


def run(cfg: ExperimentConfig) -> int:
    return {
        "analytic": run_analytic,
        "cover-sim": run_cover,
        "adversary-sim": run_cover,
        "wz-sim": run_wz,
        "transform": run_transform,
    }[cfg.command](cfg)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
        return run(cfg)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except BudgetExceeded as e:
        print(f"refused: {e}", file=sys.stderr)
        return EXIT_BUDGET
    except OSError as e:
        print(f"I/O error: {e.filename or ''}: {e.strerror or e}", file=sys.stderr)
        return EXIT_IO
    except ValueError as e:
        # malformed input files and out-of-domain parameters
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
