"""Batch experiment runner emitting reproducible CSV artifacts.

Configuration is a strict JSON object; unknown keys, duplicate keys and
wrongly typed values are all rejected.  Every key is optional except that a
mode must arrive either in the config or as the command-line positional.

    {
      "schema": 1,
      "mode": "analyze" | "asymptotic" | "montecarlo" | "converge"
              | "sweep-grid" | "sweep-limits",
      "seed": 0,
      "output": "out.csv",
      "params": {"N": 128, "alpha": 1.0, "P": 10.0, "m": 1.0,
                 "sigma_v2": 1.0, "sigma_w2": 1.0, "p0": 0.5},
      "detector": {"criterion": "bayes" | "np" | "fixed",
                   "alpha_fa": 0.05, "tau_prime": 0.0},
      "mc": {"trials": 100000, "seed": 0, "workers": 1},
      "grid": {"N": [8, 16, 32, 64, 128], "alpha": [0.5, 1.0, 2.0, 4.0],
               "seeds": 20},
      "matrix_path": "signatures.csv"
    }

"params" takes either "alpha" (sensor count rounds to alpha * N) or an
explicit "Ns", not both.  "mc.seed" defaults to the top-level seed.
"grid.seeds" is the number of per-cell seeds used by converge mode.
"matrix_path" (analyze and montecarlo only) loads the signature matrix
from CSV instead of drawing it from the seed.

Exit codes: 0 success, 1 configuration or validation error, 2 runtime
failure (I/O, numerical breakdown).  Identical config and seed give a
byte-identical output file; worker counts change wall time only.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import (
    asymptotic_params,
    asymptotic_performance,
    large_alpha_pe,
    single_sensor_pe,
)
from .convergence import (
    cross_term_experiment,
    diagonal_term_experiment,
    mil_residual_experiment,
    quadratic_form_convergence,
)
from .core import BAYES, CRITERIA, FIXED, NEYMAN_PEARSON, DetectorSpec, SystemParams, sensors_for_load
from .errors import (
    DimensionMismatch,
    DomainError,
    InvalidParam,
    InvalidSpreadingMatrix,
    NumericalFailure,
    ParseError,
)
from .exact import ChannelModel, exact_performance, quadratic_form
from .montecarlo import CHUNK_TRIALS, NORMAL_SAMPLER_ID, RNG_ID, McConfig, estimate
from .spreading import GENERATOR_ID, generate, load_csv

MODES = ("analyze", "asymptotic", "montecarlo", "converge", "sweep-grid", "sweep-limits")

_SEED_MAX = 2**64
_DEFAULT_GRID_N = (8, 16, 32, 64, 128)
_DEFAULT_GRID_ALPHA = (0.5, 1.0, 2.0, 4.0)
_CONVERGE_SEED_STREAM = 101


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved run description: mode, model, detector, budgets, output."""

    mode: str
    params: SystemParams
    detector: DetectorSpec
    mc: McConfig
    seed: int
    grid_N: tuple[int, ...]
    grid_alpha: tuple[float, ...]
    cell_seeds: int
    output: str | None = None
    matrix_path: str | None = None


# ---------------------------------------------------------------- parsing

def _reject_duplicates(pairs):
    out = {}
    for key, value in pairs:
        if key in out:
            raise ParseError(f"duplicate key {key!r} in configuration")
        out[key] = value
    return out


def _check_keys(section: dict, allowed: set, where: str) -> None:
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ParseError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def _get_int(section: dict, key: str, where: str, default=None):
    if key not in section:
        return default
    val = section[key]
    if not isinstance(val, int) or isinstance(val, bool):
        raise ParseError(f"{where}.{key} must be an integer, got {val!r}")
    return val


def _get_num(section: dict, key: str, where: str, default=None):
    if key not in section:
        return default
    val = section[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ParseError(f"{where}.{key} must be a number, got {val!r}")
    if not math.isfinite(val):
        raise ParseError(f"{where}.{key} must be finite, got {val!r}")
    return float(val)


def _get_str(section: dict, key: str, where: str, default=None):
    if key not in section:
        return default
    val = section[key]
    if not isinstance(val, str):
        raise ParseError(f"{where}.{key} must be a string, got {val!r}")
    return val


def _get_section(doc: dict, key: str) -> dict:
    val = doc.get(key, {})
    if not isinstance(val, dict):
        raise ParseError(f"{key} must be a JSON object, got {val!r}")
    return val


def _ascending(values, what: str) -> None:
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ParseError(f"{what} must be strictly ascending, got {list(values)}")


def _parse_params(doc: dict) -> SystemParams:
    sec = _get_section(doc, "params")
    _check_keys(sec, {"N", "Ns", "alpha", "P", "m", "sigma_v2", "sigma_w2", "p0"}, "params")
    if "Ns" in sec and "alpha" in sec:
        raise ParseError("params takes either Ns or alpha, not both")
    N = _get_int(sec, "N", "params", default=128)
    if "Ns" in sec:
        Ns = _get_int(sec, "Ns", "params")
    else:
        Ns = sensors_for_load(_get_num(sec, "alpha", "params", default=1.0), N)
    p0 = _get_num(sec, "p0", "params", default=0.5)
    return SystemParams(
        N=N,
        Ns=Ns,
        P=_get_num(sec, "P", "params", default=10.0),
        m=_get_num(sec, "m", "params", default=1.0),
        sigma_v2=_get_num(sec, "sigma_v2", "params", default=1.0),
        sigma_w2=_get_num(sec, "sigma_w2", "params", default=1.0),
        p0=p0,
        p1=1.0 - p0,
    )


def _parse_detector(doc: dict) -> DetectorSpec:
    sec = _get_section(doc, "detector")
    _check_keys(sec, {"criterion", "alpha_fa", "tau_prime"}, "detector")
    criterion = _get_str(sec, "criterion", "detector", default=BAYES)
    if criterion not in CRITERIA:
        raise ParseError(f"detector.criterion must be one of {CRITERIA}, got {criterion!r}")
    alpha_fa = _get_num(sec, "alpha_fa", "detector")
    tau_prime = _get_num(sec, "tau_prime", "detector")
    if criterion != NEYMAN_PEARSON and alpha_fa is not None:
        raise ParseError("detector.alpha_fa only applies to criterion 'np'")
    if criterion != FIXED and tau_prime is not None:
        raise ParseError("detector.tau_prime only applies to criterion 'fixed'")
    return DetectorSpec(criterion=criterion, alpha_fa=alpha_fa, tau_prime=tau_prime)


def _parse_mc(doc: dict, default_seed: int) -> McConfig:
    sec = _get_section(doc, "mc")
    _check_keys(sec, {"trials", "seed", "workers"}, "mc")
    return McConfig(
        trials_per_hypothesis=_get_int(sec, "trials", "mc", default=100_000),
        seed=_get_int(sec, "seed", "mc", default=default_seed),
        worker_hint=_get_int(sec, "workers", "mc", default=None),
    )


def _parse_grid(doc: dict) -> tuple[tuple[int, ...], tuple[float, ...], int]:
    sec = _get_section(doc, "grid")
    _check_keys(sec, {"N", "alpha", "seeds"}, "grid")
    grid_N = sec.get("N", list(_DEFAULT_GRID_N))
    if not isinstance(grid_N, list) or not grid_N:
        raise ParseError(f"grid.N must be a non-empty list, got {grid_N!r}")
    for v in grid_N:
        if not isinstance(v, int) or isinstance(v, bool) or v < 1:
            raise ParseError(f"grid.N entries must be integers >= 1, got {v!r}")
    _ascending(grid_N, "grid.N")
    grid_alpha = sec.get("alpha", list(_DEFAULT_GRID_ALPHA))
    if not isinstance(grid_alpha, list) or not grid_alpha:
        raise ParseError(f"grid.alpha must be a non-empty list, got {grid_alpha!r}")
    for v in grid_alpha:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v) or v <= 0:
            raise ParseError(f"grid.alpha entries must be finite numbers > 0, got {v!r}")
    grid_alpha = [float(v) for v in grid_alpha]
    _ascending(grid_alpha, "grid.alpha")
    cell_seeds = _get_int(sec, "seeds", "grid", default=20)
    if cell_seeds < 1:
        raise ParseError(f"grid.seeds must be >= 1, got {cell_seeds}")
    return tuple(grid_N), tuple(grid_alpha), cell_seeds


def parse_config(text: bytes | str, *, mode: str | None = None) -> ExperimentConfig:
    """Parse and validate a JSON configuration document.

    `mode`, when given, is the command-line positional; it must agree with
    the config's own "mode" key if both are present.  Raises ParseError for
    structural problems and InvalidParam for values the model rejects.
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"configuration is not valid UTF-8: {exc}") from None
    try:
        doc = json.loads(text, object_pairs_hook=_reject_duplicates)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ParseError(f"top level must be a JSON object, got {type(doc).__name__}")
    _check_keys(
        doc,
        {"schema", "mode", "seed", "output", "params", "detector", "mc", "grid", "matrix_path"},
        "top level",
    )
    schema = _get_int(doc, "schema", "top level", default=1)
    if schema != 1:
        raise ParseError(f"unsupported schema {schema}, expected 1")
    cfg_mode = _get_str(doc, "mode", "top level")
    if cfg_mode is not None and cfg_mode not in MODES:
        raise ParseError(f"unknown mode {cfg_mode!r}, expected one of {MODES}")
    if mode is not None and cfg_mode is not None and mode != cfg_mode:
        raise ParseError(f"mode mismatch: command line says {mode!r}, config says {cfg_mode!r}")
    eff_mode = mode if mode is not None else cfg_mode
    if eff_mode is None:
        raise ParseError("no mode: give one on the command line or as \"mode\" in the config")
    seed = _get_int(doc, "seed", "top level", default=0)
    if not 0 <= seed < _SEED_MAX:
        raise ParseError(f"seed must lie in [0, 2**64), got {seed}")
    output = _get_str(doc, "output", "top level")
    matrix_path = _get_str(doc, "matrix_path", "top level")
    if matrix_path is not None and eff_mode not in ("analyze", "montecarlo"):
        raise ParseError(f"matrix_path only applies to analyze and montecarlo, not {eff_mode!r}")
    grid_N, grid_alpha, cell_seeds = _parse_grid(doc)
    return ExperimentConfig(
        mode=eff_mode,
        params=_parse_params(doc),
        detector=_parse_detector(doc),
        mc=_parse_mc(doc, default_seed=seed),
        seed=seed,
        grid_N=grid_N,
        grid_alpha=grid_alpha,
        cell_seeds=cell_seeds,
        output=output,
        matrix_path=matrix_path,
    )


# ---------------------------------------------------------------- running

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return format(float(v), ".9g")


def _derive_seed(master: int, *key: int) -> int:
    ss = np.random.SeedSequence(entropy=master, spawn_key=tuple(key))
    return int(ss.generate_state(1, np.uint64)[0])


def _detector_line(det: DetectorSpec) -> str:
    if det.criterion == NEYMAN_PEARSON:
        return f"detector=np alpha_fa={_fmt(det.alpha_fa)}"
    if det.criterion == FIXED:
        return f"detector=fixed tau_prime={_fmt(det.tau_prime)}"
    return "detector=bayes"


def _base_meta(config: ExperimentConfig) -> list[str]:
    p = config.params
    return [
        f"artifact=cdmafusion-{__version__}",
        "schema=1",
        f"mode={config.mode}",
        f"P={_fmt(p.P)} m={_fmt(p.m)} sigma_v2={_fmt(p.sigma_v2)} sigma_w2={_fmt(p.sigma_w2)} "
        f"p0={_fmt(p.p0)} p1={_fmt(p.p1)}",
        _detector_line(config.detector),
        f"seed={config.seed}",
        f"spreading_generator={GENERATOR_ID}",
    ]


def _instance_meta(config: ExperimentConfig) -> list[str]:
    p = config.params
    return [f"N={p.N} Ns={p.Ns} alpha={_fmt(p.Ns / p.N)}"]


def _grid_meta(config: ExperimentConfig, alphas: bool) -> list[str]:
    lines = [f"grid_N={','.join(str(n) for n in config.grid_N)}"]
    if alphas:
        lines.append(f"grid_alpha={','.join(_fmt(a) for a in config.grid_alpha)}")
    return lines


def _load_matrix(path: str):
    try:
        return load_csv(path)
    except OSError as exc:
        raise ParseError(f"cannot read matrix file {path!r}: {exc}") from None


def _signatures(config: ExperimentConfig):
    if config.matrix_path is not None:
        return _load_matrix(config.matrix_path)
    return generate(config.params.N, config.params.Ns, config.seed)


def _map_cells(fn, cells, workers: int | None):
    if workers is not None and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, cells))
    return [fn(c) for c in cells]


def _run_analyze(config: ExperimentConfig):
    p = config.params
    S = _signatures(config)
    rep = exact_performance(p, S, config.detector)
    qf = quadratic_form(ChannelModel.from_params(p, S))
    meta = _base_meta(config) + _instance_meta(config)
    if config.matrix_path is not None:
        meta.append(f"matrix_source={config.matrix_path}")
    columns = ["N", "alpha", "Ns", "seed", "tau_prime", "qf", "pf", "pm", "pe"]
    rows = [[p.N, p.Ns / p.N, p.Ns, S.seed, rep.tau_prime, qf, rep.pf, rep.pm, rep.pe]]
    return meta, columns, rows


def _run_asymptotic(config: ExperimentConfig):
    p = config.params
    ap = asymptotic_params(p)
    rep = asymptotic_performance(p, config.detector)
    meta = _base_meta(config) + _instance_meta(config)
    columns = ["N", "alpha", "Ns", "gamma", "beta0", "mu", "tau_prime", "pf", "pm", "pe"]
    rows = [[p.N, ap.alpha, p.Ns, ap.gamma, ap.beta0, ap.mu, rep.tau_prime, rep.pf, rep.pm, rep.pe]]
    return meta, columns, rows


def _run_montecarlo(config: ExperimentConfig):
    p = config.params
    S = _signatures(config)
    est = estimate(p, S, config.detector, config.mc)
    ref = exact_performance(p, S, config.detector)
    meta = _base_meta(config) + _instance_meta(config)
    if config.matrix_path is not None:
        meta.append(f"matrix_source={config.matrix_path}")
    meta.append(
        f"mc_trials={config.mc.trials_per_hypothesis} mc_seed={config.mc.seed} "
        f"mc_chunk={CHUNK_TRIALS} mc_rng={RNG_ID} normal_sampler={NORMAL_SAMPLER_ID}"
    )
    columns = [
        "N", "alpha", "Ns", "seed", "trials", "tau_prime",
        "pf_mc", "pm_mc", "pe_mc", "stderr_pf", "stderr_pm", "stderr_pe",
        "pf_exact", "pm_exact", "pe_exact",
    ]
    rows = [[
        p.N, p.Ns / p.N, p.Ns, S.seed, config.mc.trials_per_hypothesis, est.tau_prime,
        est.pf, est.pm, est.pe, est.mc.stderr_pf, est.mc.stderr_pm, est.mc.stderr_pe,
        ref.pf, ref.pm, ref.pe,
    ]]
    return meta, columns, rows


def _run_converge(config: ExperimentConfig):
    template = config.params
    seeds = [
        int(s)
        for s in np.random.SeedSequence(
            entropy=config.seed, spawn_key=(_CONVERGE_SEED_STREAM,)
        ).generate_state(config.cell_seeds, np.uint64)
    ]
    N_values = list(config.grid_N)
    records = []
    records += quadratic_form_convergence(template, N_values, seeds)
    records += diagonal_term_experiment(template, N_values, seeds)
    records += cross_term_experiment(template, N_values, seeds)
    records += mil_residual_experiment(template, N_values, seeds)
    meta = _base_meta(config) + _instance_meta(config) + _grid_meta(config, alphas=False)
    meta.append(f"seeds_per_cell={config.cell_seeds}")
    columns = ["statistic", "N", "alpha", "Ns", "seed", "observed", "predicted", "abs_error", "rel_error"]
    rows = [
        [r.statistic, r.N, r.alpha, r.Ns, r.seed, r.observed, r.predicted, r.abs_error, r.rel_error]
        for r in records
    ]
    return meta, columns, rows


def _run_sweep_grid(config: ExperimentConfig):
    p = config.params
    cells = [
        (i_n, N, i_a, a, j)
        for i_n, N in enumerate(config.grid_N)
        for i_a, a in enumerate(config.grid_alpha)
        for j in range(config.cell_seeds)
    ]

    def cell(args):
        i_n, N, i_a, a, j = args
        pc = replace(p, N=N, Ns=sensors_for_load(a, N))
        seed = _derive_seed(config.seed, i_n, i_a, j)
        S = generate(pc.N, pc.Ns, seed)
        pe_exact = exact_performance(pc, S, config.detector).pe
        pe_asym = asymptotic_performance(pc, config.detector).pe
        rel_gap = abs(pe_exact - pe_asym) / pe_asym
        return [N, a, pc.Ns, seed, pe_exact, pe_asym, rel_gap]

    rows = _map_cells(cell, cells, config.mc.worker_hint)
    meta = _base_meta(config) + _grid_meta(config, alphas=True)
    meta.append(f"seeds_per_cell={config.cell_seeds}")
    columns = ["N", "alpha", "Ns", "seed", "pe_exact", "pe_asymptotic", "rel_gap"]
    return meta, columns, rows


def _run_sweep_limits(config: ExperimentConfig):
    p = config.params
    cells = [(N, a) for N in config.grid_N for a in config.grid_alpha]

    def cell(args):
        N, a = args
        pc = replace(p, N=N, Ns=sensors_for_load(a, N))
        rep = asymptotic_performance(pc, config.detector)
        return [N, a, rep.pe, large_alpha_pe(pc), single_sensor_pe(pc)]

    rows = _map_cells(cell, cells, config.mc.worker_hint)
    meta = _base_meta(config) + _grid_meta(config, alphas=True)
    columns = ["N", "alpha", "pe_asymptotic", "pe_large_alpha_limit", "pe_single_sensor"]
    return meta, columns, rows


_RUNNERS = {
    "analyze": _run_analyze,
    "asymptotic": _run_asymptotic,
    "montecarlo": _run_montecarlo,
    "converge": _run_converge,
    "sweep-grid": _run_sweep_grid,
    "sweep-limits": _run_sweep_limits,
}


def _write_csv_atomic(path: str | None, meta_lines: list[str], columns: list[str], rows) -> None:
    if path is None:
        raise ParseError('no output path: set "output" in the config or pass --out')
    target = Path(path)
    buf = ["# " + line for line in meta_lines]
    buf.append(",".join(columns))
    for row in rows:
        buf.append(",".join(_fmt(v) for v in row))
    data = ("\n".join(buf) + "\n").encode("ascii")
    parent = target.parent if str(target.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(dir=str(parent), prefix=target.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, target)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def run(config: ExperimentConfig, *, quiet: bool = False) -> int:
    """Execute one experiment and write its CSV; returns the process exit code.

    The output file appears atomically: either the previous content stays
    intact or the complete new file replaces it.
    """
    try:
        meta, columns, rows = _RUNNERS[config.mode](config)
        _write_csv_atomic(config.output, meta, columns, rows)
    except (ParseError, InvalidParam, DomainError, InvalidSpreadingMatrix, DimensionMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return 2
    if not quiet:
        print(f"wrote {len(rows)} rows to {config.output}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cdmafusion",
        description="Detection performance of power-constrained sensor networks "
        "relaying over a shared-bandwidth channel.",
    )
    parser.add_argument("mode", nargs="?", choices=MODES, help="experiment mode (may also come from the config)")
    parser.add_argument("--config", "-c", metavar="PATH", help="JSON configuration file")
    parser.add_argument("--out", "-o", metavar="PATH", help="output CSV path (overrides config)")
    parser.add_argument("--seed", type=int, metavar="INT", help="master seed (overrides config)")
    parser.add_argument("--trials", type=int, metavar="INT", help="Monte Carlo trials per hypothesis")
    parser.add_argument("--workers", type=int, metavar="INT", help="worker threads (wall time only)")
    parser.add_argument("--quiet", "-q", action="store_true", help="suppress the success line")
    return parser


def _apply_overrides(config: ExperimentConfig, args: argparse.Namespace) -> ExperimentConfig:
    mc = config.mc
    if args.seed is not None:
        if not 0 <= args.seed < _SEED_MAX:
            raise ParseError(f"--seed must lie in [0, 2**64), got {args.seed}")
        config = replace(config, seed=args.seed)
        mc = replace(mc, seed=args.seed)
    if args.trials is not None:
        mc = replace(mc, trials_per_hypothesis=args.trials)
    if args.workers is not None:
        mc = replace(mc, worker_hint=args.workers)
    config = replace(config, mc=mc)
    if args.out is not None:
        config = replace(config, output=args.out)
    return config


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        text = Path(args.config).read_bytes() if args.config is not None else b"{}"
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 1
    try:
        config = parse_config(text, mode=args.mode)
        config = _apply_overrides(config, args)
    except (ParseError, InvalidParam, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return run(config, quiet=args.quiet)
