"""Command-line front end: YAML experiment configs in, CSV/JSON tables out.

Subcommands
-----------
mse       analytic (optionally empirical) MSE grid over noise levels
allocate  power-constrained allocation: single budget or noise sweep
dither    allocation with dither-variance optimization, with search trace
simulate  Monte-Carlo validation of a single scenario
bench     runtime comparison of closed-form vs matrix-solve sweeps

Exit codes: 0 success, 2 configuration error, 3 numerical/infeasibility
error.  CSV output is comma-separated with a header row, LF line endings,
and full double precision (17 significant digits).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np
import yaml

from .allocation import (
    DitherScheme,
    PowerBudget,
    allocate,
    allocate_exhaustive,
    allocate_with_dither,
)
from .closed_form import filter_closed_form
from .exceptions import ConfigError, MixedResError
from .estimator import lmmse
from .model import (
    MixedModel,
    OrthoBlockParams,
    QuantizerSpec,
    RngStream,
    make_mimo_model,
    make_scalar_model,
)
from .simulate import SimConfig, bench_runtime, run_monte_carlo, sweep_allocation_vs_noise, sweep_mse_vs_noise

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


# ---------------------------------------------------------------------------
# Config loading and validation
# ---------------------------------------------------------------------------


def _load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config file {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"config file {path} must contain a mapping")
    return cfg


def _check_keys(cfg: dict, allowed: set, where: str) -> None:
    unknown = sorted(set(cfg) - allowed)
    if unknown:
        raise ConfigError(f"unknown key '{unknown[0]}' in {where} config")


def _get(cfg: dict, key: str, kind, where: str, default=..., allow_none: bool = False):
    if key not in cfg:
        if default is ...:
            raise ConfigError(f"missing required key '{key}' in {where} config")
        return default
    value = cfg[key]
    if value is None and allow_none:
        return None
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool):
        raise ConfigError(f"key '{key}' in {where} config must be {kind.__name__}")
    return value


def _sigma_grid(spec, where: str) -> list[float]:
    """A noise grid is either an explicit list or {start, stop, num, spacing}."""
    if isinstance(spec, list):
        if not spec or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in spec):
            raise ConfigError(f"'{where}' must be a non-empty list of numbers")
        return [float(v) for v in spec]
    if isinstance(spec, dict):
        _check_keys(spec, {"start", "stop", "num", "spacing"}, where)
        start = _get(spec, "start", float, where)
        stop = _get(spec, "stop", float, where)
        num = _get(spec, "num", int, where)
        spacing = _get(spec, "spacing", str, where, default="linear")
        if num < 1:
            raise ConfigError(f"'{where}.num' must be >= 1")
        if spacing == "linear":
            return [float(v) for v in np.linspace(start, stop, num)]
        if spacing == "log":
            if start <= 0 or stop <= 0:
                raise ConfigError(f"log spacing in '{where}' needs positive endpoints")
            return [float(v) for v in np.geomspace(start, stop, num)]
        raise ConfigError(f"'{where}.spacing' must be 'linear' or 'log'")
    raise ConfigError(f"'{where}' must be a list or a grid mapping")


def _dither_scheme(cfg, where: str) -> DitherScheme:
    if not isinstance(cfg, dict):
        raise ConfigError(f"'{where}' must be a mapping")
    _check_keys(cfg, {"mode", "grid_max", "grid_step"}, where)
    try:
        return DitherScheme(
            mode=_get(cfg, "mode", str, where, default="quantized-only"),
            grid_max=_get(cfg, "grid_max", float, where, default=2.0),
            grid_step=_get(cfg, "grid_step", float, where, default=0.1),
        )
    except MixedResError as exc:
        raise ConfigError(f"invalid {where} config: {exc}") from exc


def _analog_quantizer(cfg: dict, where: str) -> QuantizerSpec | None:
    bits = _get(cfg, "analog_bits", int, where, default=None, allow_none=True)
    if bits is None:
        return None
    rng = _get(cfg, "analog_range", list, where, default=[-5.0, 5.0])
    if len(rng) != 2:
        raise ConfigError(f"'analog_range' in {where} config must be [lo, hi]")
    return QuantizerSpec(bits=bits, lo=float(rng[0]), hi=float(rng[1]))


def _budget(cfg: dict, m: int, where: str) -> PowerBudget:
    bits = _get(cfg, "bits", int, where, default=6)
    if "p_max_norm" in cfg and "n_a_max" in cfg:
        raise ConfigError(f"give either 'p_max_norm' or 'n_a_max' in {where} config, not both")
    if "n_a_max" in cfg:
        n_a_max = _get(cfg, "n_a_max", int, where)
        p = float(2**bits * m * n_a_max)
    else:
        p = _get(cfg, "p_max_norm", float, where)
    try:
        return PowerBudget(bits=bits, p_max_norm=p)
    except MixedResError as exc:
        raise ConfigError(f"invalid budget in {where} config: {exc}") from exc


# ---------------------------------------------------------------------------
# Output writing
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _emit(text: str, output: str | None) -> None:
    if output is None:
        sys.stdout.write(text)
    else:
        with open(output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _csv_text(rows: list[dict], fieldnames: list[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(fieldnames)
    for row in rows:
        writer.writerow([_fmt(row[name]) for name in fieldnames])
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _write_table(rows, fieldnames, fmt, output):
    if fmt == "csv":
        _emit(_csv_text(rows, fieldnames), output)
    else:
        _emit(_json_text(rows), output)


def _trace_rows(trace) -> list[dict]:
    return [
        {"n_a": n_a, "n_q": n_q, "sigma_d2": dvar, "mse": mse}
        for n_a, n_q, dvar, mse in trace
    ]


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

_COMMON_KEYS = {"seed", "output", "format"}


def _resolve_io(cfg: dict, args, where: str, default_fmt: str | None):
    seed = _get(cfg, "seed", int, where, default=0)
    if args.seed is not None:
        seed = args.seed
    output = args.output if args.output is not None else _get(cfg, "output", str, where, default=None, allow_none=True)
    fmt = args.format if args.format is not None else _get(cfg, "format", str, where, default=default_fmt, allow_none=True)
    if fmt is not None and fmt not in ("csv", "json"):
        raise ConfigError(f"format must be 'csv' or 'json', got {fmt!r}")
    return seed, output, fmt


def _build_cell_model(scenario, m, rho, pilot, n_a, n_q, sigma2, seed) -> MixedModel:
    if scenario == "scalar":
        return make_scalar_model(n_a, n_q, sigma2)
    return make_mimo_model(m, n_a, n_q, rho, sigma2, pilot=pilot, rng=RngStream(seed))


def cmd_mse(args) -> int:
    where = "mse"
    cfg = _load_config(args.config)
    _check_keys(
        cfg,
        _COMMON_KEYS | {"scenario", "m", "rho", "pilot", "sigma2_grid", "allocations", "empirical"},
        where,
    )
    scenario = _get(cfg, "scenario", str, where, default="scalar")
    if scenario not in ("scalar", "mimo"):
        raise ConfigError(f"scenario must be 'scalar' or 'mimo', got {scenario!r}")
    m = _get(cfg, "m", int, where, default=1)
    rho = _get(cfg, "rho", float, where, default=1.0)
    pilot = _get(cfg, "pilot", str, where, default="random-unitary")
    if scenario == "scalar" and (m != 1 or rho != 1.0):
        raise ConfigError("scalar scenario requires m=1 and rho=1")
    if "sigma2_grid" not in cfg:
        raise ConfigError(f"missing required key 'sigma2_grid' in {where} config")
    grid = _sigma_grid(cfg["sigma2_grid"], "sigma2_grid")
    allocations = _get(cfg, "allocations", list, where)
    pairs = []
    for item in allocations:
        if not (isinstance(item, list) and len(item) == 2):
            raise ConfigError("'allocations' must be a list of [n_a, n_q] pairs")
        pairs.append((int(item[0]), int(item[1])))
    seed, output, fmt = _resolve_io(cfg, args, where, default_fmt="csv")

    params_base = OrthoBlockParams(m=m, n_a=0, n_q=0, rho_a=rho, rho_q=rho, var_a=1.0, var_q=1.0)
    rows = sweep_mse_vs_noise(params_base, grid, pairs)
    fieldnames = ["sigma2", "n_a", "n_q", "mse_analytic"]

    if args.empirical:
        emp = _get(cfg, "empirical", dict, where, default={})
        _check_keys(emp, {"trials", "analog_bits", "analog_range", "batch_size"}, "mse.empirical")
        trials = _get(emp, "trials", int, "mse.empirical", default=100_000)
        quantizer = _analog_quantizer(emp, "mse.empirical")
        batch = _get(emp, "batch_size", int, "mse.empirical", default=8192)
        for idx, row in enumerate(rows):
            n_a, n_q = row["n_a"], row["n_q"]
            if n_a + n_q < 1:
                raise ConfigError("empirical mode needs n_a + n_q >= 1 in every allocation")
            model = _build_cell_model(scenario, m, rho, pilot, n_a, n_q, row["sigma2"], seed)
            params = OrthoBlockParams(
                m=m, n_a=n_a, n_q=n_q, rho_a=rho, rho_q=rho,
                var_a=row["sigma2"], var_q=row["sigma2"],
            )
            filt = filter_closed_form(params, model.h, model.g)
            sim = run_monte_carlo(
                model,
                filt,
                SimConfig(
                    trials=trials,
                    rng_seed=seed + idx,
                    analog_quantizer=quantizer,
                    scenario=scenario,
                    batch_size=batch,
                    workers=args.threads,
                ),
            )
            row["mse_empirical"] = sim.empirical_mse
            row["std_error"] = sim.std_error
        fieldnames += ["mse_empirical", "std_error"]

    _write_table(rows, fieldnames, fmt, output)
    return EXIT_OK


def _allocation_config(cfg, where, args):
    _check_keys(
        cfg,
        _COMMON_KEYS | {"m", "bits", "p_max_norm", "n_a_max", "rho_a", "rho_q", "sigma2", "dither"},
        where,
    )
    m = _get(cfg, "m", int, where)
    budget = _budget(cfg, m, where)
    rho_a = _get(cfg, "rho_a", float, where, default=1.0)
    rho_q = _get(cfg, "rho_q", float, where, default=1.0)
    scheme = _dither_scheme(cfg["dither"], f"{where}.dither") if "dither" in cfg else None
    # Sweep tables default to CSV; single-result runs default to JSON.
    seed, output, fmt = _resolve_io(cfg, args, where, default_fmt=None)
    return m, budget, rho_a, rho_q, scheme, seed, output, fmt


def cmd_allocate(args) -> int:
    where = "allocate"
    cfg = _load_config(args.config)
    m, budget, rho_a, rho_q, scheme, seed, output, fmt = _allocation_config(cfg, where, args)
    sigma2 = cfg.get("sigma2")
    if sigma2 is None:
        raise ConfigError(f"missing required key 'sigma2' in {where} config")

    if isinstance(sigma2, (list, dict)):
        fmt = fmt or "csv"
        grid = _sigma_grid(sigma2, f"{where}.sigma2")
        rows = sweep_allocation_vs_noise(
            m, budget, grid, dither_scheme=scheme, rho_a=rho_a, rho_q=rho_q
        )
        fieldnames = [
            "sigma2", "mse_all_analog", "mse_all_quantized", "mse_optimal",
            "mse_optimal_dithered", "n_a_star", "n_q_star",
            "n_a_star_dither", "n_q_star_dither", "sigma_d2_star",
        ]
        if args.oracle:
            max_dev = 0.0
            for row in rows:
                params = OrthoBlockParams(
                    m=m, n_a=0, n_q=0, rho_a=rho_a, rho_q=rho_q,
                    var_a=row["sigma2"], var_q=row["sigma2"],
                )
                ref = allocate_exhaustive(params, budget, rng=RngStream(seed))
                row["mse_oracle"] = ref.mse_star
                max_dev = max(max_dev, abs(ref.mse_star - row["mse_optimal"]))
            fieldnames.append("mse_oracle")
            print(f"oracle max deviation: {max_dev:.3e}", file=sys.stderr)
        for row in rows:
            if row["n_a_star"] == 0 and row["n_q_star"] == 0:
                print(
                    f"warning: budget infeasible at sigma2={row['sigma2']}; "
                    "falling back to the prior-only point (0, 0)",
                    file=sys.stderr,
                )
        _write_table(rows, fieldnames, fmt, output)
        return EXIT_OK

    if not isinstance(sigma2, (int, float)) or isinstance(sigma2, bool):
        raise ConfigError(f"'sigma2' in {where} config must be a number, list, or grid mapping")
    fmt = fmt or "json"
    params = OrthoBlockParams(
        m=m, n_a=0, n_q=0, rho_a=rho_a, rho_q=rho_q,
        var_a=float(sigma2), var_q=float(sigma2),
    )
    result = allocate_with_dither(params, budget, scheme) if scheme else allocate(params, budget)
    if result.n_a_star == 0 and result.n_q_star == 0:
        print("warning: budget infeasible; returning the prior-only point (0, 0)", file=sys.stderr)
    payload = {
        "n_a_star": result.n_a_star,
        "n_q_star": result.n_q_star,
        "sigma_d2_star": result.dither_var_star,
        "mse_star": result.mse_star,
        "trace": [list(entry) for entry in result.trace],
    }
    if args.oracle:
        ref = allocate_exhaustive(params, budget, rng=RngStream(seed))
        payload["mse_oracle"] = ref.mse_star
        payload["oracle_deviation"] = abs(ref.mse_star - result.mse_star)
        print(f"oracle deviation: {payload['oracle_deviation']:.3e}", file=sys.stderr)
    if fmt == "json":
        _emit(_json_text(payload), output)
    else:
        _write_table(_trace_rows(result.trace), ["n_a", "n_q", "sigma_d2", "mse"], "csv", output)
    return EXIT_OK


def cmd_dither(args) -> int:
    where = "dither"
    cfg = _load_config(args.config)
    m, budget, rho_a, rho_q, scheme, seed, output, fmt = _allocation_config(cfg, where, args)
    if scheme is None:
        raise ConfigError(f"missing required key 'dither' in {where} config")
    fmt = fmt or "json"
    sigma2 = _get(cfg, "sigma2", float, where)
    params = OrthoBlockParams(
        m=m, n_a=0, n_q=0, rho_a=rho_a, rho_q=rho_q,
        var_a=float(sigma2), var_q=float(sigma2),
    )
    result = allocate_with_dither(params, budget, scheme)
    payload = {
        "mode": scheme.mode,
        "n_a_star": result.n_a_star,
        "n_q_star": result.n_q_star,
        "sigma_d2_star": result.dither_var_star,
        "mse_star": result.mse_star,
        "trace": [list(entry) for entry in result.trace],
    }
    if fmt == "json":
        _emit(_json_text(payload), output)
    else:
        _write_table(_trace_rows(result.trace), ["n_a", "n_q", "sigma_d2", "mse"], "csv", output)
    return EXIT_OK


def cmd_simulate(args) -> int:
    where = "simulate"
    cfg = _load_config(args.config)
    _check_keys(
        cfg,
        _COMMON_KEYS
        | {"scenario", "m", "n_a", "n_q", "rho", "pilot", "sigma2", "trials",
           "analog_bits", "analog_range", "batch_size", "filter"},
        where,
    )
    scenario = _get(cfg, "scenario", str, where, default="scalar")
    if scenario not in ("scalar", "mimo"):
        raise ConfigError(f"scenario must be 'scalar' or 'mimo', got {scenario!r}")
    m = _get(cfg, "m", int, where, default=1)
    n_a = _get(cfg, "n_a", int, where)
    n_q = _get(cfg, "n_q", int, where)
    rho = _get(cfg, "rho", float, where, default=1.0)
    pilot = _get(cfg, "pilot", str, where, default="random-unitary")
    sigma2 = _get(cfg, "sigma2", float, where)
    trials = _get(cfg, "trials", int, where, default=100_000)
    batch = _get(cfg, "batch_size", int, where, default=8192)
    filter_kind = _get(cfg, "filter", str, where, default="general")
    if filter_kind not in ("general", "closed"):
        raise ConfigError(f"filter must be 'general' or 'closed', got {filter_kind!r}")
    if scenario == "scalar" and (m != 1 or rho != 1.0):
        raise ConfigError("scalar scenario requires m=1 and rho=1")
    quantizer = _analog_quantizer(cfg, where)
    seed, output, fmt = _resolve_io(cfg, args, where, default_fmt="json")

    model = _build_cell_model(scenario, m, rho, pilot, n_a, n_q, sigma2, seed)
    if filter_kind == "closed":
        params = OrthoBlockParams(
            m=m, n_a=n_a, n_q=n_q, rho_a=rho, rho_q=rho, var_a=sigma2, var_q=sigma2
        )
        filt = filter_closed_form(params, model.h, model.g)
    else:
        filt = lmmse(model)
    sim = run_monte_carlo(
        model,
        filt,
        SimConfig(
            trials=trials,
            rng_seed=seed,
            analog_quantizer=quantizer,
            scenario=scenario,
            batch_size=batch,
            workers=args.threads,
        ),
    )
    row = {
        "empirical_mse": sim.empirical_mse,
        "std_error": sim.std_error,
        "analytic_mse": sim.analytic_mse,
        "trials_run": sim.trials_run,
    }
    if fmt == "json":
        _emit(_json_text(row), output)
    else:
        _write_table([row], list(row.keys()), "csv", output)
    return EXIT_OK


def cmd_bench(args) -> int:
    where = "bench"
    cfg = _load_config(args.config)
    _check_keys(
        cfg,
        _COMMON_KEYS
        | {"m_list", "n_a_max_list", "bits", "rho", "sigma2", "repeats", "direct_repeats", "warmup"},
        where,
    )
    m_list = _get(cfg, "m_list", list, where)
    n_a_max_list = _get(cfg, "n_a_max_list", list, where)
    if not all(isinstance(v, int) and v >= 1 for v in m_list):
        raise ConfigError("'m_list' must contain positive integers")
    if not all(isinstance(v, int) and v >= 1 for v in n_a_max_list):
        raise ConfigError("'n_a_max_list' must contain positive integers")
    bits = _get(cfg, "bits", int, where, default=6)
    rho = _get(cfg, "rho", float, where, default=1.0)
    sigma2 = _get(cfg, "sigma2", float, where, default=1.0)
    repeats = _get(cfg, "repeats", int, where, default=10)
    if args.repeats is not None:
        repeats = args.repeats
    direct_repeats = _get(cfg, "direct_repeats", int, where, default=None, allow_none=True)
    warmup = _get(cfg, "warmup", int, where, default=2)
    seed, output, fmt = _resolve_io(cfg, args, where, default_fmt="csv")

    results = bench_runtime(
        m_list,
        n_a_max_list,
        bits=bits,
        rho=rho,
        sigma2=sigma2,
        repeats=repeats,
        direct_repeats=direct_repeats,
        warmup=warmup,
        rng_seed=seed,
    )
    rows = [
        {
            "M": res.m,
            "n_a_max": res.n_a_max,
            "t_closed_ms": res.closed_form_time.median_s * 1e3,
            "t_direct_ms": res.direct_time.median_s * 1e3,
        }
        for res in results
    ]
    _write_table(rows, ["M", "n_a_max", "t_closed_ms", "t_direct_ms"], fmt, output)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mixedres",
        description="Mixed-resolution Bayesian estimation: MSE evaluation, "
        "resource allocation, dithering, simulation, and benchmarks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    specs = {
        "mse": (cmd_mse, "analytic / empirical MSE grid over noise levels"),
        "allocate": (cmd_allocate, "power-constrained measurement allocation"),
        "dither": (cmd_dither, "allocation with dither optimization"),
        "simulate": (cmd_simulate, "Monte-Carlo validation of one scenario"),
        "bench": (cmd_bench, "closed-form vs matrix-solve runtime comparison"),
    }
    for name, (handler, help_text) in specs.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to the YAML experiment config")
        p.add_argument("--output", default=None, help="output file (default: stdout)")
        p.add_argument("--format", default=None, choices=("csv", "json"))
        p.add_argument("--threads", type=int, default=1, help="Monte-Carlo worker threads")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        if name == "mse":
            p.add_argument("--empirical", action="store_true", help="add Monte-Carlo columns")
        if name == "allocate":
            p.add_argument("--oracle", action="store_true", help="cross-check against the exhaustive solver")
        if name == "bench":
            p.add_argument("--repeats", type=int, default=None, help="override timing repetitions")
        p.set_defaults(handler=handler)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MixedResError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
