"""Monte-Carlo validation harness, analytic sweeps, and runtime benchmarks.

Trials are processed in fixed-size batches, each batch drawing from its own
random stream, and per-batch sums are reduced in batch order with exact
summation, so results are bit-identical for any worker count.  The analog
path can optionally be passed through a b-bit quantizer to emulate a
finite-resolution ADC instead of ideal analog acquisition.
"""

from __future__ import annotations

import math
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .allocation import AllocationResult, DitherScheme, PowerBudget, allocate, allocate_with_dither, max_nq, na_range
from .closed_form import mse_closed_form
from .exceptions import ModelError
from .estimator import LmmseFilter, lmmse
from .model import (
    MixedModel,
    OrthoBlockParams,
    QuantizerSpec,
    RngStream,
    make_ortho_matrices,
    quantize_bbit,
    sample_measurements,
    sample_parameter,
)

# Default b-bit emulation of the analog path: 6 bits on [-5, 5].
DEFAULT_ANALOG_QUANTIZER = QuantizerSpec(bits=6, lo=-5.0, hi=5.0)


@dataclass(frozen=True)
class SimConfig:
    """Monte-Carlo run configuration.

    ``analog_quantizer=None`` means ideal analog measurements; pass a
    :class:`QuantizerSpec` (e.g. ``DEFAULT_ANALOG_QUANTIZER``) to emulate a
    finite-resolution analog ADC.  ``scenario`` is a free-form label carried
    through from experiment configs.
    """

    trials: int = 100_000
    rng_seed: int = 0
    analog_quantizer: QuantizerSpec | None = None
    scenario: str = "custom"
    batch_size: int = 8192
    workers: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ModelError("trials must be >= 1")
        if self.batch_size < 1 or self.workers < 1:
            raise ModelError("batch_size and workers must be >= 1")


@dataclass
class SimResult:
    """Aggregated Monte-Carlo output next to the analytic prediction."""

    empirical_mse: float
    std_error: float
    analytic_mse: float
    trials_run: int


@dataclass(frozen=True)
class TimingStats:
    """Median/best wall time over a fixed number of measured repetitions."""

    median_s: float
    best_s: float
    repeats: int


@dataclass
class BenchResult:
    """Runtime of one allocation sweep in both MSE-evaluation modes."""

    closed_form_time: TimingStats
    direct_time: TimingStats | None
    n_a_max: int
    m: int


# ---------------------------------------------------------------------------
# Monte-Carlo estimation
# ---------------------------------------------------------------------------


def _run_batch(model: MixedModel, filt: LmmseFilter, cfg: SimConfig, batch: int, count: int):
    theta = sample_parameter(model.sigma_theta, RngStream(cfg.rng_seed, 2 * batch), size=count)
    x_a, x_q = sample_measurements(model, theta, RngStream(cfg.rng_seed, 2 * batch + 1))
    if cfg.analog_quantizer is not None and x_a.size:
        x_a = quantize_bbit(x_a, cfg.analog_quantizer)
    x = np.concatenate([x_a, x_q], axis=0)
    err = np.abs(filt.w @ x - theta) ** 2
    per_trial = err.sum(axis=0)
    return float(per_trial.sum()), float((per_trial**2).sum())


def run_monte_carlo(model: MixedModel, filt: LmmseFilter, cfg: SimConfig) -> SimResult:
    """Estimate the empirical MSE of a filter by seeded Monte-Carlo trials.

    Per trial: draw the parameter and measurements, apply the filter, and
    accumulate the squared estimation error.  The standard error is the
    sample standard deviation of the per-trial squared error divided by
    sqrt(trials).
    """
    if filt.w.shape != (model.m, model.n_analog + model.n_quantized):
        raise ModelError("filter shape does not match the model")
    n_batches = math.ceil(cfg.trials / cfg.batch_size)
    counts = [
        min(cfg.batch_size, cfg.trials - b * cfg.batch_size) for b in range(n_batches)
    ]

    def job(b):
        return _run_batch(model, filt, cfg, b, counts[b])

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            partials = list(pool.map(job, range(n_batches)))
    else:
        partials = [job(b) for b in range(n_batches)]

    # Exact summation in batch order keeps the reduction partition-independent.
    total = math.fsum(p[0] for p in partials)
    total_sq = math.fsum(p[1] for p in partials)
    t = cfg.trials
    mean = total / t
    var = max(total_sq - t * mean**2, 0.0) / (t - 1) if t > 1 else 0.0
    return SimResult(
        empirical_mse=mean,
        std_error=math.sqrt(var / t),
        analytic_mse=filt.mse,
        trials_run=t,
    )


# ---------------------------------------------------------------------------
# Analytic sweeps
# ---------------------------------------------------------------------------


def sweep_mse_vs_noise(
    params_base: OrthoBlockParams,
    sigma_grid,
    allocations,
) -> list[dict]:
    """Closed-form MSE over a noise grid for fixed (n_a, n_q) allocations.

    The noise variance applies to both measurement paths.  Returns one row
    per (sigma2, allocation) cell.
    """
    rows = []
    for sigma2 in sigma_grid:
        for n_a, n_q in allocations:
            params = replace(params_base, n_a=int(n_a), n_q=int(n_q), var_a=float(sigma2), var_q=float(sigma2))
            rows.append(
                {
                    "sigma2": float(sigma2),
                    "n_a": int(n_a),
                    "n_q": int(n_q),
                    "mse_analytic": mse_closed_form(params).value,
                }
            )
    return rows


def sweep_allocation_vs_noise(
    m: int,
    budget: PowerBudget,
    sigma_grid,
    dither_scheme: DitherScheme | None = None,
    rho_a: float = 1.0,
    rho_q: float = 1.0,
) -> list[dict]:
    """Policy comparison per noise level: all-analog, all-quantized, optimal, dithered.

    The all-analog row spends the whole budget on analog blocks; the
    all-quantized row on quantized blocks; the optimal rows come from the
    frontier search, without and with dither optimization.
    """
    scheme = dither_scheme if dither_scheme is not None else DitherScheme()
    n_a_max = na_range(m, budget)[-1]
    rows = []
    for sigma2 in sigma_grid:
        params = OrthoBlockParams(
            m=m, n_a=0, n_q=0, rho_a=rho_a, rho_q=rho_q,
            var_a=float(sigma2), var_q=float(sigma2),
        )
        plain = allocate(params, budget)
        dithered = allocate_with_dither(params, budget, scheme)
        rows.append(
            {
                "sigma2": float(sigma2),
                "mse_all_analog": mse_closed_form(replace(params, n_a=n_a_max, n_q=0)).value,
                "mse_all_quantized": mse_closed_form(
                    replace(params, n_a=0, n_q=max_nq(0, m, budget))
                ).value,
                "mse_optimal": plain.mse_star,
                "mse_optimal_dithered": dithered.mse_star,
                "n_a_star": plain.n_a_star,
                "n_q_star": plain.n_q_star,
                "n_a_star_dither": dithered.n_a_star,
                "n_q_star_dither": dithered.n_q_star,
                "sigma_d2_star": dithered.dither_var_star,
            }
        )
    return rows


# ---------------------------------------------------------------------------
# Runtime benchmark
# ---------------------------------------------------------------------------


def _timeit(fn, repeats: int, warmup: int, warmup_fn=None, min_rep_time: float = 0.0) -> TimingStats:
    """Median/best of ``repeats`` timed calls after ``warmup`` untimed ones.

    Fast callables are batched into inner loops so that every measured
    repetition spans at least ``min_rep_time`` seconds of wall clock.
    """
    warm = warmup_fn if warmup_fn is not None else fn
    for _ in range(warmup):
        warm()
    inner = 1
    if min_rep_time > 0.0:
        t0 = time.perf_counter()
        fn()
        dt = time.perf_counter() - t0
        if dt < min_rep_time:
            inner = max(1, math.ceil(min_rep_time / max(dt, 1e-9)))
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        for _ in range(inner):
            fn()
        times.append((time.perf_counter() - t0) / inner)
    return TimingStats(median_s=statistics.median(times), best_s=min(times), repeats=repeats)


def direct_frontier_sweep(
    params_base: OrthoBlockParams,
    budget: PowerBudget,
    h_full: np.ndarray,
    g1: np.ndarray,
) -> AllocationResult:
    """Frontier search evaluating each point with the matrix-solve MSE.

    Same search space as :func:`~mixedres.allocation.allocate`, but every
    point pays for covariance assembly and a dense linear solve; this is the
    "direct" arm of the runtime comparison.
    """
    m = params_base.m
    eye = np.eye(m, dtype=np.complex128)
    trace = []
    best = None
    for n_a in na_range(m, budget):
        n_q = max_nq(n_a, m, budget)
        if n_a == 0 and n_q == 0:
            mse = float(m)
        else:
            model = MixedModel(
                h=h_full[: m * n_a],
                g=np.tile(g1, (n_q, 1)) if n_q else np.zeros((0, m), dtype=np.complex128),
                sigma_theta=eye,
                var_a=params_base.var_a,
                var_q=params_base.var_q,
            )
            mse = lmmse(model).mse
        trace.append((n_a, n_q, 0.0, mse))
        key = (mse, n_a, n_q)
        if best is None or key < best:
            best = key
    mse, n_a, n_q = best
    return AllocationResult(n_a_star=n_a, n_q_star=n_q, dither_var_star=0.0, mse_star=mse, trace=trace)


def bench_runtime(
    m_list,
    n_a_max_list,
    bits: int = 6,
    rho: float = 1.0,
    sigma2: float = 1.0,
    repeats: int = 10,
    direct_repeats: int | None = None,
    warmup: int = 2,
    include_direct: bool = True,
    rng_seed: int = 0,
) -> list[BenchResult]:
    """Time the allocation sweep with closed-form vs matrix-solve MSE.

    The budget is pinned to ``2**bits * m * n_a_max`` so the frontier always
    contains ``n_a_max + 1`` points.  The direct arm warms up on the
    cheapest frontier point; set ``direct_repeats`` to control its measured
    repetitions separately (large instances make full-sweep repetitions
    expensive).
    """
    results = []
    for m in m_list:
        for n_a_max in n_a_max_list:
            budget = PowerBudget(bits=bits, p_max_norm=float(2**bits * m * n_a_max))
            params = OrthoBlockParams(
                m=m, n_a=0, n_q=0, rho_a=rho, rho_q=rho,
                var_a=float(sigma2), var_q=float(sigma2),
            )
            closed_stats = _timeit(
                lambda: allocate(params, budget),
                repeats=repeats,
                warmup=warmup,
                min_rep_time=0.01,
            )
            direct_stats = None
            if include_direct:
                # One quantized block suffices; the sweep tiles it per point.
                h_full, g_full = make_ortho_matrices(
                    replace(params, n_a=n_a_max, n_q=1), RngStream(rng_seed)
                )
                g1 = g_full[:m]
                top = na_range(m, budget)[-1]

                def warm_once():
                    # Cheapest frontier point keeps warm-up affordable.
                    small = MixedModel(
                        h=h_full[: m * top],
                        g=np.tile(g1, (max_nq(top, m, budget), 1))
                        if max_nq(top, m, budget)
                        else np.zeros((0, m), dtype=np.complex128),
                        sigma_theta=np.eye(m, dtype=np.complex128),
                        var_a=float(sigma2),
                        var_q=float(sigma2),
                    )
                    lmmse(small)

                direct_stats = _timeit(
                    lambda: direct_frontier_sweep(params, budget, h_full, g1),
                    repeats=direct_repeats if direct_repeats is not None else repeats,
                    warmup=warmup,
                    warmup_fn=warm_once,
                )
            results.append(
                BenchResult(
                    closed_form_time=closed_stats,
                    direct_time=direct_stats,
                    n_a_max=n_a_max,
                    m=m,
                )
            )
    return results
