"""Power-constrained allocation of analog and 1-bit quantized measurements.

An analog block costs ``2**bits * m`` units of normalized power (Walden's
ADC power model at the high-resolution depth) and a quantized block costs
``2 * m``.  Because an extra quantized measurement never increases the MSE,
the optimum always lies on the max-power frontier

    n_q = floor((p_max_norm - 2**bits * m * n_a) / (2 * m)),

so a one-dimensional search over n_a suffices.  The exhaustive solver scans
every feasible pair with the matrix-solve MSE instead and serves as the
reference oracle at small scale.  Dither optimization adds an inner grid
search over the dither variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .closed_form import mse_closed_form
from .exceptions import InstanceTooLargeError, ModelError
from .estimator import lmmse
from .model import MixedModel, OrthoBlockParams, RngStream, make_ortho_matrices


@dataclass(frozen=True)
class PowerBudget:
    """Normalized power budget with the high-resolution ADC bit depth."""

    bits: int
    p_max_norm: float

    def __post_init__(self):
        if self.bits < 1:
            raise ModelError(f"bits must be >= 1, got {self.bits}")
        if self.p_max_norm <= 0:
            raise ModelError("p_max_norm must be positive")

    def analog_block_cost(self, m: int) -> float:
        return float(2**self.bits * m)

    def quantized_block_cost(self, m: int) -> float:
        return float(2 * m)


@dataclass(frozen=True)
class DitherScheme:
    """Dither search configuration.

    ``quantized-only`` applies the dither variance to the quantized path
    only (the optimal placement); ``both`` applies the same variance to both
    paths; ``none`` disables the search (grid degenerates to {0}).
    """

    mode: str = "quantized-only"
    grid_max: float = 2.0
    grid_step: float = 0.1

    MODES = ("none", "quantized-only", "both")

    def __post_init__(self):
        if self.mode not in self.MODES:
            raise ModelError(f"dither mode must be one of {self.MODES}, got {self.mode!r}")
        if self.mode != "none":
            if self.grid_step <= 0:
                raise ModelError("grid_step must be positive")
            if self.grid_step > self.grid_max:
                raise ModelError("grid_step must not exceed grid_max")

    def grid(self) -> list[float]:
        """Dither variances searched: 0, step, ..., up to grid_max inclusive."""
        if self.mode == "none":
            return [0.0]
        count = int(math.floor(self.grid_max / self.grid_step + 1e-9))
        return [k * self.grid_step for k in range(count + 1)]

    def apply(self, params: OrthoBlockParams, dither_var: float) -> OrthoBlockParams:
        """Return params with the dither variance placed per the scheme mode."""
        if self.mode == "both":
            return replace(params, var_da=dither_var, var_dq=dither_var)
        if self.mode == "quantized-only":
            return replace(params, var_da=0.0, var_dq=dither_var)
        return replace(params, var_da=0.0, var_dq=0.0)


@dataclass
class AllocationResult:
    """Chosen allocation, its MSE, and the full list of evaluated points."""

    n_a_star: int
    n_q_star: int
    dither_var_star: float
    mse_star: float
    trace: list  # (n_a, n_q, dither_var, mse) per evaluated point


@dataclass(frozen=True)
class PolicyDecision:
    """Outcome of the noiseless-quantized decision rule.

    Option 1 keeps at least one quantized measurement alongside the analog
    ones; option 2 spends the whole budget on analog measurements.
    """

    option: int
    n_a: int
    n_q: int


def na_range(m: int, budget: PowerBudget) -> range:
    """Feasible analog block counts 0..floor(p_max_norm / (2**bits * m))."""
    return range(int(math.floor(budget.p_max_norm / budget.analog_block_cost(m))) + 1)


def max_nq(n_a: int, m: int, budget: PowerBudget) -> int:
    """Largest quantized block count that fits next to ``n_a`` analog blocks."""
    if n_a not in na_range(m, budget):
        raise ModelError(f"n_a={n_a} outside the feasible range {na_range(m, budget)}")
    residual = budget.p_max_norm - budget.analog_block_cost(m) * n_a
    return int(math.floor(residual / budget.quantized_block_cost(m)))


def _require_clean_base(params_base: OrthoBlockParams) -> None:
    if params_base.var_da != 0.0 or params_base.var_dq != 0.0:
        raise ModelError("params_base must carry zero dither variances; dither is a decision variable")


def allocate(params_base: OrthoBlockParams, budget: PowerBudget) -> AllocationResult:
    """Minimize the closed-form MSE over the max-power frontier.

    The counts in ``params_base`` are ignored (they are the decision
    variables).  Ties break toward smaller n_a, then smaller n_q.  An
    infeasible budget degenerates to the prior-only point (0, 0).
    """
    _require_clean_base(params_base)
    m = params_base.m
    trace = []
    best = None
    for n_a in na_range(m, budget):
        n_q = max_nq(n_a, m, budget)
        mse = mse_closed_form(replace(params_base, n_a=n_a, n_q=n_q)).value
        trace.append((n_a, n_q, 0.0, mse))
        key = (mse, n_a, n_q)
        if best is None or key < best:
            best = key
    mse, n_a, n_q = best[0], best[1], best[2]
    return AllocationResult(n_a_star=n_a, n_q_star=n_q, dither_var_star=0.0, mse_star=mse, trace=trace)


def allocate_with_dither(
    params_base: OrthoBlockParams, budget: PowerBudget, scheme: DitherScheme
) -> AllocationResult:
    """Joint grid search over the max-power frontier and the dither variance.

    For each frontier point the dither variance runs over the scheme grid;
    the global best is kept with ties broken toward smaller dither variance,
    then smaller n_a.
    """
    _require_clean_base(params_base)
    m = params_base.m
    grid = scheme.grid()
    trace = []
    best = None
    for n_a in na_range(m, budget):
        n_q = max_nq(n_a, m, budget)
        for dvar in grid:
            params = scheme.apply(replace(params_base, n_a=n_a, n_q=n_q), dvar)
            mse = mse_closed_form(params).value
            trace.append((n_a, n_q, dvar, mse))
            key = (mse, dvar, n_a, n_q)
            if best is None or key < best:
                best = key
    mse, dvar, n_a, n_q = best
    return AllocationResult(n_a_star=n_a, n_q_star=n_q, dither_var_star=dvar, mse_star=mse, trace=trace)


def allocate_exhaustive(
    params_base: OrthoBlockParams,
    budget: PowerBudget,
    rng: RngStream | None = None,
    max_pairs: int = 10_000,
    max_rows: int = 2_000,
) -> AllocationResult:
    """Reference solver: scan every feasible pair with the matrix-solve MSE.

    Mixing matrices are drawn once at the largest feasible size and sliced,
    so all evaluated models share the same blocks.  Instances whose feasible
    grid exceeds ``max_pairs`` points or whose largest stacked measurement
    vector exceeds ``max_rows`` rows are refused.
    """
    _require_clean_base(params_base)
    m = params_base.m
    rng = rng if rng is not None else RngStream(0)

    counts = [(n_a, max_nq(n_a, m, budget)) for n_a in na_range(m, budget)]
    n_pairs = sum(nq_max + 1 for _, nq_max in counts)
    if n_pairs > max_pairs:
        raise InstanceTooLargeError(f"feasible grid has {n_pairs} pairs (limit {max_pairs})")
    n_rows = max(m * (n_a + nq_max) for n_a, nq_max in counts)
    if n_rows > max_rows:
        raise InstanceTooLargeError(f"largest model has {n_rows} rows (limit {max_rows})")

    n_a_max = counts[-1][0]
    # One quantized block suffices; each evaluated pair tiles it as needed.
    h_full, g_full = make_ortho_matrices(replace(params_base, n_a=n_a_max, n_q=1), rng)
    g1 = g_full[:m]
    eye = np.eye(m, dtype=np.complex128)

    trace = []
    best = None
    for n_a, nq_max in counts:
        for n_q in range(nq_max + 1):
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


def noiseless_quantized_policy(
    m: int, budget: PowerBudget, rho_a: float, var_a: float
) -> PolicyDecision:
    """Analytic allocation rule for the vanishing quantized-noise regime.

    With noiseless quantizer input the MSE no longer depends on how many
    quantized blocks are used (beyond the first), so the choice reduces to:
    keep one-or-more quantized measurements next to the analog ones
    (option 1), or spend everything on analog measurements (option 2).
    """
    n_a_max = int(math.floor(budget.p_max_norm / budget.analog_block_cost(m)))
    residual = budget.p_max_norm - n_a_max * budget.analog_block_cost(m)
    if residual >= budget.quantized_block_cost(m):
        # Max analog count still leaves room for a quantized measurement.
        return PolicyDecision(option=1, n_a=n_a_max, n_q=max_nq(n_a_max, m, budget))
    if n_a_max == 0:
        # Nothing is affordable at all.
        return PolicyDecision(option=2, n_a=0, n_q=0)
    lhs = ((np.pi - 2.0) * rho_a**2 - 2.0 * rho_a * var_a) * n_a_max
    rhs = 2.0 * var_a**2 - np.pi * rho_a * var_a + (np.pi - 2.0) * rho_a**2
    if lhs > rhs:
        return PolicyDecision(option=2, n_a=n_a_max, n_q=0)
    return PolicyDecision(option=1, n_a=n_a_max - 1, n_q=max_nq(n_a_max - 1, m, budget))
