"""Measurement models, quantizers, and reproducible random sampling.

The measurement vector concatenates an analog (continuous-valued) part

    x_a = H theta + w_a + w_da

and a 1-bit quantized part

    x_q = Q(G theta + w_q + w_dq),

where ``theta`` is a zero-mean circularly symmetric complex Gaussian
parameter with covariance ``sigma_theta`` and all noise terms are i.i.d.
complex Gaussian.  ``w_da`` and ``w_dq`` are optional dither terms added
before acquisition/quantization.  The convention throughout the package is
that a scalar CN(0, v) variable has independent real and imaginary parts of
variance v/2 each.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ModelError, QuantizerDomainError, SingularPriorError

_MASK64 = (1 << 64) - 1

# Correctly rounded 1/sqrt(2); also equals np.sqrt(2)/2 bit for bit, which
# the 1-bit/b-bit equivalence property relies on.
INV_SQRT2 = np.sqrt(0.5)


# ---------------------------------------------------------------------------
# Reproducible random streams
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RngStream:
    """Addressable random stream: (seed, stream_id) -> independent generator.

    The same pair always reproduces the same draws; distinct ``stream_id``
    values give statistically independent streams, so Monte-Carlo batches can
    be assigned disjoint ids and run in any order or in parallel.
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        """Create a fresh generator positioned at the start of the stream."""
        entropy = [self.seed & _MASK64, self.stream_id & _MASK64]
        return np.random.default_rng(np.random.SeedSequence(entropy))


def _complex_normal(g: np.random.Generator, shape: tuple, var: float) -> np.ndarray:
    """Draw CN(0, var) samples (per-component real/imag variance var/2)."""
    z = g.standard_normal((2,) + shape)
    return (z[0] + 1j * z[1]) * np.sqrt(var / 2.0)


# ---------------------------------------------------------------------------
# Quantizers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuantizerSpec:
    """Uniform midrise quantizer: 2**bits levels spanning [lo, hi] per component."""

    bits: int
    lo: float
    hi: float

    def __post_init__(self):
        if self.bits < 1:
            raise ModelError(f"bits must be >= 1, got {self.bits}")
        if not self.lo < self.hi:
            raise ModelError(f"need lo < hi, got [{self.lo}, {self.hi}]")

    @property
    def step(self) -> float:
        return (self.hi - self.lo) / 2**self.bits


def quantize_1bit(z):
    """Element-wise 1-bit quantization of a complex scalar or array.

    Each of Re(z) and Im(z) maps to +1 for values >= 0 and -1 otherwise, and
    the result is scaled by 1/sqrt(2) so every output has unit modulus.
    """
    z = np.asarray(z)
    if not np.all(np.isfinite(z)):
        raise QuantizerDomainError("1-bit quantizer requires finite input")
    out = (np.where(z.real >= 0, 1.0, -1.0) + 1j * np.where(z.imag >= 0, 1.0, -1.0)) * INV_SQRT2
    return out if out.ndim else complex(out)


def quantize_bbit(z, spec: QuantizerSpec):
    """Uniform midrise b-bit quantization applied to Re(z) and Im(z).

    Inputs outside [lo, hi] saturate to the nearest edge level.  With
    ``bits=1`` the quantizer reduces to a scaled sign function, matching
    :func:`quantize_1bit` up to the level scaling.
    """
    z = np.asarray(z)
    if not np.all(np.isfinite(z)):
        raise QuantizerDomainError("b-bit quantizer requires finite input")
    step = spec.step
    nlev = 2**spec.bits

    def component(x):
        k = np.floor((x - spec.lo) / step)
        # Rounding in (x - lo)/step can misbin values at a threshold; snap k
        # so that the bin edges lo + k*step themselves decide membership.
        k = k - (x < spec.lo + k * step)
        k = k + (x >= spec.lo + (k + 1) * step)
        k = np.clip(k, 0, nlev - 1)
        return spec.lo + (k + 0.5) * step

    out = component(z.real) + 1j * component(z.imag)
    return out if out.ndim else complex(out)


# ---------------------------------------------------------------------------
# Model descriptions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MixedModel:
    """General mixed-resolution measurement model.

    Attributes
    ----------
    h : np.ndarray
        Analog mixing matrix, shape (n_analog, m).
    g : np.ndarray
        Quantized-path mixing matrix, shape (n_quantized, m).
    sigma_theta : np.ndarray
        Hermitian positive-definite prior covariance, shape (m, m).
    var_a, var_q : float
        Analog and quantized-path noise variances.
    var_da, var_dq : float
        Dither variances added to the analog and quantized paths.
    """

    h: np.ndarray
    g: np.ndarray
    sigma_theta: np.ndarray
    var_a: float
    var_q: float
    var_da: float = 0.0
    var_dq: float = 0.0

    def __post_init__(self):
        h = np.asarray(self.h, dtype=np.complex128)
        g = np.asarray(self.g, dtype=np.complex128)
        sig = np.atleast_2d(np.asarray(self.sigma_theta, dtype=np.complex128))
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "sigma_theta", sig)

        m = sig.shape[0]
        if sig.shape != (m, m):
            raise ModelError(f"sigma_theta must be square, got {sig.shape}")
        if h.ndim != 2 or h.shape[1] != m:
            raise ModelError(f"h must have shape (n_analog, {m}), got {h.shape}")
        if g.ndim != 2 or g.shape[1] != m:
            raise ModelError(f"g must have shape (n_quantized, {m}), got {g.shape}")
        if h.shape[0] + g.shape[0] < 1:
            raise ModelError("model needs at least one measurement row")
        for name in ("var_a", "var_q", "var_da", "var_dq"):
            if getattr(self, name) < 0:
                raise ModelError(f"{name} must be nonnegative")

        herm_gap = np.max(np.abs(sig - sig.conj().T)) if m else 0.0
        if herm_gap > 1e-12 * max(1.0, np.max(np.abs(sig))):
            raise ModelError("sigma_theta is not Hermitian")
        try:
            np.linalg.cholesky(sig)
        except np.linalg.LinAlgError as exc:
            raise SingularPriorError("sigma_theta is not positive definite") from exc

    @property
    def m(self) -> int:
        return self.sigma_theta.shape[0]

    @property
    def n_analog(self) -> int:
        return self.h.shape[0]

    @property
    def n_quantized(self) -> int:
        return self.g.shape[0]

    @property
    def var_a_total(self) -> float:
        """Analog-path noise plus dither variance."""
        return self.var_a + self.var_da

    @property
    def var_q_total(self) -> float:
        """Quantized-path noise plus dither variance."""
        return self.var_q + self.var_dq


@dataclass(frozen=True)
class OrthoBlockParams:
    """Scalar description of the orthonormal-block measurement model.

    H stacks ``n_a`` square blocks B_i with B_i^H B_i = rho_a * I, and G
    repeats one square block G_1 with G_1^H G_1 = rho_q * I, ``n_q`` times;
    the prior covariance is the identity.  Measurement counts are therefore
    ``m * n_a`` analog rows and ``m * n_q`` quantized rows.
    """

    m: int
    n_a: int
    n_q: int
    rho_a: float = 1.0
    rho_q: float = 1.0
    var_a: float = 1.0
    var_q: float = 1.0
    var_da: float = 0.0
    var_dq: float = 0.0

    def __post_init__(self):
        if self.m < 1:
            raise ModelError(f"m must be >= 1, got {self.m}")
        if self.n_a < 0 or self.n_q < 0:
            raise ModelError("block counts must be nonnegative")
        if self.rho_a <= 0 or self.rho_q <= 0:
            raise ModelError("block gains rho_a, rho_q must be positive")
        for name in ("var_a", "var_q", "var_da", "var_dq"):
            if getattr(self, name) < 0:
                raise ModelError(f"{name} must be nonnegative")

    @property
    def n_analog(self) -> int:
        return self.m * self.n_a

    @property
    def n_quantized(self) -> int:
        return self.m * self.n_q

    @property
    def var_a_total(self) -> float:
        return self.var_a + self.var_da

    @property
    def var_q_total(self) -> float:
        return self.var_q + self.var_dq


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def sample_parameter(sigma_theta: np.ndarray, rng: RngStream, size: int | None = None) -> np.ndarray:
    """Draw the parameter vector from CN(0, sigma_theta).

    Returns shape (m,) by default, or (m, size) with draws as columns.
    """
    sig = np.atleast_2d(np.asarray(sigma_theta, dtype=np.complex128))
    try:
        chol = np.linalg.cholesky(sig)
    except np.linalg.LinAlgError as exc:
        raise SingularPriorError("prior covariance is not positive definite") from exc
    m = sig.shape[0]
    g = rng.generator()
    z = _complex_normal(g, (m,) if size is None else (m, size), 1.0)
    return chol @ z


def sample_measurements(model: MixedModel, theta: np.ndarray, rng: RngStream):
    """Draw one realization (x_a, x_q) of the measurement model.

    ``theta`` may be a single vector of length m or an (m, t) batch of
    column vectors; the outputs have matching trailing shape.  Noise draws
    are taken from ``rng`` in the fixed order w_a, w_da, w_q, w_dq so that
    identical streams reproduce identical measurements.
    """
    theta = np.asarray(theta, dtype=np.complex128)
    if theta.shape[0] != model.m:
        raise ModelError(f"theta has leading dimension {theta.shape[0]}, expected {model.m}")
    tail = theta.shape[1:]
    g = rng.generator()

    x_a = model.h @ theta
    x_a = x_a + _complex_normal(g, (model.n_analog,) + tail, model.var_a)
    x_a = x_a + _complex_normal(g, (model.n_analog,) + tail, model.var_da)

    y = model.g @ theta
    y = y + _complex_normal(g, (model.n_quantized,) + tail, model.var_q)
    y = y + _complex_normal(g, (model.n_quantized,) + tail, model.var_dq)
    x_q = quantize_1bit(y) if y.size else y
    return x_a, x_q


# ---------------------------------------------------------------------------
# Model constructors
# ---------------------------------------------------------------------------


def _haar_unitary(m: int, g: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR of a complex Gaussian matrix."""
    z = _complex_normal(g, (m, m), 1.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r).copy()
    d[d == 0] = 1.0  # measure-zero guard
    return q * (d / np.abs(d))


def make_ortho_matrices(params: OrthoBlockParams, rng: RngStream):
    """Draw mixing matrices (H, G) satisfying the orthonormal-block structure.

    H stacks ``n_a`` independent scaled unitaries sqrt(rho_a) * U_i, so
    H^H H = rho_a * n_a * I; G repeats a single scaled unitary block, so
    G^H G = rho_q * n_q * I.
    """
    g = rng.generator()
    m = params.m
    if params.n_a:
        blocks = [np.sqrt(params.rho_a) * _haar_unitary(m, g) for _ in range(params.n_a)]
        h = np.vstack(blocks)
    else:
        h = np.zeros((0, m), dtype=np.complex128)
    if params.n_q:
        g1 = np.sqrt(params.rho_q) * _haar_unitary(m, g)
        gm = np.tile(g1, (params.n_q, 1))
    else:
        gm = np.zeros((0, m), dtype=np.complex128)
    return h, gm


def make_ortho_model(params: OrthoBlockParams, rng: RngStream) -> MixedModel:
    """Instantiate a full :class:`MixedModel` from orthonormal-block parameters."""
    h, g = make_ortho_matrices(params, rng)
    return MixedModel(
        h=h,
        g=g,
        sigma_theta=np.eye(params.m, dtype=np.complex128),
        var_a=params.var_a,
        var_q=params.var_q,
        var_da=params.var_da,
        var_dq=params.var_dq,
    )


def make_scalar_model(n_a: int, n_q: int, var: float) -> MixedModel:
    """Scalar-parameter model: unit prior, all-ones mixing, equal noise variances.

    Satisfies the orthonormal-block assumptions with m=1 and unit block gains.
    """
    if n_a + n_q < 1:
        raise ModelError("need at least one measurement (n_a + n_q >= 1)")
    return MixedModel(
        h=np.ones((n_a, 1), dtype=np.complex128),
        g=np.ones((n_q, 1), dtype=np.complex128),
        sigma_theta=np.eye(1, dtype=np.complex128),
        var_a=var,
        var_q=var,
    )


def make_mimo_model(
    k: int,
    n_a: int,
    n_q: int,
    rho: float,
    var: float,
    pilot: str = "random-unitary",
    rng: RngStream | None = None,
) -> MixedModel:
    """Pilot-based channel-estimation model with k users.

    The pilot matrix Phi is unitary (random Haar draw, or the unitary DFT
    matrix when ``pilot="dft"``); both mixing matrices repeat sqrt(rho)*Phi,
    so the orthonormal-block assumptions hold with block gains rho.
    """
    if k < 1:
        raise ModelError(f"k must be >= 1, got {k}")
    if rho <= 0:
        raise ModelError("pilot power rho must be positive")
    if pilot == "random-unitary":
        g = (rng if rng is not None else RngStream(0)).generator()
        phi = _haar_unitary(k, g)
    elif pilot == "dft":
        idx = np.arange(k)
        phi = np.exp(-2j * np.pi * np.outer(idx, idx) / k) / np.sqrt(k)
    else:
        raise ModelError(f"unknown pilot type {pilot!r}")
    block = np.sqrt(rho) * phi
    return MixedModel(
        h=np.tile(block, (n_a, 1)) if n_a else np.zeros((0, k), dtype=np.complex128),
        g=np.tile(block, (n_q, 1)) if n_q else np.zeros((0, k), dtype=np.complex128),
        sigma_theta=np.eye(k, dtype=np.complex128),
        var_a=var,
        var_q=var,
    )
