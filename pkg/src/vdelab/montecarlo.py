"""Random block-matrix sampling against the self-consistent density.

Matrices follow the block variance layout of an expanded profile: entry
(a, b) inside outer block (j, k) is centered Gaussian with variance
s_jk/N.  Entries come from a counter-based generator (Philox keyed by
(seed, trial)) that dedicates one counter block to each matrix position,
so a single entry is reproducible in isolation and whole trials can be
generated independently without sequence coupling.  Eigenvalue statistics
near zero are compared against the integrated power-law divergence of the
density module, and resolvent diagonals against the VDE components.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.random import Philox
from scipy.special import ndtri

from .density import DEFAULT_ETA_SCHEDULE, rho_at
from .profiles import VarianceProfile
from .solver import AnomalyError, SolverOptions, SpectralPoint, solve

REAL_SYMMETRIC = "real_symmetric"
COMPLEX_HERMITIAN = "complex_hermitian"

DIMENSION_CAP = 4000


@dataclass(frozen=True)
class EnsembleSpec:
    small_profile: VarianceProfile
    inner_N: int
    symmetry: str = REAL_SYMMETRIC
    trials: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.inner_N < 2:
            raise ValueError("inner_N must be at least 2")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.symmetry not in (REAL_SYMMETRIC, COMPLEX_HERMITIAN):
            raise ValueError(f"unknown symmetry class {self.symmetry!r}")

    @property
    def dimension(self) -> int:
        return self.small_profile.dim * self.inner_N


@dataclass(frozen=True)
class SpectralSample:
    eigenvalues: np.ndarray  # ascending
    trial_seed: int


def _uniforms(raw: np.ndarray) -> np.ndarray:
    # 53-bit mantissa uniforms in (0, 1); the floor keeps ndtri finite
    u = (raw >> np.uint64(11)).astype(np.float64) * 2.0**-53
    return np.maximum(u, 2.0**-54)


def _normals(raw: np.ndarray) -> np.ndarray:
    return ndtri(_uniforms(raw))


def _trial_generator(spec: EnsembleSpec, trial: int) -> Philox:
    return Philox(key=np.array([spec.seed, trial], dtype=np.uint64))


def sample_matrix(spec: EnsembleSpec, trial: int) -> np.ndarray:
    """One Hermitian draw for the given trial index.

    Matrix position (a, b) owns the counter block a*dim + b of the trial's
    Philox stream and uses its first word (real case) or first two words
    (complex case).  Real symmetric: off-diagonal variance s_jk/N,
    diagonal 2 s_jj/N; complex Hermitian: real and imaginary parts each
    s_jk/(2N) off the diagonal, real diagonal with variance s_jj/N.  The
    lower triangle mirrors the upper exactly, and zero blocks of the
    profile come out exactly zero.
    """
    n = spec.small_profile.dim
    inner = spec.inner_N
    d = n * inner
    var = np.repeat(
        np.repeat(spec.small_profile.entries, inner, axis=0), inner, axis=1
    ) / inner
    raw = _trial_generator(spec, trial).random_raw(4 * d * d)
    g0 = _normals(raw[0::4]).reshape(d, d)
    if spec.symmetry == REAL_SYMMETRIC:
        std = np.sqrt(var)
        np.fill_diagonal(std, np.sqrt(2.0 * np.diag(var)))
        upper = np.triu(std * g0)
        return upper + upper.T - np.diag(np.diag(upper))
    g1 = _normals(raw[1::4]).reshape(d, d)
    off = np.sqrt(var / 2.0) * (g0 + 1j * g1)
    h = np.triu(off, 1)
    h = h + h.conj().T
    return h + np.diag(np.sqrt(np.diag(var)) * np.diag(g0))


def entry_value(spec: EnsembleSpec, trial: int, a: int, b: int) -> complex:
    """Reconstruct the single entry H[a, b] from its own counter block.

    Bit-identical to sample_matrix(spec, trial)[a, b] without generating
    the rest of the matrix.
    """
    d = spec.dimension
    if not (0 <= a < d and 0 <= b < d):
        raise ValueError(f"entry ({a},{b}) outside a {d}x{d} matrix")
    if a > b:
        v = entry_value(spec, trial, b, a)
        return v.conjugate() if spec.symmetry == COMPLEX_HERMITIAN else v
    inner = spec.inner_N
    var = float(spec.small_profile.entries[a // inner, b // inner]) / inner
    gen = _trial_generator(spec, trial)
    gen.advance(a * d + b)
    raw = gen.random_raw(4)
    g0 = float(_normals(raw[:1])[0])
    if spec.symmetry == REAL_SYMMETRIC:
        std = math.sqrt(2.0 * var) if a == b else math.sqrt(var)
        return complex(std * g0)
    if a == b:
        return complex(math.sqrt(var) * g0)
    g1 = float(_normals(raw[1:2])[0])
    return complex(math.sqrt(var / 2.0)) * (g0 + 1j * g1)


def sample_spectrum(spec: EnsembleSpec, trial: int) -> SpectralSample:
    eigenvalues = np.linalg.eigvalsh(sample_matrix(spec, trial))
    return SpectralSample(eigenvalues=eigenvalues, trial_seed=trial)


def predicted_near_zero_mass(
    profile: VarianceProfile, delta: float, eta_schedule=DEFAULT_ETA_SCHEDULE
) -> float:
    """Integral of rho over [-delta, delta] via its fitted power law.

    Fits rho ~ A |E|^s on (delta/100, delta) (positive side; the density
    is symmetric) and integrates: 2 A delta^(1+s)/(1+s).  The staircase
    exponent -(n-1)/(n+1) stays above -1, so the integral is finite; a
    fitted s <= -1 would contradict that and raises AnomalyError.
    """
    if delta < 0:
        raise ValueError("delta must be non-negative")
    if delta == 0.0:
        return 0.0
    energies = np.geomspace(delta / 100.0, delta, 17)
    vals = np.array([rho_at(profile, float(e), eta_schedule) for e in energies])
    if (vals <= 0).any():
        raise ValueError(
            "density vanishes inside the fit window; no power law to integrate"
        )
    s, log_a = np.polyfit(np.log(energies), np.log(vals), 1)
    if s <= -1.0:
        raise AnomalyError(
            f"fitted near-zero exponent {s:.4f} <= -1 is non-integrable, "
            "contradicting the staircase divergence law"
        )
    return float(2.0 * math.exp(log_a) * delta ** (1.0 + s) / (1.0 + s))


@dataclass(frozen=True)
class NearZeroResult:
    """Empirical eigenvalue mass in [-delta, delta] vs the density's own."""

    delta: float
    fraction: float
    stderr: float
    prediction: float | None
    per_trial: np.ndarray


def empirical_near_zero(
    spec: EnsembleSpec,
    delta: float,
    cap: int = DIMENSION_CAP,
    predict: bool = True,
    eta_schedule=DEFAULT_ETA_SCHEDULE,
) -> NearZeroResult:
    """Average fraction of eigenvalues in [-delta, delta] across trials.

    The standard error uses the ddof=1 sample deviation over trials (nan
    for a single trial).  With predict=True the companion prediction
    integrates the fitted power law of the self-consistent density; pass
    predict=False for regimes where the power-law window is meaningless
    (delta far outside the divergence region).
    """
    if delta < 0:
        raise ValueError("delta must be non-negative")
    d = spec.dimension
    if d > cap:
        raise ValueError(f"matrix side {d} exceeds the eigensolver cap {cap}")
    fractions = np.empty(spec.trials)
    for trial in range(spec.trials):
        ev = sample_spectrum(spec, trial).eigenvalues
        fractions[trial] = np.count_nonzero(np.abs(ev) <= delta) / ev.size
    stderr = (
        float(fractions.std(ddof=1) / math.sqrt(spec.trials))
        if spec.trials > 1
        else float("nan")
    )
    prediction = None
    if predict:
        prediction = predicted_near_zero_mass(
            spec.small_profile, delta, eta_schedule
        )
    return NearZeroResult(
        delta=delta,
        fraction=float(fractions.mean()),
        stderr=stderr,
        prediction=prediction,
        per_trial=fractions,
    )


@dataclass(frozen=True)
class EntrywiseResult:
    """Pooled deviation of resolvent diagonals from the VDE components.

    c_measured = median * sqrt(N * eta) records the concentration scale;
    it is reported, not asserted, since the approximation carries no
    explicit error bound here.
    """

    max_deviation: float
    median_deviation: float
    c_measured: float
    eta: float


def entrywise_law_check(
    spec: EnsembleSpec,
    point: SpectralPoint,
    opts: SolverOptions | None = None,
) -> EntrywiseResult:
    """Compare G_ll(z) of sampled matrices against the block's m_k(z).

    Computes resolvent diagonals by full eigendecomposition,
    G_ll = sum_v |V_lv|^2/(w_v - z), pooled over trials.  Requires
    eta >= max(0.1, dimension^(-1/3)): below that the resolvent no longer
    concentrates around the deterministic value and the comparison is
    meaningless.
    """
    floor = max(0.1, spec.dimension ** (-1.0 / 3.0))
    if point.im < floor:
        raise ValueError(
            f"eta {point.im} below the concentration floor {floor:.4g}"
        )
    m = solve(spec.small_profile, point, opts).m
    target = np.repeat(m, spec.inner_N)
    pooled = []
    for trial in range(spec.trials):
        w, v = np.linalg.eigh(sample_matrix(spec, trial))
        diag = (np.abs(v) ** 2) @ (1.0 / (w - point.z))
        pooled.append(np.abs(diag - target))
    devs = np.concatenate(pooled)
    med = float(np.median(devs))
    return EntrywiseResult(
        max_deviation=float(devs.max()),
        median_deviation=med,
        c_measured=med * math.sqrt(spec.inner_N * point.im),
        eta=point.im,
    )
