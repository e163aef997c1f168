"""Shared numerical substrate.

Complex SVD facade, chi-squared statistics with two degrees of freedom
(central CDF/inverse and the noncentral survival function, i.e. the
first-order Marcum Q), and deterministic per-trial RNG substreams.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import stats

from .errors import NumericFailure

# Term-ratio truncation for the ascending Marcum-Q series; beyond the
# large-argument cutoff the series underflows and we delegate to scipy.
_SERIES_TOL = 1e-14
_LARGE_ARG_CUTOFF = 30.0


def svd(h: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Full SVD of a complex matrix, returned as (U, s, V) with H = U diag(s) V^H.

    Note the third factor is V itself, not V^H.
    """
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] < 1 or h.shape[1] < 1:
        raise ValueError(f"expected a 2-d matrix, got shape {h.shape}")
    if not np.all(np.isfinite(h)):
        raise ValueError("matrix contains non-finite entries")
    try:
        u, s, vh = np.linalg.svd(h, full_matrices=True)
    except np.linalg.LinAlgError as exc:
        raise NumericFailure(
            f"SVD did not converge for a {h.shape[0]}x{h.shape[1]} matrix"
        ) from exc
    return u, s, vh.conj().T


def chi2_central_cdf(x: float) -> float:
    """CDF of the central chi-squared law with 2 dof: F(x) = 1 - exp(-x/2)."""
    if x < 0:
        raise ValueError(f"x must be non-negative, got {x}")
    return -math.expm1(-0.5 * x)


def chi2_central_inv(p: float) -> float:
    """Inverse of `chi2_central_cdf`: F^-1(p) = -2 log(1 - p), for p in [0, 1)."""
    if not 0 <= p < 1:
        raise ValueError(f"p must lie in [0, 1), got {p}")
    return -2.0 * math.log1p(-p)


def chi2_noncentral_sf(x: float, rho: float) -> float:
    """Survival function 1 - F of the noncentral chi-squared law (2 dof,
    noncentrality rho); equals the Marcum Q function Q1(sqrt(rho), sqrt(x)).

    Evaluated by the ascending series in the noncentrality, switching to
    scipy's implementation in the large-argument regime where the series
    terms underflow.
    """
    if x < 0:
        raise ValueError(f"x must be non-negative, got {x}")
    if rho < 0:
        raise ValueError(f"rho must be non-negative, got {rho}")
    if x == 0:
        return 1.0
    if rho == 0:
        return math.exp(-0.5 * x)
    if math.sqrt(rho * x) > _LARGE_ARG_CUTOFF or (rho + x) > 1400.0:
        return float(stats.ncx2.sf(x, 2, rho))

    # sf = sum_k Pois(k; rho/2) * sf_chi2(x; 2 + 2k), where the inner
    # survival function admits the running partial sum of exp(-x/2) (x/2)^j/j!.
    hr, hx = 0.5 * rho, 0.5 * x
    pois = math.exp(-hr)         # Poisson weight at k
    pois_cum = pois
    inner_term = math.exp(-hx)   # exp(-x/2) (x/2)^k / k!
    inner = inner_term           # sf of chi2 with 2+2k dof at x
    total = pois * inner
    k = 0
    while True:
        k += 1
        pois *= hr / k
        pois_cum += pois
        inner_term *= hx / k
        inner += inner_term
        term = pois * inner
        total += term
        # Remaining Poisson mass bounds the truncation error since inner <= 1.
        if (1.0 - pois_cum) < _SERIES_TOL and (k > hr or term < _SERIES_TOL * total):
            break
    return min(total, 1.0)


def rng_substream(master_seed: int, stream_id: int) -> np.random.Generator:
    """Independent, reproducible substream keyed by (master_seed, stream_id).

    Backed by the counter-based Philox generator so distinct stream ids give
    statistically independent sequences regardless of draw order.
    """
    if stream_id < 0:
        raise ValueError(f"stream_id must be non-negative, got {stream_id}")
    ss = np.random.SeedSequence((int(master_seed) & (2**64 - 1), int(stream_id)))
    return np.random.Generator(np.random.Philox(ss))


def complex_normal(rng: np.random.Generator, shape, variance: float = 1.0) -> np.ndarray:
    """i.i.d. circularly-symmetric complex Gaussian draws, CN(0, variance)."""
    scale = math.sqrt(0.5 * variance)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
