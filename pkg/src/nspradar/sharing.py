"""Spectrum sharing machinery: interference channels, null-space projectors,
minimum-degradation channel selection, and waveform projection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .numerics import complex_normal, svd

# Relative tie window for the argmin over degradation norms.  With exactly
# orthogonal waveforms every channel degrades the waveform by the identical
# amount (||P X - X||_F^2 = min(N_BS, M) for any full-rank channel), so the
# argmin is decided by this tolerance, which resolves ties to the lowest bs_id.
_TIE_RTOL = 1e-9

_DEFAULT_RANK_TOL_FACTOR = 100 * np.finfo(float).eps


@dataclass(frozen=True)
class InterferenceChannel:
    """Radar-to-BS channel: N_BS x M matrix of i.i.d. CN(0,1) gains."""

    bs_id: int
    h: np.ndarray


@dataclass(frozen=True)
class ProjectionMatrix:
    """Hermitian idempotent projector onto null(H) with trace = nullity."""

    bs_id: int
    p: np.ndarray
    nullity: int


@dataclass(frozen=True)
class ChannelSelection:
    """Result of the minimum-degradation argmin over K projectors."""

    selected: int                 # bs_id of the winner
    norms: tuple[float, ...]      # ||P_i X - X||_F per projector, in input order
    bs_ids: tuple[int, ...]


@dataclass(frozen=True)
class ProjectedWaveform:
    """Projected samples and their (rank-deficient) sample-sum correlation."""

    samples: np.ndarray
    correlation: np.ndarray


def draw_channels(
    k: int, n_bs: int, m: int, rng: np.random.Generator
) -> list[InterferenceChannel]:
    """Draw K independent N_BS x M Rayleigh-fading channels from one stream."""
    if k < 1 or n_bs < 1 or m < 1:
        raise ConfigurationError("K, N_BS and M must all be >= 1")
    return [
        InterferenceChannel(bs_id=i + 1, h=complex_normal(rng, (n_bs, m)))
        for i in range(k)
    ]


def projection_matrix(
    ch: InterferenceChannel, rank_tol: float | None = None
) -> ProjectionMatrix:
    """Orthogonal projector onto the null space of the channel matrix.

    SVD H = U diag(s) V^H; singular values above rank_tol * s_max * max(N_BS, M)
    count toward the numerical rank q, and the projector is built from the
    trailing M - q right singular vectors: P = V_null V_null^H.
    """
    if rank_tol is None:
        rank_tol = _DEFAULT_RANK_TOL_FACTOR
    _, s, v = svd(ch.h)
    n_bs, m = ch.h.shape
    smax = s[0] if s.size else 0.0
    q = int(np.sum(s > rank_tol * smax * max(n_bs, m)))
    v_null = v[:, q:]
    p = v_null @ v_null.conj().T
    return ProjectionMatrix(bs_id=ch.bs_id, p=p, nullity=m - q)


def select_channel(
    projs: list[ProjectionMatrix], x: np.ndarray
) -> ChannelSelection:
    """Pick the projector that least degrades the waveform in Frobenius norm.

    Ties (within a small relative window) go to the lowest bs_id.
    """
    if not projs:
        raise ConfigurationError("need at least one projector")
    m = x.shape[0]
    for pr in projs:
        if pr.p.shape != (m, m):
            raise ConfigurationError(
                f"projector for BS {pr.bs_id} has shape {pr.p.shape}, expected ({m}, {m})"
            )
    norms = tuple(float(np.linalg.norm(pr.p @ x - x)) for pr in projs)
    best = min(norms)
    for pr, nrm in zip(projs, norms):
        if nrm <= best * (1 + _TIE_RTOL) + 1e-12:
            return ChannelSelection(
                selected=pr.bs_id, norms=norms, bs_ids=tuple(p.bs_id for p in projs)
            )
    raise AssertionError("unreachable: minimum not found")


def project_waveform(proj: ProjectionMatrix, x: np.ndarray) -> ProjectedWaveform:
    """Project the waveform column-wise and cache its sample-sum correlation."""
    xp = proj.p @ x
    return ProjectedWaveform(samples=xp, correlation=xp @ xp.conj().T)


def residual_interference(ch: InterferenceChannel, pw: ProjectedWaveform) -> float:
    """Normalized residual power the channel would still receive:
    ||H X||_F / max(1, ||H||_F ||X||_F)."""
    num = float(np.linalg.norm(ch.h @ pw.samples))
    den = max(1.0, float(np.linalg.norm(ch.h)) * float(np.linalg.norm(pw.samples)))
    return num / den
