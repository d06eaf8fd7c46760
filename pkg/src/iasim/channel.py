"""Rayleigh channel draws, training-based MMSE error model, effective SNRs.

Powers are received powers in mW: ``P_r[k, i] = p_t * gains[k, i]``.  The
bandwidth factor cancels between signal, CSI interference and noise, so it
never appears.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .topology import LinkGainMatrix

__all__ = [
    "DEFAULT_NOISE_DBM",
    "ChannelSet",
    "CsiErrorModel",
    "EstimatedChannelSet",
    "derive_seed",
    "crandn",
    "draw_channels",
    "estimation_error_variance",
    "effective_snr_ia",
    "effective_snr_tdma",
    "effective_snr_su_mimo",
    "split_estimate",
]

DEFAULT_NOISE_DBM = -95.0


def derive_seed(master_seed: int, index: int) -> int:
    """Stable 64-bit sub-seed for realization ``index``.

    Mixes ``(master_seed, index)`` through numpy's ``SeedSequence`` hash, whose
    output is fixed across numpy releases.
    """
    ss = np.random.SeedSequence([int(master_seed), int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def crandn(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard circularly-symmetric complex Gaussian samples, ``E|x|^2 = 1``."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2)


@dataclass
class ChannelSet:
    """Small-scale fading ``matrices[k, i]`` (``Nr x Nt``) from tx ``i`` to rx ``k``."""

    matrices: np.ndarray

    @property
    def K(self) -> int:
        return self.matrices.shape[0]

    @property
    def Nr(self) -> int:
        return self.matrices.shape[-2]

    @property
    def Nt(self) -> int:
        return self.matrices.shape[-1]


def draw_channels(K: int, Nr: int, Nt: int, rng_seed=None) -> ChannelSet:
    if min(K, Nr, Nt) < 1:
        raise ValueError("channel dimensions must be >= 1")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    return ChannelSet(crandn(rng, (K, K, Nr, Nt)))


def estimation_error_variance(pilot_len, p_r, streams_or_antennas, p_noise):
    """Per-entry MMSE error variance after ``pilot_len`` orthogonal pilot symbols.

    ``p_noise / (p_noise + pilot_len * p_r / streams)``.  With minimum training
    (``pilot_len = K * streams``) this is ``p_noise / (p_noise + K * p_r)``.
    Broadcasts over array-valued ``p_r``.
    """
    p_r = np.asarray(p_r, dtype=float)
    out = p_noise / (p_noise + pilot_len * p_r / streams_or_antennas)
    return float(out) if out.ndim == 0 else out


@dataclass
class CsiErrorModel:
    """Error variances of the CSI available to the data phase.

    ``error_variance[k, i]`` is the forward (precoded-channel) error variance on
    link ``(k, i)``; ``reverse_variance`` is the reverse-training error that the
    matrix-level path uses when computing precoders.
    """

    error_variance: np.ndarray
    tau_rp: int
    tau_fp: int
    reverse_variance: np.ndarray | None = None

    @classmethod
    def from_training(
        cls,
        gains,
        p_t: float,
        p_noise: float,
        Nr: int,
        d: int,
        tau_rp: int | None = None,
        tau_fp: int | None = None,
    ) -> "CsiErrorModel":
        """Error model for the three-phase TDD protocol.

        Defaults to minimum training, ``tau_rp = K * Nr`` and ``tau_fp = K * d``.
        """
        g = _gains(gains)
        K = g.shape[0]
        tau_rp = K * Nr if tau_rp is None else tau_rp
        tau_fp = K * d if tau_fp is None else tau_fp
        if tau_rp < K * Nr or tau_fp < K * d:
            raise ValueError("orthogonal pilots need tau_rp >= K*Nr and tau_fp >= K*d")
        p_r = p_t * g
        fwd = estimation_error_variance(tau_fp, p_r, d, p_noise)
        rev = estimation_error_variance(tau_rp, p_r, Nr, p_noise)
        return cls(np.asarray(fwd), tau_rp, tau_fp, np.asarray(rev))

    @classmethod
    def baseline(cls, gains, p_t: float, p_noise: float, Nt: int) -> "CsiErrorModel":
        """Full-channel estimation with ``K * Nt`` pilots (TDMA / SU-MIMO)."""
        g = _gains(gains)
        K = g.shape[0]
        var = np.asarray(estimation_error_variance(K * Nt, p_t * g, Nt, p_noise))
        return cls(var, K * Nt, K * Nt, var)

    @classmethod
    def perfect(cls, K: int, tau_rp: int = 0, tau_fp: int = 0) -> "CsiErrorModel":
        z = np.zeros((K, K))
        return cls(z, tau_rp, tau_fp, z.copy())


@dataclass
class EstimatedChannelSet:
    """Estimates and errors with ``true = estimates + errors`` entrywise."""

    estimates: np.ndarray
    errors: np.ndarray


def _gains(gains) -> np.ndarray:
    if isinstance(gains, LinkGainMatrix):
        return gains.gains
    return np.asarray(gains, dtype=float)


def _errvar(err) -> np.ndarray:
    if isinstance(err, CsiErrorModel):
        return err.error_variance
    return np.asarray(err, dtype=float)


def _pick(values: np.ndarray, k):
    return values if k is None else float(values[k])


def effective_snr_ia(gains, err, p_t: float, p_noise: float, k: int | None = None):
    """Post-combining SNR with CSI interference from every link, own link included.

    ``P_r[k,k] (1 - s2[k,k]) / (sum_i P_r[k,i] s2[k,i] + p_noise)``.  Returns
    the vector over all users, or user ``k`` only.
    """
    p_r = p_t * _gains(gains)
    s2 = _errvar(err)
    direct = np.diag(p_r) * (1.0 - np.diag(s2))
    snr = direct / (np.sum(p_r * s2, axis=1) + p_noise)
    return _pick(snr, k)


def effective_snr_tdma(gains, err, p_t: float, p_noise: float, k: int | None = None):
    """Orthogonal time sharing: only the direct link's estimation error hurts."""
    p_kk = p_t * np.diag(_gains(gains))
    s2 = np.diag(_errvar(err))
    snr = p_kk * (1.0 - s2) / (p_kk * s2 + p_noise)
    return _pick(snr, k)


def effective_snr_su_mimo(gains, err, p_t: float, p_noise: float, k: int | None = None):
    """Simultaneous transmission with co-channel interference treated as noise."""
    p_r = p_t * _gains(gains)
    p_kk = np.diag(p_r)
    s2 = np.diag(_errvar(err))
    interference = p_r.sum(axis=1) - p_kk
    snr = p_kk * (1.0 - s2) / (p_kk * s2 + interference + p_noise)
    return _pick(snr, k)


def split_estimate(channels, err, rng_seed=None) -> EstimatedChannelSet:
    """Sample the MMSE estimate of a known unit-variance Gaussian channel.

    ``channels`` ends with ``(K, K, rows, cols)``; leading batch axes broadcast
    against ``err`` of shape ``(K, K)``.
    For error variance ``s2`` the estimate is ``(1 - s2) H + sqrt(s2 (1 - s2)) W``
    with fresh ``W ~ CN(0, 1)``.  This is exactly the distribution of the
    pilot-based MMSE estimate given ``H``; estimate and error are independent,
    with entry variances ``1 - s2`` and ``s2``.
    """
    h = channels.matrices if isinstance(channels, ChannelSet) else np.asarray(channels)
    s2 = _errvar(err)
    if np.any(s2 < 0) or np.any(s2 > 1):
        raise ValueError("error variances must lie in [0, 1]")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    s2b = s2[..., None, None]
    noise = crandn(rng, h.shape)
    est = (1.0 - s2b) * h + np.sqrt(s2b * (1.0 - s2b)) * noise
    return EstimatedChannelSet(est, h - est)
