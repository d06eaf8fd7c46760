"""Closed-form effective average sum-rates for IA, TDMA and SU-MIMO.

Every scheme scales its summed per-user ergodic rate by the fraction of the
coherence block left after pilot training.  The fraction is clamped at zero
when the pilots consume the whole block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .alignment import feasible
from .channel import (
    effective_snr_ia,
    effective_snr_su_mimo,
    effective_snr_tdma,
)
from .errors import InfeasibleError, NumericalError
from .specfun import ergodic_rate

__all__ = [
    "Scheme",
    "SchemeConfig",
    "SumRateResult",
    "overhead_factor",
    "ia_sum_rate",
    "tdma_sum_rate",
    "su_mimo_sum_rate",
    "scheme_sum_rate",
    "mi_lower_bound_forms",
    "mi_lower_bound_check",
]


class Scheme(str, Enum):
    IA = "IA"
    TDMA = "TDMA"
    SU_MIMO = "SU_MIMO"


@dataclass
class SchemeConfig:
    """Antenna, stream and block-length parameters shared by all schemes.

    With ``minimum_training`` the pilot lengths are ``tau_rp = K Nr``,
    ``tau_fp = K d`` for IA and ``K Nt`` for the baselines; otherwise the
    explicit ``tau_rp`` / ``tau_fp`` / ``tau_baseline`` values are used.
    """

    K: int
    Nr: int
    Nt: int
    d: int
    tau_coh: int
    scheme: Scheme = Scheme.IA
    minimum_training: bool = True
    tau_rp: int | None = None
    tau_fp: int | None = None
    tau_baseline: int | None = None

    def __post_init__(self):
        self.scheme = Scheme(self.scheme)
        if min(self.K, self.Nr, self.Nt, self.d) < 1:
            raise ValueError("K, Nr, Nt and d must be positive")
        if self.tau_coh <= 0:
            raise ValueError("tau_coh must be positive")
        if self.minimum_training:
            self.tau_rp = self.K * self.Nr
            self.tau_fp = self.K * self.d
            self.tau_baseline = self.K * self.Nt
        else:
            self.tau_rp = self.K * self.Nr if self.tau_rp is None else self.tau_rp
            self.tau_fp = self.K * self.d if self.tau_fp is None else self.tau_fp
            self.tau_baseline = self.K * self.Nt if self.tau_baseline is None else self.tau_baseline

    @property
    def ia_training(self) -> int:
        return self.tau_rp + self.tau_fp

    def check_ia(self) -> None:
        if self.d > min(self.Nr, self.Nt):
            raise InfeasibleError(f"d={self.d} exceeds min(Nr, Nt)")
        if self.Nr == self.Nt and not feasible(self.K, self.Nr, self.d):
            raise InfeasibleError(
                f"IA infeasible for K={self.K}, N={self.Nr}, d={self.d}: "
                f"2N={2 * self.Nr} < d(K+1)={self.d * (self.K + 1)}"
            )


@dataclass
class SumRateResult:
    per_user: np.ndarray
    overhead_fraction: float
    snr: np.ndarray = field(default=None, repr=False)

    @property
    def total(self) -> float:
        return float(math.fsum(self.per_user))


def overhead_factor(tau_coh: float, training: float) -> float:
    """Fraction of the block left for data, ``max(0, (tau_coh - training) / tau_coh)``."""
    return max(0.0, (tau_coh - training) / tau_coh)


def _rates(snrs, d: int, m: int) -> np.ndarray:
    return np.array([ergodic_rate(float(s), d, m) for s in snrs])


def ia_sum_rate(gains, err, p_t: float, p_noise: float, cfg: SchemeConfig) -> SumRateResult:
    """IA with the three-phase TDD protocol; pilots cost ``tau_rp + tau_fp`` symbols."""
    cfg.check_ia()
    training = cfg.ia_training
    snr = effective_snr_ia(gains, err, p_t, p_noise)
    frac = overhead_factor(cfg.tau_coh, training)
    return SumRateResult(frac * _rates(snr, cfg.d, cfg.d), training / cfg.tau_coh, snr)


def tdma_sum_rate(gains, err, p_t: float, p_noise: float, cfg: SchemeConfig) -> SumRateResult:
    """Each user owns a 1/K share of the data phase, interference-free."""
    snr = effective_snr_tdma(gains, err, p_t, p_noise)
    frac = overhead_factor(cfg.tau_coh, cfg.tau_baseline) / cfg.K
    d, m = min(cfg.Nr, cfg.Nt), max(cfg.Nr, cfg.Nt)
    return SumRateResult(frac * _rates(snr, d, m), cfg.tau_baseline / cfg.tau_coh, snr)


def su_mimo_sum_rate(gains, err, p_t: float, p_noise: float, cfg: SchemeConfig) -> SumRateResult:
    """All users transmit at once, co-channel interference treated as noise."""
    snr = effective_snr_su_mimo(gains, err, p_t, p_noise)
    frac = overhead_factor(cfg.tau_coh, cfg.tau_baseline)
    d, m = min(cfg.Nr, cfg.Nt), max(cfg.Nr, cfg.Nt)
    return SumRateResult(frac * _rates(snr, d, m), cfg.tau_baseline / cfg.tau_coh, snr)


_DISPATCH = {
    Scheme.IA: ia_sum_rate,
    Scheme.TDMA: tdma_sum_rate,
    Scheme.SU_MIMO: su_mimo_sum_rate,
}


def scheme_sum_rate(scheme, gains, err, p_t, p_noise, cfg: SchemeConfig) -> SumRateResult:
    return _DISPATCH[Scheme(scheme)](gains, err, p_t, p_noise, cfg)


def _logdet2(a: np.ndarray) -> float:
    sign, ld = np.linalg.slogdet(a)
    if sign.real <= 0:
        raise NumericalError("log-det of a non positive-definite matrix")
    return ld / math.log(2.0)


def mi_lower_bound_forms(estimate, p_t: float, nt: int, err_var: float, p_noise: float):
    """Three algebraically equal forms of the imperfect-CSI mutual-information bound.

    Returns ``(mmse, woodbury, normalized)`` in bits:

    * ``mmse``: ``-log2 det`` of the LMMSE error covariance
      ``I - (P/Nt) H^* ((P/Nt) H H^* + R)^{-1} H``;
    * ``woodbury``: ``log2 det(I_Nt + (P/Nt) H^* R^{-1} H)``;
    * ``normalized``: ``log2 det(I_Nr + P(1-s2) / (Nt (P s2 + N0)) Ht Ht^*)`` with
      ``Ht = H / sqrt(1 - s2)``.

    ``R = (P s2 + N0) I_Nr`` is the effective-noise covariance.
    """
    Hh = np.asarray(estimate, dtype=complex)
    if not 0 <= err_var < 1:
        raise ValueError("error variance must lie in [0, 1)")
    nr = Hh.shape[0]
    if Hh.shape[1] != nt:
        raise ValueError(f"estimate has {Hh.shape[1]} columns, expected nt={nt}")
    c = p_t / nt
    r_noise = (p_t * err_var + p_noise) * np.eye(nr)
    hh_star = Hh @ Hh.conj().T
    err_cov = np.eye(nt) - c * Hh.conj().T @ np.linalg.solve(c * hh_star + r_noise, Hh)
    mmse = -_logdet2(err_cov)
    woodbury = _logdet2(np.eye(nt) + c * Hh.conj().T @ np.linalg.solve(r_noise, Hh))
    Ht = Hh / math.sqrt(1.0 - err_var)
    snr = p_t * (1.0 - err_var) / (nt * (p_t * err_var + p_noise))
    normalized = _logdet2(np.eye(nr) + snr * Ht @ Ht.conj().T)
    return mmse, woodbury, normalized


def mi_lower_bound_check(
    estimate, p_t: float, nt: int, err_var: float, p_noise: float, rtol: float = 1e-10
) -> float:
    """Worst-case-noise rate bound given a channel estimate, in bits per channel use.

    Evaluates all forms from :func:`mi_lower_bound_forms` and raises
    :class:`NumericalError` if they disagree by more than ``rtol``.
    """
    forms = mi_lower_bound_forms(estimate, p_t, nt, err_var, p_noise)
    ref = forms[-1]
    scale = max(abs(ref), 1e-300)
    for f in forms[:-1]:
        if abs(f - ref) > rtol * scale and abs(f - ref) > 1e-13:
            raise NumericalError(f"determinant forms disagree: {forms}")
    return ref
