"""Closed-form IA rate versus explicit matrix-level simulation.

The simulated path follows the TDD protocol block by block: the transmitters
compute min-leakage precoders from noisy reverse estimates, the receivers
build filters from noisy estimates of the precoded channels, and the rate is
measured on the true channels with any residual interference treated as
noise.  Both sides are compared before the training-overhead factor, which
scales them identically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..alignment import instantaneous_rates, min_interference_combiners, min_leakage_solve_batch
from ..channel import CsiErrorModel, crandn, effective_snr_ia, split_estimate
from ..errors import ConfigError
from ..schemes import Scheme
from ..specfun import ergodic_rate
from ..topology import LinkGainMatrix, dbm_to_mw
from .config import SimConfig
from .sweep import realization_gains

__all__ = ["ValidationRow", "ValidationResult", "validate_gains", "run_validation"]

# leakage is measured with weights normalized to a unit maximum
SOLVER_ABS_TOL = 1e-14
SOLVER_TOL = 1e-13
SOLVER_MAX_ITER = 2000
_CHUNK = 500
_STREAM = 0x5A11D


@dataclass(frozen=True)
class ValidationRow:
    p_t_dbm: float
    analytic: float
    simulated: float
    std_err: float
    blocks: int
    nonconverged: int

    @property
    def gap(self) -> float:
        """Relative gap ``(simulated - analytic) / analytic``."""
        return (self.simulated - self.analytic) / self.analytic


@dataclass
class ValidationResult:
    rows: list[ValidationRow]
    csi: str
    config: SimConfig | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def max_abs_gap(self) -> float:
        return max(abs(r.gap) for r in self.rows)

    @property
    def nonconverged(self) -> int:
        """Distinct solver runs that hit the iteration cap.

        Perfect-CSI runs share one solve per block across all powers, so each
        row repeats the same count.
        """
        counts = [r.nonconverged for r in self.rows]
        return max(counts) if self.csi == "perfect" else sum(counts)


def _solve(Hh, d, weights, rng):
    w = weights / weights.max()
    V, _, _, _, done, _ = min_leakage_solve_batch(
        Hh, d, powers=w, max_iter=SOLVER_MAX_ITER, tol=SOLVER_TOL, abs_tol=SOLVER_ABS_TOL, rng_seed=rng
    )
    return V, int(np.sum(~done))


def _analytic(gains, err, p_t, p_noise, d) -> float:
    snr = effective_snr_ia(gains, err, p_t, p_noise)
    return math.fsum(ergodic_rate(float(s), d, d) for s in snr)


def validate_gains(
    gains,
    N: int,
    d: int,
    p_t_dbm,
    p_noise_dbm: float = -95.0,
    blocks: int = 200,
    perfect_csi: bool = False,
    rng_seed=None,
) -> list[ValidationRow]:
    """Analytic and simulated IA sum-rates for one gain matrix.

    With ``perfect_csi`` the error variances are zero and one precoder
    solution per block serves every power, since the min-leakage solution
    does not depend on a common power scale.
    """
    g = gains.gains if isinstance(gains, LinkGainMatrix) else np.asarray(gains, dtype=float)
    K = g.shape[0]
    p_noise = float(dbm_to_mw(p_noise_dbm))
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    powers = [float(p) for p in p_t_dbm]
    sums = np.zeros((len(powers), 2))
    fails = np.zeros(len(powers), dtype=int)

    done_blocks = 0
    while done_blocks < blocks:
        b = min(_CHUNK, blocks - done_blocks)
        H = crandn(rng, (b, K, K, N, N))
        V_shared = None
        if perfect_csi:
            V_shared, nc = _solve(H, d, g, rng)
            fails += nc
        for a, p_dbm in enumerate(powers):
            p_t = float(dbm_to_mw(p_dbm))
            P = p_t * g
            if perfect_csi:
                V = V_shared
                A_hat = H @ V[:, None]
            else:
                err = CsiErrorModel.from_training(g, p_t, p_noise, N, d)
                Hh = split_estimate(H, err.reverse_variance, rng).estimates
                V, nc = _solve(Hh, d, P, rng)
                fails[a] += nc
                A_hat = split_estimate(H @ V[:, None], err.error_variance, rng).estimates
            U = min_interference_combiners(A_hat, P / P.max(), d)
            r = instantaneous_rates(H, P, V, U, p_noise).sum(axis=-1)
            sums[a, 0] += math.fsum(r.tolist())
            sums[a, 1] += math.fsum((r * r).tolist())
        done_blocks += b

    rows = []
    for a, p_dbm in enumerate(powers):
        p_t = float(dbm_to_mw(p_dbm))
        if perfect_csi:
            err = CsiErrorModel.perfect(K)
        else:
            err = CsiErrorModel.from_training(g, p_t, p_noise, N, d)
        mean = sums[a, 0] / blocks
        var = max(sums[a, 1] / blocks - mean * mean, 0.0) * blocks / max(blocks - 1, 1)
        rows.append(
            ValidationRow(p_dbm, _analytic(g, err, p_t, p_noise, d), mean, math.sqrt(var / blocks), blocks, int(fails[a]))
        )
    return rows


def run_validation(cfg: SimConfig, perfect_csi: bool | None = None) -> ValidationResult:
    """Validate the closed form on the first ``validation_realizations`` placements.

    Per power point the analytic and simulated rates are averaged over the
    placements; solver non-convergence is counted, never fatal.
    """
    if Scheme.IA.value not in cfg.schemes:
        raise ConfigError("validation needs IA among the selected schemes")
    perfect = cfg.validation_csi == "perfect" if perfect_csi is None else bool(perfect_csi)
    per_real = []
    for j in range(cfg.validation_realizations):
        index = cfg.realization_offset + j
        gains = realization_gains(cfg, index)
        rng = np.random.default_rng(np.random.SeedSequence([cfg.master_seed, index, _STREAM]))
        per_real.append(
            validate_gains(
                gains, cfg.N, cfg.d, cfg.p_t_sweep, cfg.p_noise_dbm, cfg.validation_blocks, perfect, rng
            )
        )
    n = len(per_real)
    rows = []
    for a in range(len(cfg.p_t_sweep)):
        col = [rr[a] for rr in per_real]
        rows.append(
            ValidationRow(
                col[0].p_t_dbm,
                math.fsum(c.analytic for c in col) / n,
                math.fsum(c.simulated for c in col) / n,
                math.sqrt(math.fsum(c.std_err**2 for c in col)) / n,
                sum(c.blocks for c in col),
                sum(c.nonconverged for c in col),
            )
        )
    return ValidationResult(rows, "perfect" if perfect else "training", cfg, {"master_seed": cfg.master_seed})
