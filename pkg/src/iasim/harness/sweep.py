"""Closed-form power sweeps averaged over topology realizations."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..channel import CsiErrorModel, derive_seed
from ..schemes import Scheme, SchemeConfig, scheme_sum_rate
from ..topology import (
    LinkGainMatrix,
    NodePlacement,
    PathLossModel,
    dbm_to_mw,
    link_gains,
    place_grid,
    place_line,
    place_random,
)
from .config import SimConfig

__all__ = ["SweepRow", "SweepResult", "build_placement", "realization_gains", "realization_rates", "run_sweep"]


@dataclass(frozen=True)
class SweepRow:
    p_t_dbm: float
    scheme: str
    mean_sum_rate: float
    std_err: float
    realizations: int


@dataclass
class SweepResult:
    rows: list[SweepRow]
    config: SimConfig | None = None
    metadata: dict = field(default_factory=dict)

    def curve(self, scheme: str) -> np.ndarray:
        """Mean sum-rate of ``scheme`` ordered by ascending power."""
        scheme = Scheme(scheme).value
        pts = sorted((r.p_t_dbm, r.mean_sum_rate) for r in self.rows if r.scheme == scheme)
        return np.array([m for _, m in pts])

    def powers(self) -> np.ndarray:
        return np.array(sorted({r.p_t_dbm for r in self.rows}))


def build_placement(cfg: SimConfig, index: int) -> NodePlacement:
    """Node placement of realization ``index``, seeded from ``(master_seed, index)``."""
    seed = derive_seed(cfg.master_seed, index)
    topo = cfg.topology
    if topo.kind == "line":
        return place_line(cfg.K, cfg.cell_side, rng_seed=seed)
    if topo.kind == "grid":
        return place_grid(topo.rows, topo.cols, cfg.cell_side, rng_seed=seed)
    return place_random(topo.n_tx, cfg.K, cfg.side, rng_seed=seed)


def realization_gains(cfg: SimConfig, index: int) -> LinkGainMatrix:
    model = PathLossModel(cfg.gamma, cfg.reference_loss_db)
    return link_gains(build_placement(cfg, index), model)


def realization_rates(cfg: SimConfig, index: int) -> np.ndarray:
    """Closed-form sum-rates of one realization, shape ``(powers, schemes)``.

    Schemes follow ``cfg.schemes`` (sorted by name), powers ``cfg.p_t_sweep``.
    """
    gains = realization_gains(cfg, index).gains
    p_noise = float(dbm_to_mw(cfg.p_noise_dbm))
    scfg = SchemeConfig(cfg.K, cfg.N, cfg.N, cfg.d, cfg.tau_coh)
    out = np.empty((len(cfg.p_t_sweep), len(cfg.schemes)))
    for a, p_dbm in enumerate(cfg.p_t_sweep):
        p_t = float(dbm_to_mw(p_dbm))
        errs = {
            Scheme.IA.value: CsiErrorModel.from_training(gains, p_t, p_noise, cfg.N, cfg.d),
            "baseline": CsiErrorModel.baseline(gains, p_t, p_noise, cfg.N),
        }
        for b, name in enumerate(cfg.schemes):
            err = errs.get(name, errs["baseline"])
            out[a, b] = scheme_sum_rate(name, gains, err, p_t, p_noise, scfg).total
    return out


def _task(args):
    cfg, index = args
    return realization_rates(cfg, index)


def _collect(cfg: SimConfig) -> np.ndarray:
    indices = range(cfg.realization_offset, cfg.realization_offset + cfg.realizations)
    if cfg.workers > 1 and cfg.realizations > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            # map() yields in submission order, so the reduction order is fixed
            parts = list(pool.map(_task, [(cfg, r) for r in indices], chunksize=4))
    else:
        parts = [realization_rates(cfg, r) for r in indices]
    return np.stack(parts)


def run_sweep(cfg: SimConfig) -> SweepResult:
    """Mean and standard error of every scheme's sum-rate at every power."""
    data = _collect(cfg)
    n = data.shape[0]
    rows = []
    for a, p_dbm in enumerate(cfg.p_t_sweep):
        for b, name in enumerate(cfg.schemes):
            vals = data[:, a, b].tolist()
            mean = math.fsum(vals) / n
            if n > 1:
                var = math.fsum((v - mean) ** 2 for v in vals) / (n - 1)
                se = math.sqrt(var / n)
            else:
                se = 0.0
            rows.append(SweepRow(float(p_dbm), name, mean, se, n))
    rows.sort(key=lambda r: (r.p_t_dbm, r.scheme))
    return SweepResult(rows, cfg, {"master_seed": cfg.master_seed})
