"""Quick invariant checks runnable from the command line."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from ..alignment import min_leakage_solve
from ..channel import crandn, draw_channels
from ..schemes import mi_lower_bound_check, overhead_factor
from ..specfun import ergodic_rate, expint, expint_scaled_orders, mc_rate_oracle
from ..topology import path_loss_db
from .config import SimConfig
from .sweep import run_sweep

__all__ = ["CHECKS", "run_selftest"]


def _expint_recurrence():
    for z in (0.05, 0.7, 3.0, 40.0):
        s = expint_scaled_orders(10, z)
        for n in range(1, 10):
            # e^z E_{n+1}(z) = (1 - z e^z E_n(z)) / n
            want = (1.0 - z * s[n]) / n
            assert abs(s[n + 1] - want) <= 1e-10 * abs(want), (n, z)
    e1 = expint(1, 1.0)
    assert abs(e1 - 0.21938393439552029) < 1e-15


def _rate_vs_oracle():
    for snr, d, m in ((1.0, 1, 1), (10.0, 2, 2), (0.5, 2, 4)):
        est = mc_rate_oracle(snr, d, m, samples=200_000, seed=7)
        assert abs(ergodic_rate(snr, d, m) - est.mean) < 4 * est.std_err, (snr, d, m)


def _formulas():
    assert abs(overhead_factor(100, 4 * 5 + 4 * 2) - 0.72) < 1e-15
    assert path_loss_db(1.0) == 30.0


def _lower_bound_forms():
    rng = np.random.default_rng(3)
    for n in (1, 3, 6):
        mi_lower_bound_check(crandn(rng, (n, n)), 10.0, n, 0.2, 1.0, rtol=1e-10)


def _solver():
    sol = min_leakage_solve(draw_channels(3, 2, 2, rng_seed=11), 1, rng_seed=11)
    assert sol.converged and sol.leakage <= 1e-8
    assert all(b <= a * (1 + 1e-12) + 1e-300 for a, b in zip(sol.trace, sol.trace[1:]))
    for m in (sol.precoders, sol.combiners):
        gram = np.conj(np.swapaxes(m, -1, -2)) @ m
        assert np.max(np.abs(gram - np.eye(m.shape[-1]))) < 1e-12


def _determinism():
    cfg = SimConfig(realizations=3, p_t_sweep=(0.0, 20.0), master_seed=5)
    a, b = run_sweep(cfg), run_sweep(cfg)
    assert a.rows == b.rows
    ia = a.curve("IA")
    assert np.all(ia > a.curve("TDMA")) and np.all(ia > a.curve("SU_MIMO"))
    assert all(math.isfinite(r.mean_sum_rate) for r in a.rows)


CHECKS: dict[str, Callable[[], None]] = {
    "expint recurrence": _expint_recurrence,
    "closed form vs Monte Carlo": _rate_vs_oracle,
    "overhead and path loss": _formulas,
    "lower-bound determinant forms": _lower_bound_forms,
    "min-leakage convergence": _solver,
    "sweep determinism and ordering": _determinism,
}


def run_selftest(emit=print) -> bool:
    ok = True
    for name, check in CHECKS.items():
        try:
            check()
        except Exception as exc:  # report and keep going
            ok = False
            emit(f"FAIL {name}: {type(exc).__name__} {exc}")
        else:
            emit(f"PASS {name}")
    return ok
