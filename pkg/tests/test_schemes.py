import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iasim.channel import CsiErrorModel, crandn
from iasim.errors import InfeasibleError, NumericalError
from iasim.schemes import (
    Scheme,
    SchemeConfig,
    ia_sum_rate,
    mi_lower_bound_check,
    mi_lower_bound_forms,
    overhead_factor,
    scheme_sum_rate,
    su_mimo_sum_rate,
    tdma_sum_rate,
)
from iasim.specfun import ergodic_rate

G = np.full((4, 4), 1e-6) + np.eye(4) * (1e-4 - 1e-6)
P_N = 10**-9.5


def test_overhead_factor_value_and_clamp():
    cfg = SchemeConfig(4, 5, 5, 2, 100)
    assert cfg.ia_training == 28
    assert overhead_factor(100, cfg.ia_training) == pytest.approx(0.72)
    assert overhead_factor(20, 28) == 0.0


def test_explicit_training_lengths():
    cfg = SchemeConfig(4, 5, 5, 2, 100, minimum_training=False, tau_rp=30, tau_fp=10)
    assert cfg.ia_training == 40
    assert cfg.tau_baseline == 20


def test_ia_sum_rate_composition():
    cfg = SchemeConfig(4, 5, 5, 2, 100)
    err = CsiErrorModel.from_training(G, 1.0, P_N, 5, 2)
    res = ia_sum_rate(G, err, 1.0, P_N, cfg)
    want = 0.72 * sum(ergodic_rate(s, 2, 2) for s in res.snr)
    assert res.total == pytest.approx(want, rel=1e-13)
    assert res.overhead_fraction == pytest.approx(0.28)


def test_baselines_composition():
    cfg = SchemeConfig(4, 5, 5, 2, 100)
    err = CsiErrorModel.baseline(G, 1.0, P_N, 5)
    t = tdma_sum_rate(G, err, 1.0, P_N, cfg)
    s = su_mimo_sum_rate(G, err, 1.0, P_N, cfg)
    assert t.total == pytest.approx(0.8 / 4 * sum(ergodic_rate(x, 5, 5) for x in t.snr))
    assert s.total == pytest.approx(0.8 * sum(ergodic_rate(x, 5, 5) for x in s.snr))
    assert scheme_sum_rate("TDMA", G, err, 1.0, P_N, cfg).total == t.total


def test_perfect_csi_still_pays_training():
    cfg = SchemeConfig(4, 5, 5, 2, 100)
    res = ia_sum_rate(G, CsiErrorModel.perfect(4), 1.0, P_N, cfg)
    assert res.total == pytest.approx(0.72 * 4 * ergodic_rate(1e-4 / P_N, 2, 2))


def test_ia_infeasible():
    with pytest.raises(InfeasibleError):
        ia_sum_rate(G, CsiErrorModel.perfect(4), 1.0, P_N, SchemeConfig(4, 4, 4, 2, 100))


def test_scheme_names():
    assert Scheme("SU_MIMO") is Scheme.SU_MIMO
    with pytest.raises(ValueError):
        Scheme("FDMA")


@given(st.integers(1, 8), st.integers(1, 8), st.floats(0.0, 0.9), st.floats(0.01, 100.0), st.integers(0, 2**31))
@settings(max_examples=100, deadline=None)
def test_lower_bound_forms_agree(nr, nt, s2, p, seed):
    H = crandn(np.random.default_rng(seed), (nr, nt))
    forms = mi_lower_bound_forms(H, p, nt, s2, 1.0)
    assert forms[0] == pytest.approx(forms[2], rel=1e-10, abs=1e-12)
    assert forms[1] == pytest.approx(forms[2], rel=1e-10, abs=1e-12)
    assert mi_lower_bound_check(H, p, nt, s2, 1.0) == forms[2]


def test_lower_bound_shape_and_variance_checks():
    with pytest.raises(ValueError):
        mi_lower_bound_forms(np.eye(2), 1.0, 3, 0.1, 1.0)
    with pytest.raises(ValueError):
        mi_lower_bound_forms(np.eye(2), 1.0, 2, 1.0, 1.0)


def test_lower_bound_check_flags_disagreement(monkeypatch):
    import iasim.schemes as sm

    monkeypatch.setattr(sm, "mi_lower_bound_forms", lambda *a: (1.0, 1.0, 2.0))
    with pytest.raises(NumericalError):
        sm.mi_lower_bound_check(np.eye(2), 1.0, 2, 0.1, 1.0)
