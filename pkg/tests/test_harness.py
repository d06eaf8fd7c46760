import csv
from pathlib import Path

import numpy as np
import pytest

from iasim.cli import main
from iasim.errors import ConfigError, InfeasibleError
from iasim.harness import (
    SimConfig,
    SweepResult,
    TopologySpec,
    build_placement,
    dump_config,
    export_topology,
    load_config,
    parse_config_text,
    read_csv,
    run_sweep,
    validate_gains,
    write_csv,
    write_plot_stub,
)

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def small(**kw):
    base = dict(realizations=4, p_t_sweep=(0.0, 10.0, 20.0), master_seed=3)
    base.update(kw)
    return SimConfig(**base)


# configuration grammar


def test_topology_spec_parsing():
    assert TopologySpec.parse("grid(2, 3)") == TopologySpec("grid", 2, 3)
    assert TopologySpec.parse(" Random(12) ").n_tx == 12
    assert str(TopologySpec.parse("line")) == "line"
    for bad in ("ring", "grid(2)", "random(a)", "line(3)"):
        with pytest.raises(ConfigError):
            TopologySpec.parse(bad)


def test_parse_text_with_comments():
    text = """
    # comment line
    topology = random(8)   # trailing comment
    tau_coh = 50
    p_t_sweep = 0:10:5
    schemes = ia, su-mimo
    validation = yes
    seed = 17
    """
    v = parse_config_text(text)
    assert v["topology"] == TopologySpec("random", n_tx=8)
    assert v["tau_coh"] == 50
    assert v["p_t_sweep"] == (0.0, 5.0, 10.0)
    assert v["schemes"] == ("IA", "SU_MIMO")
    assert v["validation"] is True
    assert v["master_seed"] == 17


@pytest.mark.parametrize("text", ["nonsense", "colour = red", "tau_coh = ten", "p_t_sweep = 0:10:0"])
def test_parse_errors(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_default_sweep():
    cfg = SimConfig()
    assert cfg.p_t_sweep == tuple(float(x) for x in range(0, 31, 2))
    assert cfg.side == pytest.approx(10.0)


def test_config_invariants():
    with pytest.raises(ConfigError):
        SimConfig(realizations=0)
    with pytest.raises(ConfigError):
        SimConfig(p_t_sweep=())
    with pytest.raises(ConfigError):
        SimConfig(topology="grid(2,3)")
    with pytest.raises(ConfigError):
        SimConfig(topology="random(3)")
    with pytest.raises(InfeasibleError):
        SimConfig(N=4)
    # infeasibility only matters when IA is selected
    assert SimConfig(N=4, schemes=("TDMA",)).N == 4


def test_dump_round_trip():
    cfg = small(topology="random(12)", gamma=3.5, area_side=12.0)
    again = load_config(None, parse_config_text(dump_config(cfg)))
    assert again == cfg


def test_file_then_override(tmp_path):
    p = tmp_path / "a.cfg"
    p.write_text("tau_coh = 60\ngamma = 3.0\n")
    cfg = load_config(p, {"gamma": 3.5})
    assert (cfg.tau_coh, cfg.gamma) == (60, 3.5)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.cfg")


def test_shipped_configs_load():
    for p in sorted(CONFIGS.glob("*.cfg")):
        load_config(p)


# sweeps


def test_sweep_rows_and_order():
    res = run_sweep(small())
    assert len(res.rows) == 9
    keys = [(r.p_t_dbm, r.scheme) for r in res.rows]
    assert keys == sorted(keys)
    assert all(r.realizations == 4 for r in res.rows)


def test_sweep_deterministic():
    assert run_sweep(small()).rows == run_sweep(small()).rows
    assert run_sweep(small()).rows != run_sweep(small(master_seed=4)).rows


def test_single_realization_has_zero_std_err():
    res = run_sweep(small(realizations=1))
    assert all(r.std_err == 0.0 for r in res.rows)


def test_realization_independence():
    whole = run_sweep(small(realizations=6))
    a = run_sweep(small(realizations=3))
    b = run_sweep(small(realizations=3, realization_offset=3))
    for w, x, y in zip(whole.rows, a.rows, b.rows):
        assert w.mean_sum_rate == pytest.approx((x.mean_sum_rate + y.mean_sum_rate) / 2, rel=1e-13)


def test_parallel_matches_serial():
    assert run_sweep(small(workers=2)).rows == run_sweep(small()).rows


@pytest.mark.parametrize("topo", ["line", "grid(2,2)", "random(8)"])
def test_longer_coherence_never_hurts(topo):
    rates = [run_sweep(small(topology=topo, tau_coh=t)) for t in (30, 60, 120)]
    for scheme in ("IA", "TDMA", "SU_MIMO"):
        c = [r.curve(scheme) for r in rates]
        assert np.all(c[0] <= c[1]) and np.all(c[1] <= c[2])


def test_short_block_gives_zero_ia_rate():
    res = run_sweep(small(tau_coh=28))
    assert np.all(res.curve("IA") == 0.0)


def test_placement_kinds():
    assert build_placement(small(topology="line"), 0).kind == "line"
    assert build_placement(small(topology="random(9)"), 0).num_tx == 9


# files


def test_write_csv_format_and_round_trip(tmp_path):
    res = run_sweep(small())
    path = write_csv(res, tmp_path / "out.csv")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "p_t_dbm,scheme,mean_sum_rate_bits,std_err,realizations"
    assert len(lines) == 10
    back = read_csv(path)
    for a, b in zip(res.rows, back.rows):
        assert (a.p_t_dbm, a.scheme, a.realizations) == (b.p_t_dbm, b.scheme, b.realizations)
        assert b.mean_sum_rate == pytest.approx(a.mean_sum_rate, rel=1e-8)
        assert b.std_err == pytest.approx(a.std_err, rel=1e-8)
    meta = parse_config_text((tmp_path / "out.csv.meta").read_text())
    assert load_config(None, meta) == res.config.replace(workers=1)


def test_empty_sweep_writes_header_only(tmp_path):
    path = write_csv(SweepResult([]), tmp_path / "e.csv")
    assert path.read_text() == "p_t_dbm,scheme,mean_sum_rate_bits,std_err,realizations\n"


def test_write_error_names_the_path(tmp_path):
    with pytest.raises(OSError, match="nodir"):
        write_csv(SweepResult([]), tmp_path / "nodir" / "x.csv")


def _topology_rows(cfg, tmp_path):
    path = export_topology(build_placement(cfg, 0), tmp_path / "t.csv")
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_export_grid_topology(tmp_path):
    rows = _topology_rows(small(), tmp_path)
    assert rows[0] == ["node_type", "index", "x_m", "y_m", "associated_tx"]
    assert len(rows) == 9
    assert [r[0] for r in rows[1:]].count("tx") == 4


def test_export_random_topology(tmp_path):
    rows = _topology_rows(small(topology="random(12)"), tmp_path)[1:]
    assert len(rows) == 16
    tx = [r for r in rows if r[0] == "tx"]
    assert sum(1 for r in tx if r[4] != "") == 4
    served = {r[4] for r in rows if r[0] == "rx"}
    assert served == {r[4] for r in tx if r[4] != ""}


def test_plot_stub_is_python(tmp_path):
    path = write_plot_stub(tmp_path / "plot.py")
    compile(path.read_text(), str(path), "exec")


# validation


def test_single_pair_validation_matches_closed_form():
    rows = validate_gains(np.array([[1e-5]]), 5, 2, [0.0, 20.0], blocks=4000, perfect_csi=True, rng_seed=2)
    for r in rows:
        assert abs(r.simulated - r.analytic) < 4 * r.std_err
        assert r.nonconverged == 0


def test_small_validation_run():
    gains = np.full((4, 4), 1e-6) + np.eye(4) * 1e-4
    rows = validate_gains(gains, 5, 2, [10.0], blocks=40, rng_seed=1)
    assert rows[0].blocks == 40
    assert abs(rows[0].gap) < 0.1


# command line


def test_cli_run_and_exit_codes(tmp_path, capsys):
    out = tmp_path / "r.csv"
    args = ["run", "--config", str(CONFIGS / "fig4.cfg"), "--seed", "7", "--realizations", "2", "--out", str(out)]
    assert main(args) == 0
    assert out.exists() and (tmp_path / "r.csv.meta").exists()
    assert "master_seed = 7" in (tmp_path / "r.csv.meta").read_text()
    assert main(["run", "--out", str(out), "--K", "3"]) == 1
    assert main(["run", "--out", str(out), "--N", "4"]) == 1
    assert main(["run", "--gamma", "x", "--out", str(out)]) == 1
    assert main(["run"]) == 1
    assert main(["bogus"]) == 1
    assert main(["run", "--realizations", "1", "--out", str(tmp_path / "no" / "r.csv")]) == 2


def test_cli_topology_and_validate(tmp_path, capsys):
    topo = tmp_path / "t.csv"
    assert main(["topology", "--topology", "random(12)", "--out", str(topo)]) == 0
    assert len(topo.read_text().splitlines()) == 17
    val = tmp_path / "v.csv"
    rc = main(
        ["validate", "--p-t-sweep", "10", "--validation-blocks", "10", "--out", str(val), "--perfect-csi"]
    )
    assert rc == 0
    assert val.read_text().startswith("p_t_dbm,analytic_bits,simulated_bits")
    assert "gap" in capsys.readouterr().out


def test_cli_selftest(capsys):
    assert main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") >= 5
