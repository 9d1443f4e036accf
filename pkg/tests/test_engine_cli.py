import csv
import json
import math

import numpy as np
import pytest

from mpuesim.cli import main
from mpuesim.config import make_config
from mpuesim.engine import EVENT_COLUMNS, run_campaign, run_simulation, simulate

SMALL = dict(n_ue=8, t_sim_s=1.0)


@pytest.fixture(scope="module")
def small_run():
    return simulate(make_config(seed=3, **SMALL))


def test_bit_identical_reruns(small_run):
    again = simulate(make_config(seed=3, **SMALL))
    for name, res in small_run.items():
        assert res.events == again[name].events
        np.testing.assert_array_equal(res.sinr, again[name].sinr)
        assert res.report == again[name].report


def test_seed_changes_outcome(small_run):
    other = simulate(make_config(seed=4, **SMALL), ["reference"])["reference"]
    assert not np.array_equal(other.sinr, small_run["reference"].sinr)


def test_approach_result_independent_of_companions(small_run):
    # the channel randomness does not depend on which approaches share the pass
    alone = simulate(make_config(seed=3, **SMALL), ["rx2"])["rx2"]
    assert alone.events == small_run["rx2"].events
    np.testing.assert_array_equal(alone.sinr, small_run["rx2"].sinr)


def test_run_simulation_wrapper(small_run):
    rep, ev, sinr = run_simulation(make_config(seed=3, **SMALL), "rx1")
    assert rep == small_run["rx1"].report and ev == small_run["rx1"].events


def test_sinr_sample_count(small_run):
    for res in small_run.values():
        # one sample per attached UE-step; never more than n_ue * n_steps
        assert 0 < res.sinr.size <= 8 * 100


def test_static_ues_never_hand_over():
    res = simulate(make_config(seed=5, n_ue=10, t_sim_s=2.0, ue_speed_kmh=0.0))
    for r in res.values():
        assert r.report.counters["ho_success"] == 0
        assert r.report.counters["hof"] == 0


def test_rx_beamforming_lifts_median_sinr():
    res = simulate(make_config(seed=2, n_ue=20, t_sim_s=2.0), ["reference", "rx1"])
    assert res["rx1"].report.sinr_median_db >= res["reference"].report.sinr_median_db


def test_campaign_cardinality_and_deltas():
    cfg = make_config(**SMALL)
    res = run_campaign(cfg, ["reference", "rx1", "rx1"], [1, 2])
    assert len(res.runs) == 6
    rows = res.table
    assert [r["approach"] for r in rows] == ["reference", "rx1", "rx1"]
    a, b = rows[1], rows[2]
    assert all(a[k] == b[k] or (math.isnan(a[k]) and math.isnan(b[k])) for k in a)
    ref = rows[0]
    for k in ("rlf_rate", "ho_success_rate", "total_outage_pct"):
        m = np.mean(list(res.per_seed("rx1", k).values()))
        assert a[k] == pytest.approx(m)
        if ref[k]:
            assert a[f"{k}_rel_vs_reference"] == pytest.approx((m - ref[k]) / ref[k])
    assert a["sinr_median_db_delta_vs_reference"] == pytest.approx(a["sinr_median_db"] - ref["sinr_median_db"])
    with pytest.raises(ValueError):
        run_campaign(cfg, ["rx1"], [])


def test_campaign_runs_are_paired_per_seed():
    res = run_campaign(make_config(**SMALL), ["reference", "rx3"], [7])
    single = simulate(make_config(seed=7, **SMALL), ["rx3"])["rx3"]
    assert res.runs[1].events == single.events


def test_cli_run_writes_outputs(tmp_path, capsys):
    out = tmp_path / "o"
    code = main(["run", "--seed", "2", "--approach", "rx1", "--approach", "reference", "--out", str(out),
                 "--config", str(_cfg(tmp_path))])
    assert code == 0
    for name in ("rx1", "reference"):
        d = out / f"{name}_seed2"
        rep = json.loads((d / "report.json").read_text())
        assert rep["approach"] == name and rep["config"]["n_ue"] == 6
        with open(d / "events.csv") as f:
            assert next(csv.reader(f)) == list(EVENT_COLUMNS)
        assert (d / "sinr.csv").read_text().startswith("sinr_db")
    assert "rx1" in capsys.readouterr().out


def _cfg(tmp_path):
    p = tmp_path / "tiny.yaml"
    p.write_text("n_ue: 6\nt_sim_s: 0.6\n")
    return p


def test_cli_campaign_and_plot_data(tmp_path):
    out = tmp_path / "c"
    assert main(["campaign", "--seeds", "1,2", "--out", str(out), "--config", str(_cfg(tmp_path))]) == 0
    runs = sorted(p.name for p in out.iterdir() if p.is_dir())
    assert len(runs) == 8
    with open(out / "comparison.csv") as f:
        assert [r["approach"] for r in csv.DictReader(f)] == ["reference", "rx1", "rx2", "rx3"]
    plots = tmp_path / "p"
    assert main(["plot-data", "--runs", str(out), "--out", str(plots)]) == 0
    with open(plots / "sinr_cdf.csv") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["cdf", "reference", "rx1", "rx2", "rx3"] and len(rows) == 202
    col = [float(r[1]) for r in rows[1:]]
    assert col == sorted(col)
    with open(plots / "kpi_bars.csv") as f:
        assert len(list(csv.DictReader(f))) == 4


def test_cli_dump_patterns(tmp_path):
    assert main(["dump-patterns", "--step", "30", "--out", str(tmp_path)]) == 0
    with open(tmp_path / "patterns.csv") as f:
        rows = list(csv.reader(f))
    assert rows[0][0] == "side" and len(rows) == 1 + (12 + 24) * 12


def test_cli_config_error_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.yaml"
    p.write_text("omega: 3\nbogus: 1\n")
    assert main(["run", "--config", str(p), "--out", str(tmp_path)]) == 2
    assert "bogus" in capsys.readouterr().err


def test_plot_data_without_runs(tmp_path):
    assert main(["plot-data", "--runs", str(tmp_path), "--out", str(tmp_path / "x")]) == 1
