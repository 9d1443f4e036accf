"""Time-stepped orchestration of one or more approaches over a shared channel.

All approaches requested for a seed are stepped through the same channel
realisation in a single pass.  The channel only reads the drop, shadow,
fading and measurement streams, and none of them depends on an approach, so
the comparison is paired by construction.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .antenna import MpuePanelSet, build_tx_grid
from .channel import ChannelConfig, ChannelModel
from .config import RunConfig, validate
from .kpi import KpiReport, finalize_report
from .measurement import FilterConfig, l1_tables
from .mobility import APPROACHES, ControlPlane, MobilityParams
from .rng import substream
from .scenario import KMH, build_layout, drop_ues, step_positions
from .sinr import noise_power_dbm

log = logging.getLogger(__name__)

EVENT_COLUMNS = ("time_ms", "ue", "event", "source_cell", "target_cell", "beam")
KPI_COLUMNS = ("rlf_rate", "hof_rate", "ho_success_rate", "fast_ho_rate", "total_outage_pct",
               "sinr_median_db", "sinr_p2_db")


@dataclass
class RunResult:
    approach: str
    seed: int
    report: KpiReport
    events: list  # rows matching EVENT_COLUMNS
    sinr: np.ndarray
    outages: list = field(default_factory=list)  # raw ledger bookings (ue, start_ms, end_ms, cause)


def mobility_params(cfg: RunConfig) -> MobilityParams:
    return MobilityParams(
        dt_ms=cfg.dt_ms, ssb_ms=cfg.ssb_period_ms, a3_offset_db=cfg.a3_offset_db, ttt_ms=cfg.ttt_ms,
        gamma_out_db=cfg.gamma_out_db, gamma_in_db=cfg.gamma_in_db, t_rlf_ms=cfg.t_rlf_ms,
        t_hof_ms=cfg.t_hof_ms, rach_period_ms=cfg.rach_period_ms, bfd_count=cfg.bfd_count,
        n_batt=cfg.n_batt, t_batt_ms=cfg.t_batt_ms, prep_delay_ms=cfg.prep_delay_ms,
        early_report_ms=cfg.early_report_ms, reest_ms=cfg.reest_outage_ms,
        ho_outage_ms=cfg.ho_outage_ms, k_b=cfg.k_b,
        noise_dbm=noise_power_dbm(cfg.bandwidth_hz, cfg.noise_figure_db), rlm_window=cfg.rlm_window,
    )


def filter_config(cfg: RunConfig) -> FilterConfig:
    return FilterConfig(omega=cfg.omega, n_l1=cfg.n_l1, k_cell=cfg.k_cell, k_beam=cfg.k_beam,
                        p_thr=cfg.p_thr_dbm, n_str=cfg.n_str)


def channel_config(cfg: RunConfig) -> ChannelConfig:
    return ChannelConfig(
        fc_ghz=cfg.fc_ghz, tx_power_dbm=cfg.tx_power_dbm, sigma_los=cfg.sigma_los_db,
        sigma_nlos=cfg.sigma_nlos_db, shadow_d_corr=cfg.shadow_decorrelation_m, fading=cfg.fading,
        n_rays=cfg.n_rays, angular_spread_deg=cfg.angular_spread_deg, rician_k_db=cfg.rician_k_db,
        measurement_error_db=cfg.measurement_error_db,
    )


def simulate(cfg: RunConfig, approaches=None, channel_trace: list | None = None) -> dict[str, RunResult]:
    """Run the listed approaches (default: ``cfg.approaches``) for ``cfg.seed``.

    If ``channel_trace`` is a list, the raw RSRP tensor of every step is
    appended to it (memory heavy; meant for small runs and tests).
    """
    validate(cfg)
    names = list(dict.fromkeys(approaches or cfg.approaches))
    layout = build_layout(cfg.inter_site_distance_m, cfg.n_rings, cfg.bs_height_m, cfg.ue_height_m)
    grid = build_tx_grid()
    panels = MpuePanelSet(panel_offsets=tuple(cfg.panel_offsets_deg))
    ues = drop_ues(layout, cfg.n_ue, substream(cfg.seed, "drop"), cfg.ue_speed_kmh * KMH)
    pos = np.array([u.position for u in ues])
    heading = np.array([u.heading for u in ues])
    speed = np.array([u.speed for u in ues])
    chan = ChannelModel(
        layout, grid, panels, channel_config(cfg), pos, heading, cfg.ue_speed_kmh * KMH,
        substream(cfg.seed, "shadow"), substream(cfg.seed, "fading"), substream(cfg.seed, "measurement"),
    )
    params, fcfg = mobility_params(cfg), filter_config(cfg)
    planes = {
        n: ControlPlane(APPROACHES[n], params, fcfg, cfg.n_ue, layout.n_cells, panels.refined_mask,
                        cfg.fast_ho_window_ms)
        for n in names
    }
    history: list[np.ndarray] = []
    dt_s = cfg.dt_ms / 1000.0
    t0 = time.perf_counter()
    for k in range(cfg.n_steps):
        t_ms = k * cfg.dt_ms
        if k:
            pos = step_positions(layout, pos, speed, heading, dt_s)
        rsrp = chan.step(pos, t_ms).rsrp
        if channel_trace is not None:
            channel_trace.append(rsrp)
        tables = None
        if k % cfg.omega == 0:
            history.append(rsrp)
            del history[: -cfg.n_l1]
            tables = l1_tables(history, cfg.n_l1)
        for plane in planes.values():
            plane.step(t_ms, rsrp, tables)
    t_end = cfg.n_steps * cfg.dt_ms
    log.info("seed %d: %d steps in %.1f s", cfg.seed, cfg.n_steps, time.perf_counter() - t0)
    out = {}
    for n, plane in planes.items():
        plane.finish(t_end)
        report = finalize_report(plane.ledger, cfg.n_ue, cfg.t_sim_s)
        out[n] = RunResult(n, cfg.seed, report, sorted(plane.events.rows),
                           np.asarray(plane.ledger.sinr_samples), list(plane.ledger.outages))
    return out


def run_simulation(cfg: RunConfig, approach: str | None = None):
    """Run one approach; returns ``(KpiReport, event rows, SINR samples)``."""
    name = approach or cfg.approaches[0]
    res = simulate(cfg, [name])[name]
    return res.report, res.events, res.sinr


def _simulate_seed(args):
    cfg, approaches, seed = args
    return simulate(replace(cfg, seed=seed), approaches)


@dataclass
class CampaignResult:
    runs: list[RunResult]
    table: list[dict]  # one row per approach: means across seeds and deltas vs reference

    def per_seed(self, approach: str, key: str) -> dict[int, float]:
        return {r.seed: _kpi(r.report, key) for r in self.runs if r.approach == approach}

    def mean(self, approach: str, key: str) -> float:
        return next(row[key] for row in self.table if row["approach"] == approach)


def _kpi(report: KpiReport, key: str) -> float:
    if key.startswith("outage_"):
        return report.outage_pct[key[len("outage_"):]]
    return getattr(report, key)


def comparison_table(runs: list[RunResult], approaches) -> list[dict]:
    keys = list(KPI_COLUMNS) + [f"outage_{c}" for c in ("sinr_degradation", "successful_ho", "reestablishment")]
    rows = []
    for a in approaches:
        mine = [r for r in runs if r.approach == a]
        row = {"approach": a, "n_seeds": len(mine)}
        for k in keys:
            row[k] = float(np.mean([_kpi(r.report, k) for r in mine]))
        rows.append(row)
    ref = next((r for r in rows if r["approach"] == "reference"), None)
    for row in rows:
        for k in keys:
            base = ref[k] if ref else float("nan")
            if k.startswith("sinr"):
                row[f"{k}_delta_vs_reference"] = row[k] - base
            else:
                row[f"{k}_rel_vs_reference"] = (row[k] - base) / base if base else float("nan")
    return rows


def run_campaign(cfg: RunConfig, approaches, seeds, workers: int = 1) -> CampaignResult:
    """Paired campaign: every approach sees the same drops and channel per seed."""
    seeds = list(seeds)
    if not seeds:
        raise ValueError("a campaign needs at least one seed")
    approaches = list(approaches)
    unique = list(dict.fromkeys(approaches))
    jobs = [(cfg, unique, s) for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            results = list(ex.map(_simulate_seed, jobs))
    else:
        results = [_simulate_seed(j) for j in jobs]
    runs = [res[a] for res in results for a in approaches]
    return CampaignResult(runs, comparison_table(runs, approaches))


# -- output ---------------------------------------------------------------------------------


def run_dir(out: Path, approach: str, seed: int) -> Path:
    return Path(out) / f"{approach}_seed{seed}"


def write_run(result: RunResult, out: Path, cfg: RunConfig | None = None) -> Path:
    d = run_dir(out, result.approach, result.seed)
    d.mkdir(parents=True, exist_ok=True)
    payload = {"approach": result.approach, "seed": result.seed, **result.report.to_dict()}
    if cfg is not None:
        payload["config"] = cfg.to_dict()
    (d / "report.json").write_text(json.dumps(payload, indent=2, allow_nan=True))
    with open(d / "events.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(EVENT_COLUMNS)
        for row in result.events:
            t, ue, ev, src, tgt, beam = row
            w.writerow((t, ue, ev, "" if src < 0 else src, "" if tgt < 0 else tgt, "" if beam < 0 else beam))
    with open(d / "sinr.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(("sinr_db",))
        w.writerows((f"{v:.4f}",) for v in result.sinr)
    return d


def write_table(rows: list[dict], path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
