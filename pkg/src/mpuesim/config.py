"""Run configuration: defaults, profiles, validation and file loading."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import yaml

APPROACH_NAMES = ("reference", "rx1", "rx2", "rx3")


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists ``(field, message)`` pairs."""

    def __init__(self, errors: list[tuple[str, str]]):
        self.errors = errors
        super().__init__("; ".join(f"{k}: {m}" for k, m in errors))


@dataclass(frozen=True)
class RunConfig:
    # run
    seed: int = 1
    approaches: tuple[str, ...] = APPROACH_NAMES
    n_ue: int = 100
    t_sim_s: float = 10.0
    dt_ms: int = 10
    # deployment
    inter_site_distance_m: float = 200.0
    n_rings: int = 1
    bs_height_m: float = 10.0
    ue_height_m: float = 1.5
    ue_speed_kmh: float = 60.0
    # radio
    fc_ghz: float = 28.0
    bandwidth_hz: float = 100e6
    noise_figure_db: float = 10.0
    tx_power_dbm: float = 40.0
    k_b: int = 4
    sigma_los_db: float = 4.0
    sigma_nlos_db: float = 7.82
    shadow_decorrelation_m: float = 13.0
    fading: bool = True
    n_rays: int = 20
    angular_spread_deg: float = 35.0
    rician_k_db: float = 9.0
    measurement_error_db: float = 0.0
    panel_offsets_deg: tuple[float, ...] = (0.0, 120.0, -120.0)
    # measurement
    ssb_period_ms: int = 20
    omega: int = 2
    n_l1: int = 2
    k_cell: float = 4.0
    k_beam: float = 4.0
    p_thr_dbm: float = -105.0
    n_str: int = 2
    # mobility procedures
    a3_offset_db: float = 2.0
    ttt_ms: int = 80
    early_report_ms: int = 0
    prep_delay_ms: int = 0
    gamma_out_db: float = -8.0
    gamma_in_db: float = -6.0
    rlm_window: int = 4
    t_rlf_ms: int = 1000
    t_hof_ms: int = 200
    rach_period_ms: int = 10
    bfd_count: int = 2
    n_batt: int = 4
    t_batt_ms: int = 10
    # accounting
    ho_outage_ms: int = 55
    reest_outage_ms: int = 180
    fast_ho_window_ms: int = 1000

    @property
    def n_steps(self) -> int:
        return int(round(self.t_sim_s * 1000.0 / self.dt_ms))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["approaches"] = list(self.approaches)
        d["panel_offsets_deg"] = list(self.panel_offsets_deg)
        return d


PROFILES = {
    "desk": {"n_ue": 100, "t_sim_s": 10.0},
    "full": {"n_ue": 420, "t_sim_s": 30.0},
}

_INT_FIELDS = {f.name for f in fields(RunConfig) if f.type == "int"}
_FLOAT_FIELDS = {f.name for f in fields(RunConfig) if f.type == "float"}


def validate(cfg: RunConfig) -> RunConfig:
    """Raise :class:`ConfigError` listing every invalid field."""
    err: list[tuple[str, str]] = []
    for name in _INT_FIELDS:
        v = getattr(cfg, name)
        if isinstance(v, bool) or not isinstance(v, int):
            err.append((name, f"expected an integer, got {v!r}"))
    for name in _FLOAT_FIELDS:
        v = getattr(cfg, name)
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            err.append((name, f"expected a finite number, got {v!r}"))
    if not isinstance(cfg.fading, bool):
        err.append(("fading", "expected true or false"))
    if err:
        raise ConfigError(err)

    def positive(*names):
        for n in names:
            if getattr(cfg, n) <= 0:
                err.append((n, "must be positive"))

    def non_negative(*names):
        for n in names:
            if getattr(cfg, n) < 0:
                err.append((n, "must be non-negative"))

    positive("n_ue", "t_sim_s", "dt_ms", "inter_site_distance_m", "bs_height_m", "ue_height_m",
             "fc_ghz", "bandwidth_hz", "k_b", "ssb_period_ms", "omega", "n_l1", "n_str", "ttt_ms",
             "rlm_window", "t_rlf_ms", "t_hof_ms", "rach_period_ms", "bfd_count", "n_batt",
             "t_batt_ms", "ho_outage_ms", "reest_outage_ms", "fast_ho_window_ms",
             "shadow_decorrelation_m", "n_rays")
    non_negative("seed", "ue_speed_kmh", "sigma_los_db", "sigma_nlos_db", "k_cell", "k_beam",
                 "angular_spread_deg", "measurement_error_db", "early_report_ms", "prep_delay_ms")
    if cfg.n_rings != 1:
        err.append(("n_rings", "only the one-ring 7-site cluster is supported"))
    if cfg.dt_ms > 0 and cfg.ssb_period_ms % cfg.dt_ms:
        err.append(("ssb_period_ms", "time step must divide the SSB period"))
    if cfg.omega * cfg.dt_ms != cfg.ssb_period_ms:
        err.append(("omega", "omega * dt_ms must equal ssb_period_ms"))
    if cfg.k_b > 12:
        err.append(("k_b", "cannot schedule more than the 12 Tx beams"))
    if cfg.gamma_in_db <= cfg.gamma_out_db:
        err.append(("gamma_in_db", "must exceed gamma_out_db"))
    if cfg.ssb_period_ms > 0:
        for n in ("ttt_ms", "early_report_ms"):
            if getattr(cfg, n) % cfg.ssb_period_ms:
                err.append((n, "must be a multiple of ssb_period_ms"))
        if cfg.early_report_ms >= cfg.ttt_ms:
            err.append(("early_report_ms", "must be shorter than ttt_ms"))
    if cfg.dt_ms > 0:
        for n in ("rach_period_ms", "t_hof_ms", "t_batt_ms", "prep_delay_ms", "t_rlf_ms"):
            if getattr(cfg, n) % cfg.dt_ms:
                err.append((n, "must be a multiple of dt_ms"))
        if abs(cfg.t_sim_s * 1000.0 / cfg.dt_ms - cfg.n_steps) > 1e-9:
            err.append(("t_sim_s", "must be a whole number of time steps"))
    bad = [a for a in cfg.approaches if a not in APPROACH_NAMES]
    if bad or not cfg.approaches:
        err.append(("approaches", f"choose from {', '.join(APPROACH_NAMES)}"))
    if len(cfg.panel_offsets_deg) < 1:
        err.append(("panel_offsets_deg", "need at least one panel"))
    if err:
        raise ConfigError(err)
    return cfg


def _coerce(data: dict) -> dict:
    names = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError([(k, "unknown configuration key") for k in unknown])
    out = dict(data)
    for k in ("approaches", "panel_offsets_deg"):
        if k in out:
            v = out[k]
            out[k] = (v,) if isinstance(v, str) else tuple(v)
    for k in _FLOAT_FIELDS:
        if k in out and isinstance(out[k], int) and not isinstance(out[k], bool):
            out[k] = float(out[k])
    return out


def make_config(profile: str = "desk", **overrides) -> RunConfig:
    """Profile defaults plus overrides, validated."""
    if profile not in PROFILES:
        raise ConfigError([("profile", f"unknown profile {profile!r}")])
    data = {**PROFILES[profile], **overrides}
    return validate(RunConfig(**_coerce(data)))


def load_config(path: str | Path, profile: str = "desk", **overrides) -> RunConfig:
    """Read a YAML or JSON mapping of RunConfig fields on top of a profile."""
    text = Path(path).read_text()
    data = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError([("<file>", "top level must be a mapping")])
    _coerce(data)  # report unknown keys before merging
    return make_config(profile, **{**data, **overrides})


def with_overrides(cfg: RunConfig, **kw) -> RunConfig:
    return validate(replace(cfg, **_coerce(kw)))


__all__ = ["APPROACH_NAMES", "ConfigError", "PROFILES", "RunConfig", "load_config", "make_config",
           "validate", "with_overrides"]
