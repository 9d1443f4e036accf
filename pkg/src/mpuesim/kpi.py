"""Mobility event counters, outage ledger and normalised KPI report."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

log = logging.getLogger(__name__)

SUCCESSFUL_HO_OUTAGE_MS = 55
REESTABLISHMENT_OUTAGE_MS = 180
FAST_HO_WINDOW_MS = 1000

# higher number wins where intervals overlap
OUTAGE_PRECEDENCE = {"sinr_degradation": 0, "successful_ho": 1, "reestablishment": 2}


def classify_fast_ho(prev_ho, new_ho, t_fh_ms: int = FAST_HO_WINDOW_MS) -> str:
    """Classify a successful HO against the UE's previous one.

    Each HO is ``(t_ms, source, target)``.  Returns ``"pingpong"`` for
    A->B->A and ``"shortstay"`` for A->B->C when the second HO completes within
    ``t_fh_ms`` of the first, else ``"none"``.
    """
    if prev_ho is None:
        return "none"
    t1, a, b = prev_ho
    t2, src, dst = new_ho
    if src != b or t2 - t1 > t_fh_ms:
        return "none"
    return "pingpong" if dst == a else "shortstay"


def _subtract(interval, taken):
    """Parts of ``interval`` not covered by the sorted disjoint list ``taken``."""
    s, e = interval
    out = []
    for ts, te in taken:
        if te <= s or ts >= e:
            continue
        if ts > s:
            out.append((s, ts))
        s = max(s, te)
        if s >= e:
            break
    if s < e:
        out.append((s, e))
    return out


def _union(intervals):
    merged = []
    for s, e in sorted(intervals):
        if merged and s <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], e))
        else:
            merged.append((s, e))
    return merged


def _clipped(outages, t_end_ms):
    return [(u, s, min(e, t_end_ms), c) for u, s, e, c in outages if s < t_end_ms]


@dataclass
class KpiLedger:
    """Counters and raw outage bookings for one run (times in ms)."""

    n_ue: int
    t_fh_ms: int = FAST_HO_WINDOW_MS
    counters: dict = field(
        default_factory=lambda: {"rlf": 0, "hof": 0, "ho_success": 0, "pingpong": 0, "shortstay": 0}
    )
    outages: list = field(default_factory=list)  # (ue, start, end, cause)
    sinr_samples: list = field(default_factory=list)
    last_ho: dict = field(default_factory=dict)

    def count(self, name: str, n: int = 1) -> None:
        self.counters[name] += n

    def record_ho(self, ue: int, t_ms: int, source: int, target: int) -> str:
        kind = classify_fast_ho(self.last_ho.get(ue), (t_ms, source, target), self.t_fh_ms)
        self.counters["ho_success"] += 1
        if kind != "none":
            self.counters[kind] += 1
        self.last_ho[ue] = (t_ms, source, target)
        return kind

    def forget_ho(self, ue: int) -> None:
        self.last_ho.pop(ue, None)

    def effective_outages(self, t_end_ms: float = float("inf")) -> dict[str, dict[int, list]]:
        """Non-overlapping outage intervals per cause and UE after precedence.

        Intervals are clipped to ``[0, t_end_ms)`` first.
        """
        per_ue: dict[int, list] = {}
        for ue, s, e, cause in _clipped(self.outages, t_end_ms):
            per_ue.setdefault(ue, []).append((s, e, cause))
        result = {c: {} for c in OUTAGE_PRECEDENCE}
        for ue, items in per_ue.items():
            taken: list = []
            for cause in sorted(OUTAGE_PRECEDENCE, key=OUTAGE_PRECEDENCE.get, reverse=True):
                own = _union([(s, e) for s, e, c in items if c == cause])
                kept = []
                for iv in own:
                    kept += _subtract(iv, taken)
                result[cause][ue] = kept
                taken = _union(taken + kept)
        return result


def book_outage(ledger: KpiLedger, ue: int, interval, cause: str) -> KpiLedger:
    """Record an outage interval ``(start_ms, end_ms)`` for ``ue``."""
    if cause not in OUTAGE_PRECEDENCE:
        raise ValueError(f"unknown outage cause {cause!r}")
    start, end = interval
    if end <= start:
        log.warning("rejected outage interval %s for ue %d (%s)", interval, ue, cause)
        raise ValueError("outage interval must have positive length")
    ledger.outages.append((int(ue), start, end, cause))
    return ledger


@dataclass
class KpiReport:
    n_ue: int
    t_sim_s: float
    rlf_rate: float
    hof_rate: float
    ho_success_rate: float
    fast_ho_rate: float
    pingpong_rate: float
    shortstay_rate: float
    total_outage_pct: float
    outage_pct: dict
    counters: dict
    sinr_median_db: float = float("nan")
    sinr_p2_db: float = float("nan")

    def to_dict(self) -> dict:
        return asdict(self)


def finalize_report(ledger: KpiLedger, n_ue: int, t_sim_s: float) -> KpiReport:
    """Normalise counts to events per UE per minute and outage to percent."""
    if t_sim_s <= 0:
        raise ValueError("t_sim must be positive")
    if n_ue <= 0:
        raise ValueError("n_ue must be positive")
    ue_min = n_ue * t_sim_s / 60.0
    c = ledger.counters
    t_end = t_sim_s * 1000.0
    eff = ledger.effective_outages(t_end)
    denom_ms = n_ue * t_end
    parts = {
        cause: sum(e - s for ivs in per_ue.values() for s, e in ivs) / denom_ms * 100.0
        for cause, per_ue in eff.items()
    }
    per_ue: dict[int, list] = {}
    for ue, s, e, _ in _clipped(ledger.outages, t_end):
        per_ue.setdefault(ue, []).append((s, e))
    total = sum(e - s for ivs in per_ue.values() for s, e in _union(ivs)) / denom_ms * 100.0
    sinr = np.asarray(ledger.sinr_samples, dtype=float)
    return KpiReport(
        n_ue=n_ue,
        t_sim_s=t_sim_s,
        rlf_rate=c["rlf"] / ue_min,
        hof_rate=c["hof"] / ue_min,
        ho_success_rate=c["ho_success"] / ue_min,
        fast_ho_rate=(c["pingpong"] + c["shortstay"]) / ue_min,
        pingpong_rate=c["pingpong"] / ue_min,
        shortstay_rate=c["shortstay"] / ue_min,
        total_outage_pct=total,
        outage_pct=parts,
        counters=dict(c),
        sinr_median_db=float(np.median(sinr)) if sinr.size else float("nan"),
        sinr_p2_db=float(np.percentile(sinr, 2)) if sinr.size else float("nan"),
    )
