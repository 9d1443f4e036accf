"""Average downlink SINR under full-buffer interference, and the RLM metric."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np


def db2lin(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def lin2db(x):
    return 10.0 * np.log10(np.maximum(np.asarray(x, dtype=float), 1e-300))


def noise_power_dbm(bandwidth_hz: float = 100e6, noise_figure_db: float = 10.0) -> float:
    """Thermal noise over the band plus receiver noise figure."""
    return -174.0 + 10.0 * math.log10(bandwidth_hz) + noise_figure_db


@dataclass(frozen=True)
class SinrSample:
    sinr_db: float
    signal_dbm: float
    interference_dbm: float
    noise_dbm: float


def expected_interference_mw(rsrp_b_dbm, k_b: int):
    """Expected power from one cell that schedules ``k_b`` of its beams uniformly.

    ``rsrp_b_dbm`` holds the cell's beams along the last axis.
    """
    p = db2lin(rsrp_b_dbm)
    return (k_b / p.shape[-1]) * p.sum(-1)


def monte_carlo_interference_mw(rsrp_b_dbm, k_b: int, n_draws: int, rng: np.random.Generator):
    """Mean interference over ``n_draws`` random K_b-beam schedules of one cell."""
    p = db2lin(rsrp_b_dbm)
    n_b = p.shape[-1]
    keys = rng.random((n_draws, n_b))
    chosen = np.argsort(keys, axis=1)[:, :k_b]
    return p[..., chosen].sum(-1).mean(-1)


def link_sinr(rsrp_cb_dbm, cell: int, beam: int, noise_dbm: float, k_b: int = 4,
              mode: str = "expectation", n_draws: int = 1000, rng=None) -> SinrSample:
    """SINR of link (cell, beam) given the raw RSRP table ``(C, B)`` of one Rx config.

    Interference is the sum over all other cells; the serving cell's other
    beams do not interfere.  ``cell`` and ``beam`` are 0-based indices.
    """
    r = np.asarray(rsrp_cb_dbm, dtype=float)
    others = [c for c in range(r.shape[0]) if c != cell]
    if mode == "expectation":
        i_mw = float(expected_interference_mw(r[others], k_b).sum()) if others else 0.0
    elif mode == "monte_carlo":
        if rng is None:
            raise ValueError("monte_carlo mode needs an rng")
        i_mw = float(sum(monte_carlo_interference_mw(r[c], k_b, n_draws, rng) for c in others))
    else:
        raise ValueError(f"unknown interference mode {mode!r}")
    s_mw = float(db2lin(r[cell, beam]))
    n_mw = float(db2lin(noise_dbm))
    return SinrSample(
        sinr_db=float(lin2db(s_mw / (n_mw + i_mw))),
        signal_dbm=float(r[cell, beam]),
        interference_dbm=float(lin2db(i_mw)) if i_mw > 0 else -math.inf,
        noise_dbm=noise_dbm,
    )


def batch_sinr(rsrp_ucb_dbm, cell, beam, noise_dbm: float, k_b: int = 4):
    """Vectorised expectation-form SINR (dB) for one link per UE.

    ``rsrp_ucb_dbm`` has shape ``(U, C, B)``; ``cell`` and ``beam`` are
    ``(U,)`` index arrays.
    """
    p = db2lin(rsrp_ucb_dbm)
    u = np.arange(p.shape[0])
    per_cell = p.sum(-1) * (k_b / p.shape[-1])  # (U, C)
    interf = per_cell.sum(-1) - per_cell[u, cell]
    signal = p[u, cell, beam]
    return lin2db(signal / (db2lin(noise_dbm) + interf))


@dataclass
class RlmState:
    """Sliding dB-domain average of the serving SINR."""

    window: int = 4
    samples: deque = field(default_factory=deque)

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("RLM window must be >= 1")

    @property
    def value(self) -> float:
        return float(np.mean(self.samples)) if self.samples else math.nan


def update_rlm(rlm: RlmState, serving_sinr_db: float) -> RlmState:
    rlm.samples.append(float(serving_sinr_db))
    while len(rlm.samples) > rlm.window:
        rlm.samples.popleft()
    return rlm


class BatchRlm:
    """:class:`RlmState` for a batch of UEs with per-UE resets."""

    def __init__(self, n_ue: int, window: int):
        self.window = window
        self.buf = np.zeros((n_ue, window))
        self.count = np.zeros(n_ue, dtype=int)

    def reset(self, ue) -> None:
        self.count[ue] = 0
        self.buf[ue] = 0.0

    def update(self, sinr_db: np.ndarray, mask: np.ndarray) -> np.ndarray:
        """Push a sample for UEs in ``mask``; returns the current averages."""
        slot = self.count % self.window
        idx = np.nonzero(mask)[0]
        self.buf[idx, slot[idx]] = sinr_db[idx]
        self.count[idx] += 1
        n = np.minimum(self.count, self.window)
        return np.where(n > 0, self.buf.sum(-1) / np.maximum(n, 1), np.nan)
