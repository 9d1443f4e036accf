"""L1/L3 measurement filtering, cell quality and panel/Rx-beam selection.

All filters average in the dB domain.  Functions accept arrays with arbitrary
leading axes so the same code serves single links and whole UE batches.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FilterConfig:
    omega: int = 2  # L1 period in time steps
    n_l1: int = 2
    k_cell: float = 4.0
    k_beam: float = 4.0
    p_thr: float = -105.0  # dBm
    n_str: int = 2

    def __post_init__(self):
        if self.omega < 1 or self.n_l1 < 1 or self.n_str < 1:
            raise ValueError("omega, n_l1 and n_str must be >= 1")
        if self.k_cell < 0 or self.k_beam < 0:
            raise ValueError("L3 filter coefficients must be non-negative")

    @property
    def alpha_cell(self) -> float:
        return l3_alpha(self.k_cell)

    @property
    def alpha_beam(self) -> float:
        return l3_alpha(self.k_beam)


def l3_alpha(k: float) -> float:
    """Forgetting factor ``(1/2)^(k/4)``."""
    return 0.5 ** (k / 4.0)


def l1_filter(raw_history, omega: int, n_l1: int, m: int):
    """Moving average of ``n_l1`` raw samples spaced ``omega`` steps, ending at ``m``.

    ``raw_history`` is indexed by time step along axis 0.  During warm-up only
    the samples that exist are averaged.
    """
    raw = np.asarray(raw_history, dtype=float)
    idx = [m - omega * i for i in range(n_l1) if m - omega * i >= 0]
    if not idx:
        raise ValueError("no raw samples available at or before m")
    return raw[idx].mean(axis=0)


def strongest_beam_set(l1_beams, p_thr: float):
    """Boolean mask of beams whose L1 RSRP exceeds ``p_thr``."""
    return np.asarray(l1_beams) > p_thr


def cell_quality_l1(l1_beams, p_thr: float, n_str: int):
    """L1 cell quality from beam RSRPs along the last axis.

    Averages the up-to-``n_str`` strongest beams above ``p_thr``; when none is
    above the threshold the single strongest beam is used.
    """
    x = np.asarray(l1_beams, dtype=float)
    ranked = -np.sort(-x, axis=-1)
    above = ranked > p_thr
    take = above & (np.arange(x.shape[-1]) < n_str)
    count = take.sum(-1)
    mean_above = np.where(take, ranked, 0.0).sum(-1) / np.maximum(count, 1)
    return np.where(count > 0, mean_above, ranked[..., 0])


def l3_iir(prev_l3, l1_value, k: float):
    """One L3 IIR update; a NaN ``prev_l3`` seeds the filter with ``l1_value``."""
    a = l3_alpha(k)
    prev = np.asarray(prev_l3, dtype=float)
    cur = np.asarray(l1_value, dtype=float)
    out = a * cur + (1.0 - a) * prev
    return np.where(np.isnan(prev), cur, out)


def _first_argmax(x, axis_count: int):
    """Flat argmax over the trailing ``axis_count`` axes (lowest index on ties)."""
    x = np.asarray(x)
    flat = x.reshape(x.shape[: x.ndim - axis_count] + (-1,))
    return np.argmax(flat, axis=-1)


def select_serving_panel_rx(l1_dr):
    """Serving (panel, Rx beam) as the argmax of a ``(D, R)`` table.

    Returns 1-based ``(d0, r0)``; ties go to the lowest panel, then beam.
    """
    l1_dr = np.asarray(l1_dr)
    k = int(_first_argmax(l1_dr, 2))
    d, r = np.unravel_index(k, l1_dr.shape)
    return int(d) + 1, int(r) + 1


def select_best_panel_rx(l1_bdr):
    """Best (panel, Rx beam, Tx beam) as the joint argmax of a ``(B, D, R)`` table.

    A ``(B, D)`` table (wide reception, no Rx beam index) returns
    ``(d_c, None, b)``.
    """
    l1_bdr = np.asarray(l1_bdr)
    if l1_bdr.ndim == 2:
        b, d = np.unravel_index(int(_first_argmax(l1_bdr, 2)), l1_bdr.shape)
        return int(d) + 1, None, int(b) + 1
    b, d, r = np.unravel_index(int(_first_argmax(l1_bdr, 3)), l1_bdr.shape)
    return int(d) + 1, int(r) + 1, int(b) + 1


def masked_argmax(values, allowed, axis: int = -1):
    """Argmax along ``axis`` restricted to entries where ``allowed`` is True."""
    return np.argmax(np.where(allowed, values, -np.inf), axis=axis)


class MeasurementBank:
    """Filter memories of one approach for a batch of UEs.

    Raw samples are pushed at every L1 instant with shape ``(U, C, B, Q)``.
    ``l3_cfg`` selects the receive configs allowed on the L3 path (wide or
    refined).  Per-UE resets restart both the L1 window and the L3 filters.
    """

    def __init__(self, cfg: FilterConfig, n_ue: int, l3_allowed: np.ndarray):
        self.cfg = cfg
        self.n_ue = n_ue
        self.l3_allowed = np.asarray(l3_allowed, dtype=bool)
        self.depth = np.zeros(n_ue, dtype=int)  # samples since reset
        self.l3_cell = None
        self.l3_beam = None
        self.l1 = None
        self.l1_cell = None
        self.l1_path_beams = None
        self.best_q = None

    def reset(self, ue) -> None:
        self.depth[ue] = 0
        if self.l3_cell is not None:
            self.l3_cell[ue] = np.nan
            self.l3_beam[ue] = np.nan

    def update(self, l1_by_depth: list[np.ndarray]) -> None:
        """Consume L1 tables computed over 1..n_l1 samples (shared across approaches)."""
        cfg = self.cfg
        self.depth = np.minimum(self.depth + 1, cfg.n_l1)
        stack = np.stack(l1_by_depth)  # (n_l1, U, C, B, Q)
        d = np.minimum(self.depth, len(l1_by_depth)) - 1
        self.l1 = stack[d, np.arange(self.n_ue)]  # (U, C, B, Q)

        # best config per cell over (b, allowed q), then that config's beam values
        u, c, b, q = self.l1.shape
        masked = np.where(self.l3_allowed, self.l1, -np.inf).reshape(u, c, b * q)
        k = np.argmax(masked, axis=-1)
        self.best_q = k % q  # (U, C)
        beams = np.take_along_axis(self.l1, self.best_q[:, :, None, None], axis=3)[..., 0]
        self.l1_path_beams = beams  # (U, C, B)
        self.l1_cell = cell_quality_l1(beams, cfg.p_thr, cfg.n_str)

        if self.l3_cell is None:
            self.l3_cell = np.full((u, c), np.nan)
            self.l3_beam = np.full((u, c, b), np.nan)
        self.l3_cell = l3_iir(self.l3_cell, self.l1_cell, cfg.k_cell)
        self.l3_beam = l3_iir(self.l3_beam, beams, cfg.k_beam)


def l1_tables(history: list[np.ndarray], n_l1: int) -> list[np.ndarray]:
    """L1 averages over the last 1..n_l1 raw samples (newest last in ``history``)."""
    out = []
    acc = np.zeros_like(history[-1])
    for k in range(1, n_l1 + 1):
        if k <= len(history):
            acc = acc + history[-k]
            out.append(acc / k)
        else:
            out.append(out[-1])
    return out
