"""Tx beam grid and multi-panel UE receive patterns.

Angles follow the usual convention: ``theta`` is the zenith angle (90 deg is
the horizon) and ``phi`` the azimuth measured from the panel boresight.
Arrays are planar with rows stacked vertically and columns horizontally.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import fsolve

N_WIDE = 3  # one wide (single element) config per panel


def wrap_deg(a):
    """Wrap angles to [-180, 180)."""
    return (np.asarray(a, dtype=float) + 180.0) % 360.0 - 180.0


@dataclass(frozen=True)
class AntennaElementPattern:
    """Parametric element pattern, ``A = G_max - min(-(A_V + A_H), A_m)``."""

    max_gain: float = 8.0
    hpbw_az: float = 65.0
    hpbw_el: float = 65.0
    front_back: float = 30.0
    side_lobe_floor: float = 30.0

    def gain(self, theta, phi):
        theta = np.asarray(theta, dtype=float)
        phi = wrap_deg(phi)
        a_v = -np.minimum(12.0 * ((theta - 90.0) / self.hpbw_el) ** 2, self.side_lobe_floor)
        a_h = -np.minimum(12.0 * (phi / self.hpbw_az) ** 2, self.front_back)
        return self.max_gain - np.minimum(-(a_v + a_h), self.front_back)


TX_ELEMENT = AntennaElementPattern(8.0, 65.0, 65.0, 30.0, 30.0)
RX_ELEMENT = AntennaElementPattern(5.0, 90.0, 90.0, 25.0, 25.0)


def _dirichlet_power(x, n: int):
    """``|sum_k exp(j k x)|^2`` for ``k = 0..n-1``."""
    x = np.asarray(x, dtype=float)
    half = x / 2.0
    s = np.sin(half)
    small = np.abs(s) < 1e-12
    safe = np.where(small, 1.0, s)
    return np.where(small, float(n * n), (np.sin(n * half) / safe) ** 2)


def array_gain_db(theta, phi, steer_theta, steer_phi, rows, cols, d_v, d_h):
    """Normalised array factor of a ``rows x cols`` planar array, in dB.

    Peak value is ``10 log10(rows * cols)`` at the steering direction.
    Spacings ``d_v``/``d_h`` are in wavelengths.
    """
    th = np.radians(theta)
    ph = np.radians(phi)
    ths = np.radians(steer_theta)
    phs = np.radians(steer_phi)
    xv = 2.0 * np.pi * d_v * (np.cos(th) - np.cos(ths))
    xh = 2.0 * np.pi * d_h * (np.sin(th) * np.sin(ph) - np.sin(ths) * np.sin(phs))
    power = _dirichlet_power(xv, rows) * _dirichlet_power(xh, cols) / (rows * cols)
    return 10.0 * np.log10(np.maximum(power, 1e-30))


def _compensated_steering(element, theta_b, phi_b, rows, cols, d_v, d_h):
    """Steering angles whose composite (element + array) peak sits at (theta_b, phi_b).

    The element taper pulls the composite maximum towards the panel boresight;
    the array is over-steered just enough to cancel that pull.
    """
    h = 1e-4

    def total(th, ph, sth, sph):
        return element.gain(th, ph) + array_gain_db(th, ph, sth, sph, rows, cols, d_v, d_h)

    def grad(steer):
        sth, sph = steer
        gth = (total(theta_b + h, phi_b, sth, sph) - total(theta_b - h, phi_b, sth, sph)) / (2 * h)
        gph = (total(theta_b, phi_b + h, sth, sph) - total(theta_b, phi_b - h, sth, sph)) / (2 * h)
        return [float(gth) if rows > 1 else sth - theta_b, float(gph) if cols > 1 else sph - phi_b]

    sol, _, ok, _ = fsolve(grad, [theta_b, phi_b], full_output=True, xtol=1e-10)
    if ok != 1:
        return float(theta_b), float(phi_b)
    return float(sol[0]), float(sol[1])


@dataclass(frozen=True)
class TxBeam:
    beam_id: int
    theta: float
    phi: float
    rows: int
    cols: int
    steer_theta: float
    steer_phi: float


@dataclass(frozen=True)
class TxBeamGrid:
    """Twelve-beam grid: eight narrow outer beams and four wide inner beams."""

    beams: tuple[TxBeam, ...]
    element: AntennaElementPattern = TX_ELEMENT
    d_v: float = 0.7
    d_h: float = 0.5

    @property
    def n_beams(self) -> int:
        return len(self.beams)

    def gain(self, beam_id: int, theta, phi):
        if not 1 <= beam_id <= self.n_beams:
            raise ValueError(f"unknown Tx beam id {beam_id}")
        return tx_beam_gain(self, beam_id, theta, phi)

    def gain_all(self, theta, phi):
        """Gain of every beam; output has a trailing beam axis."""
        theta = np.asarray(theta, dtype=float)[..., None]
        phi = np.asarray(phi, dtype=float)[..., None]
        el = self.element.gain(theta, phi)
        out = np.empty(np.broadcast_shapes(theta.shape, phi.shape)[:-1] + (self.n_beams,))
        for i, b in enumerate(self.beams):
            out[..., i] = array_gain_db(
                theta[..., 0], phi[..., 0], b.steer_theta, b.steer_phi, b.rows, b.cols, self.d_v, self.d_h
            )
        return out + el


def build_tx_grid(
    element: AntennaElementPattern = TX_ELEMENT, d_v: float = 0.7, d_h: float = 0.5
) -> TxBeamGrid:
    beams = []
    for b in range(1, 13):
        if b <= 8:
            theta, phi, rows, cols = 90.0, -52.5 + 15.0 * (b - 1), 16, 8
        else:
            theta, phi, rows, cols = 97.0, -45.0 + 30.0 * (b - 9), 8, 4
        sth, sph = _compensated_steering(element, theta, phi, rows, cols, d_v, d_h)
        beams.append(TxBeam(b, theta, phi, rows, cols, sth, sph))
    return TxBeamGrid(tuple(beams), element, d_v, d_h)


def tx_beam_gain(grid: TxBeamGrid, beam_id: int, theta, phi):
    """Element gain plus array factor of ``beam_id`` towards (theta, phi), dB."""
    b = grid.beams[beam_id - 1]
    return grid.element.gain(theta, phi) + array_gain_db(
        theta, phi, b.steer_theta, b.steer_phi, b.rows, b.cols, grid.d_v, grid.d_h
    )


def orient_panels(ue_heading_deg: float, offsets=(0.0, 120.0, -120.0)) -> np.ndarray:
    """Global boresight azimuths of the three panels for a given UE heading."""
    return wrap_deg(np.asarray(ue_heading_deg, dtype=float)[..., None] + np.asarray(offsets))


@dataclass(frozen=True)
class MpuePanelSet:
    """Three edge panels, each a 1 x N horizontal array with seven refined beams.

    Receive configurations are indexed ``q``: ``q < 3`` is the wide
    (single-element) mode of panel ``q``; ``q = 3 + 7 d + (r - 1)`` is refined
    beam ``r`` of panel ``d``.
    """

    panel_offsets: tuple[float, ...] = (0.0, 120.0, -120.0)
    n_elements: int = 4
    spacing: float = 0.5
    beam_azimuths: tuple[float, ...] = tuple(-45.0 + 15.0 * (r - 1) for r in range(1, 8))
    beam_theta: float = 90.0
    element: AntennaElementPattern = RX_ELEMENT
    rx_beamforming: bool = True
    _steer: tuple[float, ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        steer = tuple(
            _compensated_steering(self.element, self.beam_theta, a, 1, self.n_elements, 0.5, self.spacing)[1]
            for a in self.beam_azimuths
        )
        object.__setattr__(self, "_steer", steer)

    @property
    def n_panels(self) -> int:
        return len(self.panel_offsets)

    @property
    def n_rx_beams(self) -> int:
        return len(self.beam_azimuths)

    @property
    def n_configs(self) -> int:
        return self.n_panels * (1 + self.n_rx_beams)

    def config_index(self, panel: int, rx_beam: int | None) -> int:
        """Config index for 1-based panel and Rx beam ids (``None`` = wide)."""
        if rx_beam is None:
            return panel - 1
        return self.n_panels + (panel - 1) * self.n_rx_beams + (rx_beam - 1)

    def config_label(self, q: int) -> tuple[int, int | None]:
        if q < self.n_panels:
            return q + 1, None
        k = q - self.n_panels
        return k // self.n_rx_beams + 1, k % self.n_rx_beams + 1

    @property
    def config_panel(self) -> np.ndarray:
        return np.array([self.config_label(q)[0] - 1 for q in range(self.n_configs)])

    @property
    def refined_mask(self) -> np.ndarray:
        return np.arange(self.n_configs) >= self.n_panels

    def _refined_gain(self, rx_beam: int, theta, phi_panel):
        return self.element.gain(theta, phi_panel) + array_gain_db(
            theta, phi_panel, self.beam_theta, self._steer[rx_beam - 1], 1, self.n_elements, 0.5, self.spacing
        )

    def gain_all(self, theta, phi_ue):
        """Gain of every receive config; trailing axis of length ``n_configs``.

        ``phi_ue`` is the arrival azimuth in the UE frame (0 = heading).
        """
        theta = np.asarray(theta, dtype=float)
        phi_ue = np.asarray(phi_ue, dtype=float)
        shape = np.broadcast_shapes(theta.shape, phi_ue.shape)
        out = np.empty(shape + (self.n_configs,))
        for d, off in enumerate(self.panel_offsets):
            rel = wrap_deg(phi_ue - off)
            el = self.element.gain(theta, rel)
            out[..., d] = el
            for r in range(self.n_rx_beams):
                q = self.n_panels + d * self.n_rx_beams + r
                out[..., q] = el + array_gain_db(
                    theta, rel, self.beam_theta, self._steer[r], 1, self.n_elements, 0.5, self.spacing
                )
        return out


def rx_gain(panel_set: MpuePanelSet, panel_id: int, rx_beam_id: int | None, theta, phi_ue):
    """Receive gain of one panel in wide (``rx_beam_id=None``) or refined mode."""
    if not 1 <= panel_id <= panel_set.n_panels:
        raise ValueError(f"unknown panel id {panel_id}")
    rel = wrap_deg(np.asarray(phi_ue, dtype=float) - panel_set.panel_offsets[panel_id - 1])
    if rx_beam_id is None:
        return panel_set.element.gain(theta, rel)
    if not panel_set.rx_beamforming:
        raise ValueError("refined Rx beams are not available without Rx beamforming")
    if not 1 <= rx_beam_id <= panel_set.n_rx_beams:
        raise ValueError(f"unknown Rx beam id {rx_beam_id}")
    return panel_set._refined_gain(rx_beam_id, theta, rel)


def pattern_rows(grid: TxBeamGrid, panels: MpuePanelSet, step_deg: float = 1.0):
    """Azimuth cuts of every Tx beam and Rx config, for plotting."""
    phis = np.arange(-180.0, 180.0, step_deg)
    rows = []
    for b in grid.beams:
        g = tx_beam_gain(grid, b.beam_id, b.theta, phis)
        rows += [("tx", b.beam_id, "", b.theta, float(p), float(v)) for p, v in zip(phis, g)]
    g = panels.gain_all(90.0, phis)
    for q in range(panels.n_configs):
        d, r = panels.config_label(q)
        rows += [("rx", d, "wide" if r is None else r, 90.0, float(p), float(v)) for p, v in zip(phis, g[:, q])]
    return rows
