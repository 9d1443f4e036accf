"""Large-scale and fast-fading link model producing raw beam RSRP.

Path loss, LoS probability and shadowing follow the UMi street-canyon family.
Fast fading is a sum-of-sinusoids (Jakes-style) process with explicit ray
arrival angles, so a receive beam weights each ray by its own gain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .antenna import MpuePanelSet, TxBeamGrid, wrap_deg
from .scenario import NetworkLayout, nearest_images

SPEED_OF_LIGHT = 299_792_458.0

# running counts of out-of-domain inputs that were clamped
diagnostics = {"path_loss_clamped": 0}


def los_probability(d2d):
    """UMi street-canyon LoS probability."""
    d = np.maximum(np.asarray(d2d, dtype=float), 1e-9)
    p = 18.0 / d + np.exp(-d / 36.0) * (1.0 - 18.0 / d)
    return np.where(d <= 18.0, 1.0, p)


def path_loss_umi(distance_3d, fc_ghz: float = 28.0, los: bool = True, h_bs: float = 10.0, h_ut: float = 1.5):
    """UMi street-canyon path loss in dB.

    Distances below 1 m are clamped to 1 m.  The breakpoint test uses the 3D
    distance, which only matters beyond ~1.7 km at 28 GHz.
    """
    d = np.asarray(distance_3d, dtype=float)
    diagnostics["path_loss_clamped"] += int(np.count_nonzero(d < 1.0))
    d = np.maximum(d, 1.0)
    d_bp = 4.0 * (h_bs - 1.0) * (h_ut - 1.0) * fc_ghz * 1e9 / SPEED_OF_LIGHT
    pl1 = 32.4 + 21.0 * np.log10(d) + 20.0 * math.log10(fc_ghz)
    pl2 = 32.4 + 40.0 * np.log10(d) + 20.0 * math.log10(fc_ghz) - 9.5 * math.log10(d_bp**2 + (h_bs - h_ut) ** 2)
    pl_los = np.where(d <= d_bp, pl1, pl2)
    if los:
        return pl_los
    pl_nlos = 35.3 * np.log10(d) + 22.4 + 21.3 * math.log10(fc_ghz) - 0.3 * (h_ut - 1.5)
    return np.maximum(pl_los, pl_nlos)


def soft_los_mix(los_value, nlos_value, p_los):
    """Probability-weighted blend of LoS and NLoS quantities (dB domain)."""
    p = np.asarray(p_los, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("p_los must lie in [0, 1]")
    return p * np.asarray(los_value) + (1.0 - p) * np.asarray(nlos_value)


@dataclass
class LinkState:
    """Shadowing state of one (UE, site) link."""

    shadow_los: float
    shadow_nlos: float
    anchor: tuple[float, float]
    sigma_los: float = 4.0
    sigma_nlos: float = 7.82
    d_corr: float = 13.0


def update_shadow(link: LinkState, new_pos, rng: np.random.Generator) -> LinkState:
    """Evolve both shadow terms with correlation ``exp(-dd / d_corr)``."""
    dd = math.dist(link.anchor, tuple(new_pos))
    rho = math.exp(-dd / link.d_corr)
    innov = math.sqrt(max(0.0, 1.0 - rho * rho))
    z = rng.standard_normal(2)
    return LinkState(
        rho * link.shadow_los + innov * link.sigma_los * z[0],
        rho * link.shadow_nlos + innov * link.sigma_nlos * z[1],
        (float(new_pos[0]), float(new_pos[1])),
        link.sigma_los,
        link.sigma_nlos,
        link.d_corr,
    )


class SumOfSinusoids:
    """Rician sum-of-sinusoids fading for a batch of independent links.

    Each link carries one specular ray (power fraction ``k_frac``) and
    ``n_rays`` diffuse rays of equal power.  Ray ``n`` has a random phase and
    arrival angle and rotates at ``doppler_hz * cos(angle)``.  Without
    receive weights the linear power gain is unit-mean.

    Parameters
    ----------
    shape : tuple
        Batch shape of independent links.
    n_rays : int
        Diffuse rays per link.
    doppler_hz : float
        Maximum Doppler shift.
    rng : numpy.random.Generator
    k_frac : float or array
        Specular power fraction in ``[0, 1)``, broadcast against ``shape``.
    """

    def __init__(self, shape, n_rays, doppler_hz, rng, k_frac=0.0):
        self.shape = tuple(shape)
        self.n_rays = int(n_rays)
        self.doppler_hz = float(doppler_hz)
        self.phase = rng.uniform(0.0, 2.0 * np.pi, size=self.shape + (self.n_rays + 1,))
        self.cos_aoa = np.cos(rng.uniform(0.0, 2.0 * np.pi, size=self.shape + (self.n_rays + 1,)))
        self.k_frac = np.broadcast_to(np.asarray(k_frac, dtype=float), self.shape)

    def amplitudes(self):
        a_los = np.sqrt(self.k_frac)[..., None]
        a_dif = np.sqrt((1.0 - self.k_frac) / self.n_rays)[..., None]
        return np.concatenate([a_los, np.broadcast_to(a_dif, self.shape + (self.n_rays,))], axis=-1)

    def coefficients(self, t: float):
        arg = self.phase + 2.0 * np.pi * self.doppler_hz * t * self.cos_aoa
        return self.amplitudes() * np.exp(1j * arg)

    def power(self, t: float):
        """Linear power gain at time ``t`` (seconds)."""
        return np.abs(self.coefficients(t).sum(-1)) ** 2


def fast_fading_sample(process: SumOfSinusoids, t: float, enabled: bool = True):
    """Fading contribution in dB for every link of ``process`` at time ``t``."""
    if not enabled:
        return np.zeros(process.shape)
    return 10.0 * np.log10(np.maximum(process.power(t), 1e-30))


def raw_rsrp(tx_power_dbm, tx_gain_db, path_loss_db, shadow_db, rx_gain_db, fading_db=0.0):
    """Raw RSRP in dBm from its additive chain terms."""
    return tx_power_dbm + tx_gain_db - path_loss_db - shadow_db + rx_gain_db + fading_db


@dataclass
class ChannelConfig:
    fc_ghz: float = 28.0
    tx_power_dbm: float = 40.0
    sigma_los: float = 4.0
    sigma_nlos: float = 7.82
    shadow_d_corr: float = 13.0
    fading: bool = True
    n_rays: int = 20
    angular_spread_deg: float = 35.0
    rician_k_db: float = 9.0
    measurement_error_db: float = 0.0


@dataclass
class ChannelSnapshot:
    """Per-step channel products for all UEs.

    ``rsrp`` has shape ``(U, C, B, Q)``: UE, cell, Tx beam, receive config.
    """

    t_ms: int
    rsrp: np.ndarray
    path_loss: np.ndarray = field(repr=False)  # (U, S) soft-LoS blend
    shadow: np.ndarray = field(repr=False)  # (U, S)
    tx_gain: np.ndarray = field(repr=False)  # (U, C, B)
    rx_gain: np.ndarray = field(repr=False)  # (U, S, Q) towards the LoS direction
    image: np.ndarray = field(repr=False)  # (U, S) winning wrap image


class ChannelModel:
    """Vectorised channel for every (UE, cell, Tx beam, Rx config) link.

    Shadowing lives per (UE, site) and is shared by a site's three cells.
    Fast fading lives per (UE, cell, Tx beam); diffuse ray angles are drawn
    per (UE, cell) around the line-of-sight arrival and shared by that cell's
    beams.  All random draws come from the generators passed in, so the
    realisation depends only on the seed and the UE trajectories.
    """

    def __init__(
        self,
        layout: NetworkLayout,
        tx_grid: TxBeamGrid,
        panels: MpuePanelSet,
        cfg: ChannelConfig,
        positions: np.ndarray,
        headings: np.ndarray,
        speed: float,
        shadow_rng: np.random.Generator,
        fading_rng: np.random.Generator,
        meas_rng: np.random.Generator | None = None,
    ):
        self.layout = layout
        self.tx_grid = tx_grid
        self.panels = panels
        self.cfg = cfg
        self.shadow_rng = shadow_rng
        self.meas_rng = meas_rng
        n_ue = len(positions)
        self.n_ue = n_ue
        self.cell_site = layout.cell_site
        self.cell_az = layout.cell_azimuth
        self.headings_deg = np.degrees(np.asarray(headings, dtype=float))

        s = layout.n_sites
        self.shadow_los = cfg.sigma_los * shadow_rng.standard_normal((n_ue, s))
        self.shadow_nlos = cfg.sigma_nlos * shadow_rng.standard_normal((n_ue, s))
        self._last_pos = np.array(positions, dtype=float)

        wavelength = SPEED_OF_LIGHT / (cfg.fc_ghz * 1e9)
        self.doppler_hz = speed / wavelength
        c, b = layout.n_cells, tx_grid.n_beams
        n = cfg.n_rays
        self.ray_phase = np.exp(1j * fading_rng.uniform(0.0, 2 * np.pi, size=(n_ue, c, b, n + 1)))
        self.ray_offset = fading_rng.normal(0.0, cfg.angular_spread_deg, size=(n_ue, c, n))

        # Rx gain lookup over UE-frame azimuth at the horizon, for diffuse rays.
        self._az_step = 0.5
        grid = np.arange(-180.0, 180.0, self._az_step)
        self._rx_table_lin = 10.0 ** (panels.gain_all(90.0, grid) / 10.0)  # (A, Q)

    def _geometry(self, positions):
        offs, img = nearest_images(self.layout, positions)  # UE - site image
        d2d = np.maximum(np.linalg.norm(offs, axis=-1), 1e-3)
        dh = self.layout.bs_height - self.layout.ue_height
        d3d = np.hypot(d2d, dh)
        az_bs_to_ue = np.degrees(np.arctan2(offs[..., 1], offs[..., 0]))  # (U, S)
        return d2d, d3d, az_bs_to_ue, img

    def _update_shadow(self, positions):
        dd = np.linalg.norm(positions - self._last_pos, axis=-1)[:, None]
        rho = np.exp(-dd / self.cfg.shadow_d_corr)
        innov = np.sqrt(np.maximum(0.0, 1.0 - rho * rho))
        shape = self.shadow_los.shape
        z1 = self.shadow_rng.standard_normal(shape)
        z2 = self.shadow_rng.standard_normal(shape)
        self.shadow_los = rho * self.shadow_los + innov * self.cfg.sigma_los * z1
        self.shadow_nlos = rho * self.shadow_nlos + innov * self.cfg.sigma_nlos * z2
        self._last_pos = np.array(positions, dtype=float)

    def step(self, positions: np.ndarray, t_ms: int) -> ChannelSnapshot:
        cfg = self.cfg
        positions = np.asarray(positions, dtype=float)
        if t_ms > 0:
            self._update_shadow(positions)
        d2d, d3d, az_site, img = self._geometry(positions)
        dh = self.layout.bs_height - self.layout.ue_height
        elev = np.degrees(np.arctan2(dh, d2d))  # depression seen from the BS

        p_los = los_probability(d2d)
        pl = soft_los_mix(
            path_loss_umi(d3d, cfg.fc_ghz, True, self.layout.bs_height, self.layout.ue_height),
            path_loss_umi(d3d, cfg.fc_ghz, False, self.layout.bs_height, self.layout.ue_height),
            p_los,
        )
        sf = soft_los_mix(self.shadow_los, self.shadow_nlos, p_los)

        site = self.cell_site
        tx_theta = 90.0 + elev[:, site]  # (U, C)
        tx_phi = wrap_deg(az_site[:, site] - self.cell_az[None, :])
        g_tx = self.tx_grid.gain_all(tx_theta, tx_phi)  # (U, C, B)

        rx_theta = 90.0 - elev  # (U, S)
        rx_phi = wrap_deg(az_site + 180.0 - self.headings_deg[:, None])
        g_rx = self.panels.gain_all(rx_theta, rx_phi)  # (U, S, Q)

        large = cfg.tx_power_dbm + g_tx - (pl + sf)[:, site][..., None]  # (U, C, B)
        if cfg.fading:
            rx_term = self._faded_rx_gain(rx_phi, p_los, g_rx, t_ms / 1000.0)  # (U, C, B, Q)
        else:
            rx_term = g_rx[:, site][:, :, None, :]
        rsrp = large[..., None] + rx_term
        if cfg.measurement_error_db > 0 and self.meas_rng is not None:
            rsrp = rsrp + cfg.measurement_error_db * self.meas_rng.standard_normal(rsrp.shape)
        return ChannelSnapshot(t_ms, rsrp, pl, sf, g_tx, g_rx, img)

    def _faded_rx_gain(self, rx_phi, p_los, g_rx, t_s):
        """Receive gain including multipath: ``10 log10 |sum_n a_n sqrt(g_q(aoa_n))|^2``."""
        cfg = self.cfg
        site = self.cell_site
        k_lin = 10.0 ** (cfg.rician_k_db / 10.0)
        k_frac = p_los[:, site] * k_lin / (k_lin + 1.0)  # (U, C)
        los_az = rx_phi[:, site]  # (U, C)
        ray_az = wrap_deg(los_az[..., None] + self.ray_offset)  # (U, C, N)
        aoa = np.concatenate([los_az[..., None], ray_az], axis=-1)  # (U, C, N+1)

        idx = np.round((ray_az + 180.0) / self._az_step).astype(int) % self._rx_table_lin.shape[0]
        w_dif = np.sqrt(self._rx_table_lin[idx])  # (U, C, N, Q)
        w_los = np.sqrt(10.0 ** (g_rx[:, site] / 10.0))[:, :, None, :]  # (U, C, 1, Q)
        amp_dif = np.sqrt((1.0 - k_frac) / cfg.n_rays)[..., None, None]
        amp_los = np.sqrt(k_frac)[..., None, None]
        w = np.concatenate([amp_los * w_los, amp_dif * w_dif], axis=2)  # (U, C, N+1, Q)

        rot = np.exp(1j * (2.0 * np.pi * self.doppler_hz * t_s) * np.cos(np.radians(aoa)))
        a = self.ray_phase * rot[:, :, None, :]  # (U, C, B, N+1)
        h = np.matmul(a.astype(np.complex64), w.astype(np.complex64))  # (U, C, B, Q)
        power = h.real.astype(np.float64) ** 2 + h.imag.astype(np.float64) ** 2
        return 10.0 * np.log10(np.maximum(power, 1e-30))
