import math

import numpy as np
import pytest

from mpuesim import channel as ch
from mpuesim.antenna import MpuePanelSet, build_tx_grid
from mpuesim.channel import (
    ChannelConfig,
    ChannelModel,
    LinkState,
    SumOfSinusoids,
    fast_fading_sample,
    los_probability,
    path_loss_umi,
    raw_rsrp,
    soft_los_mix,
    update_shadow,
)
from mpuesim.scenario import KMH, build_layout, drop_ues


def umi_reference(d3d, fc, los, h_bs=10.0, h_ut=1.5):
    """Second implementation of the UMi street-canyon formulas."""
    c = 3.0e8
    hb, hu = h_bs - 1.0, h_ut - 1.0
    d_bp = 4 * hb * hu * fc * 1e9 / c
    if d3d <= d_bp:
        los_pl = 32.4 + 21 * math.log10(d3d) + 20 * math.log10(fc)
    else:
        los_pl = 32.4 + 40 * math.log10(d3d) + 20 * math.log10(fc) - 9.5 * math.log10(d_bp**2 + (h_bs - h_ut) ** 2)
    if los:
        return los_pl
    nlos = 35.3 * math.log10(d3d) + 22.4 + 21.3 * math.log10(fc) - 0.3 * (h_ut - 1.5)
    return max(los_pl, nlos)


def test_umi_los_50m_second_implementation():
    assert float(path_loss_umi(50.0, 28.0, True)) == pytest.approx(umi_reference(50.0, 28.0, True), abs=0.01)


@pytest.mark.parametrize("d", [5.0, 20.0, 77.0, 150.0, 300.0, 900.0, 3000.0])
@pytest.mark.parametrize("los", [True, False])
def test_umi_matches_reference_over_range(d, los):
    assert float(path_loss_umi(d, 28.0, los)) == pytest.approx(umi_reference(d, 28.0, los), abs=0.01)


def test_los_doubling_adds_exponent_term():
    assert float(path_loss_umi(80.0) - path_loss_umi(40.0)) == pytest.approx(21.0 * math.log10(2.0))


def test_path_loss_ordering_and_monotone():
    d = np.linspace(1.0, 2000.0, 4000)
    los, nlos = path_loss_umi(d, los=True), path_loss_umi(d, los=False)
    assert np.all(np.diff(los) >= 0) and np.all(np.diff(nlos) >= 0)
    assert np.all(nlos >= los)
    assert path_loss_umi(100.0, los=False) >= path_loss_umi(100.0, los=True)


def test_sub_metre_distance_clamped_and_counted():
    before = ch.diagnostics["path_loss_clamped"]
    assert float(path_loss_umi(0.2)) == float(path_loss_umi(1.0))
    assert ch.diagnostics["path_loss_clamped"] == before + 1


def test_los_probability_bounds_and_monotone():
    d = np.linspace(0.0, 1000.0, 5000)
    p = los_probability(d)
    assert np.all((p >= 0) & (p <= 1))
    assert np.all(np.diff(p) <= 1e-15)
    assert los_probability(10.0) == 1.0


def test_soft_los_mix():
    assert soft_los_mix(60.0, 80.0, 1.0) == 60.0
    assert soft_los_mix(60.0, 80.0, 0.0) == 80.0
    assert soft_los_mix(60.0, 80.0, 0.5) == 70.0
    with pytest.raises(ValueError):
        soft_los_mix(60.0, 80.0, 1.2)


def test_soft_los_bounded():
    rng = np.random.default_rng(0)
    a, b, p = rng.normal(size=100), rng.normal(size=100), rng.uniform(size=100)
    m = soft_los_mix(a, b, p)
    assert np.all(m >= np.minimum(a, b) - 1e-12) and np.all(m <= np.maximum(a, b) + 1e-12)


def test_shadow_zero_step_unchanged():
    link = LinkState(3.0, -2.0, (0.0, 0.0))
    nxt = update_shadow(link, (0.0, 0.0), np.random.default_rng(0))
    assert (nxt.shadow_los, nxt.shadow_nlos) == (3.0, -2.0)


def test_shadow_decorrelates_at_large_distance():
    rng = np.random.default_rng(1)
    prev, new = [], []
    for _ in range(10000):
        s0 = rng.normal(0, 4.0)
        link = LinkState(s0, 0.0, (0.0, 0.0))
        prev.append(s0)
        new.append(update_shadow(link, (1e4, 0.0), rng).shadow_los)
    assert abs(np.corrcoef(prev, new)[0, 1]) < 0.03


def test_shadow_stationary_std():
    # ensemble of links walked 1 m per step keeps the configured sigma
    rng = np.random.default_rng(2)
    links = [LinkState(rng.normal(0, 4.0), rng.normal(0, 7.82), (0.0, 0.0)) for _ in range(4000)]
    for k in range(1, 40):
        links = [update_shadow(l, (float(k), 0.0), rng) for l in links]
    assert np.std([l.shadow_los for l in links]) == pytest.approx(4.0, rel=0.05)
    assert np.std([l.shadow_nlos for l in links]) == pytest.approx(7.82, rel=0.05)
    assert abs(np.mean([l.shadow_los for l in links])) < 0.3


def test_shadow_correlation_matches_exponential():
    rng = np.random.default_rng(3)
    s0 = rng.normal(0, 4.0, 20000)
    s1 = np.array([update_shadow(LinkState(v, 0.0, (0.0, 0.0)), (13.0, 0.0), rng).shadow_los for v in s0])
    assert np.corrcoef(s0, s1)[0, 1] == pytest.approx(math.exp(-1.0), abs=0.02)


def test_fading_unit_mean_power():
    proc = SumOfSinusoids((100000,), 20, 1556.0, np.random.default_rng(4))
    assert proc.power(0.0).mean() == pytest.approx(1.0, rel=0.02)
    rice = SumOfSinusoids((100000,), 20, 1556.0, np.random.default_rng(5), k_frac=0.8)
    assert rice.power(0.013).mean() == pytest.approx(1.0, rel=0.02)


def test_fading_autocorrelation_decays():
    fd = 1556.0
    proc = SumOfSinusoids((20000,), 20, fd, np.random.default_rng(6))
    p0 = proc.power(0.0)
    p_half = proc.power(1.0 / (2.0 * fd))
    c0 = np.mean((p0 - p0.mean()) ** 2)
    c1 = np.mean((p0 - p0.mean()) * (p_half - p_half.mean()))
    assert c1 < c0


def test_fading_disabled_is_zero():
    proc = SumOfSinusoids((7,), 20, 100.0, np.random.default_rng(0))
    np.testing.assert_array_equal(fast_fading_sample(proc, 0.5, enabled=False), 0.0)
    assert fast_fading_sample(proc, 0.5).shape == (7,)


def test_raw_rsrp_chain():
    assert raw_rsrp(40.0, 0.0, 100.0, 0.0, 0.0) == -60.0
    base = raw_rsrp(40.0, 12.0, 95.0, 3.0, 5.0, -1.0)
    assert raw_rsrp(40.0, 12.0, 95.0, 3.0, 8.0, -1.0) - base == pytest.approx(3.0)
    assert raw_rsrp(40.0, 12.0, 95.0, 5.0, 5.0, -1.0) - base == pytest.approx(-2.0)


def _model(seed, n_ue=6, fading=True):
    layout = build_layout()
    ues = drop_ues(layout, n_ue, np.random.default_rng(seed))
    pos = np.array([u.position for u in ues])
    head = np.array([u.heading for u in ues])
    cfg = ChannelConfig(fading=fading)
    m = ChannelModel(layout, build_tx_grid(), MpuePanelSet(), cfg, pos, head, 60 * KMH,
                     np.random.default_rng(seed + 100), np.random.default_rng(seed + 200))
    return m, layout, pos, head


def test_model_without_fading_is_additive_chain():
    m, layout, pos, _ = _model(1, fading=False)
    snap = m.step(pos, 0)
    site = layout.cell_site
    expect = (40.0 + snap.tx_gain - (snap.path_loss + snap.shadow)[:, site][..., None])[..., None] \
        + snap.rx_gain[:, site][:, :, None, :]
    np.testing.assert_allclose(snap.rsrp, expect)
    assert snap.rsrp.shape == (6, 21, 12, 24)


def test_model_uses_nearest_wrap_image():
    m, layout, pos, _ = _model(2, fading=False)
    snap = m.step(pos, 0)
    dh = layout.bs_height - layout.ue_height
    for u in range(len(pos)):
        for s in range(layout.n_sites):
            d2 = [np.linalg.norm(pos[u] - layout.site_positions[s] - w) for w in layout.wrap_images]
            d2d = min(d2)
            d3d = math.hypot(d2d, dh)
            p = float(los_probability(d2d))
            pl = p * umi_reference(d3d, 28.0, True) + (1 - p) * umi_reference(d3d, 28.0, False)
            assert snap.path_loss[u, s] == pytest.approx(pl, abs=0.01)
            assert snap.image[u, s] == int(np.argmin(d2))


def test_model_deterministic():
    a, _, pos, _ = _model(3)
    b, _, _, _ = _model(3)
    for t in (0, 10, 20):
        np.testing.assert_array_equal(a.step(pos, t).rsrp, b.step(pos, t).rsrp)


def test_faded_best_wide_panel_keeps_large_scale_level():
    # the three wide panels jointly cover all arrival angles, so the strongest one
    # sees unit-mean multipath power relative to the unfaded chain
    m, layout, pos, _ = _model(4, n_ue=40)
    ref, _, _, _ = _model(4, n_ue=40, fading=False)
    ratios = []
    for t in range(0, 400, 10):
        faded = (10 ** (m.step(pos, t).rsrp[..., :3] / 10)).max(-1)
        flat = (10 ** (ref.step(pos, t).rsrp[..., :3] / 10)).max(-1)
        ratios.append(np.mean(faded / flat))
    assert np.mean(ratios) == pytest.approx(1.0, abs=0.1)


def test_refined_beam_fluctuates_less_than_wide():
    m, layout, pos, _ = _model(5, n_ue=20)
    series = np.array([m.step(pos, t).rsrp for t in range(0, 1000, 20)])  # (T, U, C, B, Q)
    # strongest-cell link of each UE, best wide vs best refined config
    mean = series.mean(0)
    u = np.arange(20)
    c = np.argmax(mean.max(axis=(2, 3)), axis=1)
    b = np.argmax(mean[u, c].max(-1), axis=1)
    link = series[:, u, c, b]  # (T, U, Q)
    q_wide = np.argmax(link.mean(0)[:, :3], axis=1)
    q_ref = 3 + np.argmax(link.mean(0)[:, 3:], axis=1)
    std_wide = link[:, u, q_wide].std(0)
    std_ref = link[:, u, q_ref].std(0)
    assert np.median(std_ref) < np.median(std_wide)
