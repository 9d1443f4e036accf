import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mpuesim.sinr import (
    BatchRlm,
    RlmState,
    batch_sinr,
    db2lin,
    expected_interference_mw,
    link_sinr,
    lin2db,
    monte_carlo_interference_mw,
    noise_power_dbm,
    update_rlm,
)


def test_noise_floor():
    assert noise_power_dbm(100e6, 10.0) == pytest.approx(-84.0)


def test_no_interferer_zero_db():
    r = np.array([[-90.0, -200.0]])
    s = link_sinr(r, 0, 0, -90.0)
    assert s.sinr_db == pytest.approx(0.0)
    assert s.interference_dbm == -np.inf


def test_interferer_decreases_sinr():
    one = np.full((1, 12), -95.0)
    two = np.vstack([one, np.full((1, 12), -100.0)])
    assert link_sinr(two, 0, 3, -84.0).sinr_db < link_sinr(one, 0, 3, -84.0).sinr_db


def test_linear_identity():
    rng = np.random.default_rng(0)
    r = rng.uniform(-120, -70, size=(21, 12))
    s = link_sinr(r, 4, 7, -84.0)
    lin = db2lin(s.signal_dbm) / (db2lin(s.noise_dbm) + db2lin(s.interference_dbm))
    assert db2lin(s.sinr_db) == pytest.approx(lin, rel=1e-9)
    # brute-force interference sum
    i_mw = sum(4 / 12 * db2lin(r[c]).sum() for c in range(21) if c != 4)
    assert db2lin(s.interference_dbm) == pytest.approx(i_mw, rel=1e-12)


def test_expectation_matches_monte_carlo():
    rng = np.random.default_rng(1)
    r = rng.uniform(-120, -70, size=(8, 12))
    exp = link_sinr(r, 0, 0, -84.0).sinr_db
    mc = link_sinr(r, 0, 0, -84.0, mode="monte_carlo", n_draws=100000, rng=np.random.default_rng(2)).sinr_db
    assert mc == pytest.approx(exp, abs=0.1)


def test_monte_carlo_schedules_exactly_k_beams():
    p = np.zeros(12)
    p[:] = -200.0
    p[0] = 0.0  # 1 mW on beam 0 only
    draws = monte_carlo_interference_mw(p, 4, 60000, np.random.default_rng(3))
    assert draws == pytest.approx(4 / 12, rel=0.02)
    assert expected_interference_mw(p, 4) == pytest.approx(4 / 12)


def test_link_sinr_errors():
    r = np.full((2, 12), -90.0)
    with pytest.raises(ValueError):
        link_sinr(r, 0, 0, -84.0, mode="monte_carlo")
    with pytest.raises(ValueError):
        link_sinr(r, 0, 0, -84.0, mode="bogus")


def test_batch_matches_scalar():
    rng = np.random.default_rng(4)
    r = rng.uniform(-120, -70, size=(30, 21, 12))
    cell, beam = rng.integers(0, 21, 30), rng.integers(0, 12, 30)
    got = batch_sinr(r, cell, beam, -84.0, 4)
    for u in range(30):
        assert got[u] == pytest.approx(link_sinr(r[u], cell[u], beam[u], -84.0).sinr_db, abs=1e-9)


def test_scale_invariance_with_negligible_noise():
    rng = np.random.default_rng(5)
    r = rng.uniform(-80, -60, size=(21, 12))
    a = link_sinr(r, 2, 1, -200.0).sinr_db
    b = link_sinr(r + 17.0, 2, 1, -200.0).sinr_db
    assert a == pytest.approx(b, abs=1e-6)


def test_rx_gain_on_signal_only_never_hurts():
    # single interferer geometry: the serving path gains g, the interferer gains <= g
    for g in (0.0, 3.0, 6.0):
        for gi in (g - 10.0, g - 3.0, g):
            base = np.array([np.full(12, -90.0), np.full(12, -95.0)])
            bf = base.copy()
            bf[0] += g
            bf[1] += gi
            assert link_sinr(bf, 0, 0, -84.0).sinr_db >= link_sinr(base, 0, 0, -84.0).sinr_db - 1e-12


def test_db_helpers_round_trip():
    x = np.array([-120.0, -3.0, 0.0, 17.5])
    np.testing.assert_allclose(lin2db(db2lin(x)), x)


def test_rlm_examples():
    r = RlmState(4)
    for _ in range(6):
        update_rlm(r, -3.0)
    assert r.value == -3.0
    r1 = RlmState(1)
    for v in (1.0, -7.0, 4.0):
        update_rlm(r1, v)
        assert r1.value == v
    with pytest.raises(ValueError):
        RlmState(0)
    assert np.isnan(RlmState().value)


@given(st.lists(st.floats(-30, 30), min_size=1, max_size=30), st.integers(1, 6))
def test_rlm_windowed_mean(series, w):
    r = RlmState(w)
    for i, v in enumerate(series):
        update_rlm(r, v)
        window = series[max(0, i - w + 1): i + 1]
        assert r.value == pytest.approx(sum(window) / len(window))


def test_batch_rlm_matches_scalar_with_masks_and_resets():
    rng = np.random.default_rng(6)
    batch = BatchRlm(5, 4)
    scalars = [RlmState(4) for _ in range(5)]
    for step in range(40):
        x = rng.normal(0, 5, 5)
        mask = rng.uniform(size=5) > 0.2
        if step == 20:
            batch.reset(np.array([2]))
            scalars[2] = RlmState(4)
        for u in range(5):
            if mask[u]:
                update_rlm(scalars[u], x[u])
        out = batch.update(x, mask)
        for u in range(5):
            if scalars[u].samples:
                assert out[u] == pytest.approx(scalars[u].value)
