import json
import math

import numpy as np
import pytest

from mrb.calibration import (CalibrationModel, NIGMaps, fit_exponential,
                             fit_linear, mean_epistemic_per_slice, nig_moments,
                             predict_quality, read_points_csv)
from mrb.errors import DegenerateInput, DomainError
from mrb.quality import write_batch_csv


def _maps(g, v, a, b, shape=(4, 4, 2)):
    full = lambda c: np.full(shape, c, dtype=np.float64)
    return NIGMaps(full(g), full(v), full(a), full(b))


def test_nig_moments_substitution():
    pred, alea, epis = nig_moments(_maps(0.5, 1.0, 2.0, 0.3))
    assert pred.flat[0] == 0.5
    assert alea.flat[0] == pytest.approx(0.3)
    assert epis.flat[0] == pytest.approx(0.3)


def test_nig_moments_second_case():
    _p, alea, epis = nig_moments(_maps(0.0, 2.0, 11.0, 1.0))
    assert alea.flat[0] == pytest.approx(0.1)
    assert epis.flat[0] == pytest.approx(0.05)


def test_epistemic_is_aleatoric_over_v():
    rng = np.random.default_rng(0)
    m = NIGMaps(rng.random((4, 4, 3)), rng.random((4, 4, 3)) + 0.5,
                rng.random((4, 4, 3)) + 1.5, rng.random((4, 4, 3)) + 0.5)
    _p, alea, epis = nig_moments(m)
    np.testing.assert_allclose(epis, alea / m.v, rtol=1e-12)


def test_epistemic_leq_aleatoric_when_v_geq_1():
    rng = np.random.default_rng(1)
    m = NIGMaps(rng.random((4, 4, 3)), rng.random((4, 4, 3)) + 1.0,
                rng.random((4, 4, 3)) + 1.5, rng.random((4, 4, 3)) + 0.5)
    _p, alea, epis = nig_moments(m)
    assert np.all(epis <= alea)


def test_nig_maps_domain_validation():
    full = lambda c: np.full((2, 2, 2), c)
    with pytest.raises(DomainError):
        NIGMaps(full(0.5), full(0.0), full(2.0), full(1.0))
    with pytest.raises(DomainError):
        NIGMaps(full(0.5), full(1.0), full(1.0), full(1.0))


def test_mean_epistemic_per_slice():
    e = np.full((4, 4, 3), 0.2)
    means = mean_epistemic_per_slice(e)
    assert means == [(0, pytest.approx(0.2)), (1, pytest.approx(0.2)),
                     (2, pytest.approx(0.2))]
    e2 = e.copy()
    e2[:, :, 1] *= 2
    means2 = mean_epistemic_per_slice(e2)
    assert means2[1][1] == pytest.approx(0.4)
    assert means2[0][1] == pytest.approx(0.2)


def test_mean_epistemic_bruteforce_oracle():
    rng = np.random.default_rng(2)
    e = rng.random((8, 8, 5))
    means = mean_epistemic_per_slice(e)
    for s, m in means:
        acc = 0.0
        for i in range(8):
            for j in range(8):
                acc += e[i, j, s]
        assert m == pytest.approx(acc / 64, abs=1e-12)


# ---------------------------------------------------------------------------
# Linear fit
# ---------------------------------------------------------------------------

def test_fit_linear_noiseless():
    u = np.arange(10, dtype=float)
    y = 2 * u + 1
    m = fit_linear(u, y)
    assert m.params[0] == pytest.approx(2.0, abs=1e-12)
    assert m.params[1] == pytest.approx(1.0, abs=1e-12)
    assert m.r_squared == pytest.approx(1.0)
    assert m.residual_std == pytest.approx(0.0, abs=1e-12)


def test_fit_linear_degenerate():
    with pytest.raises(DegenerateInput):
        fit_linear([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])
    with pytest.raises(DegenerateInput):
        fit_linear([1.0, 2.0], [1.0, 2.0])


def test_fit_linear_monte_carlo_recovery_and_coverage():
    # oracle: Monte-Carlo with fixed seed; recovery within 3 SEs,
    # empirical PI coverage 95% +/- 3% on 1000 fresh points
    rng = np.random.default_rng(123)
    a, b, sigma = -3.0, 0.95, 0.01
    u = rng.uniform(0.0, 0.1, size=500)
    y = a * u + b + rng.normal(scale=sigma, size=500)
    m = fit_linear(u, y)
    sxx = np.sum((u - u.mean()) ** 2)
    se_slope = sigma / math.sqrt(sxx)
    se_inter = sigma * math.sqrt(1 / 500 + u.mean() ** 2 / sxx)
    assert abs(m.params[0] - a) < 3 * se_slope
    assert abs(m.params[1] - b) < 3 * se_inter
    u2 = rng.uniform(0.0, 0.1, size=1000)
    y2 = a * u2 + b + rng.normal(scale=sigma, size=1000)
    inside = sum(lo <= yi <= hi
                 for ui, yi in zip(u2, y2)
                 for _e, lo, hi in [predict_quality(float(ui), m)])
    assert 0.92 <= inside / 1000 <= 0.98


def test_fit_linear_scale_consistency():
    rng = np.random.default_rng(3)
    u = rng.random(50)
    y = 2 * u + 1 + rng.normal(scale=0.1, size=50)
    m1 = fit_linear(u, y)
    m2 = fit_linear(u * 10, y)
    assert m2.params[0] == pytest.approx(m1.params[0] / 10, rel=1e-9)
    assert m2.r_squared == pytest.approx(m1.r_squared, abs=1e-9)


# ---------------------------------------------------------------------------
# Exponential fit
# ---------------------------------------------------------------------------

def test_fit_exponential_noiseless_recovery():
    u = np.linspace(0, 2, 20)
    y = 40 * np.exp(-2 * u) + 20
    m = fit_exponential(u, y)
    assert m.params[0] == pytest.approx(40, abs=1e-6)
    assert m.params[1] == pytest.approx(-2, abs=1e-6)
    assert m.params[2] == pytest.approx(20, abs=1e-6)
    assert m.r_squared == pytest.approx(1.0)


def test_fit_exponential_noisy_coverage():
    rng = np.random.default_rng(77)
    u = rng.uniform(0, 2, size=500)
    y = 40 * np.exp(-2 * u) + 20 + rng.normal(scale=0.5, size=500)
    m = fit_exponential(u, y)
    assert m.r_squared > 0.8
    u2 = rng.uniform(0, 2, size=1000)
    y2 = 40 * np.exp(-2 * u2) + 20 + rng.normal(scale=0.5, size=1000)
    inside = sum(lo <= yi <= hi
                 for ui, yi in zip(u2, y2)
                 for _e, lo, hi in [predict_quality(float(ui), m)])
    assert 0.92 <= inside / 1000 <= 0.98


def test_fit_exponential_increasing_data_reinit():
    # oracle: grid of initializations; the accepted fit must match the best
    u = np.linspace(0, 1, 30)
    y = 5 * np.exp(1.5 * u) + 2
    m = fit_exponential(u, y)
    resid = np.sqrt(np.mean((m.params[0] * np.exp(m.params[1] * u)
                             + m.params[2] - y) ** 2))
    best = np.inf
    from scipy.optimize import least_squares
    for p0 in [(1, 1, 0), (1, -1, 0), (5, 1.5, 2), (-1, 1, 10)]:
        try:
            r = least_squares(lambda th: th[0] * np.exp(th[1] * u) + th[2] - y, p0)
            best = min(best, np.sqrt(np.mean(r.fun ** 2)))
        except Exception:
            pass
    assert resid <= best + 1e-6


def test_fit_exponential_degenerate():
    with pytest.raises(DegenerateInput):
        fit_exponential([1, 2, 3], [1, 2, 3])


# ---------------------------------------------------------------------------
# Prediction
# ---------------------------------------------------------------------------

def test_predict_noiseless_zero_width():
    u = np.arange(10, dtype=float)
    m = fit_linear(u, 2 * u + 1)
    est, lo, hi = predict_quality(float(u.mean()), m)
    assert est == lo == hi


def test_predict_leverage_widens():
    rng = np.random.default_rng(4)
    u = rng.random(50)
    y = 2 * u + 1 + rng.normal(scale=0.1, size=50)
    m = fit_linear(u, y)
    _e, lo0, hi0 = predict_quality(float(u.mean()), m)
    _e, lo1, hi1 = predict_quality(float(u.mean() + 10), m)
    assert (hi1 - lo1) > (hi0 - lo0)


def test_model_json_roundtrip(tmp_path):
    u = np.arange(10, dtype=float)
    m = fit_linear(u, 2 * u + 1)
    m.save(tmp_path / "m.json")
    m2 = CalibrationModel.load(tmp_path / "m.json")
    assert m2 == m


def test_read_points_csv_join(tmp_path):
    write_batch_csv([("v1", 0, 0.9, 30.0), ("v1", 1, 0.8, 25.0),
                     ("v2", 0, 0.7, math.inf)], tmp_path / "q.csv")
    (tmp_path / "e.csv").write_text(
        "volume_id,slice,mean_epistemic\nv1,0,0.1\nv1,1,0.2\nv2,0,0.3\nv9,0,0.4\n")
    u, y = read_points_csv(tmp_path / "q.csv", tmp_path / "e.csv", "ssim")
    assert u == [0.1, 0.2, 0.3]
    assert y == [0.9, 0.8, 0.7]
    u2, y2 = read_points_csv(tmp_path / "q.csv", tmp_path / "e.csv", "psnr")
    assert u2 == [0.1, 0.2]  # inf psnr row dropped
