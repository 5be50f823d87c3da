import numpy as np
import pytest

from yamabe_blowup.fitting import log_correction_test, loglog_fit


def test_exact_power_law():
    x = np.geomspace(1e-6, 1e-2, 9)
    fit = loglog_fit(x, 3.0 * x ** 0.75)
    assert fit.slope == pytest.approx(0.75, abs=1e-12)
    assert fit.intercept == pytest.approx(np.log(3.0), abs=1e-10)


def test_log_correction_detected_only_when_present():
    x = np.geomspace(1e-8, 1e-2, 9)
    rng = np.random.default_rng(0)
    noise = np.exp(1e-3 * rng.standard_normal(9))
    with_log = log_correction_test(x, x ** 0.75 * np.abs(np.log(x)) * noise)
    assert with_log.significant()
    assert with_log.corrected_slope == pytest.approx(0.75, abs=0.02)
    assert with_log.log_power == pytest.approx(1.0, abs=0.1)
    without = log_correction_test(x, x ** 0.75 * noise)
    assert not without.significant()


def test_confidence_interval_contains_truth():
    x = np.geomspace(1e-6, 1e-2, 20)
    rng = np.random.default_rng(1)
    y = x ** 0.5 * np.exp(0.01 * rng.standard_normal(20))
    lo, hi = loglog_fit(x, y).ci()
    assert lo < 0.5 < hi
