"""Savitzky-Golay, MSC, airPLS, and pipeline state handling."""

import numpy as np
import pytest

from dppls.core import RngStream
from dppls.errors import (
    ArgumentError,
    ConfigurationError,
    DegenerateInputError,
    ShapeError,
    StateError,
)
from dppls.preprocess import (
    AirPlsConfig,
    AirPlsStep,
    CenterStep,
    MscStep,
    Pipeline,
    SgConfig,
    SgStep,
    airpls_correct,
    msc,
    parse_pipeline,
    savitzky_golay,
    sg_kernel,
)


# ---------------------------------------------------------------------------
# Savitzky-Golay kernels
# ---------------------------------------------------------------------------

def test_sg_kernel_5_2_1_analytic_solution():
    # For window 5, order 2, first derivative, the least-squares solution
    # is the classic [-0.2, -0.1, 0, 0.1, 0.2] ramp.
    kernel = sg_kernel(SgConfig(5, 2, 1))
    np.testing.assert_allclose(kernel, [-0.2, -0.1, 0.0, 0.1, 0.2], atol=1e-12)


def test_sg_smoothing_kernel_sums_to_one():
    for window, order in ((5, 2), (7, 3), (9, 4)):
        k = sg_kernel(SgConfig(window, order, 0))
        assert np.sum(k) == pytest.approx(1.0, abs=1e-12)


def test_sg_derivative_kernel_annihilates_constants():
    for d in (1, 2):
        k = sg_kernel(SgConfig(7, 3, d))
        assert np.sum(k) == pytest.approx(0.0, abs=1e-12)


def test_sg_kernel_offset_validation():
    with pytest.raises(ArgumentError):
        sg_kernel(SgConfig(5, 2, 1), offset=3)


def test_sg_config_validation():
    with pytest.raises(ArgumentError):
        SgConfig(4, 2, 1)
    with pytest.raises(ArgumentError):
        SgConfig(1, 0, 0)
    with pytest.raises(ArgumentError):
        SgConfig(5, 5, 1)
    with pytest.raises(ArgumentError):
        SgConfig(5, 2, 3)


def test_sg_constant_rows_have_zero_derivative():
    X = np.full((3, 20), 7.5)
    out = savitzky_golay(X, SgConfig(5, 2, 1))
    np.testing.assert_allclose(out, 0.0, atol=1e-12)


def test_sg_reproduces_polynomials_everywhere():
    # A fit of the same order as the signal is exact, including at the
    # boundaries where one-sided kernels take over.
    x = np.arange(30, dtype=float)
    row = 2.0 - 3.0 * x + 0.25 * x ** 2
    out0 = savitzky_golay(row[None, :], SgConfig(5, 2, 0))[0]
    out1 = savitzky_golay(row[None, :], SgConfig(5, 2, 1))[0]
    out2 = savitzky_golay(row[None, :], SgConfig(5, 2, 2))[0]
    np.testing.assert_allclose(out0, row, atol=1e-9)
    np.testing.assert_allclose(out1, -3.0 + 0.5 * x, atol=1e-9)
    np.testing.assert_allclose(out2, 0.5, atol=1e-9)


def test_sg_is_linear():
    rng = RngStream(0)
    X = rng.uniform(-1, 1, (4, 25))
    Y = rng.uniform(-1, 1, (4, 25))
    cfg = SgConfig(7, 2, 1)
    lhs = savitzky_golay(2.5 * X - 1.5 * Y, cfg)
    rhs = 2.5 * savitzky_golay(X, cfg) - 1.5 * savitzky_golay(Y, cfg)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_sg_output_keeps_width():
    X = RngStream(1).uniform(-1, 1, (2, 40))
    assert savitzky_golay(X, SgConfig(9, 3, 1)).shape == (2, 40)


def test_sg_rejects_narrow_rows():
    with pytest.raises(ShapeError):
        savitzky_golay(np.zeros((2, 4)), SgConfig(5, 2, 1))


def test_sg_smooths_noise():
    rng = RngStream(2)
    x = np.arange(200, dtype=float)
    clean = np.sin(x / 15.0)
    noisy = clean + 0.1 * (rng.open_unit(200) - 0.5)
    smoothed = savitzky_golay(noisy[None, :], SgConfig(9, 2, 0))[0]
    assert np.std(smoothed - clean) < np.std(noisy - clean)


# ---------------------------------------------------------------------------
# multiplicative scatter correction
# ---------------------------------------------------------------------------

def _reference_spectrum(m=50):
    i = np.arange(m, dtype=float)
    return np.exp(-((i - 25) ** 2) / 60.0) + 0.3


def test_msc_leaves_reference_row_unchanged():
    ref = _reference_spectrum()
    rows = np.vstack([ref, 2.0 * ref + 5.0])
    out = msc(rows, reference=ref)
    np.testing.assert_allclose(out[0], ref, atol=1e-10)


def test_msc_inverts_affine_distortion():
    ref = _reference_spectrum()
    distorted = np.vstack([2.0 * ref + 5.0, 0.5 * ref - 1.0, -3.0 * ref + 2.0])
    out = msc(distorted, reference=ref)
    for row in out:
        np.testing.assert_allclose(row, ref, atol=1e-10)


def test_msc_outputs_have_unit_slope_zero_intercept():
    rng = RngStream(3)
    ref = _reference_spectrum()
    X = np.array([a * ref + b + 0.01 * rng.uniform(-1, 1, ref.size)
                  for a, b in ((1.5, 2.0), (0.7, -1.0), (2.2, 0.3))])
    out = msc(X, reference=ref)
    rc = ref - ref.mean()
    for row in out:
        slope = float(row @ rc) / float(rc @ rc)
        intercept = row.mean() - slope * ref.mean()
        assert slope == pytest.approx(1.0, abs=1e-10)
        assert intercept == pytest.approx(0.0, abs=1e-10)


def test_msc_idempotent_with_fixed_reference():
    rng = RngStream(4)
    ref = _reference_spectrum()
    X = rng.uniform(0.5, 2.0, (5, 1))[:, :1] * ref + rng.uniform(-1, 1, (5, 1))
    once = msc(X, reference=ref)
    twice = msc(once, reference=ref)
    np.testing.assert_allclose(twice, once, atol=1e-8)


def test_msc_default_reference_is_column_mean():
    rng = RngStream(5)
    X = rng.uniform(1, 2, (6, 30))
    np.testing.assert_array_equal(msc(X), msc(X, reference=X.mean(axis=0)))


def test_msc_degenerate_cases():
    ref = _reference_spectrum()
    with pytest.raises(DegenerateInputError, match="constant"):
        msc(np.ones((3, 10)), reference=np.ones(10))
    with pytest.raises(ShapeError):
        msc(np.ones((3, 10)), reference=np.ones(11))
    with pytest.raises(DegenerateInputError, match="at least 2 rows"):
        msc(ref[None, :])
    # A row orthogonal to the centered reference has slope zero.
    flat = np.vstack([ref, np.full(ref.size, 4.0)])
    with pytest.raises(DegenerateInputError, match="row 1"):
        msc(flat, reference=ref)


# ---------------------------------------------------------------------------
# airPLS baseline removal
# ---------------------------------------------------------------------------

def _peak(m=200, center=100.0, width=8.0, height=5.0):
    i = np.arange(m, dtype=float)
    return height * np.exp(-((i - center) ** 2) / (2 * width ** 2))


def test_airpls_flat_row_goes_to_zero():
    out = airpls_correct(np.full((2, 100), 3.0))
    np.testing.assert_allclose(out, 0.0, atol=1e-6)


def test_airpls_preserves_peak_on_zero_baseline():
    peak = _peak()
    out = airpls_correct(peak[None, :])[0]
    assert abs(out.max() - peak.max()) <= 0.05 * peak.max()
    assert np.max(np.abs(out - peak)) <= 0.05 * peak.max()


def test_airpls_removes_linear_ramp():
    # A first-difference penalty cannot follow a linear trend, so the ramp
    # oracle runs the second-order penalty whose null space contains
    # straight lines, with lambda large enough to enforce it.
    peak = _peak()
    i = np.arange(peak.size, dtype=float)
    x = peak + 0.05 * i + 2.0
    out = airpls_correct(x[None, :], AirPlsConfig(1e5, 15, 2))[0]
    assert np.max(np.abs(out - peak)) <= 0.05 * peak.max()


def test_airpls_baseline_stays_under_peaks():
    peak = _peak()
    out = airpls_correct(peak[None, :])[0]
    # corrected = x - z, so z exceeding x shows up as negative output.
    assert out.min() >= -0.01 * peak.max()


def test_airpls_rows_processed_independently():
    peak = _peak()
    flat = np.full_like(peak, 1.0)
    stacked = airpls_correct(np.vstack([peak, flat]))
    np.testing.assert_array_equal(stacked[0], airpls_correct(peak[None, :])[0])
    np.testing.assert_array_equal(stacked[1], airpls_correct(flat[None, :])[0])


def test_airpls_validation():
    with pytest.raises(ArgumentError):
        AirPlsConfig(lam=0.0)
    with pytest.raises(ArgumentError):
        AirPlsConfig(max_iterations=0)
    with pytest.raises(ArgumentError):
        AirPlsConfig(diff_order=0)
    with pytest.raises(DegenerateInputError):
        airpls_correct(np.array([[1.0, np.nan, 2.0]]))
    with pytest.raises(ShapeError):
        airpls_correct(np.ones((1, 1)), AirPlsConfig(diff_order=2))


# ---------------------------------------------------------------------------
# pipelines
# ---------------------------------------------------------------------------

def test_empty_pipeline_is_identity():
    X = RngStream(6).uniform(-1, 1, (3, 10))
    pipe = parse_pipeline("")
    np.testing.assert_array_equal(pipe.fit_transform(X), X)
    np.testing.assert_array_equal(pipe.transform(X), X)


def test_pipeline_replays_msc_reference_on_test_rows():
    rng = RngStream(7)
    train = rng.uniform(1, 2, (8, 30))
    test = rng.uniform(1, 2, (4, 30))
    pipe = parse_pipeline("msc")
    pipe.fit(train)
    np.testing.assert_array_equal(pipe.transform(train), msc(train))
    # Test rows are corrected against the train mean, not their own.
    np.testing.assert_array_equal(
        pipe.transform(test), msc(test, reference=train.mean(axis=0)))
    assert not np.array_equal(pipe.transform(test), msc(test))


def test_pipeline_center_uses_train_means():
    rng = RngStream(8)
    train = rng.uniform(-1, 1, (10, 12))
    test = rng.uniform(5, 6, (4, 12))
    # Smoothing kernel, not a derivative: a derivative would erase the
    # constant shift this test uses to detect leaked test-set means.
    pipe = parse_pipeline("sg:5,2,0|center")
    pipe.fit(train)
    manual = savitzky_golay(test, SgConfig(5, 2, 0))
    manual = manual - savitzky_golay(train, SgConfig(5, 2, 0)).mean(axis=0)
    np.testing.assert_allclose(pipe.transform(test), manual, atol=1e-12)
    # Centered train rows average to zero; shifted test rows must not.
    assert np.max(np.abs(pipe.transform(train).mean(axis=0))) < 1e-12
    assert np.max(np.abs(pipe.transform(test).mean(axis=0))) > 1.0


def test_pipeline_fitted_state_ignores_test_rows():
    rng = RngStream(9)
    train = rng.uniform(1, 2, (6, 20))
    p1 = parse_pipeline("msc|center").fit(train)
    p2 = parse_pipeline("msc|center").fit(train)
    np.testing.assert_array_equal(p1.steps[0].reference, p2.steps[0].reference)
    np.testing.assert_array_equal(p1.steps[1].means, p2.steps[1].means)
    # Transforming different test rows never touches the fitted state.
    p1.transform(rng.uniform(5, 9, (3, 20)))
    np.testing.assert_array_equal(p1.steps[0].reference, p2.steps[0].reference)
    np.testing.assert_array_equal(p1.steps[1].means, p2.steps[1].means)


def test_unfitted_stateful_pipeline_refuses_transform():
    with pytest.raises(StateError):
        parse_pipeline("msc").transform(np.ones((2, 5)))
    with pytest.raises(StateError):
        parse_pipeline("center").transform(np.ones((2, 5)))
    with pytest.raises(StateError):
        MscStep().transform(np.ones((2, 5)))
    with pytest.raises(StateError):
        CenterStep().transform(np.ones((2, 5)))


def test_stateless_pipeline_is_born_fitted():
    X = RngStream(10).uniform(-1, 1, (2, 15))
    out = parse_pipeline("sg:5,2,1").transform(X)
    np.testing.assert_array_equal(out, savitzky_golay(X, SgConfig(5, 2, 1)))


def test_preseeded_msc_step_is_born_fitted():
    ref = _reference_spectrum()
    pipe = Pipeline([MscStep(reference=ref)])
    rows = np.vstack([2 * ref + 1, 0.5 * ref])
    np.testing.assert_allclose(pipe.transform(rows), np.vstack([ref, ref]),
                               atol=1e-10)


def test_parse_pipeline_defaults_and_spec_round_trip():
    pipe = parse_pipeline("sg|msc|airpls|center")
    assert pipe.spec() == "sg:5,2,1|msc|airpls:100,15,1|center"
    assert isinstance(pipe.steps[0], SgStep)
    assert pipe.steps[0].cfg == SgConfig(5, 2, 1)
    assert isinstance(pipe.steps[2], AirPlsStep)
    assert pipe.steps[2].cfg == AirPlsConfig(100.0, 15, 1)
    again = parse_pipeline(pipe.spec())
    assert again.spec() == pipe.spec()


def test_parse_pipeline_explicit_arguments():
    pipe = parse_pipeline("sg:9,3,2|airpls:1000,10,2")
    assert pipe.steps[0].cfg == SgConfig(9, 3, 2)
    assert pipe.steps[1].cfg == AirPlsConfig(1000.0, 10, 2)


def test_parse_pipeline_rejects_garbage():
    with pytest.raises(ConfigurationError, match="unknown"):
        parse_pipeline("snv")
    with pytest.raises(ConfigurationError):
        parse_pipeline("sg:1,2")
    with pytest.raises(ConfigurationError):
        parse_pipeline("sg:a,b,c")
    with pytest.raises(ConfigurationError, match="no arguments"):
        parse_pipeline("msc:3")
    with pytest.raises(ConfigurationError, match="empty"):
        parse_pipeline("sg||center")
