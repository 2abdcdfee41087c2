"""Metrics, splitting, cross-validation, and the privacy-utility sweep."""

import json

import numpy as np
import pytest

from dppls.core import Dataset, PrivacyBudget, RngStream, mean_center
from dppls.errors import ArgumentError, DegenerateInputError, ShapeError
from dppls.evaluate import (
    EvalReport,
    kfold_cv,
    privacy_utility_sweep,
    r2_score,
    rmse,
    train_test_split,
)
from dppls.pls import FitConfig


def _rank3_dataset(n=60, m=25, seed=0):
    rng = RngStream(seed)
    C = rng.uniform(0.0, 10.0, (n, 3))
    S = rng.uniform(-1.0, 1.0, (3, m))
    return Dataset(X=C @ S, y=C[:, 0].copy())


def _rank1_dataset(n=24, m=12, seed=1):
    rng = RngStream(seed)
    c = rng.uniform(1.0, 3.0, n)
    s = rng.uniform(-1.0, 1.0, m)
    return Dataset(X=np.outer(c, s), y=c.copy())


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def test_rmse_hand_cases():
    assert rmse([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0
    assert rmse([0.0, 0.0], [3.0, -3.0]) == pytest.approx(3.0, abs=1e-15)


def test_rmse_matches_formula():
    rng = RngStream(2)
    y = rng.uniform(-5, 5, 40)
    y_hat = rng.uniform(-5, 5, 40)
    expected = np.sqrt(np.mean((y - y_hat) ** 2))
    assert rmse(y, y_hat) == pytest.approx(expected, rel=1e-12)


def test_rmse_accepts_column_vectors():
    y = np.array([[1.0], [2.0]])
    assert rmse(y, np.array([1.0, 2.0])) == 0.0


def test_rmse_validation():
    with pytest.raises(ShapeError):
        rmse([1.0, 2.0], [1.0])
    with pytest.raises(ArgumentError):
        rmse([], [])


def test_r2_reference_points():
    y = np.array([1.0, 2.0, 3.0, 4.0])
    assert r2_score(y, y) == pytest.approx(1.0, abs=1e-15)
    # Predicting the mean everywhere explains none of the variance.
    assert r2_score(y, np.full(4, y.mean())) == pytest.approx(0.0, abs=1e-15)


def test_r2_matches_formula():
    rng = RngStream(3)
    y = rng.uniform(-2, 2, 30)
    y_hat = y + 0.3 * rng.uniform(-1, 1, 30)
    sse = np.sum((y - y_hat) ** 2)
    sst = np.sum((y - y.mean()) ** 2)
    assert r2_score(y, y_hat) == pytest.approx(1.0 - sse / sst, rel=1e-12)


def test_r2_validation():
    with pytest.raises(DegenerateInputError):
        r2_score([2.0, 2.0, 2.0], [1.0, 2.0, 3.0])
    with pytest.raises(ShapeError):
        r2_score([1.0, 2.0], [1.0])


# ---------------------------------------------------------------------------
# train/test split
# ---------------------------------------------------------------------------

def test_split_sizes_follow_ceil_rule():
    d = _rank3_dataset(n=80)
    train, test = train_test_split(d, 0.3, RngStream(4))
    assert (train.n, test.n) == (56, 24)
    # ceil(7 * 0.5) keeps the extra sample on the training side.
    d7 = _rank3_dataset(n=7)
    train7, test7 = train_test_split(d7, 0.5, RngStream(4))
    assert (train7.n, test7.n) == (4, 3)


def test_split_is_a_partition():
    d = _rank3_dataset(n=30)
    train, test = train_test_split(d, 0.25, RngStream(5))
    recovered = np.vstack([train.X, test.X])
    assert recovered.shape == d.X.shape
    # Every original row appears exactly once across the two sides.
    order = np.lexsort(recovered.T)
    base = np.lexsort(d.X.T)
    np.testing.assert_array_equal(recovered[order], d.X[base])
    ys = np.sort(np.concatenate([train.y, test.y]))
    np.testing.assert_array_equal(ys, np.sort(d.y))


def test_split_determinism():
    d = _rank3_dataset(n=40)
    a = train_test_split(d, 0.3, RngStream(6))
    b = train_test_split(d, 0.3, RngStream(6))
    np.testing.assert_array_equal(a[0].X, b[0].X)
    np.testing.assert_array_equal(a[1].y, b[1].y)
    c = train_test_split(d, 0.3, RngStream(7))
    assert not np.array_equal(a[0].X, c[0].X)


def test_split_validation():
    d = _rank3_dataset(n=20)
    for bad in (0.0, 1.0, -0.2, 1.5):
        with pytest.raises(ArgumentError):
            train_test_split(d, bad, RngStream(0))
    # 5 samples at 0.2 leave a single test row.
    with pytest.raises(DegenerateInputError):
        train_test_split(_rank3_dataset(n=5), 0.2, RngStream(0))


# ---------------------------------------------------------------------------
# k-fold cross-validation
# ---------------------------------------------------------------------------

def test_cv_noiseless_rank1_has_zero_error():
    report = kfold_cv(_rank1_dataset(), 4, [FitConfig(k=1)], rng=RngStream(8))
    assert report.best["k"] == 1
    assert report.best["rmsecv"] < 1e-8
    assert report.entries[0]["status"] == "ok"
    assert report.entries[0]["kind"] == "cv"


def test_cv_prefers_sufficient_rank():
    d = _rank3_dataset()
    grid = [FitConfig(k=1), FitConfig(k=3)]
    report = kfold_cv(d, 5, grid, rng=RngStream(9))
    assert report.best["k"] == 3
    assert report.entries[1]["rmsecv"] < report.entries[0]["rmsecv"]
    assert report.entries[1]["rmsecv"] < 1e-8


def test_cv_tie_breaks_toward_smaller_k():
    # On rank-1 data the k=2 fit stops early and predicts identically to
    # k=1, so the RMSECV values tie exactly and the smaller k must win.
    d = _rank1_dataset()
    report = kfold_cv(d, 3, [FitConfig(k=2), FitConfig(k=1)], rng=RngStream(10))
    assert report.entries[0]["rmsecv"] == report.entries[1]["rmsecv"]
    assert report.best["k"] == 1


def test_cv_flags_failures_and_keeps_going():
    d = _rank3_dataset(n=20, m=3)
    # k=5 exceeds the 3 channels on every fold; k=2 is fine.
    report = kfold_cv(d, 4, [FitConfig(k=5), FitConfig(k=2)], rng=RngStream(11))
    assert [e["status"] for e in report.entries] == ["failed", "ok"]
    assert report.entries[0]["rmsecv"] is None
    assert report.best["k"] == 2


def test_cv_leave_one_out_runs():
    d = _rank1_dataset(n=10)
    report = kfold_cv(d, 10, [FitConfig(k=1)], rng=RngStream(12))
    assert report.best["rmsecv"] < 1e-8


def test_cv_private_grid_points_get_derived_streams():
    d = _rank3_dataset()
    budget = PrivacyBudget(epsilon=100.0, delta=0.01)
    grid = [FitConfig(k=3, privacy=budget)]
    a = kfold_cv(d, 4, grid, rng=RngStream(13))
    b = kfold_cv(d, 4, grid, rng=RngStream(13))
    assert a.entries == b.entries
    assert a.entries[0]["epsilon"] == 100.0
    assert a.entries[0]["delta"] == 0.01
    c = kfold_cv(d, 4, grid, rng=RngStream(14))
    assert c.entries[0]["rmsecv"] != a.entries[0]["rmsecv"]


def test_cv_records_pipeline_spec():
    d = _rank3_dataset()
    report = kfold_cv(d, 4, [FitConfig(k=3)], pipeline_spec="sg:5,2,0|center",
                      rng=RngStream(15))
    assert report.metadata["preprocess"] == "sg:5,2,0|center"
    assert report.entries[0]["preprocess"] == "sg:5,2,0|center"
    assert report.entries[0]["status"] == "ok"


def test_cv_validation():
    d = _rank3_dataset(n=20)
    with pytest.raises(ArgumentError, match="grid"):
        kfold_cv(d, 4, [], rng=RngStream(0))
    with pytest.raises(ArgumentError, match="folds"):
        kfold_cv(d, 1, [FitConfig(k=1)], rng=RngStream(0))
    with pytest.raises(ArgumentError, match="folds"):
        kfold_cv(d, 21, [FitConfig(k=1)], rng=RngStream(0))
    with pytest.raises(ArgumentError, match="uncentered"):
        kfold_cv(mean_center(d), 4, [FitConfig(k=1)], rng=RngStream(0))


# ---------------------------------------------------------------------------
# privacy-utility sweep
# ---------------------------------------------------------------------------

def test_sweep_empty_grid_is_baseline_only():
    d = _rank3_dataset()
    train, test = train_test_split(d, 0.3, RngStream(16))
    report = privacy_utility_sweep(train, test, [], k=3, rng=RngStream(17))
    assert len(report.entries) == 1
    assert len(report.aggregates) == 1
    entry = report.entries[0]
    assert entry["kind"] == "baseline"
    assert entry["epsilon"] is None
    assert entry["rmsep"] < 1e-8
    agg = report.aggregates[0]
    assert agg["repeats"] == 1 and agg["rmsep_se"] is None


def test_sweep_entry_and_aggregate_layout():
    d = _rank3_dataset()
    train, test = train_test_split(d, 0.3, RngStream(18))
    report = privacy_utility_sweep(
        train, test, [1.0, 10.0], k=3, repeats=3, rng=RngStream(19))
    assert len(report.entries) == 1 + 2 * 3
    assert len(report.aggregates) == 3
    holdouts = [e for e in report.entries if e["kind"] == "holdout"]
    assert [e["repeat"] for e in holdouts] == [0, 1, 2, 0, 1, 2]
    assert {e["epsilon"] for e in holdouts} == {1.0, 10.0}
    assert all(e["delta"] == 0.01 for e in holdouts)
    assert report.metadata["protocol"] == "privacy_utility_sweep"


def test_sweep_aggregates_match_entry_recomputation():
    d = _rank3_dataset()
    train, test = train_test_split(d, 0.3, RngStream(20))
    report = privacy_utility_sweep(
        train, test, [5.0], k=3, repeats=4, rng=RngStream(21))
    vals = [e["rmsep"] for e in report.entries
            if e["kind"] == "holdout" and e["status"] == "ok"]
    agg = report.aggregates[1]
    assert agg["rmsep_mean"] == float(np.mean(vals))
    assert agg["rmsep_se"] == float(np.std(vals, ddof=1) / np.sqrt(len(vals)))
    assert agg["repeats"] == 4


def test_sweep_huge_epsilon_tracks_baseline():
    d = _rank3_dataset()
    train, test = train_test_split(d, 0.3, RngStream(22))
    report = privacy_utility_sweep(
        train, test, [1e9], k=3, repeats=2, rng=RngStream(23))
    scale = float(np.std(test.y))
    for e in report.entries:
        if e["kind"] == "holdout":
            assert e["rmsep"] < 0.05 * scale
            assert e["r2p"] > 0.99


def test_sweep_deterministic_reports(tmp_path):
    d = _rank3_dataset()
    train, test = train_test_split(d, 0.3, RngStream(24))
    paths = []
    for tag in ("a", "b"):
        report = privacy_utility_sweep(
            train, test, [1.0], k=3, repeats=3, rng=RngStream(25))
        jp = tmp_path / f"{tag}.json"
        cp = tmp_path / f"{tag}.csv"
        report.to_json(jp)
        report.to_csv(cp)
        paths.append((jp, cp))
    assert paths[0][0].read_bytes() == paths[1][0].read_bytes()
    assert paths[0][1].read_bytes() == paths[1][1].read_bytes()


def test_sweep_supports_stateful_pipelines():
    d = _rank3_dataset()
    train, test = train_test_split(d, 0.3, RngStream(26))
    report = privacy_utility_sweep(
        train, test, [100.0], k=3, pipeline_spec="center",
        repeats=2, rng=RngStream(27))
    assert all(e["status"] == "ok" for e in report.entries)
    assert report.metadata["preprocess"] == "center"


def test_sweep_validation():
    d = _rank3_dataset()
    train, test = train_test_split(d, 0.3, RngStream(28))
    with pytest.raises(ArgumentError, match="repeats"):
        privacy_utility_sweep(train, test, [1.0], k=3, repeats=0)
    for bad in (0.0, -1.0, float("nan")):
        with pytest.raises(ArgumentError, match="positive"):
            privacy_utility_sweep(train, test, [bad], k=3)
    with pytest.raises(ArgumentError, match="uncentered"):
        privacy_utility_sweep(mean_center(train), test, [], k=3)
    with pytest.raises(ShapeError):
        narrow = Dataset(X=test.X[:, :-1], y=test.y)
        privacy_utility_sweep(train, narrow, [], k=3)


# ---------------------------------------------------------------------------
# report serialization
# ---------------------------------------------------------------------------

def test_report_json_round_trip(tmp_path):
    report = EvalReport(
        entries=[{"kind": "cv", "rmsecv": 1.5, "status": "ok"}],
        aggregates=[{"epsilon": 1.0, "rmsep_mean": 2.0}],
        best={"k": 2},
        metadata={"protocol": "kfold_cv"},
    )
    path = tmp_path / "report.json"
    report.to_json(path)
    raw = path.read_text()
    assert raw.endswith("\n")
    doc = json.loads(raw)
    assert doc["entries"] == report.entries
    assert doc["aggregates"] == report.aggregates
    assert doc["best"] == {"k": 2}
    assert doc["metadata"] == {"protocol": "kfold_cv"}


def test_report_csv_layout(tmp_path):
    entry = {
        "kind": "holdout", "epsilon": 1.0, "delta": 0.01, "k": 3,
        "preprocess": "", "fold": None, "repeat": 2,
        "rmsecv": None, "rmsep": 1.0 / 3.0, "r2p": 0.5, "status": "ok",
    }
    report = EvalReport(entries=[entry])
    path = tmp_path / "report.csv"
    report.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == ("kind,epsilon,delta,k,preprocess,fold,repeat,"
                        "rmsecv,rmsep,r2p,status")
    fields = lines[1].split(",")
    assert fields[0] == "holdout"
    assert fields[5] == "" and fields[7] == ""
    # repr round-trips the float exactly.
    assert float(fields[8]) == 1.0 / 3.0
    assert fields[10] == "ok"
