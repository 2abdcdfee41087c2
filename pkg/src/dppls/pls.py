"""PLS1 regression with optional per-component Gaussian privatization.

The fit follows the NIPALS recursion.  With a privacy budget set, each
component releases noisy copies of the weight vector, the score vector,
the x-loading vector, and the y-loading scalar; weights and scores are
re-normalized to unit length after the noise is added.  Deflation always
uses the non-private quantities, so later components see clean residuals,
while only the released (noisy) quantities enter the returned model and
its regression vector.  Sensitivities are recomputed per component from
the residual suprema, and every calibration budgets the full
(epsilon, delta) for its own release.

Note the intentional scale asymmetry inherited from the method: the
weight sensitivity is that of the unnormalized covariance E^T f, yet the
noise is added to the unit-normalized weight vector.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (
    Dataset,
    NoiseCalibration,
    PlsModel,
    PrivacyBudget,
    RngStream,
    gaussian_vector,
    mean_center,
)
from .errors import (
    ArgumentError,
    ConfigurationError,
    DegenerateInputError,
    ShapeError,
    SingularSystemError,
)
from .mechanism import analytic_gaussian_sigma, sample_bounds, sensitivity_for

# Condition number beyond which the k x k loading system is treated as
# singular; roughly machine epsilon times a safety margin.
_COND_LIMIT = 1e12


@dataclass
class FitConfig:
    """Settings for one model fit.

    ``privacy`` of None fits the plain (no-noise) baseline.  ``rng`` must
    be supplied whenever privacy is set; it is consumed sequentially, four
    noise draws per component (weights, scores, x-loadings, y-loading).
    """

    k: int
    privacy: Optional[PrivacyBudget] = None
    rng: Optional[RngStream] = None
    residual_tolerance: float = 1e-12

    def __post_init__(self):
        if not isinstance(self.k, (int, np.integer)) or self.k < 1:
            raise ArgumentError(f"k must be a positive integer, got {self.k}")
        self.k = int(self.k)
        if self.residual_tolerance < 0:
            raise ArgumentError("residual_tolerance must be nonnegative")


def _solve_loading_system(W: np.ndarray, P: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Solve b = W (P^T W)^{-1} c through a k x k linear solve."""
    PtW = P.T @ W
    if PtW.size == 0:
        return np.zeros(W.shape[0])
    cond = np.linalg.cond(PtW)
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        raise SingularSystemError(
            f"loading system is singular within tolerance "
            f"(condition estimate {cond:.3e}); reduce the component count",
            components=W.shape[1],
            condition=float(cond),
        )
    z = np.linalg.solve(PtW, c)
    return W @ z


def regression_coefficients(W: np.ndarray, P: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Combine weights and loadings into the regression vector.

    W and P must be m x k with c of length k; the k x k system is solved
    directly rather than forming an explicit inverse.
    """
    W = np.asarray(W, dtype=float)
    P = np.asarray(P, dtype=float)
    c = np.asarray(c, dtype=float)
    if W.ndim != 2 or P.ndim != 2 or c.ndim != 1:
        raise ShapeError("W and P must be 2-d and c 1-d")
    if W.shape != P.shape or W.shape[1] != c.shape[0]:
        raise ShapeError(
            f"inconsistent shapes: W {W.shape}, P {P.shape}, c {c.shape}"
        )
    return _solve_loading_system(W, P, c)


def fit(d: Dataset, cfg: FitConfig) -> PlsModel:
    """Fit a PLS1 model, privatized when cfg.privacy is set.

    Uncentered data is centered internally and the means stored on the
    model.  Stops early, flagging the model, if the covariance residual
    drops below cfg.residual_tolerance before k components are extracted.
    """
    if cfg.privacy is not None and cfg.rng is None:
        raise ConfigurationError("a privacy budget requires an rng stream")
    if not d.centered:
        if d.n >= 1 and np.max(d.y) == np.min(d.y):
            raise DegenerateInputError("response is constant")
        d = mean_center(d)
    else:
        if d.n < 2:
            raise DegenerateInputError(f"fit needs at least 2 samples, got {d.n}")
        if not np.all(np.isfinite(d.X)) or not np.all(np.isfinite(d.y)):
            raise DegenerateInputError("dataset contains NaN or infinite entries")
        if np.all(d.y == 0.0):
            # A centered response that is identically zero was constant.
            raise DegenerateInputError("response is constant")

    n, m = d.X.shape
    k_max = min(n - 1, m)
    if cfg.k > k_max:
        raise ArgumentError(
            f"k={cfg.k} exceeds min(n-1, m)={k_max} for this dataset"
        )

    E = d.X.copy()
    f = d.y.copy()
    x_means = d.x_means if d.x_means is not None else np.zeros(m)
    y_mean = d.y_mean if d.y_mean is not None else 0.0

    W_cols, T_cols, P_cols, c_vals = [], [], [], []
    log: list[NoiseCalibration] = []
    early_stop = False

    def released(vec: np.ndarray, target: str, bounds) -> np.ndarray:
        if cfg.privacy is None:
            sigma = 0.0
        else:
            cal = analytic_gaussian_sigma(
                sensitivity_for(target, bounds), cfg.privacy, target
            )
            log.append(cal)
            sigma = cal.sigma
        return vec + gaussian_vector(vec.size, sigma, cfg.rng)

    for _ in range(cfg.k):
        cov = E.T @ f
        cov_norm = float(np.linalg.norm(cov))
        if cov_norm < cfg.residual_tolerance:
            early_stop = True
            break
        w = cov / cov_norm

        bounds = sample_bounds(E, f) if cfg.privacy is not None else None

        w_rel = released(w, "weights", bounds)
        w_rel = w_rel / np.linalg.norm(w_rel)

        s = E @ w
        s_norm = float(np.linalg.norm(s))
        if s_norm < cfg.residual_tolerance:
            early_stop = True
            break
        t = s / s_norm

        t_rel = released(t, "scores", bounds)
        t_rel = t_rel / np.linalg.norm(t_rel)

        tt = float(t @ t)
        p = (E.T @ t) / tt
        c = float(f @ t) / tt

        p_rel = released(p, "x_loadings", bounds)
        c_rel = float(released(np.array([c]), "y_loading", bounds)[0])

        # Deflation stays non-private; only the released copies leave.
        E = E - np.outer(t, p)
        f = f - c * t

        W_cols.append(w_rel)
        T_cols.append(t_rel)
        P_cols.append(p_rel)
        c_vals.append(c_rel)

    k_got = len(W_cols)
    if k_got:
        W = np.column_stack(W_cols)
        T = np.column_stack(T_cols)
        P = np.column_stack(P_cols)
        c_vec = np.array(c_vals)
    else:
        W = np.zeros((m, 0))
        T = np.zeros((n, 0))
        P = np.zeros((m, 0))
        c_vec = np.zeros(0)

    b = _solve_loading_system(W, P, c_vec)

    return PlsModel(
        W=W, P=P, c=c_vec, b=b, k=k_got,
        x_means=np.asarray(x_means, dtype=float), y_mean=float(y_mean),
        T=T, privacy=cfg.privacy, calibration_log=log, early_stop=early_stop,
        rng_seed=cfg.rng.seed if cfg.rng is not None else None,
        rng_stream=cfg.rng.stream_id if cfg.rng is not None else None,
    )


def predict(model: PlsModel, X_new: np.ndarray) -> np.ndarray:
    """Predict responses for new rows: (X_new - x_means) b + y_mean."""
    X_new = np.asarray(X_new, dtype=float)
    if X_new.ndim != 2:
        raise ShapeError("X_new must be 2-d (samples x channels)")
    if X_new.shape[1] != model.m:
        raise ShapeError(
            f"X_new has {X_new.shape[1]} columns but the model expects {model.m}"
        )
    return (X_new - model.x_means) @ model.b + model.y_mean


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

_FORMAT = "dppls-model"
_VERSION = 1


def _matrix_to_lists(M: np.ndarray) -> list:
    return [[float(v) for v in row] for row in M]


def save_model(model: PlsModel, path) -> None:
    """Write a model as a single JSON document.

    Floats serialize via their shortest round-trip representation, so a
    reloaded model predicts bit-for-bit identically.  Training scores are
    not persisted.
    """
    doc = {
        "format": _FORMAT,
        "version": _VERSION,
        "k": int(model.k),
        "W": _matrix_to_lists(model.W),
        "P": _matrix_to_lists(model.P),
        "c": [float(v) for v in model.c],
        "b": [float(v) for v in model.b],
        "x_means": [float(v) for v in model.x_means],
        "y_mean": float(model.y_mean),
        "privacy": (
            None if model.privacy is None
            else {"epsilon": model.privacy.epsilon, "delta": model.privacy.delta}
        ),
        "calibration_log": [
            {
                "target": cal.target,
                "sensitivity": cal.sensitivity,
                "sigma": cal.sigma,
                "method": cal.method,
            }
            for cal in model.calibration_log
        ],
        "early_stop": bool(model.early_stop),
        "rng_seed": model.rng_seed,
        "rng_stream": model.rng_stream,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _lists_to_matrix(rows: list, width: int) -> np.ndarray:
    if not rows:
        return np.zeros((0, width))
    return np.array([[float(v) for v in row] for row in rows], dtype=float)


def load_model(path) -> PlsModel:
    """Read a model written by :func:`save_model`."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != _FORMAT:
        raise ArgumentError(f"{path}: not a model file")
    if doc.get("version") != _VERSION:
        raise ArgumentError(f"{path}: unsupported model version {doc.get('version')}")
    k = int(doc["k"])
    W = _lists_to_matrix(doc["W"], k)
    P = _lists_to_matrix(doc["P"], k)
    privacy = None
    if doc["privacy"] is not None:
        privacy = PrivacyBudget(doc["privacy"]["epsilon"], doc["privacy"]["delta"])
    log = [
        NoiseCalibration(
            sensitivity=e["sensitivity"], sigma=e["sigma"],
            method=e["method"], target=e["target"],
        )
        for e in doc["calibration_log"]
    ]
    return PlsModel(
        W=W, P=P,
        c=np.array([float(v) for v in doc["c"]]),
        b=np.array([float(v) for v in doc["b"]]),
        k=k,
        x_means=np.array([float(v) for v in doc["x_means"]]),
        y_mean=float(doc["y_mean"]),
        T=None,
        privacy=privacy,
        calibration_log=log,
        early_stop=bool(doc["early_stop"]),
        rng_seed=doc["rng_seed"],
        rng_stream=doc["rng_stream"],
    )
