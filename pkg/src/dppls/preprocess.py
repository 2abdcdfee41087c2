"""Row-wise spectral preprocessing and train-fitted pipelines.

Three transforms plus centering:

* Savitzky-Golay smoothing/derivatives via exact least-squares polynomial
  kernels, with one-sided polynomial fits over the boundary windows so the
  output keeps the input width.
* Multiplicative scatter correction against a reference spectrum (the
  training column mean unless one is supplied).
* Adaptive iteratively reweighted baseline removal built on a Whittaker
  smoother with a banded difference penalty.

A :class:`Pipeline` fixes any data-dependent state (MSC reference,
centering means) on the training split only and replays it unchanged on
later splits.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np
from scipy.linalg import solveh_banded

from .errors import (
    ArgumentError,
    ConfigurationError,
    DegenerateInputError,
    NumericalError,
    ShapeError,
    StateError,
)


# ---------------------------------------------------------------------------
# Savitzky-Golay
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SgConfig:
    window: int = 5
    polyorder: int = 2
    derivative: int = 1

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise ArgumentError(f"window must be odd and >= 3, got {self.window}")
        if not (0 <= self.polyorder < self.window):
            raise ArgumentError(
                f"polyorder must satisfy 0 <= polyorder < window, got {self.polyorder}"
            )
        if not (0 <= self.derivative <= self.polyorder):
            raise ArgumentError(
                f"derivative must satisfy 0 <= derivative <= polyorder, "
                f"got {self.derivative}"
            )


def sg_kernel(cfg: SgConfig, offset: int = 0) -> np.ndarray:
    """Least-squares polynomial kernel evaluated ``offset`` channels from
    the window center.

    The kernel is in ascending channel order: dotting it with a window of
    the signal gives the fitted polynomial's ``derivative``-th derivative
    at that position (unit channel spacing).  offset=0 is the interior
    kernel; negative/positive offsets give the one-sided boundary kernels.
    """
    half = (cfg.window - 1) // 2
    if abs(offset) > half:
        raise ArgumentError(f"offset {offset} outside window half-width {half}")
    x = np.arange(cfg.window, dtype=float) - half
    A = np.vander(x, cfg.polyorder + 1, increasing=True)
    # Row j of pinv maps a window to the j-th polynomial coefficient.
    pinv = np.linalg.pinv(A)
    d = cfg.derivative
    kernel = np.zeros(cfg.window)
    for j in range(d, cfg.polyorder + 1):
        kernel += (factorial(j) // factorial(j - d)) * offset ** (j - d) * pinv[j]
    return kernel


def savitzky_golay(X: np.ndarray, cfg: SgConfig = SgConfig()) -> np.ndarray:
    """Apply the filter along each row, same output width.

    Interior points use the central kernel; the first and last half-window
    points re-fit the polynomial over the boundary window and evaluate it
    one-sidedly instead of shortening the output.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n, m = X.shape
    if m < cfg.window:
        raise ShapeError(f"rows have {m} channels but the window needs {cfg.window}")
    half = (cfg.window - 1) // 2

    center = sg_kernel(cfg, 0)
    windows = np.lib.stride_tricks.sliding_window_view(X, cfg.window, axis=1)
    out = np.empty_like(X)
    out[:, half:m - half] = windows @ center

    left = np.stack([sg_kernel(cfg, i - half) for i in range(half)])
    right = np.stack([sg_kernel(cfg, i + 1) for i in range(half)])
    out[:, :half] = X[:, :cfg.window] @ left.T
    out[:, m - half:] = X[:, m - cfg.window:] @ right.T
    return out


# ---------------------------------------------------------------------------
# multiplicative scatter correction
# ---------------------------------------------------------------------------

_MSC_SLOPE_TOL = 1e-12


def msc(X: np.ndarray, reference: np.ndarray | None = None) -> np.ndarray:
    """Regress each row on the reference and undo slope and intercept.

    Each row x is fit as x ~ a + b * reference by ordinary least squares
    and replaced with (x - a) / b.  Without an explicit reference the
    column mean of X is used.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n, m = X.shape
    if reference is None:
        if n < 2:
            raise DegenerateInputError(
                "mean reference needs at least 2 rows; pass a reference explicitly"
            )
        reference = X.mean(axis=0)
    reference = np.asarray(reference, dtype=float).ravel()
    if reference.shape[0] != m:
        raise ShapeError(
            f"reference has {reference.shape[0]} channels, rows have {m}"
        )
    ref_centered = reference - reference.mean()
    ref_var = float(ref_centered @ ref_centered)
    if ref_var <= 0.0:
        raise DegenerateInputError("reference spectrum is constant")

    slopes = (X @ ref_centered) / ref_var
    bad = np.abs(slopes) < _MSC_SLOPE_TOL
    if np.any(bad):
        row = int(np.argmax(bad))
        raise DegenerateInputError(
            f"row {row} has near-zero slope against the reference; "
            "scatter correction is undefined for it"
        )
    intercepts = X.mean(axis=1) - slopes * reference.mean()
    return (X - intercepts[:, None]) / slopes[:, None]


# ---------------------------------------------------------------------------
# airPLS baseline removal
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AirPlsConfig:
    lam: float = 100.0
    max_iterations: int = 15
    diff_order: int = 1

    def __post_init__(self):
        if not np.isfinite(self.lam) or self.lam <= 0:
            raise ArgumentError(f"lam must be positive, got {self.lam}")
        if self.max_iterations < 1:
            raise ArgumentError("max_iterations must be at least 1")
        if self.diff_order < 1:
            raise ArgumentError("diff_order must be at least 1")


_PENALTY_CACHE: dict = {}


def _penalty_bands(m: int, order: int) -> np.ndarray:
    """Upper banded form of D^T D for the ``order``-th difference matrix."""
    key = (m, order)
    if key not in _PENALTY_CACHE:
        if m <= order:
            raise ShapeError(
                f"need more than {order} channels for a difference penalty, got {m}"
            )
        D = np.diff(np.eye(m), n=order, axis=0)
        DtD = D.T @ D
        ab = np.zeros((order + 1, m))
        for r in range(order + 1):
            ab[order - r, r:] = np.diagonal(DtD, offset=r)
        _PENALTY_CACHE[key] = ab
    return _PENALTY_CACHE[key]


def _whittaker(x: np.ndarray, weights: np.ndarray, cfg: AirPlsConfig) -> np.ndarray:
    """Solve (diag(w) + lam D^T D) z = w x with a banded Cholesky solve."""
    ab = cfg.lam * _penalty_bands(x.shape[0], cfg.diff_order)
    ab = ab.copy()
    ab[cfg.diff_order, :] += weights
    try:
        return solveh_banded(ab, weights * x, lower=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"banded baseline solve failed: {exc}") from exc


def airpls_correct(X: np.ndarray, cfg: AirPlsConfig = AirPlsConfig()) -> np.ndarray:
    """Estimate and subtract a smooth baseline from each row.

    Iteratively reweighted Whittaker smoothing: points above the current
    baseline get weight zero, points below get weight
    exp(iteration * |d_i| / l1(d)) where d collects the negative
    residuals.  Iteration stops after max_iterations or once
    l1(d) < 0.001 * l1(x).  Returns the baseline-subtracted rows.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if not np.all(np.isfinite(X)):
        raise DegenerateInputError("input contains NaN or infinite entries")
    out = np.empty_like(X)
    for i, x in enumerate(X):
        out[i] = x - _airpls_baseline(x, cfg)
    return out


def _airpls_baseline(x: np.ndarray, cfg: AirPlsConfig) -> np.ndarray:
    m = x.shape[0]
    weights = np.ones(m)
    z = np.zeros(m)
    abs_total = float(np.sum(np.abs(x)))
    for iteration in range(1, cfg.max_iterations + 1):
        z = _whittaker(x, weights, cfg)
        d = x - z
        neg = d < 0
        dssn = float(np.sum(np.abs(d[neg])))
        if dssn < 0.001 * abs_total:
            break
        weights = np.zeros(m)
        weights[neg] = np.exp(iteration * np.abs(d[neg]) / dssn)
    return z


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------

class SgStep:
    """Stateless Savitzky-Golay step."""

    name = "sg"

    def __init__(self, cfg: SgConfig = SgConfig()):
        self.cfg = cfg

    def fit(self, X):
        return self

    def transform(self, X):
        return savitzky_golay(X, self.cfg)

    def spec(self) -> str:
        c = self.cfg
        return f"sg:{c.window},{c.polyorder},{c.derivative}"


class MscStep:
    """Scatter correction whose reference is learned from training data."""

    name = "msc"

    def __init__(self, reference: np.ndarray | None = None):
        self.reference = None if reference is None else np.asarray(reference, float)
        self._fitted = self.reference is not None

    def fit(self, X):
        if self.reference is None:
            X = np.atleast_2d(np.asarray(X, dtype=float))
            if X.shape[0] < 2:
                raise DegenerateInputError("msc needs at least 2 training rows")
            self.reference = X.mean(axis=0)
        self._fitted = True
        return self

    def transform(self, X):
        if not self._fitted:
            raise StateError("msc step used before fitting")
        return msc(X, self.reference)

    def spec(self) -> str:
        return "msc"


class AirPlsStep:
    """Stateless baseline-removal step."""

    name = "airpls"

    def __init__(self, cfg: AirPlsConfig = AirPlsConfig()):
        self.cfg = cfg

    def fit(self, X):
        return self

    def transform(self, X):
        return airpls_correct(X, self.cfg)

    def spec(self) -> str:
        c = self.cfg
        lam = int(c.lam) if float(c.lam).is_integer() else c.lam
        return f"airpls:{lam},{c.max_iterations},{c.diff_order}"


class CenterStep:
    """Column centering with training means."""

    name = "center"

    def __init__(self):
        self.means = None

    def fit(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[0] < 2:
            raise DegenerateInputError("centering needs at least 2 training rows")
        self.means = X.mean(axis=0)
        return self

    def transform(self, X):
        if self.means is None:
            raise StateError("center step used before fitting")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.means.shape[0]:
            raise ShapeError(
                f"rows have {X.shape[1]} channels, training had {self.means.shape[0]}"
            )
        return X - self.means

    def spec(self) -> str:
        return self.name


class Pipeline:
    """Ordered preprocessing steps with fit-on-train, replay-on-test
    semantics.  An empty pipeline is the identity."""

    def __init__(self, steps=()):
        self.steps = list(steps)
        self._fitted = not any(_needs_fit(s) for s in self.steps)

    def fit(self, X) -> "Pipeline":
        cur = np.atleast_2d(np.asarray(X, dtype=float))
        for step in self.steps:
            step.fit(cur)
            cur = step.transform(cur)
        self._fitted = True
        return self

    def transform(self, X) -> np.ndarray:
        if not self._fitted:
            raise StateError("pipeline used before fitting")
        cur = np.atleast_2d(np.asarray(X, dtype=float))
        for step in self.steps:
            cur = step.transform(cur)
        return cur

    def fit_transform(self, X) -> np.ndarray:
        self.fit(X)
        return self.transform(X)

    def spec(self) -> str:
        return "|".join(step.spec() for step in self.steps)


def _needs_fit(step) -> bool:
    if isinstance(step, MscStep):
        return not step._fitted
    if isinstance(step, CenterStep):
        return step.means is None
    return False


def _parse_ints(parts, what, count):
    if len(parts) != count:
        raise ConfigurationError(f"{what} takes {count} arguments, got {len(parts)}")
    try:
        return [float(p) if "." in p else int(p) for p in parts]
    except ValueError:
        raise ConfigurationError(f"{what}: non-numeric argument in {parts}") from None


def parse_pipeline(text: str) -> Pipeline:
    """Build a pipeline from a compact spec string.

    Steps are separated by ``|`` with colon-separated arguments, e.g.
    ``"sg:5,2,1|msc|airpls:100,15,1|center"``.  ``sg`` and ``airpls``
    default to (5, 2, 1) and (100, 15, 1) when arguments are omitted.
    """
    text = text.strip()
    if not text:
        return Pipeline([])
    steps = []
    for token in text.split("|"):
        token = token.strip()
        if not token:
            raise ConfigurationError("empty pipeline step")
        name, _, argtext = token.partition(":")
        args = [a for a in argtext.split(",") if a] if argtext else []
        if name == "sg":
            w, p, d = _parse_ints(args, "sg", 3) if args else (5, 2, 1)
            steps.append(SgStep(SgConfig(int(w), int(p), int(d))))
        elif name == "msc":
            if args:
                raise ConfigurationError("msc takes no arguments")
            steps.append(MscStep())
        elif name == "airpls":
            lam, it, order = _parse_ints(args, "airpls", 3) if args else (100.0, 15, 1)
            steps.append(AirPlsStep(AirPlsConfig(float(lam), int(it), int(order))))
        elif name == "center":
            if args:
                raise ConfigurationError("center takes no arguments")
            steps.append(CenterStep())
        else:
            raise ConfigurationError(f"unknown pipeline step {name!r}")
    return Pipeline(steps)
