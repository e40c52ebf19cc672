"""Occurrence learning: label alignment, regularized logistic fit, evaluation.

The model family is a binary logistic regression over the four water
parameters.  The fit minimizes

    C * sum_i cross_entropy(y_i, sigmoid(x_i . w + w0)) + 0.5 * ||w||^2

by gradient descent with a backtracking (Armijo) line search; the intercept
is not penalized, larger C means weaker regularization, and features are
standardized internally with the transform stored on the model.
"""

from __future__ import annotations

import bisect
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .envsim import PARAMETERS, DetectionEvent, EnvField, EnvSample
from .geo import LocalPoint
from .survey import Roi

_LOGIT_CLAMP = 709.0
_P_MAX = float(np.nextafter(1.0, 0.0))

DEFAULT_LABEL_TOL_S = 0.5
DEFAULT_C = 1.0
SURFACE_HEADER = ("east_m", "north_m", "p")


@dataclass
class LabeledDataset:
    """Feature rows with 0/1 labels plus per-feature standardization stats."""

    X: np.ndarray
    y: np.ndarray
    pos: tuple[LocalPoint, ...]
    t: np.ndarray
    feature_names: tuple[str, ...] = PARAMETERS
    mean: np.ndarray = field(init=False)
    std: np.ndarray = field(init=False)
    n_positive_events: int = 0
    unmatched_positive_events: int = 0

    def __post_init__(self) -> None:
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        self.t = np.asarray(self.t, dtype=np.float64)
        if self.X.ndim != 2 or self.X.shape[1] != len(self.feature_names):
            raise ValueError(
                f"X must be (n, {len(self.feature_names)}), got {self.X.shape}"
            )
        if len(self.y) != len(self.X) or len(self.pos) != len(self.X):
            raise ValueError("X, y, and pos must have matching lengths")
        if not np.isfinite(self.X).all():
            raise ValueError("features contain non-finite values")
        if len(self.X):
            self.mean = self.X.mean(axis=0)
            self.std = self.X.std(axis=0)
        else:
            self.mean = np.zeros(len(self.feature_names))
            self.std = np.ones(len(self.feature_names))

    def __len__(self) -> int:
        return len(self.y)

    def subset(self, idx: np.ndarray | list[int]) -> "LabeledDataset":
        idx = np.asarray(idx, dtype=np.intp)
        return LabeledDataset(
            X=self.X[idx],
            y=self.y[idx],
            pos=tuple(self.pos[i] for i in idx),
            t=self.t[idx],
            feature_names=self.feature_names,
        )


@dataclass
class LogisticModel:
    """Fitted weights in standardized feature space, with the transform."""

    feature_names: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray
    w: np.ndarray
    w0: float
    C: float
    converged: bool = True
    grad_norm: float = 0.0
    cost_history: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.asarray(self.std, dtype=np.float64)
        self.w = np.asarray(self.w, dtype=np.float64)
        if not (len(self.feature_names) == len(self.mean) == len(self.std) == len(self.w)):
            raise ValueError("model dimensions are inconsistent")
        if self.C <= 0.0:
            raise ValueError("C must be > 0")


@dataclass
class EvalReport:
    """Confusion-matrix summary; per-fold breakdown populated by kfold."""

    tp: int
    fp: int
    tn: int
    fn: int
    per_fold: tuple["EvalReport", ...] = ()

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.n if self.n else float("nan")

    @property
    def precision(self) -> float:
        denom = self.tp + self.fp
        return self.tp / denom if denom else float("nan")

    def as_dict(self) -> dict:
        precision = self.precision
        return {
            "tp": self.tp,
            "fp": self.fp,
            "tn": self.tn,
            "fn": self.fn,
            "n": self.n,
            "accuracy": self.accuracy if self.n else None,
            "precision": None if math.isnan(precision) else precision,
        }


@dataclass
class ProbabilitySurface:
    roi_id: int
    resolution: float
    east: np.ndarray
    north: np.ndarray
    p: np.ndarray
    inside: np.ndarray


def align_labels(
    samples: list[EnvSample],
    events: list[DetectionEvent],
    tol: float = DEFAULT_LABEL_TOL_S,
) -> LabeledDataset:
    """Attach 0/1 labels to samples by timestamp matching.

    Each positive detection claims the nearest-in-time unmatched sample
    within ``tol`` seconds (ties resolve to the earlier sample); everything
    else is labeled 0.  Positive events that find no free sample are counted
    on the returned dataset.
    """
    samples = sorted(samples, key=lambda s: s.t)
    events = sorted(events, key=lambda e: e.t)
    times = [s.t for s in samples]
    y = np.zeros(len(samples), dtype=np.int64)
    matched = [False] * len(samples)
    positives = 0
    unmatched = 0
    for e in events:
        if not e.detected:
            continue
        positives += 1
        lo = bisect.bisect_left(times, e.t - tol)
        hi = bisect.bisect_right(times, e.t + tol)
        best = -1
        best_dt = math.inf
        for i in range(lo, hi):
            if matched[i]:
                continue
            dt = abs(times[i] - e.t)
            if dt < best_dt - 1e-15:
                best, best_dt = i, dt
        if best < 0:
            unmatched += 1
        else:
            matched[best] = True
            y[best] = 1
    X = np.array([s.features() for s in samples], dtype=np.float64).reshape(len(samples), len(PARAMETERS))
    return LabeledDataset(
        X=X,
        y=y,
        pos=tuple(s.pos for s in samples),
        t=np.array(times),
        n_positive_events=positives,
        unmatched_positive_events=unmatched,
    )


def _expit(z: np.ndarray) -> np.ndarray:
    z = np.clip(z, -_LOGIT_CLAMP, _LOGIT_CLAMP)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    e = np.exp(z[~pos])
    out[~pos] = e / (1.0 + e)
    return np.minimum(out, _P_MAX)


def cost_and_grad(
    theta: np.ndarray, Xs: np.ndarray, y: np.ndarray, C: float
) -> tuple[float, np.ndarray]:
    """Regularized cross-entropy and its gradient; theta = (w..., w0)."""
    w, w0 = theta[:-1], theta[-1]
    z = Xs @ w + w0
    cost = C * float(np.sum(np.logaddexp(0.0, z) - y * z)) + 0.5 * float(w @ w)
    residual = _expit(z) - y
    grad = np.empty_like(theta)
    grad[:-1] = C * (Xs.T @ residual) + w
    grad[-1] = C * float(residual.sum())
    return cost, grad


def fit(
    data: LabeledDataset,
    C: float = DEFAULT_C,
    max_iter: int = 1000,
    tol: float = 1e-8,
) -> LogisticModel:
    """Fit the logistic model by backtracking gradient descent.

    Convergence is declared when the gradient infinity-norm drops below
    ``tol``; otherwise the best iterate is returned with ``converged=False``
    and a warning.  Constant features are dropped (with a warning) before
    standardization.
    """
    if C <= 0.0:
        raise ValueError("C must be > 0")
    classes = np.unique(data.y)
    if len(classes) < 2:
        raise ValueError("fit requires both classes present in the labels")

    keep = data.std > 0.0
    if not keep.all():
        dropped = [n for n, k in zip(data.feature_names, keep) if not k]
        warnings.warn(f"dropping constant features: {dropped}", stacklevel=2)
    names = tuple(n for n, k in zip(data.feature_names, keep) if k)
    mean = data.mean[keep]
    std = data.std[keep]
    Xs = (data.X[:, keep] - mean) / std
    y = data.y.astype(np.float64)

    theta = np.zeros(Xs.shape[1] + 1)
    cost, grad = cost_and_grad(theta, Xs, y, C)
    history = [cost]
    step = 1.0
    converged = False
    for _ in range(max_iter):
        grad_norm = float(np.abs(grad).max())
        if grad_norm < tol:
            converged = True
            break
        g2 = float(grad @ grad)
        accepted = False
        while step >= 1e-18:
            candidate = theta - step * grad
            c_new, g_new = cost_and_grad(candidate, Xs, y, C)
            if c_new <= cost - 1e-4 * step * g2:
                theta, cost, grad = candidate, c_new, g_new
                history.append(cost)
                step *= 1.5
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
    grad_norm = float(np.abs(grad).max())
    if not converged and grad_norm >= tol:
        warnings.warn(
            f"fit did not converge: gradient inf-norm {grad_norm:.3e} after "
            f"{len(history) - 1} accepted steps",
            stacklevel=2,
        )
    else:
        converged = True
    return LogisticModel(
        feature_names=names,
        mean=mean,
        std=std,
        w=theta[:-1].copy(),
        w0=float(theta[-1]),
        C=C,
        converged=converged,
        grad_norm=grad_norm,
        cost_history=tuple(history),
    )


def predict_proba(model: LogisticModel, x: np.ndarray | list[float]) -> float:
    """Occurrence probability for one raw feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (len(model.feature_names),):
        raise ValueError(
            f"expected {len(model.feature_names)} features, got shape {x.shape}"
        )
    z = float((x - model.mean) / model.std @ model.w + model.w0)
    return float(_expit(np.array([z]))[0])


def predict_proba_rows(model: LogisticModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != len(model.feature_names):
        raise ValueError(f"expected (n, {len(model.feature_names)}) features")
    z = (X - model.mean) / model.std @ model.w + model.w0
    return _expit(z)


def _select_features(data: LabeledDataset, model: LogisticModel) -> np.ndarray:
    idx = [data.feature_names.index(name) for name in model.feature_names]
    return data.X[:, idx]


def evaluate(model: LogisticModel, test: LabeledDataset, threshold: float = 0.5) -> EvalReport:
    """Confusion matrix of thresholded predictions (p >= threshold is positive)."""
    if not len(test):
        raise ValueError("evaluate requires a nonempty test set")
    p = predict_proba_rows(model, _select_features(test, model))
    pred = p >= threshold
    actual = test.y.astype(bool)
    return EvalReport(
        tp=int(np.sum(pred & actual)),
        fp=int(np.sum(pred & ~actual)),
        tn=int(np.sum(~pred & ~actual)),
        fn=int(np.sum(~pred & actual)),
    )


def kfold(
    data: LabeledDataset,
    k: int = 5,
    seed: int | np.random.SeedSequence = 0,
    C: float = DEFAULT_C,
    max_iter: int = 1000,
    tol: float = 1e-8,
    threshold: float = 0.5,
) -> EvalReport:
    """Stratified k-fold cross-validation; matrices aggregate by summation."""
    n = len(data)
    if k < 2:
        raise ValueError("k must be >= 2")
    if n < k:
        raise ValueError(f"need at least k={k} rows, got {n}")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    rng = np.random.default_rng(ss)
    fold_of = np.empty(n, dtype=np.intp)
    offset = 0
    for cls in np.unique(data.y):
        idx = np.flatnonzero(data.y == cls)
        rng.shuffle(idx)
        for j, i in enumerate(idx):
            fold_of[i] = (offset + j) % k
        offset += len(idx)

    folds: list[EvalReport] = []
    for f in range(k):
        test_idx = np.flatnonzero(fold_of == f)
        train_idx = np.flatnonzero(fold_of != f)
        train = data.subset(train_idx)
        if len(np.unique(train.y)) < 2:
            raise ValueError(
                f"fold {f}: training split is single-class; reduce k or add data"
            )
        model = fit(train, C=C, max_iter=max_iter, tol=tol)
        folds.append(evaluate(model, data.subset(test_idx), threshold=threshold))
    return EvalReport(
        tp=sum(r.tp for r in folds),
        fp=sum(r.fp for r in folds),
        tn=sum(r.tn for r in folds),
        fn=sum(r.fn for r in folds),
        per_fold=tuple(folds),
    )


def surface(
    model: LogisticModel,
    roi: Roi,
    env: EnvField,
    resolution: float = 2.0,
) -> ProbabilitySurface:
    """Predicted probability grid over the ROI's bounding box.

    Grid axes span the circle's bounding box with ceil(2R/resolution)+1
    points per axis; points outside the disk are flagged, not dropped.
    """
    if resolution <= 0.0:
        raise ValueError("resolution must be > 0")
    r = roi.circle.radius
    c = roi.circle.center
    n_axis = int(math.ceil(2.0 * r / resolution - 1e-12)) + 1
    east = np.linspace(c.east - r, c.east + r, n_axis)
    north = np.linspace(c.north - r, c.north + r, n_axis)
    p = np.empty((n_axis, n_axis))
    inside = np.empty((n_axis, n_axis), dtype=bool)
    feat_idx = [PARAMETERS.index(name) for name in model.feature_names]
    for iy, nn in enumerate(north):
        for ix, ee in enumerate(east):
            pos = LocalPoint(float(ee), float(nn))
            values = env.values(pos)
            x = np.array([values[j] for j in feat_idx])
            p[iy, ix] = predict_proba(model, x)
            inside[iy, ix] = math.hypot(ee - c.east, nn - c.north) <= r + 1e-9
    return ProbabilitySurface(
        roi_id=roi.cluster_id,
        resolution=resolution,
        east=east,
        north=north,
        p=p,
        inside=inside,
    )


def surface_to_csv(surf: ProbabilitySurface) -> str:
    lines = [",".join(SURFACE_HEADER)]
    for iy in range(len(surf.north)):
        for ix in range(len(surf.east)):
            lines.append(
                f"{float(surf.east[ix])!r},{float(surf.north[iy])!r},{float(surf.p[iy, ix])!r}"
            )
    return "\n".join(lines) + "\n"


def model_to_json(model: LogisticModel) -> str:
    payload = {
        "feature_names": list(model.feature_names),
        "mean": [float(v) for v in model.mean],
        "std": [float(v) for v in model.std],
        "w": [float(v) for v in model.w],
        "w0": model.w0,
        "C": model.C,
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def model_from_json(text: str) -> LogisticModel:
    doc = json.loads(text)
    return LogisticModel(
        feature_names=tuple(doc["feature_names"]),
        mean=np.array(doc["mean"]),
        std=np.array(doc["std"]),
        w=np.array(doc["w"]),
        w0=float(doc["w0"]),
        C=float(doc["C"]),
    )
