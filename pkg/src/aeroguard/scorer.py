"""Gaussian anomaly scoring over reconstruction-error vectors.

Training errors are fit with a multivariate Gaussian (sample mean,
population covariance plus a small diagonal ridge); a window's anomaly
score is its Mahalanobis distance to that fit, computed through the cached
Cholesky factor rather than an explicit inverse.  Scores rank windows,
gate the classifier through a threshold, and feed the ROC evaluation.

The ROC sweep accumulates integer true/false-positive counts per distinct
score value and performs a single division at the end, so the trapezoid
AUC equals the pairwise rank statistic (ties counted half) bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DimensionError, NumericError


@dataclass
class GaussianErrorModel:
    mean: np.ndarray          # [C]
    cov: np.ndarray           # [C, C], regularized
    ridge: float              # lambda added to the diagonal
    chol: np.ndarray          # lower-triangular factor of cov


@dataclass
class AnomalyScore:
    window_id: int
    score: float
    label: int = None  # 1 fault, 0 normal; None outside evaluation


@dataclass
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float


def fit_gaussian(errors, ridge=None) -> GaussianErrorModel:
    """Fit mean and covariance to [N, C] error vectors.

    Covariance uses denominator N.  ``ridge`` defaults to
    1e-6 * trace(cov)/C, enough to keep collinear error channels from
    making the factorization fail; all-constant input still needs an
    explicit ridge.
    """
    x = np.asarray(errors, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionError(f"expected [N, C] errors, got shape {x.shape}")
    n, c = x.shape
    if n < 2:
        raise ContractError("need at least 2 error vectors to fit a Gaussian")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / n
    if ridge is None:
        ridge = 1e-6 * np.trace(cov) / c
    cov = cov + ridge * np.eye(c)
    cov = (cov + cov.T) / 2.0
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise NumericError(
            "covariance is not positive definite; pass a larger ridge"
        ) from exc
    return GaussianErrorModel(mean=mean, cov=cov, ridge=float(ridge), chol=chol)


def rebuild_gaussian(mean, cov, ridge) -> GaussianErrorModel:
    """Reassemble a model from persisted mean and (already ridged) covariance."""
    mean = np.asarray(mean, dtype=np.float64)
    cov = np.asarray(cov, dtype=np.float64)
    if mean.ndim != 1 or cov.shape != (mean.shape[0], mean.shape[0]):
        raise DimensionError(
            f"mean {mean.shape} and covariance {cov.shape} do not agree"
        )
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise NumericError("persisted covariance is not positive definite") from exc
    return GaussianErrorModel(mean=mean, cov=cov, ridge=float(ridge), chol=chol)


def mahalanobis(model: GaussianErrorModel, errors):
    """Distance of one [C] vector (scalar out) or [N, C] stack ([N] out)."""
    e = np.asarray(errors, dtype=np.float64)
    single = e.ndim == 1
    if single:
        e = e[None]
    if e.ndim != 2 or e.shape[1] != model.mean.shape[0]:
        raise DimensionError(
            f"error vectors shaped {e.shape} do not match model "
            f"dimension {model.mean.shape[0]}"
        )
    d = (e - model.mean).T  # [C, N]
    y = np.linalg.solve(model.chol, d)  # forward substitution against L
    dist = np.sqrt((y * y).sum(axis=0))
    return float(dist[0]) if single else dist


def score_errors(model, errors, window_ids=None, labels=None):
    """Bundle Mahalanobis distances into AnomalyScore records."""
    dist = np.atleast_1d(mahalanobis(model, errors))
    n = len(dist)
    if window_ids is None:
        window_ids = range(n)
    window_ids = list(window_ids)
    if len(window_ids) != n:
        raise ContractError("window_ids length does not match errors")
    if labels is None:
        labels = [None] * n
    labels = list(labels)
    if len(labels) != n:
        raise ContractError("labels length does not match errors")
    return [
        AnomalyScore(window_id=int(w), score=float(s), label=l)
        for w, s, l in zip(window_ids, dist, labels)
    ]


def rank_scores(scores):
    """Descending by score; equal scores keep ascending window-id order."""
    return sorted(scores, key=lambda s: (-s.score, s.window_id))


def top_fraction(scores, q):
    """The ceil(q*N) highest-scoring windows, q in (0, 1]."""
    if not 0.0 < q <= 1.0:
        raise ContractError(f"fraction {q} outside (0, 1]")
    ranked = rank_scores(scores)
    return ranked[: math.ceil(q * len(ranked))]


def detect(scores, threshold):
    """Boolean per window (input order): anomalous iff score > threshold."""
    if threshold < 0:
        raise ContractError("threshold cannot be negative")
    return np.array([s.score > threshold for s in scores], dtype=bool)


def train_threshold(train_scores, percentile=99.0):
    """Default gate: a high percentile of the training-score distribution."""
    values = [s.score if isinstance(s, AnomalyScore) else float(s) for s in train_scores]
    if not values:
        raise ContractError("no training scores to take a percentile of")
    return float(np.percentile(values, percentile))


def roc_auc(scores) -> RocCurve:
    """ROC sweep over distinct score values; labels must cover both classes.

    All accumulation is integer; AUC equals
    (wins + ties/2) / (positives * negatives) exactly.
    """
    for s in scores:
        if s.label not in (0, 1):
            raise ContractError("roc_auc needs 0/1 truth labels on every score")
    pos = sum(1 for s in scores if s.label == 1)
    neg = len(scores) - pos
    if pos == 0 or neg == 0:
        raise ContractError("roc_auc needs both classes present")
    ranked = rank_scores(scores)
    fpr = [0.0]
    tpr = [0.0]
    tp = fp = 0
    area2 = 0  # twice the un-normalized area, exact in integers
    i = 0
    while i < len(ranked):
        j = i
        dtp = dfp = 0
        while j < len(ranked) and ranked[j].score == ranked[i].score:
            if ranked[j].label == 1:
                dtp += 1
            else:
                dfp += 1
            j += 1
        area2 += dfp * (2 * tp + dtp)
        tp += dtp
        fp += dfp
        fpr.append(fp / neg)
        tpr.append(tp / pos)
        i = j
    return RocCurve(
        fpr=np.array(fpr),
        tpr=np.array(tpr),
        auc=area2 / (2 * pos * neg),
    )


def write_scores_csv(path, scores):
    """``window_id,score,label`` rows; label column empty when unknown."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("window_id,score,label\n")
        for s in scores:
            label = "" if s.label is None else str(int(s.label))
            fh.write(f"{s.window_id},{s.score:.9g},{label}\n")


def write_roc_csv(path, curve: RocCurve):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("fpr,tpr\n")
        for f, t in zip(curve.fpr, curve.tpr):
            fh.write(f"{f:.9g},{t:.9g}\n")
