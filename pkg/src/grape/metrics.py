"""Classification metrics, CVSS severity banding, and PCA projection."""

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    mcc: float
    fpr: float | None = None  # binary task only
    per_class: list[dict] = field(default_factory=list)
    confusion: list[list[int]] = field(default_factory=list)

    def as_dict(self) -> dict:
        out = {"accuracy": self.accuracy, "precision": self.precision,
               "recall": self.recall, "f1": self.f1, "mcc": self.mcc}
        if self.fpr is not None:
            out["fpr"] = self.fpr
        return out


def _safe_div(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def compute_metrics(confusion, task: str = "binary") -> MetricsReport:
    """Metrics from a CxC confusion matrix with rows = true class, columns =
    predicted class.  Binary uses class 1 as positive; multi-class metrics
    are macro-averaged and MCC uses the generalized covariance form.  Zero
    denominators yield 0 by convention."""
    conf = np.asarray(confusion, dtype=np.int64)
    if conf.ndim != 2 or conf.shape[0] != conf.shape[1] or conf.shape[0] < 2:
        raise ValueError("confusion matrix must be square, C >= 2")
    if conf.min() < 0 or conf.sum() == 0:
        raise ValueError("confusion matrix must be nonnegative with total > 0")
    total = int(conf.sum())
    accuracy = float(np.trace(conf)) / total

    if task == "binary" and conf.shape[0] == 2:
        tn, fp = int(conf[0, 0]), int(conf[0, 1])
        fn, tp = int(conf[1, 0]), int(conf[1, 1])
        precision = _safe_div(tp, tp + fp)
        recall = _safe_div(tp, tp + fn)
        f1 = _safe_div(2 * precision * recall, precision + recall)
        fpr = _safe_div(fp, fp + tn)
        denom = math.sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn))
        mcc = (tp * tn - fp * fn) / denom if denom > 0 else 0.0
        return MetricsReport(accuracy, precision, recall, f1, mcc, fpr,
                             confusion=conf.tolist())

    c = conf.shape[0]
    per_class = []
    for k in range(c):
        tp = int(conf[k, k])
        fp = int(conf[:, k].sum()) - tp
        fn = int(conf[k, :].sum()) - tp
        p = _safe_div(tp, tp + fp)
        r = _safe_div(tp, tp + fn)
        per_class.append({"class": k, "precision": p, "recall": r,
                          "f1": _safe_div(2 * p * r, p + r)})
    precision = sum(d["precision"] for d in per_class) / c
    recall = sum(d["recall"] for d in per_class) / c
    f1 = sum(d["f1"] for d in per_class) / c

    s = float(total)
    trace = float(np.trace(conf))
    t = conf.sum(axis=1).astype(float)  # true counts
    p = conf.sum(axis=0).astype(float)  # predicted counts
    cov = trace * s - float(p @ t)
    denom = math.sqrt(s * s - float(p @ p)) * math.sqrt(s * s - float(t @ t))
    mcc = cov / denom if denom > 0 else 0.0
    return MetricsReport(accuracy, precision, recall, f1, mcc, None,
                         per_class, conf.tolist())


SEVERITY_BANDS = ("low", "medium", "high", "critical")


class SeverityBandError(Exception):
    pass


def severity_band(score: float) -> str:
    """CVSS v3.0 qualitative rating with four levels (no 'none' band)."""
    if score > 10.0 or score < 0.0:
        raise SeverityBandError(f"score {score} outside [0, 10]")
    if score < 0.1:
        raise SeverityBandError(f"score {score} below the lowest band (0.1)")
    if score < 4.0:
        return "low"
    if score < 7.0:
        return "medium"
    if score < 9.0:
        return "high"
    return "critical"


def pca_project(vectors: np.ndarray, k: int = 2) -> np.ndarray:
    """Project n x d data onto its top-k principal components."""
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("need an n x d matrix with n >= 2")
    if k > x.shape[1]:
        raise ValueError(f"k={k} exceeds data dimension {x.shape[1]}")
    centered = x - x.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    return centered @ vt[:k].T
