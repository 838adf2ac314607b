"""One-class and two-class kNN and RBF-SVM scorers behind one interface.

Every trained model exposes a real-valued score where higher means more
fall-like.  kNN scoring works on raw feature vectors with Euclidean
distance; SVM training standardizes features with training statistics and
solves its dual problem with a pairwise coordinate (SMO-style) solver
written here.
"""

import enum
import json
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConvergenceWarning,
    DegenerateLabels,
    DimensionError,
    InsufficientData,
    InvalidK,
    InvalidNu,
)
from .ingest import Label

DEFAULT_K_GRID = tuple(range(1, 11))
DEFAULT_C_GRID = (0.1, 1.0, 10.0, 100.0)
DEFAULT_GAMMA_GRID = ("auto", 0.01, 0.1, 1.0)
DEFAULT_NU_GRID = (0.01, 0.05, 0.1, 0.2)

SVM_TOL = 1e-3
_SV_EPS = 1e-12
_CACHE_BUDGET_BYTES = 2e8


class Variant(enum.Enum):
    OC_KNN = "OC_KNN"
    TC_KNN = "TC_KNN"
    OC_SVM = "OC_SVM"
    TC_SVM = "TC_SVM"


def _as_matrix(vectors):
    m = np.asarray(vectors, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] == 0:
        raise DimensionError(f"expected a non-empty 2-d matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise DimensionError("training vectors must be finite")
    return m


def _label_strings(labels):
    out = []
    for lab in labels:
        out.append(lab.value if isinstance(lab, Label) else str(lab))
    arr = np.asarray(out)
    bad = set(arr.tolist()) - {"ADL", "FALL"}
    if bad:
        raise ValueError(f"unknown labels {sorted(bad)}")
    return arr


# ---------------------------------------------------------------------------
# Nearest-neighbour machinery


def _distances_to_all(train, query):
    # The one Euclidean kernel every kNN path shares, so results agree
    # bit for bit regardless of how the k smallest are then selected.
    return np.sqrt(((train - query) ** 2).sum(axis=1))


def knn_bruteforce_oracle(train, query, k):
    """Sorted k smallest Euclidean distances by exhaustive scan and full sort."""
    train = _as_matrix(train)
    d = _distances_to_all(train, np.asarray(query, dtype=np.float64))
    return np.sort(d)[:k]


def _k_smallest_sorted(train, query, k):
    # Production path: partial selection, then sort the selected k.
    d = _distances_to_all(train, query)
    if k < len(d):
        d = d[np.argpartition(d, k - 1)[:k]]
    return np.sort(d)


def _prefix_mean(sorted_d, k):
    return float(sorted_d[:k].sum() / k)


def knn_mean_distance(train, query, k):
    """Mean distance from query to its k nearest rows of train."""
    if k > len(train):
        raise InvalidK(f"k={k} exceeds {len(train)} training vectors")
    return _prefix_mean(_k_smallest_sorted(train, query, k), k)


def knn_mean_distances_all_k(train, queries, k_max):
    """Matrix of mean-of-k-nearest distances for every k in 1..k_max.

    Shares one distance computation per query across the whole k grid;
    entry [q, k-1] equals knn_mean_distance(train, queries[q], k) exactly.
    """
    train = _as_matrix(train)
    if k_max > len(train):
        raise InvalidK(f"k_max={k_max} exceeds {len(train)} training vectors")
    queries = np.asarray(queries, dtype=np.float64)
    out = np.empty((len(queries), k_max))
    for qi, q in enumerate(queries):
        sd = _k_smallest_sorted(train, q, k_max)
        for k in range(1, k_max + 1):
            out[qi, k - 1] = _prefix_mean(sd, k)
    return out


@dataclass
class KnnModel:
    k: int
    train_vectors: np.ndarray
    train_labels: np.ndarray | None = None

    def __post_init__(self):
        self.train_vectors = _as_matrix(self.train_vectors)
        if self.train_labels is not None:
            self.train_labels = np.asarray(self.train_labels)


@dataclass
class SvmModel:
    gamma: float
    alpha: np.ndarray
    support_vectors: np.ndarray
    bias: float
    support_labels: np.ndarray | None = None  # +-1 per SV, two-class only
    C: float | None = None
    nu: float | None = None
    mean: np.ndarray | None = None
    scale: np.ndarray | None = None

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=np.float64)
        self.support_vectors = np.asarray(self.support_vectors, dtype=np.float64)
        if self.support_labels is not None:
            self.support_labels = np.asarray(self.support_labels, dtype=np.float64)
        if self.mean is not None:
            self.mean = np.asarray(self.mean, dtype=np.float64)
        if self.scale is not None:
            self.scale = np.asarray(self.scale, dtype=np.float64)


@dataclass
class TrainedModel:
    variant: Variant
    parameters: object
    training_summary: dict

    @property
    def dim(self):
        p = self.parameters
        if isinstance(p, KnnModel):
            return p.train_vectors.shape[1]
        return p.support_vectors.shape[1]

    def score(self, vector):
        return float(score_batch(self, np.asarray(vector, dtype=np.float64)[None, :])[0])


def train_oc_knn(adl_vectors, k):
    """One-class kNN: score is the mean distance to the k nearest ADL vectors."""
    train = _as_matrix(adl_vectors)
    k = int(k)
    if not 1 <= k <= len(train):
        raise InvalidK(f"k={k} needs 1 <= k <= {len(train)} training vectors")
    params = KnnModel(k=k, train_vectors=train)
    summary = {"variant": "OC_KNN", "k": k, "counts": {"ADL": len(train), "FALL": 0}}
    return TrainedModel(Variant.OC_KNN, params, summary)


def train_tc_knn(vectors, labels, k):
    """Two-class kNN: score = dA / (dA + dF) over mean k-nearest distances."""
    train = _as_matrix(vectors)
    labs = _label_strings(labels)
    if len(labs) != len(train):
        raise DimensionError("labels and vectors must correspond one to one")
    k = int(k)
    n_adl = int((labs == "ADL").sum())
    n_fall = int((labs == "FALL").sum())
    if k < 1 or k > min(n_adl, n_fall):
        raise InvalidK(f"k={k} needs 1 <= k <= per-class count (ADL {n_adl}, FALL {n_fall})")
    params = KnnModel(k=k, train_vectors=train, train_labels=labs)
    summary = {"variant": "TC_KNN", "k": k, "counts": {"ADL": n_adl, "FALL": n_fall}}
    return TrainedModel(Variant.TC_KNN, params, summary)


# ---------------------------------------------------------------------------
# SVM: standardization, kernel, and the pairwise dual solver


def standardize_fit(matrix):
    """Per-feature mean and deviation; constant features get scale 1."""
    matrix = _as_matrix(matrix)
    mean = matrix.mean(axis=0)
    scale = matrix.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    return mean, scale


def standardize_apply(matrix, mean, scale):
    return (np.asarray(matrix, dtype=np.float64) - mean) / scale


def resolve_gamma(gamma, standardized):
    """Turn the "auto" sentinel into 1 / (dim * mean feature variance)."""
    if gamma == "auto":
        d = standardized.shape[1]
        var = float(standardized.var(axis=0).mean())
        if var <= 0:
            var = 1.0
        return 1.0 / (d * var)
    gamma = float(gamma)
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    return gamma


def _rbf_to_rows(gamma, rows, query):
    d2 = ((rows - query) ** 2).sum(axis=1)
    return np.exp(-gamma * d2)


def _solve_pairwise_dual(X, y, box, alpha, p, gamma, tol, max_iter):
    """Minimize 1/2 a'Qa + p'a s.t. 0 <= a <= box, sum(a*y) fixed.

    Q_ij = y_i y_j K_ij with the RBF kernel over rows of X.  Works the
    maximal violating pair each iteration (first-order selection) and stops
    when the duality-gap surrogate m(a) - M(a) drops to tol.  Returns the
    multipliers, the bias estimate in violation units, and run stats.
    """
    m = len(y)
    sq = (X * X).sum(axis=1)
    cache = {}
    cache_cap = max(2, int(_CACHE_BUDGET_BYTES / (8 * m)))

    def kcol(i):
        col = cache.get(i)
        if col is None:
            d2 = sq + sq[i] - 2.0 * (X @ X[i])
            np.maximum(d2, 0.0, out=d2)
            col = np.exp(-gamma * d2)
            if len(cache) >= cache_cap:
                cache.pop(next(iter(cache)))
            cache[i] = col
        return col

    G = p.astype(np.float64).copy()
    for j in np.flatnonzero(alpha):
        G += (alpha[j] * y[j]) * (y * kcol(j))

    iterations = 0
    converged = False
    gap = np.inf
    while True:
        s = -y * G
        up = ((y > 0) & (alpha < box)) | ((y < 0) & (alpha > 0))
        low = ((y < 0) & (alpha < box)) | ((y > 0) & (alpha > 0))
        lo = np.max(s[up]) if up.any() else -np.inf
        hi = np.min(s[low]) if low.any() else np.inf
        gap = lo - hi
        if gap <= tol:
            converged = True
            break
        if iterations >= max_iter:
            break
        i = int(np.argmax(np.where(up, s, -np.inf)))
        j = int(np.argmin(np.where(low, s, np.inf)))

        ki = kcol(i)
        kj = kcol(j)
        eta = ki[i] + kj[j] - 2.0 * ki[j]
        if eta <= _SV_EPS:
            eta = _SV_EPS
        t = (s[i] - s[j]) / eta
        # largest step keeping both multipliers inside their boxes
        room_i = box[i] - alpha[i] if y[i] > 0 else alpha[i]
        room_j = alpha[j] if y[j] > 0 else box[j] - alpha[j]
        t = min(t, room_i, room_j)

        old_i, old_j = alpha[i], alpha[j]
        alpha[i] = min(max(old_i + y[i] * t, 0.0), box[i])
        alpha[j] = min(max(old_j - y[j] * t, 0.0), box[j])
        d_i = alpha[i] - old_i
        d_j = alpha[j] - old_j
        G += y * (d_i * y[i] * ki + d_j * y[j] * kj)
        iterations += 1

    s = -y * G
    free = (alpha > 0) & (alpha < box)
    if free.any():
        bias = float(s[free].mean())
    else:
        finite = [v for v in (lo, hi) if np.isfinite(v)]
        bias = float(np.mean(finite)) if finite else 0.0
    return alpha, bias, iterations, converged, float(gap), float(lo), float(hi)


def train_tc_svm(vectors, labels, C, gamma="auto", tol=SVM_TOL, max_iter=None):
    """Soft-margin RBF SVM on both classes; score is the decision value.

    FALL maps to y = +1, so the raw decision value is already oriented
    with fall-likeness.  Features are z-scored with training statistics.
    """
    X = _as_matrix(vectors)
    labs = _label_strings(labels)
    if len(labs) != len(X):
        raise DimensionError("labels and vectors must correspond one to one")
    n_fall = int((labs == "FALL").sum())
    n_adl = len(labs) - n_fall
    if n_adl == 0 or n_fall == 0:
        raise DegenerateLabels("two-class training needs both ADL and FALL instances")
    C = float(C)
    if C <= 0:
        raise ValueError("C must be positive")

    mean, scale = standardize_fit(X)
    Xs = standardize_apply(X, mean, scale)
    gamma = resolve_gamma(gamma, Xs)
    m = len(Xs)
    y = np.where(labs == "FALL", 1.0, -1.0)
    if max_iter is None:
        max_iter = 10 * m
    alpha, bias, iters, converged, gap, _, _ = _solve_pairwise_dual(
        Xs,
        y,
        box=np.full(m, C),
        alpha=np.zeros(m),
        p=-np.ones(m),
        gamma=gamma,
        tol=tol,
        max_iter=max_iter,
    )
    if not converged:
        warnings.warn(
            f"pairwise solver stopped at {iters} iterations with gap {gap:.3g}",
            ConvergenceWarning,
        )
    keep = alpha > _SV_EPS
    params = SvmModel(
        gamma=gamma,
        alpha=alpha[keep],
        support_vectors=Xs[keep],
        support_labels=y[keep],
        bias=bias,
        C=C,
        mean=mean,
        scale=scale,
    )
    summary = {
        "variant": "TC_SVM",
        "counts": {"ADL": n_adl, "FALL": n_fall},
        "C": C,
        "gamma": gamma,
        "standardized": True,
        "support_vectors": int(keep.sum()),
        "iterations": iters,
        "converged": converged,
        "gap": gap,
    }
    return TrainedModel(Variant.TC_SVM, params, summary)


def train_oc_svm(adl_vectors, nu, gamma="auto", tol=SVM_TOL, max_iter=None):
    """One-class RBF SVM on ADL data; score = rho - sum(alpha_i K(sv_i, v)).

    Positive scores mark points outside the learned support region, so the
    score grows with anomalousness.  Multipliers start uniform at 1/m,
    which keeps fully symmetric problems at the symmetric solution.  rho
    sits at the conservative edge of the solver's stopping interval, so
    only at-bound training vectors can score positive and the training
    outlier fraction stays below nu.
    """
    X = _as_matrix(adl_vectors)
    nu = float(nu)
    if not 0 < nu <= 1:
        raise InvalidNu(f"nu must lie in (0, 1], got {nu}")
    m = len(X)
    if m < 2:
        raise InsufficientData("one-class SVM needs at least 2 vectors")

    mean, scale = standardize_fit(X)
    Xs = standardize_apply(X, mean, scale)
    gamma = resolve_gamma(gamma, Xs)
    if max_iter is None:
        max_iter = 10 * m
    upper = 1.0 / (nu * m)
    alpha, bias, iters, converged, gap, lo, hi = _solve_pairwise_dual(
        Xs,
        np.ones(m),
        box=np.full(m, upper),
        alpha=np.full(m, 1.0 / m),
        p=np.zeros(m),
        gamma=gamma,
        tol=tol,
        max_iter=max_iter,
    )
    if not converged:
        warnings.warn(
            f"pairwise solver stopped at {iters} iterations with gap {gap:.3g}",
            ConvergenceWarning,
        )
    # Any offset inside the solver's stopping interval satisfies the
    # optimality conditions at tolerance.  Take the edge where no point
    # still free to grow its multiplier scores positive: outliers are then
    # always a subset of the at-bound vectors, whose count nu caps.
    if np.isfinite(lo):
        rho = -lo
    elif np.isfinite(hi):
        rho = -hi
    else:
        rho = 0.0
    keep = alpha > _SV_EPS
    params = SvmModel(
        gamma=gamma,
        alpha=alpha[keep],
        support_vectors=Xs[keep],
        bias=rho,
        nu=nu,
        mean=mean,
        scale=scale,
    )
    summary = {
        "variant": "OC_SVM",
        "counts": {"ADL": m, "FALL": 0},
        "nu": nu,
        "gamma": gamma,
        "standardized": True,
        "support_vectors": int(keep.sum()),
        "iterations": iters,
        "converged": converged,
        "gap": gap,
    }
    return TrainedModel(Variant.OC_SVM, params, summary)


def score_batch(model, vectors):
    """Score each row of vectors under the model's variant definition."""
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.size == 0:
        return np.empty(0)
    if vectors.ndim != 2:
        raise DimensionError(f"expected a 2-d batch, got shape {vectors.shape}")
    if vectors.shape[1] != model.dim:
        raise DimensionError(
            f"query dimension {vectors.shape[1]} does not match training dimension {model.dim}"
        )
    p = model.parameters
    out = np.empty(len(vectors))
    if model.variant is Variant.OC_KNN:
        for i, q in enumerate(vectors):
            out[i] = knn_mean_distance(p.train_vectors, q, p.k)
    elif model.variant is Variant.TC_KNN:
        adl = p.train_vectors[p.train_labels == "ADL"]
        fall = p.train_vectors[p.train_labels == "FALL"]
        for i, q in enumerate(vectors):
            da = knn_mean_distance(adl, q, p.k)
            df = knn_mean_distance(fall, q, p.k)
            out[i] = 0.5 if da + df == 0 else da / (da + df)
    elif model.variant is Variant.TC_SVM:
        qs = standardize_apply(vectors, p.mean, p.scale)
        coef = p.alpha * p.support_labels
        for i, q in enumerate(qs):
            out[i] = coef @ _rbf_to_rows(p.gamma, p.support_vectors, q) + p.bias
    elif model.variant is Variant.OC_SVM:
        qs = standardize_apply(vectors, p.mean, p.scale)
        for i, q in enumerate(qs):
            out[i] = p.bias - p.alpha @ _rbf_to_rows(p.gamma, p.support_vectors, q)
    else:
        raise ValueError(f"unknown variant {model.variant!r}")
    return out


# ---------------------------------------------------------------------------
# Serialization


def model_to_dict(model):
    """JSON-ready description sufficient to reproduce scores exactly."""
    p = model.parameters
    if isinstance(p, KnnModel):
        params = {
            "k": p.k,
            "train_vectors": p.train_vectors.tolist(),
            "train_labels": None if p.train_labels is None else p.train_labels.tolist(),
        }
    else:
        params = {
            "gamma": p.gamma,
            "alpha": p.alpha.tolist(),
            "support_vectors": p.support_vectors.tolist(),
            "support_labels": None if p.support_labels is None else p.support_labels.tolist(),
            "bias": p.bias,
            "C": p.C,
            "nu": p.nu,
            "mean": p.mean.tolist(),
            "scale": p.scale.tolist(),
        }
    return {
        "variant": model.variant.value,
        "training_summary": model.training_summary,
        "parameters": params,
    }


def model_from_dict(doc):
    variant = Variant(doc["variant"])
    raw = doc["parameters"]
    if variant in (Variant.OC_KNN, Variant.TC_KNN):
        labels = raw["train_labels"]
        params = KnnModel(
            k=int(raw["k"]),
            train_vectors=np.asarray(raw["train_vectors"], dtype=np.float64),
            train_labels=None if labels is None else np.asarray(labels),
        )
    else:
        labels = raw["support_labels"]
        params = SvmModel(
            gamma=float(raw["gamma"]),
            alpha=np.asarray(raw["alpha"], dtype=np.float64),
            support_vectors=np.asarray(raw["support_vectors"], dtype=np.float64),
            support_labels=None if labels is None else np.asarray(labels, dtype=np.float64),
            bias=float(raw["bias"]),
            C=None if raw["C"] is None else float(raw["C"]),
            nu=None if raw["nu"] is None else float(raw["nu"]),
            mean=np.asarray(raw["mean"], dtype=np.float64),
            scale=np.asarray(raw["scale"], dtype=np.float64),
        )
    return TrainedModel(variant, params, dict(doc.get("training_summary", {})))


def save_model(model, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path):
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
