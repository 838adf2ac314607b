"""ROC analysis and nested cross-validation orchestration.

A fold's scores become a threshold-swept ROC curve; fold curves are
vertically averaged on a fixed grid, and the reported operating point
maximizes the geometric mean of sensitivity and specificity on that
averaged curve.  Hyperparameters are chosen per outer fold by an inner
cross-validation that never sees the outer test split.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import classifiers
from .classifiers import (
    DEFAULT_C_GRID,
    DEFAULT_GAMMA_GRID,
    DEFAULT_K_GRID,
    DEFAULT_NU_GRID,
    SVM_TOL,
    Variant,
    score_batch,
)
from .errors import (
    ConvergenceWarning,
    DegenerateLabels,
    FalldetectError,
    InsufficientData,
    InvalidK,
)
from .features import FeatureKind, LtpParams, extract_matrix
from .ingest import Label, plan_folds, window_at_length, _atomic_write_text

ROC_GRID_POINTS = 1001
_STREAM_INNER = 303


def _positive_mask(labels):
    out = np.empty(len(labels), dtype=bool)
    for i, lab in enumerate(labels):
        val = lab.value if isinstance(lab, Label) else str(lab)
        if val not in ("ADL", "FALL"):
            raise ValueError(f"unknown label {val!r}")
        out[i] = val == "FALL"
    return out


@dataclass
class RocCurve:
    """Threshold-swept (FPR, TPR) points; FALL is the positive class."""

    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    positive_class: str = "FALL"

    def __post_init__(self):
        self.fpr = np.asarray(self.fpr, dtype=np.float64)
        self.tpr = np.asarray(self.tpr, dtype=np.float64)
        self.thresholds = np.asarray(self.thresholds, dtype=np.float64)
        if not (len(self.fpr) == len(self.tpr) == len(self.thresholds)) or len(self.fpr) == 0:
            raise ValueError("fpr, tpr, thresholds must be non-empty and equally long")
        if np.any(np.diff(self.fpr) < 0) or np.any(np.diff(self.tpr) < 0):
            raise ValueError("fpr and tpr must be non-decreasing along the sweep")
        if self.fpr[0] != 0.0 or self.fpr[-1] != 1.0:
            raise ValueError("curve must span FPR 0 through 1")
        for arr in (self.fpr, self.tpr):
            if arr[0] < 0 or arr[-1] > 1:
                raise ValueError("rates must lie in [0, 1]")

    def __len__(self):
        return len(self.fpr)


def roc_curve(scores, labels):
    """Sweep "fall iff score >= t" over the distinct scores, high to low.

    Tied scores enter together, so the curve has one point per distinct
    threshold plus the (0, 0) start at t = +inf.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    pos = _positive_mask(labels)
    if len(pos) != len(scores):
        raise ValueError("scores and labels must correspond one to one")
    P = int(pos.sum())
    N = len(pos) - P
    if P == 0 or N == 0:
        raise DegenerateLabels(f"need both classes, got {P} positives and {N} negatives")

    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = pos[order]
    tp = np.cumsum(y)
    fp = np.cumsum(~y)
    # last index of every tie group = the state after the whole group enters
    group_end = np.flatnonzero(np.r_[np.diff(s) != 0, True])
    fpr = np.r_[0.0, fp[group_end] / N]
    tpr = np.r_[0.0, tp[group_end] / P]
    thresholds = np.r_[np.inf, s[group_end]]
    return RocCurve(fpr, tpr, thresholds)


def auc(curve):
    """Trapezoidal area under the curve over the FPR axis."""
    f, t = curve.fpr, curve.tpr
    return float(np.sum(np.diff(f) * (t[1:] + t[:-1]) / 2.0))


def pairwise_auc(scores, labels):
    """Mann-Whitney statistic: P(fall outscores ADL), ties counted half.

    Independent route to the same quantity as auc(roc_curve(...)); the two
    must agree to floating-point accuracy.
    """
    scores = np.asarray(scores, dtype=np.float64)
    pos = _positive_mask(labels)
    ps = scores[pos]
    ns = scores[~pos]
    if len(ps) == 0 or len(ns) == 0:
        raise DegenerateLabels("need both classes for a pair statistic")
    diff = ps[:, None] - ns[None, :]
    wins = np.count_nonzero(diff > 0)
    ties = np.count_nonzero(diff == 0)
    return (wins + 0.5 * ties) / (len(ps) * len(ns))


def _upper_envelope(curve):
    """Unique-FPR view keeping the highest TPR at each FPR value."""
    keep = np.flatnonzero(np.r_[np.diff(curve.fpr) != 0, True])
    f = curve.fpr[keep]
    t = curve.tpr[keep]
    th = curve.thresholds[keep].copy()
    finite = np.isfinite(th)
    if not finite.all():
        th[~finite] = th[finite].max() if finite.any() else 0.0
    return f, t, th


def roc_grid():
    return np.arange(ROC_GRID_POINTS) / (ROC_GRID_POINTS - 1.0)


def average_roc(curves):
    """Vertical averaging: mean TPR at each of 1001 fixed FPR grid points.

    Each curve contributes its linearly interpolated TPR (and threshold,
    with the infinite endpoint clamped to the largest finite one) at every
    grid FPR; grid-point values are then averaged across curves.
    """
    curves = list(curves)
    if not curves:
        raise InsufficientData("need at least one curve to average")
    grid = roc_grid()
    tprs = np.empty((len(curves), len(grid)))
    thrs = np.empty((len(curves), len(grid)))
    for i, c in enumerate(curves):
        f, t, th = _upper_envelope(c)
        tprs[i] = np.interp(grid, f, t)
        thrs[i] = np.interp(grid, f, th)
    return RocCurve(grid, tprs.mean(axis=0), thrs.mean(axis=0))


@dataclass
class OperatingPoint:
    se: float
    sp: float
    threshold: float
    gm: float


def select_operating_point(curve):
    """Point of the curve maximizing sqrt(TPR * (1 - FPR)).

    Ties go to the higher sensitivity, then to the lower threshold.
    """
    se = curve.tpr
    sp = 1.0 - curve.fpr
    gm = np.sqrt(se * sp)
    # lexsort: last key is primary
    idx = int(np.lexsort((-curve.thresholds, se, gm))[-1])
    se_v = float(se[idx])
    sp_v = float(sp[idx])
    return OperatingPoint(
        se=se_v,
        sp=sp_v,
        threshold=float(curve.thresholds[idx]),
        gm=float(np.sqrt(se_v * sp_v)),
    )


@dataclass
class GridConfig:
    """Hyperparameter grids and solver knobs for nested cross-validation."""

    k_grid: tuple = DEFAULT_K_GRID
    c_grid: tuple = DEFAULT_C_GRID
    gamma_grid: tuple = DEFAULT_GAMMA_GRID
    nu_grid: tuple = DEFAULT_NU_GRID
    inner_folds: int = 10
    svm_tol: float = SVM_TOL
    svm_max_iter: int | None = None
    ltp_params: LtpParams | None = None

    def to_dict(self):
        ltp = self.ltp_params
        return {
            "k_grid": list(self.k_grid),
            "c_grid": list(self.c_grid),
            "gamma_grid": list(self.gamma_grid),
            "nu_grid": list(self.nu_grid),
            "inner_folds": self.inner_folds,
            "svm_tol": self.svm_tol,
            "svm_max_iter": self.svm_max_iter,
            "ltp_params": None
            if ltp is None
            else {
                "num_neighbours": ltp.num_neighbours,
                "step": ltp.step,
                "m_max": ltp.m_max,
            },
        }


@dataclass
class EvalReport:
    """Everything one experiment cell produced, fold by fold."""

    collection_id: str
    feature_kind: str
    window_len: int
    variant: str
    fold_aucs: list
    fold_params: list
    fold_test_indices: list
    mean_auc: float
    se: float
    sp: float
    gm: float
    threshold: float
    averaged_curve: RocCurve
    counts: dict
    seed: int
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("mean_auc", "se", "sp", "gm"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} = {v} outside [0, 1]")
        if abs(self.gm - float(np.sqrt(self.se * self.sp))) > 1e-12:
            raise ValueError("gm must equal sqrt(se * sp)")


def _inner_seed(outer_seed, fold):
    return int(np.random.default_rng([outer_seed, _STREAM_INNER, fold]).integers(2 ** 62))


def _usable_inner_folds(plan, labels, needs_tc_train):
    """Inner folds whose validation side has both classes (and, for
    two-class training, whose training side does too)."""
    folds = []
    pos = _positive_mask(labels)
    for g in range(plan.num_folds):
        val = plan.test_indices(g)
        tr = plan.train_indices(g)
        val_pos = pos[val]
        if not val_pos.any() or val_pos.all():
            continue
        if needs_tc_train:
            tr_pos = pos[tr]
            if not tr_pos.any() or tr_pos.all():
                continue
        folds.append(g)
    return folds


def _knn_scores_for_ks(variant, X_train, labels_train, X_val, ks):
    """Score matrix [query, k] for every k in ks, sharing distance work."""
    k_max = max(ks)
    if variant is Variant.OC_KNN:
        adl = X_train[~_positive_mask(labels_train)]
        means = classifiers.knn_mean_distances_all_k(adl, X_val, k_max)
        return {k: means[:, k - 1] for k in ks}
    pos = _positive_mask(labels_train)
    da = classifiers.knn_mean_distances_all_k(X_train[~pos], X_val, k_max)
    df = classifiers.knn_mean_distances_all_k(X_train[pos], X_val, k_max)
    out = {}
    for k in ks:
        a = da[:, k - 1]
        f = df[:, k - 1]
        tot = a + f
        scores = np.where(tot == 0, 0.5, a / np.where(tot == 0, 1.0, tot))
        out[k] = scores
    return out


def _select_k(variant, X, labels, cfg, seed):
    if len(cfg.k_grid) == 1:
        return cfg.k_grid[0], None
    pos = _positive_mask(labels)
    plan = plan_folds(list(labels), num_folds=cfg.inner_folds, seed=seed)
    usable = _usable_inner_folds(plan, labels, needs_tc_train=variant is Variant.TC_KNN)
    if not usable:
        raise InsufficientData("no inner fold has both classes in its validation split")
    # cap k by the smallest training-side class pool across usable folds
    cap = np.inf
    for g in usable:
        tr = plan.train_indices(g)
        n_adl = int((~pos[tr]).sum())
        n_fall = int(pos[tr].sum())
        cap = min(cap, n_adl if variant is Variant.OC_KNN else min(n_adl, n_fall))
    ks = [k for k in cfg.k_grid if k <= cap]
    if not ks:
        raise InvalidK(f"no k in {list(cfg.k_grid)} fits the inner training pools (cap {cap})")
    if len(ks) == 1:
        return ks[0], None
    sums = {k: 0.0 for k in ks}
    for g in usable:
        tr = plan.train_indices(g)
        val = plan.test_indices(g)
        scores_by_k = _knn_scores_for_ks(variant, X[tr], labels[tr], X[val], ks)
        for k in ks:
            sums[k] += auc(roc_curve(scores_by_k[k], labels[val]))
    best_k = max(ks, key=lambda k: (sums[k], -k))
    return best_k, sums[best_k] / len(usable)


def _train_svm(variant, X, labels, params, cfg):
    if variant is Variant.TC_SVM:
        return classifiers.train_tc_svm(
            X, labels, C=params[0], gamma=params[1], tol=cfg.svm_tol, max_iter=cfg.svm_max_iter
        )
    adl = X[~_positive_mask(labels)]
    return classifiers.train_oc_svm(
        adl, nu=params[0], gamma=params[1], tol=cfg.svm_tol, max_iter=cfg.svm_max_iter
    )


def _select_svm_params(variant, X, labels, cfg, seed):
    first = cfg.c_grid if variant is Variant.TC_SVM else cfg.nu_grid
    candidates = [(a, g) for a in first for g in cfg.gamma_grid]
    if len(candidates) == 1:
        return candidates[0], None
    plan = plan_folds(list(labels), num_folds=cfg.inner_folds, seed=seed)
    usable = _usable_inner_folds(plan, labels, needs_tc_train=variant is Variant.TC_SVM)
    if not usable:
        raise InsufficientData("no inner fold has both classes in its validation split")
    means = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        for cand in candidates:
            total = 0.0
            for g in usable:
                tr = plan.train_indices(g)
                val = plan.test_indices(g)
                model = _train_svm(variant, X[tr], labels[tr], cand, cfg)
                total += auc(roc_curve(score_batch(model, X[val]), labels[val]))
            means.append(total / len(usable))
    best = int(np.argmax(means))  # first best wins, fixed grid order
    return candidates[best], means[best]


def run_experiment(collection, feature_kind, window_len, variant, config=None):
    """Nested cross-validation for one (collection, feature, window, variant) cell.

    Per outer fold, an inner cross-validation over the outer-training split
    picks the hyperparameters with the best mean inner AUC; the winner is
    retrained on the whole outer-training split (ADL only for one-class
    variants) and scored on the untouched outer test fold.  Fold curves are
    averaged and the operating point picked on the averaged curve.
    """
    cfg = config if config is not None else GridConfig()
    kind = FeatureKind(feature_kind) if not isinstance(feature_kind, FeatureKind) else feature_kind
    var = Variant(variant) if not isinstance(variant, Variant) else variant
    window_len = int(window_len)

    windows = [window_at_length(inst.window, window_len) for inst in collection.instances]
    X = extract_matrix(windows, kind, cfg.ltp_params)
    labels = np.array([inst.label.value for inst in collection.instances])
    pos = _positive_mask(labels)
    plan = collection.fold_plan

    curves = []
    fold_aucs = []
    fold_params = []
    fold_tests = []
    for f in range(plan.num_folds):
        try:
            test_idx = plan.test_indices(f)
            train_idx = plan.train_indices(f)
            Xtr, ltr = X[train_idx], labels[train_idx]
            seed_f = _inner_seed(collection.seed, f)
            if var in (Variant.OC_KNN, Variant.TC_KNN):
                k, inner_auc = _select_k(var, Xtr, ltr, cfg, seed_f)
                if var is Variant.OC_KNN:
                    model = classifiers.train_oc_knn(Xtr[~pos[train_idx]], k)
                else:
                    model = classifiers.train_tc_knn(Xtr, ltr, k)
                chosen = {"k": k}
            else:
                params, inner_auc = _select_svm_params(var, Xtr, ltr, cfg, seed_f)
                model = _train_svm(var, Xtr, ltr, params, cfg)
                key = "C" if var is Variant.TC_SVM else "nu"
                chosen = {
                    key: params[0],
                    "gamma": params[1],
                    "gamma_resolved": model.training_summary["gamma"],
                    "converged": model.training_summary["converged"],
                    "iterations": model.training_summary["iterations"],
                }
            scores = score_batch(model, X[test_idx])
            curve = roc_curve(scores, labels[test_idx])
            curves.append(curve)
            fold_aucs.append(auc(curve))
            chosen["inner_mean_auc"] = inner_auc
            fold_params.append(chosen)
            fold_tests.append([int(i) for i in test_idx])
        except FalldetectError as exc:
            raise type(exc)(f"outer fold {f}: {exc}") from exc

    averaged = average_roc(curves)
    op = select_operating_point(averaged)
    counts = {"ADL": int((~pos).sum()), "FALL": int(pos.sum())}
    return EvalReport(
        collection_id=collection.id,
        feature_kind=kind.value,
        window_len=window_len,
        variant=var.value,
        fold_aucs=[float(a) for a in fold_aucs],
        fold_params=fold_params,
        fold_test_indices=fold_tests,
        mean_auc=float(np.mean(fold_aucs)),
        se=op.se,
        sp=op.sp,
        gm=op.gm,
        threshold=op.threshold,
        averaged_curve=averaged,
        counts=counts,
        seed=collection.seed,
        config=cfg.to_dict(),
    )


# ---------------------------------------------------------------------------
# Report serialization


def report_to_dict(report):
    return {
        "collection_id": report.collection_id,
        "feature_kind": report.feature_kind,
        "window_len": report.window_len,
        "variant": report.variant,
        "fold_aucs": report.fold_aucs,
        "fold_params": report.fold_params,
        "fold_test_indices": report.fold_test_indices,
        "mean_auc": report.mean_auc,
        "se": report.se,
        "sp": report.sp,
        "gm": report.gm,
        "threshold": report.threshold,
        "counts": report.counts,
        "seed": report.seed,
        "config": report.config,
        "averaged_curve": {
            "fpr": report.averaged_curve.fpr.tolist(),
            "tpr": report.averaged_curve.tpr.tolist(),
            "thresholds": report.averaged_curve.thresholds.tolist(),
        },
    }


def report_from_dict(doc):
    curve = RocCurve(
        np.asarray(doc["averaged_curve"]["fpr"], dtype=np.float64),
        np.asarray(doc["averaged_curve"]["tpr"], dtype=np.float64),
        np.asarray(doc["averaged_curve"]["thresholds"], dtype=np.float64),
    )
    return EvalReport(
        collection_id=doc["collection_id"],
        feature_kind=doc["feature_kind"],
        window_len=int(doc["window_len"]),
        variant=doc["variant"],
        fold_aucs=[float(a) for a in doc["fold_aucs"]],
        fold_params=doc["fold_params"],
        fold_test_indices=doc["fold_test_indices"],
        mean_auc=float(doc["mean_auc"]),
        se=float(doc["se"]),
        sp=float(doc["sp"]),
        gm=float(doc["gm"]),
        threshold=float(doc["threshold"]),
        averaged_curve=curve,
        counts=doc["counts"],
        seed=int(doc["seed"]),
        config=doc.get("config", {}),
    )


def save_report_json(report, path):
    import json

    payload = json.dumps(report_to_dict(report), indent=2, sort_keys=True)
    _atomic_write_text(path, payload + "\n")


def write_roc_csv(curve, path):
    lines = ["fpr,tpr,threshold"]
    for f, t, th in zip(curve.fpr, curve.tpr, curve.thresholds):
        lines.append(f"{float(f)!r},{float(t)!r},{float(th)!r}")
    _atomic_write_text(path, "\n".join(lines) + "\n")


def summary_row(report):
    """One Table-style row: identifiers plus AUC, SE, SP, and their gm."""
    return {
        "collection": report.collection_id,
        "feature": report.feature_kind,
        "window": report.window_len,
        "classifier": report.variant,
        "auc": report.mean_auc,
        "se": report.se,
        "sp": report.sp,
        "gm": report.gm,
    }
