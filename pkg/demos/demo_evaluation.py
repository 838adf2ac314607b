"""Build ROC curves by hand, confirm the two AUC routes agree, and pick the
balanced operating point the experiments report.
"""

import numpy as np

from falldetect.evaluation import (
    auc,
    average_roc,
    pairwise_auc,
    roc_curve,
    select_operating_point,
)

# A small score set with a deliberate tie between one fall and one ADL.
scores = np.array([3.1, 2.0, 2.0, 1.2, 0.4, -0.3])
labels = ["FALL", "FALL", "ADL", "FALL", "ADL", "ADL"]

curve = roc_curve(scores, labels)
print("thresholds:", curve.thresholds)
print("fpr:       ", curve.fpr)
print("tpr:       ", curve.tpr)

# Trapezoid under the staircase and the rank statistic over all
# fall/ADL pairs are the same number, ties counted half.
print(f"auc trapezoid {auc(curve):.6f}  pairwise {pairwise_auc(scores, labels):.6f}")

# Fold curves are averaged vertically on a common grid before reading off
# a single operating point.  Simulate three folds of one noisy detector.
rng = np.random.default_rng(8)
curves = []
for fold in range(3):
    fall_scores = rng.normal(1.5, 1.0, 30)
    adl_scores = rng.normal(0.0, 1.0, 70)
    s = np.concatenate([fall_scores, adl_scores])
    l = ["FALL"] * 30 + ["ADL"] * 70
    curves.append(roc_curve(s, l))
    print(f"fold {fold}: auc {auc(curves[-1]):.3f}")

avg = average_roc(curves)
print(f"averaged curve: {len(avg.fpr)} grid points, auc {auc(avg):.3f}")

op = select_operating_point(avg)
print(f"balanced operating point: SE {op.se:.3f} SP {op.sp:.3f} "
      f"gm {op.gm:.3f} at threshold {op.threshold:.3f}")
