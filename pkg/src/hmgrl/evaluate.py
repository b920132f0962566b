"""Fold generation for the three prediction settings and the six metrics.

Setting 1 partitions interactions; settings 2 and 3 partition drugs, so the
held-out fold contains cold-start drugs. Metrics: curve areas micro-averaged
one-vs-rest (flag for macro), accuracy micro, F1/precision/recall macro over
classes present in the labels. Ties in ranking use midranks.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, ValidationError


@dataclass
class Fold:
    train: list       # index triples (u, v, r)
    test: list
    new_drugs: set = field(default_factory=set)  # empty for task 1


@dataclass
class SplitPlan:
    task: int
    n_folds: int
    seed: int
    folds: list


def make_splits(triples, n_drugs: int, task: int, n_folds: int = 5,
                seed: int = 0) -> SplitPlan:
    """Deterministic fold plan.

    Task 1: interactions are shuffled and partitioned; each fold tests on its
    share and trains on the rest. Tasks 2/3: drugs are partitioned; the held
    fold's drugs are "new". Train = interactions between known drugs (same
    set for both tasks); task 2 tests interactions with exactly one new drug,
    task 3 those with two.
    """
    if task not in (1, 2, 3):
        raise ParameterError(f"task must be 1, 2 or 3, got {task}")
    if n_folds < 2:
        raise ParameterError(f"need at least 2 folds, got {n_folds}")
    triples = list(triples)
    rng = np.random.default_rng(seed)
    folds = []
    if task == 1:
        order = rng.permutation(len(triples))
        shares = np.array_split(order, n_folds)
        for i in range(n_folds):
            test_idx = set(shares[i].tolist())
            fold = Fold(
                train=[triples[j] for j in range(len(triples)) if j not in test_idx],
                test=[triples[j] for j in sorted(test_idx)],
            )
            folds.append(fold)
    else:
        drug_order = rng.permutation(n_drugs)
        drug_shares = np.array_split(drug_order, n_folds)
        for i in range(n_folds):
            new_drugs = set(drug_shares[i].tolist())
            train = [t for t in triples
                     if t[0] not in new_drugs and t[1] not in new_drugs]
            if task == 2:
                test = [t for t in triples
                        if (t[0] in new_drugs) != (t[1] in new_drugs)]
            else:
                test = [t for t in triples
                        if t[0] in new_drugs and t[1] in new_drugs]
            if not test:
                warnings.warn(f"fold {i}: no test interactions for task {task}")
            folds.append(Fold(train=train, test=test, new_drugs=new_drugs))
    return SplitPlan(task=task, n_folds=n_folds, seed=seed, folds=folds)


@dataclass
class MetricReport:
    aupr: float
    auc: float
    acc: float
    f1: float
    precision: float
    recall: float
    averaging: str = "micro-curves/macro-prf"
    skipped_classes: tuple = ()

    def as_dict(self) -> dict:
        return {
            "AUPR": self.aupr, "AUC": self.auc, "ACC": self.acc,
            "F1": self.f1, "Precision": self.precision, "Recall": self.recall,
            "averaging": self.averaging,
            "skipped_classes": list(self.skipped_classes),
        }


def _binary_auc_midrank(scores: np.ndarray, positives: np.ndarray) -> float:
    """Mann-Whitney statistic with midranks for ties."""
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores))
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0  # midrank, 1-based
        i = j + 1
    n_pos = int(positives.sum())
    n_neg = len(scores) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValidationError("AUC undefined without both classes")
    rank_sum = ranks[positives].sum()
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def _binary_aupr(scores: np.ndarray, positives: np.ndarray) -> float:
    """Step integration of the precision-recall curve at distinct-score
    thresholds, sweeping scores in descending order with tie groups."""
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    p = positives[order]
    n_pos = int(p.sum())
    if n_pos == 0:
        raise ValidationError("AUPR undefined without positives")
    area = 0.0
    tp = fp = 0
    prev_recall = 0.0
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and s[j + 1] == s[i]:
            j += 1
        tp += int(p[i:j + 1].sum())
        fp += (j - i + 1) - int(p[i:j + 1].sum())
        recall = tp / n_pos
        precision = tp / (tp + fp)
        area += (recall - prev_recall) * precision
        prev_recall = recall
        i = j + 1
    return area


def compute_metrics(scores: np.ndarray, labels: np.ndarray,
                    macro_curves: bool = False) -> MetricReport:
    """Six metrics from K x R probability rows and K x R one-hot labels.

    Curve areas are computed one-vs-rest: micro (flattened) by default,
    per-class macro with `macro_curves`. Classes absent from the labels are
    skipped in macro averages and reported.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if scores.shape != labels.shape or scores.ndim != 2:
        raise ValidationError(f"scores {scores.shape} vs labels {labels.shape}")
    k, r = scores.shape
    true_class = labels.argmax(axis=1)
    pred_class = scores.argmax(axis=1)

    present = sorted(set(true_class.tolist()))
    skipped = tuple(c for c in range(r) if c not in present)

    if macro_curves:
        aucs, auprs, curve_skipped = [], [], []
        for c in present:
            pos = true_class == c
            if pos.all() or not pos.any():
                curve_skipped.append(c)
                continue
            aucs.append(_binary_auc_midrank(scores[:, c], pos))
            auprs.append(_binary_aupr(scores[:, c], pos))
        if not aucs:
            raise ValidationError("macro curves undefined: single-class labels")
        if curve_skipped:
            warnings.warn(f"macro curves skipped single-class events {curve_skipped}")
        auc = float(np.mean(aucs))
        aupr = float(np.mean(auprs))
        averaging = "macro-curves/macro-prf"
    else:
        flat_scores = scores.ravel()
        flat_pos = labels.ravel() > 0.5
        auc = _binary_auc_midrank(flat_scores, flat_pos)
        aupr = _binary_aupr(flat_scores, flat_pos)
        averaging = "micro-curves/macro-prf"

    acc = float((pred_class == true_class).mean())

    precisions, recalls, f1s = [], [], []
    for c in present:
        tp = int(((pred_class == c) & (true_class == c)).sum())
        fp = int(((pred_class == c) & (true_class != c)).sum())
        fn = int(((pred_class != c) & (true_class == c)).sum())
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        precisions.append(prec)
        recalls.append(rec)
        f1s.append(f1)

    return MetricReport(
        aupr=float(aupr), auc=float(auc), acc=acc,
        f1=float(np.mean(f1s)), precision=float(np.mean(precisions)),
        recall=float(np.mean(recalls)),
        averaging=averaging, skipped_classes=skipped,
    )


def summarize_reports(reports) -> dict:
    """Per-fold rows plus mean and standard deviation per metric."""
    keys = ("AUPR", "AUC", "ACC", "F1", "Precision", "Recall")
    rows = [r.as_dict() for r in reports]
    summary = {}
    for key in keys:
        vals = np.array([row[key] for row in rows])
        summary[key] = {"mean": float(vals.mean()), "std": float(vals.std())}
    return {"folds": rows, "summary": summary}
