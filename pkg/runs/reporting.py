# runs/reporting.py
import numpy as np
from django.template.loader import render_to_string

from tasks.exceptions import DimensionMismatch


def top1_accuracy(predictions, truth):
    predictions, truth = np.asarray(predictions), np.asarray(truth)
    if predictions.shape != truth.shape:
        raise DimensionMismatch(f"{predictions.shape[0]} predictions for {truth.shape[0]} truth labels.")
    return float(np.mean(predictions == truth)) if truth.size else 0.0


def per_class_accuracy(predictions, truth):
    """[(class, n_samples, accuracy)] for every class present in the truth labels."""
    predictions, truth = np.asarray(predictions), np.asarray(truth)
    if predictions.shape != truth.shape:
        raise DimensionMismatch(f"{predictions.shape[0]} predictions for {truth.shape[0]} truth labels.")
    rows = []
    for k in np.unique(truth):
        mask = truth == k
        rows.append((int(k), int(mask.sum()), float(np.mean(predictions[mask] == k))))
    return rows


def fmt_accuracy(value):
    return None if value is None else f"{value:.4f}"


def render_run_summary(spec, state, mode, zero_shot_accuracy=None, transduced_accuracy=None,
                       gamma_scores=None, predictions_path=None):
    hyper = spec.hyper
    context = {
        'mode': mode,
        'n_query': spec.n_query,
        'n_support': spec.n_support,
        'n_classes': spec.n_classes,
        'dim': spec.query.dim,
        'tau': f"{spec.tau:g}",
        'lambda_weight': f"{hyper.lambda_weight:g}",
        'gamma': f"{hyper.gamma:g}",
        'outer_iters': hyper.outer_iters,
        'inner_z_iters': hyper.inner_z_iters,
        'k_nn': hyper.k_nn,
        'final_objective': f"{state.objective_trace[-1].update_consistent:.10g}",
        'descent_violations': state.descent_violations,
        'gamma_scores': [(f"{g:g}", fmt_accuracy(acc)) for g, acc in gamma_scores or []],
        'zero_shot_accuracy': fmt_accuracy(zero_shot_accuracy),
        'transduced_accuracy': fmt_accuracy(transduced_accuracy),
        'predictions_path': predictions_path,
    }
    return render_to_string('reports/run_summary.txt', context)


def render_eval_summary(accuracy, per_class):
    context = {
        'accuracy': fmt_accuracy(accuracy),
        'per_class': [(k, n, fmt_accuracy(acc)) for k, n, acc in per_class],
    }
    return render_to_string('reports/eval_summary.txt', context)


def render_ablation(rows):
    context = {'rows': [(setting, value, fmt_accuracy(acc)) for setting, value, acc in rows]}
    return render_to_string('reports/ablation.txt', context)
