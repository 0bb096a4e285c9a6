"""
Few-shot protocol: hold out validation shots, grid-search γ, solve.

A γ candidate is scored by a 1-nearest-neighbour rule: each validation shot
takes the transduced class of its cosine-nearest query sample.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import List, Optional, Tuple

import numpy as np

from inference.solver import run
from inference.zero_shot import hard_predict
from tasks.exceptions import EmptyGrid, InsufficientShots
from tasks.types import (
    DEFAULT_GAMMA_GRID, FEW_SHOT_LAMBDA, MAX_VALIDATION_SHOTS, EmbeddingMatrix, SupportSet,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ShotSplit:
    train: SupportSet
    validation: EmbeddingMatrix
    validation_labels: np.ndarray
    train_index: np.ndarray
    validation_index: np.ndarray  # into the pool when from_pool, else into the support
    from_pool: bool


@dataclass(frozen=True)
class FewShotResult:
    assignments: object
    state: object
    gamma: float
    scores: List[Tuple[float, float]]
    split: Optional[ShotSplit]

    @property
    def predictions(self):
        return hard_predict(self.assignments)


def validation_shot_count(shots_per_class):
    return min(MAX_VALIDATION_SHOTS, shots_per_class)


def split_shots(support, labels, shots_per_class, seed, n_classes=None, pool=None, pool_labels=None):
    """
    Pick min(4, shots_per_class) validation shots per class.

    With a validation pool the shots are drawn from the pool and the whole
    support trains; otherwise they are carved out of the support, and every
    class must keep at least one training shot.
    """
    if shots_per_class < 1:
        raise InsufficientShots(f"shots_per_class must be at least 1, got {shots_per_class}.")
    labels = np.asarray(labels)
    n_classes = int(labels.max()) + 1 if n_classes is None else n_classes
    n_val = validation_shot_count(shots_per_class)
    rng = np.random.default_rng(seed)

    counts = np.bincount(labels, minlength=n_classes)
    short = np.flatnonzero(counts < shots_per_class)
    if short.size:
        raise InsufficientShots(
            f"class {int(short[0])} has {int(counts[short[0]])} shots, {shots_per_class} requested."
        )

    if pool is not None:
        pool_labels = np.asarray(pool_labels)
        picked = []
        for k in range(n_classes):
            candidates = np.flatnonzero(pool_labels == k)
            if candidates.size < n_val:
                raise InsufficientShots(
                    f"validation pool has {candidates.size} samples of class {k}, {n_val} needed."
                )
            picked.append(np.sort(rng.choice(candidates, size=n_val, replace=False)))
        validation_index = np.concatenate(picked)
        train_index = np.arange(labels.shape[0])
        validation = EmbeddingMatrix(pool.data[validation_index])
        validation_labels = pool_labels[validation_index]
    else:
        if shots_per_class <= n_val:
            raise InsufficientShots(
                f"carving {n_val} validation shots from {shots_per_class} per class leaves no "
                "training shot; pass a validation set instead."
            )
        held_out, kept = [], []
        for k in range(n_classes):
            members = rng.permutation(np.flatnonzero(labels == k))
            held_out.append(np.sort(members[:n_val]))
            kept.append(members[n_val:])
        validation_index = np.concatenate(held_out)
        train_index = np.sort(np.concatenate(kept))
        validation = EmbeddingMatrix(support.data[validation_index])
        validation_labels = labels[validation_index]

    train = SupportSet(EmbeddingMatrix(support.data[train_index]), labels[train_index])
    return ShotSplit(train, validation, validation_labels, train_index, validation_index, pool is not None)


def nearest_query_accuracy(query, assignments, validation, validation_labels):
    """Accuracy of the 1-NN rule: validation shot -> class of its nearest query."""
    nearest = np.argmax(validation.data @ query.data.T, axis=1)
    predicted = hard_predict(assignments)[nearest]
    return float(np.mean(predicted == np.asarray(validation_labels)))


def search_gamma(spec_base, validation, validation_labels, grid, threads=1):
    """
    Solve once per γ in the grid and score each by the 1-NN validation rule.

    Returns (best γ, [(γ, accuracy), ...] in grid order); ties go to the
    smaller γ.
    """
    grid = [float(g) for g in grid]
    if not grid:
        raise EmptyGrid("the γ grid is empty.")

    def score(gamma):
        spec = replace(spec_base, hyper=replace(spec_base.hyper, gamma=gamma))
        assignments, _ = run(spec, threads=1 if len(grid) > 1 and threads > 1 else threads)
        accuracy = nearest_query_accuracy(spec.query, assignments, validation, validation_labels)
        logger.info("γ=%g validation accuracy %.4f", gamma, accuracy)
        return accuracy

    if threads > 1 and len(grid) > 1:
        with ThreadPoolExecutor(max_workers=min(threads, len(grid))) as pool:
            accuracies = list(pool.map(score, grid))
    else:
        accuracies = [score(gamma) for gamma in grid]

    scores = list(zip(grid, accuracies))
    top = max(accuracies)
    best = min(gamma for gamma, accuracy in scores if accuracy == top)
    return best, scores


def run_fewshot(spec, gamma=None, grid=DEFAULT_GAMMA_GRID, lambda_weight=None, validation=None,
                validation_labels=None, seed=0, threads=1):
    """
    Full few-shot pipeline: λ = 0.5 unless given, γ from the grid search
    unless given, then one solve on the whole support.
    """
    if not spec.is_few_shot:
        raise InsufficientShots("a few-shot run needs a labelled support set.")
    if gamma is None and not len(grid):
        raise EmptyGrid("the γ grid is empty.")
    hyper = replace(spec.hyper, lambda_weight=FEW_SHOT_LAMBDA if lambda_weight is None else lambda_weight)
    spec = replace(spec, hyper=hyper)

    split, scores = None, []
    if gamma is None:
        labels = spec.support.labels
        counts = np.bincount(labels, minlength=spec.n_classes)
        split = split_shots(
            spec.support.embeddings, labels, int(counts.min()), seed,
            n_classes=spec.n_classes, pool=validation, pool_labels=validation_labels,
        )
        search_spec = replace(spec, support=split.train)
        gamma, scores = search_gamma(search_spec, split.validation, split.validation_labels, grid, threads)
        logger.info("selected γ=%g", gamma)

    final_spec = replace(spec, hyper=replace(hyper, gamma=float(gamma)))
    assignments, state = run(final_spec, threads=threads)
    return FewShotResult(assignments, state, float(gamma), scores, split)
