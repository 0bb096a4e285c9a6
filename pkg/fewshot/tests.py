from unittest import mock

import numpy as np
from django.test import SimpleTestCase

from inference.zero_shot import hard_predict
from tasks.exceptions import EmptyGrid, InsufficientShots
from tasks.synth import generate_task
from tasks.types import EmbeddingMatrix, Hyperparams, SimplexAssignments, SupportSet, TaskSpec

from .tuning import (
    nearest_query_accuracy, run_fewshot, search_gamma, split_shots, validation_shot_count,
)


def shot_matrix(n_classes, shots, dim=4, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n_classes * shots, dim))
    return EmbeddingMatrix(x / np.linalg.norm(x, axis=1, keepdims=True)), np.repeat(np.arange(n_classes), shots)


def two_point_spec(**hyper):
    return TaskSpec(
        query=EmbeddingMatrix(np.eye(2)),
        text=EmbeddingMatrix(np.eye(2)),
        tau=1.0,
        hyper=Hyperparams.few_shot(**hyper),
        support=SupportSet(EmbeddingMatrix(np.eye(2)), [0, 1]),
    )


def fake_run(good_gammas):
    """Solver stand-in: right answers only for the given γ values."""
    def side_effect(spec, threads=1):
        labels = [0, 1] if spec.hyper.gamma in good_gammas else [1, 0]
        return SimplexAssignments.one_hot(labels, 2), None
    return side_effect


class SplitShotsTests(SimpleTestCase):

    def test_validation_shot_count(self):
        self.assertEqual([validation_shot_count(s) for s in (1, 2, 4, 16)], [1, 2, 4, 4])

    def test_carving_from_support(self):
        shots, labels = shot_matrix(3, 6)
        split = split_shots(shots, labels, 6, seed=0)
        self.assertFalse(split.from_pool)
        np.testing.assert_array_equal(np.bincount(split.validation_labels), [4, 4, 4])
        np.testing.assert_array_equal(np.bincount(split.train.labels), [2, 2, 2])
        self.assertEqual(set(split.train_index) & set(split.validation_index), set())
        self.assertEqual(len(split.train_index) + len(split.validation_index), 18)
        np.testing.assert_array_equal(split.validation.data, shots.data[split.validation_index])

    def test_split_is_seeded(self):
        shots, labels = shot_matrix(2, 8)
        a = split_shots(shots, labels, 8, seed=3)
        b = split_shots(shots, labels, 8, seed=3)
        np.testing.assert_array_equal(a.validation_index, b.validation_index)

    def test_carving_needs_a_training_shot_left(self):
        shots, labels = shot_matrix(2, 4)
        with self.assertRaises(InsufficientShots):
            split_shots(shots, labels, 4, seed=0)

    def test_short_class(self):
        shots, labels = shot_matrix(2, 6)
        with self.assertRaises(InsufficientShots):
            split_shots(shots, labels[:-1], 6, seed=0, n_classes=2)
        with self.assertRaises(InsufficientShots):
            split_shots(shots, labels, 0, seed=0)

    def test_validation_pool(self):
        shots, labels = shot_matrix(2, 2)
        pool, pool_labels = shot_matrix(2, 5, seed=1)
        split = split_shots(shots, labels, 2, seed=0, pool=pool, pool_labels=pool_labels)
        self.assertTrue(split.from_pool)
        np.testing.assert_array_equal(split.train.labels, labels)
        np.testing.assert_array_equal(np.bincount(split.validation_labels), [2, 2])
        np.testing.assert_array_equal(split.validation.data, pool.data[split.validation_index])

    def test_validation_pool_too_small(self):
        shots, labels = shot_matrix(2, 4)
        pool, pool_labels = shot_matrix(2, 2, seed=1)
        with self.assertRaises(InsufficientShots):
            split_shots(shots, labels, 4, seed=0, pool=pool, pool_labels=pool_labels)


class GammaSearchTests(SimpleTestCase):

    def setUp(self):
        self.validation = EmbeddingMatrix(np.eye(2))
        self.validation_labels = np.array([0, 1])

    def test_nearest_query_rule(self):
        spec = two_point_spec()
        right = SimplexAssignments.one_hot([0, 1], 2)
        wrong = SimplexAssignments.one_hot([1, 1], 2)
        self.assertEqual(nearest_query_accuracy(spec.query, right, self.validation, self.validation_labels), 1.0)
        self.assertEqual(nearest_query_accuracy(spec.query, wrong, self.validation, self.validation_labels), 0.5)

    @mock.patch('fewshot.tuning.run')
    def test_best_gamma_and_tie_break(self, run):
        run.side_effect = fake_run({0.01, 0.2})
        best, scores = search_gamma(two_point_spec(), self.validation, self.validation_labels, [0.2, 0.002, 0.01])
        self.assertEqual(best, 0.01)
        self.assertEqual(scores, [(0.2, 1.0), (0.002, 0.0), (0.01, 1.0)])
        self.assertEqual(run.call_count, 3)

    @mock.patch('fewshot.tuning.run')
    def test_parallel_search_gives_same_answer(self, run):
        run.side_effect = fake_run({0.02})
        grid = [0.002, 0.01, 0.02, 0.2]
        self.assertEqual(
            search_gamma(two_point_spec(), self.validation, self.validation_labels, grid, threads=4),
            (0.02, [(0.002, 0.0), (0.01, 0.0), (0.02, 1.0), (0.2, 0.0)]),
        )

    def test_empty_grid(self):
        with self.assertRaises(EmptyGrid):
            search_gamma(two_point_spec(), self.validation, self.validation_labels, [])

    def test_search_with_the_solver(self):
        task = generate_task(10, 32, 200, 4, 3.0, 0.6, 30.0, seed=7)
        best, scores = search_gamma(task.spec, task.validation, task.validation_labels, [0.002, 0.01, 0.02, 0.2])
        self.assertEqual(best, 0.2)
        # correct validation shots out of 40
        self.assertEqual([(g, round(acc * 40)) for g, acc in scores], [(0.002, 24), (0.01, 24), (0.02, 24), (0.2, 27)])
        self.assertEqual(dict(scores)[best], max(acc for _, acc in scores))


class RunFewshotTests(SimpleTestCase):

    def test_needs_support(self):
        spec = TaskSpec(query=EmbeddingMatrix(np.eye(2)), text=EmbeddingMatrix(np.eye(2)), tau=1.0)
        with self.assertRaises(InsufficientShots):
            run_fewshot(spec, gamma=0.02)

    def test_empty_grid_without_gamma(self):
        with self.assertRaises(EmptyGrid):
            run_fewshot(two_point_spec(), grid=())

    @mock.patch('fewshot.tuning.run')
    def test_explicit_gamma_skips_search(self, run):
        run.side_effect = fake_run({0.02})
        result = run_fewshot(two_point_spec(), gamma=0.02)
        self.assertEqual(run.call_count, 1)
        final_spec = run.call_args.args[0]
        self.assertEqual((final_spec.hyper.gamma, final_spec.hyper.lambda_weight), (0.02, 0.5))
        self.assertEqual(result.scores, [])
        self.assertIsNone(result.split)

    @mock.patch('fewshot.tuning.run')
    def test_default_grid_with_pool(self, run):
        run.side_effect = fake_run({0.2})
        spec = two_point_spec()
        result = run_fewshot(spec, validation=EmbeddingMatrix(np.eye(2)), validation_labels=[0, 1])
        self.assertEqual([g for g, _ in result.scores], [0.002, 0.01, 0.02, 0.2])
        self.assertEqual(result.gamma, 0.2)
        # four candidates, then the final solve on the whole support
        self.assertEqual(run.call_count, 5)
        self.assertEqual(run.call_args.args[0].n_support, spec.n_support)
        np.testing.assert_array_equal(result.predictions, [0, 1])

    @mock.patch('fewshot.tuning.run')
    def test_lambda_override(self, run):
        run.side_effect = fake_run({0.0})
        run_fewshot(two_point_spec(outer_iters=1), gamma=0.0, lambda_weight=2.0)
        final_spec = run.call_args.args[0]
        self.assertEqual((final_spec.hyper.lambda_weight, final_spec.hyper.gamma), (2.0, 0.0))
        self.assertEqual(final_spec.hyper.outer_iters, 1)

    def test_lambda_override_reaches_the_solver(self):
        spec = two_point_spec(outer_iters=1)
        weighted = run_fewshot(spec, gamma=0.0, lambda_weight=2.0)
        default = run_fewshot(spec, gamma=0.0)
        self.assertEqual(weighted.state.objective_trace[-1].iteration, 1)
        self.assertNotEqual(weighted.state.objective_trace[0], default.state.objective_trace[0])

    def test_few_shot_not_worse_than_zero_shot(self):
        task = generate_task(5, 16, 60, 4, 3.0, 0.6, 30.0, seed=3)
        result = run_fewshot(task.spec, validation=task.validation, validation_labels=task.validation_labels)
        zero_shot = np.mean(hard_predict(result.state.soft_labels) == task.truth)
        few_shot = np.mean(result.predictions == task.truth)
        self.assertGreaterEqual(few_shot, zero_shot)
        self.assertEqual(len(result.scores), 4)
        self.assertEqual(result.state.n_support, task.spec.n_support)

    def test_reference_few_shot_task(self):
        task = generate_task(10, 32, 200, 4, 3.0, 0.6, 30.0, seed=7)
        result = run_fewshot(task.spec, validation=task.validation, validation_labels=task.validation_labels)
        self.assertEqual(result.gamma, 0.2)
        self.assertEqual(result.gamma, max(result.scores, key=lambda s: s[1])[0])
        zero_shot = int(np.sum(hard_predict(result.state.soft_labels) == task.truth))
        few_shot = int(np.sum(result.predictions == task.truth))
        # 0.6965 of 2000 queries
        self.assertEqual(few_shot, 1393)
        self.assertGreaterEqual(few_shot, zero_shot)
