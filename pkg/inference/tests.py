from dataclasses import replace
from fractions import Fraction
from types import SimpleNamespace
from unittest import mock

import numpy as np
from django.test import SimpleTestCase
from scipy import sparse
from scipy.stats import multivariate_normal

from tasks.exceptions import DimensionMismatch, EmptyClass
from tasks.synth import generate_task
from tasks.types import (
    AffinityGraph, EmbeddingMatrix, GmmParams, Hyperparams, SimplexAssignments, SupportSet, TaskSpec,
)
from tasks.validation import validate_task

from . import affinity, zero_shot
from .affinity import build_knn, symmetrize_graph
from .oracles import (
    brute_force_knn, em_reference, finite_diff_grad, project_simplex, simplex_pg_minimize,
)
from .solver import (
    PAPER_LITERAL, UPDATE_CONSISTENT, SolverState, _z_rows, gmm_log_probs, initial_state, mu_step,
    objective, run, sigma_step, z_step,
)
from .zero_shot import (
    compute_soft_labels, hard_predict, init_prototypes_support, init_prototypes_topk,
)


def unit_rows(rng, n, d):
    x = rng.standard_normal((n, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def small_task(seed, K=3, d=6, per_class=15, shots=0, tau=20.0, **hyper):
    factory = Hyperparams.few_shot if shots else Hyperparams.zero_shot
    spec, truth = generate_task(K, d, per_class, shots, 2.0, 0.5, tau, seed, hyper=factory(**hyper))
    return validate_task(spec), truth


class ZeroShotTests(SimpleTestCase):

    def test_soft_labels_are_row_softmax(self):
        rng = np.random.default_rng(0)
        F, T = EmbeddingMatrix(unit_rows(rng, 10, 4)), EmbeddingMatrix(unit_rows(rng, 3, 4))
        y = compute_soft_labels(F, T, 5.0)
        self.assertTrue(y.is_valid(1e-12))
        logits = 5.0 * F.data @ T.data.T
        expected = np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)
        np.testing.assert_allclose(y.z, expected, atol=1e-12)

    def test_zero_temperature_is_uniform(self):
        rng = np.random.default_rng(1)
        y = compute_soft_labels(EmbeddingMatrix(unit_rows(rng, 4, 3)), EmbeddingMatrix(unit_rows(rng, 5, 3)), 0.0)
        np.testing.assert_allclose(y.z, 0.2)

    def test_large_temperature_does_not_overflow(self):
        y = compute_soft_labels(EmbeddingMatrix(np.eye(2)), EmbeddingMatrix(np.eye(2)), 1e6)
        np.testing.assert_array_equal(y.z, np.eye(2))

    def test_dimension_mismatch(self):
        with self.assertRaises(DimensionMismatch):
            compute_soft_labels(EmbeddingMatrix(np.eye(2)), EmbeddingMatrix(np.eye(3)), 1.0)

    def test_row_shift_of_logits_changes_nothing(self):
        rng = np.random.default_rng(7)
        F, T = EmbeddingMatrix(unit_rows(rng, 20, 6)), EmbeddingMatrix(unit_rows(rng, 4, 6))
        plain = compute_soft_labels(F, T, 30.0)
        shift = rng.uniform(-50.0, 50.0, (20, 1))
        logits = zero_shot.soft_label_logits

        with mock.patch.object(zero_shot, 'soft_label_logits', lambda *args: logits(*args) + shift):
            shifted = compute_soft_labels(F, T, 30.0)
        self.assertLessEqual(np.max(np.abs(shifted.z - plain.z)), 1e-12)

    def test_hard_predictions_do_not_depend_on_temperature(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            F, T = EmbeddingMatrix(unit_rows(rng, 30, 5)), EmbeddingMatrix(unit_rows(rng, 6, 5))
            expected = np.argmax(F.data @ T.data.T, axis=1)
            for tau in (0.01, 1.0, 30.0, 100.0):
                np.testing.assert_array_equal(hard_predict(compute_soft_labels(F, T, tau)), expected)

    def test_noisier_prototypes_never_help(self):
        correct = []
        for noise in (0.0, 0.6, 1.2):
            spec, truth = generate_task(10, 32, 200, 0, 3.0, noise, 30.0, seed=7)
            correct.append(int(np.sum(hard_predict(compute_soft_labels(spec.query, spec.text, spec.tau)) == truth)))
        # 0.884, 0.2865 and 0.1955 of 2000 queries
        self.assertEqual(correct, [1768, 573, 391])
        self.assertEqual(correct, sorted(correct, reverse=True))

    def test_hard_predict_ties_go_to_lowest_class(self):
        np.testing.assert_array_equal(hard_predict(SimplexAssignments([[0.5, 0.5], [0.2, 0.8]])), [0, 1])

    def test_topk_init_uses_most_confident_rows(self):
        F = EmbeddingMatrix(np.eye(3))
        y = SimplexAssignments([[0.9, 0.1], [0.2, 0.8], [0.6, 0.4]])
        np.testing.assert_array_equal(init_prototypes_topk(F, y, 1), [[1, 0, 0], [0, 1, 0]])
        np.testing.assert_allclose(init_prototypes_topk(F, y, 2), [[0.5, 0, 0.5], [0, 0.5, 0.5]])
        np.testing.assert_allclose(init_prototypes_topk(F, y, 10), np.full((2, 3), 1 / 3))

    def test_support_init_is_class_mean(self):
        shots = EmbeddingMatrix([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
        np.testing.assert_allclose(init_prototypes_support(shots, [0, 0, 1]), [[0.5, 0.5], [1.0, 1.0]])
        with self.assertRaises(EmptyClass):
            init_prototypes_support(shots, [0, 0, 2], n_classes=3)


class AffinityTests(SimpleTestCase):

    def test_matches_brute_force(self):
        rng = np.random.default_rng(4)
        F = EmbeddingMatrix(unit_rows(rng, 40, 5))
        for k in (1, 3, 7):
            graph = build_knn(F, k)
            expected = brute_force_knn(F.data, k)
            for i in range(F.n_rows):
                got = sorted(graph.neighbors(i))
                want = sorted(expected[i])
                self.assertEqual([j for j, _ in got], [j for j, _ in want])
                np.testing.assert_allclose([w for _, w in got], [w for _, w in want], atol=1e-12)

    def test_no_self_edges_and_non_negative(self):
        graph = build_knn(EmbeddingMatrix(unit_rows(np.random.default_rng(5), 30, 3)), 4)
        for i, j, w in graph.edges():
            self.assertNotEqual(i, j)
            self.assertGreaterEqual(w, 0.0)

    def test_k_larger_than_nodes(self):
        graph = build_knn(EmbeddingMatrix(unit_rows(np.random.default_rng(6), 4, 3)), 10)
        self.assertEqual([len(graph.neighbors(i)) for i in range(4)], [3, 3, 3, 3])

    def test_k_zero_and_single_node_give_empty_graph(self):
        self.assertEqual(build_knn(EmbeddingMatrix(np.eye(3)), 0).weights.nnz, 0)
        self.assertEqual(build_knn(EmbeddingMatrix(np.eye(1, 3)), 3).weights.nnz, 0)

    def test_ties_go_to_lower_index(self):
        F = EmbeddingMatrix([[1.0, 0.0], [0.0, 1.0], [0.0, 1.0], [0.0, 1.0]])
        graph = build_knn(F, 1)
        self.assertEqual(graph.neighbors(0), [(1, 0.0)])
        self.assertEqual(graph.neighbors(1), [(2, 1.0)])
        self.assertEqual(graph.neighbors(3), [(1, 1.0)])

    def test_block_size_does_not_change_graph(self):
        F = EmbeddingMatrix(unit_rows(np.random.default_rng(7), 50, 4))
        reference = build_knn(F, 3).weights
        with mock.patch.object(affinity, 'BLOCK_ROWS', 7):
            blocked = build_knn(F, 3).weights
        np.testing.assert_allclose(reference.toarray(), blocked.toarray(), rtol=0, atol=1e-14)

    def test_symmetrized_graph_is_union_of_edges(self):
        graph = build_knn(EmbeddingMatrix(unit_rows(np.random.default_rng(8), 25, 4)), 2)
        sym = symmetrize_graph(graph)
        dense = sym.weights.toarray()
        np.testing.assert_array_equal(dense, dense.T)
        self.assertTrue(sym.symmetric)
        for i, j, w in graph.edges():
            self.assertAlmostEqual(dense[i, j], w, places=12)


class SolverInvariantTests(SimpleTestCase):

    def test_simplex_preserved_after_every_sweep(self):
        rng = np.random.default_rng(100)
        for seed in range(100):
            K, d = int(rng.integers(1, 8)), int(rng.integers(2, 12))
            spec, _ = small_task(seed, K=K, d=d, per_class=int(rng.integers(2, 12)), tau=float(rng.uniform(1, 60)))
            state = initial_state(spec)
            for _ in range(3):
                for _ in range(spec.hyper.inner_z_iters):
                    state.z[state.n_support:] = z_step(state, spec)
                    self.assertTrue(SimplexAssignments(state.query_z).is_valid(1e-9), seed)
                state.gmm = GmmParams(mu_step(state, spec), state.gmm.sigma_diag)
                state.gmm = GmmParams(state.gmm.mu, sigma_step(state, spec))

    def test_support_rows_stay_frozen(self):
        spec, _ = small_task(3, shots=3, gamma=0.2)
        expected = SimplexAssignments.one_hot(spec.support.labels, spec.n_classes).z
        _, state = run(spec)
        np.testing.assert_array_equal(state.support_z, expected)

    def test_descent_without_laplacian_after_every_block(self):
        for seed in range(100):
            shots = 2 if seed % 2 else 0
            extra = {'gamma': 0.02} if shots else {}
            spec, _ = small_task(seed, K=2 + seed % 4, d=3 + seed % 5, per_class=8, shots=shots,
                                 k_nn=0, outer_iters=4, inner_z_iters=2, **extra)
            _, state = run(spec)
            values = [entry.update_consistent for entry in state.objective_trace]
            for before, after in zip(values, values[1:]):
                self.assertLessEqual(after, before + 1e-8, seed)

    def test_isotropic_and_frozen_blocks_keep_descent(self):
        spec, _ = small_task(9, k_nn=0, isotropic_sigma=True, update_mu=False)
        _, state = run(spec)
        blocks = {entry.block for entry in state.objective_trace}
        self.assertNotIn('mu', blocks)
        values = [entry.update_consistent for entry in state.objective_trace]
        self.assertTrue(all(b <= a + 1e-8 for a, b in zip(values, values[1:])))
        sigma = state.gmm.sigma_diag
        np.testing.assert_allclose(sigma, sigma[0])

    def test_full_model_descent_on_reference_task(self):
        spec, _ = generate_task(10, 32, 200, 0, 3.0, 0.6, 30.0, seed=7)
        _, state = run(spec)
        self.assertEqual(state.descent_violations, [], state.objective_trace)

    def test_no_outer_iterations_is_inductive_zero_shot(self):
        spec, _ = small_task(2, outer_iters=0)
        assignments, state = run(spec)
        np.testing.assert_array_equal(hard_predict(assignments), hard_predict(state.soft_labels))
        self.assertEqual([entry.block for entry in state.objective_trace], ['init'])

    def test_single_class(self):
        spec, _ = small_task(2, K=1)
        assignments, _ = run(spec)
        np.testing.assert_array_equal(assignments.z, np.ones((spec.n_query, 1)))

    def test_trace_block_order(self):
        spec, _ = small_task(2, outer_iters=2, inner_z_iters=2)
        _, state = run(spec)
        self.assertEqual(
            [(e.iteration, e.block) for e in state.objective_trace],
            [(0, 'init'), (1, 'z'), (1, 'z'), (1, 'mu'), (1, 'sigma'),
             (2, 'z'), (2, 'z'), (2, 'mu'), (2, 'sigma')],
        )

    def test_temperature_scale_keeps_invariants(self):
        for tau in (0.5, 5.0, 500.0):
            spec, _ = small_task(4, tau=tau, shots=2, gamma=0.01)
            assignments, state = run(spec)
            self.assertTrue(assignments.is_valid(1e-9))
            self.assertTrue(np.all(state.gmm.sigma_diag >= 1e-12))

    def test_reference_task_accuracies(self):
        spec, truth = generate_task(10, 32, 200, 0, 3.0, 0.6, 30.0, seed=7)
        assignments, state = run(spec)
        inductive = int(np.sum(hard_predict(state.soft_labels) == truth))
        transduced = int(np.sum(hard_predict(assignments) == truth))
        # 0.2865 and 0.3725 of 2000 queries
        self.assertEqual((inductive, transduced), (573, 745))
        self.assertGreaterEqual(transduced - inductive, 0.02 * len(truth))


class SolverDeterminismTests(SimpleTestCase):

    def test_jacobi_sweep_is_order_independent(self):
        spec, _ = small_task(21, shots=2, gamma=0.02, per_class=20)
        state = initial_state(spec)
        _, log_p = state.log_probs(spec)
        forward = z_step(state, spec)
        backward = np.empty_like(forward)
        for i in reversed(range(spec.n_query)):
            backward[i] = _z_rows(state, spec, log_p, i, i + 1)[0]
        np.testing.assert_allclose(forward, backward, rtol=0, atol=1e-15)

    def test_thread_count_does_not_change_results(self):
        spec, _ = small_task(22, K=4, per_class=30, shots=2, gamma=0.02)
        single, state_1 = run(spec, threads=1)
        multi, state_3 = run(spec, threads=3)
        np.testing.assert_array_equal(single.z, multi.z)
        self.assertEqual(state_1.objective_trace, state_3.objective_trace)


def exact_mu(zq, fq, zs, fs, weight):
    n = len(fq)
    K, d = len(zq[0]), len(fq[0])
    mu = []
    for k in range(K):
        den = sum(Fraction(z[k]) for z in zq) / n + weight * sum(Fraction(z[k]) for z in zs)
        mu.append([
            (sum(Fraction(z[k]) * Fraction(f[j]) for z, f in zip(zq, fq)) / n
             + weight * sum(Fraction(z[k]) * Fraction(f[j]) for z, f in zip(zs, fs))) / den
            for j in range(d)
        ])
    return mu


def exact_sigma(zq, fq, zs, fs, mu, weight, gamma):
    def scatter(zz, ff, j):
        return sum(Fraction(z[k]) * (Fraction(f[j]) - Fraction(mu[k][j])) ** 2
                   for z, f in zip(zz, ff) for k in range(len(mu)))
    d = len(fq[0])
    return [(scatter(zq, fq, j) / len(fq) + weight * scatter(zs, fs, j)) / (1 + gamma) for j in range(d)]


class ClosedFormTests(SimpleTestCase):
    # Hand-sized task; embeddings need not be unit norm for the block updates.

    def setUp(self):
        self.fq = [[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]
        self.fs = [[1.0, 0.0], [0.0, 1.0]]
        self.zq = [[0.5, 0.5], [0.25, 0.75], [1.0, 0.0]]
        self.zs = [[1.0, 0.0], [0.0, 1.0]]
        self.spec = TaskSpec(
            query=EmbeddingMatrix(self.fq),
            text=EmbeddingMatrix(np.eye(2)),
            tau=1.0,
            hyper=Hyperparams(gamma=0.5),
            support=SupportSet(EmbeddingMatrix(self.fs), [0, 1]),
        )
        self.mu = [[1.0, 1.0], [2.0, 3.0]]
        self.state = SolverState(
            z=np.array(self.zs + self.zq),
            gmm=GmmParams(np.array(self.mu), np.ones(2)),
            soft_labels=SimplexAssignments(np.full((3, 2), 0.5)),
            graph=AffinityGraph.empty(5),
            n_support=2,
        )

    def test_mu_step(self):
        expected = exact_mu(self.zq, self.fq, self.zs, self.fs, Fraction(1, 4))
        np.testing.assert_allclose(mu_step(self.state, self.spec), np.array(expected, dtype=float), atol=1e-12)

    def test_sigma_step(self):
        expected = exact_sigma(self.zq, self.fq, self.zs, self.fs, self.mu, Fraction(1, 4), Fraction(1, 2))
        np.testing.assert_allclose(sigma_step(self.state, self.spec), np.array(expected, dtype=float), atol=1e-12)

    def test_zero_shot_sigma_has_no_gamma_factor(self):
        spec = replace(self.spec, support=None, hyper=Hyperparams())
        state = replace(self.state, z=np.array(self.zq), n_support=0, graph=AffinityGraph.empty(3))
        expected = exact_sigma(self.zq, self.fq, [], [], self.mu, 0, 0)
        np.testing.assert_allclose(sigma_step(state, spec), np.array(expected, dtype=float), atol=1e-12)

    def test_class_without_mass_keeps_its_mean(self):
        spec = replace(self.spec, support=None, hyper=Hyperparams())
        state = replace(self.state, z=np.array([[1.0, 0.0]] * 3), n_support=0, graph=AffinityGraph.empty(3))
        mu = mu_step(state, spec)
        np.testing.assert_allclose(mu[0], [3.0, 4.0])
        np.testing.assert_array_equal(mu[1], self.mu[1])

    def test_variance_floor(self):
        spec = replace(self.spec, query=EmbeddingMatrix([[1.0, 2.0]] * 3), support=None, hyper=Hyperparams())
        state = replace(
            self.state, z=np.array([[1.0, 0.0]] * 3), n_support=0, graph=AffinityGraph.empty(3),
            gmm=GmmParams(np.array([[1.0, 2.0], [0.0, 0.0]]), np.ones(2)),
        )
        np.testing.assert_array_equal(sigma_step(state, spec), [1e-12, 1e-12])


class ObjectiveTests(SimpleTestCase):

    def test_gmm_log_probs_match_scipy_up_to_constant(self):
        rng = np.random.default_rng(30)
        F = unit_rows(rng, 6, 3)
        gmm = GmmParams(unit_rows(rng, 2, 3), np.array([0.5, 0.2, 0.1]))
        constant = 1.5 * np.log(2 * np.pi)
        expected = np.column_stack([
            multivariate_normal.logpdf(F, mean=gmm.mu[k], cov=np.diag(gmm.sigma_diag)) for k in range(2)
        ]) + constant
        np.testing.assert_allclose(gmm_log_probs(F, gmm), expected, atol=1e-10)
        np.testing.assert_array_equal(gmm_log_probs(F, gmm, threads=4), gmm_log_probs(F, gmm))

    def test_prior_term_vanishes_at_soft_labels_with_equal_means(self):
        spec, _ = small_task(31, k_nn=0)
        state = initial_state(spec)
        state.gmm = GmmParams(np.tile(state.gmm.mu[:1], (spec.n_classes, 1)), state.gmm.sigma_diag)
        log_p = gmm_log_probs(spec.query, state.gmm)
        self.assertAlmostEqual(objective(state, spec, PAPER_LITERAL), -np.mean(log_p[:, 0]), places=10)

    def test_laplacian_term_is_linear_in_weights(self):
        spec, _ = small_task(32)
        state = initial_state(spec)
        graph = state.graph
        base = objective(state, spec)
        state.graph = AffinityGraph.empty(graph.n_nodes)
        without = objective(state, spec)
        state.graph = AffinityGraph(graph.weights * 2.0, k_nn=graph.k_nn)
        doubled = objective(state, spec)
        self.assertAlmostEqual(doubled - without, 2.0 * (base - without), places=9)

    def test_unknown_objective(self):
        spec, _ = small_task(33)
        with self.assertRaises(ValueError):
            objective(initial_state(spec), spec, 'other')

    def test_em_equivalence(self):
        for seed in range(20):
            spec, _ = small_task(seed, K=3, d=4, per_class=10, lambda_weight=0.0, k_nn=0)
            state = initial_state(spec)
            resp, means = em_reference(spec.query.data, spec.n_classes, state.gmm.mu, state.gmm.sigma_diag, 10)
            for it in range(10):
                state.z[:] = z_step(state, spec)
                np.testing.assert_allclose(state.query_z, resp[it], rtol=0, atol=1e-10)
                state.gmm = GmmParams(mu_step(state, spec), state.gmm.sigma_diag)
                live = resp[it].sum(axis=0) / spec.n_query >= 1e-12
                np.testing.assert_allclose(state.gmm.mu[live], means[it][live], rtol=0, atol=1e-10)
                state.gmm = GmmParams(state.gmm.mu, sigma_step(state, spec))

    def test_z_step_solves_per_sample_problem(self):
        rng = np.random.default_rng(40)
        for _ in range(50):
            K = int(rng.integers(2, 11))
            a = rng.uniform(-1.0, 1.0, K)
            state = SimpleNamespace(
                n_support=0,
                soft_labels=SimplexAssignments(np.full((1, K), 1.0 / K)),
                graph=AffinityGraph.empty(1),
                z=np.full((1, K), 1.0 / K),
            )
            spec = SimpleNamespace(hyper=Hyperparams(lambda_weight=0.0))
            z = _z_rows(state, spec, -a[None, :], 0, 1)[0]
            np.testing.assert_allclose(z, simplex_pg_minimize(a), atol=1e-6)
            np.testing.assert_allclose(z, np.exp(-a) / np.exp(-a).sum(), atol=1e-12)

    def test_z_step_with_prior_and_support_neighbour(self):
        rng = np.random.default_rng(41)
        for _ in range(20):
            y_hat = rng.dirichlet([1.0, 1.0])
            log_p = rng.uniform(-3.0, 0.0, 2)
            weight = rng.uniform(0.1, 1.0)
            label = int(rng.integers(2))
            lam = rng.uniform(0.1, 2.0)
            support_row = np.eye(2)[label]
            state = SimpleNamespace(
                n_support=1,
                soft_labels=SimplexAssignments(y_hat[None, :]),
                graph=AffinityGraph(sparse.csr_matrix(([weight], ([1], [0])), shape=(2, 2)), k_nn=1),
                z=np.vstack([support_row, rng.dirichlet([1.0, 1.0])]),
            )
            spec = SimpleNamespace(hyper=Hyperparams(lambda_weight=lam))
            z = _z_rows(state, spec, log_p[None, :], 0, 1)[0]
            a = -(lam * np.log(y_hat) + log_p + weight * support_row)
            np.testing.assert_allclose(z, simplex_pg_minimize(a), rtol=0, atol=1e-6)

    def test_mu_step_is_stationary(self):
        for seed in range(50, 70):
            spec, _ = small_task(seed, K=3, d=4, shots=2, gamma=0.2, outer_iters=2)
            _, state = run(spec)
            sigma = state.gmm.sigma_diag
            state.gmm = GmmParams(mu_step(state, spec), sigma)
            shape = state.gmm.mu.shape

            def fn(flat):
                state.gmm = GmmParams(flat.reshape(shape), sigma)
                return objective(state, spec, UPDATE_CONSISTENT)

            grad = finite_diff_grad(fn, state.gmm.mu.ravel())
            self.assertLessEqual(np.max(np.abs(grad)), 1e-4, f"seed {seed}")

    def test_sigma_step_is_stationary_in_log_variance(self):
        for seed in range(70, 90):
            spec, _ = small_task(seed, K=3, d=4, shots=2, gamma=0.2, outer_iters=2)
            _, state = run(spec)
            mu = state.gmm.mu
            state.gmm = GmmParams(mu, sigma_step(state, spec))

            def fn(log_sigma):
                state.gmm = GmmParams(mu, np.exp(log_sigma))
                return objective(state, spec, UPDATE_CONSISTENT)

            grad = finite_diff_grad(fn, np.log(state.gmm.sigma_diag))
            self.assertLessEqual(np.max(np.abs(grad)), 1e-4, f"seed {seed}")


class OracleTests(SimpleTestCase):

    def test_em_separates_two_clusters(self):
        rng = np.random.default_rng(60)
        F = np.vstack([rng.normal(-3, 0.3, (20, 2)), rng.normal(3, 0.3, (20, 2))])
        resp, _ = em_reference(F, 2, np.array([[-1.0, -1.0], [1.0, 1.0]]), np.ones(2), 20)
        self.assertTrue(np.all(resp[-1][:20, 0] >= 0.99))
        self.assertTrue(np.all(resp[-1][20:, 1] >= 0.99))

    def test_em_single_component(self):
        resp, means = em_reference(np.eye(3), 1, np.zeros((1, 3)), np.ones(3), 2)
        np.testing.assert_allclose(resp[-1], 1.0)
        np.testing.assert_allclose(means[0], [[1 / 3] * 3])

    def test_projection_onto_simplex(self):
        np.testing.assert_allclose(project_simplex(np.array([0.2, 0.3, 0.5])), [0.2, 0.3, 0.5])
        np.testing.assert_allclose(project_simplex(np.array([2.0, 0.0])), [1.0, 0.0])

    def test_pg_minimizer(self):
        np.testing.assert_allclose(simplex_pg_minimize(np.zeros(4)), 0.25, atol=1e-9)
        np.testing.assert_allclose(simplex_pg_minimize(np.array([0.0, 50.0])), [1.0, 0.0], atol=1e-6)

    def test_finite_differences(self):
        np.testing.assert_allclose(finite_diff_grad(lambda x: np.sum(x ** 2), np.zeros(3)), 0.0, atol=1e-10)
        coef = np.array([1.5, -2.0, 0.25])
        np.testing.assert_allclose(finite_diff_grad(lambda x: coef @ x, np.ones(3)), coef, atol=1e-9)

    def test_brute_force_knn_excludes_self(self):
        result = brute_force_knn(np.eye(3), 2)
        self.assertEqual([j for j, _ in result[0]], [1, 2])
