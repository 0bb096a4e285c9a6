import struct
import tempfile
from pathlib import Path

import numpy as np
from django.core.exceptions import ValidationError
from django.test import SimpleTestCase

from .exceptions import (
    BadMagic, DimensionMismatch, EmptyMatrix, IoFailure, LabelOutOfRange, NegativeLabel,
    NonFiniteValue, NormTooFarFromUnit, OversizedFile, ParseError, RaggedCsv, TrailingData,
    TruncatedFile,
)
from .fileio import (
    EMB_HEADER, EMB_MAGIC, read_config, read_embeddings, read_labels, read_predictions,
    write_csv, write_embeddings, write_labels, write_predictions,
)
from .forms import HyperparamsForm
from .synth import generate_task, write_task
from .types import (
    AffinityGraph, EmbeddingMatrix, GmmParams, Hyperparams, SimplexAssignments, SupportSet, TaskSpec,
)
from .validation import normalize_embeddings, validate_task


def unit_rows(rng, n, d):
    x = rng.standard_normal((n, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def make_task(seed=0, n=12, k=3, d=5, shots=0):
    rng = np.random.default_rng(seed)
    support = None
    if shots:
        support = SupportSet(EmbeddingMatrix(unit_rows(rng, shots * k, d)), np.repeat(np.arange(k), shots))
    return TaskSpec(
        query=EmbeddingMatrix(unit_rows(rng, n, d)),
        text=EmbeddingMatrix(unit_rows(rng, k, d)),
        tau=10.0,
        support=support,
    )


class ExceptionTests(SimpleTestCase):

    def test_errors_are_validation_errors_with_codes(self):
        exc = DimensionMismatch("text has dimension 3, query 4.")
        self.assertIsInstance(exc, ValidationError)
        self.assertEqual(exc.code, 'dimension_mismatch')
        self.assertEqual(str(exc), "text has dimension 3, query 4.")

    def test_code_can_be_overridden(self):
        self.assertEqual(ParseError("bad", code='custom').code, 'custom')


class TypesTests(SimpleTestCase):

    def test_arrays_are_copied_and_read_only(self):
        raw = np.eye(2)
        matrix = EmbeddingMatrix(raw)
        raw[0, 0] = 5.0
        self.assertEqual(matrix.data[0, 0], 1.0)
        with self.assertRaises(ValueError):
            matrix.data[0, 0] = 2.0

    def test_one_hot_assignments(self):
        z = SimplexAssignments.one_hot([2, 0], 3)
        np.testing.assert_array_equal(z.z, [[0, 0, 1], [1, 0, 0]])
        self.assertTrue(z.is_valid())

    def test_invalid_simplex_rows_are_detected(self):
        self.assertFalse(SimplexAssignments([[0.7, 0.7]]).is_valid())
        self.assertFalse(SimplexAssignments([[1.5, -0.5]]).is_valid())

    def test_gmm_initial_covariance_is_one_over_d(self):
        gmm = GmmParams.initial(np.zeros((3, 4)))
        np.testing.assert_array_equal(gmm.sigma_diag, np.full(4, 0.25))

    def test_gmm_rejects_variance_below_floor(self):
        with self.assertRaises(ValueError):
            GmmParams(np.zeros((2, 2)), np.array([1.0, 0.0]))

    def test_gmm_rejects_shape_mismatch(self):
        with self.assertRaises(ValueError):
            GmmParams(np.zeros((2, 3)), np.ones(2))

    def test_hyperparams_defaults(self):
        self.assertEqual(Hyperparams.zero_shot().lambda_weight, 1.0)
        few = Hyperparams.few_shot(gamma=0.02)
        self.assertEqual((few.lambda_weight, few.gamma), (0.5, 0.02))
        self.assertEqual((few.outer_iters, few.inner_z_iters, few.k_nn, few.top_m_init), (10, 5, 3, 8))

    def test_all_embeddings_puts_support_first(self):
        spec = make_task(shots=2)
        stacked = spec.all_embeddings().data
        self.assertEqual(stacked.shape[0], spec.n_support + spec.n_query)
        np.testing.assert_array_equal(stacked[:spec.n_support], spec.support.embeddings.data)
        np.testing.assert_array_equal(stacked[spec.n_support:], spec.query.data)

    def test_graph_neighbors_sorted_by_weight_then_index(self):
        from scipy import sparse
        weights = sparse.csr_matrix(np.array([
            [0.0, 0.2, 0.5, 0.2],
            [0.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0],
        ]))
        graph = AffinityGraph(weights, k_nn=3)
        self.assertEqual(graph.neighbors(0), [(2, 0.5), (1, 0.2), (3, 0.2)])
        self.assertEqual(graph.neighbors(1), [])
        self.assertEqual(AffinityGraph.empty(4).weights.nnz, 0)


class NormalizeEmbeddingsTests(SimpleTestCase):

    def test_near_unit_rows_are_renormalised(self):
        matrix = normalize_embeddings(np.array([[1.005, 0.0], [0.0, 0.995]]))
        np.testing.assert_allclose(matrix.row_norms(), 1.0, atol=1e-15)

    def test_rows_far_from_unit_are_rejected(self):
        with self.assertRaises(NormTooFarFromUnit) as ctx:
            normalize_embeddings(np.array([[1.0, 0.0], [0.0, 1.02]]), 'query')
        self.assertIn('row 1', str(ctx.exception))

    def test_non_finite_values_are_rejected(self):
        with self.assertRaises(NonFiniteValue):
            normalize_embeddings(np.array([[np.nan, 1.0]]))

    def test_empty_matrix_is_rejected(self):
        with self.assertRaises(EmptyMatrix):
            normalize_embeddings(np.zeros((0, 3)))

    def test_normalisation_is_idempotent(self):
        once = normalize_embeddings(unit_rows(np.random.default_rng(1), 20, 6) * 1.003)
        twice = normalize_embeddings(once.data)
        np.testing.assert_array_equal(once.data, twice.data)

    def test_float32_rows_keep_their_values(self):
        data = unit_rows(np.random.default_rng(5), 50, 16).astype(np.float32)
        np.testing.assert_array_equal(normalize_embeddings(data).data, data.astype(np.float64))
        # float64 input near unit norm is still rescaled
        scaled = unit_rows(np.random.default_rng(5), 3, 4) * (1 + 1e-6)
        np.testing.assert_allclose(normalize_embeddings(scaled).row_norms(), 1.0, atol=1e-15)


class ValidateTaskTests(SimpleTestCase):

    def test_valid_task_passes_and_is_idempotent(self):
        spec = validate_task(make_task(shots=2))
        again = validate_task(spec)
        np.testing.assert_array_equal(spec.query.data, again.query.data)
        np.testing.assert_array_equal(spec.support.labels, again.support.labels)
        self.assertEqual(again.n_classes, 3)

    def test_text_dimension_mismatch(self):
        spec = make_task()
        bad = TaskSpec(query=spec.query, text=EmbeddingMatrix(np.eye(3, 4)), tau=1.0)
        with self.assertRaises(DimensionMismatch):
            validate_task(bad)

    def test_support_dimension_mismatch(self):
        spec = make_task()
        support = SupportSet(EmbeddingMatrix(np.eye(3, 4)), [0, 1, 2])
        with self.assertRaises(DimensionMismatch):
            validate_task(TaskSpec(query=spec.query, text=spec.text, tau=1.0, support=support))

    def test_temperature_must_be_positive(self):
        spec = make_task()
        for tau in (0.0, -1.0, float('inf')):
            with self.assertRaises(NonFiniteValue):
                validate_task(TaskSpec(query=spec.query, text=spec.text, tau=tau))

    def test_support_label_out_of_range(self):
        spec = make_task(k=3)
        support = SupportSet(EmbeddingMatrix(spec.query.data[:2]), [0, 3])
        with self.assertRaises(LabelOutOfRange):
            validate_task(TaskSpec(query=spec.query, text=spec.text, tau=1.0, support=support))

    def test_support_label_count_mismatch(self):
        spec = make_task(k=3)
        support = SupportSet(EmbeddingMatrix(spec.query.data[:3]), [0, 1])
        with self.assertRaises(DimensionMismatch):
            validate_task(TaskSpec(query=spec.query, text=spec.text, tau=1.0, support=support))


class HyperparamsFormTests(SimpleTestCase):

    def test_empty_form_gives_zero_shot_defaults(self):
        form = HyperparamsForm({})
        self.assertTrue(form.is_valid())
        self.assertEqual(form.to_hyperparams(), Hyperparams.zero_shot())

    def test_few_shot_lambda_default(self):
        form = HyperparamsForm({'gamma': '0.02'}, few_shot=True)
        self.assertTrue(form.is_valid())
        hyper = form.to_hyperparams()
        self.assertEqual((hyper.lambda_weight, hyper.gamma), (0.5, 0.02))

    def test_string_values_from_config_files(self):
        form = HyperparamsForm({'outer_iters': '4', 'k_nn': '0', 'freeze_sigma': 'true', 'isotropic_sigma': 'false'})
        self.assertTrue(form.is_valid(), form.errors)
        hyper = form.to_hyperparams()
        self.assertEqual((hyper.outer_iters, hyper.k_nn), (4, 0))
        self.assertFalse(hyper.update_sigma)
        self.assertTrue(hyper.update_mu)
        self.assertFalse(hyper.isotropic_sigma)

    def test_bounds(self):
        for field, value in (('lambda_weight', -0.1), ('gamma', -1), ('inner_z_iters', 0),
                             ('outer_iters', -1), ('k_nn', -1), ('top_m_init', 0)):
            form = HyperparamsForm({field: value}, few_shot=True)
            self.assertFalse(form.is_valid(), field)
            self.assertIn(field, form.errors)

    def test_temperature_must_be_positive(self):
        form = HyperparamsForm({'tau': 0})
        self.assertFalse(form.is_valid())
        self.assertEqual(form.errors.as_data()['tau'][0].code, 'tau_not_positive')

    def test_gamma_rejected_without_support(self):
        form = HyperparamsForm({'gamma': 0.2})
        self.assertFalse(form.is_valid())
        self.assertEqual(form.non_field_errors().as_data()[0].code, 'gamma_without_support')


class FileIoTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def write_raw(self, name, payload):
        path = self.dir / name
        path.write_bytes(payload)
        return path

    def test_emb1_layout(self):
        data = unit_rows(np.random.default_rng(3), 7, 5)
        write_embeddings(data, self.dir / 'q.emb')
        raw = (self.dir / 'q.emb').read_bytes()
        self.assertEqual(raw[:4], b'EMB1')
        self.assertEqual(raw[4:12], EMB_HEADER.pack(7, 5))
        self.assertEqual(len(raw), 4 + 8 + 7 * 5 * 4)

    def test_emb1_round_trip_is_bit_exact(self):
        rng = np.random.default_rng(2024)
        path = self.dir / 'q.emb'
        for _ in range(1000):
            data = unit_rows(rng, 100, 16).astype(np.float32)
            write_embeddings(data, path)
            matrix = read_embeddings(path)
            self.assertEqual(matrix.data.astype(np.float32).tobytes(), data.tobytes())

    def test_bad_magic(self):
        path = self.write_raw('q.emb', b'EMB2' + EMB_HEADER.pack(1, 1) + struct.pack('<f', 1.0))
        with self.assertRaises(BadMagic):
            read_embeddings(path)

    def test_truncated_header(self):
        with self.assertRaises(TruncatedFile):
            read_embeddings(self.write_raw('q.emb', EMB_MAGIC + b'\x01\x00'))

    def test_truncated_payload(self):
        path = self.write_raw('q.emb', EMB_MAGIC + EMB_HEADER.pack(2, 2) + struct.pack('<3f', 1, 0, 0))
        with self.assertRaises(TruncatedFile):
            read_embeddings(path)

    def test_trailing_data(self):
        path = self.write_raw('q.emb', EMB_MAGIC + EMB_HEADER.pack(1, 2) + struct.pack('<3f', 1, 0, 0))
        with self.assertRaises(TrailingData):
            read_embeddings(path)

    def test_oversized_header(self):
        path = self.write_raw('q.emb', EMB_MAGIC + EMB_HEADER.pack(1 << 20, 1 << 10))
        with self.assertRaises(OversizedFile):
            read_embeddings(path)

    def test_nan_payload(self):
        path = self.write_raw('q.emb', EMB_MAGIC + EMB_HEADER.pack(1, 2) + struct.pack('<2f', float('nan'), 1))
        with self.assertRaises(NonFiniteValue):
            read_embeddings(path)

    def test_zero_rows_is_empty_matrix(self):
        with self.assertRaises(EmptyMatrix):
            read_embeddings(self.write_raw('q.emb', EMB_MAGIC + EMB_HEADER.pack(0, 3)))

    def test_csv_embeddings(self):
        path = self.dir / 'q.csv'
        path.write_text("1,0\n0.6,0.8\n")
        np.testing.assert_allclose(read_embeddings(path).data, [[1, 0], [0.6, 0.8]])

    def test_ragged_csv(self):
        path = self.dir / 'q.csv'
        path.write_text("1,0\n1\n")
        with self.assertRaises(RaggedCsv):
            read_embeddings(path)

    def test_csv_parse_error(self):
        path = self.dir / 'q.csv'
        path.write_text("1,zero\n")
        with self.assertRaises(ParseError):
            read_embeddings(path)

    def test_missing_file_is_io_failure(self):
        with self.assertRaises(IoFailure):
            read_embeddings(self.dir / 'missing.emb')
        with self.assertRaises(IoFailure):
            read_labels(self.dir / 'missing.labels')

    def test_labels_trailing_newline_optional(self):
        (self.dir / 'a.labels').write_text("0\n2\n1\n")
        (self.dir / 'b.labels').write_text("0\n2\n1")
        np.testing.assert_array_equal(read_labels(self.dir / 'a.labels'), [0, 2, 1])
        np.testing.assert_array_equal(read_labels(self.dir / 'b.labels'), [0, 2, 1])

    def test_labels_blank_line_and_negative(self):
        (self.dir / 'blank.labels').write_text("0\n\n1\n")
        (self.dir / 'neg.labels').write_text("0\n-1\n")
        (self.dir / 'word.labels').write_text("zero\n")
        with self.assertRaises(ParseError):
            read_labels(self.dir / 'blank.labels')
        with self.assertRaises(NegativeLabel):
            read_labels(self.dir / 'neg.labels')
        with self.assertRaises(ParseError):
            read_labels(self.dir / 'word.labels')

    def test_write_labels(self):
        write_labels(np.array([3, 0]), self.dir / 'out.labels')
        self.assertEqual((self.dir / 'out.labels').read_text(), "3\n0\n")

    def test_predictions_csv(self):
        z = SimplexAssignments([[0.25, 0.75], [0.5, 0.5]])
        write_predictions(z, self.dir / 'p.csv')
        lines = (self.dir / 'p.csv').read_text().splitlines()
        self.assertEqual(lines[0], 'index,pred,conf,p_0,p_1')
        self.assertEqual(lines[1], '0,1,0.75,0.25,0.75')
        self.assertEqual(lines[2], '1,0,0.5,0.5,0.5')
        np.testing.assert_array_equal(read_predictions(self.dir / 'p.csv'), [1, 0])

    def test_predictions_without_pred_column(self):
        (self.dir / 'p.csv').write_text("index,label\n0,1\n")
        with self.assertRaises(ParseError):
            read_predictions(self.dir / 'p.csv')

    def test_config_file(self):
        (self.dir / 'run.cfg').write_text("# run\nquery = q.emb\nouter-iters=4\n\n")
        self.assertEqual(read_config(self.dir / 'run.cfg'), {'query': 'q.emb', 'outer-iters': '4'})
        (self.dir / 'bad.cfg').write_text("query\n")
        with self.assertRaises(ParseError):
            read_config(self.dir / 'bad.cfg')

    def test_write_csv_formats_floats(self):
        write_csv(self.dir / 't.csv', ['gamma', 'accuracy'], [(0.02, 1 / 3)])
        self.assertEqual((self.dir / 't.csv').read_text(), "gamma,accuracy\n0.02,0.333333333\n")


class SynthTests(SimpleTestCase):

    def test_same_seed_same_task(self):
        a = generate_task(4, 8, 10, 2, 3.0, 0.6, 30.0, seed=11)
        b = generate_task(4, 8, 10, 2, 3.0, 0.6, 30.0, seed=11)
        np.testing.assert_array_equal(a.spec.query.data, b.spec.query.data)
        np.testing.assert_array_equal(a.truth, b.truth)
        np.testing.assert_array_equal(a.spec.support.labels, b.spec.support.labels)

    def test_shapes_and_label_balance(self):
        spec, truth = generate_task(5, 6, 12, 3, 3.0, 0.6, 30.0, seed=2)
        self.assertEqual((spec.n_query, spec.n_support, spec.n_classes, spec.query.dim), (60, 15, 5, 6))
        np.testing.assert_array_equal(np.bincount(truth), np.full(5, 12))
        np.testing.assert_allclose(spec.query.row_norms(), 1.0)
        self.assertEqual(spec.hyper.lambda_weight, 0.5)
        validate_task(spec)

    def test_prototype_noise_leaves_samples_unchanged(self):
        clean = generate_task(3, 8, 10, 2, 3.0, 0.0, 30.0, seed=5)
        noisy = generate_task(3, 8, 10, 2, 3.0, 2.0, 30.0, seed=5)
        np.testing.assert_array_equal(clean.spec.query.data, noisy.spec.query.data)
        self.assertFalse(np.array_equal(clean.spec.text.data, noisy.spec.text.data))

    def test_zero_shots_and_single_class(self):
        task = generate_task(1, 4, 5, 0, 3.0, 0.6, 30.0, seed=0)
        self.assertFalse(task.spec.is_few_shot)
        self.assertEqual(task.spec.hyper.lambda_weight, 1.0)
        np.testing.assert_array_equal(task.truth, np.zeros(5))

    def test_invalid_sizes(self):
        with self.assertRaises(ValueError):
            generate_task(0, 4, 5, 0, 3.0, 0.6, 30.0, seed=0)

    def test_write_task_directory(self):
        task = generate_task(3, 4, 5, 2, 3.0, 0.6, 30.0, seed=0)
        with tempfile.TemporaryDirectory() as tmp:
            directory = write_task(task, Path(tmp) / 'task', seed=0)
            config = read_config(directory / 'config.txt')
            self.assertEqual(config['query'], 'query.emb')
            self.assertEqual(config['support-labels'], 'support.labels')
            self.assertEqual(float(config['tau']), 30.0)
            np.testing.assert_array_equal(read_labels(directory / 'truth.labels'), task.truth)
            np.testing.assert_allclose(read_embeddings(directory / 'text.emb').data, task.spec.text.data, atol=1e-6)
            self.assertEqual(read_embeddings(directory / 'validation.emb').n_rows, 12)
