import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
from django.contrib.auth.models import User
from django.core.management import call_command, load_command_class
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase
from django.urls import reverse

from tasks.exceptions import DimensionMismatch
from tasks.fileio import read_config, write_embeddings, write_labels

from .models import TransductionRun
from .reporting import per_class_accuracy, render_eval_summary, top1_accuracy


def report_value(output, prefix):
    for line in output.splitlines():
        if line.startswith(prefix):
            return line[len(prefix):].strip()
    raise AssertionError(f"{prefix!r} not in output:\n{output}")


class CommandTestMixin:
    synth_options = {'classes': 3, 'dim': 8, 'queries_per_class': 20, 'shots': 5, 'seed': 1}

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)
        self.task = self.dir / 'task'
        self.call('synth', out=str(self.task), **self.synth_options)
        self.config = str(self.task / 'config.txt')

    def tearDown(self):
        self.tmp.cleanup()

    def call(self, name, **options):
        out = StringIO()
        call_command(name, stdout=out, **options)
        return out.getvalue()


class SynthCommandTests(CommandTestMixin, SimpleTestCase):

    def test_task_directory(self):
        names = sorted(p.name for p in self.task.iterdir())
        self.assertEqual(names, [
            'config.txt', 'query.emb', 'support.emb', 'support.labels', 'text.emb',
            'truth.labels', 'validation.emb', 'validation.labels',
        ])
        self.assertEqual(read_config(self.config)['seed'], '1')

    def test_same_seed_gives_identical_files(self):
        again = self.dir / 'again'
        self.call('synth', out=str(again), **self.synth_options)
        for path in self.task.iterdir():
            self.assertEqual(path.read_bytes(), (again / path.name).read_bytes(), path.name)

    def test_single_class_without_shots(self):
        out = self.call('synth', out=str(self.dir / 'one'), classes=1, shots=0, queries_per_class=5)
        self.assertIn('5 queries, 0 shots, 1 classes', out)
        self.assertFalse((self.dir / 'one' / 'support.emb').exists())

    def test_requires_out(self):
        with self.assertRaises(CommandError):
            self.call('synth')


class RunZeroShotCommandTests(CommandTestMixin, SimpleTestCase):

    def test_predictions_trace_and_report(self):
        preds, trace, graph = self.dir / 'p.csv', self.dir / 'trace.csv', self.dir / 'graph.txt'
        out = self.call('run_zs', config=self.config, out=str(preds), trace=str(trace), graph_dump=str(graph))
        lines = preds.read_text().splitlines()
        self.assertEqual(lines[0], 'index,pred,conf,p_0,p_1,p_2')
        self.assertEqual(len(lines), 61)
        trace_lines = trace.read_text().splitlines()
        self.assertEqual(trace_lines[0], 'iteration,block,paper_literal,update_consistent')
        self.assertEqual(len(trace_lines), 1 + 1 + 10 * 7)
        self.assertEqual(len(graph.read_text().splitlines()), 60 * 3)
        float(report_value(out, 'zero-shot top-1 accuracy:'))
        float(report_value(out, 'transduced top-1 accuracy:'))
        self.assertIn('tau=30 lambda=1 gamma=0', out)

    def test_no_outer_iterations_keeps_zero_shot_accuracy(self):
        out = self.call('run_zs', config=self.config, outer_iters=0)
        self.assertEqual(
            report_value(out, 'zero-shot top-1 accuracy:'),
            report_value(out, 'transduced top-1 accuracy:'),
        )

    def test_thread_count_does_not_change_outputs(self):
        for threads in (1, 3):
            self.call('run_zs', config=self.config, threads=threads,
                      out=str(self.dir / f'p{threads}.csv'), trace=str(self.dir / f't{threads}.csv'))
        self.assertEqual((self.dir / 'p1.csv').read_bytes(), (self.dir / 'p3.csv').read_bytes())
        self.assertEqual((self.dir / 't1.csv').read_bytes(), (self.dir / 't3.csv').read_bytes())

    def test_flags_override_config(self):
        out = self.call('run_zs', config=self.config, tau=5.0, lambda_weight=2.0, k_nn=0)
        self.assertIn('tau=5 lambda=2 gamma=0', out)
        self.assertIn('k_nn=0', out)

    def test_explicit_paths_without_config(self):
        out = self.call('run_zs', query=str(self.task / 'query.emb'), text=str(self.task / 'text.emb'))
        self.assertIn('tau=100 lambda=1', out)
        self.assertNotIn('top-1 accuracy', out)

    def test_dimension_mismatch(self):
        wrong = self.dir / 'wrong.emb'
        write_embeddings(np.eye(3, 5), wrong)
        with self.assertRaisesMessage(CommandError, 'DimensionMismatch'):
            self.call('run_zs', query=str(self.task / 'query.emb'), text=str(wrong))

    def test_missing_query(self):
        with self.assertRaisesMessage(CommandError, '--query'):
            self.call('run_zs', text=str(self.task / 'text.emb'))

    def test_unknown_config_key(self):
        config = self.dir / 'bad.txt'
        config.write_text("query=task/query.emb\nlearning-rate=0.1\n")
        with self.assertRaisesMessage(CommandError, 'learning-rate'):
            self.call('run_zs', config=str(config))

    def test_invalid_hyperparameters(self):
        with self.assertRaisesMessage(CommandError, 'inner_z_iters'):
            self.call('run_zs', config=self.config, inner_z_iters=0)

    def test_missing_file(self):
        with self.assertRaisesMessage(CommandError, 'IoFailure'):
            self.call('run_zs', query=str(self.dir / 'nope.emb'), text=str(self.task / 'text.emb'))


class RunFewShotCommandTests(CommandTestMixin, SimpleTestCase):

    def test_default_grid_writes_four_scores(self):
        scores = self.dir / 'scores.csv'
        out = self.call('run_fs', config=self.config, scores=str(scores), out=str(self.dir / 'p.csv'))
        lines = scores.read_text().splitlines()
        self.assertEqual(lines[0], 'gamma,validation_accuracy')
        self.assertEqual([line.split(',')[0] for line in lines[1:]], ['0.002', '0.01', '0.02', '0.2'])
        self.assertIn(report_value(out, 'selected gamma:'), ['0.002', '0.01', '0.02', '0.2'])
        self.assertIn('lambda=0.5', out)

    def test_explicit_gamma_skips_search(self):
        scores = self.dir / 'scores.csv'
        out = self.call('run_fs', config=self.config, gamma=0.02, scores=str(scores))
        self.assertIn('gamma=0.02', out)
        self.assertNotIn('selected gamma', out)
        self.assertEqual(scores.read_text().splitlines(), ['gamma,validation_accuracy'])

    def test_custom_grid_without_validation_pool(self):
        config = self.dir / 'carve.txt'
        config.write_text(
            "query=task/query.emb\ntext=task/text.emb\nsupport=task/support.emb\n"
            "support-labels=task/support.labels\ntau=30\ngamma-grid=0.01,0.2\n"
        )
        out = self.call('run_fs', config=str(config), seed=4)
        self.assertIn('gamma=0.01:', out)
        self.assertIn('gamma=0.2:', out)

    def test_bad_grid(self):
        with self.assertRaisesMessage(CommandError, '--gamma-grid'):
            self.call('run_fs', config=self.config, gamma_grid='0.01,abc')

    def test_missing_support_labels(self):
        with self.assertRaisesMessage(CommandError, '--support-labels'):
            self.call('run_fs', query=str(self.task / 'query.emb'), text=str(self.task / 'text.emb'),
                      support=str(self.task / 'support.emb'))

    def test_zero_shot_rejects_gamma(self):
        config = self.dir / 'zs.txt'
        config.write_text("query=task/query.emb\ntext=task/text.emb\ngamma=0.2\n")
        with self.assertRaisesMessage(CommandError, 'few-shot'):
            self.call('run_zs', config=str(config))


class EvalCommandTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)
        (self.dir / 'p.csv').write_text("index,pred,conf,p_0,p_1\n0,0,0.9,0.9,0.1\n1,1,0.8,0.2,0.8\n")

    def tearDown(self):
        self.tmp.cleanup()

    def evaluate(self, truth):
        write_labels(truth, self.dir / 'truth.labels')
        out = StringIO()
        call_command('eval', predictions=str(self.dir / 'p.csv'), truth=str(self.dir / 'truth.labels'), stdout=out)
        return out.getvalue()

    def test_all_correct(self):
        out = self.evaluate([0, 1])
        self.assertEqual(report_value(out, 'top-1 accuracy:'), '1.0000')
        self.assertIn('class 1 (1 samples): 1.0000', out)

    def test_half_correct(self):
        self.assertEqual(report_value(self.evaluate([0, 0]), 'top-1 accuracy:'), '0.5000')

    def test_length_mismatch(self):
        with self.assertRaises(CommandError):
            self.evaluate([0, 1, 1])

    def test_missing_inputs(self):
        with self.assertRaises(CommandError):
            call_command('eval', predictions=str(self.dir / 'p.csv'))


class AblateCommandTests(CommandTestMixin, SimpleTestCase):
    synth_options = {'classes': 3, 'dim': 8, 'queries_per_class': 12, 'shots': 0, 'seed': 2}

    def test_ablation_table(self):
        table = self.dir / 'ablation.csv'
        out = self.call('ablate', config=self.config, out=str(table), outer_iters=2)
        rows = table.read_text().splitlines()
        self.assertEqual(rows[0], 'setting,value,accuracy')
        self.assertEqual(len(rows), 1 + 1 + 5 + 2 + 5 + 3)
        self.assertEqual(rows[1].split(',')[:2], ['zero_shot', '-'])
        for label in ('components=full', 'components=no_laplacian', 'sigma=isotropic', 'lambda=5', 'k_nn=10'):
            self.assertIn(label, out)

    def test_needs_truth(self):
        with self.assertRaisesMessage(CommandError, '--truth'):
            self.call('ablate', query=str(self.task / 'query.emb'), text=str(self.task / 'text.emb'))


class HelpTests(SimpleTestCase):

    def help_texts(self, name):
        parser = load_command_class('runs', name).create_parser('manage.py', name)
        return {action.dest: action.help or '' for action in parser._actions}

    def test_zero_shot_defaults(self):
        texts = self.help_texts('run_zs')
        self.assertIn('(default: 1)', texts['lambda_weight'])
        self.assertIn('(default: 10)', texts['outer_iters'])
        self.assertIn('(default: 5)', texts['inner_z_iters'])
        self.assertIn('(default: 3)', texts['k_nn'])
        self.assertIn('(default: 8)', texts['top_m_init'])

    def test_few_shot_defaults(self):
        texts = self.help_texts('run_fs')
        self.assertIn('(default: 0.5)', texts['lambda_weight'])
        self.assertIn('0.002,0.01,0.02,0.2', texts['gamma_grid'])

    def test_synth_defaults(self):
        parser = load_command_class('runs', 'synth').create_parser('manage.py', 'synth')
        defaults = {action.dest: action.default for action in parser._actions}
        self.assertEqual((defaults['classes'], defaults['dim'], defaults['seed']), (10, 32, 7))


class ReportingTests(SimpleTestCase):

    def test_accuracies(self):
        self.assertEqual(top1_accuracy([0, 1, 1], [0, 1, 0]), 2 / 3)
        self.assertEqual(per_class_accuracy([0, 1, 1], [0, 1, 0]), [(0, 2, 0.5), (1, 1, 1.0)])
        with self.assertRaises(DimensionMismatch):
            top1_accuracy([0], [0, 1])

    def test_eval_summary(self):
        text = render_eval_summary(0.5, [(0, 2, 0.5)])
        self.assertEqual(text, "top-1 accuracy: 0.5000\nper-class accuracy:\n  class 0 (2 samples): 0.5000\n")


class RunHistoryTests(CommandTestMixin, TestCase):

    def test_record_zero_shot_run(self):
        self.call('run_zs', config=self.config, record=True, outer_iters=2)
        run = TransductionRun.objects.get()
        self.assertEqual((run.command, run.n_query, run.n_classes, run.dim), ('run_zs', 60, 3, 8))
        self.assertEqual(run.lambda_weight, 1.0)
        self.assertEqual(len(run.objective_trace), 1 + 2 * 7)
        self.assertIsNotNone(run.accuracy_gain)

    def test_record_few_shot_run(self):
        self.call('run_fs', config=self.config, record=True, outer_iters=1)
        run = TransductionRun.objects.get()
        self.assertEqual((run.command, run.n_support), ('run_fs', 15))
        self.assertEqual(len(run.gamma_scores), 4)
        self.assertIn(run.gamma, [0.002, 0.01, 0.02, 0.2])

    def test_runs_are_not_recorded_by_default(self):
        self.call('run_zs', config=self.config, outer_iters=1)
        self.assertFalse(TransductionRun.objects.exists())

    def test_admin_changelist(self):
        self.call('run_zs', config=self.config, record=True, outer_iters=1)
        admin = User.objects.create_superuser('admin', 'admin@example.com', 'pw')
        self.client.force_login(admin)
        response = self.client.get(reverse('admin:runs_transductionrun_changelist'))
        self.assertEqual(response.status_code, 200)
        self.assertContains(response, 'query.emb')
