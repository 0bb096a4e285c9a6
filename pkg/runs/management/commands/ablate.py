"""
Component ablation on one zero-shot task: which blocks of the solver carry
the accuracy gain, and how sensitive it is to λ and to the neighbour count.
"""
from dataclasses import replace

from django.core.management.base import BaseCommand

from inference.solver import run
from inference.zero_shot import hard_predict
from runs import cli
from runs.reporting import render_ablation, top1_accuracy
from tasks.fileio import read_labels, write_csv

LAMBDA_GRID = (0.1, 0.5, 1.0, 2.0, 5.0)
K_NN_GRID = (3, 5, 10)


def ablation_settings(hyper):
    """[(setting, value, Hyperparams)] in report order."""
    components = [
        ('full', hyper),
        ('no_mu', replace(hyper, update_mu=False)),
        ('no_sigma', replace(hyper, update_sigma=False)),
        ('no_laplacian', replace(hyper, k_nn=0)),
        ('no_mu_no_sigma', replace(hyper, update_mu=False, update_sigma=False)),
    ]
    rows = [('components', name, h) for name, h in components]
    rows += [('sigma', 'diagonal', replace(hyper, isotropic_sigma=False)),
             ('sigma', 'isotropic', replace(hyper, isotropic_sigma=True))]
    rows += [('lambda', f"{lam:g}", replace(hyper, lambda_weight=lam)) for lam in LAMBDA_GRID]
    rows += [('k_nn', str(k), replace(hyper, k_nn=k)) for k in K_NN_GRID]
    return rows


class Command(BaseCommand):
    help = "Ablate solver components, Σ structure, λ and the neighbour count on one task with truth labels."

    def add_arguments(self, parser):
        cli.add_task_arguments(parser, few_shot=False, outputs=False)
        parser.add_argument('--out', help="Ablation table CSV (setting,value,accuracy) to write.")

    def handle(self, *args, **options):
        cli.configure_logging(options['verbosity'])
        with cli.command_errors():
            resolved = cli.resolve_options(options)
            cli.require(resolved, 'truth')
            hyper, tau = cli.build_hyperparams(resolved, few_shot=False)
            spec = cli.load_task(resolved, hyper, tau, few_shot=False)
            truth = read_labels(resolved['truth'])

            rows = []
            for setting, value, variant in ablation_settings(hyper):
                assignments, state = run(replace(spec, hyper=variant), threads=resolved['threads'])
                if not rows:
                    rows.append(('zero_shot', '-', top1_accuracy(hard_predict(state.soft_labels), truth)))
                rows.append((setting, value, top1_accuracy(hard_predict(assignments), truth)))

            if resolved.get('out'):
                write_csv(resolved['out'], ['setting', 'value', 'accuracy'], rows)
        self.stdout.write(render_ablation(rows), ending='')
