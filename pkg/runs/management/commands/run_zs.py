from django.core.management.base import BaseCommand

from inference.solver import run
from runs import cli
from runs.reporting import render_run_summary


class Command(BaseCommand):
    help = "Zero-shot transduction: refine text-prompt predictions over a batch of query embeddings."

    def add_arguments(self, parser):
        cli.add_task_arguments(parser, few_shot=False)

    def handle(self, *args, **options):
        cli.configure_logging(options['verbosity'])
        with cli.command_errors():
            resolved = cli.resolve_options(options)
            hyper, tau = cli.build_hyperparams(resolved, few_shot=False)
            spec = cli.load_task(resolved, hyper, tau, few_shot=False)
            assignments, state = run(spec, threads=resolved['threads'])
            zero_shot_accuracy, transduced_accuracy = cli.accuracies(resolved, state, assignments)
            cli.write_outputs(resolved, assignments, state)
            if resolved['record']:
                cli.record_run('run_zs', resolved, spec, state, zero_shot_accuracy, transduced_accuracy)

        self.stdout.write(render_run_summary(
            spec, state, 'zero-shot',
            zero_shot_accuracy=zero_shot_accuracy,
            transduced_accuracy=transduced_accuracy,
            predictions_path=resolved.get('out'),
        ), ending='')
