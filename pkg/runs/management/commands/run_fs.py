from dataclasses import replace

from django.core.management.base import BaseCommand, CommandError

from fewshot.tuning import run_fewshot
from runs import cli
from runs.reporting import render_run_summary
from tasks.fileio import read_embeddings, read_labels, write_csv
from tasks.types import DEFAULT_GAMMA_GRID


def parse_grid(value):
    if value is None:
        return list(DEFAULT_GAMMA_GRID)
    try:
        grid = [float(token) for token in str(value).split(',') if token.strip()]
    except ValueError as exc:
        raise CommandError(f"--gamma-grid: {exc}") from exc
    if any(not g >= 0 for g in grid):
        raise CommandError("--gamma-grid values must be non-negative.")
    return grid


class Command(BaseCommand):
    help = "Few-shot transduction: labelled shots join the graph and the GMM, γ picked on validation shots."

    def add_arguments(self, parser):
        cli.add_task_arguments(parser, few_shot=True)

    def handle(self, *args, **options):
        cli.configure_logging(options['verbosity'])
        with cli.command_errors():
            resolved = cli.resolve_options(options)
            hyper, tau = cli.build_hyperparams(resolved, few_shot=True)
            spec = cli.load_task(resolved, hyper, tau, few_shot=True)
            grid = parse_grid(resolved['gamma_grid'])

            validation = validation_labels = None
            if resolved.get('validation'):
                cli.require(resolved, 'validation_labels')
                validation = read_embeddings(resolved['validation'])
                validation_labels = read_labels(resolved['validation_labels'])

            result = run_fewshot(
                spec,
                gamma=hyper.gamma if resolved.get('gamma') is not None else None,
                grid=grid,
                lambda_weight=hyper.lambda_weight,
                validation=validation,
                validation_labels=validation_labels,
                seed=int(resolved['seed'] or 0),
                threads=resolved['threads'],
            )
            state = result.state
            zero_shot_accuracy, transduced_accuracy = cli.accuracies(resolved, state, result.assignments)
            cli.write_outputs(resolved, result.assignments, state)
            if resolved.get('scores'):
                write_csv(resolved['scores'], ['gamma', 'validation_accuracy'], result.scores)
            final_spec = replace(spec, hyper=replace(spec.hyper, gamma=result.gamma))
            if resolved['record']:
                cli.record_run(
                    'run_fs', resolved, final_spec, state, zero_shot_accuracy, transduced_accuracy,
                    gamma_scores=result.scores,
                )

        self.stdout.write(render_run_summary(
            final_spec, state, 'few-shot',
            zero_shot_accuracy=zero_shot_accuracy,
            transduced_accuracy=transduced_accuracy,
            gamma_scores=result.scores,
            predictions_path=resolved.get('out'),
        ), ending='')
