from django.core.management.base import BaseCommand, CommandError

from runs import cli
from runs.reporting import per_class_accuracy, render_eval_summary, top1_accuracy
from tasks.fileio import read_labels, read_predictions


class Command(BaseCommand):
    help = "Score a predictions CSV against truth labels."

    def add_arguments(self, parser):
        parser.add_argument('--predictions', help="Predictions CSV written by run_zs or run_fs.")
        parser.add_argument('--truth', help="Truth labels, one per line.")

    def handle(self, *args, **options):
        cli.require(options, 'predictions', 'truth')
        with cli.command_errors():
            predictions = read_predictions(options['predictions'])
            truth = read_labels(options['truth'])
            if predictions.shape != truth.shape:
                raise CommandError(
                    f"{predictions.shape[0]} predictions but {truth.shape[0]} truth labels."
                )
            accuracy = top1_accuracy(predictions, truth)
            per_class = per_class_accuracy(predictions, truth)
        self.stdout.write(render_eval_summary(accuracy, per_class), ending='')
