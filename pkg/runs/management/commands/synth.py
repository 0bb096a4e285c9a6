from django.core.management.base import BaseCommand, CommandError

from runs import cli
from tasks.synth import generate_task, write_task


class Command(BaseCommand):
    help = "Write a seeded synthetic task directory with a config.txt usable by run_zs and run_fs."

    def add_arguments(self, parser):
        parser.add_argument('--out', help="Directory to create.")
        parser.add_argument('--classes', type=int, default=10, help="Number of classes K (default: 10).")
        parser.add_argument('--dim', type=int, default=32, help="Embedding dimension d (default: 32).")
        parser.add_argument('--queries-per-class', type=int, default=200, help="Query samples per class (default: 200).")
        parser.add_argument('--shots', type=int, default=4, help="Support shots per class, 0 for none (default: 4).")
        parser.add_argument('--validation-per-class', type=int, default=4, help="Validation pool per class (default: 4).")
        parser.add_argument('--class-sep', type=float, default=3.0, help="Distance of class centres from noise (default: 3).")
        parser.add_argument('--prototype-noise', type=float, default=0.6, help="Noise on the text prototypes (default: 0.6).")
        parser.add_argument('--tau', type=float, default=30.0, help="Temperature written to the config (default: 30).")
        parser.add_argument('--seed', type=int, default=7, help="Random seed (default: 7).")

    def handle(self, *args, **options):
        cli.configure_logging(options['verbosity'])
        if not options['out']:
            raise CommandError("Missing required input: --out.")
        if options['queries_per_class'] < 1 or options['shots'] < 0 or options['validation_per_class'] < 0:
            raise CommandError("Sample counts must be non-negative, with at least one query per class.")
        with cli.command_errors():
            try:
                task = generate_task(
                    options['classes'], options['dim'], options['queries_per_class'], options['shots'],
                    options['class_sep'], options['prototype_noise'], options['tau'], options['seed'],
                    validation_per_class=options['validation_per_class'],
                )
            except ValueError as exc:
                raise CommandError(str(exc)) from exc
            directory = write_task(task, options['out'], seed=options['seed'])
        self.stdout.write(
            f"wrote {task.spec.n_query} queries, {task.spec.n_support} shots, "
            f"{task.spec.n_classes} classes to {directory}"
        )
