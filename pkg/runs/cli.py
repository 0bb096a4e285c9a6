"""
Shared plumbing of the management commands: flags, config-file merging,
task loading, output files and run recording.

Flag resolution order is: explicit flag, then ``--config`` file, then the
built-in default. Flags that can come from a config file therefore default to
None in argparse.
"""
import logging
from contextlib import contextmanager
from pathlib import Path

from django.conf import settings
from django.core.management.base import CommandError

from inference.zero_shot import hard_predict
from tasks.exceptions import ParseError, TransductionError
from tasks.fileio import (
    read_config, read_embeddings, read_labels, write_csv, write_graph, write_predictions,
)
from tasks.forms import HyperparamsForm
from tasks.types import (
    DEFAULT_GAMMA_GRID, DEFAULT_INNER_Z_ITERS, DEFAULT_K_NN, DEFAULT_OUTER_ITERS,
    DEFAULT_TOP_M_INIT, FEW_SHOT_LAMBDA, ZERO_SHOT_LAMBDA, SupportSet, TaskSpec,
)
from tasks.validation import validate_task

from .models import TransductionRun
from .reporting import top1_accuracy

DEFAULT_TAU = 100.0

# config key -> options dest
CONFIG_KEYS = {
    'query': 'query', 'text': 'text', 'support': 'support', 'support-labels': 'support_labels',
    'validation': 'validation', 'validation-labels': 'validation_labels', 'truth': 'truth',
    'tau': 'tau', 'lambda': 'lambda_weight', 'gamma': 'gamma', 'gamma-grid': 'gamma_grid',
    'outer-iters': 'outer_iters', 'inner-z-iters': 'inner_z_iters', 'k-nn': 'k_nn',
    'top-m-init': 'top_m_init', 'symmetrize-graph': 'symmetrize_graph', 'freeze-mu': 'freeze_mu',
    'freeze-sigma': 'freeze_sigma', 'isotropic-sigma': 'isotropic_sigma', 'seed': 'seed',
    'threads': 'threads', 'out': 'out', 'trace': 'trace', 'graph-dump': 'graph_dump', 'scores': 'scores',
}
PATH_KEYS = {
    'query', 'text', 'support', 'support_labels', 'validation', 'validation_labels', 'truth',
    'out', 'trace', 'graph_dump', 'scores',
}
HYPER_KEYS = tuple(HyperparamsForm.base_fields)


def add_task_arguments(parser, few_shot=False, outputs=True):
    lam = FEW_SHOT_LAMBDA if few_shot else ZERO_SHOT_LAMBDA
    parser.add_argument('--config', help="Flat key=value file; keys are these flag names without dashes.")
    parser.add_argument('--query', help="Query embeddings (EMB1 or CSV).")
    parser.add_argument('--text', help="Text prototype embeddings, one row per class (EMB1 or CSV).")
    parser.add_argument('--tau', type=float, help=f"Softmax temperature of the text prior (default: {DEFAULT_TAU:g}).")
    parser.add_argument('--lambda', dest='lambda_weight', type=float, help=f"Weight of the text KL term (default: {lam:g}).")
    parser.add_argument('--outer-iters', type=int, help=f"Outer z/μ/Σ block iterations (default: {DEFAULT_OUTER_ITERS}).")
    parser.add_argument('--inner-z-iters', type=int, help=f"z-sweeps per outer iteration (default: {DEFAULT_INNER_Z_ITERS}).")
    parser.add_argument('--k-nn', type=int, help=f"Neighbours per node in the affinity graph, 0 disables it (default: {DEFAULT_K_NN}).")
    parser.add_argument('--top-m-init', type=int, help=f"Most confident samples per class averaged into the initial means (default: {DEFAULT_TOP_M_INIT}).")
    parser.add_argument('--symmetrize-graph', action='store_true', default=None, help="Use the union of directed kNN edges (default: off).")
    parser.add_argument('--freeze-mu', action='store_true', default=None, help="Skip the μ update (default: off).")
    parser.add_argument('--freeze-sigma', action='store_true', default=None, help="Skip the Σ update (default: off).")
    parser.add_argument('--isotropic-sigma', action='store_true', default=None, help="Constrain Σ to σ²I (default: off).")
    parser.add_argument('--truth', help="Query truth labels; enables accuracy reporting.")
    parser.add_argument('--threads', type=int, help="Solver row-parallelism (default: TRANSDUCT_THREADS or 1).")
    if outputs:
        parser.add_argument('--out', help="Predictions CSV to write.")
        parser.add_argument('--trace', help="Objective trace CSV to write.")
        parser.add_argument('--graph-dump', help="Write the affinity graph as 'i j w' lines.")
        parser.add_argument('--record', action='store_true', help="Store the run in the run-history database.")
    if few_shot:
        parser.add_argument('--support', help="Support (shot) embeddings.")
        parser.add_argument('--support-labels', help="Class index of every support embedding.")
        parser.add_argument('--validation', help="Validation embeddings; otherwise validation shots are carved from the support.")
        parser.add_argument('--validation-labels', help="Class index of every validation embedding.")
        parser.add_argument('--gamma', type=float, help="Support weight; skips the grid search.")
        parser.add_argument('--gamma-grid', help="Comma-separated γ candidates (default: %s)." % ','.join(f"{g:g}" for g in DEFAULT_GAMMA_GRID))
        parser.add_argument('--seed', type=int, help="Seed of the validation split (default: 0).")
        parser.add_argument('--scores', help="γ score table CSV to write.")


def configure_logging(verbosity):
    if verbosity >= 2:
        for name in ('tasks', 'inference', 'fewshot', 'runs'):
            logging.getLogger(name).setLevel(logging.DEBUG)


@contextmanager
def command_errors():
    """Turn input and I/O errors into CommandError (stderr message, exit status 1)."""
    try:
        yield
    except TransductionError as exc:
        raise CommandError(f"{exc.__class__.__name__}: {exc}") from exc
    except OSError as exc:
        raise CommandError(f"IoFailure: {exc}") from exc


def resolve_options(options):
    """Merge explicit flags over the config file; config paths are relative to the file."""
    resolved = {dest: options.get(dest) for dest in CONFIG_KEYS.values()}
    resolved['record'] = options.get('record', False)
    config_path = options.get('config')
    if config_path:
        base = Path(config_path).parent
        raw = read_config(config_path)
        unknown = sorted(set(raw) - set(CONFIG_KEYS))
        if unknown:
            raise ParseError(f"{config_path}: unknown keys {', '.join(unknown)}.")
        for key, value in raw.items():
            dest = CONFIG_KEYS[key]
            if resolved[dest] is None:
                resolved[dest] = str(base / value) if dest in PATH_KEYS else value
    threads = resolved['threads']
    resolved['threads'] = settings.TRANSDUCT_THREADS if threads is None else int(threads)
    if resolved['threads'] < 1:
        raise CommandError("--threads must be at least 1.")
    return resolved


def build_hyperparams(resolved, few_shot=False):
    data = {name: resolved[name] for name in HYPER_KEYS if resolved.get(name) is not None}
    form = HyperparamsForm(data, few_shot=few_shot)
    if not form.is_valid():
        raise CommandError(f"Invalid hyper-parameters:\n{form.errors.as_text()}")
    tau = form.cleaned_data.get('tau')
    return form.to_hyperparams(), DEFAULT_TAU if tau is None else tau


def require(resolved, *names):
    missing = [f"--{name.replace('_', '-')}" for name in names if not resolved.get(name)]
    if missing:
        raise CommandError(f"Missing required input: {', '.join(missing)}.")


def load_task(resolved, hyper, tau, few_shot=False):
    require(resolved, 'query', 'text')
    support = None
    if few_shot:
        require(resolved, 'support', 'support_labels')
        support = SupportSet(read_embeddings(resolved['support']), read_labels(resolved['support_labels']))
    spec = TaskSpec(
        query=read_embeddings(resolved['query']),
        text=read_embeddings(resolved['text']),
        tau=tau,
        hyper=hyper,
        support=support,
    )
    return validate_task(spec)


def accuracies(resolved, state, assignments):
    """(zero-shot, transduced) top-1 accuracy, or (None, None) without truth labels."""
    if not resolved.get('truth'):
        return None, None
    truth = read_labels(resolved['truth'])
    return (
        top1_accuracy(hard_predict(state.soft_labels), truth),
        top1_accuracy(hard_predict(assignments), truth),
    )


def trace_rows(state):
    return [[e.iteration, e.block, e.paper_literal, e.update_consistent] for e in state.objective_trace]


def write_outputs(resolved, assignments, state):
    if resolved.get('out'):
        write_predictions(assignments, resolved['out'])
    if resolved.get('trace'):
        write_csv(resolved['trace'], ['iteration', 'block', 'paper_literal', 'update_consistent'], trace_rows(state))
    if resolved.get('graph_dump'):
        write_graph(state.graph, resolved['graph_dump'])


def record_run(command, resolved, spec, state, zero_shot_accuracy, transduced_accuracy, gamma_scores=()):
    hyper = spec.hyper
    return TransductionRun.objects.create(
        command=command,
        query_path=str(resolved['query']),
        text_path=str(resolved['text']),
        support_path=str(resolved.get('support') or ''),
        n_query=spec.n_query,
        n_support=spec.n_support,
        n_classes=spec.n_classes,
        dim=spec.query.dim,
        tau=spec.tau,
        lambda_weight=hyper.lambda_weight,
        gamma=hyper.gamma,
        outer_iters=hyper.outer_iters,
        inner_z_iters=hyper.inner_z_iters,
        k_nn=hyper.k_nn,
        top_m_init=hyper.top_m_init,
        zero_shot_accuracy=zero_shot_accuracy,
        transduced_accuracy=transduced_accuracy,
        final_objective=state.objective_trace[-1].update_consistent,
        objective_trace=trace_rows(state),
        gamma_scores=[list(row) for row in gamma_scores],
        descent_violations=len(state.descent_violations),
    )
