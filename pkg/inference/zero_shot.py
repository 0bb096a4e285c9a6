"""Text-driven soft pseudo-labels and the prototype initialisations."""
import numpy as np
from scipy.special import log_softmax

from tasks.exceptions import DimensionMismatch, EmptyClass
from tasks.types import SimplexAssignments


def soft_label_logits(F, T, tau):
    if F.dim != T.dim:
        raise DimensionMismatch(f"embeddings have dimension {F.dim}, text prototypes {T.dim}.")
    return tau * (F.data @ T.data.T)


def compute_soft_labels(F, T, tau):
    """ŷ_i = softmax_k(τ f_i·t_k), evaluated in log-space."""
    if tau < 0:
        raise ValueError(f"Temperature must be non-negative, got {tau}.")
    return SimplexAssignments(np.exp(log_softmax(soft_label_logits(F, T, tau), axis=1)))


def hard_predict(y):
    """Per-row argmax; ties go to the lowest class index."""
    z = y.z if isinstance(y, SimplexAssignments) else np.asarray(y)
    return np.argmax(z, axis=1)


def init_prototypes_topk(F, y, m):
    """
    μ_k = mean of the min(m, N) query embeddings most confidently assigned
    to class k by ŷ. A sample may count for several classes.
    """
    if m < 1:
        raise ValueError(f"m must be at least 1, got {m}.")
    take = min(m, F.n_rows)
    mu = np.empty((y.n_classes, F.dim))
    for k in range(y.n_classes):
        # Stable sort on -ŷ keeps lower indices first among equal confidences.
        top = np.argsort(-y.z[:, k], kind='stable')[:take]
        mu[k] = F.data[top].mean(axis=0)
    return mu


def init_prototypes_support(support, labels, n_classes=None):
    """μ_k = mean of the support embeddings labelled k."""
    labels = np.asarray(labels)
    n_classes = int(labels.max()) + 1 if n_classes is None else n_classes
    mu = np.empty((n_classes, support.dim))
    for k in range(n_classes):
        rows = support.data[labels == k]
        if rows.shape[0] == 0:
            raise EmptyClass(f"class {k} has no support shot.")
        mu[k] = rows.mean(axis=0)
    return mu
