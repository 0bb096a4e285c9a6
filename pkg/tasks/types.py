"""
Data types of a transduction task.

Everything here is a plain frozen dataclass around numpy arrays. The arrays
are copied to float64 (int64 for labels) and marked read-only on
construction, so a validated task can be shared between solver threads.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import sparse

VARIANCE_FLOOR = 1e-12  # lower bound on every diag(Σ) entry

# Built-in defaults (zero-shot λ = 1, few-shot λ = 0.5).
ZERO_SHOT_LAMBDA = 1.0
FEW_SHOT_LAMBDA = 0.5
DEFAULT_OUTER_ITERS = 10
DEFAULT_INNER_Z_ITERS = 5
DEFAULT_K_NN = 3
DEFAULT_TOP_M_INIT = 8
DEFAULT_GAMMA_GRID = (0.002, 0.01, 0.02, 0.2)
MAX_VALIDATION_SHOTS = 4


def _frozen(array, dtype):
    out = np.array(array, dtype=dtype, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class EmbeddingMatrix:
    """N×d matrix of embeddings, one sample (or text prototype) per row."""
    data: np.ndarray

    def __post_init__(self):
        data = _frozen(self.data, np.float64)
        if data.ndim != 2:
            raise ValueError(f"Embeddings must be a 2-D matrix, got shape {data.shape}.")
        object.__setattr__(self, 'data', data)

    @property
    def n_rows(self):
        return self.data.shape[0]

    @property
    def dim(self):
        return self.data.shape[1]

    def row_norms(self):
        return np.linalg.norm(self.data, axis=1)

    def __len__(self):
        return self.n_rows


@dataclass(frozen=True)
class SimplexAssignments:
    """N×K matrix whose rows are probability vectors over the K classes."""
    z: np.ndarray

    def __post_init__(self):
        z = _frozen(self.z, np.float64)
        if z.ndim != 2:
            raise ValueError(f"Assignments must be a 2-D matrix, got shape {z.shape}.")
        object.__setattr__(self, 'z', z)

    @property
    def n_rows(self):
        return self.z.shape[0]

    @property
    def n_classes(self):
        return self.z.shape[1]

    def is_valid(self, atol=1e-9):
        return bool(
            np.all(self.z >= 0.0)
            and np.all(self.z <= 1.0 + atol)
            and np.allclose(self.z.sum(axis=1), 1.0, rtol=0.0, atol=atol)
        )

    @classmethod
    def one_hot(cls, labels, n_classes):
        labels = np.asarray(labels, dtype=np.int64)
        z = np.zeros((labels.shape[0], n_classes))
        z[np.arange(labels.shape[0]), labels] = 1.0
        return cls(z)


@dataclass(frozen=True)
class GmmParams:
    """Class means (K×d) and the diagonal covariance shared by all classes (d)."""
    mu: np.ndarray
    sigma_diag: np.ndarray

    def __post_init__(self):
        mu = _frozen(self.mu, np.float64)
        sigma_diag = _frozen(self.sigma_diag, np.float64)
        if mu.ndim != 2 or sigma_diag.shape != (mu.shape[1],):
            raise ValueError(
                f"Means {mu.shape} and covariance diagonal {sigma_diag.shape} do not fit together."
            )
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(sigma_diag))):
            raise ValueError("GMM parameters must be finite.")
        if np.any(sigma_diag < VARIANCE_FLOOR):
            raise ValueError(f"Variances must be at least {VARIANCE_FLOOR}.")
        object.__setattr__(self, 'mu', mu)
        object.__setattr__(self, 'sigma_diag', sigma_diag)

    @classmethod
    def initial(cls, mu):
        """Means as given, diag(Σ) = 1/d in every dimension."""
        mu = np.asarray(mu, dtype=np.float64)
        return cls(mu, np.full(mu.shape[1], 1.0 / mu.shape[1]))


@dataclass(frozen=True)
class AffinityGraph:
    """
    Sparse kNN affinity graph; row i of ``weights`` holds w_ij for the
    neighbours j of node i. Never densified.
    """
    weights: sparse.csr_matrix
    k_nn: int
    symmetric: bool = False

    @property
    def n_nodes(self):
        return self.weights.shape[0]

    def neighbors(self, i):
        """(j, w_ij) pairs of node i, by descending weight then ascending j."""
        start, stop = self.weights.indptr[i], self.weights.indptr[i + 1]
        cols = self.weights.indices[start:stop]
        vals = self.weights.data[start:stop]
        order = np.lexsort((cols, -vals))
        return [(int(cols[o]), float(vals[o])) for o in order]

    def edges(self):
        """Every directed edge as (i, j, w), rows in order."""
        for i in range(self.n_nodes):
            for j, w in self.neighbors(i):
                yield i, j, w

    @classmethod
    def empty(cls, n_nodes):
        return cls(sparse.csr_matrix((n_nodes, n_nodes), dtype=np.float64), k_nn=0)


@dataclass(frozen=True)
class SupportSet:
    """Labelled shots of the few-shot setting."""
    embeddings: EmbeddingMatrix
    labels: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'labels', _frozen(self.labels, np.int64))

    def __len__(self):
        return self.embeddings.n_rows


@dataclass(frozen=True)
class Hyperparams:
    lambda_weight: float = ZERO_SHOT_LAMBDA
    gamma: float = 0.0
    outer_iters: int = DEFAULT_OUTER_ITERS
    inner_z_iters: int = DEFAULT_INNER_Z_ITERS
    k_nn: int = DEFAULT_K_NN
    top_m_init: int = DEFAULT_TOP_M_INIT
    symmetrize_graph: bool = False
    # Component switches of the ablation runs.
    update_mu: bool = True
    update_sigma: bool = True
    isotropic_sigma: bool = False

    @classmethod
    def zero_shot(cls, **overrides):
        return cls(**{'lambda_weight': ZERO_SHOT_LAMBDA, **overrides})

    @classmethod
    def few_shot(cls, **overrides):
        return cls(**{'lambda_weight': FEW_SHOT_LAMBDA, **overrides})


@dataclass(frozen=True)
class TaskSpec:
    """One transduction problem."""
    query: EmbeddingMatrix
    text: EmbeddingMatrix
    tau: float
    hyper: Hyperparams = field(default_factory=Hyperparams)
    support: Optional[SupportSet] = None

    @property
    def n_classes(self):
        return self.text.n_rows

    @property
    def n_support(self):
        return 0 if self.support is None else len(self.support)

    @property
    def n_query(self):
        return self.query.n_rows

    @property
    def is_few_shot(self):
        return self.n_support > 0

    def all_embeddings(self):
        """D = S ∪ Q with support rows first, then query rows."""
        if not self.is_few_shot:
            return self.query
        return EmbeddingMatrix(np.vstack([self.support.embeddings.data, self.query.data]))
