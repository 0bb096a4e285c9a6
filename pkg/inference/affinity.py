"""Sparse kNN affinity graph over D = S ∪ Q."""
import logging

import numpy as np
from scipy import sparse

from tasks.types import AffinityGraph

logger = logging.getLogger(__name__)

BLOCK_ROWS = 1024  # fixed, so results never depend on thread count


def _top_k_row(sims, k):
    """Indices of the k largest entries of one row; ties go to the lower index."""
    kth = np.partition(sims, -k)[-k]
    candidates = np.flatnonzero(sims >= kth)
    order = np.argsort(-sims[candidates], kind='stable')
    return candidates[order[:k]]


def build_knn(all_embeddings, k, symmetrize=False):
    """
    Directed kNN graph with w_ij = max(0, f_i·f_j) for the k most similar
    other nodes j of each node i. Exact, computed block by block so memory
    stays at O(block·N + N·k).
    """
    n = all_embeddings.n_rows
    m = min(k, n - 1)
    if m <= 0:
        return AffinityGraph.empty(n)

    data = all_embeddings.data
    cols = np.empty((n, m), dtype=np.int64)
    vals = np.empty((n, m), dtype=np.float64)
    for start in range(0, n, BLOCK_ROWS):
        stop = min(start + BLOCK_ROWS, n)
        sims = data[start:stop] @ data.T
        sims[np.arange(stop - start), np.arange(start, stop)] = -np.inf  # no self-edges
        for r in range(stop - start):
            top = _top_k_row(sims[r], m)
            cols[start + r] = top
            vals[start + r] = np.maximum(sims[r, top], 0.0)

    indptr = np.arange(0, n * m + 1, m)
    weights = sparse.csr_matrix((vals.ravel(), cols.ravel(), indptr), shape=(n, n))
    weights.sort_indices()
    graph = AffinityGraph(weights, k_nn=k)
    logger.debug("kNN graph: %d nodes, %d neighbours each", n, m)
    return symmetrize_graph(graph) if symmetrize else graph


def symmetrize_graph(graph):
    """Union of the directed edges; w is a symmetric cosine so weights agree."""
    weights = graph.weights.maximum(graph.weights.T).tocsr()
    weights.sort_indices()
    return AffinityGraph(weights, k_nn=graph.k_nn, symmetric=True)
