"""
Reference implementations used by the test suite to certify the solver.

Nothing here imports from the production modules: these are written from
the textbook definitions (scipy.stats densities, Euclidean simplex
projection, central differences, all-pairs sorting) so that agreement with
the solver means something. They are slow on purpose; keep N <= 200, K <= 10.
"""
import numpy as np
from scipy.special import logsumexp, xlogy
from scipy.stats import multivariate_normal


def em_reference(F, K, mu0, sigma0, iters):
    """
    Balanced-mixture EM with one diagonal covariance shared by all components.

    Returns the per-iteration histories (responsibilities, means); each
    iteration is E-step, M-step for the means, then M-step for the shared
    variances.
    """
    F = np.asarray(F, dtype=np.float64)
    n = F.shape[0]
    mu = np.array(mu0, dtype=np.float64)
    var = np.array(sigma0, dtype=np.float64)
    responsibilities, means = [], []
    for _ in range(iters):
        log_lik = np.column_stack([
            multivariate_normal.logpdf(F, mean=mu[k], cov=np.diag(var)) for k in range(K)
        ]).reshape(n, K)
        resp = np.exp(log_lik - logsumexp(log_lik, axis=1, keepdims=True))
        new_mu = mu.copy()
        for k in range(K):
            if resp[:, k].sum() > 0:
                new_mu[k] = np.average(F, axis=0, weights=resp[:, k])
        mu = new_mu
        var = sum(resp[:, [k]] * (F - mu[k]) ** 2 for k in range(K)).sum(axis=0) / n
        responsibilities.append(resp)
        means.append(mu.copy())
    return responsibilities, means


def project_simplex(v):
    """Euclidean projection of v onto the probability simplex (sort-based)."""
    u = np.sort(v)[::-1]
    cssv = np.cumsum(u) - 1.0
    ind = np.arange(1, v.shape[0] + 1)
    rho = np.count_nonzero(u - cssv / ind > 0)
    theta = cssv[rho - 1] / rho
    return np.maximum(v - theta, 0.0)


def simplex_pg_minimize(a, steps=100_000, step_size=1.0, tol=1e-15):
    """
    Minimise g(z) = z·a + z·log z over the simplex by projected gradient
    descent with a backtracking step (sufficient-decrease test).
    """
    a = np.asarray(a, dtype=np.float64)

    def g(z):
        return float(z @ a + np.sum(xlogy(z, z)))

    z = np.full(a.shape[0], 1.0 / a.shape[0])
    eta = step_size
    for _ in range(steps):
        grad = a + np.log(np.maximum(z, 1e-300)) + 1.0
        value = g(z)
        eta = min(eta * 2.0, step_size)
        while True:
            candidate = project_simplex(z - eta * grad)
            diff = candidate - z
            if g(candidate) <= value + grad @ diff + (diff @ diff) / (2.0 * eta) or eta < 1e-30:
                break
            eta *= 0.5
        z = candidate
        if np.max(np.abs(diff)) < tol:
            break
    return z


def finite_diff_grad(fn, point, h=1e-5):
    """Central-difference gradient of a scalar function, component by component."""
    point = np.asarray(point, dtype=np.float64)
    grad = np.zeros_like(point)
    for idx in np.ndindex(point.shape):
        step = np.zeros_like(point)
        step[idx] = h
        grad[idx] = (fn(point + step) - fn(point - step)) / (2.0 * h)
    return grad


def brute_force_knn(F, k):
    """For each node, [(j, max(0, cos))] of its k most similar other nodes."""
    F = np.asarray(F, dtype=np.float64)
    n = F.shape[0]
    result = []
    for i in range(n):
        sims = [(-float(np.dot(F[i], F[j])), j) for j in range(n) if j != i]
        sims.sort()
        result.append([(j, max(0.0, -s)) for s, j in sims[:k]])
    return result
