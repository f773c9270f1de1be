"""Exact small-scale SVM dual solver used as an independent test oracle.

Enumerates candidate support sets and solves the equality-constrained KKT
system for each; the first feasible KKT point of the convex dual is the
global optimum. Assumes no multiplier is clamped at C (verified), which
holds for separable fixtures with a large C.
"""

from itertools import combinations

import numpy as np

from cdfeat.svm import KernelSpec, kernel_matrix


class OracleSolution:
    def __init__(self, alpha, beta, bias, x, y, spec):
        self.alpha = alpha      # all n multipliers
        self.beta = beta        # alpha_i * y_i
        self.bias = bias
        self.x = x
        self.y = y
        self.spec = spec

    def decision(self, probe) -> float:
        k = kernel_matrix(self.spec, self.x, np.asarray(probe, dtype=float)[None, :])
        return float(self.beta @ k[:, 0] + self.bias)

    def margin_width(self) -> float:
        # 2 / ||w|| with ||w||^2 = beta' K beta; kernel-general.
        k = kernel_matrix(self.spec, self.x, self.x)
        norm_sq = float(self.beta @ k @ self.beta)
        return 2.0 / np.sqrt(norm_sq)


def solve_svm_exact(x, y, c, spec: KernelSpec, feas_tol: float = 1e-8) -> OracleSolution:
    """Globally optimal dual solution by active-set enumeration."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.shape[0]
    spec = spec.resolve(x.shape[1])
    gram = kernel_matrix(spec, x, x)

    for size in range(2, n + 1):
        for subset in combinations(range(n), size):
            s = list(subset)
            ys = y[s]
            if np.all(ys == ys[0]):
                continue
            k_ss = gram[np.ix_(s, s)]
            lhs = np.zeros((size + 1, size + 1))
            lhs[:size, :size] = k_ss
            lhs[:size, size] = 1.0
            lhs[size, :size] = 1.0
            rhs = np.concatenate([ys, [0.0]])
            try:
                sol = np.linalg.solve(lhs, rhs)
            except np.linalg.LinAlgError:
                continue
            if not np.all(np.isfinite(sol)):
                continue
            beta_s, bias = sol[:size], sol[size]
            alpha_s = beta_s * ys
            if np.any(alpha_s < -feas_tol) or np.any(alpha_s > c + feas_tol):
                continue
            # KKT for the excluded points: margin at least 1.
            alpha = np.zeros(n)
            alpha[s] = np.maximum(alpha_s, 0.0)
            beta = alpha * y
            fx = gram @ beta + bias
            rest = [i for i in range(n) if i not in subset]
            if rest and np.any(y[rest] * fx[rest] < 1.0 - feas_tol):
                continue
            # Free support vectors must sit exactly on the margin (system solved).
            return OracleSolution(alpha=alpha, beta=beta, bias=float(bias), x=x, y=y, spec=spec)
    raise RuntimeError("no feasible KKT point found; fixture violates oracle assumptions")
