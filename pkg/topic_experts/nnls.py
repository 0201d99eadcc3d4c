"""
Active-set non-negative least squares: min ||Aw - b||^2 subject to w >= 0.

Columns are scaled to unit 2-norm before solving and the weights are
unscaled on return. The passive-set subproblem is solved through a Cholesky
factorisation of its normal equations.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import scipy.linalg
from django.conf import settings

from topic_experts.exceptions import NNLSConvergenceError, NNLSInputError

logger = logging.getLogger(__name__)


@dataclass
class NNLSSolution:
    weights: np.ndarray
    residual: float
    iterations: int
    residual_history: List[float] = field(default_factory=list)

    def kkt_violation(self, A, b) -> float:
        """Largest KKT violation of ``weights`` relative to the solver's scale."""
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float)
        return kkt_violation(A, b, self.weights) / gradient_scale(A, b)


def gradient_scale(A: np.ndarray, b: np.ndarray) -> float:
    scale = float(np.max(np.abs(A.T @ b))) if A.size else 0.0
    return scale if scale > 0 else 1.0


def kkt_violation(A: np.ndarray, b: np.ndarray, w: np.ndarray) -> float:
    grad = A.T @ (b - A @ w)
    positive = w > 0
    free = np.abs(grad[positive])
    bound = grad[~positive]
    return float(max(free.max(initial=0.0), bound.max(initial=0.0), 0.0))


def _validate(A, b, tol):
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2:
        raise NNLSInputError(f"Design matrix must be 2-D, got shape {A.shape}")
    if b.ndim != 1 or b.shape[0] != A.shape[0]:
        raise NNLSInputError(f"Targets of shape {b.shape} do not match design matrix {A.shape}")
    if A.shape[0] < 1 or A.shape[1] < 1:
        raise NNLSInputError(f"Design matrix must be at least 1x1, got {A.shape}")
    if not (np.isfinite(A).all() and np.isfinite(b).all()):
        raise NNLSInputError("Design matrix and targets must be finite")
    if not tol > 0:
        raise NNLSInputError(f"Tolerance must be positive, got {tol!r}")
    return A, b


def _passive_solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    gram = A.T @ A
    try:
        factor = scipy.linalg.cho_factor(gram, check_finite=False)
        z = scipy.linalg.cho_solve(factor, A.T @ b, check_finite=False)
        if np.isfinite(z).all():
            return z
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
        pass
    # Rank-deficient passive set.
    return np.linalg.lstsq(A, b, rcond=None)[0]


def solve(A, b, tol: Optional[float] = None, max_iter: Optional[int] = None) -> NNLSSolution:
    if tol is None:
        tol = getattr(settings, "TOPIC_EXPERTS_NNLS_TOL", 1e-10)
    A, b = _validate(A, b, tol)
    m, n = A.shape
    max_iter = 3 * n if max_iter is None else max_iter

    norms = np.linalg.norm(A, axis=0)
    usable = norms > 0
    safe_norms = np.where(usable, norms, 1.0)
    scaled = A / safe_norms
    threshold = tol * gradient_scale(A, b)

    x = np.zeros(n)
    passive = np.zeros(n, dtype=bool)
    stalled = np.zeros(n, dtype=bool)
    history = [float(np.linalg.norm(b))]
    iterations = 0

    def unscale(values):
        return np.where(usable, values / safe_norms, 0.0)

    while True:
        w = unscale(x)
        grad = A.T @ (b - A @ w)
        candidates = ~passive & ~stalled & usable & (grad > threshold)
        if not candidates.any():
            break
        if iterations >= max_iter:
            raise NNLSConvergenceError(
                f"NNLS did not converge in {max_iter} iterations", best=w, residual=history[-1]
            )
        iterations += 1

        scaled_grad = scaled.T @ (b - scaled @ x)
        j = int(np.argmax(np.where(candidates, scaled_grad, -np.inf)))
        passive[j] = True

        while True:
            z = np.zeros(n)
            z[passive] = _passive_solve(scaled[:, passive], b)
            if (z[passive] > 0).all():
                x = z
                break
            blocking = passive & (z <= 0)
            ratios = np.full(n, np.inf)
            step = x[blocking] - z[blocking]
            ratios[blocking] = np.divide(x[blocking], step, out=np.zeros_like(step), where=step > 0)
            alpha = ratios.min()
            x = x + alpha * (z - x)
            # Bland: drop the smallest index among the tied blocking variables.
            leaving = int(np.flatnonzero(ratios == alpha)[0])
            passive[leaving] = False
            x[~passive] = 0.0
            np.maximum(x, 0.0, out=x)
            if not passive.any():
                break

        if not passive[j]:
            # The entering variable was dropped again; skip it until the passive set changes.
            stalled[j] = True
        else:
            stalled[:] = False

        history.append(float(np.linalg.norm(b - scaled @ x)))

    weights = unscale(x)
    residual = float(np.linalg.norm(b - A @ weights))
    logger.debug("NNLS solved %dx%d in %d iterations, residual %.6g", m, n, iterations, residual)
    return NNLSSolution(weights=weights, residual=residual, iterations=iterations, residual_history=history)


def solve_nnls(A, b, tol: Optional[float] = None) -> np.ndarray:
    return solve(A, b, tol).weights


def write_system(path, A, b) -> None:
    """Dump [A | b] as tab-separated text for inspecting a failed solve."""
    np.savetxt(path, np.column_stack([np.asarray(A, float), np.asarray(b, float)]), delimiter="\t", fmt="%.17g")
