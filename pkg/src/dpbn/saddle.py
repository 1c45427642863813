"""Back-projection through one linear layer: saddle-point solves.

Reconstructing a layer input u from its projection z = W'u picks the
conditional mean under the maximum-entropy prior of u's range.  That mean
is lambda(W h) where h solves

    W' lambda(W h) = z,

with lambda the range's activation.  The system is the gradient of a
strictly concave dual, so a damped Newton iteration with the positive
definite Jacobian W' diag(lambda') W converges whenever a solution exists;
when z is outside the image of the range (a sampling failure), the solver
reports non-convergence as a value instead of raising.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

from .errors import RankDeficientError, ShapeMismatchError
from .maxent import MaxEntKind, maxent_lambda, maxent_lambda_deriv

__all__ = [
    "SolverOptions",
    "SaddleResult",
    "solve_saddle",
    "solve_saddle_batch",
    "conditional_mean",
    "saddle_jacobian",
]


@dataclass(frozen=True)
class SolverOptions:
    """Newton solver knobs.

    tol is relative: a sample converges when the max-abs residual drops
    below tol * (1 + max|z|).  `damping` caps the number of step halvings
    per iteration; `ridge` regularizes the Jacobian against transient
    near-rank-deficiency.
    """

    tol: float = 1e-10
    max_iter: int = 100
    damping: int = 20
    ridge: float = 1e-12

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


DEFAULT_OPTIONS = SolverOptions()


@dataclass
class SaddleResult:
    """Solution bundle; arrays carry a leading sample axis in batch form."""

    h: np.ndarray
    x_hat: np.ndarray
    residual: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray


def conditional_mean(W, h, kind: MaxEntKind):
    """lambda(W h): the maximum-entropy mean of u given W'u fixed at the
    value h solves for.  h may be (M,) or batched (S, M)."""
    W = np.asarray(W, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    return maxent_lambda(kind, h @ W.T)


def saddle_jacobian(W, h, kind: MaxEntKind):
    """W' diag(lambda'(W h)) W, the (symmetric PSD) Newton Jacobian."""
    W = np.asarray(W, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    d = maxent_lambda_deriv(kind, W @ h)
    return (W * d[:, None]).T @ W


def _chol(J):
    try:
        return np.linalg.cholesky(J)
    except np.linalg.LinAlgError as e:
        raise RankDeficientError(
            "Jacobian factorization failed despite ridge; "
            "weight matrix is rank deficient") from e


def _chol_solve(L, B):
    """Solve (L L') x = b for every row b of B; L is (M,M) or (S,M,M)."""
    B = np.ascontiguousarray(B)
    if L.ndim == 2:
        x, info = lapack.dpotrs(L, B.T, lower=1)
        if info != 0:
            raise RankDeficientError("triangular solve failed")
        return np.ascontiguousarray(x.T)
    out = np.empty_like(B)
    for i in range(B.shape[0]):
        x, info = lapack.dpotrs(L[i], B[i], lower=1)
        if info != 0:
            raise RankDeficientError("triangular solve failed")
        out[i] = x
    return out


def batch_jacobian_factor(W, H, kind: MaxEntKind, ridge):
    """lambda'(W h) and the Cholesky factor of W' diag(lambda') W + ridge*I
    for every row of H.  Shared (2-D) factor when lambda' is constant."""
    d = maxent_lambda_deriv(kind, H @ W.T)
    eye = ridge * np.eye(W.shape[1])
    if kind is MaxEntKind.LINEAR:
        return d, _chol(W.T @ W + eye)
    tmp = W[None, :, :] * d[:, :, None]
    J = np.matmul(W.T[None, :, :], tmp) + eye
    return d, _chol(J)


def solve_saddle_batch(W, Z, kind: MaxEntKind,
                       opts: SolverOptions = DEFAULT_OPTIONS,
                       _trace=None) -> SaddleResult:
    """Solve W' lambda(W h) = z for each row z of Z.

    Damped Newton: step direction from the SPD Jacobian, step length halved
    (up to opts.damping times) until the residual 2-norm strictly
    decreases, so the iteration never moves uphill.  Samples whose line
    search stalls or that exhaust max_iter come back converged=False with
    their best iterate; rank-deficient W raises RankDeficientError.

    When `_trace` is a list, the per-sample residual 2-norm is appended
    after every iteration (diagnostics and tests).
    """
    W = np.asarray(W, dtype=np.float64)
    Z = np.asarray(Z, dtype=np.float64)
    if W.ndim != 2 or Z.ndim != 2 or Z.shape[1] != W.shape[1]:
        raise ShapeMismatchError(
            f"weights {W.shape} incompatible with targets {Z.shape}")
    n, m = W.shape
    if n < m:
        raise RankDeficientError(
            f"{n}x{m} weight matrix cannot have full column rank")
    s = Z.shape[0]

    lam0 = float(maxent_lambda(kind, 0.0))
    lamp0 = float(maxent_lambda_deriv(kind, 0.0))
    eye = opts.ridge * np.eye(m)
    # start from the exact solution of the model linearized at h = 0
    L0 = _chol(lamp0 * (W.T @ W) + eye)
    H = _chol_solve(L0, Z - lam0 * W.sum(axis=0))

    tol = opts.tol * (1.0 + np.max(np.abs(Z), axis=1))

    def residual_rows(Hrows, Zrows):
        F = maxent_lambda(kind, Hrows @ W.T) @ W - Zrows
        return F, np.linalg.norm(F, axis=1), np.max(np.abs(F), axis=1)

    F, r2, rinf = residual_rows(H, Z)
    converged = rinf <= tol
    stalled = np.zeros(s, dtype=bool)
    iterations = np.zeros(s, dtype=np.int64)
    if _trace is not None:
        _trace.append(r2.copy())

    for _ in range(opts.max_iter):
        active = ~(converged | stalled)
        if not active.any():
            break
        idx = np.nonzero(active)[0]
        d, L = batch_jacobian_factor(W, H[idx], kind, opts.ridge)
        step = _chol_solve(L, -F[idx])
        iterations[idx] += 1

        scale = np.ones(len(idx))
        accepted = np.zeros(len(idx), dtype=bool)
        for _ in range(opts.damping + 1):
            todo = ~accepted
            if not todo.any():
                break
            rows = idx[todo]
            trial = H[rows] + scale[todo, None] * step[todo]
            Ft, r2t, rinft = residual_rows(trial, Z[rows])
            better = r2t < r2[rows]
            ok = np.nonzero(todo)[0][better]
            H[idx[ok]] = trial[better]
            F[idx[ok]] = Ft[better]
            r2[idx[ok]] = r2t[better]
            rinf[idx[ok]] = rinft[better]
            accepted[ok] = True
            scale[~accepted] *= 0.5
        stalled[idx[~accepted]] = True
        converged = rinf <= tol
        if _trace is not None:
            _trace.append(r2.copy())

    x_hat = maxent_lambda(kind, H @ W.T)
    return SaddleResult(h=H, x_hat=x_hat, residual=rinf,
                        iterations=iterations, converged=converged)


def solve_saddle(W, z, kind: MaxEntKind,
                 opts: SolverOptions = DEFAULT_OPTIONS) -> SaddleResult:
    """Single-target wrapper around solve_saddle_batch."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1:
        raise ShapeMismatchError("z must be a vector; use solve_saddle_batch")
    res = solve_saddle_batch(W, z[None, :], kind, opts)
    return SaddleResult(h=res.h[0], x_hat=res.x_hat[0],
                        residual=float(res.residual[0]),
                        iterations=int(res.iterations[0]),
                        converged=bool(res.converged[0]))
