"""Back-projection through one layer: the saddle-point solve.

A dimension-reducing layer maps u (dim N) to z = W'u (dim M < N).  Going
backwards, the reconstruction picks the mean of the maximum-entropy prior
restricted to the solution set {u : W'u = z}; that mean is lambda(W h)
with h solving W' lambda(W h) = z.  For the all-reals range this is the
familiar least-norm preimage; for bounded ranges it is a genuinely
nonlinear lift, and targets outside the feasible cone make the solve
fail, which the solver reports as a flag rather than an exception.
"""

import numpy as np

from dpbn.maxent import MaxEntKind
from dpbn.saddle import solve_saddle, solve_saddle_batch

rng = np.random.default_rng(0)

# all-reals range: the lift equals the pseudo-inverse reconstruction
W = rng.normal(0, 1, (8, 3))
u_true = rng.normal(0, 1, 8)
z = W.T @ u_true
res = solve_saddle(W, z, MaxEntKind.LINEAR)
pinv = W @ np.linalg.solve(W.T @ W, z)
print("linear lift vs pseudo-inverse:", np.max(np.abs(res.x_hat - pinv)))
print("converged:", res.converged, "iterations:", res.iterations)

# half-line range: in-manifold targets always solve; the lift is positive
u_pos = np.abs(rng.normal(0, 1, 8)) + 0.05
res = solve_saddle(W, W.T @ u_pos, MaxEntKind.TRUNC_GAUSS)
print("half-line lift positive:", np.all(res.x_hat > 0),
      "residual:", res.residual)

# symmetric toy: two equal weights sharing one target forces equal split
res = solve_saddle(np.array([[1.0], [1.0]]), np.array([1.0]),
                   MaxEntKind.TRUNC_GAUSS)
print("symmetric split:", res.x_hat, "saddle point:", res.h)

# infeasible target: the half-line image of W' with positive weights can
# never produce a negative projection
res = solve_saddle(np.array([[1.0], [1.0]]), np.array([-1.0]),
                   MaxEntKind.TRUNC_GAUSS)
print("infeasible target converged:", res.converged,
      "(residual stuck at", round(res.residual, 3), ")")

# batched: one call solves a whole batch of targets with shared weights
U = np.abs(rng.normal(0, 1, (1000, 8))) + 0.05
batch = solve_saddle_batch(W, U @ W, MaxEntKind.TRUNC_GAUSS)
print("batch of 1000 in-manifold targets: all converged =",
      bool(batch.converged.all()),
      "worst residual =", float(batch.residual.max()))
