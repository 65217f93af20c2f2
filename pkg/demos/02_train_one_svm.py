"""Train one calibrated SVM on two gaussian blobs and read its certificates.

The solver works on the dual problem, so every fit carries a duality-gap
certificate: gap <= tol proves the weights are that close to optimal in
objective value, no trust required.
"""

import numpy as np

from hierlearn.svm import SvmProblem, calibrate, train

rng = np.random.default_rng(7)
n = 120
x = np.vstack([
    rng.normal(loc=(+2.0, 0.0), scale=0.8, size=(n // 2, 2)),
    rng.normal(loc=(-2.0, 0.0), scale=0.8, size=(n // 2, 2)),
])
y = np.concatenate([np.ones(n // 2), -np.ones(n // 2)])

m = train(SvmProblem(x, y), tol=1e-8, seed=0)
print(f"weights {np.round(m.weights, 4)}  bias {m.bias:.4f}")
print(f"converged {m.fit.converged} after {m.fit.epochs} epochs,"
      f" duality gap {m.fit.gap:.2e}")

# the primal weights are a linear combination of the support rows
w_from_alpha = ((m.fit.alpha * y)[:, None] * x).sum(axis=0)
print(f"support rows {int(np.sum(m.fit.alpha > 0))},"
      f" weight reconstruction error {np.abs(w_from_alpha - m.weights).max():.2e}")

# dual objective only ever goes up - epoch by epoch
trace = m.fit.dual_objective
print(f"dual trace: {trace[0]:.4f} -> {trace[-1]:.4f},"
      f" monotone = {bool(np.all(np.diff(trace) >= -1e-12))}")
print()

# raw margins are unbounded; calibration maps them onto (0, 1) so that
# different SVMs can be compared on one scale
m = calibrate(m, x, y)
print(f"calibration: a {m.cal_a:.4f}  b {m.cal_b:.4f}  (a < 0 always)")
for margin in (-2.0, -0.5, 0.0, 0.5, 2.0):
    # a point on the first axis whose margin is exactly the value above
    px = np.array([(margin - m.bias) / m.weights[0], 0.0])
    print(f"  margin {m.margin(px):+.2f} -> confidence {m.confidence(px):.4f}")
