"""NCL as ridge regression on whitened features.

Rescale each member's features so its own Gram block is the identity, stack
all members, and fit ridge regression with penalty (1 - lam) / (M lam).
The ridge predictor equals lam times the NCL ensemble prediction, at training
points and anywhere else.
"""

import numpy as np

from ncldof import equivalence_check, fit, fit_ridge, gamma_for_lambda
from ncldof.ncl import predict_from_features
from ncldof.verify import make_instance

inst = make_instance(n=300, H=4, M=8, seed=2)
grid = [0.1, 0.3, 0.5, 0.7, 0.9, 1.0]
dev = equivalence_check(inst.synth.dataset, inst.basis, grid, n_probe=200, seed=0)
print(f"{'lambda':>7} {'ridge penalty':>14} {'max rel. deviation':>20}")
for lam in grid:
    print(f"{lam:7.2f} {gamma_for_lambda(lam, inst.wg.M):14.5f} {dev[lam]:20.2e}")
print("\nWith M^2 in the denominator instead of M the match breaks down:")
lam, M = 0.3, inst.wg.M
psi = inst.wg.whiten_rows(inst.phi) / M
F = predict_from_features(fit(inst.wg, inst.g, lam), inst.phi)[0]
wrong = fit_ridge(psi, inst.y, (1 - lam) / (M * M * lam)).predict(psi)
print(f"max |ridge - lam F| = {np.max(np.abs(wrong - lam * F)):.3e}")
