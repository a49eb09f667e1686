"""Is lam = 1 ever the right choice?

Hold the inputs and the true function fixed, redraw the noise many times and
average the true error of each lam.  With noise the expected error has a
positive slope at lam = 1, equal to 2 sigma^2 / N times the sum of inverse
eigenvalues, so the best lam sits strictly below 1 (here only just below).
Without noise, lam = 1 wins.
"""

import numpy as np

from ncldof import SynthSpec, run_theorem6, sample_rff

basis = sample_rff(d=3, H=5, M=12, gamma=1.0, seed=1)
for sigma in (0.5, 0.0):
    rep = run_theorem6(SynthSpec(n=500, d=3, sigma=sigma, seed=0), basis, k_draws=200, seed=0)
    print(f"sigma = {sigma}: best lambda = {rep.lambda_best:g}, "
          f"slope of expected true error at 1 = {rep.derivative_at_one:.4g}")
    for lam in (0.0, 0.5, 0.9, 0.99, 1.0):
        i = int(np.argmin(np.abs(rep.lambdas - lam)))
        print(f"   lambda {lam:5.2f}: true error {rep.mean_true_err[i]:.5f} +/- {rep.se_true_err[i]:.5f}, "
              f"mean SURE {rep.mean_sure[i]:.5f}")
