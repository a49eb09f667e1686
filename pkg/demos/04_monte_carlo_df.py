"""Estimating df without looking inside the model.

Treat the NCL fit as a black box y -> fitted values, nudge y along random
Gaussian directions and average the response.  The estimate agrees with the
closed form to within its standard error and does not depend on the step
size, because the map is linear.
"""

from ncldof import df_spectral, estimate_df, ncl_oracle
from ncldof.verify import make_instance

inst = make_instance(n=200, H=5, M=10, seed=0)
print(f"{'lambda':>7} {'exact':>8} {'estimate':>9} {'std err':>8}")
for lam in (0.0, 0.5, 0.9, 1.0):
    exact = df_spectral(inst.wg.eigenvalues, lam, inst.wg.M)
    est = estimate_df(ncl_oracle(inst.phi, inst.wg.H, lam), inst.y, epsilon=1e-3, repeats=200, seed=1)
    print(f"{lam:7.2f} {exact:8.3f} {est.value:9.3f} {est.std_error:8.3f}")
