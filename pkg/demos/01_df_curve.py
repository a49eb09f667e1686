"""How much does an NCL ensemble actually fit?

An ensemble of M members, each a least-squares model over its own H random
Fourier features, has exactly H degrees of freedom when members are trained
independently (lam = 0) and rank(Phi) degrees of freedom when trained as one
big model (lam = 1).  In between the curve is smooth, increasing and convex,
while the training error only falls.  This script prints both along a grid.
"""

import numpy as np

from ncldof import SynthSpec, compute_gram, df_curve, evaluate, frequency_heuristic, sample_rff, standardize, synthesize, whiten

s = synthesize(SynthSpec(n=400, d=4, sigma=0.4, seed=0))
train, _ = standardize(s.dataset)
basis = sample_rff(d=4, H=6, M=15, gamma=frequency_heuristic(train.features, 0), seed=1)
phi = evaluate(basis, train.features)
g = compute_gram(phi, train.y, basis.H)
wg = whiten(g)

curve = df_curve(wg, g, train.y, grid=np.linspace(0, 1, 11))
print(f"M={basis.M} members, H={basis.H} features each, rank of the stacked design = {wg.rank_p}\n")
print(f"{'lambda':>7} {'df':>8} {'train MSE':>10}")
for lam, d, e, _ in curve.rows():
    print(f"{lam:7.2f} {d:8.3f} {e:10.5f}")
print("\nThe last 10% of the lambda range buys most of the extra flexibility:")
print(f"df(0.9) = {curve.df[-2]:.2f}, df(1.0) = {curve.df[-1]:.2f}")
