"""What model uncertainty does to a detector's likelihood ratio.

The deployed models are the least favorable members of contamination balls
around the nominal PMFs. Their defining property is visible by inspection:
the robust likelihood ratio is the nominal one with its dynamic range
compressed into a band, extreme evidence in both directions is flattened to
the band edge, and the middle passes through untouched up to one common
scale factor.
"""

import numpy as np

from guidedproc import UncertaintyParams, least_favorable, model_posterior_bounds
from guidedproc.fixtures import binned_gaussian_model
from guidedproc.robust import BeliefInterval

model = binned_gaussian_model(2.0, n_symbols=12)
u = UncertaintyParams(eps0=0.05, eps1=0.10, nu0=0.05, nu1=0.05)
robust, band = least_favorable(model, u)

nominal = model.p1 / model.p0
clipped = np.clip(nominal, band.lo, band.hi)
scale = (1.0 - u.eps1) / (1.0 - u.eps0)

print(f"band: [{band.lo:.4f}, {band.hi:.4f}], common scale {scale:.4f}")
print(f"{'y':>3} {'nominal LR':>12} {'robust LR':>12} {'edge':>6}")
for y in range(model.alphabet_size):
    r = robust.p1[y] / robust.p0[y]
    edge = "lo" if nominal[y] < band.lo else ("hi" if nominal[y] > band.hi else "")
    print(f"{y:>3} {nominal[y]:>12.4f} {r:>12.4f} {edge:>6}")

np.testing.assert_allclose(robust.p1 / robust.p0, clipped * scale, rtol=1e-9)
print("\nrobust LR == clip(nominal, band) * scale, verified to 1e-9")
print(f"robust PMFs renormalized: sum p0 = {robust.p0.sum():.12f}, sum p1 = {robust.p1.sum():.12f}")

# The posteriors a stage can hand downstream shrink accordingly. Threshold
# clamping uses exactly these intervals.
prior = BeliefInterval(0.1, 0.1)
reach = model_posterior_bounds(prior, robust)
print(f"\nfrom belief 0.1, one robust update reaches [{reach.lo:.4f}, {reach.hi:.4f}]")
