"""
Strong convergence rates
========================

The root-mean-square error of the Euler scheme on a Volterra equation decays
like n^(-H) for a fractional kernel of Hurst index H < 1/2. We measure it
against a finer run of the same scheme driven by the same noise.
"""

from svolterra import geometric_brownian, volterra_ou
from svolterra.rates import strong_rate_experiment

n_list = [8, 16, 32, 64, 128]

# two kernels, one rough and one smooth
for H in (0.25, 0.75):
    rep = strong_rate_experiment(volterra_ou(H=H), "euler", n_list, M_ref_factor=8, N=1000, seed=0)
    print(f"OU H={H}: slope {rep.slope:.3f} (predicted {rep.predicted:.3f})")

# classical SDE as a sanity check: Euler 1/2, Milstein 1
gbm = geometric_brownian()
for scheme in ("euler", "milstein"):
    rep = strong_rate_experiment(gbm, scheme, n_list, M_ref_factor=8, N=1000, seed=0)
    print(f"GBM {scheme}: slope {rep.slope:.3f} (predicted {rep.predicted:.3f})")

# the full table with errors per grid size
print(rep.to_csv())
