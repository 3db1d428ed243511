"""Link strength distribution and the order-statistic basis.

Prints a few values of the two-branch link CDF, then compares the exact
(k+1)-th weakest link CDF with its Poisson large-N form on the default
512-link net, and checks one of them against brute-force sorting.
"""
import numpy as np

from fishnet import OrderStatBasis, StrengthDistribution, make_generator

dist = StrengthDistribution()
lo, hi = dist.crossover_gap
print(f"P1 just below / above the crossover: {lo:.6f} / {hi:.6f}")
for x in (4.0, 7.0, 8.6, 9.5, 11.0):
    print(f"  P1({x:4.1f}) = {dist.cdf(x):.6e}")

exact = OrderStatBasis(512)
poisson = OrderStatBasis(512, form="poisson")
x = np.array([5.0, 6.0, 7.0])
for k in (0, 5, 20):
    print(f"W_{k:<2d}(x={x})  exact {exact.wk(x, k)}  poisson {poisson.wk(x, k)}")

# 20_000 nets of 512 links, sixth weakest link each
rng = make_generator(1)
u = np.concatenate([np.partition(rng.random((2000, 512)), 5, axis=1)[:, 5] for _ in range(10)])
s6 = np.sort(dist.inverse_cdf(u))
ecdf = np.arange(1, len(s6) + 1) / len(s6)
print("sup |ecdf - W_5| =", float(np.max(np.abs(ecdf - exact.wk(s6, 5)))))
