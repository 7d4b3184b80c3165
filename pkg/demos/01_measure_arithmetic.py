"""Lattice measures, transforms, convolution and deconvolution on exact inputs."""

from scipy import stats

from convthm import dist

step = 0.02
n1 = dist.discretize(stats.norm(0, 1), step)
n2 = dist.discretize(stats.norm(0, 2 ** 0.5), step)

both = dist.convolve(n1, n1)
print(f"TV(N(0,1) * N(0,1), N(0,2))        = {dist.distance_tv(both, n2):.2e}")

t = dist.symmetric_grid(3.0, 0.01)
gap = abs(dist.to_charfn(both, t).values - dist.to_charfn(n1, t).values ** 2).max()
print(f"transform of a convolution vs product of transforms: {gap:.2e}")

yes = dist.check_spread(n2, n1, band=4)
print(f"is N(0,2) more spread out than N(0,1)? {yes.spread} ({yes.verdict}); "
      f"recovered variance {yes.nu.var:.4f}")
no = dist.check_spread(n1, n2, band=4)
print(f"is N(0,1) more spread out than N(0,2)? {no.spread} ({no.verdict})")
