"""Factor the law of a regular estimator as (noise) * (efficient law)."""

import numpy as np

from convthm import conv, lan
from convthm.stats import RngSpec

model = lan.GaussianLocationModel()
# keep the band where the efficient transform is at least 0.25
band = conv.snr_band(lambda t: np.exp(-np.asarray(t) ** 2 / 2), 0.25)

for name in ("mean", "noisy_mean", "median"):
    est = conv.make_estimator(name, 0.5)
    rep = conv.convolution_decompose(model, est, 200, 100_000, band, 0.25, RngSpec(4))
    nu = rep.nu
    print(f"{name:>10}: {rep.verdict:<18} nu mean {nu.mean:+.4f}  nu variance {nu.var:.4f}"
          f"  round trip TV {rep.info['roundtrip_tv']:.4f}")
print(f"targets: mean 0, noisy_mean 0.25, median pi/2 - 1 = {np.pi / 2 - 1:.4f}")

print()
for name in ("noisy_mean", "median"):
    r = conv.joint_independence_pipeline(model, conv.make_estimator(name, 0.5), 200, 50_000,
                                         RngSpec(5), theta=1.0)
    print(f"{name:>10}: residual independent of X_n and theta-free -> "
          f"{'pass' if r.passed else 'fail'}")

print()
ex = conv.rao_covariance_check("gaussian_mean", "mean", "weighted", n=10)
bad = conv.rao_covariance_check("gaussian_mean", "first", "mean", n=10)
print(f"sample mean vs weighted mean: {ex.info['verdict']}")
print(f"first observation vs mean:    {bad.info['verdict']}")
