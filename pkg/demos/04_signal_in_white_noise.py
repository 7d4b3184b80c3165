"""Brownian paths with a drift: likelihood ratio, sufficiency and per-time factors."""

from convthm import gshift
from convthm.stats import RngSpec

M = 512
for text in ("u", "1", "2u"):
    theta = gshift.Polynomial.parse(text).to_signal(M)
    r = gshift.lr_mean_check(theta, 5, 10_000, RngSpec(0))
    c = r["mean_lr_minus_1"]
    print(f"drift {text:>3}: E_0 exp(log-density) - 1 = {c.value:+.4f} "
          f"({abs(c.value) / c.standard_error:.2f} SE)")

print()
noisy = gshift.make_path_estimator("noisy_mean", 0.5)
r = gshift.marginal_convolution_check(noisy, 10, 128, 50_000, RngSpec(1))
print("noisy path estimator: the factor at time t should be N(0, 0.25 t)")
for t in r.info["times"]:
    print(f"  t={t:<5g} {r.info[f't={t:g}:verdict']:<18} "
          f"nu variance {r.info[f't={t:g}:nu_variance']:.4f} (target {0.25 * t:.4f})")
