"""Quadratic likelihood expansion, change of measure and the third lemma."""

from convthm import lan
from convthm.stats import RngSpec

gauss = lan.GaussianLocationModel()
gamma = lan.GammaScaleModel(alpha=2.0)

for model in (gauss, gamma):
    for n in (10, 100, 1000):
        r = lan.lan_remainder(model, n, 1.0, 20_000, RngSpec(1))
        print(f"{model.name:>18} n={n:<5} max|remainder| = {r.info['max_abs']:.2e}")

print()
for model in (gauss, gamma):
    r = lan.change_of_measure_check(model, "indicator_central_le_1", 50, 1.0, 20_000, RngSpec(2))
    c = r["direct_minus_reweighted"]
    print(f"{model.name:>18} E_theta g - E_0[g L]: {c.value:+.4f} "
          f"({abs(c.value) / c.standard_error:.2f} SE) -> {'pass' if r.passed else 'fail'}")

print()
r = lan.third_lemma_limit_check(gauss, lan.central_and_estimator, [20, 200], 1.0, 20_000,
                                RngSpec(3))
print(f"third lemma, Gaussian location: {'pass' if r.passed else 'fail'}")
for c in r.checks:
    print(f"  {c.name}: {c.value:.4f} (threshold {c.threshold:g})")
