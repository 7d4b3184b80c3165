"""Acceptance criteria, one test each.

Every test records a one-line verdict with the measured values; the lines
are printed in the terminal summary (see conftest.py) and when this file
is run as a script.
"""

import dataclasses
import math

import numpy as np
import pytest

from convthm import cli, conv, dist, gshift, lan, nonuniq
from convthm.stats import RngSpec

RESULTS: dict[int, str] = {}


def record(num, title, parts):
    """parts: list of (label, value_text, passed)."""
    ok = all(p for _, _, p in parts)
    detail = "; ".join(f"{lbl} {val}{'' if p else ' [FAIL]'}" for lbl, val, p in parts)
    RESULTS[num] = f"criterion {num:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    return ok


def scenario(name, **overrides):
    cfg = cli.build_config({"scenario": name, **overrides})
    rep, payload = cli.run_config(cfg)
    return rep, payload


GAUSS = lan.GaussianLocationModel()
GAMMA = lan.GammaScaleModel(alpha=2.0)


def test_criterion_01_exact_lan():
    parts = []
    for n in (10, 100):
        for theta in (0.0, 1.0, -2.0):
            r = lan.lan_remainder(GAUSS, n, theta, 10_000, RngSpec(1))
            m = r.info["max_abs"]
            parts.append((f"max|R| n={n} theta={theta:g}", f"{m:.1e}", m <= 1e-12))
    assert record(1, "exact LAN remainder", parts)


def test_criterion_02_change_of_measure():
    parts = []
    for j, model in enumerate((GAUSS, GAMMA)):
        for k, stat in enumerate(sorted(lan.STATISTICS)):
            r = lan.change_of_measure_check(model, stat, 50, 1.0, 10_000, RngSpec(2, key=(j, k)))
            c = r["direct_minus_reweighted"]
            parts.append((f"{model.name}/{stat}", f"{abs(c.value) / c.standard_error:.2f} SE",
                          r.passed))
    assert record(2, "change of measure within 3 SE", parts)


def test_criterion_03_convolution_factor():
    rep = conv.convolution_decompose(
        GAUSS, conv.make_estimator("noisy_mean", 0.5), 200, 100_000, 3.0, 1e-3, RngSpec(3),
        target=lambda t: np.exp(-0.25 * np.asarray(t) ** 2 / 2), cf_tol=0.02, rt_tol=0.02)
    err, rt = rep.info["cf_sup_error"], rep.info["roundtrip_tv"]
    ok = record(3, "noisy-mean factor N(0, 0.25)", [
        ("CF sup-error on |t|<=3", f"{err:.4f} (estimate measure {rep.info['estimate_cf_sup_error']:.4f})",
         err <= 0.02),
        ("round-trip TV", f"{rt:.4f}", rt <= 0.02),
    ])
    assert ok


def test_criterion_04_efficiency_dichotomy():
    eff = conv.convolution_decompose(GAUSS, conv.make_estimator("mean"), 200, 100_000, 3.0,
                                     1e-3, RngSpec(4, key=(0,)),
                                     target=lambda t: np.ones_like(t))
    med = conv.convolution_decompose(GAUSS, conv.make_estimator("median"), 200, 100_000, 3.0,
                                     1e-3, RngSpec(4, key=(1,)))
    e, v = eff.info["cf_sup_error"], med.info["nu_variance"]
    assert record(4, "efficiency dichotomy", [
        ("mean: sup|nu_hat - 1|", f"{e:.2e}", e <= 0.02),
        ("median: nu variance", f"{v:.4f} vs {math.pi / 2 - 1:.4f}",
         abs(v - (math.pi / 2 - 1)) <= 0.05),
    ])


def test_criterion_05_theta_invariance():
    parts = []
    for j, name in enumerate(("noisy_mean", "median")):
        r = conv.joint_independence_pipeline(GAUSS, conv.make_estimator(name, 0.5), 200,
                                             100_000, RngSpec(5, key=(j,)), theta=1.0)
        ks = r.value("residual_ks_across_theta")
        parts.append((f"{name}: residual KS theta 0 vs 1", f"{ks:.4f}", ks <= 0.02))
    assert record(5, "theta-invariance of nu", parts)


def test_criterion_06_rao_covariance():
    parts = []
    for family, S, T, par in (("gaussian_mean", "mean", "weighted", None),
                              ("bernoulli", "mean", "first", {"p": 0.3})):
        ex = conv.rao_covariance_check(family, S, T, n=10, params=par)
        worst = max(abs(c["cov"]) for c in ex.info["covariances"])
        parts.append((f"{family} exact max|Cov|", f"{worst:.1e}",
                      worst <= 1e-15 and ex.info["minimum_variance"] and ex.passed))
        mc = conv.rao_covariance_check(family, S, T, n=10, params=par, mode="mc",
                                       reps=100_000, rng=RngSpec(6))
        z = max(abs(c["cov"]) / c["se"] for c in mc.info["covariances"])
        parts.append((f"{family} MC", f"{z:.2f} SE", mc.passed and mc.info["minimum_variance"]))
    bad = conv.rao_covariance_check("gaussian_mean", "first", "mean", n=10)
    parts.append(("S = X_1 flagged", bad.info["verdict"], not bad.info["minimum_variance"]))
    assert record(6, "Rao covariance characterization", parts)


def test_criterion_07_girsanov():
    rep, _ = scenario("girsanov")
    parts = []
    for d in ("u", "1", "2u"):
        c = rep[f"drift={d}:mean_lr_minus_1"]
        parts.append((f"E exp(log-density) - 1, theta={d}",
                      f"{c.value:+.4f} ({abs(c.value) / c.standard_error:.2f} SE)", c.passed))
    for t in gshift.DEFAULT_TIMES:
        c = rep[f"sufficiency:ks_t={t:g}"]
        parts.append((f"sufficiency KS t={t:g}", f"{c.value:.4f}", c.passed))
    assert record(7, "Girsanov density and sufficiency", parts)


def test_criterion_08_signal_plus_noise():
    rep, _ = scenario("gshift")
    parts = []
    for t in gshift.DEFAULT_TIMES:
        c = rep[f"marginal:t={t:g}:nu_cf_sup_error"]
        parts.append((f"CF sup-error t={t:g}", f"{c.value:.4f}", c.value <= 0.03))
    assert record(8, "path marginals nu_t = N(0, 0.25 t)", parts)


def test_criterion_09_endpoints():
    rep, _ = scenario("endpoints")
    tv = rep.info["exact_tv"]
    dec = rep["exact_tv_strictly_decreasing"].passed
    parts = [("TV strictly decreasing", ", ".join(f"{v:.3e}" for v in tv.values()), dec),
             ("TV(1000)", f"{tv[1000]:.3e}", tv[1000] <= 0.01)]
    for side in ("lower", "upper"):
        c = rep[f"convolution:{side}:nu_cf_sup_error"]
        parts.append((f"{side} Uniform[0,0.5] CF error", f"{c.value:.4f}", c.value <= 0.03))
    assert record(9, "uniform endpoints", parts)


def test_criterion_10_levy():
    rep, _ = scenario("levy")
    rt = rep["increment_roundtrip_max_abs"]
    cf = rep["convolution:nu_cf_sup_error"]
    mn = rep["gamma_cf:min_modulus"]
    assert record(10, "Levy shifts", [
        ("increment round trip", f"{rt.value:.1e}", rt.passed),
        ("Uniform[0,0.3] CF error", f"{cf.value:.4f}", cf.value <= 0.03),
        ("min |phi_Gamma| on [-8,8]", f"{mn.value:.4f}", mn.value > 0),
    ])


def test_criterion_11_counterexample():
    defect = 1.0 - nonuniq.mu_raw_mass(10_000)
    t = nonuniq.CF_GRID[np.abs(nonuniq.CF_GRID) <= 1]
    nu = nonuniq.build_nu()
    cf = float(np.max(np.abs(nonuniq.mu_cf(t) - nonuniq.grid_cf(nu, t))))
    eq = nonuniq.verify_equal_convolutions("nu")
    ne = nonuniq.verify_mu_neq_nu()
    ga = nonuniq.verify_equal_convolutions("gauss")
    assert record(11, "distinct laws with equal band-limited convolutions", [
        ("1 - atomic mass (K=1e4, k>=0)", f"{defect:.3e}", defect <= 1e-6),
        ("sup_{|t|<=1} |phi_mu - phi_nu|", f"{cf:.2e}", cf <= 1e-4),
        ("TV(mu*nu, nu*nu)", f"{eq.value('tv'):.2e}", eq.value("tv") <= 1e-3),
        ("TV(mu, nu)", f"{ne.value('tv_mu_nu'):.4f}", ne.value("tv_mu_nu") >= 0.99),
        ("Gaussian eta TV", f"{ga.value('tv_separation'):.4f} ({ga.info['verdict']})",
         ga.info["verdict"] == "premise violated" and ga.value("tv_separation") > 0.01),
    ])


def _reduced(name):
    """Config with every replication count capped at 2000."""
    out = {"scenario": name, "seed": 12, "streams": 2}
    for f in dataclasses.fields(cli.SCENARIOS[name].params):
        if f.name.endswith("reps"):
            default = f.default if f.default is not dataclasses.MISSING else None
            out[f.name] = min(default, 2000) if default else 2000
    return out


def test_criterion_12_determinism():
    parts = []
    for name in cli.SCENARIOS:
        runs = []
        for _ in range(2):
            _, payload = cli.run_config(cli.build_config(_reduced(name)))
            payload.pop("duration")
            runs.append(cli.json.dumps(payload, sort_keys=True))
        parts.append((name, "identical" if runs[0] == runs[1] else "differs",
                      runs[0] == runs[1]))
    assert record(12, "determinism modulo duration", parts)


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q"]))
