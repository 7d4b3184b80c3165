import math

import numpy as np
import pytest
from scipy import stats as sps

from convthm import conv, dist
from convthm.lan import GammaScaleModel, GaussianLocationModel
from convthm.stats import RngSpec

GAUSS = GaussianLocationModel()
MEAN = conv.make_estimator("mean")
NOISY = conv.make_estimator("noisy_mean", 0.5)
MEDIAN = conv.make_estimator("median")


def exp_cf(v):
    return lambda t: np.exp(-v * np.asarray(t) ** 2 / 2)


# --- estimators and regularity -----------------------------------------------------


def test_estimator_catalog():
    for name in conv.ESTIMATORS:
        est = conv.make_estimator(name)
        d = GAUSS.sample(10, 0.0, 4, np.random.default_rng(0))
        assert est.evaluate(GAUSS, d, np.random.default_rng(1)).shape == (4,)
    with pytest.raises(ValueError):
        conv.make_estimator("mode")


def test_estimators_are_deterministic_given_data():
    d = GAUSS.sample(10, 0.0, 4, np.random.default_rng(0))
    a = NOISY.evaluate(GAUSS, d, np.random.default_rng(5))
    b = NOISY.evaluate(GAUSS, d, np.random.default_rng(5))
    np.testing.assert_array_equal(a, b)


def test_alternating_weights():
    w = conv.alternating_weights(10, 1.5)
    assert w.sum() == pytest.approx(1.0)
    assert 10 * np.sum(w * w) == pytest.approx(1.5)


def test_regularity_threshold_scaling():
    assert conv.regularity_threshold(10_000) == pytest.approx(0.03)
    assert conv.regularity_threshold(40_000) == pytest.approx(0.015)


def test_regularity_requires_zero():
    with pytest.raises(ValueError):
        conv.regularity_check(GAUSS, MEAN, [1.0, 2.0], 10, 100, RngSpec(0))


def test_regularity_of_mean_and_noisy_mean():
    rep = conv.regularity_check(GAUSS, MEAN, [0.0, 1.0, -2.0], 50, 10_000, RngSpec(1))
    assert rep.passed
    rep = conv.regularity_check(GAUSS, NOISY, [0.0, 1.0], 50, 20_000, RngSpec(2))
    assert rep.passed
    assert rep.info["variances"][0] == pytest.approx(1.25, rel=0.03)


def test_regularity_of_median():
    rep = conv.regularity_check(GAUSS, MEDIAN, [0.0, 1.0], 400, 10_000, RngSpec(3))
    assert rep.value("max_pairwise_ks") <= 0.03
    assert rep.info["variances"][0] == pytest.approx(math.pi / 2, rel=0.06)


# --- decomposition -----------------------------------------------------------------


def test_snr_band():
    T = conv.snr_band(exp_cf(1.0), 0.1)
    assert T == pytest.approx(math.sqrt(2 * math.log(10)), abs=5e-3)
    assert conv.snr_band(lambda t: np.ones_like(t), 0.1) == 50.0


def test_efficient_mean_gives_point_mass():
    rep = conv.convolution_decompose(GAUSS, MEAN, 200, 20_000, 3.0, 1e-3, RngSpec(4),
                                     target=lambda t: np.ones_like(t), cf_tol=0.02)
    assert rep.passed
    assert rep.info["cf_sup_error"] <= 1e-9
    assert abs(rep.info["nu_mean"]) <= 0.01


def test_noisy_mean_variance_and_roundtrip():
    rep = conv.convolution_decompose(GAUSS, NOISY, 200, 100_000, 3.0, 1e-3, RngSpec(5),
                                     target=exp_cf(0.25), rt_tol=0.02,
                                     var_target=0.25, var_tol=0.05)
    assert rep.passed
    assert rep.verdict.startswith("valid")


def test_analytic_reference_and_bad_reference():
    rep = conv.convolution_decompose(GAUSS, MEAN, 50, 20_000, 2.0, 1e-3, RngSpec(6),
                                     reference="analytic")
    assert rep.info["reference"] == "analytic"
    assert rep.info["nu_variance"] == pytest.approx(0.0, abs=0.05)
    with pytest.raises(ValueError):
        conv.convolution_decompose(GAUSS, MEAN, 50, 100, 2.0, 1e-3, RngSpec(6), reference="x")


def test_median_nu_variance():
    rep = conv.convolution_decompose(GAUSS, MEDIAN, 200, 100_000, 3.0, 1e-3, RngSpec(7),
                                     var_target=math.pi / 2 - 1, var_tol=0.05)
    assert rep.passed


def test_gamma_model_noisy_mean():
    # nu = N(0, c^2) for every model: the added noise is on the scale of T_n
    m = GammaScaleModel(alpha=2.0)
    rep = conv.convolution_decompose(m, NOISY, 400, 50_000, 3.0, 1e-3, RngSpec(8),
                                     var_target=0.25, var_tol=0.05)
    assert rep.passed


# --- efficiency and invariance -----------------------------------------------------


def test_efficiency_of_mean():
    rep = conv.efficiency_check(GAUSS, MEAN, 100, 10_000, RngSpec(9))
    assert rep.info["max_abs_residual"] <= 1e-12
    assert rep.info["ks_to_efficient"] <= 0.02


def test_efficiency_of_noisy_mean():
    rep = conv.efficiency_check(GAUSS, NOISY, 100, 100_000, RngSpec(10))
    exact = 2 * (1 - sps.norm.cdf(0.2))
    assert rep.info["frac_large"] == pytest.approx(exact, abs=0.01)
    assert rep.info["residual_var"] == pytest.approx(0.25, rel=0.03)


def test_efficiency_of_median():
    rep = conv.efficiency_check(GAUSS, MEDIAN, 400, 20_000, RngSpec(11))
    assert rep.info["residual_var"] == pytest.approx(math.pi / 2 - 1, abs=0.05)


def test_joint_independence_noisy_mean():
    rep = conv.joint_independence_pipeline(GAUSS, NOISY, 200, 100_000, RngSpec(12))
    assert rep.passed
    assert rep.info["residual_var"] == pytest.approx(0.25, rel=0.03)


def test_joint_independence_mean_is_trivial():
    rep = conv.joint_independence_pipeline(GAUSS, MEAN, 50, 5000, RngSpec(13))
    assert rep.passed
    assert rep.value("residual_ks_across_theta") == 0.0


def test_joint_independence_median():
    rep = conv.joint_independence_pipeline(GAUSS, MEDIAN, 400, 20_000, RngSpec(14), tol=0.05)
    assert rep.passed


# --- covariance characterization ---------------------------------------------------


def test_rao_gaussian_weighted_mean_exact():
    rep = conv.rao_covariance_check("gaussian_mean", "mean", "weighted", n=10)
    assert rep.passed and rep.info["minimum_variance"]
    assert all(abs(c["cov"]) <= 1e-15 for c in rep.info["covariances"])


def test_rao_bernoulli_first_obs_exact():
    rep = conv.rao_covariance_check("bernoulli", "mean", "first", n=10, params={"p": 0.3})
    assert rep.passed and rep.info["minimum_variance"]


def test_rao_counterexample_flagged():
    rep = conv.rao_covariance_check("gaussian_mean", "first", "mean", n=10)
    assert not rep.info["minimum_variance"]
    # sigma^2 (1/n - 1) times a^2 for a in (1, -2)
    np.testing.assert_allclose([c["cov"] for c in rep.info["covariances"]],
                               [0.1 - 1, 4 * (0.1 - 1)], rtol=1e-12)


@pytest.mark.parametrize("family,S,T", [("gaussian_mean", "mean", "weighted"),
                                        ("bernoulli", "mean", "first")])
def test_rao_monte_carlo_confirms(family, S, T):
    rep = conv.rao_covariance_check(family, S, T, mode="mc", n=10, reps=20_000, rng=RngSpec(15))
    assert rep.passed and rep.info["minimum_variance"]


def test_rao_monte_carlo_counterexample():
    rep = conv.rao_covariance_check("gaussian_mean", "first", "mean", mode="mc", n=10,
                                    reps=20_000, rng=RngSpec(16))
    assert not rep.info["minimum_variance"]


def test_rao_rejects_unknown():
    with pytest.raises(ValueError):
        conv.rao_covariance_check("poisson", "mean", "first")
    with pytest.raises(ValueError):
        conv.rao_covariance_check("gaussian_mean", "mean", "first", mode="symbolic")


# --- Gaussian limits of pairs ------------------------------------------------------


def test_agc_noisy():
    rep = conv.asymptotic_gaussian_convolution("exponential", "noisy", [10, 100, 1000], 20_000,
                                               RngSpec(17))
    assert rep.passed
    assert rep.info["verdict"] == "premise holds"
    assert rep.info["nu_cf_sup_error"] <= 0.05


def test_agc_same_gives_point_mass():
    rep = conv.asymptotic_gaussian_convolution("gaussian", "same", [50], 5000, RngSpec(18))
    assert rep.passed
    assert rep.info["nu_cf_sup_error"] <= 1e-9


def test_agc_weighted_variance():
    rep = conv.asymptotic_gaussian_convolution("gaussian", "weighted", [100], 20_000, RngSpec(19))
    assert rep.passed
    per = rep.info["per_n"][100]
    assert per["var_T"] == pytest.approx(1.5, rel=0.1)
    assert per["var_T_minus_S"] == pytest.approx(0.5, rel=0.1)


def test_agc_flags_non_gaussian_premise():
    rep = conv.asymptotic_gaussian_convolution("exponential", "noisy", [2], 50_000, RngSpec(20))
    assert rep.info["verdict"] == "premise violated"


# --- convolution kernels -----------------------------------------------------------


def test_kernel_with_point_mass_noise_is_shift():
    P = conv.normal_grid(1.0, 0.01)
    K = conv.ConvolutionKernel(dist.AtomicMeasure([0.0], [1.0]))
    out = conv.apply_convolution_kernel(K, P, 0.3)
    assert dist.distance_tv(out, dist.shift(P, 0.3)) <= 1e-12


def test_kernel_normal_noise():
    P = conv.normal_grid(1.0, 0.01)
    out = conv.apply_convolution_kernel(conv.ConvolutionKernel(P), P, 0.0)
    exact = dist.discretize(sps.norm(0, math.sqrt(2)), out.step, out.x[0], out.x[-1],
                            method="point", anchor=out.origin)
    assert dist.distance_tv(out, exact) <= 1e-4


def test_kernel_equivariance():
    P = conv.normal_grid(1.0, 0.01)
    K = conv.ConvolutionKernel(conv.normal_grid(0.25, 0.01), [[2.0]])
    at_h = conv.apply_convolution_kernel(K, P, 0.5)
    at_0 = conv.apply_convolution_kernel(K, P, 0.0)
    assert dist.distance_tv(at_h, dist.shift(at_0, 1.0)) <= 1e-6


def test_kernel_product_lattice():
    g = conv.normal_grid(1.0, 0.05)
    P = dist.ProductGridMeasure.from_factors([g, g])
    noise = dist.ProductGridMeasure.from_factors([g, g])
    out = conv.apply_convolution_kernel(conv.ConvolutionKernel(noise, np.eye(2)), P, [1.0, -1.0])
    np.testing.assert_allclose([out.marginal(i).mean for i in (0, 1)], [1.0, -1.0], atol=1e-9)
    with pytest.raises(ValueError):
        conv.apply_convolution_kernel(conv.ConvolutionKernel(noise, [[1, 1], [0, 1]]), P, [0, 0])
    with pytest.raises(ValueError):
        conv.ConvolutionKernel(noise, np.ones((2, 3)))
