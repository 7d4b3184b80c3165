import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from convthm import dist, nonuniq
from convthm.dist import (AtomicMeasure, CharFn, GridMeasure, ProductGridMeasure,
                          TruncationWarning)
from convthm.extremes import exp_grid, uniform_cf

F3 = dist.symmetric_grid(3.0, 0.01)


def normal(var, step=0.01, method="point"):
    sd = math.sqrt(var)
    return dist.discretize(sps.norm(0, sd), step, -12 * sd, 12 * sd, method=method)


@pytest.fixture(scope="module")
def n1():
    return normal(1.0)


@pytest.fixture(scope="module")
def n2():
    return normal(2.0)


# --- construction and invariants -------------------------------------------------


def test_grid_measure_rejects_bad_masses():
    with pytest.raises(ValueError):
        GridMeasure(0.0, 1.0, [0.5, 0.6])
    with pytest.raises(ValueError):
        GridMeasure(0.0, 1.0, [1.5, -0.5])
    with pytest.raises(ValueError):
        GridMeasure(0.0, 0.0, [1.0])
    with pytest.raises(ValueError):
        GridMeasure(0.0, 1.0, [])


def test_grid_measure_is_immutable():
    g = GridMeasure(0.0, 1.0, [0.25, 0.75])
    with pytest.raises(ValueError):
        g.masses[0] = 1.0


def test_atomic_measure_sorts_and_rejects_duplicates():
    a = AtomicMeasure([2.0, -1.0], [0.25, 0.75])
    np.testing.assert_array_equal(a.locs, [-1.0, 2.0])
    np.testing.assert_array_equal(a.probs, [0.75, 0.25])
    with pytest.raises(ValueError):
        AtomicMeasure([1.0, 1.0], [0.5, 0.5])
    with pytest.raises(ValueError):
        AtomicMeasure([1.0, 2.0], [1.0, 0.0])


def test_product_measure_marginals():
    a = GridMeasure(0.0, 1.0, [0.2, 0.8])
    b = GridMeasure(-1.0, 0.5, [0.5, 0.25, 0.25])
    p = ProductGridMeasure.from_factors([a, b])
    np.testing.assert_allclose(p.marginal(0).masses, a.masses)
    np.testing.assert_allclose(p.marginal(1).masses, b.masses)
    assert p.coords().shape == (2, 3, 2)
    with pytest.raises(ValueError):
        ProductGridMeasure(np.zeros(4), np.ones(4), np.full((1, 1, 1, 1), 1.0))


def test_discretize_reports_truncation():
    with pytest.warns(TruncationWarning):
        g = dist.discretize(sps.norm(), 0.01, -2, 2)
    assert g.truncated == pytest.approx(2 * sps.norm.sf(2.005), rel=1e-6)
    assert g.total == pytest.approx(1.0, abs=1e-12)


def test_from_samples_histogram():
    g = dist.from_samples([0.0, 0.1, 0.9, 1.0], 1.0)
    np.testing.assert_allclose(g.masses, [0.5, 0.5])
    assert g.origin == 0.0


# --- characteristic functions ------------------------------------------------------


def test_point_mass_charfn_is_one():
    cf = dist.to_charfn(AtomicMeasure.point(0.0), F3)
    np.testing.assert_allclose(cf.values, 1.0)


def test_normal_charfn_matches_closed_form():
    g = dist.discretize(sps.norm(), 1e-3, -10, 10, method="point")
    cf = dist.to_charfn(g, F3)
    assert cf.sup_error(lambda t: np.exp(-t * t / 2)) <= 1e-6


def test_triangle_density_charfn():
    nu = nonuniq.build_nu(math.pi / 128, 1024 * math.pi)
    t = np.array([-2, -1.5, -1, -0.5, 0, 0.5, 1, 1.5, 2.0])
    v = dist.to_charfn(nu, t).values.real
    np.testing.assert_allclose(v, np.clip(1 - np.abs(t), 0, None), atol=1e-3)


def test_charfn_invariants_enforced():
    f = dist.symmetric_grid(1.0, 0.5)
    with pytest.raises(ValueError):
        CharFn(f, [1, 1, 2, 1, 1])  # phi(0) != 1
    with pytest.raises(ValueError):
        CharFn(f, [0.5, 0.5j, 1, 0.5j, 0.5])  # not Hermitian
    with pytest.raises(ValueError):
        CharFn(f, [2, 1, 1, 1, 2])  # |phi| > 1
    with pytest.raises(ValueError):
        dist.to_charfn(AtomicMeasure.point(), [0.0, 1.0, 2.0])  # not symmetric


def test_atomic_charfn_is_exact_sum():
    a = AtomicMeasure([-1.0, 0.5, 3.0], [0.2, 0.3, 0.5])
    cf = dist.to_charfn(a, F3)
    ref = np.exp(1j * np.outer(F3, a.locs)) @ a.probs
    np.testing.assert_allclose(cf.values, ref, atol=1e-15)


def test_lattice_fft_matches_direct_sum():
    g = GridMeasure(-3.7, 0.25, sps.binom(40, 0.3).pmf(np.arange(41)))
    t, v = dist.lattice_charfn_fft(g, 16)  # folded: 41 > 16
    direct = np.exp(1j * np.outer(t, g.x)) @ g.masses
    np.testing.assert_allclose(v, direct, atol=1e-13)


def test_charfn_variance_fit(n2):
    cf = dist.to_charfn(n2, F3)
    assert cf.variance(1.0) == pytest.approx(2.0, abs=1e-6)


def test_charfn_serialization_roundtrip():
    g = GridMeasure(0.0, 0.5, [0.25, 0.5, 0.25])
    cf = dist.to_charfn(g, F3)
    back = CharFn.from_dict(json.loads(json.dumps(cf.to_dict())))
    np.testing.assert_allclose(back.values, cf.values)


# --- inversion ---------------------------------------------------------------------


def test_from_charfn_constant_gives_point_mass():
    cf = dist.analytic_charfn(lambda t: np.ones_like(t), dist.dft_freqs(0.1, 21))
    rec = dist.from_charfn(cf, -1.0, 0.1, 21)
    assert rec.valid
    assert rec.measure.masses.max() == pytest.approx(1.0, abs=1e-12)
    assert rec.measure.x[np.argmax(rec.measure.masses)] == pytest.approx(0.0, abs=1e-12)


def test_from_charfn_normal_density():
    step, size, origin = 0.05, 401, -10.0
    cf = dist.analytic_charfn(lambda t: np.exp(-t * t / 2), dist.dft_freqs(step, size))
    rec = dist.from_charfn(cf, origin, step, size)
    x = origin + step * np.arange(size)
    assert np.max(np.abs(rec.raw / step - sps.norm.pdf(x))) <= 1e-4
    assert rec.clipped_mass <= 1e-12


def test_from_charfn_roundtrip_compact():
    m = GridMeasure(-1.0, 0.25, sps.binom(8, 0.3).pmf(np.arange(9)))
    rec = dist.from_charfn(dist.to_charfn(m, dist.dft_freqs(m.step, len(m))), m.origin,
                           m.step, len(m))
    assert dist.distance_tv(rec.measure, m) <= 1e-6


def test_from_charfn_flags_negative_mass():
    # exp(+t^2/2) is not a transform of any probability measure
    f = dist.dft_freqs(0.5, 41)
    cf = CharFn(f, np.exp(f * f / 8), strict=False)
    rec = dist.from_charfn(cf, -10.0, 0.5, 41)
    assert not rec.valid
    assert rec.verdict == "not a probability"


# --- convolution -------------------------------------------------------------------


def test_convolve_with_point_mass_is_shift(n1):
    c = dist.convolve(n1, AtomicMeasure.point(1.5))
    assert c.origin == pytest.approx(n1.origin + 1.5)
    np.testing.assert_array_equal(c.masses, n1.masses)


def test_normal_convolution_closed_form():
    a = normal(1.0, method="cell")
    c = dist.convolve(a, a)
    exact = dist.discretize(sps.norm(0, math.sqrt(2)), 0.01, c.x[0], c.x[-1], method="cell")
    assert dist.distance_tv(c, exact) <= 1e-5


def test_exponential_convolution_is_gamma():
    e = dist.discretize(sps.expon(), 0.001, 0, 40, method="cell", anchor=0.0005)
    c = dist.convolve(e, e)
    exact = dist.discretize(sps.gamma(2), 0.001, c.x[0], c.x[-1], method="cell", anchor=c.origin)
    assert dist.distance_tv(c, exact) <= 1e-4


def test_convolve_rejects_incompatible_steps():
    a = GridMeasure(0.0, 0.1, [0.5, 0.5])
    b = GridMeasure(0.0, 0.3, [0.5, 0.5])
    with pytest.raises(ValueError):
        dist.convolve(a, b)
    c = dist.convolve(a, b, regrid_ok=True)
    assert c.step == pytest.approx(0.1)
    assert c.mean == pytest.approx(a.mean + b.mean)


def test_atom_snapping_reported():
    g = GridMeasure(0.0, 0.1, [0.5, 0.5])
    a = AtomicMeasure([0.0, 0.23], [0.5, 0.5])
    c = dist.convolve(g, a)
    assert c.snap_error == pytest.approx(0.03)


def test_atomic_convolution_exact():
    a = AtomicMeasure([0.0, 1.0], [0.5, 0.5])
    c = dist.convolve(a, a)
    np.testing.assert_allclose(c.locs, [0, 1, 2])
    np.testing.assert_allclose(c.probs, [0.25, 0.5, 0.25])


def test_convolution_theorem_for_transforms():
    a = GridMeasure(-1.0, 0.2, sps.binom(10, 0.4).pmf(np.arange(11)))
    b = GridMeasure(0.4, 0.2, sps.poisson(2).pmf(np.arange(15)) / sps.poisson(2).cdf(14))
    lhs = dist.to_charfn(dist.convolve(a, b), F3).values
    rhs = dist.to_charfn(a, F3).values * dist.to_charfn(b, F3).values
    assert np.max(np.abs(lhs - rhs)) <= 1e-6


masses = st.lists(st.floats(0.0, 1.0), min_size=1, max_size=12).filter(lambda m: sum(m) > 0.1)


def _grid(m, origin):
    m = np.asarray(m)
    return GridMeasure(origin, 0.5, m / m.sum())


@settings(max_examples=40, deadline=None)
@given(masses, masses, masses, st.integers(-5, 5), st.integers(-5, 5))
def test_convolve_commutative_associative(ma, mb, mc, ka, kb):
    a, b, c = _grid(ma, 0.5 * ka), _grid(mb, 0.5 * kb), _grid(mc, 0.0)
    assert dist.distance_tv(dist.convolve(a, b), dist.convolve(b, a)) <= 1e-8
    left = dist.convolve(dist.convolve(a, b), c)
    right = dist.convolve(a, dist.convolve(b, c))
    assert dist.distance_tv(left, right) <= 1e-8
    assert dist.convolve(a, b).total == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(masses, masses, masses)
def test_distances_triangle_inequality(ma, mb, mc):
    a, b, c = _grid(ma, 0.0), _grid(mb, 1.0), _grid(mc, -0.5)
    for d in (dist.distance_tv, dist.distance_ks):
        assert 0 <= d(a, b) <= 1
        assert d(a, c) <= d(a, b) + d(b, c) + 1e-9


# --- distances, shift, scale -------------------------------------------------------


def test_distance_basics(n1):
    assert dist.distance_tv(n1, n1) == 0.0
    assert dist.distance_tv(AtomicMeasure.point(0.0), AtomicMeasure.point(1.0)) == 1.0
    assert dist.distance_ks(AtomicMeasure.point(0.0), AtomicMeasure.point(1.0)) == 1.0


def test_tv_atomic_vs_density_is_one_minus_overlap():
    # on a lattice the atoms share points with the density; the TV is exactly
    # one minus the overlapping mass, which vanishes with the step
    step = math.pi / 128
    mu = nonuniq.mu_on_lattice(nonuniq.build_mu(1000), step)
    nu = nonuniq.build_nu(step, 1024 * math.pi)
    _, _, a, b = dist.common_lattice(mu, nu)
    overlap = np.minimum(a, b).sum()
    assert dist.distance_tv(mu, nu) == pytest.approx(1 - overlap, abs=1e-12)
    assert overlap <= step / 2


def test_shift_and_scale():
    e = dist.shift(AtomicMeasure.point(0.0), 3.0)
    np.testing.assert_array_equal(e.locs, [3.0])
    n = dist.scale(normal(1.0, step=0.01), 2.0)
    exact = dist.discretize(sps.norm(0, 2), n.step, n.x[0], n.x[-1], method="point",
                            anchor=n.origin)
    assert dist.distance_tv(n, exact) <= 1e-6
    with pytest.raises(ValueError):
        dist.scale(n, 0.0)
    r = dist.scale(GridMeasure(1.0, 1.0, [0.2, 0.8]), -1.0)
    np.testing.assert_allclose(r.x, [-2.0, -1.0])
    np.testing.assert_allclose(r.masses, [0.8, 0.2])


def test_scaled_atoms_have_triangle_transform():
    # atoms at 0 and +-(4k+2), scaled by pi/2
    k = np.arange(2001)
    w = 2 / (math.pi ** 2 * (2 * k + 1) ** 2)
    locs = np.concatenate([-(4 * k + 2)[::-1], [0], 4 * k + 2]).astype(float)
    p = np.concatenate([w[::-1], [0.5], w])
    mu0 = AtomicMeasure(locs, p / p.sum())
    mu = dist.scale(mu0, math.pi / 2)
    t = dist.symmetric_grid(1.0, 0.05)
    assert dist.to_charfn(mu, t).sup_error(lambda s: 1 - np.abs(s)) <= 1e-3


def test_regrid_preserves_mass_and_mean():
    g = GridMeasure(0.013, 0.07, sps.binom(20, 0.5).pmf(np.arange(21)))
    r = dist.regrid(g, 0.05)
    assert r.total == pytest.approx(1.0, abs=1e-12)
    assert r.mean == pytest.approx(g.mean, abs=1e-12)


# --- deconvolution -----------------------------------------------------------------


def test_deconvolve_self_gives_point_mass(n1):
    d = dist.deconvolve(n1, n1, band=4)
    assert d.valid
    assert d.charfn.sup_error(lambda t: np.ones_like(t)) <= 1e-12
    assert d.estimate.masses.max() == pytest.approx(1.0)
    assert d.estimate.mean == pytest.approx(0.0, abs=1e-12)


def test_deconvolve_normals(n1, n2):
    d = dist.deconvolve(n2, n1, band=4, floor=1e-3)
    assert d.verdict == "valid probability"
    assert d.charfn.sup_error(lambda t: np.exp(-t * t / 2), 3.0) <= 1e-4
    assert d.estimate.var == pytest.approx(1.0, abs=1e-6)
    assert dist.roundtrip_tv(d.estimate, n1, n2) <= 2e-3


def test_deconvolve_default_band_is_insufficient_for_normal(n1, n2):
    # |p_hat| < 1e-3 beyond t = 3.72, i.e. on more than half of [0, 8]
    d = dist.deconvolve(n2, n1)
    assert d.verdict == "insufficient band"
    assert d.undefined_fraction > 0.5


def test_deconvolve_uniform_out_of_exponential():
    e = exp_grid(0.005)
    u = dist.discretize(sps.uniform(0, 0.5), 0.005, 0, 0.5, method="cell", anchor=0.0025)
    q = dist.convolve(e, u)
    d = dist.deconvolve(q, e, band=8, floor=1e-3)
    assert d.valid
    assert d.charfn.sup_error(uniform_cf(0.0, 0.5), 8) <= 1e-3
    # the band limits resolution: the round trip is checked at 0.05
    assert dist.roundtrip_tv(d.estimate, e, q, resolution=0.05) <= 2e-3


def test_deconvolve_argument_errors(n1):
    with pytest.raises(ValueError):
        dist.deconvolve(n1, n1, band=0)
    with pytest.raises(ValueError):
        dist.deconvolve(n1, n1, floor=0)


def test_check_spread(n1, n2):
    assert dist.check_spread(n1, n1, band=4).spread
    yes = dist.check_spread(n2, n1, band=4)
    assert yes.spread and yes.nu.var == pytest.approx(1.0, abs=1e-6)
    no = dist.check_spread(n1, n2, band=4)
    assert not no.spread
    assert no.verdict == "not a probability"
    assert no.deconvolution.charfn.modulus_excess > 1.0


def test_deconvolve_single_atom_exact():
    g = GridMeasure(-1.0, 0.1, sps.binom(20, 0.5).pmf(np.arange(21)))
    q = dist.shift(g, 0.7)
    d = dist.deconvolve(q, g, band=8)
    assert d.valid
    assert d.estimate.mean == pytest.approx(0.7, abs=1e-9)
    assert d.estimate.var <= 1e-9


# --- serialization -----------------------------------------------------------------


def test_measure_json_roundtrip():
    g = GridMeasure(0.5, 0.25, [0.1, 0.2, 0.7])
    back = dist.measure_from_dict(json.loads(dist.dumps(g)))
    assert dist.distance_tv(g, back) == 0.0
    a = AtomicMeasure([0.0, 2.0], [0.4, 0.6])
    back = dist.measure_from_dict(json.loads(dist.dumps(a)))
    np.testing.assert_array_equal(back.locs, a.locs)
    with pytest.raises(ValueError):
        dist.measure_from_dict({"kind": "other"})


def test_measure_csv_roundtrip(tmp_path):
    g = normal(1.0, step=0.05)
    g.to_csv(tmp_path / "m.csv")
    back = GridMeasure.from_csv(tmp_path / "m.csv")
    assert back.step == pytest.approx(g.step, rel=1e-9)
    assert dist.distance_tv(back, g) <= 1e-12
    cf = dist.to_charfn(g, F3)
    cf.to_csv(tmp_path / "cf.csv")
    data = np.genfromtxt(tmp_path / "cf.csv", delimiter=",", skip_header=1)
    np.testing.assert_allclose(data[:, 1] + 1j * data[:, 2], cf.values)
