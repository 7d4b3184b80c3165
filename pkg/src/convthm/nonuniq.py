"""Two different laws whose transforms agree on [-1, 1].

nu has density 2 sin^2(x/2) / (pi x^2) and transform (1 - |t|)+.  mu puts
mass 1/2 at 0 and 2 / (pi^2 (2k+1)^2) at each of +-pi(2k+1), k >= 0; its
transform is 2-periodic and equals 1 - |t| on [-1, 1].  Hence mu * eta =
nu * eta for every eta whose transform vanishes off [-1, 1], while mu and
nu are mutually singular.
"""

from __future__ import annotations

import math
from typing import Union

import numpy as np
from scipy import special
from scipy import stats as sps

from . import dist
from .dist import AtomicMeasure, GridMeasure
from .report import Report

DEFAULT_STEP = math.pi / 128
DEFAULT_HALFWIDTH = 4096 * math.pi
DEFAULT_K = 10_000
TAIL_LIMIT = 1e-3
CF_GRID = np.arange(-192, 193) / 64  # t = j/64, |t| <= 3


def nu_density(x, scale: float = 1.0):
    x = np.asarray(x, dtype=float) / scale
    return np.sinc(x / (2 * math.pi)) ** 2 / (2 * math.pi * scale)


def nu_tail(L: float) -> float:
    """Mass of nu outside [-L, L]."""
    si, _ = special.sici(L)
    return (2 / math.pi) * ((1 - math.cos(L)) / L + math.pi / 2 - si)


def build_nu(step: float = DEFAULT_STEP, halfwidth: float = DEFAULT_HALFWIDTH,
             scale: float = 1.0) -> GridMeasure:
    """nu (or the law of ``scale * X`` for X ~ nu) point-sampled on the lattice
    ``step * k``, ``|k step| <= halfwidth``, and renormalized.

    The transform of the scaled law vanishes off ``[-1/scale, 1/scale]``, so
    with ``step < pi`` the lattice transform is free of aliasing.
    """
    tail = nu_tail(halfwidth / scale)
    if tail > TAIL_LIMIT:
        raise ValueError(f"grid half-width {halfwidth} leaves {tail:.3g} of the mass outside")
    k = int(math.floor(halfwidth / step))
    x = step * np.arange(-k, k + 1)
    m = nu_density(x, scale) * step
    return GridMeasure(x[0], step, m / m.sum(), truncated=tail)


def mu_raw_mass(K: int) -> float:
    """Total mass of the atoms with k <= K before renormalization."""
    k = np.arange(K + 1)
    return 0.5 + float(np.sum(4 / (math.pi ** 2 * (2 * k + 1) ** 2)))


def build_mu(K: int = DEFAULT_K, renormalize: bool = True) -> AtomicMeasure:
    """Atoms of mu for k = 0..K, renormalized to total mass 1."""
    if K < 10:
        raise ValueError("K must be at least 10")
    k = np.arange(K + 1)
    loc = math.pi * (2 * k + 1)
    w = 2 / (math.pi ** 2 * (2 * k + 1) ** 2)
    locs = np.concatenate([-loc[::-1], [0.0], loc])
    probs = np.concatenate([w[::-1], [0.5], w])
    if renormalize:
        probs = probs / probs.sum()
    else:
        # keep the raw masses but satisfy the measure invariant on the atom at 0
        probs[K + 1] += 1.0 - probs.sum()
    return AtomicMeasure(locs, probs)


def triangle_cf(t):
    return np.clip(1 - np.abs(np.asarray(t, dtype=float)), 0.0, None)


def mu_cf(t, K: int = DEFAULT_K, renormalize: bool = True) -> np.ndarray:
    """Transform of the truncated mu (real, since mu is symmetric)."""
    t = np.asarray(t, dtype=float)
    k = np.arange(K + 1)
    w = 4 / (math.pi ** 2 * (2 * k + 1) ** 2)
    v = 0.5 + np.cos(np.multiply.outer(t, math.pi * (2 * k + 1))) @ w
    return v / mu_raw_mass(K) if renormalize else v


def _fft_size(step: float, spacing: float) -> int:
    n = 2 * math.pi / (step * spacing)
    if abs(n - round(n)) > 1e-6:
        raise ValueError("frequency spacing does not divide the lattice period")
    return int(round(n))


def grid_cf(m: GridMeasure, t: np.ndarray, spacing: float = 1 / 64) -> np.ndarray:
    """Lattice transform at frequencies t that are multiples of ``spacing``,
    computed by a folded FFT."""
    t = np.asarray(t, dtype=float)
    N = _fft_size(m.step, spacing)
    freqs, v = dist.lattice_charfn_fft(m, N)
    idx = np.rint((t - freqs[0]) / spacing).astype(int)
    return v[idx]


def mu_on_lattice(mu: AtomicMeasure, step: float) -> GridMeasure:
    g = dist.to_grid(mu, step)
    if g.snap_error > 1e-9 * np.abs(mu.locs).max():
        raise ValueError("atoms of mu are not on the lattice")
    return g


def eta_family(kind: str, step: float = DEFAULT_STEP,
               halfwidth: float = DEFAULT_HALFWIDTH) -> GridMeasure:
    """Test laws: "nu", "scaled:c" (nu scaled by c), "gauss" (N(0, 1))."""
    if kind == "nu":
        return build_nu(step, halfwidth)
    if kind.startswith("scaled:"):
        return build_nu(step, halfwidth, float(kind.split(":", 1)[1]))
    if kind == "gauss":
        return dist.discretize(sps.norm(), step, -12.0, 12.0, method="point")
    raise ValueError(f"unknown eta {kind!r}")


def premise_scan(eta: GridMeasure, spacing: float = 1 / 256) -> tuple[float, float]:
    """Largest |eta_hat| over 1 < |t| <= pi/step, and where it occurs."""
    N = _fft_size(eta.step, spacing)
    t, v = dist.lattice_charfn_fft(eta, N)
    sel = np.abs(t) > 1 + 1e-12
    i = int(np.argmax(np.abs(v[sel])))
    return float(np.abs(v[sel])[i]), float(abs(t[sel][i]))


def verify_equal_convolutions(eta: Union[str, GridMeasure], K: int = DEFAULT_K,
                              step: float = DEFAULT_STEP, halfwidth: float = DEFAULT_HALFWIDTH,
                              cf_tol: float = 1e-4, tv_tol: float = 1e-3,
                              premise_tol: float = 1e-3) -> Report:
    """Compare mu * eta with nu * eta in transform and in total variation.

    The premise (|eta_hat| <= premise_tol off [-1, 1]) is checked first.
    When it holds, both criteria must pass; when it fails, the report says
    so and records the distance that separates the two convolutions.
    """
    label = eta if isinstance(eta, str) else "custom"
    if isinstance(eta, str):
        eta = eta_family(eta, step, halfwidth)
    mu = build_mu(K)
    nu = build_nu(step, halfwidth)
    mu_g = mu_on_lattice(mu, step)
    sup_eta, where = premise_scan(eta)
    premise = sup_eta <= premise_tol
    t = CF_GRID
    gap = float(np.max(np.abs((mu_cf(t, K) - grid_cf(nu, t)) * grid_cf(eta, t))))
    tv = dist.distance_tv(dist.convolve(mu_g, eta), dist.convolve(nu, eta))
    rep = Report("equal_convolutions")
    rep.info.update(eta=label, K=K, step=step, halfwidth=halfwidth,
                    premise_sup=sup_eta, premise_argmax=where, cf_gap=gap, tv=tv,
                    verdict="premise holds" if premise else "premise violated")
    rep.artifacts["mu_eta"] = dist.convolve(mu_g, eta)
    rep.artifacts["nu_eta"] = dist.convolve(nu, eta)
    if premise:
        rep.add("cf_gap", gap, cf_tol)
        rep.add("tv", tv, tv_tol)
    else:
        rep.add("tv_separation", tv, 0.01, op="gt")
    return rep


def verify_mu_neq_nu(K: int = DEFAULT_K, step: float = DEFAULT_STEP,
                     halfwidth: float = DEFAULT_HALFWIDTH) -> Report:
    """mu and nu differ: TV near 1 and a transform gap at t = 1.5, while the
    transforms agree on [-1, 1]."""
    mu = build_mu(K)
    nu = build_nu(step, halfwidth)
    tv = dist.distance_tv(mu_on_lattice(mu, step), nu)
    t_in = CF_GRID[np.abs(CF_GRID) <= 1]
    agree = float(np.max(np.abs(mu_cf(t_in, K) - grid_cf(nu, t_in))))
    t15 = np.array([-1.5, 1.5])
    gap15 = float(abs(mu_cf(t15, K)[1] - grid_cf(nu, t15)[1]))
    rep = Report("mu_neq_nu")
    rep.info.update(K=K, step=step, raw_mass=mu_raw_mass(K),
                    mu_cf_1p5=float(mu_cf(t15, K)[1]))
    rep.add("tv_mu_nu", tv, 0.99, op="ge")
    rep.add("cf_agreement_on_unit_band", agree, 1e-4)
    rep.add("cf_gap_at_1.5", gap15, 0.4, op="ge")
    return rep


def truncation_convergence(K_list=tuple(100 * 2 ** j for j in range(8))) -> Report:
    """Mass defect and transform error on [-1, 1] of the raw truncated mu."""
    t = CF_GRID[np.abs(CF_GRID) <= 1]
    defect, err = [], []
    for K in K_list:
        defect.append(1.0 - mu_raw_mass(K))
        err.append(float(np.max(np.abs(mu_cf(t, K, renormalize=False) - triangle_cf(t)))))
    rep = Report("truncation_convergence")
    rep.info.update(K=list(K_list), mass_defect=defect, cf_error=err)
    rep.add("defect_decreasing", float(np.all(np.diff(defect) < 0)), 1.0, op="eq")
    rep.add("cf_error_decreasing", float(np.all(np.diff(err) < 0)), 1.0, op="eq")
    return rep
