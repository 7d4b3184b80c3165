"""Endpoint estimation for uniform samples, and a Lévy process observed at
finitely many times with additive shifts."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy import integrate, optimize
from scipy import stats as sps

from . import dist
from .conv import ConvolutionReport, decompose
from .dist import AtomicMeasure, CharFn, GridMeasure
from .report import Report
from .stats import (RngSpec, SampleSet, independence_check, ks_two_sample, run_streams)


# ---------------------------------------------------------------------------
# uniform endpoints
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UniformEndpointModel:
    """n observations uniform on [a + theta1/n, b + theta2/n]."""

    n: int
    theta: tuple = (0.0, 0.0)
    a: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        t1, t2 = self.theta
        if not t2 - t1 > -self.n * (self.b - self.a):
            raise ValueError("local endpoints are not ordered")

    @property
    def lower(self) -> float:
        return self.a + self.theta[0] / self.n

    @property
    def upper(self) -> float:
        return self.b + self.theta[1] / self.n

    def transform(self, y: np.ndarray) -> np.ndarray:
        """Affine map of base uniforms on [a, b] to observations."""
        t1, t2 = self.theta
        c = 1.0 + (t2 - t1) / (self.n * (self.b - self.a))
        return c * (y - self.a) + self.a + t1 / self.n


def _uniform_extremes(gen: np.random.Generator, n: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Exact (min, max) of n uniforms on [0, 1], k times."""
    lo = -np.expm1(np.log(gen.random(k)) / n)  # 1 - U^(1/n)
    if n == 1:
        return lo, lo.copy()
    hi = lo + (1 - lo) * np.exp(np.log(gen.random(k)) / (n - 1))
    return lo, hi


def simulate_endpoint(n: int, theta, reps: int, rng: RngSpec, a: float = 0.0,
                      b: float = 1.0) -> SampleSet:
    """Rows (n (Z_{1:n} - a), n (Z_{n:n} - b))."""
    m = UniformEndpointModel(n, tuple(theta), a, b)

    def fn(gen, k):
        lo, hi = _uniform_extremes(gen, n, k)
        base_lo, base_hi = a + (b - a) * lo, a + (b - a) * hi
        return np.stack([n * (m.transform(base_lo) - a), n * (m.transform(base_hi) - b)], axis=1)

    return SampleSet(run_streams(rng, reps, fn), {"seed": rng.master_seed, "key": rng.key})


def lower_extreme_density(n: int):
    """Density of n Z_{1:n} for uniform data at theta = 0, on [0, n]."""
    def f(x):
        x = np.asarray(x, dtype=float)
        inside = (x >= 0) & (x <= n)
        base = np.clip(1 - x / n, 0.0, None)
        return np.where(inside, base ** (n - 1) if n > 1 else 1.0, 0.0)
    return f


def exact_lower_extreme_tv(n: int) -> float:
    """TV between the law of n Z_{1:n} (theta = 0) and Exp(1), by quadrature.

    The two densities cross once, at the root of (n-1) log(1 - x/n) + x = 0;
    the integral is split there.  Mass of Exp(1) beyond n is added exactly.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    g = lower_extreme_density(n)
    points = None
    if n > 1:
        cross = optimize.brentq(lambda x: (n - 1) * math.log1p(-x / n) + x, 1e-12,
                                n * (1 - 1e-12), xtol=1e-15)
        points = [cross]
    val, _ = integrate.quad(lambda x: abs(float(g(x)) - math.exp(-x)), 0.0, float(n),
                            points=points, limit=500, epsabs=1e-14, epsrel=1e-12)
    return 0.5 * (val + math.exp(-n))


def asymptotic_independence_check(n_list: Sequence[int], reps: int, rng: RngSpec,
                                  tol: Optional[float] = None) -> Report:
    """Independence statistic of the extreme pair for each n; the check, if
    requested, applies to the largest n."""
    stats = {}
    for j, n in enumerate(n_list):
        pairs = simulate_endpoint(n, (0.0, 0.0), reps, rng.child(j))
        stats[int(n)] = independence_check(pairs)
    rep = Report("asymptotic_independence")
    rep.info.update(reps=reps, statistic=stats)
    if tol is not None:
        rep.add("independence_largest_n", stats[int(max(n_list))], tol)
    return rep


def uniform_cf(lo: float, hi: float):
    w = hi - lo

    def f(t):
        t = np.asarray(t, dtype=float)
        z = np.where(t == 0, 1.0, t)
        return np.where(t == 0, 1.0 + 0j,
                        np.exp(1j * lo * t) * (np.exp(1j * w * z) - 1) / (1j * w * z))
    return f


def exp_grid(step: float = 0.01, upper: float = 40.0) -> GridMeasure:
    return dist.discretize(sps.expon(), step, 0.0, upper, method="cell", anchor=step / 2)


def _endpoint_columns(variant: str, n: int, reps: int, rng: RngSpec, noise: float,
                      theta) -> np.ndarray:
    """Rows (lower estimate, lower extreme, -upper estimate, -upper extreme),
    each recentred at its true local endpoint and scaled by n."""
    if variant not in ("extremes", "noisy_extremes"):
        raise ValueError(f"unknown variant {variant!r}")
    m = UniformEndpointModel(n, tuple(theta))

    def fn(gen, k):
        lo, hi = _uniform_extremes(gen, n, k)
        el = n * (m.transform(lo) - m.lower)
        eh = n * (m.transform(hi) - m.upper)
        if variant == "noisy_extremes":
            ul, uh = gen.uniform(0, noise, k), gen.uniform(0, noise, k)
        else:
            ul = uh = np.zeros(k)
        return np.stack([el + ul, el, -(eh + uh), -eh], axis=1)

    return run_streams(rng, reps, fn)


def endpoint_convolution_check(variant: str, n: int, reps: int, rng: RngSpec,
                               floor: float = 0.25, band: Optional[float] = None,
                               noise: float = 0.5, theta=(0.0, 0.0),
                               cf_tol: Optional[float] = None,
                               rt_tol: Optional[float] = None) -> Report:
    """Deconvolve the law of the extremes (paired) out of an estimator's law,
    one coordinate at a time.

    ``variant`` is "extremes" or "noisy_extremes" (independent
    Uniform[0, noise]/n added to both coordinates).  The upper coordinate is
    reflected so both are handled on [0, inf) against Exp(1).
    """
    d = _endpoint_columns(variant, n, reps, rng, noise, theta)
    b = band if band is not None else math.sqrt(1 / floor ** 2 - 1)
    target = uniform_cf(0.0, noise) if variant == "noisy_extremes" else (lambda t: np.ones_like(t))
    reflected = ((lambda t: np.conj(target(t))) if variant == "noisy_extremes" else target)
    p_grid = exp_grid()
    rep = Report("endpoint_convolution")
    rep.info.update(variant=variant, n=n, reps=reps, theta=list(theta))
    per = {}
    for lbl, qcol, pcol, tgt in (("lower", 0, 1, target), ("upper", 2, 3, reflected)):
        sub = decompose(d[:, qcol], d[:, pcol], p_grid, b, floor, name=lbl, target=tgt,
                        cf_tol=cf_tol, rt_tol=rt_tol)
        if lbl == "upper" and sub.nu is not None:
            sub.nu = dist.scale(sub.nu, -1.0)
        per[lbl] = sub
        rep.extend(sub, prefix=f"{lbl}:")
    rep.artifacts["per_coordinate"] = per
    rep.artifacts["samples"] = d
    return rep


def endpoint_regularity_check(variant: str, n: int, reps: int, rng: RngSpec,
                              thetas=((0.0, 0.0), (1.0, -1.0)), noise: float = 0.5,
                              tol: float = 0.02) -> Report:
    """KS between recentred estimator laws under two local parameters."""
    laws = []
    for j, th in enumerate(thetas):
        laws.append(_endpoint_columns(variant, n, reps, rng.child(j), noise, th))
    rep = Report("endpoint_regularity")
    rep.info.update(variant=variant, n=n, reps=reps, thetas=[list(t) for t in thetas])
    for k, lbl in ((0, "lower"), (2, "upper")):
        rep.add(f"ks_{lbl}", ks_two_sample(laws[0][:, k], laws[1][:, k]), tol)
    return rep


# ---------------------------------------------------------------------------
# Lévy shift model
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LevyShiftModel:
    """Gamma process with rate 1 and intensity ``alpha`` observed at
    ``times``, each observation shifted by its own ``shift``."""

    times: np.ndarray
    alpha: float = 2.0
    shift: Optional[np.ndarray] = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).ravel()
        if t.size < 1 or t[0] <= 0 or np.any(np.diff(t) <= 0):
            raise ValueError("times must be positive and strictly increasing")
        if t.size > 8:
            raise ValueError("at most 8 observation times are supported")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        s = np.zeros(t.size) if self.shift is None else np.asarray(self.shift, float).ravel()
        if s.shape != t.shape or not np.all(np.isfinite(s)):
            raise ValueError("shift must be finite with one entry per time")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "shift", s)

    @property
    def m(self) -> int:
        return self.times.size

    @property
    def shapes(self) -> np.ndarray:
        return self.alpha * np.diff(np.concatenate([[0.0], self.times]))

    def with_shift(self, shift) -> "LevyShiftModel":
        return LevyShiftModel(self.times, self.alpha, shift)


def levy_simulate(model: LevyShiftModel, reps: int, rng: RngSpec) -> SampleSet:
    def fn(gen, k):
        inc = gen.gamma(model.shapes, 1.0, size=(k, model.m))
        return np.cumsum(inc, axis=1) + model.shift
    return SampleSet(run_streams(rng, reps, fn), {"seed": rng.master_seed, "key": rng.key})


def levy_increment_transform(rows) -> np.ndarray:
    """Differences along the last axis, the first entry kept as is."""
    r = np.asarray(rows, dtype=float)
    return np.diff(r, axis=-1, prepend=0.0)


def levy_increment_inverse(increments) -> np.ndarray:
    return np.cumsum(np.asarray(increments, dtype=float), axis=-1)


def _levy_columns(model: LevyShiftModel, variant: str, coord: int, noise: float):
    s = levy_increment_transform(model.shift)

    def fn(gen, k):
        x = np.cumsum(gen.gamma(model.shapes, 1.0, size=(k, model.m)), axis=1) + model.shift
        t = x.copy()
        if variant == "noisy":
            t[:, coord] += gen.uniform(0.0, noise, k)
        elif variant != "identity":
            raise ValueError(f"unknown variant {variant!r}")
        yt = levy_increment_transform(t)[:, coord] - s[coord]
        yx = levy_increment_transform(x)[:, coord] - s[coord]
        return np.stack([yt, yx], axis=1)
    return fn


def gamma_grid(shape: float, step: float = 0.01) -> GridMeasure:
    d = sps.gamma(shape)
    return dist.discretize(d, step, 0.0, float(d.isf(1e-12)), method="cell", anchor=step / 2)


def levy_convolution_check(model: LevyShiftModel, variant: str, coord: int, reps: int,
                           rng: RngSpec, floor: float = 0.25, band: Optional[float] = None,
                           noise: float = 0.3, cf_tol: Optional[float] = None,
                           rt_tol: Optional[float] = None) -> ConvolutionReport:
    """Deconvolve the Gamma increment (paired) out of the estimator's
    increment ``coord``.  ``variant`` is "identity" or "noisy" (Uniform[0,
    noise] added to coordinate ``coord`` of the observation)."""
    d = run_streams(rng, reps, _levy_columns(model, variant, coord, noise))
    k = float(model.shapes[coord])
    b = band if band is not None else math.sqrt(floor ** (-2 / k) - 1)
    target = uniform_cf(0.0, noise) if variant == "noisy" else (lambda t: np.ones_like(t))
    rep = decompose(d[:, 0], d[:, 1], gamma_grid(k), b, floor, name="levy_convolution",
                    target=target, cf_tol=cf_tol, rt_tol=rt_tol)
    rep.info.update(variant=variant, coord=coord, reps=reps, increment_shape=k)
    return rep


def levy_equivariance_check(model: LevyShiftModel, variant: str, coord: int, reps: int,
                            rng: RngSpec, shift2=None, noise: float = 0.3,
                            tol: float = 0.02) -> Report:
    """KS between recentred increment laws under two shift vectors."""
    if shift2 is None:
        shift2 = np.eye(model.m)[0]
    a = run_streams(rng.child(0), reps, _levy_columns(model, variant, coord, noise))
    b = run_streams(rng.child(1), reps,
                    _levy_columns(model.with_shift(shift2), variant, coord, noise))
    rep = Report("levy_equivariance")
    rep.info.update(variant=variant, coord=coord, reps=reps)
    rep.add("ks_recentred", ks_two_sample(a[:, 0], b[:, 0]), tol)
    return rep


# ---------------------------------------------------------------------------
# non-vanishing transforms
# ---------------------------------------------------------------------------


def _tag_cf(tag: str):
    if tag == "exp":
        return lambda t: 1.0 / (1.0 - 1j * t)
    if tag.startswith("gamma:"):
        k = float(tag.split(":", 1)[1])
        return lambda t: (1.0 - 1j * t) ** (-k)
    if tag == "normal":
        return lambda t: np.exp(-np.asarray(t) ** 2 / 2)
    if tag == "fejer":
        return lambda t: np.clip(1.0 - np.abs(t), 0.0, None)
    raise ValueError(f"unknown law tag {tag!r}")


def cf_nonvanishing_check(law: Union[str, GridMeasure, AtomicMeasure, CharFn], band: float,
                          points: int = 1601, zero_tol: float = 1e-12) -> Report:
    """Smallest |phi| over [-band, band], where it occurs, and the share of
    frequencies where phi vanishes."""
    if not band > 0 or not math.isfinite(band):
        raise ValueError("band must be finite and positive")
    t = np.linspace(-band, band, points)
    if isinstance(law, str):
        v = np.asarray(_tag_cf(law)(t), dtype=complex)
        name = law
    elif isinstance(law, CharFn):
        keep = np.abs(law.freqs) <= band
        t, v = law.freqs[keep], law.values[keep]
        name = "charfn"
    else:
        v = dist.to_charfn(law, dist.symmetric_grid(band, 2 * band / (points - 1))).values
        t = dist.symmetric_grid(band, 2 * band / (points - 1))
        name = type(law).__name__
    mod = np.abs(v)
    i = int(np.argmin(mod))
    zero = mod <= zero_tol
    rep = Report("cf_nonvanishing")
    rep.info.update(law=name, band=band, argmin=float(abs(t[i])),
                    zero_fraction=float(zero.mean()),
                    first_zero=float(np.abs(t[zero]).min()) if zero.any() else None)
    rep.add("min_modulus", float(mod[i]), zero_tol, op="gt")
    return rep
