"""Brownian motion with an integrated drift, observed n times on a time grid.

Each observed path is ``X(t) = B(t) + h(t)`` with ``h(t) = int_0^t theta``.
The drift is represented by its values at the midpoints of the M grid
cells, so that ``h`` on the grid, the squared L2 norm and the discrete
likelihood ratio are all exact for the simulated increments.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from . import dist
from .conv import ConvolutionReport, decompose, normal_grid
from .report import Report
from .stats import (RngSpec, SampleSet, ks_two_sample, mc_standard_error, run_streams)

DEFAULT_TIMES = (0.25, 0.5, 1.0)
_BLOCK = 4_000_000


@dataclass(frozen=True, eq=False)
class SignalParam:
    """Drift values on the M cells of the grid t_j = j/M."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size < 2 or not np.all(np.isfinite(v)):
            raise ValueError("need at least two finite drift values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_callable(cls, fn: Callable[[np.ndarray], np.ndarray], M: int) -> "SignalParam":
        u = (np.arange(M) + 0.5) / M
        return cls(np.broadcast_to(np.asarray(fn(u), dtype=float), (M,)))

    @classmethod
    def zero(cls, M: int) -> "SignalParam":
        return cls(np.zeros(M))

    @property
    def M(self) -> int:
        return self.values.size

    @property
    def h(self) -> np.ndarray:
        """Primitive on the grid, h(t_0) = 0."""
        return np.concatenate([[0.0], np.cumsum(self.values) / self.M])

    @property
    def norm2(self) -> float:
        return float(np.dot(self.values, self.values) / self.M)

    def __add__(self, other: "SignalParam") -> "SignalParam":
        return SignalParam(self.values + other.values)

    def __mul__(self, c: float) -> "SignalParam":
        return SignalParam(self.values * c)

    __rmul__ = __mul__


@dataclass(frozen=True)
class Polynomial:
    """Polynomial with exact rational coefficients, lowest degree first."""

    coeffs: tuple

    def __add__(self, other: "Polynomial") -> "Polynomial":
        k = max(len(self.coeffs), len(other.coeffs))
        a = self.coeffs + (Fraction(0),) * (k - len(self.coeffs))
        b = other.coeffs + (Fraction(0),) * (k - len(other.coeffs))
        return Polynomial(tuple(x + y for x, y in zip(a, b)))

    @classmethod
    def parse(cls, text: str) -> "Polynomial":
        """Parse sums of terms like ``2``, ``u``, ``3/2u``, ``-u^2``."""
        s = text.replace(" ", "").replace("*", "")
        if not s:
            raise ValueError("empty polynomial")
        terms = re.findall(r"[+-]?[^+-]+", s)
        if "".join(terms) != s:
            raise ValueError(f"cannot parse polynomial {text!r}")
        coeffs: dict[int, Fraction] = {}
        for term in terms:
            m = re.fullmatch(r"([+-]?)(\d+(?:\.\d+)?(?:/\d+)?)?(?:(u)(?:\^(\d+))?)?", term)
            if m is None or (m.group(2) is None and m.group(3) is None):
                raise ValueError(f"cannot parse term {term!r}")
            c = Fraction(m.group(2) or 1) * (-1 if m.group(1) == "-" else 1)
            k = 0 if m.group(3) is None else int(m.group(4) or 1)
            coeffs[k] = coeffs.get(k, Fraction(0)) + c
        return cls(tuple(coeffs.get(k, Fraction(0)) for k in range(max(coeffs) + 1)))

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        return sum(float(c) * u ** k for k, c in enumerate(self.coeffs))

    def to_signal(self, M: int) -> SignalParam:
        return SignalParam.from_callable(self, M)


@dataclass(frozen=True)
class PolyParamGen:
    """Random polynomials with non-negative rational coefficients.

    Generated polynomials have degree <= ``max_degree`` and denominators
    <= ``max_denominator``; membership (:meth:`contains`) only requires
    non-negative rational coefficients, so the set is closed under addition.
    """

    max_degree: int = 4
    max_denominator: int = 16
    max_numerator: int = 16

    def sample(self, gen: np.random.Generator) -> Polynomial:
        deg = int(gen.integers(0, self.max_degree + 1))
        coeffs = tuple(Fraction(int(gen.integers(0, self.max_numerator + 1)),
                                int(gen.integers(1, self.max_denominator + 1)))
                       for _ in range(deg + 1))
        return Polynomial(coeffs)

    @staticmethod
    def contains(p: Polynomial) -> bool:
        return all(isinstance(c, Fraction) and c >= 0 for c in p.coeffs)


@dataclass(frozen=True, eq=False)
class PathGrid:
    """Paths on t_j = j/M; ``values`` has shape (reps, n, M + 1)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 2:
            v = v[None]
        if v.ndim != 3 or v.shape[2] < 3:
            raise ValueError("values must have shape (reps, n, M + 1) with M >= 2")
        if np.any(v[..., 0] != 0):
            raise ValueError("paths must start at 0")
        object.__setattr__(self, "values", v)

    @property
    def M(self) -> int:
        return self.values.shape[2] - 1

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.M + 1) / self.M

    def to_csv(self, path, rep: int = 0) -> None:
        cols = np.column_stack([self.times, self.values[rep].T])
        header = "t," + ",".join(f"path{i}" for i in range(self.n))
        np.savetxt(path, cols, delimiter=",", header=header, comments="")


def simulate_paths(n: int, theta: SignalParam, M: int, gen: np.random.Generator,
                   reps: int = 1) -> PathGrid:
    if M < 2 or n < 1:
        raise ValueError("need M >= 2 and n >= 1")
    if theta.M != M:
        raise ValueError("drift is on a different grid")
    inc = gen.standard_normal((reps, n, M)) / math.sqrt(M) + theta.values / M
    v = np.zeros((reps, n, M + 1))
    np.cumsum(inc, axis=2, out=v[:, :, 1:])
    return PathGrid(v)


def girsanov_logdensity(paths: PathGrid, theta: SignalParam) -> np.ndarray:
    """log dP_theta^n / dP_0^n per replication:
    sum_i sum_j theta_j (X_i(t_j) - X_i(t_{j-1})) - n ||theta||^2 / 2."""
    if theta.M != paths.M:
        raise ValueError("drift is on a different grid")
    if not np.any(theta.values):
        return np.zeros(paths.values.shape[0])
    dx = np.diff(paths.values, axis=2)
    return dx.sum(axis=1) @ theta.values - paths.n * theta.norm2 / 2


def mean_estimator(paths: PathGrid) -> np.ndarray:
    """Pointwise average of the n paths, shape (reps, M + 1)."""
    return paths.values.mean(axis=1)


def time_index(t: float, M: int) -> int:
    k = round(t * M)
    if abs(k - t * M) > 1e-9 or not 0 <= k <= M:
        raise ValueError(f"time {t} is not on the grid j/{M}")
    return int(k)


def simulate_stat(n: int, theta: SignalParam, reps: int, rng: RngSpec,
                  stat: Callable[[PathGrid, np.random.Generator], np.ndarray]) -> np.ndarray:
    """Per-replication statistics of simulated path sets, in blocks."""
    M = theta.M
    block = max(1, _BLOCK // (n * (M + 1)))

    def fn(gen, count):
        out = []
        for s in range(0, count, block):
            k = min(block, count - s)
            out.append(np.asarray(stat(simulate_paths(n, theta, M, gen, k), gen)))
        return np.concatenate(out, axis=0)

    return run_streams(rng, reps, fn)


# ---------------------------------------------------------------------------
# path estimators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PathEstimator:
    """Maps a PathGrid to estimated signal paths, shape (reps, M + 1)."""

    label: str
    fn: Callable[[PathGrid, np.random.Generator], np.ndarray]

    def __call__(self, paths: PathGrid, gen: np.random.Generator) -> np.ndarray:
        return self.fn(paths, gen)


def _brownian(gen, reps, M):
    b = np.zeros((reps, M + 1))
    np.cumsum(gen.standard_normal((reps, M)) / math.sqrt(M), axis=1, out=b[:, 1:])
    return b


def default_bias(t):
    return 0.3 * np.asarray(t)


def make_path_estimator(name: str, noise_c: float = 0.5,
                        bias: Callable = default_bias) -> PathEstimator:
    if name == "mean":
        return PathEstimator("mean", lambda p, g: mean_estimator(p))
    if name == "noisy_mean":
        return PathEstimator(
            f"noisy_mean(c={noise_c})",
            lambda p, g: mean_estimator(p)
            + noise_c * _brownian(g, p.values.shape[0], p.M) / math.sqrt(p.n))
    if name == "biased_mean":
        return PathEstimator("biased_mean",
                             lambda p, g: mean_estimator(p) + bias(p.times) / math.sqrt(p.n))
    if name == "clipped":
        return PathEstimator("clipped", lambda p, g: np.maximum(mean_estimator(p), 0.0))
    raise ValueError(f"unknown path estimator {name!r}")


PATH_ESTIMATORS = ("mean", "noisy_mean", "biased_mean", "clipped")


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------


def lr_mean_check(theta: SignalParam, n: int, reps: int, rng: RngSpec) -> Report:
    """E_0 exp(girsanov_logdensity) should be 1."""
    w = np.exp(simulate_stat(n, SignalParam.zero(theta.M), reps, rng,
                             lambda p, g: girsanov_logdensity(p, theta)))
    rep = Report("girsanov_lr_mean")
    rep.info.update(n=n, M=theta.M, reps=reps, mean=float(w.mean()))
    rep.add("mean_lr_minus_1", float(w.mean() - 1.0), 3.0, op="se",
            standard_error=mc_standard_error(w))
    return rep


def girsanov_change_of_measure(theta: SignalParam, n: int, reps: int, rng: RngSpec,
                               level: float = 0.5) -> Report:
    """P_theta(X_1(1) <= level) directly and by reweighting null paths."""
    def stat_direct(p, g):
        return (p.values[:, 0, -1] <= level).astype(float)

    def stat_null(p, g):
        return np.stack([(p.values[:, 0, -1] <= level).astype(float),
                         girsanov_logdensity(p, theta)], axis=1)

    direct = simulate_stat(n, theta, reps, rng.child(0), stat_direct)
    null = simulate_stat(n, SignalParam.zero(theta.M), reps, rng.child(1), stat_null)
    rew = null[:, 0] * np.exp(null[:, 1])
    se = math.hypot(mc_standard_error(direct), mc_standard_error(rew))
    rep = Report("girsanov_change_of_measure")
    from scipy.stats import norm
    rep.info.update(direct=float(direct.mean()), reweighted=float(rew.mean()),
                    closed_form=float(norm.cdf(level - theta.h[-1])))
    rep.add("direct_minus_reweighted", float(direct.mean() - rew.mean()), 3.0, op="se",
            standard_error=se)
    return rep


def _marginals(values: np.ndarray, idx: Sequence[int]) -> np.ndarray:
    return values[:, list(idx)]


def equivariance_check(T: PathEstimator, theta0: SignalParam, eta_list: Sequence[SignalParam],
                       n: int, reps: int, rng: RngSpec, times=DEFAULT_TIMES,
                       threshold: Optional[float] = None) -> Report:
    """KS per time between sqrt(n)(T - h(theta0)) - h(eta) under
    theta0 + eta/sqrt(n) and sqrt(n)(T - h(theta0)) under theta0."""
    M = theta0.M
    idx = [time_index(t, M) for t in times]
    h0 = theta0.h[idx]
    rn = math.sqrt(n)

    def stat(p, g):
        return rn * (_marginals(T(p, g), idx) - h0)

    base = simulate_stat(n, theta0, reps, rng.child(0), stat)
    thr = 0.03 * math.sqrt(1e4 / reps) if threshold is None else threshold
    rep = Report("equivariance")
    rep.info.update(estimator=T.label, n=n, M=M, reps=reps, times=list(times))
    for j, eta in enumerate(eta_list):
        shifted = simulate_stat(n, theta0 + eta * (1 / rn), reps, rng.child(j + 1), stat)
        shifted = shifted - eta.h[idx]
        for k, t in enumerate(times):
            rep.add(f"ks_eta{j}_t={t:g}", ks_two_sample(shifted[:, k], base[:, k]), thr)
    return rep


def sufficiency_identity_check(eta: SignalParam, n: int, reps: int, rng: RngSpec,
                               times=DEFAULT_TIMES, threshold: float = 0.02) -> Report:
    """Law of sqrt(n) S under eta/sqrt(n) (n paths) against the law of one
    path under eta, per time."""
    M = eta.M
    idx = [time_index(t, M) for t in times]
    rn = math.sqrt(n)
    left = simulate_stat(n, eta * (1 / rn), reps, rng.child(0),
                         lambda p, g: rn * _marginals(mean_estimator(p), idx))
    right = simulate_stat(1, eta, reps, rng.child(1),
                          lambda p, g: _marginals(p.values[:, 0, :], idx))
    rep = Report("sufficiency_identity")
    rep.info.update(n=n, M=M, reps=reps, times=list(times),
                    mean_left=left.mean(axis=0), mean_right=right.mean(axis=0),
                    h_eta=eta.h[idx])
    for k, t in enumerate(times):
        rep.add(f"ks_t={t:g}", ks_two_sample(left[:, k], right[:, k]), threshold)
    return rep


def marginal_convolution_check(T: PathEstimator, n: int, M: int, reps: int, rng: RngSpec,
                               times=DEFAULT_TIMES, floor: float = 0.25,
                               band: Optional[float] = None, target: Optional[Callable] = None,
                               cf_tol: Optional[float] = None,
                               rt_tol: Optional[float] = None) -> Report:
    """Per time t, deconvolve the law of sqrt(n) S(t) (paired, from the same
    paths) out of the law of sqrt(n) T(t) at theta = 0.

    ``target(t)`` returns the transform of the expected nu_t.  Without an
    explicit ``band`` it is where the N(0, t) transform stays above
    ``floor``.
    """
    idx = [time_index(t, M) for t in times]
    rn = math.sqrt(n)

    def stat(p, g):
        return np.concatenate([rn * _marginals(T(p, g), idx),
                               rn * _marginals(mean_estimator(p), idx)], axis=1)

    d = simulate_stat(n, SignalParam.zero(M), reps, rng, stat)
    k = len(times)
    rep = Report("marginal_convolution")
    rep.info.update(estimator=T.label, n=n, M=M, reps=reps, times=list(times))
    reports = {}
    for j, t in enumerate(times):
        b = band if band is not None else math.sqrt(2 * math.log(1 / floor) / t)
        sub = decompose(d[:, j], d[:, k + j], normal_grid(t), b, floor, name=f"t={t:g}",
                        target=None if target is None else target(t), cf_tol=cf_tol,
                        rt_tol=rt_tol)
        reports[t] = sub
        rep.extend(sub, prefix=f"t={t:g}:")
    rep.artifacts["per_time"] = reports
    return rep


def brownian_covariance(n: int, M: int, reps: int, rng: RngSpec, s: float = 0.25,
                        t: float = 1.0) -> Report:
    """Empirical Cov(sqrt(n)(S - h)(s), sqrt(n)(S - h)(t)) should be min(s, t)."""
    idx = [time_index(s, M), time_index(t, M)]
    d = simulate_stat(n, SignalParam.zero(M), reps, rng,
                      lambda p, g: math.sqrt(n) * _marginals(mean_estimator(p), idx))
    c = float(np.cov(d.T)[0, 1])
    rep = Report("brownian_covariance")
    rep.info.update(cov=c, var=np.var(d, axis=0))
    rep.add("cov_rel_error", abs(c - min(s, t)) / min(s, t), 0.1)
    return rep
