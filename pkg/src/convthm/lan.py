"""Locally asymptotically normal models and checks of the quadratic
log-likelihood expansion, the central-sequence CLT, and reweighting
between local alternatives."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy import stats as sps

from .report import Report
from .stats import (INDEPENDENCE_FREQS, RngSpec, SampleSet, effective_sample_size,
                    gaussian_check, mc_standard_error, run_streams)

# largest number of floats generated at once per stream
_BLOCK = 2_000_000

Admissible = Union[tuple[float, float], frozenset]


@dataclass(frozen=True)
class LocalModel:
    """Base class for i.i.d. models reparametrized as ``theta0 + theta/sqrt(n)``.

    ``admissible`` is either a closed interval ``(lo, hi)`` or a finite set
    of local parameters.
    """

    theta0: float = 0.0
    admissible: Admissible = (-10.0, 10.0)

    name = "local"

    @property
    def sigma(self) -> float:
        raise NotImplementedError

    def check_theta(self, theta: float) -> None:
        a = self.admissible
        ok = (theta in a) if isinstance(a, frozenset) else (a[0] <= theta <= a[1])
        if not ok:
            raise ValueError(f"theta={theta} outside the admissible set {a}")

    def sample(self, n: int, theta: float, reps: int, gen: np.random.Generator) -> np.ndarray:
        """``reps`` data sets of size ``n`` under the local parameter, shape (reps, n)."""
        raise NotImplementedError

    def loglik_ratio(self, n: int, theta: float, data: np.ndarray) -> np.ndarray:
        """log dP_{n,theta}/dP_{n,0} for each row of ``data``."""
        raise NotImplementedError

    def central_seq(self, n: int, data: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def efficient_estimate(self, data: np.ndarray) -> np.ndarray:
        """An estimator of the global parameter attaining the efficient limit."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        a = self.admissible
        return {"model": self.name, "theta0": self.theta0,
                "admissible": sorted(a) if isinstance(a, frozenset) else list(a)}


@dataclass(frozen=True)
class GaussianLocationModel(LocalModel):
    """N(theta0 + theta/sqrt(n), 1) observations."""

    name = "gaussian_location"

    @property
    def sigma(self) -> float:
        return 1.0

    def sample(self, n, theta, reps, gen):
        self.check_theta(theta)
        return self.theta0 + theta / math.sqrt(n) + gen.standard_normal((reps, n))

    def loglik_ratio(self, n, theta, data):
        if theta == 0:
            return np.zeros(data.shape[:-1])
        d = theta / math.sqrt(n)
        y = data - self.theta0
        # log phi(y - d) - log phi(y), summed over observations
        return (d * y - d * d / 2).sum(axis=-1)

    def central_seq(self, n, data):
        return (data - self.theta0).sum(axis=-1) / math.sqrt(n)

    def efficient_estimate(self, data):
        return data.mean(axis=-1)


@dataclass(frozen=True)
class GammaScaleModel(LocalModel):
    """Gamma(alpha) observations with scale exp(theta0 + theta/sqrt(n))."""

    alpha: float = 2.0
    name = "gamma_scale"

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")

    @property
    def sigma(self) -> float:
        return math.sqrt(self.alpha)

    def sample(self, n, theta, reps, gen):
        self.check_theta(theta)
        s = math.exp(self.theta0 + theta / math.sqrt(n))
        return gen.gamma(self.alpha, s, size=(reps, n))

    def loglik_ratio(self, n, theta, data):
        if theta == 0:
            return np.zeros(data.shape[:-1])
        d = theta / math.sqrt(n)
        # log f(x; s) = (alpha-1) log x - x/s - alpha log s - log Gamma(alpha)
        rate_diff = math.exp(-self.theta0 - d) - math.exp(-self.theta0)
        return -rate_diff * data.sum(axis=-1) - n * self.alpha * d

    def central_seq(self, n, data):
        return (data * math.exp(-self.theta0) - self.alpha).sum(axis=-1) / math.sqrt(n)

    def efficient_estimate(self, data):
        return np.log(data.mean(axis=-1) / self.alpha)

    def to_dict(self):
        return {**super().to_dict(), "alpha": self.alpha}


MODELS = {"gaussian_location": GaussianLocationModel, "gamma_scale": GammaScaleModel}


def make_model(name: str, theta0: float = 0.0, alpha: float = 2.0,
               admissible: Optional[Admissible] = None) -> LocalModel:
    kw = {"theta0": theta0}
    if admissible is not None:
        kw["admissible"] = admissible
    if name == "gamma_scale":
        kw["alpha"] = alpha
    try:
        return MODELS[name](**kw)
    except KeyError:
        raise ValueError(f"unknown model {name!r}") from None


def simulate(model: LocalModel, n: int, theta: float, reps: int, rng: RngSpec,
             stat: Callable[[np.ndarray, np.random.Generator], np.ndarray]) -> np.ndarray:
    """Per-replication statistics of data sets drawn under ``theta``.

    ``stat(data, gen)`` maps a (k, n) block of data to k values (or k rows);
    ``gen`` is the stream's generator, available for auxiliary randomness.
    """
    block = max(1, _BLOCK // max(1, n))

    def fn(gen, count):
        out = []
        for s in range(0, count, block):
            k = min(block, count - s)
            out.append(np.asarray(stat(model.sample(n, theta, k, gen), gen)))
        return np.concatenate(out, axis=0)

    return run_streams(rng, reps, fn)


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------


def lan_remainder(model: LocalModel, n: int, theta: float, reps: int, rng: RngSpec,
                  level: float = 0.1) -> Report:
    """Remainder of the quadratic expansion under P_{n,0}.

    ``info`` holds the fraction of replications with ``|R| > level``, the
    largest ``|R|`` and the count of non-finite values (which are dropped).
    The finite remainders are in ``artifacts["remainder"]``.
    """
    model.check_theta(theta)
    s2 = model.sigma ** 2

    def stat(data, gen):
        return model.loglik_ratio(n, theta, data) - (theta * model.central_seq(n, data)
                                                     - theta * theta * s2 / 2)

    r = simulate(model, n, 0.0, reps, rng, stat)
    finite = np.isfinite(r)
    r = r[finite]
    rep = Report("lan_remainder")
    rep.info.update(model=model.to_dict(), n=n, theta=theta, reps=reps,
                    nonfinite=int((~finite).sum()),
                    frac_large=float(np.mean(np.abs(r) > level)) if r.size else float("nan"),
                    max_abs=float(np.max(np.abs(r))) if r.size else float("nan"))
    if r.size:
        rep.artifacts["remainder"] = SampleSet(r, {"seed": rng.master_seed, "key": rng.key})
    return rep


def likelihood_ratio_mean_check(model: LocalModel, n: int, theta: float, reps: int,
                                rng: RngSpec) -> Report:
    """E_0 exp(loglik_ratio) should be 1."""
    w = np.exp(simulate(model, n, 0.0, reps, rng,
                        lambda d, g: model.loglik_ratio(n, theta, d)))
    rep = Report("likelihood_ratio_mean")
    se = mc_standard_error(w)
    rep.add("mean_lr_minus_1", float(w.mean() - 1.0), 3.0, op="se", standard_error=se)
    return rep


def central_clt_check(model: LocalModel, n: int, theta: float, reps: int, rng: RngSpec,
                      tol: Optional[float] = None) -> Report:
    """KS distance of the law of X_n under theta to N(theta sigma^2, sigma^2)."""
    x = simulate(model, n, theta, reps, rng, lambda d, g: model.central_seq(n, d))
    s2 = model.sigma ** 2
    ks = gaussian_check(x, theta * s2, s2)
    rep = Report("central_clt")
    rep.info.update(n=n, theta=theta, reps=reps)
    if tol is None:
        rep.info["ks"] = ks
    else:
        rep.add("ks_to_limit", ks, tol)
    rep.artifacts["central_seq"] = SampleSet(x)
    return rep


# bounded statistics of a data set ----------------------------------------------


def _clip(v, bound):
    return np.clip(v, -bound, bound)


STATISTICS: dict[str, Callable] = {
    "indicator_central_le_1": lambda m, n, d, B: (m.central_seq(n, d) <= 1.0).astype(float),
    "clipped_central": lambda m, n, d, B: _clip(m.central_seq(n, d), B),
    "cos_central": lambda m, n, d, B: np.cos(m.central_seq(n, d)),
}


def change_of_measure_check(model: LocalModel, statistic: Union[str, Callable], n: int,
                            theta: float, reps: int, rng: RngSpec, clip: float = 1e6,
                            collapse: float = 0.01) -> Report:
    """Compare E_theta g with E_0[g exp(loglik_ratio)] from independent streams.

    Passes when the difference is within three combined standard errors and
    the effective sample size of the weights is at least ``collapse * reps``.
    """
    g = STATISTICS[statistic] if isinstance(statistic, str) else statistic
    name = statistic if isinstance(statistic, str) else getattr(statistic, "__name__", "g")
    direct = simulate(model, n, theta, reps, rng.child(0),
                      lambda d, gen: _clip(g(model, n, d, clip), clip))
    both = simulate(model, n, 0.0, reps, rng.child(1),
                    lambda d, gen: np.stack([_clip(g(model, n, d, clip), clip),
                                             model.loglik_ratio(n, theta, d)], axis=1))
    w = np.exp(both[:, 1])
    rew = both[:, 0] * w
    se = math.hypot(mc_standard_error(direct), mc_standard_error(rew))
    diff = float(direct.mean() - rew.mean())
    ess = effective_sample_size(w)
    rep = Report("change_of_measure")
    rep.info.update(statistic=name, n=n, theta=theta, reps=reps,
                    direct_mean=float(direct.mean()), reweighted_mean=float(rew.mean()),
                    verdict="weight collapse" if ess < collapse * reps else "ok")
    rep.add("effective_sample_fraction", ess / reps, collapse, op="ge")
    rep.add("direct_minus_reweighted", diff, 3.0, op="se", standard_error=se)
    return rep


def cf_gap_2d(a: np.ndarray, b: np.ndarray, wb: Optional[np.ndarray] = None,
              freqs=INDEPENDENCE_FREQS) -> float:
    """sup over a square frequency lattice of the gap between the joint
    transforms of two (weighted) samples of pairs."""
    def joint(x, w):
        w = np.full(x.shape[0], 1.0 / x.shape[0]) if w is None else w / w.sum()
        out = np.zeros((freqs.size, freqs.size), dtype=complex)
        for s in range(0, x.shape[0], 200_000):
            A = np.exp(1j * np.outer(x[s:s + 200_000, 0], freqs))
            B = np.exp(1j * np.outer(x[s:s + 200_000, 1], freqs))
            out += (A * w[s:s + 200_000, None]).T @ B
        return out

    return float(np.abs(joint(a, None) - joint(b, wb)).max())


def third_lemma_limit_check(model: LocalModel, pair_statistic: Callable, n_list, theta: float,
                            reps: int, rng: RngSpec, tol: float = 0.03,
                            collapse: float = 0.01) -> Report:
    """Law of (X_n, S_n) under theta against the null law reweighted by the
    limiting density ``exp(theta x - theta^2 sigma^2 / 2)`` (self-normalized).

    ``pair_statistic(model, n, data)`` returns an (k, 2) array.  ``info``
    records the gap for every n; the check applies to the largest n.
    """
    s2 = model.sigma ** 2
    gaps = {}
    ess_min = float("inf")
    for j, n in enumerate(n_list):
        direct = simulate(model, n, theta, reps, rng.child(j, 0),
                          lambda d, g: pair_statistic(model, n, d))
        null = simulate(model, n, 0.0, reps, rng.child(j, 1),
                        lambda d, g: pair_statistic(model, n, d))
        w = np.exp(theta * null[:, 0] - theta * theta * s2 / 2)
        ess_min = min(ess_min, effective_sample_size(w))
        gaps[int(n)] = cf_gap_2d(direct, null, w)
    rep = Report("third_lemma_limit")
    rep.info.update(theta=theta, reps=reps, gaps=gaps,
                    verdict="weight collapse" if ess_min < collapse * reps else "ok")
    rep.add("effective_sample_fraction", ess_min / reps, collapse, op="ge")
    rep.add("cf_gap_largest_n", gaps[int(max(n_list))], tol)
    return rep


def central_pair(model, n, data):
    """(X_n, X_n): the central sequence paired with itself."""
    x = model.central_seq(n, data)
    return np.stack([x, x], axis=1)


def central_and_estimator(model, n, data):
    """(X_n, sqrt(n) * (efficient estimate - theta0))."""
    x = model.central_seq(n, data)
    return np.stack([x, math.sqrt(n) * (model.efficient_estimate(data) - model.theta0)], axis=1)
