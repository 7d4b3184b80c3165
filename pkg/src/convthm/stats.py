"""Seeded parallel sampling and empirical diagnostics."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import stats as sps

from .dist import CharFn, _half_cf, _lattice_sum

# frequency lattice used by the independence statistic
INDEPENDENCE_FREQS = np.linspace(-2.0, 2.0, 9)


@dataclass(frozen=True)
class RngSpec:
    """Master seed plus number of streams.

    Child streams come from :class:`numpy.random.SeedSequence` with spawn
    key ``key + (i,)``, so streams are independent and a sub-scenario can
    take its own family through :meth:`child`.
    """

    master_seed: int
    stream_count: int = 1
    key: tuple = ()

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < 2 ** 64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if int(self.stream_count) < 1:
            raise ValueError("stream_count must be >= 1")

    def child(self, *key: int) -> "RngSpec":
        return RngSpec(self.master_seed, self.stream_count, self.key + tuple(key))

    def generator(self, i: int) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.master_seed), spawn_key=self.key + (i,))
        return np.random.Generator(np.random.PCG64(ss))

    def generators(self) -> list[np.random.Generator]:
        return [self.generator(i) for i in range(self.stream_count)]

    def split(self, reps: int) -> list[int]:
        """Replication counts per stream (earlier streams take the remainder)."""
        base, extra = divmod(int(reps), self.stream_count)
        return [base + (i < extra) for i in range(self.stream_count)]


def run_streams(rng: RngSpec, reps: int, fn: Callable[[np.random.Generator, int], np.ndarray],
                workers: int = 1) -> np.ndarray:
    """Call ``fn(gen, count)`` once per stream and stack results in stream order.

    Results do not depend on ``workers``.
    """
    counts = rng.split(reps)
    jobs = [(rng.generator(i), c) for i, c in enumerate(counts) if c > 0]
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(lambda j: fn(*j), jobs))
    else:
        parts = [fn(g, c) for g, c in jobs]
    return np.concatenate(parts, axis=0)


@dataclass(frozen=True, eq=False)
class SampleSet:
    draws: np.ndarray
    seed_info: dict = field(default_factory=dict)

    def __post_init__(self):
        d = np.asarray(self.draws, dtype=float)
        if d.ndim == 1:
            d = d[:, None]
        if d.ndim != 2 or d.shape[0] < 1:
            raise ValueError("draws must be a non-empty (N, dim) array")
        if not np.all(np.isfinite(d)):
            raise ValueError("draws must be finite")
        d.setflags(write=False)
        object.__setattr__(self, "draws", d)

    @property
    def dim(self) -> int:
        return self.draws.shape[1]

    def __len__(self):
        return self.draws.shape[0]

    def column(self, i: int = 0) -> np.ndarray:
        return self.draws[:, i]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{i}" for i in range(self.dim)])
            w.writerows(self.draws.tolist())


def _values(s) -> np.ndarray:
    if isinstance(s, SampleSet):
        if s.dim != 1:
            raise ValueError("expected a one-dimensional sample")
        return s.column(0)
    v = np.asarray(s, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("sample is empty")
    return v


def empirical_cdf(s, grid) -> np.ndarray:
    x = np.sort(_values(s))
    return np.searchsorted(x, np.asarray(grid, float), side="right") / x.size


def empirical_charfn(s, freqs) -> CharFn:
    x = _values(s)
    f = np.asarray(freqs, dtype=float)
    v = _half_cf(f, lambda t: _lattice_sum(x, np.full(x.size, 1.0 / x.size), t))
    return CharFn(f, v)


def ks_two_sample(s1, s2) -> float:
    a = np.sort(_values(s1))
    b = np.sort(_values(s2))
    pooled = np.concatenate([a, b])
    fa = np.searchsorted(a, pooled, side="right") / a.size
    fb = np.searchsorted(b, pooled, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def ks_one_sample(s, cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    x = np.sort(_values(s))
    F = cdf(x)
    n = x.size
    hi = np.arange(1, n + 1) / n - F
    lo = F - np.arange(n) / n
    return float(max(hi.max(), lo.max(), 0.0))


def gaussian_check(s, mean: float, var: float) -> float:
    if not var > 0:
        raise ValueError("var must be positive")
    return ks_one_sample(s, sps.norm(mean, math.sqrt(var)).cdf)


def _cis(x: np.ndarray, freqs: np.ndarray) -> np.ndarray:
    return np.exp(1j * np.outer(x, freqs))


def independence_check(pairs, freqs=INDEPENDENCE_FREQS) -> float:
    """sup over the frequency lattice of |phi_joint - phi_1 * phi_2|."""
    d = pairs.draws if isinstance(pairs, SampleSet) else np.asarray(pairs, dtype=float)
    if d.ndim != 2 or d.shape[1] != 2 or d.shape[0] == 0:
        raise ValueError("expected a non-empty (N, 2) array of pairs")
    f = np.asarray(freqs, dtype=float)
    n = d.shape[0]
    joint = np.zeros((f.size, f.size), dtype=complex)
    m1 = np.zeros(f.size, dtype=complex)
    m2 = np.zeros(f.size, dtype=complex)
    for s in range(0, n, 200_000):
        A = _cis(d[s:s + 200_000, 0], f)
        B = _cis(d[s:s + 200_000, 1], f)
        joint += A.T @ B
        m1 += A.sum(axis=0)
        m2 += B.sum(axis=0)
    gap = joint / n - np.outer(m1 / n, m2 / n)
    return float(np.abs(gap).max())


def mc_standard_error(values) -> float:
    v = np.asarray(values, dtype=float).ravel()
    if v.size < 2:
        raise ValueError("need at least two values")
    return float(v.std(ddof=1) / math.sqrt(v.size))


def weighted_mean_se(values, weights) -> tuple[float, float]:
    """Mean of ``values * weights`` over replications and its standard error."""
    z = np.asarray(values, float) * np.asarray(weights, float)
    return float(z.mean()), mc_standard_error(z)


def effective_sample_size(weights) -> float:
    w = np.asarray(weights, dtype=float)
    s = w.sum()
    return float(s * s / np.dot(w, w)) if s > 0 else 0.0


def ks_noise(n1: int, n2: Optional[int] = None, alpha: float = 0.01) -> float:
    """Asymptotic (1 - alpha) quantile of the KS statistic."""
    c = math.sqrt(-0.5 * math.log(alpha / 2))
    m = n1 if n2 is None else n1 * n2 / (n1 + n2)
    return c / math.sqrt(m)
