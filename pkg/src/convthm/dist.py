"""Probability measures on the line, their characteristic functions, and
convolution arithmetic on uniform lattices.

Measures come in two flavours: :class:`GridMeasure` (masses on the lattice
``origin + step * j``) and :class:`AtomicMeasure` (finitely many atoms at
arbitrary locations).  Characteristic functions use the convention
``phi(t) = E exp(i t X)`` and are sampled on grids symmetric about zero.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import optimize, signal

MASS_TOL = 1e-9
CF_TOL = 1e-9
NEG_MASS_TOL = 1e-3
TRUNC_TOL = 1e-6

_CHUNK = 4_000_000


class TruncationWarning(UserWarning):
    """More than ``TRUNC_TOL`` of a measure's mass fell outside its grid."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


# ---------------------------------------------------------------------------
# measures
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GridMeasure:
    """Masses on the lattice ``origin + step * arange(len(masses))``.

    ``truncated`` records mass lost to the finite window when the measure
    was built; ``snap_error`` the largest displacement applied to atoms that
    were moved onto the lattice.  Neither affects equality of masses.
    """

    origin: float
    step: float
    masses: np.ndarray
    truncated: float = field(default=0.0)
    snap_error: float = field(default=0.0)

    def __post_init__(self):
        m = np.asarray(self.masses, dtype=float)
        if m.ndim != 1 or m.size == 0:
            raise ValueError("masses must be a non-empty 1-D array")
        if not (self.step > 0 and math.isfinite(self.step)):
            raise ValueError(f"step must be positive, got {self.step}")
        if not math.isfinite(self.origin):
            raise ValueError("origin must be finite")
        if np.any(~np.isfinite(m)) or np.any(m < 0):
            raise ValueError("masses must be finite and non-negative")
        total = float(m.sum())
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"total mass {total!r} is not within {MASS_TOL} of 1")
        object.__setattr__(self, "origin", float(self.origin))
        object.__setattr__(self, "step", float(self.step))
        object.__setattr__(self, "masses", _readonly(m))

    def __len__(self):
        return self.masses.size

    @property
    def x(self) -> np.ndarray:
        return self.origin + self.step * np.arange(self.masses.size)

    @property
    def total(self) -> float:
        return float(self.masses.sum())

    @property
    def mean(self) -> float:
        return float(np.dot(self.x, self.masses))

    @property
    def var(self) -> float:
        x = self.x
        mu = np.dot(x, self.masses)
        return float(np.dot((x - mu) ** 2, self.masses))

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.masses)

    def support(self, eps: float = 0.0) -> tuple[float, float]:
        """Smallest and largest lattice points carrying mass above ``eps``."""
        idx = np.flatnonzero(self.masses > eps)
        x = self.x
        return float(x[idx[0]]), float(x[idx[-1]])

    def trimmed(self, eps: float = 0.0) -> "GridMeasure":
        """Drop leading and trailing lattice cells with mass <= eps."""
        idx = np.flatnonzero(self.masses > eps)
        lo, hi = idx[0], idx[-1] + 1
        lost = float(self.masses[:lo].sum() + self.masses[hi:].sum())
        m = self.masses[lo:hi] / (1.0 - lost)
        return GridMeasure(self.origin + lo * self.step, self.step, m,
                           truncated=self.truncated + lost, snap_error=self.snap_error)

    def to_dict(self) -> dict:
        return {"kind": "grid", "origin": self.origin, "step": self.step,
                "masses": self.masses.tolist()}

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "mass"])
            for xi, mi in zip(self.x, self.masses):
                w.writerow([repr(float(xi)), repr(float(mi))])

    @classmethod
    def from_csv(cls, path) -> "GridMeasure":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        x, m = data[:, 0], data[:, 1]
        if x.size == 1:
            return cls(float(x[0]), 1.0, m)
        steps = np.diff(x)
        step = float(steps.mean())
        if np.max(np.abs(steps - step)) > 1e-9 * max(1.0, abs(step)) + 1e-12 * np.abs(x).max():
            raise ValueError("x column is not a uniform lattice")
        return cls(float(x[0]), step, m)


@dataclass(frozen=True, eq=False)
class AtomicMeasure:
    """Finitely many atoms, sorted by location."""

    locs: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.locs, dtype=float).ravel()
        p = np.asarray(self.probs, dtype=float).ravel()
        if x.size == 0 or x.shape != p.shape:
            raise ValueError("locs and probs must be non-empty and of equal length")
        if np.any(~np.isfinite(x)) or np.any(~(p > 0)):
            raise ValueError("atom locations must be finite and masses positive")
        order = np.argsort(x, kind="stable")
        x, p = x[order], p[order]
        if np.any(np.diff(x) == 0):
            raise ValueError("atom locations must be pairwise distinct")
        if abs(p.sum() - 1.0) > MASS_TOL:
            raise ValueError(f"total mass {p.sum()!r} is not within {MASS_TOL} of 1")
        object.__setattr__(self, "locs", _readonly(x))
        object.__setattr__(self, "probs", _readonly(p))

    @classmethod
    def point(cls, c: float = 0.0) -> "AtomicMeasure":
        return cls([c], [1.0])

    @classmethod
    def from_atoms(cls, atoms: Sequence[tuple[float, float]]) -> "AtomicMeasure":
        a = np.asarray(atoms, dtype=float).reshape(-1, 2)
        return cls(a[:, 0], a[:, 1])

    def __len__(self):
        return self.locs.size

    @property
    def mean(self) -> float:
        return float(np.dot(self.locs, self.probs))

    @property
    def var(self) -> float:
        mu = self.mean
        return float(np.dot((self.locs - mu) ** 2, self.probs))

    def to_dict(self) -> dict:
        return {"kind": "atomic",
                "atoms": [[float(a), float(b)] for a, b in zip(self.locs, self.probs)]}


Measure = Union[GridMeasure, AtomicMeasure]


@dataclass(frozen=True, eq=False)
class ProductGridMeasure:
    """A measure on a d-dimensional lattice (d <= 3)."""

    origin: np.ndarray
    step: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.masses, dtype=float)
        d = m.ndim
        if not 1 <= d <= 3:
            raise ValueError("only dimensions 1 to 3 are supported")
        o = np.asarray(self.origin, dtype=float).reshape(d)
        s = np.asarray(self.step, dtype=float).reshape(d)
        if np.any(s <= 0):
            raise ValueError("steps must be positive")
        if np.any(m < 0) or abs(m.sum() - 1.0) > MASS_TOL:
            raise ValueError("masses must be non-negative with total 1")
        object.__setattr__(self, "origin", _readonly(o))
        object.__setattr__(self, "step", _readonly(s))
        object.__setattr__(self, "masses", _readonly(m))

    @property
    def dim(self) -> int:
        return self.masses.ndim

    @classmethod
    def from_factors(cls, factors: Sequence[GridMeasure]) -> "ProductGridMeasure":
        m = factors[0].masses
        for f in factors[1:]:
            m = np.multiply.outer(m, f.masses)
        return cls([f.origin for f in factors], [f.step for f in factors], m)

    def marginal(self, i: int) -> GridMeasure:
        axes = tuple(k for k in range(self.dim) if k != i)
        m = self.masses.sum(axis=axes) if axes else self.masses
        return GridMeasure(self.origin[i], self.step[i], m)

    def coords(self) -> np.ndarray:
        """Lattice points, shape ``masses.shape + (d,)``."""
        axes = [self.origin[k] + self.step[k] * np.arange(self.masses.shape[k])
                for k in range(self.dim)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def shift(self, c) -> "ProductGridMeasure":
        return ProductGridMeasure(self.origin + np.asarray(c, float), self.step, self.masses)


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------


def _window(lo: float, hi: float, step: float, anchor: float = 0.0) -> np.ndarray:
    """Lattice points ``anchor + step*k`` covering [lo, hi]."""
    k0 = math.floor((lo - anchor) / step + 1e-9)
    k1 = math.ceil((hi - anchor) / step - 1e-9)
    return anchor + step * np.arange(k0, k1 + 1)


def discretize(dist, step: float, lo: Optional[float] = None, hi: Optional[float] = None,
               method: str = "cell", anchor: float = 0.0, tail: float = 1e-12) -> GridMeasure:
    """Put a scipy.stats frozen distribution on a lattice.

    ``method="cell"`` assigns each lattice point the probability of its
    cell ``[x - step/2, x + step/2)``; ``method="point"`` uses
    ``pdf(x) * step``, whose lattice transform matches the continuous one
    up to aliasing.  Mass outside the window is recorded in ``truncated``
    and the rest renormalized.
    """
    if lo is None:
        lo = float(dist.ppf(tail))
    if hi is None:
        hi = float(dist.ppf(1 - tail))
    x = _window(lo, hi, step, anchor)
    if method == "cell":
        edges = np.concatenate([x - step / 2, [x[-1] + step / 2]])
        c = dist.cdf(edges)
        sf = dist.sf(edges)
        # use whichever tail is more accurate
        m = np.where(edges[1:] <= dist.median(), np.diff(c), -np.diff(sf))
        outside = float(c[0] + sf[-1])
    elif method == "point":
        m = dist.pdf(x) * step
        outside = float(dist.cdf(x[0] - step / 2) + dist.sf(x[-1] + step / 2))
    else:
        raise ValueError(f"unknown method {method!r}")
    m = np.clip(m, 0.0, None)
    return _normalized(x[0], step, m, outside)


def from_density(pdf: Callable[[np.ndarray], np.ndarray], lo: float, hi: float, step: float,
                 anchor: float = 0.0, truncated: Optional[float] = None) -> GridMeasure:
    """Point-sample a density on a lattice and renormalize.

    If ``truncated`` (the true mass outside the window) is not supplied it is
    estimated as the renormalization defect.
    """
    x = _window(lo, hi, step, anchor)
    m = np.clip(np.asarray(pdf(x), dtype=float) * step, 0.0, None)
    if truncated is None:
        truncated = max(0.0, 1.0 - float(m.sum()))
    return _normalized(x[0], step, m, truncated)


def _normalized(origin, step, m, truncated) -> GridMeasure:
    total = m.sum()
    if truncated > TRUNC_TOL:
        warnings.warn(f"{truncated:.3g} of the mass lies outside the grid", TruncationWarning,
                      stacklevel=3)
    return GridMeasure(origin, step, m / total, truncated=truncated)


def point_mass(c: float, step: float = 1.0) -> GridMeasure:
    return GridMeasure(c, step, [1.0])


def from_samples(values, step: float, anchor: float = 0.0) -> GridMeasure:
    """Histogram of samples on the lattice ``anchor + step*k`` (nearest point)."""
    v = np.asarray(values, dtype=float).ravel()
    k = np.rint((v - anchor) / step).astype(np.int64)
    k0 = k.min()
    counts = np.bincount(k - k0).astype(float)
    return GridMeasure(anchor + k0 * step, step, counts / counts.sum())


def to_grid(m: Measure, step: float, anchor: float = 0.0) -> GridMeasure:
    """Snap an atomic measure to the nearest points of a lattice.

    Atoms that land on the same point are merged.  The largest displacement
    is stored in ``snap_error``.
    """
    if isinstance(m, GridMeasure):
        return m
    k = np.rint((m.locs - anchor) / step).astype(np.int64)
    snap = float(np.max(np.abs(m.locs - (anchor + k * step))))
    k0 = k.min()
    masses = np.bincount(k - k0, weights=m.probs)
    return GridMeasure(anchor + k0 * step, step, masses, snap_error=snap)


# ---------------------------------------------------------------------------
# shift / scale / regrid
# ---------------------------------------------------------------------------


def shift(m, c: float):
    if not math.isfinite(c):
        raise ValueError("shift must be finite")
    if isinstance(m, GridMeasure):
        return GridMeasure(m.origin + c, m.step, m.masses, truncated=m.truncated,
                           snap_error=m.snap_error)
    if isinstance(m, AtomicMeasure):
        return AtomicMeasure(m.locs + c, m.probs)
    raise TypeError(type(m))


def scale(m, c: float):
    """Law of ``c * X``.  Exact for both kinds: a lattice keeps its masses
    and its step is multiplied by ``|c|``."""
    if c == 0 or not math.isfinite(c):
        raise ValueError("scale factor must be finite and non-zero")
    if isinstance(m, GridMeasure):
        if c > 0:
            return GridMeasure(c * m.origin, c * m.step, m.masses, truncated=m.truncated)
        last = m.origin + m.step * (len(m) - 1)
        return GridMeasure(c * last, -c * m.step, m.masses[::-1], truncated=m.truncated)
    if isinstance(m, AtomicMeasure):
        return AtomicMeasure(c * m.locs, m.probs)
    raise TypeError(type(m))


def _same_step(a: float, b: float) -> bool:
    return abs(a - b) <= 1e-9 * max(a, b)


def _offset(a: GridMeasure, b: GridMeasure) -> Optional[int]:
    """Integer lattice offset of b's origin relative to a's, if aligned."""
    if not _same_step(a.step, b.step):
        return None
    r = (b.origin - a.origin) / a.step
    k = round(r)
    if abs(r - k) > 1e-6:
        return None
    return int(k)


def regrid(m: GridMeasure, step: float, anchor: float = 0.0) -> GridMeasure:
    """Move a grid measure onto the lattice ``anchor + step*k``.

    Each mass is split linearly between its two neighbouring target points,
    which preserves total mass and mean.  ``snap_error`` records the largest
    distance moved (zero when the lattices already coincide).
    """
    pos = (m.x - anchor) / step
    k = np.floor(pos + 1e-9).astype(np.int64)
    frac = np.clip(pos - k, 0.0, 1.0)
    frac[frac < 1e-9] = 0.0
    k0 = k.min()
    n = int(k.max() - k0 + 2)
    out = np.bincount(k - k0, weights=m.masses * (1 - frac), minlength=n)
    out += np.bincount(k - k0 + 1, weights=m.masses * frac, minlength=n)
    moved = float(np.max(np.minimum(frac, 1 - frac)) * step)
    g = GridMeasure(anchor + k0 * step, step, out / out.sum(), truncated=m.truncated,
                    snap_error=max(m.snap_error, moved))
    return g.trimmed(0.0) if g.masses[-1] == 0 or g.masses[0] == 0 else g


def aligned(a: GridMeasure, b: GridMeasure) -> bool:
    return _offset(a, b) is not None


def common_lattice(a: Measure, b: Measure) -> tuple[float, float, np.ndarray, np.ndarray]:
    """Express two measures on one lattice: returns (origin, step, ma, mb)."""
    if isinstance(a, AtomicMeasure) and isinstance(b, AtomicMeasure):
        locs = np.union1d(a.locs, b.locs)
        ma = np.zeros(locs.size)
        mb = np.zeros(locs.size)
        ma[np.searchsorted(locs, a.locs)] = a.probs
        mb[np.searchsorted(locs, b.locs)] = b.probs
        return float("nan"), float("nan"), ma, mb
    if isinstance(a, AtomicMeasure):
        o, s, mb, ma = common_lattice(b, a)
        return o, s, ma, mb
    if isinstance(b, AtomicMeasure):
        b = to_grid(b, a.step, a.origin)
    k = _offset(a, b)
    if k is None:
        b = regrid(b, a.step, a.origin)
        k = _offset(a, b)
    lo = min(0, k)
    hi = max(len(a), k + len(b))
    ma = np.zeros(hi - lo)
    mb = np.zeros(hi - lo)
    ma[-lo:-lo + len(a)] = a.masses
    mb[k - lo:k - lo + len(b)] = b.masses
    return a.origin + lo * a.step, a.step, ma, mb


# ---------------------------------------------------------------------------
# distances
# ---------------------------------------------------------------------------


def distance_tv(a: Measure, b: Measure) -> float:
    """Total variation, half the l1 distance of the mass vectors."""
    _, _, ma, mb = common_lattice(a, b)
    return float(min(1.0, 0.5 * np.abs(ma - mb).sum()))


def distance_ks(a: Measure, b: Measure) -> float:
    """Sup distance of the distribution functions over lattice points."""
    _, _, ma, mb = common_lattice(a, b)
    return float(min(1.0, np.max(np.abs(np.cumsum(ma) - np.cumsum(mb)))))


# ---------------------------------------------------------------------------
# convolution
# ---------------------------------------------------------------------------


def _fftconv(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = signal.convolve(a, b, method="auto")
    return np.clip(out, 0.0, None)


def convolve(a: Measure, b: Measure, regrid_ok: bool = False):
    """Law of X + Y for independent X ~ a, Y ~ b.

    Grid measures must share their step unless ``regrid_ok`` is set, in
    which case the coarser one is regridded onto the finer step.  Atoms are
    snapped onto the lattice of the other factor relative to the heaviest
    atom (exact when only one atom is present); the displacement is kept in
    ``snap_error``.  Two atomic measures convolve exactly.
    """
    if isinstance(a, AtomicMeasure) and isinstance(b, AtomicMeasure):
        locs = np.add.outer(a.locs, b.locs).ravel()
        probs = np.multiply.outer(a.probs, b.probs).ravel()
        u, inv = np.unique(locs, return_inverse=True)
        return AtomicMeasure(u, np.bincount(inv, weights=probs))
    if isinstance(a, AtomicMeasure):
        a, b = b, a
    if isinstance(b, AtomicMeasure):
        ref = int(np.argmax(b.probs))
        xr = b.locs[ref]
        if len(b) == 1:
            return shift(a, xr)
        k = np.rint((b.locs - xr) / a.step).astype(np.int64)
        snap = float(np.max(np.abs(b.locs - xr - k * a.step)))
        k0 = k.min()
        comb = np.bincount(k - k0, weights=b.probs)
        m = _fftconv(a.masses, comb)
        return GridMeasure(a.origin + xr + k0 * a.step, a.step, m / m.sum(),
                           truncated=a.truncated, snap_error=max(snap, a.snap_error))
    if not _same_step(a.step, b.step):
        if not regrid_ok:
            raise ValueError(f"incompatible lattice steps {a.step} and {b.step}")
        if a.step < b.step:
            b = regrid(b, a.step, b.origin)
        else:
            a = regrid(a, b.step, a.origin)
    m = _fftconv(a.masses, b.masses)
    return GridMeasure(a.origin + b.origin, a.step, m / m.sum(),
                       truncated=a.truncated + b.truncated,
                       snap_error=max(a.snap_error, b.snap_error))


# ---------------------------------------------------------------------------
# characteristic functions
# ---------------------------------------------------------------------------


def symmetric_grid(band: float, dt: float) -> np.ndarray:
    """Frequencies ``dt * k`` for ``|dt * k| <= band``; exactly symmetric."""
    k = int(math.floor(band / dt + 1e-9))
    return dt * np.arange(-k, k + 1)


def dft_freqs(step: float, size: int) -> np.ndarray:
    """Frequencies on which a lattice of ``size`` points with spacing ``step``
    is inverted exactly by the trapezoid rule over ``[-pi/step, pi/step]``."""
    K = size + (size % 2)
    return (2 * math.pi / (step * K)) * np.arange(-K // 2, K // 2 + 1)


def _check_freqs(freqs: np.ndarray) -> int:
    f = np.asarray(freqs, dtype=float)
    if f.ndim != 1 or f.size % 2 != 1:
        raise ValueError("frequency grid must be 1-D with odd length")
    mid = f.size // 2
    if f[mid] != 0.0:
        raise ValueError("frequency grid must contain 0 at its centre")
    if np.any(np.diff(f) <= 0):
        raise ValueError("frequency grid must be increasing")
    scale_ = max(1.0, float(np.abs(f).max()))
    if np.max(np.abs(f + f[::-1])) > 1e-12 * scale_:
        raise ValueError("frequency grid must be symmetric about 0")
    return mid


@dataclass(frozen=True, eq=False)
class CharFn:
    """Characteristic function values on a symmetric frequency grid.

    ``defined`` marks frequencies where the value is meaningful (used by
    deconvolution); undefined entries hold NaN.  ``phi(0) = 1`` and
    Hermitian symmetry are enforced exactly on construction.  The bound
    ``|phi| <= 1 + CF_TOL`` is enforced when ``strict`` is set and is
    otherwise available through :attr:`modulus_excess`.
    """

    freqs: np.ndarray
    values: np.ndarray
    defined: Optional[np.ndarray] = None
    strict: bool = True

    def __post_init__(self):
        f = np.asarray(self.freqs, dtype=float)
        mid = _check_freqs(f)
        v = np.asarray(self.values, dtype=complex).copy()
        if v.shape != f.shape:
            raise ValueError("values must match freqs")
        d = np.ones(f.size, bool) if self.defined is None else np.asarray(self.defined, bool)
        if not np.array_equal(d, d[::-1]):
            raise ValueError("defined mask must be symmetric")
        if not d[mid]:
            raise ValueError("phi(0) must be defined")
        if abs(v[mid] - 1.0) > 1e-6:
            raise ValueError(f"phi(0) = {v[mid]} is not 1")
        herm = v[d] - np.conj(v[d][::-1])
        if herm.size and np.max(np.abs(herm)) > 1e-7 * max(1.0, np.nanmax(np.abs(v[d]))):
            raise ValueError("values are not Hermitian symmetric")
        v = np.where(d, 0.5 * (v + np.conj(v[::-1])), np.nan + 0j)
        v[mid] = 1.0
        if self.strict and np.nanmax(np.abs(v)) > 1 + CF_TOL:
            raise ValueError("|phi| exceeds 1")
        object.__setattr__(self, "freqs", _readonly(f))
        object.__setattr__(self, "values", _readonly(v))
        object.__setattr__(self, "defined", _readonly(d))

    @property
    def modulus_excess(self) -> float:
        """max(|phi|) - 1 over defined frequencies."""
        return float(np.nanmax(np.abs(self.values)) - 1.0)

    def restrict(self, band: float) -> "CharFn":
        keep = np.abs(self.freqs) <= band + 1e-12
        return CharFn(self.freqs[keep], self.values[keep], self.defined[keep], strict=False)

    def sup_error(self, other, band: Optional[float] = None) -> float:
        """Sup over defined frequencies (within ``band``) of ``|phi - other|``.

        ``other`` is a callable of the frequency array or an array.
        """
        ref = other(self.freqs) if callable(other) else np.asarray(other)
        mask = self.defined.copy()
        if band is not None:
            mask &= np.abs(self.freqs) <= band + 1e-12
        return float(np.max(np.abs(self.values[mask] - ref[mask])))

    def variance(self, t_max: float = 1.0) -> float:
        """Variance from the curvature of ``log|phi|`` near 0.

        Fits ``log|phi(t)| = -v t^2 / 2 + c t^4`` by least squares on the
        defined frequencies with ``0 < t <= t_max``.
        """
        f = self.freqs
        sel = self.defined & (f > 0) & (f <= t_max + 1e-12)
        t = f[sel]
        y = np.log(np.abs(self.values[sel]))
        if t.size < 2:
            raise ValueError("need at least two positive frequencies below t_max")
        A = np.column_stack([-t ** 2 / 2, t ** 4])
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        return float(coef[0])

    def to_dict(self) -> dict:
        return {"freqs": self.freqs.tolist(),
                "re": [None if not d else float(v.real) for v, d in zip(self.values, self.defined)],
                "im": [None if not d else float(v.imag) for v, d in zip(self.values, self.defined)]}

    @classmethod
    def from_dict(cls, d: dict) -> "CharFn":
        re = np.array([np.nan if r is None else r for r in d["re"]], float)
        im = np.array([np.nan if r is None else r for r in d["im"]], float)
        defined = ~np.isnan(re)
        return cls(d["freqs"], np.where(defined, re + 1j * im, np.nan), defined, strict=False)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "re", "im"])
            for t, v, d in zip(self.freqs, self.values, self.defined):
                w.writerow([repr(float(t)), repr(float(v.real)) if d else "",
                            repr(float(v.imag)) if d else ""])


def _lattice_sum(x: np.ndarray, w: np.ndarray, t: np.ndarray) -> np.ndarray:
    """sum_j w_j exp(i t x_j) for each t, chunked over t."""
    out = np.empty(t.size, dtype=complex)
    rows = max(1, _CHUNK // max(1, x.size))
    for s in range(0, t.size, rows):
        out[s:s + rows] = np.exp(1j * np.outer(t[s:s + rows], x)) @ w
    return out


def _half_cf(freqs, fn) -> np.ndarray:
    """Evaluate on t >= 0 and mirror by conjugation."""
    f = np.asarray(freqs, dtype=float)
    mid = _check_freqs(f)
    pos = fn(f[mid:])
    return np.concatenate([np.conj(pos[:0:-1]), pos])


def to_charfn(m, freqs) -> CharFn:
    """Characteristic function of a measure (or sample) on ``freqs``.

    Grid and atomic measures give the exact lattice sum.  A 1-D array is
    treated as an i.i.d. sample and gives the empirical transform.
    """
    f = np.asarray(freqs, dtype=float)
    if isinstance(m, GridMeasure):
        # factor the origin out so large offsets do not cost precision
        j = np.arange(len(m)) * m.step
        v = _half_cf(f, lambda t: np.exp(1j * t * m.origin) * _lattice_sum(j, m.masses, t))
        v = v / m.total
    elif isinstance(m, AtomicMeasure):
        v = _half_cf(f, lambda t: _lattice_sum(m.locs, m.probs, t)) / m.probs.sum()
    else:
        x = np.asarray(m, dtype=float).ravel()
        v = _half_cf(f, lambda t: _lattice_sum(x, np.full(x.size, 1.0 / x.size), t))
    return CharFn(f, v)


def analytic_charfn(fn: Callable[[np.ndarray], np.ndarray], freqs, strict: bool = True) -> CharFn:
    f = np.asarray(freqs, dtype=float)
    return CharFn(f, _half_cf(f, lambda t: np.asarray(fn(t), dtype=complex)), strict=strict)


def lattice_charfn_fft(m: GridMeasure, n_fft: int) -> tuple[np.ndarray, np.ndarray]:
    """The lattice transform at ``2*pi*k/(step*n_fft)`` for all k in one period.

    Masses are folded modulo ``n_fft`` first, which is exact at these
    frequencies, so ``n_fft`` may be smaller than the lattice.  Frequencies
    are returned sorted, in [-pi/step, pi/step).
    """
    w = m.masses
    if w.size > n_fft:
        w = np.bincount(np.arange(w.size) % n_fft, weights=w, minlength=n_fft)
    v = np.fft.ifft(w, n=n_fft) * n_fft
    k = np.fft.fftfreq(n_fft) * n_fft
    t = 2 * math.pi * k / (m.step * n_fft)
    v = v * np.exp(1j * t * m.origin)
    order = np.argsort(t)
    return t[order], v[order]


# ---------------------------------------------------------------------------
# inversion and deconvolution
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Reconstruction:
    """Result of inverting a characteristic function onto a lattice.

    ``raw`` holds the signed masses before clipping; ``measure`` the clipped
    and renormalized GridMeasure (None when nothing positive survived).
    """

    measure: Optional[GridMeasure]
    raw: np.ndarray
    origin: float
    step: float
    clipped_mass: float
    total_before: float
    valid: bool

    @property
    def verdict(self) -> str:
        return "valid probability" if self.valid else "not a probability"


def _central_run(defined: np.ndarray, mid: int) -> tuple[int, int]:
    """Indices [lo, hi] of the contiguous defined block around mid."""
    lo = mid
    while lo > 0 and defined[lo - 1]:
        lo -= 1
    hi = mid
    while hi < defined.size - 1 and defined[hi + 1]:
        hi += 1
    return lo, hi


def from_charfn(cf: CharFn, origin: float, step: float, size: int,
                neg_mass_tol: float = NEG_MASS_TOL) -> Reconstruction:
    """Invert ``cf`` onto the lattice ``origin + step*arange(size)``.

    Masses are ``step/(2 pi) * int phi(t) exp(-i t x) dt`` by the trapezoid
    rule over the contiguous defined block of frequencies around 0 that
    lies inside the Nyquist band ``|t| <= pi/step``.  Negative masses are
    clipped; the verdict is "not a probability" when the clipped mass or the
    total-mass defect exceeds ``neg_mass_tol``.
    """
    f = cf.freqs
    mid = f.size // 2
    inside = cf.defined & (np.abs(f) <= math.pi / step * (1 + 1e-9))
    lo, hi = _central_run(inside, mid)
    t = f[lo:hi + 1]
    v = cf.values[lo:hi + 1]
    w = np.gradient(t) if t.size > 1 else np.ones(1)
    if t.size > 1:
        w = np.empty(t.size)
        w[1:-1] = (t[2:] - t[:-2]) / 2
        w[0] = (t[1] - t[0]) / 2
        w[-1] = (t[-1] - t[-2]) / 2
    x = origin + step * np.arange(size)
    # sum over t of w v exp(-i t x), chunked over x
    raw = np.empty(size)
    rows = max(1, _CHUNK // max(1, t.size))
    wv = w * v
    for s in range(0, size, rows):
        raw[s:s + rows] = (np.exp(-1j * np.outer(x[s:s + rows], t)) @ wv).real
    raw *= step / (2 * math.pi)
    total_before = float(raw.sum())
    clipped_mass = float(-raw[raw < 0].sum())
    pos = np.clip(raw, 0.0, None)
    measure = None
    if pos.sum() > 0:
        measure = GridMeasure(origin, step, pos / pos.sum())
    valid = clipped_mass <= neg_mass_tol and abs(total_before - 1.0) <= neg_mass_tol
    return Reconstruction(measure, _readonly(raw), origin, step, clipped_mass, total_before, valid)


# sources of transforms for deconvolution -----------------------------------


def _cf_values(src, t: np.ndarray) -> np.ndarray:
    """Transform of a measure, sample, or callable at t (t symmetric grid)."""
    if callable(src):
        return _half_cf(t, lambda s: np.asarray(src(s), dtype=complex))
    return to_charfn(src, t).values


def _span(src) -> tuple[float, float]:
    if isinstance(src, GridMeasure):
        return src.support()
    if isinstance(src, AtomicMeasure):
        return float(src.locs[0]), float(src.locs[-1])
    if callable(src):
        raise ValueError("analytic transforms need an explicit support span")
    x = np.asarray(src, dtype=float)
    return float(x.min()), float(x.max())


def _moments(src) -> Optional[tuple[float, float]]:
    if isinstance(src, (GridMeasure, AtomicMeasure)):
        return src.mean, src.var
    if callable(src):
        return None
    x = np.asarray(src, dtype=float)
    return float(x.mean()), float(x.var())


def _nu_window(q, p, step: float, width: float = 10.0) -> tuple[float, float, Optional[float]]:
    """Window holding the support of nu up to negligible mass, plus its
    estimated mean (None when moments are unavailable).

    The supports of q and p bound it exactly; when both means and variances
    are known it is narrowed to ``mean +- width * sd`` of nu (at least three
    lattice cells each side), since ringing of a band-limited inverse grows
    with the window.
    """
    qlo, qhi = _span(q)
    plo, phi_ = _span(p)
    lo, hi = qlo - phi_, qhi - plo
    mq, mp = _moments(q), _moments(p)
    if mq is None or mp is None:
        return lo, hi, None
    mean = mq[0] - mp[0]
    sd = math.sqrt(max(mq[1] - mp[1], 0.0))
    half = max(width * sd, 3 * step)
    lo, hi = max(lo, mean - half), min(hi, mean + half)
    if lo >= hi:
        lo, hi = mean - half, mean + half
    return lo, hi, mean


@dataclass(frozen=True)
class Projection:
    """Probability vector on a lattice whose transform is closest, in least
    squares over the defined band, to a target transform."""

    measure: GridMeasure
    misfit: float


def project_charfn(cf: CharFn, lo: float, hi: float, step: float,
                   anchor: float = 0.0, max_points: int = 600,
                   weights: Optional[np.ndarray] = None) -> Projection:
    """Nearest probability measure on ``anchor + step*k`` within [lo, hi].

    Solves a non-negative least-squares problem matching real and imaginary
    parts on the defined non-negative frequencies, with the total mass held
    at 1 by a heavily weighted extra row.  ``weights`` (one per frequency of
    ``cf``, at most 1) scale the rows; ``misfit`` is the sup over those
    frequencies of the weighted transform error.
    """
    x = _window(lo, hi, step, anchor)
    if x.size > max_points:
        step = step * x.size / max_points
        x = _window(lo, hi, step, anchor)
    mid = cf.freqs.size // 2
    lo_i, hi_i = _central_run(cf.defined, mid)
    t = cf.freqs[mid:hi_i + 1]
    v = cf.values[mid:hi_i + 1]
    w = np.ones(t.size) if weights is None else np.asarray(weights, float)[mid:hi_i + 1]
    E = np.exp(1j * np.outer(t, x))
    Ew = E * w[:, None]
    big = 1e3
    A = np.vstack([Ew.real, Ew.imag, np.full((1, x.size), big)])
    b = np.concatenate([(w * v).real, (w * v).imag, [big]])
    m, _ = optimize.nnls(A, b, maxiter=50 * x.size)
    m = m / m.sum()
    misfit = float(np.max(w * np.abs(E @ m - v)))
    g = GridMeasure(x[0], step, m)
    return Projection(g.trimmed(0.0), misfit)


@dataclass(frozen=True)
class Deconvolution:
    """Output of :func:`deconvolve`.

    ``charfn`` is the quotient transform (undefined where |p_hat| < floor or
    outside the band); ``reconstruction`` the attempted lattice measure; the
    verdict is one of "valid probability", "not a probability",
    "insufficient band".
    """

    charfn: CharFn
    reconstruction: Optional[Reconstruction]
    verdict: str
    undefined_fraction: float
    defined_band: float
    projection: Optional[Projection] = None

    @property
    def measure(self) -> Optional[GridMeasure]:
        return None if self.reconstruction is None else self.reconstruction.measure

    @property
    def estimate(self) -> Optional[GridMeasure]:
        """Best probability-measure estimate of nu: the projection when one
        was computed, else the clipped reconstruction."""
        if self.projection is not None:
            return self.projection.measure
        return self.measure

    @property
    def valid(self) -> bool:
        return self.verdict == "valid probability"


def deconvolve(q, p, band: float = 8.0, floor: float = 1e-3, freqs=None,
               span: Optional[tuple[float, float]] = None,
               neg_mass_tol: float = NEG_MASS_TOL, scan_points: int = 401,
               project: bool = True, oversample: int = 8) -> Deconvolution:
    """Recover nu from q = nu * p by dividing transforms.

    ``q`` and ``p`` may be measures, 1-D samples (empirical transforms) or
    callables returning the transform.  The quotient is formed where
    ``|p_hat| >= floor`` and ``|t| <= band``.  The reconstruction lattice has
    spacing ``pi / T`` with T the half-width of the defined block around
    zero, and is inverted on the matching DFT frequencies so that a
    quotient identically 1 returns a single atom.  ``span`` bounds the
    support of nu; by default it is derived from the supports of q and p.
    """
    if band <= 0 or floor <= 0:
        raise ValueError("band and floor must be positive")
    if freqs is None:
        freqs = symmetric_grid(band, band / 200)
    freqs = np.asarray(freqs, dtype=float)

    # where is p_hat large enough?
    scan = np.linspace(0.0, band, scan_points)
    pmod = np.abs(_cf_values(p, np.concatenate([-scan[:0:-1], scan]))[scan_points - 1:])
    ok = pmod >= floor
    undefined_fraction = float(1.0 - ok.mean())
    bad = np.flatnonzero(~ok)
    t_def = band if bad.size == 0 else float(scan[bad[0] - 1]) if bad[0] > 0 else 0.0

    qv = _cf_values(q, freqs)
    pv = _cf_values(p, freqs)
    d = (np.abs(pv) >= floor) & (np.abs(freqs) <= band + 1e-12)
    d &= d[::-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        nu = np.where(d, qv / np.where(d, pv, 1.0), np.nan)
    nu[freqs.size // 2] = 1.0
    cf = CharFn(freqs, nu, d, strict=False)

    if undefined_fraction > 0.5 or t_def <= 0:
        return Deconvolution(cf, None, "insufficient band", undefined_fraction, t_def, None)

    step = math.pi / t_def
    lo, hi, centre = _nu_window(q, p, step)
    if span is not None:
        lo, hi = span
    anchor = 0.0 if centre is None else centre
    k0 = math.floor((lo - anchor) / step) - 1
    k1 = math.ceil((hi - anchor) / step) + 1
    size = k1 - k0 + 1
    tg = dft_freqs(step, size)
    size = tg.size - 1
    qg = _cf_values(q, tg)
    pg = _cf_values(p, tg)
    dg = np.abs(pg) >= min(floor, float(np.min(np.abs(pg))))
    with np.errstate(divide="ignore", invalid="ignore"):
        nug = np.where(dg, qg / pg, np.nan)
    nug[tg.size // 2] = 1.0
    cfg = CharFn(tg, nug, dg & dg[::-1], strict=False)
    rec = from_charfn(cfg, anchor + k0 * step, step, size, neg_mass_tol=neg_mass_tol)
    proj = None
    if project:
        fine = step / oversample
        cfr = cf.restrict(t_def)
        # inverse-noise weights: the quotient error scales like 1/|p_hat|
        w = np.minimum(np.abs(_cf_values(p, cfr.freqs)), 1.0)
        proj = project_charfn(cfr, lo - step, hi + step, fine, anchor, weights=w)
    ok = rec.valid or (proj is not None and proj.misfit <= neg_mass_tol)
    verdict = "valid probability" if ok else "not a probability"
    return Deconvolution(cf, rec, verdict, undefined_fraction, t_def, proj)


@dataclass(frozen=True)
class SpreadVerdict:
    spread: bool
    verdict: str
    nu: Optional[GridMeasure]
    deconvolution: Deconvolution


def check_spread(q, p, band: float = 8.0, floor: float = 1e-3, **kw) -> SpreadVerdict:
    """Is q = nu * p for some probability measure nu?"""
    dec = deconvolve(q, p, band, floor, **kw)
    if dec.verdict == "insufficient band":
        return SpreadVerdict(False, dec.verdict, None, dec)
    return SpreadVerdict(dec.valid, dec.verdict, dec.estimate, dec)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def measure_from_dict(d: dict):
    kind = d.get("kind")
    if kind == "grid":
        return GridMeasure(d["origin"], d["step"], d["masses"])
    if kind == "atomic":
        return AtomicMeasure.from_atoms(d["atoms"])
    raise ValueError(f"unknown measure kind {kind!r}")


def dumps(obj) -> str:
    return json.dumps(obj.to_dict())


def roundtrip_tv(nu: Measure, p: Measure, q: GridMeasure,
                 resolution: Optional[float] = None) -> float:
    """TV between ``nu * p`` and ``q``.

    ``nu`` is regridded onto ``p``'s lattice before convolving.  With
    ``resolution`` set (by default ``q.step`` when the lattices differ),
    both sides are first moved onto a lattice of that spacing.
    """
    if isinstance(p, AtomicMeasure):
        p = to_grid(p, q.step, q.origin)
    if isinstance(nu, GridMeasure) and not aligned(nu, p):
        nu = regrid(nu, p.step, p.origin)
    c = convolve(nu, p)
    if resolution is None and not aligned(c, q):
        resolution = q.step
    if resolution is not None:
        c = regrid(c, resolution, q.origin)
        q = regrid(q, resolution, q.origin)
    return distance_tv(c, q)
