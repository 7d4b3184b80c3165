"""Command-line scenario runner.

    convthm list
    convthm run SCENARIO [--config PATH] [--seed N] [--streams N] [--reps N]
                         [--out DIR] [--tol CHECK=VALUE ...] [scenario flags]

Exit status is 0 when every check passes, 1 when a check fails and 2 for
an invalid configuration.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
import time
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy import stats as sps

from . import conv, dist, extremes, gshift, lan, nonuniq
from .conv import ConvolutionReport
from .dist import AtomicMeasure, CharFn, GridMeasure, ProductGridMeasure
from .report import Report
from .stats import RngSpec, SampleSet


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# scenario parameters
# ---------------------------------------------------------------------------


@dataclass
class LanParams:
    model: str = "gaussian_location"
    theta0: float = 0.0
    alpha: float = 2.0
    n: int = 100
    theta: float = 1.0
    reps: int = 10_000
    remainder_tol: float = 1e-12


@dataclass
class ChangeMeasureParams:
    model: str = "gaussian_location"
    theta0: float = 0.0
    alpha: float = 2.0
    n: int = 50
    theta: float = 1.0
    reps: int = 10_000
    statistics: list = field(default_factory=lambda: list(lan.STATISTICS))


@dataclass
class ThirdLemmaParams:
    model: str = "gaussian_location"
    theta0: float = 0.0
    alpha: float = 2.0
    n_list: list = field(default_factory=lambda: [20, 200])
    theta: float = 1.0
    pair: str = "central_and_estimator"
    reps: int = 20_000
    gap_tol: float = 0.03


@dataclass
class ConvParams:
    model: str = "gaussian_location"
    theta0: float = 0.0
    alpha: float = 2.0
    estimator: str = "noisy_mean"
    noise_c: float = 0.5
    weights: Optional[list] = None
    n: int = 200
    theta_list: list = field(default_factory=lambda: [0.0, 1.0])
    reps: int = 100_000
    band: float = 3.0
    floor: float = 1e-3
    reference: str = "paired"
    cf_tol: float = 0.02
    rt_tol: float = 0.02
    var_tol: float = 0.05


@dataclass
class InvarianceParams:
    model: str = "gaussian_location"
    theta0: float = 0.0
    alpha: float = 2.0
    estimator: str = "median"
    noise_c: float = 0.5
    n: int = 200
    theta: float = 1.0
    reps: int = 100_000
    tol: float = 0.02


@dataclass
class RaoParams:
    family: str = "gaussian_mean"
    S: str = "mean"
    T: str = "first"
    f_list: list = field(default_factory=lambda: [1.0, -2.0])
    mode: str = "exact"
    n: int = 10
    reps: int = 100_000


@dataclass
class AgcParams:
    family: str = "exponential"
    t_kind: str = "noisy"
    n_list: list = field(default_factory=lambda: [10, 100, 1000])
    reps: int = 20_000
    noise_var: float = 0.25


@dataclass
class GirsanovParams:
    n: int = 5
    M: int = 512
    reps: int = 10_000
    drifts: list = field(default_factory=lambda: ["u", "1", "2u"])
    sufficiency_reps: int = 100_000
    sufficiency_M: int = 64
    times: list = field(default_factory=lambda: list(gshift.DEFAULT_TIMES))
    ks_tol: float = 0.02


@dataclass
class GshiftParams:
    n: int = 10
    M: int = 64
    reps: int = 100_000
    times: list = field(default_factory=lambda: list(gshift.DEFAULT_TIMES))
    estimator: str = "noisy_mean"
    noise_c: float = 0.5
    floor: float = 0.25
    cf_tol: float = 0.03
    rt_tol: float = 0.02
    equivariance_reps: int = 20_000


@dataclass
class EndpointParams:
    n: int = 1000
    estimator: str = "noisy_extremes"
    noise: float = 0.5
    reps: int = 100_000
    tv_n: list = field(default_factory=lambda: [10, 50, 100, 500, 1000])
    tv_tol: float = 0.01
    floor: float = 0.25
    cf_tol: float = 0.03
    rt_tol: float = 0.02
    regularity_reps: int = 20_000


@dataclass
class LevyParams:
    times: list = field(default_factory=lambda: [1.0, 2.0, 3.0])
    alpha: float = 2.0
    estimator: str = "noisy"
    coord: int = 1
    noise: float = 0.3
    reps: int = 100_000
    floor: float = 0.25
    cf_band: float = 8.0
    cf_tol: float = 0.03
    rt_tol: float = 0.02
    equivariance_reps: int = 20_000


@dataclass
class NonuniqParams:
    K: int = nonuniq.DEFAULT_K
    grid_halfwidth: float = nonuniq.DEFAULT_HALFWIDTH
    grid_step: float = nonuniq.DEFAULT_STEP
    eta: str = "nu"


@dataclass
class KernelParams:
    noise_var: float = 0.25
    f: float = 2.0
    h: float = 0.5
    step: float = 0.01
    tv_tol: float = 1e-3


# ---------------------------------------------------------------------------
# scenario bodies
# ---------------------------------------------------------------------------


def _model(p) -> lan.LocalModel:
    return lan.make_model(p.model, p.theta0, p.alpha)


def run_lan(p: LanParams, rng: RngSpec) -> Report:
    m = _model(p)
    rep = Report("lan")
    r = lan.lan_remainder(m, p.n, p.theta, p.reps, rng.child(0))
    if isinstance(m, lan.GaussianLocationModel):
        r.add("remainder_max_abs", r.info["max_abs"], p.remainder_tol)
    rep.extend(r, "remainder:")
    rep.extend(lan.likelihood_ratio_mean_check(m, p.n, p.theta, p.reps, rng.child(1)), "lr:")
    rep.extend(lan.central_clt_check(m, p.n, p.theta, p.reps, rng.child(2)), "clt:")
    return rep


def run_changemeasure(p: ChangeMeasureParams, rng: RngSpec) -> Report:
    m = _model(p)
    rep = Report("changemeasure")
    for j, s in enumerate(p.statistics):
        if s not in lan.STATISTICS:
            raise ConfigError(f"unknown statistic {s!r}; choose from {sorted(lan.STATISTICS)}")
        rep.extend(lan.change_of_measure_check(m, s, p.n, p.theta, p.reps, rng.child(j)), f"{s}:")
    return rep


_PAIRS = {"central_pair": lan.central_pair, "central_and_estimator": lan.central_and_estimator}


def run_thirdlemma(p: ThirdLemmaParams, rng: RngSpec) -> Report:
    if p.pair not in _PAIRS:
        raise ConfigError(f"unknown pair {p.pair!r}; choose from {sorted(_PAIRS)}")
    return lan.third_lemma_limit_check(_model(p), _PAIRS[p.pair], p.n_list, p.theta, p.reps,
                                       rng, tol=p.gap_tol)


def _conv_target(p: ConvParams, model):
    """Transform of nu expected for the estimator, plus its variance."""
    if p.estimator == "mean":
        return (lambda t: np.ones_like(t)), 0.0
    if p.estimator == "noisy_mean":
        v = p.noise_c ** 2
        return (lambda t: np.exp(-v * np.asarray(t) ** 2 / 2)), v
    if p.estimator == "median" and model.name == "gaussian_location":
        return None, math.pi / 2 - 1
    return None, None


def run_conv(p: ConvParams, rng: RngSpec) -> Report:
    m = _model(p)
    est = conv.make_estimator(p.estimator, p.noise_c, p.weights)
    target, var = _conv_target(p, m)
    kw = dict(target=target, cf_tol=p.cf_tol if target is not None else None,
              rt_tol=p.rt_tol)
    if target is None and var is not None:
        kw.update(var_target=var, var_tol=p.var_tol)
    dec = conv.convolution_decompose(m, est, p.n, p.reps, p.band, p.floor, rng.child(0),
                                     reference=p.reference, **kw)
    rep = Report("conv")
    rep.extend(dec, "decompose:")
    rep.artifacts["decomposition"] = dec
    if len(p.theta_list) > 1:
        rep.extend(conv.regularity_check(m, est, p.theta_list, p.n, p.reps, rng.child(1)),
                   "regularity:")
    return rep


def run_invariance(p: InvarianceParams, rng: RngSpec) -> Report:
    est = conv.make_estimator(p.estimator, p.noise_c)
    return conv.joint_independence_pipeline(_model(p), est, p.n, p.reps, rng, p.theta, p.tol)


def run_rao(p: RaoParams, rng: RngSpec) -> Report:
    return conv.rao_covariance_check(p.family, p.S, p.T, p.f_list, p.mode, p.n, reps=p.reps,
                                     rng=rng)


def run_agc(p: AgcParams, rng: RngSpec) -> Report:
    return conv.asymptotic_gaussian_convolution(p.family, p.t_kind, p.n_list, p.reps, rng,
                                                noise_var=p.noise_var)


def _drift(text: str, M: int) -> gshift.SignalParam:
    try:
        return gshift.Polynomial.parse(str(text)).to_signal(M)
    except ValueError as e:
        raise ConfigError(str(e)) from None


def run_girsanov(p: GirsanovParams, rng: RngSpec) -> Report:
    rep = Report("girsanov")
    for j, d in enumerate(p.drifts):
        rep.extend(gshift.lr_mean_check(_drift(d, p.M), p.n, p.reps, rng.child(0, j)),
                   f"drift={d}:")
    eta = _drift(p.drifts[0], p.sufficiency_M)
    rep.extend(gshift.sufficiency_identity_check(eta, p.n, p.sufficiency_reps, rng.child(1),
                                                 tuple(p.times), p.ks_tol), "sufficiency:")
    return rep


def _path_target(p: GshiftParams):
    if p.estimator == "mean":
        return lambda t: (lambda u: np.ones_like(u))
    if p.estimator == "noisy_mean":
        return lambda t: (lambda u: np.exp(-p.noise_c ** 2 * t * np.asarray(u) ** 2 / 2))
    if p.estimator == "biased_mean":
        return lambda t: (lambda u: np.exp(1j * np.asarray(u) * float(gshift.default_bias(t))))
    return None


def run_gshift(p: GshiftParams, rng: RngSpec) -> Report:
    T = gshift.make_path_estimator(p.estimator, p.noise_c)
    target = _path_target(p)
    rep = Report("gshift")
    mc = gshift.marginal_convolution_check(
        T, p.n, p.M, p.reps, rng.child(0), tuple(p.times), p.floor, target=target,
        cf_tol=p.cf_tol if target is not None else None, rt_tol=p.rt_tol)
    rep.extend(mc, "marginal:")
    etas = [_drift("1", p.M), _drift("u", p.M)]
    rep.extend(gshift.equivariance_check(T, gshift.SignalParam.zero(p.M), etas, p.n,
                                         p.equivariance_reps, rng.child(1), tuple(p.times)),
               "equivariance:")
    return rep


def run_endpoints(p: EndpointParams, rng: RngSpec) -> Report:
    rep = Report("endpoints")
    tv = [extremes.exact_lower_extreme_tv(int(n)) for n in p.tv_n]
    rep.info["exact_tv"] = dict(zip([int(n) for n in p.tv_n], tv))
    rep.add("exact_tv_strictly_decreasing", float(np.all(np.diff(tv) < 0)), 1.0, op="eq")
    rep.add("exact_tv_largest_n", tv[-1], p.tv_tol)
    variant = p.estimator
    noisy = variant == "noisy_extremes"
    rep.extend(extremes.endpoint_convolution_check(
        variant, p.n, p.reps, rng.child(0), p.floor, noise=p.noise,
        cf_tol=p.cf_tol, rt_tol=p.rt_tol if noisy else None), "convolution:")
    rep.extend(extremes.endpoint_regularity_check(variant, p.n, p.regularity_reps, rng.child(1),
                                                  noise=p.noise), "regularity:")
    return rep


def run_levy(p: LevyParams, rng: RngSpec) -> Report:
    model = extremes.LevyShiftModel(np.asarray(p.times, float), p.alpha)
    if not 0 <= p.coord < model.m:
        raise ConfigError(f"coord must be in 0..{model.m - 1}")
    rep = Report("levy")
    x = extremes.levy_simulate(model.with_shift(np.arange(model.m, dtype=float)), 1000,
                               rng.child(2)).draws
    back = extremes.levy_increment_inverse(extremes.levy_increment_transform(x))
    rep.add("increment_roundtrip_max_abs", float(np.max(np.abs(back - x))),
            1e-12 * max(1.0, float(np.abs(x).max())))
    rep.extend(extremes.levy_convolution_check(model, p.estimator, p.coord, p.reps, rng.child(0),
                                               p.floor, noise=p.noise, cf_tol=p.cf_tol,
                                               rt_tol=p.rt_tol), "convolution:")
    k = float(model.shapes[p.coord])
    rep.extend(extremes.cf_nonvanishing_check(f"gamma:{k:g}", p.cf_band), "gamma_cf:")
    rep.extend(extremes.levy_equivariance_check(model, p.estimator, p.coord, p.equivariance_reps,
                                                rng.child(1), noise=p.noise), "equivariance:")
    return rep


def run_nonuniq(p: NonuniqParams, rng: RngSpec) -> Report:
    try:
        eq = nonuniq.verify_equal_convolutions(p.eta, p.K, p.grid_step, p.grid_halfwidth)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    rep = Report("nonuniq")
    rep.extend(eq, "convolutions:")
    rep.extend(nonuniq.verify_mu_neq_nu(p.K, p.grid_step, p.grid_halfwidth), "distinct:")
    rep.extend(nonuniq.truncation_convergence(), "truncation:")
    t = nonuniq.CF_GRID
    nu = nonuniq.build_nu(p.grid_step, p.grid_halfwidth)
    eta = nonuniq.eta_family(p.eta, p.grid_step, p.grid_halfwidth)
    rep.artifacts["cf_mu"] = CharFn(t, nonuniq.mu_cf(t, p.K).astype(complex), strict=False)
    rep.artifacts["cf_nu"] = CharFn(t, nonuniq.grid_cf(nu, t), strict=False)
    rep.artifacts["cf_eta"] = CharFn(t, nonuniq.grid_cf(eta, t), strict=False)
    # densities of both convolutions near the origin (the full lattices are huge)
    a, b = rep.artifacts.pop("convolutions:mu_eta"), rep.artifacts.pop("convolutions:nu_eta")
    x = np.arange(-round(40 / a.step), round(40 / a.step) + 1) * a.step
    cols = [x]
    for g in (a, b):
        k = np.rint((x - g.origin) / g.step).astype(int)
        cols.append(g.masses[k] / g.step)
    rep.artifacts["convolution_densities"] = (["x", "mu_eta", "nu_eta"], np.column_stack(cols))
    rep.info["raw_mu_mass"] = nonuniq.mu_raw_mass(p.K)
    return rep


def run_kernel(p: KernelParams, rng: RngSpec) -> Report:
    P = conv.normal_grid(1.0, p.step)
    noise = conv.normal_grid(p.noise_var, p.step)
    out = conv.apply_convolution_kernel(conv.ConvolutionKernel(noise, [[p.f]]), P, p.h)
    law = sps.norm(p.f * p.h, math.sqrt(p.f ** 2 + p.noise_var))
    exact = dist.discretize(law, out.step, out.x[0], out.x[-1], method="point", anchor=out.origin)
    rep = Report("kernel")
    rep.add("tv_to_closed_form", dist.distance_tv(out, exact), p.tv_tol)
    rep.add("mean_error", abs(out.mean - p.f * p.h), 1e-6)
    rep.add("variance_error", abs(out.var - (p.f ** 2 + p.noise_var)), 1e-3)
    rep.artifacts["image"] = out
    return rep


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    name: str
    params: type
    run: Callable[[object, RngSpec], Report]
    summary: str
    anchor: str


SCENARIOS = {s.name: s for s in [
    Scenario("lan", LanParams, run_lan,
             "quadratic log-likelihood expansion, LR mean and central-sequence CLT", "(1.2)"),
    Scenario("changemeasure", ChangeMeasureParams, run_changemeasure,
             "E_theta g against the reweighted null mean for bounded statistics", "(1.3)–(1.8)"),
    Scenario("thirdlemma", ThirdLemmaParams, run_thirdlemma,
             "joint law under theta against the null reweighted by the limit density",
             "(1.10)"),
    Scenario("conv", ConvParams, run_conv,
             "deconvolve the efficient law out of an estimator's law; regularity across theta",
             "(1.11)"),
    Scenario("invariance", InvarianceParams, run_invariance,
             "independence of the residual from X_n and its theta-invariance", "(1.9)"),
    Scenario("rao", RaoParams, run_rao,
             "covariance characterization of minimum variance for linear estimators",
             "(lem:1.1)"),
    Scenario("agc", AgcParams, run_agc,
             "Gaussian limits of estimator pairs and their convolution factor", "(1.10)"),
    Scenario("girsanov", GirsanovParams, run_girsanov,
             "Brownian drift likelihood ratio and the sufficiency identity", "(sn5)–(sn6)"),
    Scenario("gshift", GshiftParams, run_gshift,
             "per-time convolution factors of signal-plus-noise path estimators",
             "(1.17)–(1.23)"),
    Scenario("endpoints", EndpointParams, run_endpoints,
             "uniform endpoints: exact TV to the exponential limit and deconvolution",
             "(E9)–(E10)"),
    Scenario("levy", LevyParams, run_levy,
             "Gamma process with shifts: increments, deconvolution, non-vanishing transform",
             "(levy3)"),
    Scenario("nonuniq", NonuniqParams, run_nonuniq,
             "distinct laws with equal convolutions against band-limited laws", "(ex:3:8)"),
    Scenario("kernel", KernelParams, run_kernel,
             "convolution kernel applied to a shifted Gaussian against the closed form",
             "(2.6)"),
]}


def list_scenarios() -> list[dict]:
    return [{"name": s.name, "description": s.summary, "anchor": s.anchor}
            for s in SCENARIOS.values()]


# ---------------------------------------------------------------------------
# config handling
# ---------------------------------------------------------------------------

_COMMON = ("scenario", "seed", "streams", "tolerances")


def _coerce(value, tp, name):
    origin = typing.get_origin(tp)
    if origin is typing.Union:  # Optional[...]
        if value is None:
            return None
        tp = [a for a in typing.get_args(tp) if a is not type(None)][0]
        origin = typing.get_origin(tp)
    if tp is list or origin is list:
        if isinstance(value, str):
            value = [v for v in value.split(",") if v]
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{name} must be a list")
        out = []
        for v in value:
            try:
                out.append(json.loads(v) if isinstance(v, str) and v[:1] in "-0123456789" else v)
            except json.JSONDecodeError:
                out.append(v)
        return out
    try:
        if tp is int:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(float(value)) if isinstance(value, str) else int(value)
        if tp is float:
            v = float(value)
            if not math.isfinite(v):
                raise ValueError
            return v
        if tp is str:
            if not isinstance(value, (str, int, float)):
                raise ValueError
            return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"invalid value {value!r} for {name}") from None
    return value


def _hints(cls) -> dict:
    return typing.get_type_hints(cls)


def build_config(raw: dict) -> dict:
    """Validate a config mapping and fill defaults.

    Returns a dict with keys scenario, seed, streams, tolerances and params
    (a scenario parameter dataclass).
    """
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    name = raw.get("scenario")
    if name not in SCENARIOS:
        raise ConfigError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}")
    sc = SCENARIOS[name]
    hints = _hints(sc.params)
    unknown = sorted(set(raw) - set(hints) - set(_COMMON))
    if unknown:
        raise ConfigError(f"unknown config fields for {name}: {', '.join(unknown)}")
    kw = {k: _coerce(v, hints[k], k) for k, v in raw.items() if k in hints}
    params = sc.params(**kw)
    if getattr(params, "reps", 2) < 2:
        raise ConfigError("reps must be at least 2")
    seed = _coerce(raw.get("seed", 0), int, "seed")
    streams = _coerce(raw.get("streams", 1), int, "streams")
    tolerances = raw.get("tolerances", {}) or {}
    if not isinstance(tolerances, dict):
        raise ConfigError("tolerances must be an object mapping check names to thresholds")
    tolerances = {str(k): _coerce(v, float, f"tolerances.{k}") for k, v in tolerances.items()}
    try:
        rng = RngSpec(seed, streams)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    return {"scenario": name, "seed": seed, "streams": streams, "tolerances": tolerances,
            "params": params, "rng": rng}


def config_echo(cfg: dict) -> dict:
    return {"scenario": cfg["scenario"], "seed": cfg["seed"], "streams": cfg["streams"],
            "tolerances": cfg["tolerances"], **dataclasses.asdict(cfg["params"])}


def _apply_tolerances(rep: Report, tolerances: dict) -> None:
    names = [c.name for c in rep.checks]
    missing = sorted(set(tolerances) - set(names))
    if missing:
        raise ConfigError(f"tolerance override for unknown checks: {', '.join(missing)}")
    rep.checks = [dataclasses.replace(c, threshold=tolerances[c.name])
                  if c.name in tolerances else c for c in rep.checks]


def run_config(cfg: dict) -> tuple[Report, dict]:
    """Run a validated config; returns the report and its JSON payload."""
    sc = SCENARIOS[cfg["scenario"]]
    t0 = time.perf_counter()
    try:
        rep = sc.run(cfg["params"], cfg["rng"])
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(str(e)) from None
    _apply_tolerances(rep, cfg["tolerances"])
    payload = {"scenario": config_echo(cfg), "seed": cfg["seed"], "pass": rep.passed,
               "checks": [c.to_dict() for c in rep.checks], "info": rep.to_dict()["info"],
               "duration": time.perf_counter() - t0}
    return rep, payload


# ---------------------------------------------------------------------------
# artifacts
# ---------------------------------------------------------------------------


def _safe(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in name).strip("_")


def export_artifacts(obj, out: Path, prefix: str = "") -> list[str]:
    """Write CSV files for every measure, transform and sample in ``obj``."""
    written = []

    def put(name, fn):
        path = out / f"{_safe(name)}.csv"
        fn(path)
        written.append(path.name)

    if isinstance(obj, ConvolutionReport):
        for attr in ("q", "p", "nu", "nu_cf"):
            v = getattr(obj, attr)
            if v is not None:
                written += export_artifacts(v, out, f"{prefix}{attr}")
        written += export_artifacts(obj.artifacts, out, prefix)
    elif isinstance(obj, Report):
        written += export_artifacts(obj.artifacts, out, prefix)
    elif isinstance(obj, dict):
        for k, v in obj.items():
            written += export_artifacts(v, out, f"{prefix}{k}_" if not isinstance(
                v, (GridMeasure, CharFn, SampleSet, np.ndarray, AtomicMeasure)) else f"{prefix}{k}")
    elif isinstance(obj, GridMeasure):
        put(prefix, obj.to_csv)
    elif isinstance(obj, CharFn):
        put(prefix, obj.to_csv)
    elif isinstance(obj, SampleSet):
        put(prefix, obj.to_csv)
    elif isinstance(obj, AtomicMeasure):
        put(prefix, lambda p: np.savetxt(p, np.column_stack([obj.locs, obj.probs]),
                                         delimiter=",", header="x,mass", comments=""))
    elif isinstance(obj, tuple) and len(obj) == 2:
        header, table = obj
        put(prefix, lambda p: np.savetxt(p, table, delimiter=",", header=",".join(header),
                                         comments=""))
    elif isinstance(obj, np.ndarray):
        put(prefix, lambda p: np.savetxt(p, np.atleast_2d(obj.T).T, delimiter=",",
                                         header=",".join(f"x{i}" for i in range(
                                             1 if obj.ndim == 1 else obj.shape[1])),
                                         comments=""))
    elif isinstance(obj, ProductGridMeasure):
        pass
    return written


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _scenario_parser(sc: Scenario) -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog=f"convthm run {sc.name}", add_help=False)
    for f in dataclasses.fields(sc.params):
        if f.name == "reps":
            continue
        ap.add_argument(_flag(f.name), dest=f.name, default=argparse.SUPPRESS)
    return ap


def _main_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="convthm",
                                 description="Convolution-theorem verification scenarios.")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("list", help="list scenarios")
    r = sub.add_parser("run", help="run a scenario")
    r.add_argument("scenario", nargs="?", help="scenario name (or set in --config)")
    r.add_argument("--config", help="JSON config file")
    r.add_argument("--seed", type=int)
    r.add_argument("--streams", type=int)
    r.add_argument("--reps", type=int, help="override the replication count")
    r.add_argument("--out", help="output directory for report.json and CSVs")
    r.add_argument("--tol", action="append", default=[], metavar="CHECK=VALUE",
                   help="override a check threshold")
    r.add_argument("--quiet", action="store_true", help="print only the summary")
    return ap


def _collect(args, rest) -> dict:
    raw: dict = {}
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {args.config}: {e}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
    if args.scenario:
        if raw.get("scenario", args.scenario) != args.scenario:
            raise ConfigError("scenario on the command line differs from the config")
        raw["scenario"] = args.scenario
    if raw.get("scenario") not in SCENARIOS:
        raise ConfigError(f"unknown scenario {raw.get('scenario')!r}; "
                          f"choose from {sorted(SCENARIOS)}")
    sc = SCENARIOS[raw["scenario"]]
    ns, bad = _scenario_parser(sc).parse_known_args(rest)
    if bad:
        raise ConfigError(f"unrecognized arguments for {sc.name}: {' '.join(bad)}")
    raw.update(vars(ns))
    for k in ("seed", "streams", "reps"):
        if getattr(args, k) is not None:
            raw[k] = getattr(args, k)
    if "reps" in raw and "reps" not in _hints(sc.params):
        if args.reps is not None:
            raw.pop("reps")
    tols = dict(raw.get("tolerances") or {})
    for item in args.tol:
        k, sep, v = item.partition("=")
        if not sep:
            raise ConfigError(f"--tol expects CHECK=VALUE, got {item!r}")
        tols[k] = v
    if tols:
        raw["tolerances"] = tols
    return raw


def main(argv: Optional[list] = None) -> int:
    ap = _main_parser()
    args, rest = ap.parse_known_args(argv)
    if args.command == "list":
        if rest:
            ap.error(f"unrecognized arguments: {' '.join(rest)}")
        for s in list_scenarios():
            print(f"{s['name']:<14} {s['anchor']:<14} {s['description']}")
        return 0
    try:
        cfg = build_config(_collect(args, rest))
        rep, payload = run_config(cfg)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    text = json.dumps(payload, sort_keys=True, indent=2)
    out = Path(args.out) if args.out else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(text + "\n")
        export_artifacts(rep, out)
    print(rep.summary() if args.quiet else text)
    return 0 if rep.passed else 1


def main_entry() -> None:
    sys.exit(main())
