"""Seeded Monte-Carlo experiment orchestration and CSV/JSON persistence.

Three experiment kinds:

* ``maxmin``   -- rate curves over an SNR sweep, NoRS and RS (warm-started
                  from the NoRS solution) on paired channel draws.
* ``minpower`` -- feasibility counting and average transmit power under a
                  worst-case rate target, over a grid of radii.
* ``dof``      -- sampled worst-case min rates of the constructive ZF (+
                  random common) schemes across SNR, with slope fits.

Determinism contract: (config, seed) fully determines the emitted CSV
bytes. Channel draws use Philox streams keyed by (seed, channel index),
oracle sampling uses (seed, channel, snr-index, ...) streams, and rows
are sorted before emission, so --jobs never changes the output. The
wall_time_ms CSV column is kept for schema stability but always written
as 0; measured timings go to the JSON summary instead.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .ao import AoConfig, DesignSpec, SolverStepError, run_ao
from .dof import (
    RankDeficientChannel,
    constructive_scheme,
    dof_estimate,
    evaluate_scheme_minrate,
    optimal_dof_pair,
    zf_private_precoders,
)
from .model import Precoder, SystemConfig
from .uncertainty import (
    ChannelInstance,
    RadiusLaw,
    UncertaintyRegion,
    derived_rng,
    radius_at,
    sample_channel,
    sample_error,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ResultRow",
    "parse_config",
    "config_from_dict",
    "config_to_dict",
    "run_maxmin_sweep",
    "run_power_feasibility",
    "run_dof_sweep",
    "csv_text",
    "emit_csv",
    "emit_summary",
    "failure_fraction",
]


class ConfigError(ValueError):
    """Malformed experiment configuration (CLI exit code 2)."""


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str  # maxmin | minpower | dof
    K: int
    Nt: int
    sigma2: float = 1.0
    snr_db: tuple = (20.0,)
    delta: object = 0.1  # float, RadiusLaw, or tuple of floats (minpower grid)
    channels: int = 20
    seed: int = 1
    target_rate: float | None = None
    oracle_samples: int = 1000
    fit_top: int = 4
    ao: AoConfig = field(default_factory=AoConfig)

    def __post_init__(self):
        if self.kind not in ("maxmin", "minpower", "dof"):
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if self.channels < 1:
            raise ConfigError("channels must be >= 1")
        if len(self.snr_db) == 0:
            raise ConfigError("snr_db must be nonempty")
        if self.kind == "minpower" and (self.target_rate is None or self.target_rate <= 0):
            raise ConfigError("minpower requires target_rate > 0")
        if self.kind == "dof" and not isinstance(self.delta, RadiusLaw):
            raise ConfigError("dof requires a scaling-law delta")
        if self.fit_top < 3:
            raise ConfigError("fit_top must be >= 3")


@dataclass
class ResultRow:
    experiment: str
    channel: int
    seed: int
    snr_db: float | None
    delta: float
    scheme: str  # RS | NoRS | ZfConstructive | ZfConstructiveNoRS
    status: str
    objective: float
    rates: tuple  # per-user total rates
    common_rate: float
    iterations: int
    wall_time_ms: float = 0.0


_AO_KEYS = {"tol_rel", "max_iter", "bootstrap_max", "init_strategy",
            "solver_tol", "solver_max_iter"}
_TOP_KEYS = {"kind", "K", "Nt", "sigma2", "snr_db", "delta", "channels",
             "seed", "target_rate", "oracle_samples", "fit_top", "ao"}
_LAW_KEYS = {"delta0", "alpha", "scale"}


def _parse_delta(raw):
    if isinstance(raw, dict):
        unknown = set(raw) - _LAW_KEYS
        if unknown:
            raise ConfigError(f"unknown delta law keys: {sorted(unknown)}")
        try:
            return RadiusLaw(**raw)
        except (TypeError, ValueError) as err:
            raise ConfigError(f"bad delta law: {err}") from err
    if isinstance(raw, (list, tuple)):
        return tuple(float(v) for v in raw)
    return float(raw)


def parse_config(path) -> ExperimentConfig:
    """Load and strictly validate a JSON experiment configuration."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config: {err}") from err
    except json.JSONDecodeError as err:
        raise ConfigError(
            f"{path}:{err.lineno}:{err.colno}: malformed JSON: {err.msg}") from err
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key in ("kind", "K", "Nt"):
        if key not in raw:
            raise ConfigError(f"missing required config key: {key!r}")
    kwargs = dict(raw)
    ao_raw = kwargs.pop("ao", {})
    unknown = set(ao_raw) - _AO_KEYS
    if unknown:
        raise ConfigError(f"unknown ao keys: {sorted(unknown)}")
    if "delta" in kwargs:
        kwargs["delta"] = _parse_delta(kwargs["delta"])
    if "snr_db" in kwargs:
        kwargs["snr_db"] = tuple(float(v) for v in kwargs["snr_db"])
    try:
        cfg = ExperimentConfig(ao=AoConfig(**ao_raw), **kwargs)
    except (TypeError, ValueError) as err:
        if isinstance(err, ConfigError):
            raise
        raise ConfigError(str(err)) from err
    return cfg


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Inverse of config_from_dict (round-trip property)."""
    if isinstance(cfg.delta, RadiusLaw):
        delta = {"delta0": cfg.delta.delta0, "alpha": cfg.delta.alpha,
                 "scale": cfg.delta.scale}
    elif isinstance(cfg.delta, tuple):
        delta = list(cfg.delta)
    else:
        delta = cfg.delta
    out = {
        "kind": cfg.kind, "K": cfg.K, "Nt": cfg.Nt, "sigma2": cfg.sigma2,
        "snr_db": list(cfg.snr_db), "delta": delta, "channels": cfg.channels,
        "seed": cfg.seed, "oracle_samples": cfg.oracle_samples,
        "fit_top": cfg.fit_top,
        "ao": {"tol_rel": cfg.ao.tol_rel, "max_iter": cfg.ao.max_iter,
               "bootstrap_max": cfg.ao.bootstrap_max,
               "init_strategy": cfg.ao.init_strategy,
               "solver_tol": cfg.ao.solver_tol,
               "solver_max_iter": cfg.ao.solver_max_iter},
    }
    if cfg.target_rate is not None:
        out["target_rate"] = cfg.target_rate
    return out


# -- channel generation ----------------------------------------------------

def draw_channel_set(cfg: ExperimentConfig, channel: int):
    """True channels plus unit-ball error draws for one channel index.

    Errors are drawn once per channel as (direction, radius fraction) so
    the same realization serves every radius in a sweep: the actual error
    is delta * unit_error, matching paired-comparison aggregation.
    """
    rng = derived_rng(cfg.seed, channel)
    while True:
        H = np.column_stack([sample_channel(rng, cfg.Nt) for _ in range(cfg.K)])
        if np.linalg.matrix_rank(H) == cfg.K:
            break
    unit_errors = np.column_stack(
        [sample_error(rng, 1.0, "interior", cfg.Nt) for _ in range(cfg.K)])
    return H, unit_errors


def instances_for(H, unit_errors, delta: float):
    K = H.shape[1]
    out = []
    for k in range(K):
        err = delta * unit_errors[:, k]
        out.append(ChannelInstance(H[:, k], UncertaintyRegion(H[:, k] - err, delta)))
    return out


# -- experiment kinds ------------------------------------------------------

def _snr_to_pt(snr_db: float, sigma2: float) -> float:
    return sigma2 * 10.0 ** (snr_db / 10.0)


def _row_from_result(cfg, experiment, channel, snr_db, delta, scheme, res,
                     elapsed_ms) -> ResultRow:
    return ResultRow(
        experiment=experiment, channel=channel, seed=cfg.seed, snr_db=snr_db,
        delta=delta, scheme=scheme, status=res.status,
        objective=float(res.objective),
        rates=tuple(float(r) for r in res.per_user_conservative_rates),
        common_rate=float(res.split.r_c), iterations=res.iterations,
        wall_time_ms=elapsed_ms,
    )


def _failed_row(cfg, experiment, channel, snr_db, delta, scheme, status) -> ResultRow:
    return ResultRow(experiment=experiment, channel=channel, seed=cfg.seed,
                     snr_db=snr_db, delta=delta, scheme=scheme, status=status,
                     objective=float("nan"), rates=(float("nan"),) * cfg.K,
                     common_rate=float("nan"), iterations=0)


def _maxmin_channel(cfg: ExperimentConfig, channel: int) -> list:
    H, unit_errors = draw_channel_set(cfg, channel)
    rows = []
    for snr_db in cfg.snr_db:
        Pt = _snr_to_pt(snr_db, cfg.sigma2)
        delta = radius_at(cfg.delta, Pt) if isinstance(cfg.delta, RadiusLaw) else float(cfg.delta)
        instances = instances_for(H, unit_errors, delta)
        regions = [inst.region for inst in instances]
        sys_cfg = SystemConfig(cfg.K, cfg.Nt, cfg.sigma2, Pt)
        t0 = time.perf_counter()
        try:
            nors = run_ao(DesignSpec("maxmin", rs=False), regions, sys_cfg, cfg.ao)
            rows.append(_row_from_result(cfg, "maxmin", channel, snr_db, delta,
                                         "NoRS", nors,
                                         1e3 * (time.perf_counter() - t0)))
        except SolverStepError as err:
            rows.append(_failed_row(cfg, "maxmin", channel, snr_db, delta,
                                    "NoRS", err.status))
            nors = None
        t0 = time.perf_counter()
        try:
            # run the rate-splitting design from two starting points -- warm
            # started at the conventional solution (guarantees it never does
            # worse) and from the default matched-filter-style initialiser
            # (escapes the conventional design's local basin at high SNR) --
            # and keep whichever attains the larger worst-case rate
            ao_rs = replace(cfg.ao, warm_start=None if nors is None else nors.precoder)
            rs = run_ao(DesignSpec("maxmin", rs=True), regions, sys_cfg, ao_rs)
            if nors is not None:
                try:
                    fresh = run_ao(DesignSpec("maxmin", rs=True), regions,
                                   sys_cfg, replace(cfg.ao, warm_start=None))
                    if fresh.objective > rs.objective:
                        rs = fresh
                except SolverStepError:
                    pass
            rows.append(_row_from_result(cfg, "maxmin", channel, snr_db, delta,
                                         "RS", rs, 1e3 * (time.perf_counter() - t0)))
        except SolverStepError as err:
            rows.append(_failed_row(cfg, "maxmin", channel, snr_db, delta,
                                    "RS", err.status))
    return rows


def _minpower_channel(cfg: ExperimentConfig, channel: int) -> list:
    H, unit_errors = draw_channel_set(cfg, channel)
    deltas = cfg.delta if isinstance(cfg.delta, tuple) else (float(cfg.delta),)
    rows = []
    for delta in deltas:
        instances = instances_for(H, unit_errors, delta)
        regions = [inst.region for inst in instances]
        sys_cfg = SystemConfig(cfg.K, cfg.Nt, cfg.sigma2, Pt=1.0)
        nors_precoder = None
        for scheme, rs in (("NoRS", False), ("RS", True)):
            # a feasible NoRS design warm-starts RS: guarantees the paired
            # dominance (RS feasible whenever NoRS is, at no more power)
            ao = cfg.ao
            if rs and nors_precoder is not None:
                ao = replace(cfg.ao, warm_start=nors_precoder)
            t0 = time.perf_counter()
            try:
                res = run_ao(DesignSpec("minpower", rs=rs, target=cfg.target_rate),
                             regions, sys_cfg, ao)
                rows.append(_row_from_result(cfg, "minpower", channel, None, delta,
                                             scheme, res,
                                             1e3 * (time.perf_counter() - t0)))
                if not rs and res.status != "Infeasible":
                    nors_precoder = res.precoder
            except SolverStepError as err:
                rows.append(_failed_row(cfg, "minpower", channel, None, delta,
                                        scheme, err.status))
    return rows


def _dof_channel(cfg: ExperimentConfig, channel: int) -> list:
    rows = []
    rng_scheme = derived_rng(cfg.seed, channel, 10_000)
    H, unit_errors = draw_channel_set(cfg, channel)
    for j, snr_db in enumerate(cfg.snr_db):
        Pt = _snr_to_pt(snr_db, cfg.sigma2)
        delta = radius_at(cfg.delta, Pt)
        instances = instances_for(H, unit_errors, delta)
        H_hat = np.column_stack([inst.region.h_hat for inst in instances])
        try:
            P_rs = constructive_scheme(H_hat, cfg.delta.alpha, Pt, rng_scheme)
        except RankDeficientChannel:
            rows.append(_failed_row(cfg, "dof", channel, snr_db, delta,
                                    "ZfConstructive", "Infeasible"))
            continue
        P_nors = Precoder(np.zeros(cfg.Nt, complex), P_rs.pp)
        for scheme, P in (("ZfConstructive", P_rs), ("ZfConstructiveNoRS", P_nors)):
            rng_eval = derived_rng(cfg.seed, channel, j, 1 if scheme == "ZfConstructive" else 2)
            t0 = time.perf_counter()
            minrate = evaluate_scheme_minrate(P, instances, cfg.sigma2,
                                              cfg.oracle_samples, rng_eval)
            rows.append(ResultRow(
                experiment="dof", channel=channel, seed=cfg.seed, snr_db=snr_db,
                delta=delta, scheme=scheme, status="Converged",
                objective=minrate, rates=(minrate,) * cfg.K,
                common_rate=0.0, iterations=0,
                wall_time_ms=1e3 * (time.perf_counter() - t0)))
    return rows


_CHANNEL_FN = {"maxmin": _maxmin_channel, "minpower": _minpower_channel,
               "dof": _dof_channel}


def _run_channels(cfg: ExperimentConfig, jobs: int = 1) -> list:
    fn = _CHANNEL_FN[cfg.kind]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(fn, [cfg] * cfg.channels, range(cfg.channels)))
    else:
        chunks = [fn(cfg, c) for c in range(cfg.channels)]
    rows = [row for chunk in chunks for row in chunk]
    rows.sort(key=lambda r: (r.channel,
                             r.snr_db if r.snr_db is not None else -1.0,
                             r.delta, r.scheme))
    return rows


def run_maxmin_sweep(cfg: ExperimentConfig, jobs: int = 1) -> list:
    if cfg.kind != "maxmin":
        raise ConfigError("config kind must be 'maxmin'")
    return _run_channels(cfg, jobs)


def run_power_feasibility(cfg: ExperimentConfig, jobs: int = 1) -> list:
    if cfg.kind != "minpower":
        raise ConfigError("config kind must be 'minpower'")
    return _run_channels(cfg, jobs)


def run_dof_sweep(cfg: ExperimentConfig, jobs: int = 1):
    """Rows plus a slope fit per scheme (over mean rates across channels)."""
    if cfg.kind != "dof":
        raise ConfigError("config kind must be 'dof'")
    rows = _run_channels(cfg, jobs)
    fits = {}
    for scheme in ("ZfConstructive", "ZfConstructiveNoRS"):
        pts = []
        for snr_db in cfg.snr_db:
            vals = [r.objective for r in rows
                    if r.scheme == scheme and r.snr_db == snr_db
                    and np.isfinite(r.objective)]
            if vals:
                pts.append((_snr_to_pt(snr_db, cfg.sigma2), float(np.mean(vals))))
        pts.sort(key=lambda pv: pv[0])
        fits[scheme] = dof_estimate(pts[-cfg.fit_top:])
    d_nors, d_rs = optimal_dof_pair(cfg.K, cfg.delta.alpha)
    fits["predictions"] = {"ZfConstructiveNoRS": d_nors, "ZfConstructive": d_rs}
    return rows, fits


# -- persistence -----------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if np.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


def csv_text(rows) -> str:
    """Render rows in the documented fixed column order."""
    if not rows:
        raise ValueError("no rows to emit")
    K = len(rows[0].rates)
    header = (["experiment", "channel", "seed", "snr_db", "delta", "scheme",
               "status", "objective"]
              + [f"rate_user{k + 1}" for k in range(K)]
              + ["common_rate", "iterations", "wall_time_ms"])
    lines = [",".join(header)]
    for r in rows:
        cells = [r.experiment, str(r.channel), str(r.seed), _fmt(r.snr_db),
                 _fmt(float(r.delta)), r.scheme, r.status, _fmt(r.objective)]
        cells += [_fmt(float(v)) for v in r.rates]
        # wall time is measured but deliberately not serialized: the CSV
        # bytes must be a pure function of (config, seed)
        cells += [_fmt(float(r.common_rate)), str(r.iterations), "0"]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def emit_csv(rows, path) -> None:
    text = csv_text(rows)
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as err:
        raise IOError(f"cannot write {path}: {err}") from err


def emit_summary(rows, path=None) -> dict:
    """Aggregate mean/min/max per (snr_db, delta, scheme) plus feasibility.

    Power averages exclude infeasible rows; feasibility counts include
    them, matching the evaluation protocol of the power experiment.
    """
    if not rows:
        raise ValueError("no rows to summarize")
    groups: dict = {}
    for r in rows:
        groups.setdefault((r.snr_db, float(r.delta), r.scheme), []).append(r)
    out = []
    for (snr_db, delta, scheme), rs in sorted(
            groups.items(), key=lambda kv: (kv[0][0] if kv[0][0] is not None else -1.0,
                                            kv[0][1], kv[0][2])):
        feasible = [r for r in rs if r.status != "Infeasible" and np.isfinite(r.objective)]
        vals = [r.objective for r in feasible]
        out.append({
            "snr_db": snr_db, "delta": delta, "scheme": scheme,
            "n": len(rs), "feasible": len(feasible),
            "mean": float(np.mean(vals)) if vals else None,
            "min": float(np.min(vals)) if vals else None,
            "max": float(np.max(vals)) if vals else None,
            "mean_wall_time_ms": float(np.mean([r.wall_time_ms for r in rs])),
        })
    summary = {"groups": out}
    if path is not None:
        try:
            with open(path, "w") as fh:
                json.dump(summary, fh, indent=2)
        except OSError as err:
            raise IOError(f"cannot write {path}: {err}") from err
    return summary


def failure_fraction(rows) -> float:
    """Fraction of rows that ended in solver trouble (not mere infeasibility)."""
    bad = sum(1 for r in rows if r.status in ("NumericalTrouble", "MaxIterations",
                                              "Unbounded"))
    return bad / len(rows) if rows else 0.0
