"""Config-driven experiment runner.

Seven experiment families assemble the library into verifiable statistical
claims: extreme singular-value tails (E1), operator-norm tails (E2), peaked
directions (E2b), the linear small-ball law on regular vectors (E3),
allocation concentration (E4), a sphere-partition census (E5), and bound
calibration audits (E6).

Determinism contract: trial i draws from an RNG stream derived from
(master_seed, i) by a fixed 64-bit mix, so rows are a pure function of the
config; serial and parallel execution produce identical rows, and re-emitting
a result yields byte-identical CSV. Wall-clock runtime lives only in the JSON
summary and is excluded from that contract.
"""
from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import calibration, constants
from .distributions import EntryDistribution, RADEMACHER, parse_dist_spec, sample
from .errors import ConfigError, RegimeError
from .matrices import operator_norm, sample_matrix, spectral_summary
from .rng import derive_stream, derive_substream_seed
from .small_ball import clopper_pearson, empirical_sup_concentration
from .sphere_profile import (
    PartitionParams,
    classify_profile,
    classify_sphere,
    min_half_subset_ssq,
    sample_allocation,
)

__all__ = [
    "EXPERIMENTS",
    "ExperimentConfig",
    "ExperimentResult",
    "derive_stream",
    "emit",
    "parse_config",
    "parse_config_file",
    "run",
]

EXPERIMENTS = (
    "E1_sigma_min_tail",
    "E2_op_norm",
    "E2b_peaked",
    "E3_regular_smallball",
    "E4_allocation",
    "E5_profile_census",
    "E6_bound_calibration",
)

_MAX_SEED = 2**64


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    experiment: str
    dist: EntryDistribution = RADEMACHER
    n_list: tuple[int, ...] = (100,)
    trials: int = 1
    master_seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if not isinstance(self.trials, int) or self.trials < 1:
            raise ConfigError(f"trials={self.trials!r} must be a positive integer")
        n_list = tuple(int(n) for n in self.n_list)
        if not n_list or any(n < 1 for n in n_list):
            raise ConfigError(f"n_list={self.n_list!r} must be nonempty positive dimensions")
        object.__setattr__(self, "n_list", n_list)
        if not isinstance(self.master_seed, int) or not 0 <= self.master_seed < _MAX_SEED:
            raise ConfigError(f"master_seed={self.master_seed!r} must be a 64-bit integer")
        if not isinstance(self.dist, EntryDistribution):
            raise ConfigError("dist must be an EntryDistribution")

    def param(self, key: str, default=None):
        return self.params.get(key, default)

    def require(self, key: str):
        if key not in self.params:
            raise ConfigError(f"experiment {self.experiment} requires params.{key}")
        return self.params[key]


@dataclass(frozen=True, eq=False)
class ExperimentResult:
    config: ExperimentConfig
    columns: tuple[str, ...]
    rows: tuple[tuple, ...]
    summary: dict
    runtime_seconds: float


# -------------------------------------------------------------- config files


def _parse_scalar(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def parse_config(text: str, overrides: dict | None = None) -> ExperimentConfig:
    """Flat key=value config text; keys match ExperimentConfig fields, with
    experiment-specific entries spelled params.<name>."""
    fields: dict = {}
    params: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key.startswith("params."):
            params[key[len("params.") :]] = _parse_scalar(value)
        elif key in ("experiment", "dist", "n_list", "trials", "master_seed"):
            fields[key] = value
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    for key, value in (overrides or {}).items():
        if key == "params":
            params.update(value)
        else:
            fields[key] = value
    if "experiment" not in fields:
        raise ConfigError("missing required key: experiment")
    try:
        kwargs = {"experiment": fields["experiment"], "params": params}
        if "dist" in fields:
            d = fields["dist"]
            kwargs["dist"] = d if isinstance(d, EntryDistribution) else parse_dist_spec(d)
        if "n_list" in fields:
            nl = fields["n_list"]
            if isinstance(nl, str):
                nl = tuple(int(part) for part in nl.split(",") if part.strip())
            kwargs["n_list"] = tuple(nl)
        if "trials" in fields:
            kwargs["trials"] = int(fields["trials"])
        if "master_seed" in fields:
            kwargs["master_seed"] = int(fields["master_seed"])
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    return ExperimentConfig(**kwargs)


def parse_config_file(path: str, overrides: dict | None = None) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read(), overrides)


# ------------------------------------------------------------------ summaries

_QUANTS = (("p05", 0.05), ("p25", 0.25), ("p50", 0.50), ("p75", 0.75), ("p95", 0.95))


def _quantiles(values) -> dict:
    arr = np.asarray(values, dtype=float)
    out = {name: float(np.quantile(arr, q)) for name, q in _QUANTS}
    out["mean"] = float(arr.mean())
    return out


def _freq(count: int, total: int) -> dict:
    lo, hi = clopper_pearson(count, total)
    return {"count": int(count), "freq": count / total, "ci95": [lo, hi]}


def _linfit(ts, qs) -> dict:
    t = np.asarray(ts, dtype=float)
    y = np.asarray(qs, dtype=float)
    tbar, ybar = t.mean(), y.mean()
    stt = float(np.sum((t - tbar) ** 2))
    slope = float(np.sum((t - tbar) * (y - ybar)) / stt)
    intercept = float(ybar - slope * tbar)
    resid = y - (slope * t + intercept)
    sst = float(np.sum((y - ybar) ** 2))
    r2 = 1.0 if sst == 0.0 else 1.0 - float(np.sum(resid**2)) / sst
    return {"slope": slope, "intercept": intercept, "r_squared": r2}


# ---------------------------------------------------------------- experiments


def _spike_vector(n: int, spikes: int) -> np.ndarray:
    if not 1 <= spikes <= n:
        raise ConfigError(f"spike count {spikes} outside 1..{n}")
    x = np.zeros(n)
    x[:spikes] = 1.0 / math.sqrt(spikes)
    return x


def _tasks_matrix(config: ExperimentConfig):
    return [(i, n) for i, n in enumerate(n for n in config.n_list for _ in range(config.trials))]


def _run_e1(config, payload):
    idx, n = payload
    seed = derive_substream_seed(config.master_seed, idx)
    summ = spectral_summary(sample_matrix(config.dist, n, seed))
    return [
        (
            idx,
            n,
            config.dist.spec_string(),
            seed,
            summ.sigma_min,
            summ.op_norm,
            int(summ.singular_flag),
            0,
        )
    ]


def _summary_e1(config, rows):
    eps = float(config.param("eps", constants.SIGMA_TAIL_EPS))
    coeff = float(config.param("coeff", constants.SIGMA_TAIL_COEFF))
    per_n = {}
    for n in config.n_list:
        sub = [r for r in rows if r[1] == n]
        sigmas = np.array([r[4] for r in sub])
        thr = eps * coeff * n**-1.5
        count = int(np.count_nonzero(sigmas < thr))
        per_n[str(n)] = {
            "tail_threshold": thr,
            "tail": _freq(count, len(sub)),
            "singular_count": int(sum(r[6] for r in sub)),
            "sigma_sqrt_n": _quantiles(sigmas * math.sqrt(n)),
            "sigma_n32_p05": float(np.quantile(sigmas * n**1.5, 0.05)),
        }
    return {"eps": eps, "coeff": coeff, "per_n": per_n}


def _run_e2(config, payload):
    idx, n = payload
    seed = derive_substream_seed(config.master_seed, idx)
    coeff = float(config.param("coeff", constants.OP_NORM_COEFF))
    rep = operator_norm(sample_matrix(config.dist, n, seed))
    exceed = int(rep.value > coeff * math.sqrt(n))
    return [(idx, n, config.dist.spec_string(), seed, rep.value, exceed, 0)]


def _summary_e2(config, rows):
    coeff = float(config.param("coeff", constants.OP_NORM_COEFF))
    per_n = {}
    for n in config.n_list:
        sub = [r for r in rows if r[1] == n]
        norms = np.array([r[4] for r in sub])
        count = int(sum(r[5] for r in sub))
        per_n[str(n)] = {
            "threshold": coeff * math.sqrt(n),
            "exceed": _freq(count, len(sub)),
            "op_norm_over_sqrt_n": _quantiles(norms / math.sqrt(n)),
        }
    return {"coeff": coeff, "per_n": per_n}


def _run_e2b(config, payload):
    idx, n = payload
    seed = derive_substream_seed(config.master_seed, idx)
    spikes = int(config.param("spikes", 2))
    coeff = float(config.param("coeff", constants.PEAKED_NORM_COEFF))
    A = sample_matrix(config.dist, n, seed)
    ax = float(np.linalg.norm(A.entries @ _spike_vector(n, spikes)))
    small = int(ax <= coeff * math.sqrt(n))
    return [(idx, n, config.dist.spec_string(), seed, ax, small, 0)]


def _summary_e2b(config, rows):
    coeff = float(config.param("coeff", constants.PEAKED_NORM_COEFF))
    per_n = {}
    for n in config.n_list:
        sub = [r for r in rows if r[1] == n]
        norms = np.array([r[4] for r in sub])
        count = int(sum(r[5] for r in sub))
        per_n[str(n)] = {
            "threshold": coeff * math.sqrt(n),
            "small": _freq(count, len(sub)),
            "ax_over_sqrt_n": _quantiles(norms / math.sqrt(n)),
        }
    return {"coeff": coeff, "spikes": int(config.param("spikes", 2)), "per_n": per_n}


def _e3_settings(config):
    delta = float(config.require("delta"))
    q = float(config.require("q"))
    params = PartitionParams(
        r=float(config.param("r", 0.9)), R=float(config.param("R", 1.3))
    )
    band = (float(config.param("band_lo", 0.9)), float(config.param("band_hi", 1.1)))
    return delta, q, params, band


def _run_e3(config, payload):
    from .sphere_profile import sample_spread_direction

    idx = payload[0]
    n = config.n_list[0]
    delta, q, params, band = _e3_settings(config)
    t_steps = int(config.param("t_steps", 8))
    mc = int(config.param("mc_samples", 200_000))
    max_tries = int(config.param("max_tries", 200))
    rng = derive_stream(config.master_seed, idx)
    cls = None
    for _ in range(max_tries):
        x = sample_spread_direction(n, params, rng, band=band)
        cls = classify_profile(x, params, delta, q)
        if cls.verdict == "regular" and cls.halasz_regime:
            break
    else:
        raise RegimeError("no regular vector sampled within max_tries")
    sums = np.empty(mc)
    done = 0
    block = max(1, 5_000_000 // n)
    while done < mc:
        b = min(block, mc - done)
        sums[done : done + b] = sample(config.dist, rng, size=(b, n)) @ x
        done += b
    seed = derive_substream_seed(config.master_seed, idx)
    rows = []
    for mult in range(1, t_steps + 1):
        t = mult * delta
        q_hat = empirical_sup_concentration(sums, t)
        rows.append(
            (idx, n, config.dist.spec_string(), seed, t, q_hat, cls.min_ssq, cls.threshold, 0)
        )
    return rows


def _summary_e3(config, rows):
    delta, q, _, _ = _e3_settings(config)
    c_fit = constants.FITTED["regular_smallball"]
    per_vector = {}
    ratios = []
    for idx in sorted({r[0] for r in rows}):
        sub = sorted((r for r in rows if r[0] == idx), key=lambda r: r[4])
        ts = [r[4] for r in sub]
        qs = [r[5] for r in sub]
        fit = _linfit(ts, qs)
        vec_ratios = [qh / (c_fit * q * t) for t, qh in zip(ts, qs)]
        ratios.extend(vec_ratios)
        fit["max_ratio_vs_bound"] = max(vec_ratios)
        per_vector[str(idx)] = fit
    return {
        "delta": delta,
        "q": q,
        "constant": c_fit,
        "per_vector": per_vector,
        "min_slope": min(v["slope"] for v in per_vector.values()),
        "min_r_squared": min(v["r_squared"] for v in per_vector.values()),
        "max_ratio_vs_bound": max(ratios),
        "all_under_bound": bool(max(ratios) <= 1.0),
    }


def _e4_sizes(config):
    l = int(config.param("l", config.n_list[0]))
    k = int(config.param("k", l))
    return l, k


def _run_e4(config, payload):
    idx = payload[0]
    l, k = _e4_sizes(config)
    seed = derive_substream_seed(config.master_seed, idx)
    instance = sample_allocation(l, k, derive_stream(config.master_seed, idx))
    min_ssq, _ = min_half_subset_ssq(instance.occupancy, math.ceil(l / 2))
    stat = min_ssq * k / l**2
    return [(idx, l, k, seed, min_ssq, stat, 0)]


def _summary_e4(config, rows):
    l, k = _e4_sizes(config)
    stats = np.array([r[5] for r in rows])
    exceed = int(np.count_nonzero(stats >= constants.ALLOCATION_C_HALF))
    qs = _quantiles(stats)
    qs["p90"] = float(np.quantile(stats, 0.90))
    qs["p99"] = float(np.quantile(stats, 0.99))
    qs["max"] = float(stats.max())
    return {
        "l": l,
        "k": k,
        "stat": qs,
        "reference_c_half": constants.ALLOCATION_C_HALF,
        "exceed_reference": _freq(exceed, len(rows)),
    }


def _e5_settings(config):
    params = PartitionParams(
        r=float(config.param("r", constants.DEFAULT_R_LOWER)),
        R=float(config.param("R", constants.DEFAULT_R_UPPER)),
    )
    return float(config.require("delta")), float(config.require("q")), params


def _run_e5(config, payload):
    idx, n = payload
    delta, q, params = _e5_settings(config)
    rng = derive_stream(config.master_seed, idx)
    seed = derive_substream_seed(config.master_seed, idx)
    # census over uniform sphere directions, independent of config.dist
    while True:
        g = rng.standard_normal(n)
        norm = np.linalg.norm(g)
        if norm > 0:
            break
    x = g / norm
    sphere_class, _ = classify_sphere(x, params)
    if sphere_class == "V_P":
        verdict, min_ssq = "peaked", float("nan")
    else:
        cls = classify_profile(x, params, delta, q)
        verdict, min_ssq = cls.verdict, cls.min_ssq
    return [(idx, n, config.dist.spec_string(), seed, sphere_class, verdict, min_ssq, 0)]


def _summary_e5(config, rows):
    delta, q, params = _e5_settings(config)
    per_n = {}
    for n in config.n_list:
        sub = [r for r in rows if r[1] == n]
        counts = {name: sum(1 for r in sub if r[5] == name) for name in ("peaked", "regular", "singular")}
        per_n[str(n)] = {name: _freq(c, len(sub)) for name, c in counts.items()}
    return {"delta": delta, "q": q, "r": params.r, "R": params.R, "per_n": per_n}


def _e6_queries(config):
    per_bound = int(config.param("per_bound", 50))
    queries = []
    for bound in calibration.DOMINATION_BOUNDS:
        queries.extend(calibration.build_corpus(bound, config.master_seed, per_bound))
    return queries


def _run_e6(config, payload):
    idx, query = payload
    res = calibration.evaluate_query(query)
    c = constants.FITTED[query.bound]
    dominated = int(res.exact <= c * res.bound_value * (1.0 + 1e-12))
    return [
        (
            idx,
            query.bound,
            query.dist.spec_string(),
            query.x.size,
            res.exact,
            res.bound_value,
            res.ratio,
            dominated,
            0,
        )
    ]


def _summary_e6(config, rows):
    per_bound = {}
    for bound in calibration.DOMINATION_BOUNDS:
        sub = [r for r in rows if r[1] == bound]
        per_bound[bound] = {
            "constant": constants.FITTED[bound],
            "frozen_raw": constants.FITTED_RAW[bound],
            "count": len(sub),
            "dominated": _freq(int(sum(r[7] for r in sub)), len(sub)),
            "max_ratio": max(r[6] for r in sub),
        }
    return {
        "margin": constants.CALIBRATION_MARGIN,
        "per_bound": per_bound,
        "all_dominated": all(
            v["dominated"]["count"] == v["count"] for v in per_bound.values()
        ),
    }


_RUNNERS = {
    "E1_sigma_min_tail": (
        ("trial", "n", "dist", "seed", "sigma_min", "op_norm", "singular_flag", "elapsed_ms"),
        _tasks_matrix,
        _run_e1,
        _summary_e1,
    ),
    "E2_op_norm": (
        ("trial", "n", "dist", "seed", "op_norm", "exceed_flag", "elapsed_ms"),
        _tasks_matrix,
        _run_e2,
        _summary_e2,
    ),
    "E2b_peaked": (
        ("trial", "n", "dist", "seed", "ax_norm", "small_flag", "elapsed_ms"),
        _tasks_matrix,
        _run_e2b,
        _summary_e2b,
    ),
    "E3_regular_smallball": (
        ("trial", "n", "dist", "seed", "t", "q_hat", "min_ssq", "threshold", "elapsed_ms"),
        lambda cfg: [(i,) for i in range(cfg.trials)],
        _run_e3,
        _summary_e3,
    ),
    "E4_allocation": (
        ("trial", "l", "k", "seed", "min_ssq", "stat", "elapsed_ms"),
        lambda cfg: [(i,) for i in range(cfg.trials)],
        _run_e4,
        _summary_e4,
    ),
    "E5_profile_census": (
        ("trial", "n", "dist", "seed", "sphere_class", "verdict", "min_ssq", "elapsed_ms"),
        _tasks_matrix,
        _run_e5,
        _summary_e5,
    ),
    "E6_bound_calibration": (
        ("trial", "bound", "dist", "m", "exact", "bound_value", "ratio", "dominated", "elapsed_ms"),
        lambda cfg: list(enumerate(_e6_queries(cfg))),
        lambda cfg, p: _run_e6(cfg, p),
        _summary_e6,
    ),
}


def run(config: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    """Execute every trial of the config and assemble rows plus summary.

    workers > 1 runs trials on a thread pool; the row set is identical to the
    serial run because each trial is a pure function of (config, index).
    """
    if config.experiment == "E3_regular_smallball" and len(config.n_list) != 1:
        raise ConfigError("E3 uses a single dimension in n_list")
    columns, make_tasks, run_task, summarize = _RUNNERS[config.experiment]
    tasks = make_tasks(config)
    start = time.perf_counter()

    def guarded(payload):
        try:
            return run_task(config, payload)
        except RegimeError as exc:
            raise RegimeError(f"trial {payload[0]}: {exc}") from exc

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(guarded, tasks))
    else:
        chunks = [guarded(p) for p in tasks]
    # stable sort by trial index; within-trial row order is the task's own
    rows = tuple(sorted((row for chunk in chunks for row in chunk), key=lambda r: r[0]))
    runtime = time.perf_counter() - start
    summary = {"experiment": config.experiment, **summarize(config, rows)}
    summary["runtime_seconds"] = runtime
    return ExperimentResult(
        config=config, columns=columns, rows=rows, summary=summary, runtime_seconds=runtime
    )


def recompute_summary(result: ExperimentResult) -> dict:
    """Summary rebuilt from (config, rows) alone; equals result.summary up to
    the runtime_seconds entry."""
    summarize = _RUNNERS[result.config.experiment][3]
    return {"experiment": result.config.experiment, **summarize(result.config, result.rows)}


# -------------------------------------------------------------------- emit


def _format_cell(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _format_param(value) -> str:
    return _format_cell(value)


def config_echo(config: ExperimentConfig) -> dict:
    return {
        "experiment": config.experiment,
        "dist": config.dist.spec_string(),
        "n_list": list(config.n_list),
        "trials": config.trials,
        "master_seed": config.master_seed,
        "params": {k: config.params[k] for k in sorted(config.params)},
    }


def _config_line(config: ExperimentConfig) -> str:
    parts = [
        f"experiment={config.experiment}",
        f"dist={config.dist.spec_string()}",
        "n_list=" + ",".join(str(n) for n in config.n_list),
        f"trials={config.trials}",
        f"master_seed={config.master_seed}",
    ]
    parts += [f"params.{k}={_format_param(config.params[k])}" for k in sorted(config.params)]
    return " ".join(parts)


def emit(result: ExperimentResult, format: str = "csv", path: str | None = None) -> str:
    """Serialize a result; returns the text and writes it to path if given.

    CSV carries the per-trial rows (deterministic bytes); JSON carries the
    summary. Both embed the config echo and artifact version.
    """
    if format == "csv":
        lines = [
            f"# artifact={constants.ARTIFACT_NAME}/{constants.ARTIFACT_VERSION}",
            f"# config {_config_line(result.config)}",
            ",".join(result.columns),
        ]
        lines += [",".join(_format_cell(v) for v in row) for row in result.rows]
        text = "\n".join(lines) + "\n"
    elif format == "json":
        text = (
            json.dumps(
                {
                    "artifact": {
                        "name": constants.ARTIFACT_NAME,
                        "version": constants.ARTIFACT_VERSION,
                    },
                    "config": config_echo(result.config),
                    "summary": result.summary,
                },
                sort_keys=True,
                indent=2,
                allow_nan=True,
            )
            + "\n"
        )
    else:
        raise ValueError(f"unknown format {format!r}")
    if path is not None:
        try:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc}") from exc
    return text
