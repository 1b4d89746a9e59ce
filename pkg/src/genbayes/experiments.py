"""Experiment harnesses behind the CLI.

Each run_* function resolves a config (defaults overridden by the caller's
partial config), executes data generation -> optional weight calibration ->
MCMC -> diagnostics -> optional predictive, and writes a flat directory of
delimited/JSON outputs.  Every artifact carries the resolved config hash and
master seed; everything except measured timings is byte-reproducible from
(config, seed).

Per-purpose RNG streams are derived from the master seed with fixed indices:
1 data, 2 calibration, 3 predictive, 5 synthetic benchmark data, 100+i for
chain i.
"""

import hashlib
import json
import math
import time
from pathlib import Path

import numpy as np

from .calibration import (
    BootstrapConfig,
    OptimizerConfig,
    calibrate,
    default_init,
    graphical_init,
)
from .domains import count_domain
from .losses import (
    AgreementKernel,
    Dataset,
    DfdLoss,
    KsdLoss,
    PseudoNllLoss,
    WeightedAgreementKernel,
)
from .models import (
    CmpGraphicalModel,
    CmpModel,
    IsingModel,
    PoissonGraphicalModel,
    default_transform,
)
from .posterior import (
    ChiSquaredPrior,
    CmpTruncatedNllLoss,
    CompositePrior,
    GeneralisedPosterior,
    HalfNormalPrior,
    NormalPrior,
)
from .samplers import (
    MalaConfig,
    RwmhConfig,
    chain_set_metadata,
    derive_seed,
    gelman_rubin,
    mala_sample,
    rwmh_sample,
    stream,
    write_chain_csv,
)
from .simulate import (
    SimConfig,
    cmp_sample,
    ising_simulate,
    pgm_gibbs_sample,
    posterior_predictive,
    write_dataset_csv,
)

_SEED_DATA = 1
_SEED_CALIB = 2
_SEED_PREDICTIVE = 3
_SEED_SYNTH = 5
_SEED_CHAIN_BASE = 100


class ConfigError(Exception):
    """Invalid or inconsistent run configuration."""


# ---------------------------------------------------------------------------
# Config plumbing

CMP_DEFAULTS = {
    "experiment": "cmp",
    "theta_star": [4.0, 0.75],
    "n": 2000,
    "losses": ["dfd"],
    "beta": "auto",
    "bootstrap_B": 100,
    "chains": 10,
    "sampler": {"kind": "rwmh", "sigma": 0.1, "n_samples": 500,
                "burn_in": 5000, "thin": 10},
    "predictive": {"theta_stride": 10, "draws_per_theta": 200},
    "data_path": None,
}

ISING_DEFAULTS = {
    "experiment": "ising",
    "m": 6,
    "theta_star": 5.0,
    "n": 500,
    "sim_iters_factor": 100,
    "losses": ["dfd", "ksd"],
    "beta": "auto",
    "bootstrap_B": 40,
    "chains": 5,
    "sampler": {"kind": "rwmh", "sigma": 0.25, "n_samples": 100,
                "burn_in": 2000, "thin": 20},
    "data_path": None,
}

PGM_DEFAULTS = {
    "experiment": "pgm",
    "model": "pgm",
    "d": 3,
    "edges": [[0, 1], [1, 2]],
    "theta_star": [0.8, 0.8, 0.8, 0.15, 0.15],
    "n": 400,
    "sim_sweeps": 50,
    "losses": ["dfd"],
    "beta": "auto",
    "bootstrap_B": 40,
    "chains": 4,
    "sampler": {"kind": "mala", "step_size": 0.05, "n_samples": 100,
                "burn_in": 5000, "thin": 50},
    "predictive": {"theta_stride": 8, "draws_per_theta": 200},
    "data_path": None,
}

ROBUSTNESS_DEFAULTS = {
    "experiment": "robustness",
    "m": 6,
    "theta_star": 5.0,
    "n": 500,
    "sim_iters_factor": 100,
    "epsilon": 0.1,
    "losses": ["dfd", "ksd_weighted"],
    "beta": "auto",
    "beta_policy": "calibrated-on-clean",
    "bootstrap_B": 40,
    "chains": 4,
    "sampler": {"kind": "rwmh", "sigma": 0.25, "n_samples": 100,
                "burn_in": 2000, "thin": 20},
}

COST_DEFAULTS = {
    "experiment": "cost",
    "m": 6,
    "theta_eval": 5.0,
    "ns": [1000, 2000, 4000, 8000, 16000],
    "repeats": 3,
}

_DEFAULTS = {
    "cmp": CMP_DEFAULTS,
    "ising": ISING_DEFAULTS,
    "pgm": PGM_DEFAULTS,
    "robustness": ROBUSTNESS_DEFAULTS,
    "cost": COST_DEFAULTS,
}


def resolve_config(name, overrides, seed):
    """Defaults for the named experiment, shallow-merged with overrides
    (nested sampler/predictive dicts merge key-wise), plus the seed."""
    if name not in _DEFAULTS:
        raise ConfigError("unknown experiment %r" % (name,))
    cfg = json.loads(json.dumps(_DEFAULTS[name]))   # deep copy
    overrides = dict(overrides or {})
    for key, val in overrides.items():
        if key not in cfg and key not in ("seed", "threads"):
            raise ConfigError("unknown config key %r for experiment %s"
                              % (key, name))
        if isinstance(val, dict) and isinstance(cfg.get(key), dict):
            cfg[key].update(val)
        else:
            cfg[key] = val
    if seed is None:
        raise ConfigError("a master seed is required")
    cfg["seed"] = int(seed)
    return cfg


def config_hash(cfg):
    clean = {k: v for k, v in cfg.items() if k != "config_hash"}
    blob = json.dumps(clean, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _write_json(path, obj):
    Path(path).write_text(
        json.dumps(obj, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Model/loss/prior assembly

def build_model(cfg):
    kind = cfg["experiment"]
    if kind == "cmp":
        return CmpModel()
    if kind in ("ising", "robustness", "cost"):
        return IsingModel(cfg["m"])
    if kind == "pgm":
        edges = [tuple(e) for e in cfg["edges"]]
        if cfg["model"] == "cmppgm":
            return CmpGraphicalModel(cfg["d"], edges)
        if cfg["model"] == "pgm":
            return PoissonGraphicalModel(cfg["d"], edges)
        raise ConfigError("unknown graphical model %r" % (cfg["model"],))
    raise ConfigError("unknown experiment %r" % (kind,))


def build_prior(model):
    if isinstance(model, CmpModel):
        return ChiSquaredPrior(2)
    if isinstance(model, IsingModel):
        return ChiSquaredPrior(1)
    if isinstance(model, PoissonGraphicalModel):
        d, E = model.dim_x, model.n_edges
        blocks = [(NormalPrior(d, scale=1.0), np.arange(d))]
        if E:
            inter_scale = 1.0 / (d * (d - 1) / 2.0)
            blocks.append((HalfNormalPrior(E, scale=inter_scale),
                           np.arange(d, d + E)))
        if isinstance(model, CmpGraphicalModel):
            blocks.append((HalfNormalPrior(d, scale=1.0 / math.sqrt(2.0)),
                           np.arange(d + E, 2 * d + E)))
        return CompositePrior(blocks)
    raise ConfigError("no prior rule for model %r" % (type(model).__name__,))


def build_loss(kind, model, data):
    if kind == "dfd":
        return DfdLoss(model, data)
    if kind == "ksd":
        return KsdLoss(model, data)
    if kind == "ksd_weighted":
        return KsdLoss(model, data,
                       kernel=WeightedAgreementKernel(model.domain))
    if kind == "pseudo":
        return PseudoNllLoss(model, data)
    if kind == "standard-bayes-cmp":
        if not isinstance(model, CmpModel):
            raise ConfigError("standard-bayes-cmp applies to the CMP model")
        return CmpTruncatedNllLoss(data)
    raise ConfigError("unknown loss %r" % (kind,))


def _init_z(model, prior, transform):
    if isinstance(model, PoissonGraphicalModel):
        return graphical_init(transform)
    return default_init(prior, transform)


def ingest_counts(path):
    """Strict count-data reader: headerless single column, or d columns
    under a header x_0..x_{d-1}; every entry a nonnegative integer."""
    path = Path(path)
    raw = path.read_text().splitlines()
    lines = [(i + 1, ln.strip()) for i, ln in enumerate(raw) if ln.strip()]
    if not lines:
        raise ConfigError("%s: empty file" % path)
    first = lines[0][1]
    has_header = first.split(",")[0].strip() == "x_0"
    d = None
    if has_header:
        cols = [c.strip() for c in first.split(",")]
        if cols != ["x_%d" % j for j in range(len(cols))]:
            raise ConfigError("%s: line 1: malformed header %r"
                              % (path, first))
        d = len(cols)
        lines = lines[1:]
        if not lines:
            raise ConfigError("%s: no data rows" % path)
    rows = []
    for lineno, ln in lines:
        parts = [p.strip() for p in ln.split(",")]
        if d is None:
            d = len(parts)
        if len(parts) != d:
            raise ConfigError("%s: line %d: expected %d columns, got %d"
                              % (path, lineno, d, len(parts)))
        row = []
        for p in parts:
            try:
                v = int(p)
            except ValueError:
                raise ConfigError("%s: line %d: non-integer entry %r"
                                  % (path, lineno, p)) from None
            if v < 0:
                raise ConfigError("%s: line %d: negative entry %d"
                                  % (path, lineno, v))
            row.append(v)
        rows.append(row)
    return Dataset(count_domain(d), np.asarray(rows, dtype=np.int64))


# ---------------------------------------------------------------------------
# Shared pipeline pieces

def _simulate_data(cfg, model, seed):
    kind = cfg["experiment"]
    if kind == "cmp":
        return cmp_sample(cfg["theta_star"], cfg["n"], seed)
    if kind in ("ising", "robustness"):
        iters = cfg["sim_iters_factor"] * model.dim_x
        return ising_simulate(model, cfg["theta_star"],
                              SimConfig(cfg["n"], iters, seed))
    if kind == "pgm":
        return pgm_gibbs_sample(model, np.asarray(cfg["theta_star"], float),
                                cfg["n"], cfg["sim_sweeps"], seed)
    raise ConfigError("no simulator for experiment %r" % (kind,))


def _get_data(cfg, model, master_seed):
    if cfg.get("data_path"):
        ds = ingest_counts(cfg["data_path"])
        if ds.d != model.dim_x:
            raise ConfigError("data has d=%d but the model needs d=%d"
                              % (ds.d, model.dim_x))
        return Dataset(model.domain, ds.X), "file:%s" % cfg["data_path"]
    return (_simulate_data(cfg, model, derive_seed(master_seed, _SEED_DATA)),
            "simulated")


def _sampler_config(spec, seed):
    spec = dict(spec)
    kind = spec.pop("kind")
    if kind == "rwmh":
        return RwmhConfig(seed=seed, **spec)
    if kind == "mala":
        return MalaConfig(seed=seed, **spec)
    raise ConfigError("unknown sampler kind %r" % (kind,))


def _run_chains(posterior, transform, z0, cfg, master_seed, threads=1):
    spec = cfg["sampler"]
    n_chains = cfg["chains"]
    if n_chains < 2:
        raise ConfigError("need at least 2 chains for diagnostics")

    def one(i):
        scfg = _sampler_config(spec, derive_seed(master_seed,
                                                 _SEED_CHAIN_BASE + i))
        if spec["kind"] == "mala":
            target = lambda z: (posterior.log_density_unconstrained(z),
                                posterior.grad_log_density_unconstrained(z))
            return mala_sample(target, transform, z0, scfg)
        target = posterior.log_density_unconstrained
        return rwmh_sample(target, transform, z0, scfg)

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(one, range(n_chains)))
    return [one(i) for i in range(n_chains)]


def _pooled(chains):
    return np.concatenate([c.draws for c in chains], axis=0)


def _skewness(draws):
    m = draws.mean(axis=0)
    s = draws.std(axis=0, ddof=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        sk = ((draws - m) ** 3).mean(axis=0) / s ** 3
    return np.where(s > 0, sk, 0.0)


def _summarise(chains, beta, beta_source, cfg, loss_name, data_d,
               extra=None):
    pooled = _pooled(chains)
    rhat = gelman_rubin(chains)
    lo, hi = np.quantile(pooled, [0.025, 0.975], axis=0)
    out = {
        "loss": loss_name,
        "beta": float(beta),
        "beta_source": beta_source,
        "n": cfg["n"],
        "d": int(data_d),
        "posterior_mean": pooled.mean(axis=0).tolist(),
        "posterior_sd": pooled.std(axis=0, ddof=1).tolist(),
        "ci_lower": lo.tolist(),
        "ci_upper": hi.tolist(),
        "rhat": [float(v) for v in rhat],
        "skewness": _skewness(pooled).tolist(),
        "acceptance_rates": [c.acceptance_rate for c in chains],
        "warnings": sum((list(c.warnings) for c in chains), []),
        "seed": cfg["seed"],
        "config_hash": cfg["config_hash"],
    }
    if extra:
        out.update(extra)
    return out


def _time_loss_eval(loss, theta, repeats=3):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        loss.value(theta)
        best = min(best, time.perf_counter() - t0)
    return best


def _fit_one_loss(loss_name, data, model, prior, transform, cfg, out_dir,
                  threads, files):
    """Calibrate (if requested) then sample; write artifacts; return
    (summary dict, beta, timing entry)."""
    master = cfg["seed"]
    loss = build_loss(loss_name, model, data)
    beta_cfg = cfg["beta"]
    calib = None
    if loss_name == "standard-bayes-cmp":
        beta, beta_source = 1.0, "fixed-comparator"
    elif beta_cfg == "auto":
        opt = OptimizerConfig(init=tuple(_init_z(model, prior, transform)))
        bcfg = BootstrapConfig(B=cfg["bootstrap_B"],
                               seed=derive_seed(master, _SEED_CALIB),
                               optimizer=opt)
        calib = calibrate(data, lambda ds: build_loss(loss_name, model, ds),
                          prior, transform, bcfg, threads=threads)
        beta, beta_source = calib.beta_star, "auto"
    else:
        beta, beta_source = float(beta_cfg), "fixed"

    if calib is not None:
        p = Path(out_dir) / ("calibration_%s.json" % loss_name)
        p.write_text(calib.to_json() + "\n")
        files.append(p.name)

    posterior = GeneralisedPosterior(prior, loss, beta, transform)
    z0 = _init_z(model, prior, transform)
    chains = _run_chains(posterior, transform, z0, cfg, master,
                         threads=threads)

    chain_path = Path(out_dir) / ("chains_%s.csv" % loss_name)
    write_chain_csv(chain_path, chains)
    files.append(chain_path.name)
    meta = chain_set_metadata(chains, master)
    meta.update({"loss": loss_name, "beta": float(beta),
                 "config_hash": cfg["config_hash"]})
    meta_path = Path(out_dir) / ("chains_%s.meta.json" % loss_name)
    _write_json(meta_path, meta)
    files.append(meta_path.name)

    summary = _summarise(chains, beta, beta_source, cfg, loss_name, data.d)
    timing = {"loss": loss_name, "n": data.n, "d": data.d,
              "seconds_per_loss_eval": _time_loss_eval(
                  loss, np.asarray(chains[0].draws[-1], dtype=float))}
    return summary, beta, timing, chains


def _write_predictive(cfg, model, chains, loss_name, out_dir, files):
    spec = cfg.get("predictive")
    if not spec:
        return
    pooled = _pooled(chains)
    thetas = pooled[::spec["theta_stride"]]
    _, summary = posterior_predictive(
        thetas, model, spec["draws_per_theta"],
        derive_seed(cfg["seed"], _SEED_PREDICTIVE))
    summary["loss"] = loss_name
    summary["config_hash"] = cfg["config_hash"]
    path = Path(out_dir) / ("predictive_%s.json" % loss_name)
    _write_json(path, summary)
    files.append(path.name)


def _finish(cfg, out_dir, files, summaries, timings):
    _write_json(Path(out_dir) / "timing.json", timings)
    files.append("timing.json")
    _write_json(Path(out_dir) / "config.json", cfg)
    files.append("config.json")
    return {"out_dir": str(out_dir), "config": cfg, "files": sorted(files),
            "summaries": summaries}


def _start(name, overrides, seed, out_dir):
    cfg = resolve_config(name, overrides, seed)
    cfg["config_hash"] = config_hash(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return cfg, out


# ---------------------------------------------------------------------------
# Experiments

def _run_standard(name, overrides, seed, out_dir, threads, predictive):
    cfg, out = _start(name, overrides, seed, out_dir)
    model = build_model(cfg)
    if name == "pgm" and len(cfg["theta_star"]) != model.dim_theta:
        raise ConfigError("theta_star has length %d, model needs %d"
                          % (len(cfg["theta_star"]), model.dim_theta))
    prior = build_prior(model)
    transform = default_transform(model)
    data, source = _get_data(cfg, model, cfg["seed"])
    files = []
    _write_data(cfg, out, data, source, files)

    summaries, timings = {}, []
    for loss_name in cfg["losses"]:
        summary, beta, timing, chains = _fit_one_loss(
            loss_name, data, model, prior, transform, cfg, out, threads,
            files)
        if predictive:
            _write_predictive(cfg, model, chains, loss_name, out, files)
        spath = out / ("summary_%s.json" % loss_name)
        _write_json(spath, summary)
        files.append(spath.name)
        summaries[loss_name] = summary
        timings.append(timing)
    return _finish(cfg, out, files, summaries, timings)


def run_cmp(overrides, seed, out_dir, threads=1):
    return _run_standard("cmp", overrides, seed, out_dir, threads,
                         predictive=True)


def run_ising(overrides, seed, out_dir, threads=1):
    return _run_standard("ising", overrides, seed, out_dir, threads,
                         predictive=False)


def run_pgm(overrides, seed, out_dir, threads=1):
    return _run_standard("pgm", overrides, seed, out_dir, threads,
                         predictive=True)


def run_robustness(overrides, seed, out_dir, threads=1):
    """Clean-vs-contaminated comparison: a fraction of rows is replaced by
    the all-ones configuration; each loss keeps the weight calibrated on the
    clean data so the comparison isolates the loss geometry."""
    cfg, out = _start("robustness", overrides, seed, out_dir)
    model = build_model(cfg)
    prior = build_prior(model)
    transform = default_transform(model)
    clean, _ = _get_data(cfg, model, cfg["seed"])
    n_replace = int(math.ceil(cfg["epsilon"] * clean.n))
    Xc = clean.X.copy()
    Xc[:n_replace] = 1
    contam = Dataset(model.domain, Xc)

    files = []
    for tag, ds in (("clean", clean), ("contaminated", contam)):
        write_dataset_csv(out / ("data_%s.csv" % tag), ds)
        files.append("data_%s.csv" % tag)

    summaries, timings = {}, []
    comparison = {}
    for loss_name in cfg["losses"]:
        if cfg["beta"] == "auto":
            opt = OptimizerConfig(
                init=tuple(_init_z(model, prior, transform)))
            bcfg = BootstrapConfig(B=cfg["bootstrap_B"],
                                   seed=derive_seed(cfg["seed"],
                                                    _SEED_CALIB),
                                   optimizer=opt)
            calib = calibrate(clean,
                              lambda ds: build_loss(loss_name, model, ds),
                              prior, transform, bcfg, threads=threads)
            beta, beta_source = calib.beta_star, "auto"
            p = out / ("calibration_%s.json" % loss_name)
            p.write_text(calib.to_json() + "\n")
            files.append(p.name)
        else:
            beta, beta_source = float(cfg["beta"]), "fixed"

        means = {}
        for tag, ds in (("clean", clean), ("contaminated", contam)):
            loss = build_loss(loss_name, model, ds)
            posterior = GeneralisedPosterior(prior, loss, beta, transform)
            z0 = _init_z(model, prior, transform)
            chains = _run_chains(posterior, transform, z0, cfg, cfg["seed"],
                                 threads=threads)
            cpath = out / ("chains_%s_%s.csv" % (loss_name, tag))
            write_chain_csv(cpath, chains)
            files.append(cpath.name)
            summary = _summarise(chains, beta, beta_source, cfg, loss_name,
                                 ds.d, extra={"variant": tag})
            spath = out / ("summary_%s_%s.json" % (loss_name, tag))
            _write_json(spath, summary)
            files.append(spath.name)
            summaries["%s_%s" % (loss_name, tag)] = summary
            means[tag] = np.asarray(summary["posterior_mean"])
            timings.append({"loss": loss_name, "n": ds.n, "d": ds.d,
                            "seconds_per_loss_eval": _time_loss_eval(
                                loss, np.asarray(chains[0].draws[-1],
                                                 dtype=float))})
        comparison[loss_name] = {
            "mean_clean": means["clean"].tolist(),
            "mean_contaminated": means["contaminated"].tolist(),
            "shift": float(np.linalg.norm(means["contaminated"]
                                          - means["clean"])),
            "beta": float(beta),
        }
    rpath = out / "summary_robustness.json"
    _write_json(rpath, {"losses": comparison, "epsilon": cfg["epsilon"],
                        "n_replaced": n_replace, "seed": cfg["seed"],
                        "config_hash": cfg["config_hash"]})
    files.append(rpath.name)
    summaries["robustness"] = comparison
    return _finish(cfg, out, files, summaries, timings)


def run_cost_benchmark(overrides, seed, out_dir, threads=1):
    """Loss-evaluation cost against n at fixed d, on synthetic binary data.

    Times the per-observation evaluation routes (no cell aggregation for
    the Fisher loss, no bucket precompute for the Stein loss) so the
    measured scaling reflects each algorithm's per-datum complexity.
    """
    cfg, out = _start("cost", overrides, seed, out_dir)
    model = build_model(cfg)
    d = model.dim_x
    theta = np.array([float(cfg["theta_eval"])])
    rng_seed = derive_seed(cfg["seed"], _SEED_SYNTH)
    files, timings = [], []
    datasets = [Dataset(model.domain,
                        stream(rng_seed, n).integers(0, 2, size=(n, d)))
                for n in cfg["ns"]]
    # Time one loss family at a time so the other's memory traffic cannot
    # pollute the measurements.
    dfd_secs, ksd_secs = [], []
    for data in datasets:
        dfd = DfdLoss(model, data, aggregate=False)
        dfd_secs.append(_time_loss_eval(dfd, theta, repeats=cfg["repeats"]))
    for data in datasets:
        ksd = KsdLoss(model, data, path="direct")
        ksd_secs.append(_time_loss_eval(ksd, theta, repeats=cfg["repeats"]))
    for n, t_dfd, t_ksd in zip(cfg["ns"], dfd_secs, ksd_secs):
        timings.append({"loss": "dfd", "n": n, "d": d,
                        "seconds_per_loss_eval": t_dfd})
        timings.append({"loss": "ksd", "n": n, "d": d,
                        "seconds_per_loss_eval": t_ksd})
    ns = np.asarray(cfg["ns"], dtype=float)
    slope_dfd = float(np.polyfit(np.log(ns), np.log(dfd_secs), 1)[0])
    slope_ksd = float(np.polyfit(np.log(ns), np.log(ksd_secs), 1)[0])
    spath = out / "summary_cost.json"
    _write_json(spath, {
        "ns": cfg["ns"], "d": d,
        "dfd_seconds": dfd_secs, "ksd_seconds": ksd_secs,
        "slope_dfd": slope_dfd, "slope_ksd": slope_ksd,
        "seed": cfg["seed"], "config_hash": cfg["config_hash"],
    })
    files.append(spath.name)
    summaries = {"cost": {"slope_dfd": slope_dfd, "slope_ksd": slope_ksd,
                          "dfd_seconds": dfd_secs, "ksd_seconds": ksd_secs}}
    return _finish(cfg, out, files, summaries, timings)


# ---------------------------------------------------------------------------
# Standalone pipeline slices (the CLI's simulate/calibrate/sample commands)

def _slice_name(overrides, allowed, what):
    name = dict(overrides or {}).get("experiment", "cmp")
    if name not in allowed:
        raise ConfigError("%s applies to %s configs, not %r"
                          % (what, "/".join(allowed), name))
    return name


def _write_data(cfg, out, data, source, files):
    write_dataset_csv(out / "data.csv", data)
    files.append("data.csv")
    _write_json(out / "data.meta.json",
                {"n": data.n, "d": data.d, "source": source,
                 "seed": cfg["seed"], "config_hash": cfg["config_hash"]})
    files.append("data.meta.json")


def run_simulate(overrides, seed, out_dir, threads=1):
    """Generate (or ingest) the configured dataset and stop."""
    name = _slice_name(overrides, ("cmp", "ising", "pgm", "robustness"),
                       "simulate")
    cfg, out = _start(name, overrides, seed, out_dir)
    model = build_model(cfg)
    data, source = _get_data(cfg, model, cfg["seed"])
    files = []
    _write_data(cfg, out, data, source, files)
    _write_json(out / "config.json", cfg)
    files.append("config.json")
    return {"out_dir": str(out), "config": cfg, "files": sorted(files),
            "n": data.n, "d": data.d}


def run_calibrate(overrides, seed, out_dir, threads=1):
    """Dataset plus bootstrap weight calibration, no MCMC."""
    name = _slice_name(overrides, ("cmp", "ising", "pgm"), "calibrate")
    cfg, out = _start(name, overrides, seed, out_dir)
    model = build_model(cfg)
    prior = build_prior(model)
    transform = default_transform(model)
    data, source = _get_data(cfg, model, cfg["seed"])
    files = []
    _write_data(cfg, out, data, source, files)
    betas = {}
    for loss_name in cfg["losses"]:
        if loss_name == "standard-bayes-cmp":
            betas[loss_name] = 1.0
            continue
        opt = OptimizerConfig(init=tuple(_init_z(model, prior, transform)))
        bcfg = BootstrapConfig(B=cfg["bootstrap_B"],
                               seed=derive_seed(cfg["seed"], _SEED_CALIB),
                               optimizer=opt)
        calib = calibrate(data, lambda ds: build_loss(loss_name, model, ds),
                          prior, transform, bcfg, threads=threads)
        p = out / ("calibration_%s.json" % loss_name)
        p.write_text(calib.to_json() + "\n")
        files.append(p.name)
        betas[loss_name] = calib.beta_star
    _write_json(out / "config.json", cfg)
    files.append("config.json")
    return {"out_dir": str(out), "config": cfg, "files": sorted(files),
            "betas": betas}


def run_sample(overrides, seed, out_dir, threads=1):
    """Full fit (calibration if beta='auto', then chains and summaries)
    without the posterior-predictive stage."""
    name = _slice_name(overrides, ("cmp", "ising", "pgm"), "sample")
    return _run_standard(name, overrides, seed, out_dir, threads,
                         predictive=False)


RUNNERS = {
    "cmp": run_cmp,
    "ising": run_ising,
    "pgm": run_pgm,
    "robustness": run_robustness,
    "cost": run_cost_benchmark,
}
