"""Command-line runner for training, sweeps, spectra, sampling, analysis and
count tables.

Every command reads one JSON config (``--config``), lets ``--seed``,
``--jobs`` and ``--out`` override it, and writes plain CSV/JSON files that
carry the resolved config.  CSV files start with a ``# config=<json>`` line.
Exit codes: 0 ok, 2 config error, 3 numeric error, 4 some sweep runs failed.
"""

import argparse
import copy
import csv
import io
import itertools
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import errors
from .analysis import (
    CountConfig, depth_decoupling, flop_estimate, geodesic_distance, kl_rows, param_count,
    spectral_reach,
)
from .birkhoff import region_vertices, validate_ds
from .optim import TrainConfig, epochs_to_convergence, train
from .params import METHODS, forward, init_params
from .sampling import DS_METHODS, make_rng, sample_ds
from .tasks import (
    MatrixDistanceTask, SpectralTargetTask, make_stream_mix, make_symmetry_break, projected_floor,
)

OUTPUT_ROOT_ENV = "DSPARAM_OUTPUT_ROOT"
MAX_SWEEP_RUNS = 10_000
KINDS = ("train", "sweep", "spectra", "sample", "analyze", "counts")
TASKS = ("stream_mix", "matrix_distance", "spectral", "symmetry_break")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_PARTIAL = 0, 2, 3, 4

CONFIG_ERRORS = (errors.FactorialOverflow, errors.FactorSizeMismatch, errors.LengthMismatch,
                 errors.ShapeMismatch, errors.BadSimplex, ValueError, KeyError, TypeError)

DEFAULTS = {
    "method": "go",
    "d": 4,
    "s": 1,
    "i_k": None,
    "init_scale": 0.1,
    "sk_iterations": 20,
    "task": {
        "kind": "stream_mix",
        "eps": 0.1,
        "sparsity": 0.0,
        "sigma_p": 0.0,
        "n_samples": 100,
        "D": 16,
        "target_method": "sk",
        "target": None,
        "learn_pre": True,
    },
    "train": {"lr": 1e-3, "optimizer": "adam", "beta1": 0.9, "beta2": 0.999, "eps": 1e-8,
              "epochs": 5000, "batch_size": 1},
    "seed": 0,
    "jobs": 1,
    "out": "out",
}


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# config handling


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def resolve_config(doc, seed=None, jobs=None, out=None):
    if "kind" not in doc or doc["kind"] not in KINDS:
        raise ConfigError(f"config 'kind' must be one of {KINDS}")
    cfg = _merge(DEFAULTS, doc)
    if seed is not None:
        cfg["seed"] = seed
    if jobs is not None:
        cfg["jobs"] = jobs
    if out is not None:
        cfg["out"] = out
    _validate(cfg)
    return cfg


def _validate(cfg):
    kind = cfg["kind"]
    if not isinstance(cfg["seed"], int) or cfg["seed"] < 0:
        raise ConfigError("seed must be a nonnegative integer")
    if cfg["jobs"] < 1:
        raise ConfigError("jobs must be >= 1")
    if kind in ("train", "spectra"):
        _validate_run(cfg)
    elif kind == "sweep":
        grid = cfg.get("grid")
        if not isinstance(grid, dict) or not grid:
            raise ConfigError("sweep needs a non-empty 'grid' object")
        for key, values in grid.items():
            if key not in SWEEP_KEYS:
                raise ConfigError(f"cannot sweep over {key!r}; allowed: {sorted(SWEEP_KEYS)}")
            if not isinstance(values, list) or not values:
                raise ConfigError(f"grid range {key!r} is empty")
        n = math.prod(len(v) for v in grid.values())
        if n > MAX_SWEEP_RUNS:
            raise ConfigError(f"sweep has {n} runs, limit is {MAX_SWEEP_RUNS}")
        for point in _grid_points(cfg):
            _validate_run(point)
    elif kind == "sample":
        if cfg.get("sampler", "sk") not in DS_METHODS:
            raise ConfigError(f"sampler must be one of {DS_METHODS}")
        if cfg.get("sampler") == "bvn_dirichlet" and cfg["d"] > 8:
            raise errors.FactorialOverflow("bvn_dirichlet needs d <= 8")
        if cfg.get("n", 10) < 1:
            raise ConfigError("n must be >= 1")
    elif kind == "analyze":
        if cfg.get("analysis") not in ("depth", "matrices"):
            raise ConfigError("analyze needs 'analysis': 'depth' or 'matrices'")
    elif kind == "counts":
        if not cfg.get("d_values"):
            raise ConfigError("counts needs a non-empty 'd_values' list")


def _validate_run(cfg):
    if cfg["method"] not in METHODS:
        raise ConfigError(f"method must be one of {METHODS}")
    if cfg["d"] < 1 or cfg["s"] < 1:
        raise ConfigError("d and s must be >= 1")
    if cfg["task"]["kind"] not in TASKS:
        raise ConfigError(f"task kind must be one of {TASKS}")
    TrainConfig(**cfg["train"], seed=cfg["seed"])
    # building the initial parameters catches size problems (d > 8 for lite, bad factors)
    _init(cfg, make_rng(0))
    if not 0.0 <= cfg["task"]["sparsity"] < 1.0:
        raise ConfigError("sparsity must lie in [0, 1)")


def _factor_sizes(cfg):
    ik = cfg.get("i_k")
    if ik is None:
        return None
    if isinstance(ik, int):
        k = round(math.log(cfg["d"], ik)) if ik > 1 else 0
        if ik < 2 or ik ** k != cfg["d"]:
            raise errors.FactorSizeMismatch(f"d={cfg['d']} is not a power of i_k={ik}")
        return (ik,) * k
    return tuple(ik)


def _init(cfg, rng):
    return init_params(cfg["method"], cfg["d"], rng, s=cfg["s"], factor_sizes=_factor_sizes(cfg),
                       init_scale=cfg["init_scale"], sk_iterations=cfg["sk_iterations"])


# --------------------------------------------------------------------------
# output helpers


NON_RESULT_KEYS = ("out", "jobs")


def embedded_config(cfg):
    """The config as written into outputs; destination and worker count are
    left out so results do not depend on where or how they were produced."""
    return {k: v for k, v in cfg.items() if k not in NON_RESULT_KEYS}


def _config_line(cfg):
    return "# config=" + json.dumps(embedded_config(cfg), sort_keys=True, separators=(",", ":"))


def write_csv(path, cfg, header, rows):
    buf = io.StringIO()
    buf.write(_config_line(cfg) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    Path(path).write_text(buf.getvalue())


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def write_json(path, cfg, body):
    doc = dict(_jsonable(body))
    doc["config"] = embedded_config(cfg)
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def _out_dir(cfg):
    out = Path(cfg["out"])
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not out.is_absolute():
        out = Path(root) / out
    out.mkdir(parents=True, exist_ok=True)
    return out


# --------------------------------------------------------------------------
# train


def build_task(cfg, rng):
    t = cfg["task"]
    d = cfg["d"]
    target = None if t.get("target") is None else np.asarray(t["target"], dtype=np.float64)
    if t["kind"] == "stream_mix":
        return make_stream_mix(d, rng, D=t["D"], n_samples=t["n_samples"], eps=t["eps"],
                               sparsity=t["sparsity"], sigma_p=t["sigma_p"], target=target,
                               target_method=t["target_method"])
    if t["kind"] == "matrix_distance":
        B = target if target is not None else sample_ds(d, t["target_method"], rng)
        return MatrixDistanceTask(d, B)
    if t["kind"] == "spectral":
        e = t.get("eigenvalue")
        e = complex(*e) if e is not None else complex(rng.uniform(-1, 1), rng.uniform(-1, 1))
        return SpectralTargetTask(d, e)
    return make_symmetry_break(d, rng, D=t["D"], n_samples=t["n_samples"], eps=t["eps"],
                               learn_pre=t["learn_pre"], target=target,
                               target_method=t["target_method"])


def _floor(cfg):
    t = cfg["task"]
    if t["kind"] != "stream_mix":
        return None
    sigma_v2 = (1.0 - t["sparsity"]) / 3.0
    return projected_floor(cfg["d"], t["eps"], t["sigma_p"], sigma_v2)


def run_training(cfg):
    """Train one configuration; returns ``(trace, H, summary)``."""
    task = build_task(cfg, make_rng(cfg["seed"], 1))
    tc = TrainConfig(**cfg["train"], seed=cfg["seed"])
    init = _init
    if cfg["task"]["kind"] == "symmetry_break":
        trace = train(task, lambda rng: task.init(init(cfg, rng)), tc)
        mix = trace.params.mix if hasattr(trace.params, "mix") else trace.params
    else:
        trace = train(task, lambda rng: init(cfg, rng), tc)
        mix = trace.params
    H = forward(mix)
    summary = {
        "epochs_to_convergence": epochs_to_convergence(trace),
        "final_loss": trace.final_loss,
        "floor": _floor(cfg),
        "ds_residual": validate_ds(H).residual,
    }
    return trace, H, summary


def _write_train(out, cfg, trace, H, summary):
    write_csv(out / "trace.csv", cfg, ["epoch", "loss", "grad_norm"],
              [(k, l, g) for k, (l, g) in enumerate(zip(trace.loss, trace.grad_norm))])
    write_json(out / "final_matrix.json", cfg, {"matrix": H, "params": trace.params.flat})
    write_json(out / "summary.json", cfg, summary)


def cmd_train(cfg):
    out = _out_dir(cfg)
    trace, H, summary = run_training(cfg)
    _write_train(out, cfg, trace, H, summary)
    return EXIT_OK


# --------------------------------------------------------------------------
# sweep

SWEEP_KEYS = {"method": None, "d": None, "s": None, "i_k": None,
              "eps": "task", "sparsity": "task", "sigma_p": "task"}


def _grid_points(cfg):
    grid = cfg["grid"]
    keys = sorted(grid)
    for k, combo in enumerate(itertools.product(*(grid[key] for key in keys))):
        point = copy.deepcopy(cfg)
        del point["grid"]
        point["kind"] = "train"
        for key, value in zip(keys, combo):
            if SWEEP_KEYS[key] == "task":
                point["task"][key] = value
            else:
                point[key] = value
        point["seed"] = int(np.random.SeedSequence((cfg["seed"], k)).generate_state(1)[0] % (2 ** 31))
        point["out"] = str(Path(cfg["out"]) / f"run_{k:04d}")
        yield point


def _sweep_one(point):
    try:
        trace, H, summary = run_training(point)
        _write_train(_out_dir(point), point, trace, H, summary)
        status = "ok"
    except (errors.DsParamError, FloatingPointError, np.linalg.LinAlgError) as exc:
        summary, status = {"final_loss": None, "epochs_to_convergence": None,
                           "floor": _floor(point)}, f"error: {type(exc).__name__}"
    ik = _factor_sizes(point) if point["method"] in ("krom", "avg_krom") else None
    return [point["method"], point["d"], point["s"], "x".join(map(str, ik)) if ik else "",
            point["task"]["eps"], point["task"]["sigma_p"],
            "" if summary["final_loss"] is None else summary["final_loss"],
            "" if summary["epochs_to_convergence"] is None else summary["epochs_to_convergence"],
            "" if summary["floor"] is None else summary["floor"], status]


AGGREGATE_HEADER = ["method", "d", "s", "i_k", "eps", "sigma_p", "final_loss",
                    "epochs_to_conv", "floor", "status"]


def cmd_sweep(cfg):
    points = list(_grid_points(cfg))
    out = _out_dir(cfg)
    if cfg["jobs"] > 1:
        with ProcessPoolExecutor(cfg["jobs"]) as pool:
            rows = list(pool.map(_sweep_one, points))
    else:
        rows = [_sweep_one(p) for p in points]
    write_csv(out / "aggregate.csv", cfg, AGGREGATE_HEADER, rows)
    return EXIT_PARTIAL if any(r[-1] != "ok" for r in rows) else EXIT_OK


# --------------------------------------------------------------------------
# spectra, sample, analyze, counts


def cmd_spectra(cfg):
    out = _out_dir(cfg)
    tc = TrainConfig(**cfg["train"], seed=cfg["seed"])
    reach = spectral_reach(cfg["method"], cfg["d"], cfg.get("n_targets", 100), tc, seed=cfg["seed"],
                           s=cfg["s"], factor_sizes=_factor_sizes(cfg), jobs=cfg["jobs"],
                           init_scale=cfg.get("reach_init_scale", 1.0))
    write_csv(out / "spectra.csv", cfg, ["re", "im", "target_re", "target_im", "run"], reach.rows())
    write_json(out / "region.json", cfg,
               {"d": cfg["d"], "polygons": {str(k): v for k, v in region_vertices(cfg["d"]).items()}})
    return EXIT_OK


def cmd_sample(cfg):
    out = _out_dir(cfg)
    rng = make_rng(cfg["seed"], 0)
    method = cfg.get("sampler", "sk")
    samples = []
    for _ in range(cfg.get("n", 10)):
        M = sample_ds(cfg["d"], method, rng, s=cfg["s"])
        samples.append({"matrix": M, "residual": validate_ds(M).residual})
    write_json(out / "samples.json", cfg, {"method": method, "samples": samples})
    return EXIT_OK


def cmd_analyze(cfg):
    out = _out_dir(cfg)
    if cfg["analysis"] == "depth":
        med = depth_decoupling(cfg["d"], cfg.get("sampler", "sk"), cfg.get("depth", 50),
                               cfg.get("trials", 200), make_rng(cfg["seed"], 0), s=cfg["s"])
        write_csv(out / "depth.csv", cfg, ["depth", "median_lambda2"],
                  [(k + 1, v) for k, v in enumerate(med)])
        return EXIT_OK
    W = np.asarray(cfg["W"], dtype=np.float64)
    T = np.asarray(cfg["T"], dtype=np.float64)
    body = {"kl_rows": kl_rows(W, T), "kl_cols": kl_rows(W.T, T.T),
            "validate_W": validate_ds(W).residual, "validate_T": validate_ds(T).residual}
    try:
        body["geodesic"] = geodesic_distance(W, T)
    except errors.NotRecoverable as exc:
        body["geodesic"] = None
        body["geodesic_error"] = str(exc)
    write_json(out / "analysis.json", cfg, body)
    return EXIT_OK


COUNT_HEADER = ["method", "d", "s", "C", "param_count", "flop_estimate"]


def _is_power_of_two(d):
    return d >= 2 and d & (d - 1) == 0


def cmd_counts(cfg):
    out = _out_dir(cfg)
    rows = []
    s, C, S = cfg["s"], cfg.get("C", 1), cfg.get("S", 20)
    for method in cfg.get("methods", ["mhc", "go", "lite", "krom", "krom_go"]):
        for d in cfg["d_values"]:
            if method in ("krom", "krom_go"):
                if not _is_power_of_two(d):
                    continue
                cc = CountConfig(d, s, C, S, (2,) * int(math.log2(d)))
            else:
                cc = CountConfig(d, s, C, S)
            if method == "lite" and d > 12:
                continue
            flops = flop_estimate(method, cc) if method != "krom_go" else ""
            rows.append([method, d, s, C, param_count(method, cc), flops])
    write_csv(out / "counts.csv", cfg, COUNT_HEADER, rows)
    return EXIT_OK


COMMANDS = {"train": cmd_train, "sweep": cmd_sweep, "spectra": cmd_spectra,
            "sample": cmd_sample, "analyze": cmd_analyze, "counts": cmd_counts}


def build_parser():
    parser = argparse.ArgumentParser(prog="dsparam", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in KINDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="JSON config document")
        p.add_argument("--seed", type=int)
        p.add_argument("--jobs", type=int)
        p.add_argument("--out", type=str, help="output directory")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        doc = json.loads(args.config.read_text()) if args.config else {}
        doc.setdefault("kind", args.command)
        if doc["kind"] != args.command:
            raise ConfigError(f"config kind {doc['kind']!r} does not match command {args.command!r}")
        cfg = resolve_config(doc, seed=args.seed, jobs=args.jobs, out=args.out)
    except (OSError, json.JSONDecodeError, *CONFIG_ERRORS) as exc:
        print(f"config error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](cfg)
    except CONFIG_ERRORS as exc:
        print(f"config error in {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (errors.DsParamError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numeric error in {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
