"""Command line interface.

    randdp release         perturb a dataset file into a released histogram
    randdp experiment-1d   loss distributions of dp vs rdp-sparse, k=25
    randdp experiment-2d   same on a 20x20 grid, k=400
    randdp verify          Monte Carlo estimate of the RDP failure probability
    randdp sweep           risk as a function of k or of the support size r
    randdp scalar-release  release a statistic with quantile-calibrated noise

Summaries go to stdout as ``key=value`` lines; tables are CSV files.
Settings come from flags, then ``--config`` (``key=value`` lines), then
per-command defaults.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import fileio, sensitivity, verify
from .core import BinnedDataset, PrivacyBudget, RandomSource, histogram_of
from .mechanisms import (
    Projection,
    SparseReleaseConfig,
    dp_histogram,
    l1_project,
    rdp_sparse_histogram,
    sparse_branch_active,
)
from .synth import BinDistribution, balanced_dataset, centered_support, sample_dataset

# stream ids, so that the mechanisms never share noise with data generation
STREAM_RELEASE = 0
STREAM_DP = 1
STREAM_RDP = 2
STREAM_DATA = 3
STREAM_SCALAR = 4

OPTIONS = {
    # name: (type, help)
    "k": (str, "number of cells (comma list allowed for sweep)"),
    "n": (int, "number of observations"),
    "r": (str, "number of occupied cells (comma list allowed for sweep)"),
    "alpha": (float, "privacy parameter alpha"),
    "gamma": (float, "RDP failure probability gamma"),
    "trials": (int, "Monte Carlo trials"),
    "seed": (int, "random seed"),
    "mech": (str, "mechanism: dp or rdp-sparse"),
    "in": (str, "input file"),
    "out": (str, "output file"),
    "dist": (str, "bin distribution CSV (cell,prob) to draw the data from"),
    "threads": (int, "worker threads for Monte Carlo loops"),
}

DEFAULTS = {
    "release": dict(mech="rdp-sparse", alpha=1.0, gamma=0.2, seed=0, project=True),
    "experiment-1d": dict(k="25", n=500, r="2", alpha=1.0, gamma=0.2, trials=100, seed=0,
                          project=True, threads=1),
    "experiment-2d": dict(k="400", n=4000, r="16", alpha=1.0, gamma=0.2, trials=100, seed=0,
                          project=True, threads=1),
    "verify": dict(mech="rdp-sparse", k="25", n=500, r="2", alpha=1.0, gamma=0.2,
                   trials=10000, seed=0, threads=1),
    "sweep": dict(mech="dp", k="5,10,20,40", n=500, alpha=1.0, gamma=0.2, trials=1000, seed=0,
                  project=True, threads=1),
    "scalar-release": dict(stat="mean", h="absdiff", alpha=1.0, gamma=0.4, gamma1=0.05,
                           beta_c=1.0, n=1000, seed=0, estimator="split-pair",
                           bounds="0,1"),
}

NOTES = {
    "experiment-1d": ["default alpha=1.0 gamma=0.2"],
    "experiment-2d": ["default n=4000: 2k <= gamma n with k=400 needs n >= 4000 at gamma=0.2",
                      "default alpha=1.0 gamma=0.2"],
}


class CLIError(Exception):
    pass


def read_config(path) -> dict:
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise CLIError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            key, _, value = line.partition("=")
            out[key.strip().replace("-", "_")] = value.strip()
    return out


def _coerce(key, value, default):
    if key in ("project",):
        if isinstance(value, bool):
            return value
        return str(value).lower() in ("1", "true", "yes", "on")
    if key == "no_project":
        return str(value).lower() in ("1", "true", "yes", "on")
    kind = OPTIONS.get(key, (type(default) if default is not None else str, ""))[0]
    try:
        return kind(value)
    except ValueError:
        raise CLIError(f"bad value for {key}: {value!r}") from None


def settings(args: argparse.Namespace) -> dict:
    """Merge defaults < config file < explicit flags."""
    cfg = dict(DEFAULTS[args.command])
    allowed = set(cfg) | {"in", "out", "dist", "k", "n", "r", "threads", "mech", "no_project",
                          "delta", "delta_prime"}
    if args.config:
        for key, value in read_config(args.config).items():
            if key not in allowed:
                raise CLIError(f"{args.config}: unknown key {key!r} for {args.command}")
            if key == "no_project":
                cfg["project"] = not _coerce(key, value, None)
            else:
                cfg[key] = _coerce(key, value, cfg.get(key))
    for key, value in vars(args).items():
        if key in ("command", "config", "func") or value is None:
            continue
        if key == "no_project":
            if value:
                cfg["project"] = False
            continue
        cfg[key] = value
    return cfg


def _ints(text, name) -> list[int]:
    try:
        vals = [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise CLIError(f"--{name} expects integers, got {text!r}") from None
    if not vals or min(vals) < 1:
        raise CLIError(f"--{name} values must be positive integers")
    return vals


def _one_int(text, name) -> int:
    vals = _ints(text, name)
    if len(vals) != 1:
        raise CLIError(f"--{name} takes a single value here")
    return vals[0]


def _positive(cfg, *names):
    for name in names:
        v = cfg.get(name)
        if v is not None and not v > 0:
            raise CLIError(f"--{name.replace('_', '-')} must be positive, got {v}")


def emit(**kv):
    for key, value in kv.items():
        if isinstance(value, bool):
            value = str(value).lower()
        elif isinstance(value, float):
            value = repr(value)
        print(f"{key}={value}")


def _budget_lines(b: PrivacyBudget):
    emit(budget_alpha=b.alpha, budget_gamma=b.gamma, budget_eta=b.eta)


def _experiment_data(cfg, grid_shape=None) -> BinnedDataset:
    if cfg.get("in"):
        return fileio.load_dataset(cfg["in"])
    n = cfg["n"]
    if cfg.get("dist"):
        P = fileio.load_distribution(cfg["dist"])
        return sample_dataset(P, n, RandomSource(cfg["seed"], STREAM_DATA))
    k = _one_int(cfg["k"], "k")
    r = _one_int(cfg["r"], "r")
    shape = grid_shape(k) if grid_shape else None
    return balanced_dataset(k, n, centered_support(k, r, shape))


# -- commands ----------------------------------------------------------------------


def cmd_release(cfg):
    if not cfg.get("in") or not cfg.get("out"):
        raise CLIError("release needs --in and --out")
    _positive(cfg, "alpha")
    data = fileio.load_dataset(cfg["in"])
    rng = RandomSource(cfg["seed"], STREAM_RELEASE)
    mech = cfg["mech"]
    if mech == "dp":
        z = dp_histogram(data, cfg["alpha"], rng)
        budget = PrivacyBudget(cfg["alpha"])
    elif mech == "rdp-sparse":
        if not sparse_branch_active(data.k, data.n, cfg["gamma"]):
            print(f"warning: 2k={2 * data.k} > gamma*n={cfg['gamma'] * data.n}; sparse branch "
                  "inactive, every cell is perturbed", file=sys.stderr)
        rcfg = SparseReleaseConfig(cfg["alpha"], cfg["gamma"], Projection.RAW)
        z, _ = rdp_sparse_histogram(data, rcfg, rng)
        budget = rcfg.budget
    else:
        raise CLIError(f"unknown mechanism {mech!r}")
    if cfg["project"]:
        fileio.store_histogram(l1_project(z, data.n), cfg["out"])
    else:
        body = fileio._render(["cell", "value"], ([j, float(v)] for j, v in enumerate(z)),
                              {"k": data.k, "n": data.n})
        fileio.atomic_write_text(cfg["out"], body)
    emit(mech=mech, k=data.k, n=data.n, projected=cfg["project"],
         sparse_branch_active=mech == "rdp-sparse"
         and sparse_branch_active(data.k, data.n, cfg["gamma"]))
    _budget_lines(budget)


def _grid_shape(k):
    side = math.isqrt(k)
    if side * side != k:
        raise CLIError(f"experiment-2d needs a square number of cells, got k={k}")
    return (side, side)


def _run_experiment(cfg, command, grid_shape=None):
    _positive(cfg, "alpha", "gamma", "n", "trials")
    data = _experiment_data(cfg, grid_shape)
    mechs = [cfg["mech"]] if cfg.get("mech") else ["dp", "rdp-sparse"]
    for note in NOTES[command]:
        emit(note=note)
    active = sparse_branch_active(data.k, data.n, cfg["gamma"])
    emit(k=data.k, n=data.n, r=int(np.count_nonzero(histogram_of(data).counts)),
         alpha=cfg["alpha"], gamma=cfg["gamma"], trials=cfg["trials"], projected=cfg["project"],
         sparse_branch_active=active)
    if not active and "rdp-sparse" in mechs:
        print("warning: 2k > gamma*n; sparse branch inactive", file=sys.stderr)
    rows = []
    for mech in mechs:
        label = "dp" if mech == "dp" else "rdp"
        stream = STREAM_DP if mech == "dp" else STREAM_RDP
        losses = verify.l1_losses(mech, data, cfg["alpha"], cfg["gamma"], cfg["trials"],
                                  RandomSource(cfg["seed"], stream), cfg["project"],
                                  cfg.get("threads", 1)).sum(axis=1)
        rows.extend((t, label, float(v)) for t, v in enumerate(losses))
        emit(**{f"{label}_median": float(np.median(losses)), f"{label}_max": float(losses.max()),
                f"{label}_min": float(losses.min()), f"{label}_mean": float(losses.mean())})
    if cfg.get("out"):
        fileio.store_loss_table(rows, cfg["out"])
    else:
        sys.stdout.write(fileio.render_loss_table(rows))


def cmd_experiment_1d(cfg):
    _run_experiment(cfg, "experiment-1d")


def cmd_experiment_2d(cfg):
    _run_experiment(cfg, "experiment-2d", _grid_shape)


def cmd_verify(cfg):
    _positive(cfg, "alpha", "gamma", "n", "trials")
    if cfg.get("dist"):
        P = fileio.load_distribution(cfg["dist"])
    else:
        k = _one_int(cfg["k"], "k")
        P = BinDistribution.uniform_on(k, centered_support(k, _one_int(cfg["r"], "r")))
    est = verify.estimate_gamma(cfg["mech"], P, cfg["n"], cfg["alpha"], cfg["gamma"],
                                cfg["trials"], RandomSource(cfg["seed"], STREAM_DATA),
                                cfg.get("threads", 1))
    emit(mech=cfg["mech"], k=P.k, n=cfg["n"], alpha=cfg["alpha"], gamma=cfg["gamma"],
         sparse_branch_active=sparse_branch_active(P.k, cfg["n"], cfg["gamma"]),
         trials=est.trials, failures=est.failures, gamma_hat=est.gamma_hat,
         ci_low=est.ci_low, ci_high=est.ci_high,
         failure_bound=verify.sparse_failure_bound(P.k, cfg["n"]))


def cmd_sweep(cfg):
    _positive(cfg, "alpha", "n", "trials")
    ks = _ints(cfg["k"], "k")
    rs = _ints(cfg["r"], "r") if cfg.get("r") else None
    if rs is not None and len(rs) > 1:
        if len(ks) != 1:
            raise CLIError("sweep over r needs a single --k")
        axis, grid, k, r = "r", rs, ks[0], None
    else:
        axis, grid, k, r = "k", ks, None, (rs[0] if rs else None)
    rows = verify.risk_scaling_sweep(cfg["mech"], grid, axis, cfg["n"], cfg["alpha"],
                                     cfg["trials"], RandomSource(cfg["seed"], STREAM_DP),
                                     gamma=cfg["gamma"], k=k, r=r, project=cfg["project"],
                                     threads=cfg.get("threads", 1))
    table = [(row.param, row.mean_risk, row.std_error) for row in rows]
    slope, intercept, r2 = verify.linear_fit(grid, [row.mean_risk for row in rows]) \
        if len(grid) > 1 else (math.nan, math.nan, math.nan)
    emit(mech=cfg["mech"], axis=axis, n=cfg["n"], alpha=cfg["alpha"], slope=slope,
         intercept=intercept, r2=r2)
    if cfg.get("out"):
        fileio.store_sweep_table(table, cfg["out"])
    else:
        sys.stdout.write(fileio._render(fileio.SWEEP_HEADER, table))


def cmd_scalar_release(cfg):
    _positive(cfg, "alpha", "n")
    try:
        g = sensitivity.STATISTICS[cfg["stat"]]
    except KeyError:
        raise CLIError(f"unknown statistic {cfg['stat']!r}; choose from "
                       f"{', '.join(sensitivity.STATISTICS)}") from None
    if cfg["h"] != "absdiff":
        raise CLIError(f"unknown sensitivity {cfg['h']!r}; only absdiff is built in")
    lo, hi = (float(v) for v in str(cfg["bounds"]).split(","))
    if cfg.get("in"):
        x = fileio.load_sample(cfg["in"])
    else:
        x = RandomSource(cfg["seed"], STREAM_DATA).generator().uniform(lo, hi, cfg["n"])
    x = np.clip(x, lo, hi)
    kind = sensitivity.EstimatorKind(cfg["estimator"])
    if cfg.get("delta") is not None and cfg.get("delta_prime") is not None:
        qcfg = sensitivity.QuantileConfig(float(cfg["delta"]), float(cfg["delta_prime"]),
                                          cfg["beta_c"] / math.sqrt(x.size), cfg["gamma1"])
    else:
        qcfg = sensitivity.calibrate(cfg["gamma"], x.size, cfg["beta_c"], cfg["gamma1"], kind)
    rel = sensitivity.rdp_release_scalar(x, g, sensitivity.absdiff, qcfg, cfg["alpha"],
                                         RandomSource(cfg["seed"], STREAM_SCALAR), kind)
    emit(stat=cfg["stat"], n=int(x.size), value=rel.value, laplace_scale=rel.scale,
         degenerate=rel.degenerate, delta=qcfg.delta, delta_prime=qcfg.delta_prime,
         beta=qcfg.beta)
    _budget_lines(rel.budget)


COMMANDS = {
    "release": (cmd_release, ["mech", "alpha", "gamma", "seed", "in", "out"]),
    "experiment-1d": (cmd_experiment_1d, ["k", "n", "r", "alpha", "gamma", "trials", "seed",
                                          "mech", "in", "out", "dist", "threads"]),
    "experiment-2d": (cmd_experiment_2d, ["k", "n", "r", "alpha", "gamma", "trials", "seed",
                                          "mech", "in", "out", "dist", "threads"]),
    "verify": (cmd_verify, ["mech", "k", "n", "r", "alpha", "gamma", "trials", "seed", "dist",
                            "threads"]),
    "sweep": (cmd_sweep, ["mech", "k", "n", "r", "alpha", "gamma", "trials", "seed", "out",
                          "threads"]),
    "scalar-release": (cmd_scalar_release, ["alpha", "gamma", "n", "seed", "in"]),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="randdp", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, flags) in COMMANDS.items():
        p = sub.add_parser(name)
        for flag in flags:
            kind, help_ = OPTIONS[flag]
            p.add_argument(f"--{flag}", dest=flag, type=kind, default=None, help=help_)
        p.add_argument("--config", default=None, help="key=value settings file")
        if name not in ("verify", "scalar-release"):
            p.add_argument("--no-project", dest="no_project", action="store_true", default=None,
                           help="report raw noisy vectors instead of lattice projections")
        if name == "scalar-release":
            p.add_argument("--stat", default=None, help="mean or trimmed-mean")
            p.add_argument("--h", dest="h", default=None, help="pairwise sensitivity (absdiff)")
            p.add_argument("--gamma1", type=float, default=None,
                           help="asserted failure probability of the scale-stability condition")
            p.add_argument("--beta-c", dest="beta_c", type=float, default=None,
                           help="beta = c / sqrt(n)")
            p.add_argument("--delta", type=float, default=None)
            p.add_argument("--delta-prime", dest="delta_prime", type=float, default=None)
            p.add_argument("--estimator", default=None, help="split-pair or u-statistic")
            p.add_argument("--bounds", default=None, help="lo,hi of the data domain")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    func = COMMANDS[args.command][0]
    try:
        cfg = settings(args)
        func(cfg)
    except (CLIError, ValueError, OSError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"error: {msg}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
