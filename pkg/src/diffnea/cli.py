"""Command-line interface: dataset generation, training, evaluation,
consistency checking and online learning.

Every command reads an optional JSON config file; explicit flags override
config values. All outputs land under the output directory together with a
``manifest.json`` recording the resolved configuration and the produced
files, and contain no timestamps so reruns with the same seed are
byte-identical.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import autodiff as ad
from . import evaluate, learn, params as par, simgen
from .model import UrdfError, parse_urdf_file

# exit codes: 0 success, 1 domain failure, 2 usage error (click's own)
EXIT_DOMAIN = 1

DomainFailure = (UrdfError, simgen.SimulationDiverged, par.InversionError,
                 ad.DomainError)


def _load_config(path):
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise click.UsageError(f"config file not found: {p}")
    with open(p, "r", encoding="utf-8") as f:
        return json.load(f)


def _resolve(config_path, defaults, flags):
    """defaults < config file < explicit flags (None flags are unset)."""
    cfg = dict(defaults)
    cfg.update(_load_config(config_path))
    cfg.update({k: v for k, v in flags.items() if v is not None})
    return cfg


def _require(cfg, key):
    if cfg.get(key) is None:
        raise click.UsageError(f"missing required option --{key.replace('_', '-')}")
    return cfg[key]


def _load_model(cfg):
    path = Path(_require(cfg, "urdf"))
    if not path.is_file():
        raise click.UsageError(f"URDF file not found: {path}")
    return parse_urdf_file(str(path))


def _load_data(cfg, key="data"):
    path = Path(_require(cfg, key))
    if not path.is_file():
        raise click.UsageError(f"dataset file not found: {path}")
    return simgen.Trajectory.load_csv(str(path))


def _out_dir(cfg):
    out = Path(cfg.get("out") or "out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out, command, cfg, files):
    manifest = {"command": command, "config": cfg, "outputs": sorted(files)}
    path = out / "manifest.json"
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def _write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(text)


def max_workers():
    """Worker cap from DIFFNEA_THREADS (default 1: fully sequential)."""
    raw = os.environ.get("DIFFNEA_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise click.UsageError(f"DIFFNEA_THREADS must be an integer, got {raw!r}")
    return max(1, n)


def _map_jobs(fn, jobs):
    """Run fn over jobs, in parallel processes when the cap allows.

    Results are returned in job order regardless of completion order, so
    parallel runs produce the same outputs as sequential ones.
    """
    workers = min(max_workers(), len(jobs))
    if workers <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def _parse_kinds(raw):
    kinds = [k.strip() for k in raw.split(",") if k.strip()]
    for k in kinds:
        if k not in par.KINDS:
            raise click.UsageError(
                f"unknown kind {k!r}; valid kinds: {', '.join(par.KINDS)}")
    if not kinds:
        raise click.UsageError("no kinds given")
    return kinds


def _parse_seeds(raw):
    try:
        seeds = [int(s) for s in str(raw).split(",") if s.strip() != ""]
    except ValueError:
        raise click.UsageError(f"seeds must be comma-separated integers, got {raw!r}")
    if not seeds:
        raise click.UsageError("at least one seed is required")
    return seeds


@click.group()
def main():
    """Learning physically consistent rigid-body inertial parameters."""


@main.command()
@click.option("--config", type=str, default=None, help="JSON config file; flags override it.")
@click.option("--urdf", type=str, default=None, help="Robot description file.")
@click.option("--duration", type=float, default=None, help="Dataset length in seconds.")
@click.option("--rate", type=float, default=None, help="Sample rate in Hz.")
@click.option("--seed", type=int, default=None, help="Random seed (recorded in metadata).")
@click.option("--out", type=str, default=None, help="Output directory.")
def generate(config, **flags):
    """Simulate sine-reference tracking and write the dataset CSV."""
    cfg = _resolve(config, {"duration": 60.0, "rate": simgen.DEFAULT_RATE,
                            "seed": 0, "out": "out"}, flags)
    model = _load_model(cfg)
    spec = simgen.SineSpec.default(model.n_dof, cfg["duration"], cfg["rate"])
    out = _out_dir(cfg)
    try:
        traj = simgen.generate_dataset(model, model.inertias, spec, seed=cfg["seed"])
    except DomainFailure as e:
        raise SystemExit(_fail(str(e)))
    csv_path = out / "train.csv"
    sidecar = simgen.save_dataset(traj, csv_path)
    _write_manifest(out, "generate", cfg,
                    [csv_path.name, Path(sidecar).name, "manifest.json"])
    click.echo(f"wrote {len(traj)} records to {csv_path}")


def _train_config(cfg):
    keys = ("kind", "loss", "optimizer", "lr", "batch_size", "max_epochs",
            "convergence_nmse", "seed", "friction_learnable", "init_mode",
            "init_sigma", "grad_clip")
    picked = {k: cfg[k] for k in keys if cfg.get(k) is not None}
    if picked.get("grad_clip") == 0:
        picked["grad_clip"] = None
    return learn.TrainConfig(**picked)


TRAIN_DEFAULTS = {"kind": "cov", "loss": "id", "optimizer": "adam",
                  "lr": 1e-2, "batch_size": 256, "max_epochs": 100,
                  "convergence_nmse": 0.1, "seed": 0, "init_mode": "random",
                  "init_sigma": 0.5, "grad_clip": 1e3, "out": "out"}


def _train_flags(fn):
    for deco in (
        click.option("--config", type=str, default=None, help="JSON config file; flags override it."),
        click.option("--urdf", type=str, default=None, help="Robot description file."),
        click.option("--data", type=str, default=None, help="Training dataset CSV."),
        click.option("--kind", type=click.Choice(par.KINDS), default=None,
                     help="Inertia parameterization."),
        click.option("--loss", type=click.Choice(("id", "fd")), default=None),
        click.option("--optimizer", type=click.Choice(("adam", "sgd")), default=None),
        click.option("--lr", type=float, default=None),
        click.option("--batch-size", "batch_size", type=int, default=None),
        click.option("--epochs", "max_epochs", type=int, default=None),
        click.option("--seed", type=int, default=None),
        click.option("--init-mode", "init_mode",
                     type=click.Choice(("from_urdf_perturbed", "random",
                                        "random_model")), default=None),
        click.option("--init-sigma", "init_sigma", type=float, default=None),
        click.option("--grad-clip", "grad_clip", type=float, default=None,
                     help="Gradient-norm cap (0 disables clipping)."),
        click.option("--out", type=str, default=None, help="Output directory."),
    ):
        fn = deco(fn)
    return fn


def _fail(message):
    click.echo(f"error: {message}", err=True)
    return EXIT_DOMAIN


@main.command()
@_train_flags
def train(config, **flags):
    """Fit one parameterization and write report, history and parameters."""
    cfg = _resolve(config, TRAIN_DEFAULTS, flags)
    model = _load_model(cfg)
    data = _load_data(cfg)
    out = _out_dir(cfg)
    try:
        report = learn.train(model, data, _train_config(cfg))
    except DomainFailure as e:
        raise SystemExit(_fail(str(e)))
    _write_text(out / "report.json", report.to_json() + "\n")
    _write_text(out / "history.csv", report.history_csv())
    _write_text(out / "params.json", report.final_params.to_json() + "\n")
    _write_manifest(out, "train", cfg,
                    ["report.json", "history.csv", "params.json", "manifest.json"])
    if report.aborted:
        raise SystemExit(_fail(f"training aborted: {report.aborted}"))
    epochs = report.epochs_to_converge
    consistent = report.consistency_history[-1]
    click.echo(f"kind={cfg['kind']} epochs_to_converge="
               f"{'none' if epochs is None else epochs} "
               f"consistent_fraction={consistent:.3f}")


def _heldout_reference(model, duration, rate):
    """A held-out joint reference: same form, different periods and smaller
    amplitudes than the training sines."""
    n = model.n_dof
    periods = tuple(p * 0.61803398875 for p in simgen.DEFAULT_PERIODS[:n])
    amps = tuple(a * 0.8 for a in simgen.DEFAULT_AMPLITUDES[:n])
    spec = simgen.SineSpec(periods, amps, duration, rate)
    return simgen.reference_trajectory(spec, model.joint_limits)


def _eval_one(job):
    """One (kind, seed) training + tracking run; top-level for pickling."""
    urdf, data_path, cfg, kind, seed = job
    model = parse_urdf_file(urdf)
    data = simgen.Trajectory.load_csv(data_path)
    tc = _train_config({**cfg, "kind": kind, "seed": seed})
    report = learn.train(model, data, tc)
    rate = 1.0 / float(data.t[1] - data.t[0])
    sine_ref = _heldout_reference(model, cfg["track_duration"], rate)
    gains = evaluate.tracking_gains(model, report.final_params, sine_ref.q[0])
    tracked = evaluate.track_trajectory(model, report.final_params, sine_ref,
                                        gains=gains)
    return report, tracked


@main.command()
@_train_flags
@click.option("--kinds", type=str, default=None,
              help="Comma-separated parameterizations (default: all five).")
@click.option("--seeds", type=str, default=None,
              help="Comma-separated seeds (default: 0).")
@click.option("--track-duration", "track_duration", type=float, default=None,
              help="Held-out tracking horizon in seconds.")
def eval(config, kinds, seeds, **flags):
    """Train every requested parameterization and emit the comparison table."""
    cfg = _resolve(config, {**TRAIN_DEFAULTS, "kinds": ",".join(par.KINDS),
                            "seeds": "0", "track_duration": 10.0},
                   {**flags, "kinds": kinds, "seeds": seeds})
    kinds = _parse_kinds(cfg["kinds"])
    seeds = _parse_seeds(cfg["seeds"])
    urdf = str(Path(_require(cfg, "urdf")))
    model = _load_model(cfg)
    data = _load_data(cfg)
    out = _out_dir(cfg)

    jobs = [(urdf, cfg["data"], cfg, kind, seed) for kind in kinds for seed in seeds]
    try:
        runs = _map_jobs(_eval_one, jobs)
    except DomainFailure as e:
        raise SystemExit(_fail(str(e)))

    files = ["manifest.json", "report.csv", "report.md"]
    results = {}
    for kind in kinds:
        picks = [r for (j, r) in zip(jobs, runs) if j[3] == kind]
        epochs = [r.epochs_to_converge for r, _ in picks]
        known = [e for e in epochs if e is not None]
        sine_nmse = [learn.torque_nmse(model, r.final_params, data).max()
                     for r, _ in picks]
        tracked = [t for _, t in picks]
        results[kind] = {
            "epochs_to_converge": int(np.median(known)) if len(known) == len(epochs) else None,
            "sine_q_nmse": float(np.median(sine_nmse)),
            "sine_qd_nmse": None,
            "heldout_q_nmse": float(np.median([t.q_nmse_mean for t in tracked])),
            "heldout_qd_nmse": float(np.median([t.qd_nmse_mean for t in tracked])),
            "consistent_fraction": float(np.median(
                [r.consistency_history[-1] for r, _ in picks])),
        }
        for (j, (r, _)) in zip(jobs, runs):
            if j[3] == kind:
                name = f"history_{kind}_seed{j[4]}.csv"
                _write_text(out / name, r.history_csv())
                files.append(name)
    csv_text, md_text = evaluate.compare_report(results)
    _write_text(out / "report.csv", csv_text)
    _write_text(out / "report.md", md_text)
    _write_manifest(out, "eval", cfg, files)
    click.echo(md_text, nl=False)


@main.command()
@click.argument("source", type=str)
@click.option("--urdf", type=str, default=None,
              help="Robot description, required when SOURCE is a params JSON.")
def check(source, urdf):
    """Report physical consistency of a URDF or a learned-params JSON file.

    Exits 0 only when every link is fully consistent.
    """
    path = Path(source)
    if not path.is_file():
        raise click.UsageError(f"input file not found: {path}")
    try:
        if path.suffix == ".json":
            if urdf is None:
                raise click.UsageError("--urdf is required with a params JSON input")
            model = parse_urdf_file(urdf)
            with open(path, "r", encoding="utf-8") as f:
                pv = par.ParamVector.from_json(f.read())
            inertias = pv.numeric_inertias(model)
        else:
            model = parse_urdf_file(str(path))
            inertias = model.inertias
    except DomainFailure as e:
        raise SystemExit(_fail(str(e)))
    names = [link.name for link in model.links]
    all_ok = True
    for name, inertia in zip(names, inertias):
        report = par.consistency_check(inertia)
        ok = report.fully_consistent
        all_ok = all_ok and ok
        detail = "" if ok else " (" + ", ".join(
            k for k, v in report.as_dict().items()
            if k != "fully_consistent" and not v) + ")"
        click.echo(f"{name}: {'consistent' if ok else 'INCONSISTENT'}{detail}")
    raise SystemExit(0 if all_ok else EXIT_DOMAIN)


def _online_one(job):
    urdf, data_path, cfg, kind = job
    model = parse_urdf_file(urdf)
    data = simgen.Trajectory.load_csv(data_path)
    tc = _train_config({**cfg, "kind": kind, "max_epochs": 1})
    return learn.train_online(model, data, tc)


@main.command()
@_train_flags
@click.option("--kinds", type=str, default=None,
              help="Comma-separated parameterizations (default: cov,nostr).")
@click.option("--assert-order", "assert_order", type=str, default=None,
              help="e.g. 'cov<nostr': fail unless the first kind's NMSE curve "
                   "stays below the second's for 90% of steps after the "
                   "first tenth of the pass.")
def online(config, kinds, assert_order, **flags):
    """Single sequential pass over the dataset, logging the NMSE curve."""
    # identical random physical starting model for every kind, so the
    # logged curves are directly comparable
    cfg = _resolve(config, {**TRAIN_DEFAULTS, "kinds": "cov,nostr",
                            "init_mode": "random_model", "assert_order": None},
                   {**flags, "kinds": kinds, "assert_order": assert_order})
    kinds = _parse_kinds(cfg["kinds"])
    urdf = str(Path(_require(cfg, "urdf")))
    _load_model(cfg)
    _load_data(cfg)
    out = _out_dir(cfg)

    jobs = [(urdf, cfg["data"], cfg, kind) for kind in kinds]
    try:
        reports = _map_jobs(_online_one, jobs)
    except DomainFailure as e:
        raise SystemExit(_fail(str(e)))
    files = ["manifest.json"]
    curves = {}
    for kind, report in zip(kinds, reports):
        name = f"online_{kind}.csv"
        _write_text(out / name, report.curve_csv())
        files.append(name)
        curves[kind] = report.mean_curve
    _write_manifest(out, "online", cfg, files)

    order = cfg.get("assert_order")
    if order:
        try:
            lo, hi = (k.strip() for k in order.split("<"))
        except ValueError:
            raise click.UsageError(f"--assert-order must look like 'cov<nostr', got {order!r}")
        if lo not in curves or hi not in curves:
            raise click.UsageError(f"--assert-order names kinds not run: {order!r}")
        start = len(curves[lo]) // 10
        below = np.mean(curves[lo][start:] < curves[hi][start:])
        click.echo(f"{lo} below {hi} on {below:.1%} of steps after warm-up")
        if below < 0.9:
            raise SystemExit(_fail(f"ordering {order} violated ({below:.1%} < 90%)"))
    click.echo(f"wrote online curves for {', '.join(kinds)} to {out}")


if __name__ == "__main__":
    main()
