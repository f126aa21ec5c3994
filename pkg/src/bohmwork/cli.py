"""``bohmwork`` command line: run a scenario, compare mixtures, plot results.

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime as _dt
import math
import os
import sys

import numpy as np

from . import config as cfgmod
from .errors import BohmworkError, ConfigError, NumericalError
from .mixtures import (MixtureSpec, ThermalCoherent, ThermalEigenstates, exp_work, ks_distance,
                       mean_work, mixture_work_distribution, write_histogram_csv)
from .oscillator import (exp_work_coherent_exact, exp_work_coherent_highT, exp_work_eigenmixture,
                         exp_work_eigenmixture_highT, high_temperature_ok)
from .propagator import write_snapshots
from .svg import histogram_svg, trajectories_svg
from .tmp import tmp_distribution
from .trajectories import write_trajectories_csv

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3
MAX_PLOTTED = 50


# -- JSON with 17 significant digits -----------------------------------------

def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{pad}{_encode(str(k), indent, 0)}: {_encode(v, indent, level + 1)}'
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return "null"
        return "%.17g" % x
    if isinstance(obj, complex):
        return _encode([obj.real, obj.imag], indent, level)
    if isinstance(obj, str):
        import json
        return json.dumps(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps17(obj, indent: int = 1) -> str:
    """JSON text with every float at 17 significant digits; non-finite as null."""
    return _encode(obj, indent, 0) + "\n"


def _write(path, text):
    with open(path, "w") as fh:
        fh.write(text)


def _timestamp() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


# -- run ----------------------------------------------------------------------

def _engine_summary(d, beta):
    mw = mean_work(d)
    out = {"engine": d.engine, "n_samples": int(len(d)), "mean_W": mw.value, "stderr": mw.stderr,
           "exp_work": exp_work(d, beta).to_dict() if beta else None}
    diag = d.diagnostics
    out["diagnostics"] = {
        "node_collisions": int(diag.get("node_collisions", 0)),
        "norm_drift": float(diag.get("norm_drift", 0.0)),
        "work_consistency_max": float(diag.get("work_consistency_max", 0.0)),
    }
    return out


def _tmp_summary(scn):
    beta = scn.spec.beta
    if not scn.tmp or beta is None or not isinstance(scn.spec.kind, (ThermalEigenstates, ThermalCoherent)):
        return None
    dist = tmp_distribution(scn.params, beta)
    return {"mean": dist.mean, "variance": dist.variance, "exp_work": dist.exp_work(),
            "column_sum_max_deviation": float(np.max(np.abs(dist.column_sums - 1)))}


def run_scenario(scn, threads=1, dump_trajectories=False, dump_snapshots=False):
    """Compute every engine's distribution; returns (summary dict, {engine: distribution})."""
    settings = dataclasses.replace(scn.settings,
                                   keep_trajectories=MAX_PLOTTED if dump_trajectories else 0,
                                   keep_series=dump_snapshots)
    dists = {}
    for engine in scn.engines:
        dists[engine] = mixture_work_distribution(scn.spec, engine, scn.budget, scn.seed, settings,
                                                  workers=threads, floor=scn.floor)
    beta = scn.spec.beta
    primary = dists["numeric" if "numeric" in dists else "analytic"]
    head = _engine_summary(primary, beta)
    summary = {
        "config_echo": scn.raw,
        "engine": primary.engine,
        "mean_W": head["mean_W"],
        "stderr": head["stderr"],
        "exp_work": head["exp_work"],
        "tmp": _tmp_summary(scn),
        "diagnostics": head["diagnostics"],
        "engines": {k: _engine_summary(d, beta) for k, d in dists.items()},
    }
    if len(dists) == 2:
        summary["ks_distance"] = ks_distance(dists["analytic"], dists["numeric"])
    return summary, dists


def cmd_run(args) -> int:
    scn = cfgmod.load(args.config, args.set)
    if (args.dump_trajectories or args.dump_snapshots) and "numeric" not in scn.engines:
        raise ConfigError("--dump-trajectories/--dump-snapshots need engine numeric or both")
    summary, dists = run_scenario(scn, args.threads, args.dump_trajectories, args.dump_snapshots)
    out = args.out or scn.out_dir
    os.makedirs(out, exist_ok=True)
    primary = dists[summary["engine"]]
    summary["timestamp"] = _timestamp()
    if "json" in scn.formats:
        _write(os.path.join(out, "summary.json"), dumps17(summary))
    if "csv" in scn.formats:
        write_histogram_csv(primary, os.path.join(out, "work_hist.csv"))
    if args.dump_trajectories:
        write_trajectories_csv(primary.diagnostics.get("trajectories", []),
                               os.path.join(out, "trajectories.csv"))
    if args.dump_snapshots and "series" in primary.diagnostics:
        write_snapshots(primary.diagnostics["series"], os.path.join(out, "snapshots.bin"))
    if "svg" in scn.formats:
        _plot_dir(out)
    print(f"mean W = {summary['mean_W']:.6g} +/- {summary['stderr']:.2g} ({summary['engine']}); "
          f"wrote {out}")
    return EXIT_OK


# -- compare ------------------------------------------------------------------

def _z(a, b, se):
    return (a - b) / se if se > 0 else (0.0 if a == b else math.inf)


def compare_rows(scn, betas, threads=1):
    engine = "numeric" if "numeric" in scn.engines else "analytic"
    p = scn.params
    rows = []
    for beta in betas:
        de = mixture_work_distribution(MixtureSpec(ThermalEigenstates(beta), p), engine,
                                       scn.budget, scn.seed, scn.settings, threads, scn.floor)
        n_eta = min(1000, scn.budget)
        dc = mixture_work_distribution(MixtureSpec(ThermalCoherent(beta, n_eta), p), engine,
                                       scn.budget, scn.seed, scn.settings, threads)
        tmp = tmp_distribution(p, beta)
        me, mc = mean_work(de), mean_work(dc)
        xe, xc = exp_work(de, beta), exp_work(dc, beta)
        refs = {
            "eigen_closed_form": exp_work_eigenmixture(p, beta),
            "eigen_high_T": exp_work_eigenmixture_highT(p, beta),
            "coherent_high_T": exp_work_coherent_highT(p, beta),
            "coherent_exact": exp_work_coherent_exact(p, beta),
            "high_T_valid": high_temperature_ok(p, beta),
        }
        rows.append({
            "beta": beta,
            "eigen": {"mean_W": me.value, "stderr": me.stderr, "exp_work": xe.to_dict()},
            "coherent": {"mean_W": mc.value, "stderr": mc.stderr, "exp_work": xc.to_dict()},
            "tmp": {"mean": tmp.mean, "variance": tmp.variance, "exp_work": tmp.exp_work()},
            "references": refs,
            "flags": {
                "mean_z_eigen_vs_coherent": _z(me.value, mc.value, math.hypot(me.stderr, mc.stderr)),
                "exp_work_z_eigen_vs_closed_form": _z(xe.value, refs["eigen_closed_form"], xe.stderr),
                "exp_work_z_coherent_vs_exact": _z(xc.value, refs["coherent_exact"], xc.stderr),
                "exp_work_eigen_vs_coherent_differ": abs(_z(xe.value, xc.value,
                                                           math.hypot(xe.stderr, xc.stderr))) > 3,
                "tail_flag_eigen": xe.tail_flag,
                "tail_flag_coherent": xc.tail_flag,
            },
        })
    return rows


def cmd_compare(args) -> int:
    scn = cfgmod.load(args.config, args.set)
    betas = cfgmod.compare_betas(scn, args.betas)
    rows = compare_rows(scn, betas, args.threads)
    out = args.out or scn.out_dir
    os.makedirs(out, exist_ok=True)
    _write(os.path.join(out, "compare.json"),
           dumps17({"config_echo": scn.raw, "rows": rows, "timestamp": _timestamp()}))
    for r in rows:
        print(f"beta={r['beta']:g}  <e^-bW> eigen {r['eigen']['exp_work']['value']:.6g}  "
              f"coherent {r['coherent']['exp_work']['value']:.6g}  "
              f"closed form {r['references']['eigen_closed_form']:.6g}")
    return EXIT_OK


# -- plot ---------------------------------------------------------------------

def _read_hist(path):
    edges, masses = [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            if not edges:
                edges.append(float(row["bin_lo"]))
            edges.append(float(row["bin_hi"]))
            masses.append(float(row["mass"]))
    return np.array(edges), np.array(masses)


def _read_traj(path):
    curves = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            curves.setdefault(row["sample"], ([], []))
            curves[row["sample"]][0].append(float(row["t"]))
            curves[row["sample"]][1].append(float(row["x"]))
    return [(np.array(t), np.array(x)) for t, x in list(curves.values())[:MAX_PLOTTED]]


def _plot_dir(d):
    hist = os.path.join(d, "work_hist.csv")
    if not os.path.exists(hist):
        raise ConfigError(f"no work_hist.csv in {d}")
    edges, masses = _read_hist(hist)
    if masses.size == 0 or not masses.sum() > 0:
        raise ConfigError("work histogram is empty")
    _write(os.path.join(d, "work_hist.svg"), histogram_svg(edges, masses))
    traj = os.path.join(d, "trajectories.csv")
    if os.path.exists(traj):
        curves = _read_traj(traj)
        if curves:
            _write(os.path.join(d, "trajectories.svg"), trajectories_svg(curves))


def cmd_plot(args) -> int:
    _plot_dir(args.dir)
    print(f"wrote plots in {args.dir}")
    return EXIT_OK


# -- entry --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bohmwork",
                                 description="Bohmian work distributions of a driven oscillator.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config entry, e.g. mixture.beta=0.5")
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1)

    run = sub.add_parser("run", help="sample one scenario")
    common(run)
    run.add_argument("--dump-snapshots", action="store_true")
    run.add_argument("--dump-trajectories", action="store_true")
    run.set_defaults(func=cmd_run)

    cmp_ = sub.add_parser("compare", help="eigenstate vs coherent mixtures vs two-measurement")
    common(cmp_)
    cmp_.add_argument("--betas", default=None, help="comma-separated inverse temperatures")
    cmp_.set_defaults(func=cmd_compare)

    plot = sub.add_parser("plot", help="render SVG plots of a results directory")
    plot.add_argument("dir")
    plot.set_defaults(func=cmd_plot)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be positive", file=sys.stderr)
        return EXIT_INVALID
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except BohmworkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
