"""Command-line interface: ``svsgraph sweep|calibrate|hist|locate``.

Settings are resolved as built-in defaults, then ``--preset``, then
``--config`` (a JSON file, or the JSON output of an earlier run), then
explicit flags.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys

import numpy as np

from . import __version__
from .ensemble import (
    RATIO_STATS,
    STATISTICS,
    SweepSpec,
    calibrate_references,
    locate_parameter,
    run_point,
    run_sweep,
)
from .errors import SVSGraphError
from .models import GraphModelParams, Model
from .reports import (
    overlay_columns,
    provenance,
    write_histogram_csv,
    write_json,
    write_sweep_csv,
    write_sweep_json,
)
from .stats import ReferenceConstants

log = logging.getLogger("svsgraph")

OUTPUT_ENV = "SVSGRAPH_OUTPUT_DIR"
HIST_STATS = RATIO_STATS + ("lmin",)
FIG_TARGETS = [0.0, 0.25, 0.5, 0.75, 1.0]
PAPER_SIZES = [100, 200, 400, 800, 1600]
PAPER_GRIDS = {"dERG": "log:1e-4:1:25", "dRRG": "log:1e-3:1.4142135623730951:25"}

PRESETS = {
    # 1e6 ratios per point
    "paper-fig1": {"n": PAPER_SIZES, "ratio_budget": 10**6, "stats": list(RATIO_STATS)},
    # ratio histograms at fixed normalized ratio, 1e6 graphs per histogram
    "paper-fig3": {
        "n": [100, 200, 400], "realizations": 10**6, "stat": list(RATIO_STATS),
        "target_rbar": FIG_TARGETS,
    },
    # same panels with 1e6 ratios per histogram instead of 1e6 graphs
    "paper-fig3-ratios": {
        "n": [100, 200, 400], "ratio_budget": 10**6, "stat": list(RATIO_STATS),
        "target_rbar": FIG_TARGETS,
    },
    # 1e6/n minimum singular values per point
    "paper-fig4": {"n": PAPER_SIZES, "ratio_budget": 10**6, "stats": ["min_singular"]},
    "paper-fig5": {
        "n": [100, 200, 400], "realizations": 10**5, "stat": ["lmin"],
        "target_rbar": FIG_TARGETS,
    },
}

DEFAULTS = {
    "sweep": {
        "model": None, "n": [100], "grid": None, "realizations": 100, "ratio_budget": None,
        "seed": 0, "stats": list(STATISTICS), "squared": False, "histograms": False,
        "bins": 50, "workers": 1, "refs": None, "format": "both", "out": None,
    },
    "calibrate": {
        "n": 1000, "realizations": 1000, "seed": 0, "squared": False, "workers": 1,
        "out": None,
    },
    "hist": {
        "model": None, "n": [100], "param": None, "target_rbar": None,
        "stat": ["rR_AAT"], "realizations": None, "ratio_budget": 10**5, "bins": 50,
        "seed": 0, "tolerance": 0.02, "family": "rR_AAT", "squared": False,
        "workers": 1, "refs": None, "format": "both", "out": None,
    },
    "locate": {
        "model": None, "n": 100, "target_rbar": None, "tolerance": 0.02, "seed": 0,
        "family": "rR_AAT", "squared": False, "workers": 1, "refs": None, "out": None,
    },
}


class ConfigError(SVSGraphError):
    """Invalid command-line or config-file setting."""


def parse_grid(text, flag="--grid") -> list[float]:
    """``lin:a:b:k``, ``log:a:b:k`` or a comma-separated list of values."""
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    text = str(text).strip()
    try:
        if text.startswith(("lin:", "log:")):
            kind, a, b, k = text.split(":")
            a, b, k = float(a), float(b), int(k)
            if k < 1:
                raise ValueError("point count must be >= 1")
            if k > 1 and not b > a:
                raise ValueError("upper end must exceed lower end")
            if kind == "log":
                if a <= 0:
                    raise ValueError("log grid needs a positive lower end")
                return np.geomspace(a, b, k).tolist()
            return np.linspace(a, b, k).tolist()
        values = [float(v) for v in text.split(",") if v.strip()]
        if not values:
            raise ValueError("empty grid")
        return values
    except ValueError as exc:
        raise ConfigError(f"{flag}: invalid grid {text!r}: {exc}") from None


def _grid_flag(model):
    return "--rho-grid" if model is Model.DRRG else "--p-grid"


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--preset", choices=sorted(PRESETS), default=S)
    common.add_argument("--config", default=S, help="JSON config or earlier run output")
    common.add_argument("--seed", type=int, default=S)
    common.add_argument("--workers", type=int, default=S)
    common.add_argument("--out", default=S, help=f"output directory (env {OUTPUT_ENV})")
    common.add_argument("--squared", action="store_true", default=S,
                        help="AA^T ratios on sigma**2 instead of sigma")
    common.add_argument("-v", "--verbose", action="store_true", default=False)

    parser = argparse.ArgumentParser(prog="svsgraph", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sw = sub.add_parser("sweep", parents=[common], help="transition curves over p or rho")
    sw.add_argument("--model", default=S)
    sw.add_argument("--n", type=int, nargs="+", default=S)
    sw.add_argument("--p-grid", dest="p_grid", default=S)
    sw.add_argument("--rho-grid", dest="rho_grid", default=S)
    sw.add_argument("--realizations", type=int, default=S)
    sw.add_argument("--ratio-budget", dest="ratio_budget", type=int, default=S)
    sw.add_argument("--stats", nargs="+", choices=STATISTICS, default=S)
    sw.add_argument("--histograms", action="store_true", default=S)
    sw.add_argument("--bins", type=int, default=S)
    sw.add_argument("--refs", default=S, help="reference constants JSON")
    sw.add_argument("--format", choices=("csv", "json", "both"), default=S)

    ca = sub.add_parser("calibrate", parents=[common], help="recompute reference constants")
    ca.add_argument("--n", type=int, default=S)
    ca.add_argument("--realizations", type=int, default=S)

    hi = sub.add_parser("hist", parents=[common], help="ratio or lambda_min histograms")
    hi.add_argument("--model", default=S)
    hi.add_argument("--n", type=int, nargs="+", default=S)
    hi.add_argument("--p", type=float, default=S)
    hi.add_argument("--rho", type=float, default=S)
    hi.add_argument("--target-rbar", dest="target_rbar", type=float, nargs="+", default=S)
    hi.add_argument("--stat", nargs="+", choices=HIST_STATS, default=S)
    hi.add_argument("--realizations", type=int, default=S)
    hi.add_argument("--ratio-budget", dest="ratio_budget", type=int, default=S)
    hi.add_argument("--bins", type=int, default=S)
    hi.add_argument("--tolerance", type=float, default=S)
    hi.add_argument("--family", choices=RATIO_STATS, default=S)
    hi.add_argument("--refs", default=S)
    hi.add_argument("--format", choices=("csv", "json", "both"), default=S)

    lo = sub.add_parser("locate", parents=[common], help="find p or rho for a target <r>")
    lo.add_argument("--model", default=S)
    lo.add_argument("--n", type=int, default=S)
    lo.add_argument("--target-rbar", dest="target_rbar", type=float, default=S)
    lo.add_argument("--tolerance", type=float, default=S)
    lo.add_argument("--family", choices=RATIO_STATS, default=S)
    lo.add_argument("--refs", default=S)
    return parser


def _load_config(path) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"--config: cannot read {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("--config: expected a JSON object")
    return dict(doc.get("config", doc))


def resolve_config(args: argparse.Namespace) -> dict:
    """Merge defaults < preset < config file < flags into one flat dict."""
    command = args.command
    cfg = dict(DEFAULTS[command])
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "verbose")}

    preset = flags.pop("preset", None)
    config_path = flags.pop("config", None)
    layers = []
    if preset is not None:
        layers.append(PRESETS[preset])
    if config_path is not None:
        layers.append(_load_config(config_path))

    for key in ("p_grid", "rho_grid"):
        if key in flags:
            flags["grid"] = flags.pop(key)
            flags["_grid_flag"] = "--" + key.replace("_", "-")
    for key in ("p", "rho"):
        if key in flags:
            flags["param"] = flags.pop(key)
    layers.append(flags)

    for layer in layers:
        # realizations and ratio_budget are alternatives; the later layer wins
        if "ratio_budget" in cfg:
            if layer.get("ratio_budget") is not None:
                cfg["realizations"] = None
            if layer.get("realizations") is not None:
                cfg["ratio_budget"] = None
        cfg.update({k: v for k, v in layer.items() if k in cfg or k.startswith("_")})

    if cfg.get("out") is None:
        cfg["out"] = os.environ.get(OUTPUT_ENV, ".")
    if "model" in cfg:
        if cfg["model"] is None:
            raise ConfigError("--model is required")
        try:
            cfg["model"] = Model.parse(cfg["model"]).value
        except SVSGraphError as exc:
            raise ConfigError(f"--model: {exc}") from None
    if command == "sweep":
        model = Model(cfg["model"])
        flag = cfg.pop("_grid_flag", _grid_flag(model))
        if model in (Model.DERG, Model.DRRG):
            grid = cfg["grid"]
            if grid is None:
                grid = PAPER_GRIDS[model.value] if preset else None
            if grid is None:
                raise ConfigError(f"{_grid_flag(model)} is required for {model.value}")
            cfg["grid"] = parse_grid(grid, flag)
        else:
            cfg["grid"] = []
    cfg.pop("_grid_flag", None)
    workers = cfg.get("workers", 1)
    if int(workers) != workers or workers < 1:
        raise ConfigError(f"--workers must be >= 1, got {workers!r}")
    return cfg


def _refs(cfg):
    if cfg.get("refs"):
        try:
            return ReferenceConstants.load(cfg["refs"])
        except (OSError, ValueError, TypeError) as exc:
            raise ConfigError(f"--refs: cannot load {cfg['refs']}: {exc}") from None
    return ReferenceConstants()


def _outdir(cfg) -> str:
    out = cfg["out"]
    try:
        os.makedirs(out, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from None
    if not os.access(out, os.W_OK):
        raise OSError(f"output directory {out} is not writable")
    return out


def _fmt_num(v, width=9):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "-".rjust(width)
    return f"{v:{width}.4g}"


def _print_table(points, out=sys.stdout):
    cols = ("n", "param", "k_mean", "rR_AAT_norm", "rC_AAT_norm", "rC_A_norm", "lmin_moment_ratio")
    print(" ".join(c.rjust(11) for c in cols), file=out)
    for p in points:
        row = p.row()
        print(" ".join(_fmt_num(row[c], 11) for c in cols), file=out)


def cmd_sweep(cfg) -> int:
    refs = _refs(cfg)
    spec = SweepSpec(
        model=cfg["model"], n_list=cfg["n"], param_grid=cfg["grid"],
        realizations=cfg["realizations"], ratio_budget=cfg["ratio_budget"],
        master_seed=cfg["seed"], statistics=cfg["stats"], squared=cfg["squared"],
        histograms=cfg["histograms"], bins=cfg["bins"],
    )
    out = _outdir(cfg)
    result = run_sweep(spec, refs=refs, workers=cfg["workers"])
    stem = os.path.join(out, f"sweep_{spec.model.value}")
    if cfg["format"] in ("csv", "both"):
        write_sweep_csv(result.points, stem + ".csv")
    if cfg["format"] in ("json", "both"):
        meta = provenance(_replayable(cfg), refs, budgets={
            n: spec.realizations_for(n) for n in spec.n_list
        })
        write_sweep_json(result.points, meta, stem + ".json", result.errors)
    _print_table(result.points)
    for params, exc in result.errors:
        print(f"error at {params}: {exc}", file=sys.stderr)
    return 1 if result.errors else 0


def _replayable(cfg) -> dict:
    return {k: v for k, v in cfg.items() if k not in ("out", "workers", "format")}


def cmd_calibrate(cfg) -> int:
    out = _outdir(cfg)
    cal = calibrate_references(
        cfg["n"], cfg["realizations"], cfg["seed"], squared=cfg["squared"],
        workers=cfg["workers"],
    )
    doc = provenance(_replayable(cfg))
    doc.update(cal.to_dict())
    path = write_json(doc, os.path.join(out, "constants.json"))
    for k, v in cal.constants.to_dict().items():
        print(f"{k:12s} {v:.5f} +- {cal.stderr[k]:.5f}")
    if cal.small_n_warning:
        print(f"warning: n={cal.n} is small; ratio endpoints are biased", file=sys.stderr)
    print(f"wrote {path}")
    return 0


def _hist_points(cfg, refs):
    """(tag, GraphModelParams, locate-info) for each requested histogram point."""
    model = Model(cfg["model"])
    targets = cfg["target_rbar"]
    if targets is not None and not isinstance(targets, (list, tuple)):
        targets = [targets]
    for n in cfg["n"]:
        if targets:
            for t in targets:
                if model not in (Model.DERG, Model.DRRG):
                    raise ConfigError("--target-rbar needs --model derg or drrg")
                loc = locate_parameter(
                    model, n, t, cfg["tolerance"], cfg["seed"], family=cfg["family"],
                    refs=refs, squared=cfg["squared"], workers=cfg["workers"],
                )
                yield f"n{n}_rbar{t:g}", GraphModelParams.of(model, n, loc.param), loc
        else:
            param = cfg["param"]
            if model in (Model.DERG, Model.DRRG) and param is None:
                flag = "--rho" if model is Model.DRRG else "--p"
                raise ConfigError(f"{flag} or --target-rbar is required")
            tag = f"n{n}" if param is None else f"n{n}_{param:g}"
            yield tag, GraphModelParams.of(model, n, param), None


def cmd_hist(cfg) -> int:
    refs = _refs(cfg)
    stats = cfg["stat"] if isinstance(cfg["stat"], (list, tuple)) else [cfg["stat"]]
    for s in stats:
        if s not in HIST_STATS:
            raise ConfigError(f"--stat: unknown statistic {s!r}")
    out = _outdir(cfg)
    wanted = [("min_singular" if s == "lmin" else s) for s in stats]
    summary = []
    for tag, params, loc in _hist_points(cfg, refs):
        R = cfg["realizations"] or math.ceil(cfg["ratio_budget"] / params.n)
        st = run_point(
            params, R, cfg["seed"], wanted, refs=refs, squared=cfg["squared"],
            histograms=True, bins=cfg["bins"], workers=cfg["workers"],
        )
        entry = {"tag": tag, "point": st.to_dict(), "files": {}}
        if loc is not None:
            entry["locate"] = {"param": loc.param, "estimate": loc.estimate,
                               "stderr": loc.stderr, "realizations": loc.realizations}
        for s in stats:
            h = st.lmin_histogram(cfg["bins"]) if s == "lmin" else st.histograms[s]
            name = f"hist_{params.model.value}_{tag}_{s}.csv"
            if cfg["format"] in ("csv", "both"):
                write_histogram_csv(h, os.path.join(out, name), overlay_columns(s, h.centers))
            entry["files"][s] = name
            entry.setdefault("histograms", {})[s] = {
                "bin_center": h.centers, "density": h.density,
                "out_of_range": h.out_of_range,
            }
            print(f"{params.model.value} {tag} {s}: {h.in_range} values, "
                  f"{h.out_of_range} out of range -> {name}")
        summary.append(entry)
    if cfg["format"] in ("json", "both"):
        doc = provenance(_replayable(cfg), refs, histograms=summary)
        write_json(doc, os.path.join(out, f"hist_{cfg['model']}.json"))
    return 0


def cmd_locate(cfg) -> int:
    if cfg["target_rbar"] is None:
        raise ConfigError("--target-rbar is required")
    refs = _refs(cfg)
    out = _outdir(cfg)
    loc = locate_parameter(
        cfg["model"], cfg["n"], cfg["target_rbar"], cfg["tolerance"], cfg["seed"],
        family=cfg["family"], refs=refs, squared=cfg["squared"], workers=cfg["workers"],
    )
    name = "rho" if cfg["model"] == Model.DRRG.value else "p"
    print(f"{name} = {loc.param:.6g}  <r> = {loc.estimate:.4f} +- {loc.stderr:.4f}  "
          f"({loc.iterations} bisections, {loc.realizations} realizations)")
    doc = provenance(_replayable(cfg), refs, result={
        "param": loc.param, "estimate": loc.estimate, "stderr": loc.stderr,
        "realizations": loc.realizations, "iterations": loc.iterations,
        "history": [list(h) for h in loc.history],
    })
    write_json(doc, os.path.join(out, f"locate_{cfg['model']}.json"))
    return 0


COMMANDS = {"sweep": cmd_sweep, "calibrate": cmd_calibrate, "hist": cmd_hist, "locate": cmd_locate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"svsgraph {args.command}: {exc}", file=sys.stderr)
        return 2
    except (SVSGraphError, OSError) as exc:
        print(f"svsgraph {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
