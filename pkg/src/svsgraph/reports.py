"""CSV and JSON writers for graphs, spectra, ratio samples, histograms and sweeps."""

from __future__ import annotations

import csv
import json
import math
import os
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .stats import pdf_goe_ratio, pdf_pe_min_singular, pdf_pe_ratio

SWEEP_HEADER = (
    "model", "n", "param", "k_mean", "rR_AAT", "rC_AAT", "rC_A",
    "rR_AAT_norm", "rC_AAT_norm", "rC_A_norm",
    "lmin_mean", "lmin_meansq", "lmin_moment_ratio", "samples",
)


def _fmt(v):
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def write_edges_csv(g, path):
    """Nonzero entries of a weighted adjacency matrix as ``u,v,w`` triples."""
    rows, cols = np.nonzero(g.adjacency)
    return _write_rows(
        path, ("u", "v", "w"),
        ((int(u), int(v), float(g.adjacency[u, v])) for u, v in zip(rows, cols)),
    )


def write_spectrum_csv(spectrum, path):
    v = np.asarray(spectrum.values)
    if np.iscomplexobj(v):
        return _write_rows(
            path, ("index", "re", "im"),
            ((i, float(z.real), float(z.imag)) for i, z in enumerate(v)),
        )
    return _write_rows(path, ("index", "value"), ((i, float(x)) for i, x in enumerate(v)))


def write_ratios_csv(sample, path):
    return _write_rows(path, ("r",), ((float(r),) for r in sample.values))


def overlay_columns(stat: str, centers) -> dict:
    """Reference densities evaluated at bin centers for a histogrammed statistic."""
    if stat == "lmin":
        return {"exp_pdf": pdf_pe_min_singular(centers)}
    c = np.clip(centers, 0.0, 1.0)
    return {"pe_pdf": pdf_pe_ratio(c), "goe_pdf": pdf_goe_ratio(c)}


def write_histogram_csv(hist, path, overlays: dict | None = None):
    """``bin_center,density`` plus one column per overlay curve."""
    overlays = overlays or {}
    header = ("bin_center", "density") + tuple(overlays)
    cols = [hist.centers, hist.density] + [np.asarray(v) for v in overlays.values()]
    return _write_rows(path, header, (tuple(float(c[i]) for c in cols) for i in range(len(hist.counts))))


def write_sweep_csv(points, path):
    return _write_rows(
        path, SWEEP_HEADER, ([p.row()[k] for k in SWEEP_HEADER] for p in points)
    )


def read_sweep_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def provenance(config: dict, refs=None, **extra) -> dict:
    meta = {
        "version": __version__,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "config": config,
    }
    if refs is not None:
        meta["constants"] = refs.to_dict()
    meta.update(extra)
    return meta


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def write_json(doc: dict, path):
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(_jsonable(doc), fh, indent=2)
        fh.write("\n")
    os.replace(tmp, path)
    return path


def write_sweep_json(points, meta: dict, path, errors=()):
    doc = dict(meta)
    doc["points"] = [p.to_dict() for p in points]
    doc["errors"] = [{"params": repr(p), "error": str(e)} for p, e in errors]
    return write_json(doc, path)
