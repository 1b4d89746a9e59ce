"""Figure kinds and the render operation.

Four figure kinds, each reading one artifact schema:

- ``posterior-density``: chain CSVs -> per-coordinate kernel-density curves
  (one curve per input file).  The only smoothing step anywhere; the
  bandwidth of every curve is recorded in the caption and PNG metadata.
- ``predictive-bars``: a predictive summary JSON -> cell-frequency bars with
  one-standard-deviation error bars.
- ``beta-distribution``: calibration JSONs -> histogram of their calibrated
  weights, one value per input file.
- ``cost-scaling``: a cost summary JSON -> log-log runtime curves, annotated
  with the slopes recorded in the artifact (never refitted here).
"""

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

KINDS = ("posterior-density", "predictive-bars", "beta-distribution",
         "cost-scaling")


class SchemaError(Exception):
    """An input file does not conform to the expected artifact schema."""


@dataclass
class FigureSpec:
    kind: str
    inputs: tuple
    out: Path
    bandwidth: float = None   # posterior-density; None = per-curve rule
    bins: int = 20            # beta-distribution histogram
    dpi: int = 120

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError("unknown figure kind %r; expected one of %s"
                             % (self.kind, ", ".join(KINDS)))
        self.inputs = tuple(Path(p) for p in self.inputs)
        self.out = Path(self.out)
        if not self.inputs:
            raise ValueError("at least one input path is required")


# ---------------------------------------------------------------------------
# Artifact readers (independent of the producing package; files only)

def _read_json(path, required):
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise SchemaError("%s: not valid JSON (%s)" % (path, err))
    if not isinstance(doc, dict):
        raise SchemaError("%s: expected a JSON object" % path)
    for key in required:
        if key not in doc:
            raise SchemaError("%s: missing column '%s'" % (path, key))
    return doc


def read_chain_csv(path):
    """Parse a chain CSV into (coordinate names, pooled draws matrix)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError("%s: empty file" % path)
    header = rows[0]
    if header[:3] != ["chain_id", "iter", "log_density"] or len(header) < 4:
        raise SchemaError(
            "%s: expected columns chain_id, iter, log_density, theta_*; "
            "got %s" % (path, header))
    names = header[3:]
    for name in names:
        if not name.startswith("theta_"):
            raise SchemaError("%s: unexpected column '%s'" % (path, name))
    draws = np.empty((len(rows) - 1, len(names)))
    for r, row in enumerate(rows[1:]):
        if len(row) != len(header):
            raise SchemaError("%s: row %d has %d fields, header has %d"
                              % (path, r + 2, len(row), len(header)))
        for c, name in enumerate(names):
            cell = row[3 + c]
            try:
                draws[r, c] = float(cell)
            except ValueError:
                raise SchemaError("%s: non-numeric value %r in column '%s'"
                                  % (path, cell, name))
    if draws.shape[0] == 0:
        raise SchemaError("%s: no draws" % path)
    return names, draws


# ---------------------------------------------------------------------------
# Display smoothing

def rule_of_thumb_bandwidth(x):
    """0.9 * min(sd, iqr/1.34) * n^(-1/5), with degenerate-spread fallback."""
    x = np.asarray(x, dtype=float)
    n = x.size
    sd = float(np.std(x, ddof=1)) if n > 1 else 0.0
    q75, q25 = np.percentile(x, [75.0, 25.0])
    candidates = [s for s in (sd, float(q75 - q25) / 1.34) if s > 0.0]
    h = 0.9 * min(candidates) * n ** -0.2 if candidates else 0.0
    if h <= 0.0:
        h = 1e-3 * (1.0 + abs(float(np.mean(x))))
    return h


def kde_curve(x, bandwidth=None, grid_size=256):
    """Gaussian kernel-density curve: (grid, density, bandwidth used)."""
    x = np.asarray(x, dtype=float)
    h = float(bandwidth) if bandwidth else rule_of_thumb_bandwidth(x)
    grid = np.linspace(x.min() - 3.0 * h, x.max() + 3.0 * h, grid_size)
    z = (grid[:, None] - x[None, :]) / h
    dens = np.exp(-0.5 * z * z).sum(axis=1) / (x.size * h * math.sqrt(2.0 * math.pi))
    return grid, dens, h


# ---------------------------------------------------------------------------
# Renderers (one per kind); each returns the info it drew on the figure

def _save(fig, spec, caption, meta_extra):
    if caption:
        fig.text(0.5, 0.005, caption, ha="center", va="bottom", fontsize=6)
    meta = {"Title": spec.kind}
    meta.update(meta_extra)
    kwargs = {"dpi": spec.dpi}
    if spec.out.suffix.lower() == ".png":
        kwargs["metadata"] = meta
    spec.out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(spec.out, **kwargs)
    plt.close(fig)


def _render_posterior_density(spec):
    parsed = [(Path(p).stem, *read_chain_csv(p)) for p in spec.inputs]
    names0 = parsed[0][1]
    for stem, names, _ in parsed[1:]:
        if names != names0:
            raise SchemaError(
                "input '%s' has parameter columns %s, first input has %s"
                % (stem, names, names0))
    n_coord = len(names0)
    fig, axes = plt.subplots(1, n_coord, figsize=(3.4 * n_coord, 2.8),
                             squeeze=False, constrained_layout=True)
    bandwidths = {}
    for j, name in enumerate(names0):
        ax = axes[0][j]
        for stem, _, draws in parsed:
            grid, dens, h = kde_curve(draws[:, j], spec.bandwidth)
            bandwidths["%s:%s" % (stem, name)] = h
            ax.plot(grid, dens, label=stem, linewidth=1.2)
        ax.set_xlabel(name)
        ax.set_ylabel("density" if j == 0 else "")
        if len(parsed) > 1 and j == 0:
            ax.legend(fontsize=6)
    caption = "KDE bandwidths: " + ", ".join(
        "%s=%.4g" % (k, v) for k, v in sorted(bandwidths.items()))
    _save(fig, spec, caption, {"Description": caption})
    return {"kind": spec.kind, "out": str(spec.out),
            "bandwidths": bandwidths}


def _render_predictive_bars(spec):
    if len(spec.inputs) != 1:
        raise ValueError("predictive-bars takes exactly one input file")
    doc = _read_json(spec.inputs[0], ("cells", "mean", "sd"))
    cells, mean, sd = doc["cells"], doc["mean"], doc["sd"]
    if not (len(cells) == len(mean) == len(sd)):
        raise SchemaError("%s: columns 'cells', 'mean', 'sd' have unequal "
                          "lengths" % spec.inputs[0])
    fig, ax = plt.subplots(figsize=(5.0, 3.2), constrained_layout=True)
    ax.bar(cells, mean, yerr=sd, capsize=2, color="#7d9fc2",
           edgecolor="#3b5a7d", linewidth=0.6)
    ax.set_xlabel("cell value")
    ax.set_ylabel("predictive frequency")
    _save(fig, spec, "error bars: one standard deviation", {})
    return {"kind": spec.kind, "out": str(spec.out),
            "cells": len(cells), "max_sd": float(max(sd, default=0.0))}


def _render_beta_distribution(spec):
    values = [float(_read_json(p, ("beta_star",))["beta_star"])
              for p in spec.inputs]
    fig, ax = plt.subplots(figsize=(5.0, 3.2), constrained_layout=True)
    ax.hist(values, bins=spec.bins, color="#8fbf8f", edgecolor="#4a7a4a",
            linewidth=0.6)
    ax.set_xlabel("calibrated weight")
    ax.set_ylabel("count")
    _save(fig, spec, "%d calibration artifacts, %d bins"
          % (len(values), spec.bins), {})
    return {"kind": spec.kind, "out": str(spec.out),
            "n_inputs": len(values)}


def _render_cost_scaling(spec):
    if len(spec.inputs) != 1:
        raise ValueError("cost-scaling takes exactly one input file")
    doc = _read_json(spec.inputs[0],
                     ("ns", "dfd_seconds", "ksd_seconds",
                      "slope_dfd", "slope_ksd"))
    ns = doc["ns"]
    fig, ax = plt.subplots(figsize=(5.0, 3.4), constrained_layout=True)
    for key, color in (("dfd", "#3b5a7d"), ("ksd", "#a05252")):
        secs = doc["%s_seconds" % key]
        if len(secs) != len(ns):
            raise SchemaError("%s: column '%s_seconds' length differs from "
                              "'ns'" % (spec.inputs[0], key))
        slope = doc["slope_%s" % key]
        ax.loglog(ns, secs, marker="o", markersize=3, color=color,
                  label="%s (slope %.3f)" % (key, slope))
    ax.set_xlabel("n (observations)")
    ax.set_ylabel("seconds per loss evaluation")
    ax.legend(fontsize=7)
    _save(fig, spec, "slopes as recorded in the artifact (not refitted)", {})
    return {"kind": spec.kind, "out": str(spec.out),
            "slope_dfd": float(doc["slope_dfd"]),
            "slope_ksd": float(doc["slope_ksd"])}


_RENDERERS = {
    "posterior-density": _render_posterior_density,
    "predictive-bars": _render_predictive_bars,
    "beta-distribution": _render_beta_distribution,
    "cost-scaling": _render_cost_scaling,
}


def render(spec):
    """Render the figure described by `spec`; returns what was drawn."""
    return _RENDERERS[spec.kind](spec)
