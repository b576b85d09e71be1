"""Report emission: JSON documents, CSV series, and figure rendering.

Reports are deterministic for a fixed configuration and seed.  Figures are
rendered to files next to the delimited output (disable with --no-figures);
the CSV series remain the stable machine interface.
"""

from __future__ import annotations

import json
import os

import numpy as np

__all__ = ["ReportWriter"]


def _fig_modules():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


class ReportWriter:
    def __init__(self, outdir, figures=True):
        self.outdir = outdir
        self.figures = figures
        os.makedirs(outdir, exist_ok=True)
        self.written = []

    def _path(self, name):
        path = os.path.join(self.outdir, name)
        self.written.append(path)
        return path

    def write_json(self, name, payload):
        with open(self._path(name), "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, default=_jsonable)
        return self.written[-1]

    def write_csv(self, name, header, rows):
        with open(self._path(name), "w", encoding="utf-8") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(f"{x:.17g}" for x in row) + "\n")
        return self.written[-1]

    # -- csv layouts ----------------------------------------------------------

    def mass_csv(self, report):
        header = ["R"] + [f"charge_V{i}" for i in range(report.n + 1)]
        rows = [[report.radii[j]] + [report.charges[i, j] for i in range(report.n + 1)]
                for j in range(len(report.radii))]
        return self.write_csv("mass_charges.csv", header, rows)

    def margin_csv(self, grid, margin_profile, name="dec_margin.csv"):
        return self.write_csv(name, ["r", "min_margin_over_sphere"],
                              [[r, m] for r, m in zip(grid.r, margin_profile)])

    def history_csv(self, history, name="history.csv"):
        keys = sorted({k for step in history for k in step
                       if np.isscalar(step[k]) and not isinstance(step[k], (str, bool))})
        rows = [[float(step.get(k, np.nan)) for k in keys] for step in history]
        return self.write_csv(name, keys, rows)

    # -- figures ----------------------------------------------------------------

    def mass_figure(self, report, name="mass_charges.png"):
        if not self.figures:
            return None
        plt = _fig_modules()
        fig, ax = plt.subplots(figsize=(6, 4))
        norm = report.normalization
        for i in range(report.n + 1):
            ax.plot(report.radii, norm * report.charges[i], "o-", label=f"V({i})")
            ax.axhline(report.masses[i], color=f"C{i}", ls="--", lw=0.8)
        ax.set_xlabel("shell radius R")
        ax.set_ylabel("normalized shell charge")
        ax.legend(fontsize=8)
        ax.set_title("charge convergence (dashed: extrapolated)")
        fig.tight_layout()
        fig.savefig(self._path(name), dpi=130)
        plt.close(fig)
        return self.written[-1]

    def margin_figure(self, grid, margin_profile, gamma=0.0, name="dec_margin.png"):
        if not self.figures:
            return None
        plt = _fig_modules()
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(grid.r, margin_profile, "-")
        ax.axhline(0.0, color="k", lw=0.8)
        ax.set_xlabel("r")
        ax.set_ylabel(f"min over sphere of mu - (1+{gamma:.3g})|J|")
        ax.set_yscale("symlog", linthresh=1e-12)
        fig.tight_layout()
        fig.savefig(self._path(name), dpi=130)
        plt.close(fig)
        return self.written[-1]

    def residual_figure(self, history, key="residual", name="residuals.png"):
        if not self.figures:
            return None
        vals = [step[key] for step in history if key in step]
        if not vals:
            return None
        plt = _fig_modules()
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.semilogy(range(len(vals)), vals, "o-")
        ax.set_xlabel("iteration")
        ax.set_ylabel(key)
        fig.tight_layout()
        fig.savefig(self._path(name), dpi=130)
        plt.close(fig)
        return self.written[-1]

    def radial_figure(self, r, series, labels, ylabel, name):
        if not self.figures:
            return None
        plt = _fig_modules()
        fig, ax = plt.subplots(figsize=(6, 4))
        for y, lab in zip(series, labels):
            ax.semilogy(r, np.abs(y), label=lab)
        ax.set_xlabel("r")
        ax.set_ylabel(ylabel)
        ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(self._path(name), dpi=130)
        plt.close(fig)
        return self.written[-1]


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return str(x)
