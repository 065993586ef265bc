"""Figures and image grids written to files (matplotlib, Agg backend)."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .metrics import fd_bins, window_label  # noqa: E402

TILE = 64
# svg output embeds a date unless told otherwise, which breaks byte-identical reruns
_SVG_META = {"Date": None}


def _save(fig, path):
    path = Path(path)
    kw = {"metadata": _SVG_META} if path.suffix == ".svg" else {}
    fig.savefig(path, **kw)
    plt.close(fig)
    return path


def auc_bar_figure(table: dict, path):
    """Bars of mean AUC with std error bars; ``table`` maps method -> (mean, std)."""
    names = list(table)
    means = [table[n][0] for n in names]
    stds = [table[n][1] for n in names]
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.bar(names, means, yerr=stds, capsize=3, color="0.6", edgecolor="k")
    ax.axhline(0.5, ls=":", c="k", lw=0.8)
    ax.set_ylim(0, 1)
    ax.set_ylabel("AUC")
    fig.tight_layout()
    return _save(fig, path)


def window_figure(windows: dict, path, significant: dict | None = None):
    """One line per method over window positions; ``windows[method][(lo, hi)] = (mean, std)``."""
    fig, ax = plt.subplots(figsize=(7, 3.5))
    keys = sorted({w for per in windows.values() for w in per})
    xs = np.arange(len(keys))
    for method, per in windows.items():
        ys = np.array([per.get(k, (np.nan, np.nan))[0] for k in keys], dtype=float)
        es = np.array([per.get(k, (np.nan, np.nan))[1] for k in keys], dtype=float)
        ax.errorbar(xs, ys, yerr=es, marker="o", capsize=2, label=method)
        for i, k in enumerate(keys):
            if significant and significant.get(method, {}).get(k):
                ax.annotate("*", (xs[i], ys[i]), textcoords="offset points", xytext=(0, 6), ha="center")
    ax.set_xticks(xs, [window_label(k) for k in keys])
    ax.axhline(0.5, ls=":", c="k", lw=0.8)
    ax.set_ylabel("AUC")
    ax.legend(fontsize=7)
    fig.tight_layout()
    return _save(fig, path)


def ofw_series_figure(series: dict, path):
    """Mean optical flow weight per day; ``series[day] = (mean, std)``."""
    days = sorted(series)
    mean = np.array([series[d][0] for d in days])
    std = np.array([series[d][1] for d in days])
    fig, ax = plt.subplots(figsize=(7, 3))
    ax.plot(days, mean, "k-o", ms=3)
    ax.fill_between(days, mean - std, mean + std, color="0.8")
    ax.axvline(0, ls="--", c="r", lw=0.8)
    ax.set_xlabel("day")
    ax.set_ylabel("flow weight")
    fig.tight_layout()
    return _save(fig, path)


def histogram_rows(groups: dict, max_bins: int = 50):
    """Per-group histogram rows ``(group, bin_lo, bin_hi, count)`` with group-specific bins."""
    rows = []
    for name, values in groups.items():
        values = np.asarray(values, dtype=np.float64)
        if values.size == 0:
            continue
        edges = fd_bins(values, max_bins)
        counts, _ = np.histogram(values, edges)
        rows += [(name, float(a), float(b), int(c)) for a, b, c in zip(edges[:-1], edges[1:], counts)]
    return rows


def export_distributions(distances: dict, likelihoods: dict, out_dir, max_bins: int = 50, prefix="split0"):
    """Histograms of distance to c (scaled by the global max) and of classifier likelihood.

    ``distances`` and ``likelihoods`` map group name (``iogen``, ``gen``,
    ``stable``, ``unstable``) to raw values. Writes one CSV and one SVG per
    quantity and returns their paths.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    top = max((float(np.max(v)) for v in distances.values() if len(v)), default=1.0)
    scaled = {k: np.asarray(v, dtype=np.float64) / (top if top > 0 else 1.0) for k, v in distances.items()}
    paths = []
    for quantity, groups in (("distance", scaled), ("likelihood", likelihoods)):
        rows = histogram_rows(groups, max_bins)
        csv_path = out / f"{prefix}_{quantity}_hist.csv"
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["group", "bin_lo", "bin_hi", "count"])
            w.writerows(rows)
        fig, ax = plt.subplots(figsize=(6, 3))
        for name, values in groups.items():
            values = np.asarray(values, dtype=np.float64)
            if values.size:
                ax.hist(values, bins=fd_bins(values, max_bins), density=True, histtype="step", label=name)
        ax.set_xlabel("normalized distance to c" if quantity == "distance" else "likelihood of unstable")
        ax.legend(fontsize=7)
        fig.tight_layout()
        paths += [csv_path, _save(fig, out / f"{prefix}_{quantity}_hist.svg")]
    return paths


def normalize_tile(img) -> np.ndarray:
    """Scale one image to [0, 1]; a constant image becomes mid-gray."""
    img = np.asarray(img, dtype=np.float64)
    lo, hi = img.min(), img.max()
    if hi <= lo:
        return np.full(img.shape, 0.5)
    return (img - lo) / (hi - lo)


def flow_gallery(synthetic, real) -> np.ndarray:
    """Grid of H/V tiles: synthetic H, synthetic V, real H, real V rows.

    Inputs are ``(n, 64, 64, 2m)`` stacks; the first flow of each is shown.
    """
    synthetic = np.asarray(synthetic)
    real = np.asarray(real)
    n = max(len(synthetic), len(real))
    grid = np.full((4 * TILE, n * TILE), 0.5)
    for block, stacks in enumerate((synthetic, real)):
        for col, stack in enumerate(stacks):
            for comp in range(2):
                r = 2 * block + comp
                grid[r * TILE:(r + 1) * TILE, col * TILE:(col + 1) * TILE] = normalize_tile(stack[..., comp])
    return grid


def export_flow_gallery(generator, real, n: int, path, rng) -> np.ndarray:
    """Render ``n`` generated and ``n`` real stacks into a grayscale PNG."""
    grid = flow_gallery(generator.sample(rng, n), np.asarray(real)[:n])
    plt.imsave(path, grid, cmap="gray", vmin=0.0, vmax=1.0)
    return grid
