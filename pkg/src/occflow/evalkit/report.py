"""Three-split reports: aggregation, tables and the run directory."""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

from .metrics import mean_std, welch_test, window_label

log = logging.getLogger(__name__)

REFERENCE_METHOD = "dsvdd"


@dataclass
class MethodResult:
    """Per-split numbers for one scoring method."""

    per_split: list = field(default_factory=list)  # AUC per split
    accuracy: list = field(default_factory=list)  # best-threshold accuracy per split
    windows: dict = field(default_factory=dict)  # (lo, hi) -> per-split AUC list (None when absent)
    notes: dict = field(default_factory=dict)

    @property
    def mean_std(self):
        return mean_std(self.per_split)


@dataclass
class EvalReport:
    methods: dict  # name -> MethodResult
    config: dict
    config_hash: str
    seeds: dict
    medians: dict = field(default_factory=dict)  # split -> group -> {distance, likelihood}
    significance: float = 0.05

    def table(self) -> dict:
        return {name: r.mean_std for name, r in self.methods.items()}

    def window_table(self) -> dict:
        return {name: {w: mean_std(v) for w, v in r.windows.items()} for name, r in self.methods.items()}

    def window_pvalues(self) -> dict:
        """Welch p-value of each method's window AUCs against DSVDD's."""
        ref = self.methods.get(REFERENCE_METHOD)
        out = {}
        for name, r in self.methods.items():
            if ref is None or name == REFERENCE_METHOD:
                continue
            out[name] = {}
            for w, vals in r.windows.items():
                a = [v for v in vals if v is not None]
                b = [v for v in ref.windows.get(w, []) if v is not None]
                out[name][w] = welch_test(a, b)
        return out

    def significant_improvements(self) -> dict:
        ref = self.window_table().get(REFERENCE_METHOD, {})
        wt = self.window_table()
        return {name: {w: (p == p and p < self.significance and wt[name][w][0] > ref.get(w, (1.0,))[0])
                       for w, p in per.items()}
                for name, per in self.window_pvalues().items()}

    def to_json(self) -> dict:
        pv = self.window_pvalues()
        methods = {}
        for name, r in self.methods.items():
            mean, std = r.mean_std
            methods[name] = {
                "auc_per_split": r.per_split,
                "auc_mean": mean,
                "auc_std": std,
                "best_threshold_accuracy": r.accuracy,
                "windows": {window_label(w): {"per_split": v, "mean": mean_std(v)[0], "std": mean_std(v)[1],
                                              "p_vs_dsvdd": pv.get(name, {}).get(w)}
                            for w, v in r.windows.items()},
                **({"notes": r.notes} if r.notes else {}),
            }
        return {"config_hash": self.config_hash, "seeds": self.seeds, "methods": methods,
                "medians": self.medians, "config": self.config}

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["table", "method", "window", "split", "auc"])
            for name, r in self.methods.items():
                for k, v in enumerate(r.per_split):
                    w.writerow(["overall", name, "", k, _fmt(v)])
                mean, std = r.mean_std
                w.writerow(["overall", name, "", "mean", _fmt(mean)])
                w.writerow(["overall", name, "", "std", _fmt(std)])
                for win, vals in r.windows.items():
                    for k, v in enumerate(vals):
                        w.writerow(["window", name, window_label(win), k, _fmt(v)])
                    wm, ws = mean_std(vals)
                    w.writerow(["window", name, window_label(win), "mean", _fmt(wm)])
                    w.writerow(["window", name, window_label(win), "std", _fmt(ws)])


def _fmt(v):
    return "" if v is None else repr(float(v))


def run_dir_name(config_hash: str, timestamp: float | None = None) -> str:
    ts = time.strftime("%Y%m%dT%H%M%S", time.gmtime(time.time() if timestamp is None else timestamp))
    return f"{ts}-{config_hash[:12]}"


def write_report(report: EvalReport, out_root, timestamp: float | None = None) -> Path:
    """Write report.json and report.csv into a fresh ``<timestamp>-<hash>`` directory."""
    run = Path(out_root) / run_dir_name(report.config_hash, timestamp)
    run.mkdir(parents=True, exist_ok=True)
    (run / "report.json").write_text(json.dumps(report.to_json(), indent=2, sort_keys=True))
    report.write_csv(run / "report.csv")
    return run


def ablation_rows(results: dict) -> list[dict]:
    """Table rows from ``results[m] = per-split AUC list`` where failures are None."""
    rows = []
    for m in sorted(results):
        vals = results[m]
        mean, std = mean_std(vals)
        rows.append({"m": m, "auc_per_split": vals, "auc_mean": mean, "auc_std": std,
                     "failed_splits": [k for k, v in enumerate(vals) if v is None]})
    return rows


def run_ablation(m_values, n_splits: int, run_split) -> list[dict]:
    """Call ``run_split(m, k) -> AUC`` for every m and split.

    A failing split is logged and marked instead of aborting the table.
    """
    results = {}
    for m in m_values:
        results[m] = []
        for k in range(n_splits):
            try:
                results[m].append(float(run_split(m, k)))
            except Exception as exc:  # keep the partial table
                log.error("ablation m=%d split %d failed: %s", m, k, exc)
                results[m].append(None)
    return ablation_rows(results)


def write_ablation(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["m", "auc_mean", "auc_std", *[f"split{k}" for k in range(len(rows[0]["auc_per_split"]))]])
        for r in rows:
            w.writerow([r["m"], _fmt(r["auc_mean"]), _fmt(r["auc_std"]),
                        *["FAILED" if v is None else _fmt(v) for v in r["auc_per_split"]]])
