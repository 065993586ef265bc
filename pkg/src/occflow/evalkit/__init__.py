"""AUC evaluation, split aggregation, ablation tables and figure export."""

from .metrics import (
    STABLE,
    UNSTABLE,
    ScoredSample,
    auc,
    auc_scores,
    best_threshold_accuracy,
    fd_bins,
    kendall_tau,
    mean_std,
    scored_samples,
    welch_test,
    window_label,
    windowed_auc,
)
from .plots import (
    auc_bar_figure,
    export_distributions,
    export_flow_gallery,
    flow_gallery,
    normalize_tile,
    ofw_series_figure,
    window_figure,
)
from .report import EvalReport, MethodResult, ablation_rows, run_ablation, run_dir_name, write_ablation, write_report

__all__ = [
    "EvalReport", "MethodResult", "STABLE", "ScoredSample", "UNSTABLE", "ablation_rows", "auc",
    "auc_bar_figure", "auc_scores", "best_threshold_accuracy", "export_distributions", "export_flow_gallery",
    "fd_bins", "flow_gallery", "kendall_tau", "mean_std", "normalize_tile", "ofw_series_figure",
    "run_ablation", "run_dir_name", "scored_samples", "welch_test", "window_figure", "window_label",
    "windowed_auc", "write_ablation", "write_report",
]
