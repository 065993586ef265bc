"""Optical-flow datasets: ingestion, normalization, flow weights, simulation."""

from .dataset import (
    DatasetManifest,
    FlowDataset,
    FlowFrame,
    FlowStack,
    NormalizationConstants,
    SplitView,
    denormalize,
    group_frames,
    ingest,
    make_splits,
    normalize,
    stack_array,
    write_dataset,
)
from .io import read_flow, write_flow
from .simulate import SimScenario, decaying_days, simulate
from .weights import flow_weight, flow_weight_series, stack_weights, standardize_weights

__all__ = [
    "DatasetManifest", "FlowDataset", "FlowFrame", "FlowStack", "NormalizationConstants", "SimScenario",
    "SplitView", "decaying_days", "denormalize", "flow_weight", "flow_weight_series", "group_frames",
    "ingest", "make_splits", "normalize", "read_flow", "simulate", "stack_array", "stack_weights",
    "standardize_weights", "write_dataset", "write_flow",
]
