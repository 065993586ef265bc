"""Frames, stacks, splits, normalization and ingestion."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError, IngestionError, NumericError
from . import io

log = logging.getLogger(__name__)

N_SPLITS = 3
TRAIN_FRACTION = 0.8


@dataclass(frozen=True)
class FlowFrame:
    horizontal: np.ndarray
    vertical: np.ndarray
    timestamp: int
    day_label: int

    def __post_init__(self):
        if np.shape(self.horizontal) != (io.GRID, io.GRID) or np.shape(self.vertical) != (io.GRID, io.GRID):
            raise ConfigurationError(f"flow grids must be {io.GRID}x{io.GRID}")
        if self.day_label == 0:
            raise ConfigurationError("day label 0 is the removal instant and never labels a sample")


@dataclass(frozen=True)
class FlowStack:
    """``m`` consecutive frames from one day; the unit the models consume."""

    key: str
    frames: tuple
    class_label: str

    def __post_init__(self):
        days = {f.day_label for f in self.frames}
        if len(days) != 1:
            raise ConfigurationError(f"stack {self.key} mixes day labels {sorted(days)}")

    @property
    def m(self) -> int:
        return len(self.frames)

    @property
    def day_label(self) -> int:
        return self.frames[0].day_label

    @property
    def timestamp(self) -> int:
        return self.frames[0].timestamp

    def raw(self) -> np.ndarray:
        """Unnormalized ``(64, 64, 2m)`` array, channels ``h1, v1, h2, v2, ...``."""
        chans = []
        for f in self.frames:
            chans += [f.horizontal, f.vertical]
        return np.stack(chans, axis=-1)


def stack_array(stacks) -> np.ndarray:
    if not stacks:
        return np.zeros((0, io.GRID, io.GRID, 0))
    return np.stack([s.raw() for s in stacks])


@dataclass(frozen=True)
class NormalizationConstants:
    """Global per-component (horizontal, vertical) min and max."""

    minimum: tuple
    maximum: tuple

    def __post_init__(self):
        for lo, hi in zip(self.minimum, self.maximum):
            if not hi > lo:
                raise NumericError(f"degenerate normalization range [{lo}, {hi}]")

    @classmethod
    def from_arrays(cls, raw: np.ndarray) -> "NormalizationConstants":
        """Constants from raw stacks ``(N, 64, 64, 2m)``."""
        if raw.size == 0:
            raise ConfigurationError("cannot compute normalization constants from an empty set")
        comps = [raw[..., c::2] for c in (0, 1)]
        return cls(tuple(float(c.min()) for c in comps), tuple(float(c.max()) for c in comps))

    def to_dict(self) -> dict:
        return {"min": list(self.minimum), "max": list(self.maximum)}

    @classmethod
    def from_dict(cls, d) -> "NormalizationConstants":
        return cls(tuple(d["min"]), tuple(d["max"]))

    def _per_channel(self, n_channels):
        lo = np.array([self.minimum[c % 2] for c in range(n_channels)])
        hi = np.array([self.maximum[c % 2] for c in range(n_channels)])
        return lo, hi


def normalize(stack, constants: NormalizationConstants) -> np.ndarray:
    """Affine map of ``[min, max]`` onto ``[-1, 1]`` per component, clamping outside values.

    Accepts a :class:`FlowStack` or raw arrays whose last axis is ``2m``.
    """
    raw = stack.raw() if isinstance(stack, FlowStack) else np.asarray(stack, dtype=np.float64)
    lo, hi = constants._per_channel(raw.shape[-1])
    out = 2.0 * (raw - lo) / (hi - lo) - 1.0
    return np.clip(out, -1.0, 1.0)


def denormalize(x, constants: NormalizationConstants) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    lo, hi = constants._per_channel(x.shape[-1])
    return (x + 1.0) / 2.0 * (hi - lo) + lo


def make_splits(stable_keys, seed: int, mode: str = "random", n_splits: int = N_SPLITS,
                train_fraction: float = TRAIN_FRACTION) -> list[dict]:
    """Three train/test partitions of the stable stacks (unstable stacks are test-only).

    ``random`` shuffles under ``seed``; ``chronological`` keeps the key order
    and holds out a contiguous block at a different offset per split.
    """
    keys = list(stable_keys)
    n = len(keys)
    if n < 2:
        raise ConfigurationError("need at least two stable stacks to split")
    n_train = min(max(int(round(n * train_fraction)), 1), n - 1)
    n_test = n - n_train
    splits = []
    for k in range(n_splits):
        if mode == "random":
            order = np.random.default_rng([seed, k]).permutation(n)
            train_idx, test_idx = sorted(order[:n_train]), sorted(order[n_train:])
        elif mode == "chronological":
            start = (k * (n - n_test)) // max(n_splits - 1, 1)
            test_idx = list(range(start, start + n_test))
            train_idx = [i for i in range(n) if i < start or i >= start + n_test]
        else:
            raise ConfigurationError(f"unknown split mode {mode!r}")
        splits.append({"id": k, "train": [keys[i] for i in train_idx], "test": [keys[i] for i in test_idx]})
    return splits


def stack_key(cls: str, day: int, start: int) -> str:
    return f"{cls}/{io.day_dirname(day)}/{start:06d}"


def group_frames(indices, m: int):
    """Consecutive groups of ``m`` frame indices; a short tail is dropped."""
    usable = len(indices) - len(indices) % m
    return [tuple(indices[i:i + m]) for i in range(0, usable, m)]


@dataclass
class DatasetManifest:
    root: Path
    m: int
    counts: dict
    day_labels: list
    splits: list
    normalization: list  # NormalizationConstants per split
    split_seed: int = 0
    split_mode: str = "random"

    def to_json(self) -> dict:
        return {
            "format": "occflow-dataset",
            "version": 1,
            "m": self.m,
            "counts": self.counts,
            "day_labels": self.day_labels,
            "split_seed": self.split_seed,
            "split_mode": self.split_mode,
            "train_fraction": TRAIN_FRACTION,
            "splits": self.splits,
            "normalization": [c.to_dict() for c in self.normalization],
        }


@dataclass
class SplitView:
    split_id: int
    train: list
    test_stable: list
    unstable: list
    constants: NormalizationConstants

    def normalized(self, stacks) -> np.ndarray:
        return normalize(stack_array(stacks), self.constants) if stacks else np.zeros((0, io.GRID, io.GRID, 0))


@dataclass
class FlowDataset:
    manifest: DatasetManifest
    stacks: dict = field(default_factory=dict)  # key -> FlowStack, in disk order

    @property
    def stable(self) -> list:
        return [s for s in self.stacks.values() if s.class_label == "stable"]

    @property
    def unstable(self) -> list:
        return [s for s in self.stacks.values() if s.class_label == "unstable"]

    def split(self, k: int) -> SplitView:
        spec = self.manifest.splits[k]
        train = [self.stacks[key] for key in spec["train"] if key in self.stacks]
        test = [self.stacks[key] for key in spec["test"] if key in self.stacks]
        return SplitView(k, train, test, self.unstable, self.manifest.normalization[k])

    def frames(self) -> list:
        """Every frame, ordered by day then index (the m = 1 view)."""
        out = [f for s in self.stacks.values() for f in s.frames]
        return sorted(out, key=lambda f: (f.day_label, f.timestamp))


def ingest(root, m: int | None = None) -> FlowDataset:
    """Read a canonical dataset directory into stacks of ``m`` frames.

    Split definitions come from the manifest when they were written for the
    same ``m``; otherwise they are re-derived from the manifest's split seed.
    Normalization constants are recomputed from each split's stable-train
    stacks only.
    """
    root = Path(root)
    meta = io.read_manifest(root)
    m = int(meta.get("m", 2) if m is None else m)
    if m <= 0:
        raise ConfigurationError("m must be positive")
    layout = io.scan_frames(root)
    if not layout:
        raise IngestionError(root, "no class/day directories found")

    stacks = {}
    ts = 0
    for (cls, day) in sorted(layout, key=lambda cd: (io.CLASSES.index(cd[0]), cd[1])):
        indices = layout[(cls, day)]
        if len(indices) % m:
            log.warning("%s/%s: %d frames not divisible by m=%d; dropping %d trailing frame(s)",
                        cls, io.day_dirname(day), len(indices), m, len(indices) % m)
        for group in group_frames(indices, m):
            frames = []
            for idx in group:
                h, v = io.read_flow(io.frame_path(root, cls, day, idx))
                frames.append(FlowFrame(h, v, ts, day))
                ts += 1
            key = stack_key(cls, day, group[0])
            stacks[key] = FlowStack(key, tuple(frames), cls)

    stable_keys = [k for k, s in stacks.items() if s.class_label == "stable"]
    unstable_keys = {k for k, s in stacks.items() if s.class_label == "unstable"}
    seed = int(meta.get("split_seed", 0))
    mode = meta.get("split_mode", "random")
    if meta.get("splits") and int(meta.get("m", -1)) == m:
        splits = []
        for spec in meta["splits"]:
            leaked = unstable_keys.intersection(spec["train"])
            if leaked:
                raise IngestionError(root / io.MANIFEST, f"unstable stacks in a training split: {sorted(leaked)[:3]}")
            missing = [k for k in spec["train"] + spec["test"] if k not in stacks]
            if missing:
                log.warning("split %s references %d stack(s) not on disk; ignoring them", spec["id"], len(missing))
            splits.append({"id": spec["id"], "train": list(spec["train"]), "test": list(spec["test"])})
    else:
        splits = make_splits(stable_keys, seed, mode)
    if len(splits) != N_SPLITS:
        raise IngestionError(root / io.MANIFEST, f"expected {N_SPLITS} splits, found {len(splits)}")

    constants = []
    for spec in splits:
        train = [stacks[k] for k in spec["train"] if k in stacks]
        if not train:
            raise IngestionError(root / io.MANIFEST, f"split {spec['id']} has no training stacks on disk")
        constants.append(NormalizationConstants.from_arrays(stack_array(train)))

    counts = {
        "stable": len(stable_keys),
        "unstable": len(unstable_keys),
        "splits": [{"train": len(s["train"]), "test": len(s["test"])} for s in splits],
    }
    days = sorted({s.day_label for s in stacks.values()})
    manifest = DatasetManifest(root, m, counts, days, splits, constants, seed, mode)
    log.info("ingested %s: m=%d, %d stable and %d unstable stacks", root, m, counts["stable"], counts["unstable"])
    return FlowDataset(manifest, stacks)


def write_dataset(root, frames: dict, m: int, split_seed: int = 0, split_mode: str = "random") -> DatasetManifest:
    """Write frames in the canonical layout and a manifest for stacks of ``m``.

    ``frames`` maps ``(class, day)`` to an array ``(n, 2, 64, 64)`` of
    horizontal/vertical grids in temporal order. This is also the adapter
    point for foreign dataset formats: convert to this mapping, then call here.
    """
    root = Path(root)
    for (cls, day), arr in sorted(frames.items()):
        if cls not in io.CLASSES:
            raise ConfigurationError(f"unknown class {cls!r}")
        for i, fr in enumerate(np.asarray(arr)):
            io.write_flow(io.frame_path(root, cls, day, i), fr[0], fr[1])
    stable_keys = []
    for (cls, day), arr in sorted(frames.items(), key=lambda kv: (io.CLASSES.index(kv[0][0]), kv[0][1])):
        if cls == "stable":
            stable_keys += [stack_key(cls, day, g[0]) for g in group_frames(list(range(len(arr))), m)]
    meta = {
        "format": "occflow-dataset",
        "version": 1,
        "m": m,
        "split_seed": split_seed,
        "split_mode": split_mode,
        "train_fraction": TRAIN_FRACTION,
        "splits": make_splits(stable_keys, split_seed, split_mode),
        "frame_counts": {f"{cls}/{io.day_dirname(day)}": int(len(arr)) for (cls, day), arr in sorted(frames.items())},
    }
    io.write_manifest(root, meta)
    # A second pass fills in counts and normalization constants from the written files.
    manifest = ingest(root, m).manifest
    io.write_manifest(root, {**meta, **manifest.to_json(), "frame_counts": meta["frame_counts"]})
    return manifest
