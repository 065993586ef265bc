"""Synthetic colony: wandering disks plus intensity-driven dueling pairs.

Each agent is a disk doing bounded Brownian wander in a 64x64 arena. On
unstable days, random pairs "duel": for the whole sample they oscillate
along their connecting axis at high speed, in antiphase. Every pixel an
agent covers receives that agent's displacement as its flow vector.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError
from .dataset import DatasetManifest, write_dataset
from .io import GRID


def decaying_days(n_unstable=18, tau=4.0, stable_days=(-2, -1), stable_samples=313, unstable_samples=36):
    """Stable days at intensity 0, then a burst at D+1 decaying as ``exp(-(d-1)/tau)``."""
    days = [[d, 0.0, stable_samples] for d in stable_days]
    days += [[d, round(math.exp(-(d - 1) / tau), 6), unstable_samples] for d in range(1, n_unstable + 1)]
    return days


@dataclass
class SimScenario:
    agent_count: int = 24
    arena: int = GRID
    days: list = field(default_factory=decaying_days)  # [day_label, intensity, samples]
    dueling_rate: float = 0.5
    dueling_speed: float = 4.0
    wander_speed: float = 1.0
    agent_radius: int = 3
    gap_steps: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.agent_count <= 0:
            raise ConfigurationError("agent_count must be positive")
        if self.arena != GRID:
            raise ConfigurationError(f"arena must be {GRID}x{GRID}")
        for name in ("dueling_rate", "dueling_speed", "wander_speed"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.dueling_rate > 1:
            raise ConfigurationError("dueling_rate is a probability and must be <= 1")
        if self.agent_radius <= 0 or 2 * self.agent_radius >= self.arena:
            raise ConfigurationError("agent_radius out of range")
        days = []
        for entry in self.days:
            day, intensity = int(entry[0]), float(entry[1])
            samples = int(entry[2]) if len(entry) > 2 else 36
            if day == 0:
                raise ConfigurationError("day 0 is the removal instant")
            if not 0.0 <= intensity <= 1.0:
                raise ConfigurationError(f"day {day}: intensity {intensity} outside [0, 1]")
            if day < 0 and intensity != 0.0:
                raise ConfigurationError(f"stable day {day} must have intensity 0")
            if samples <= 0:
                raise ConfigurationError(f"day {day}: samples must be positive")
            days.append([day, intensity, samples])
        self.days = days

    @classmethod
    def from_dict(cls, d: dict) -> "SimScenario":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        unknown = set(d) - set(known)
        if unknown:
            raise ConfigurationError(f"unknown scenario keys: {sorted(unknown)}")
        return cls(**known)

    def to_dict(self) -> dict:
        return asdict(self)


def _disk_offsets(radius):
    r = np.arange(-radius, radius + 1)
    dy, dx = np.meshgrid(r, r, indexing="ij")
    keep = dx**2 + dy**2 <= radius**2
    return dy[keep], dx[keep]


def _bounded_steps(rng, n, speed):
    """Gaussian steps with norm clipped to ``speed``."""
    d = rng.normal(0.0, speed / 2.0, size=(n, 2))
    norm = np.linalg.norm(d, axis=1, keepdims=True)
    scale = np.minimum(1.0, speed / np.maximum(norm, 1e-12))
    return d * scale


def _reflect(pos, lo, hi):
    pos = np.where(pos < lo, 2 * lo - pos, pos)
    pos = np.where(pos > hi, 2 * hi - pos, pos)
    return np.clip(pos, lo, hi)


def render(positions, displacements, radius) -> np.ndarray:
    """Rasterize one frame: ``(2, 64, 64)`` horizontal/vertical flow."""
    flow = np.zeros((2, GRID, GRID))
    oy, ox = _disk_offsets(radius)
    for (y, x), (dy, dx) in zip(np.rint(positions).astype(int), displacements):
        yy, xx = y + oy, x + ox
        ok = (yy >= 0) & (yy < GRID) & (xx >= 0) & (xx < GRID)
        flow[0, yy[ok], xx[ok]] = dx
        flow[1, yy[ok], xx[ok]] = dy
    return flow


def simulate_day(scenario: SimScenario, day_index: int, m: int) -> np.ndarray:
    """Frames ``(samples * m, 2, 64, 64)`` for one day; ``m`` consecutive frames per sample.

    Wander and dueling draw from separate streams, so changing a day's
    intensity leaves the wander trajectories untouched.
    """
    day, intensity, samples = scenario.days[day_index]
    wander_rng = np.random.default_rng([scenario.seed, 0, day_index])
    duel_rng = np.random.default_rng([scenario.seed, 1, day_index])
    n, r = scenario.agent_count, scenario.agent_radius
    lo, hi = float(r), float(GRID - 1 - r)
    pos = wander_rng.uniform(lo, hi, size=(n, 2))
    frames = np.zeros((samples * m, 2, GRID, GRID))
    p_duel = scenario.dueling_rate * intensity
    for s in range(samples):
        for _ in range(scenario.gap_steps):
            pos = _reflect(pos + _bounded_steps(wander_rng, n, scenario.wander_speed), lo, hi)
        n_duels = duel_rng.binomial(n // 2, p_duel) if p_duel > 0 else 0
        pairs = duel_rng.permutation(n)[: 2 * n_duels].reshape(-1, 2)
        for f in range(m):
            wander = _bounded_steps(wander_rng, n, scenario.wander_speed)
            disp = wander.copy()
            if n_duels:
                a, b = pairs[:, 0], pairs[:, 1]
                axis = pos[b] - pos[a]
                axis /= np.maximum(np.linalg.norm(axis, axis=1, keepdims=True), 1e-12)
                sign = 1.0 if f % 2 == 0 else -1.0
                disp[a] = sign * scenario.dueling_speed * axis
                disp[b] = -sign * scenario.dueling_speed * axis
            frames[s * m + f] = render(pos, disp, r)
            # duels oscillate in place; positions follow the wander draw only
            pos = _reflect(pos + wander, lo, hi)
    return frames


def simulate(scenario: SimScenario, root, m: int = 2, split_seed: int = 0,
             split_mode: str = "random") -> DatasetManifest:
    """Generate a full dataset in the canonical layout under ``root``."""
    root = Path(root)
    frames = {}
    for i, (day, intensity, _) in enumerate(scenario.days):
        cls = "stable" if day < 0 else "unstable"
        frames[(cls, day)] = simulate_day(scenario, i, m)
    manifest = write_dataset(root, frames, m, split_seed, split_mode)
    (root / "scenario.json").write_text(
        json.dumps(scenario.to_dict(), indent=2, sort_keys=True) + "\n")
    return manifest
