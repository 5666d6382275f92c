"""Synthetic benchmark series with injected level shifts and outliers."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timedelta, timezone

import numpy as np

from .errors import InvalidArgument
from .model import MAX_SEED, MeasurementPoint, Series, Trigger

SIM_START = datetime(2025, 1, 1, tzinfo=timezone.utc)
SIM_CADENCE = timedelta(hours=3)
SIM_COMMIT_BASE = 0xC000000


@dataclass(frozen=True)
class SimSpec:
    n_points: int
    base_mean: float
    segments: tuple[tuple[int, float], ...] = ()
    noise_sigma_rel: float = 0.0
    outlier_prob: float = 0.0
    outlier_scale: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "segments", tuple((int(s), float(r)) for s, r in self.segments))
        if self.n_points < 1:
            raise InvalidArgument("n_points must be positive")
        if not self.base_mean > 0:
            raise InvalidArgument("base_mean must be > 0")
        starts = [s for s, _ in self.segments]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise InvalidArgument("segment start indices must be strictly increasing")
        if starts and (starts[0] < 0 or starts[-1] >= self.n_points):
            raise InvalidArgument("segment starts must lie in [0, n_points)")
        if self.noise_sigma_rel < 0:
            raise InvalidArgument("noise_sigma_rel must be >= 0")
        if not 0.0 <= self.outlier_prob < 1.0:
            raise InvalidArgument("outlier_prob must be in [0, 1)")
        if self.outlier_scale < 1.0:
            raise InvalidArgument("outlier_scale must be >= 1")
        if not 0 <= self.seed <= MAX_SEED:
            raise InvalidArgument("seed must be a 64-bit unsigned integer")


def simulate_values(spec: SimSpec) -> np.ndarray:
    rng = np.random.default_rng(spec.seed)
    # both draws happen unconditionally so the stream layout never depends on the parameters
    noise = rng.normal(0.0, 1.0, spec.n_points) * spec.noise_sigma_rel
    outliers = rng.random(spec.n_points) < spec.outlier_prob
    shift = np.zeros(spec.n_points)
    for start, rel in spec.segments:
        shift[start:] = rel
    values = spec.base_mean * (1.0 + shift) * (1.0 + noise)
    values = np.where(outliers, values * spec.outlier_scale, values)
    return np.maximum(values, 0.0)


def simulate(spec: SimSpec, key: str = "sim/value", unit: str = "ns") -> Series:
    """Deterministic series: commits ``c000000 + i``, one run every three hours."""
    values = simulate_values(spec)
    points = tuple(
        MeasurementPoint(
            commit=f"{SIM_COMMIT_BASE + i:07x}",
            timestamp=SIM_START + i * SIM_CADENCE,
            value=float(v),
            unit=unit,
            trigger=Trigger.SCHEDULE,
        )
        for i, v in enumerate(values)
    )
    return Series(key, points)
