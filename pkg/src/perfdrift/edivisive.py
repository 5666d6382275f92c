"""E-Divisive Means change-point detection.

The divergence between two samples is the energy-statistics estimator

    qhat = mn/(m+n) * [ 2/(mn) * sum|x_i - y_j|^a
                        - sum_{i<k}|x_i - x_k|^a / C(m,2)
                        - sum_{j<k}|y_j - y_k|^a / C(n,2) ]

floored at zero. Splits are searched with 2-D prefix sums over the pairwise
distance matrix, so every candidate ``tau`` of a segment costs O(1) once the
O(L^2) matrix is built. Permutation trials are evaluated in vectorised
batches; each trial draws its ordering from a counter-based SplitMix64
stream keyed by (seed, segment start, segment end, trial), so results do not
depend on batch size or evaluation order.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidArgument, InvalidSeries, TooShort
from .model import ChangePoint, DetectionConfig, Series

logger = logging.getLogger(__name__)

# upper bound on doubles held by one batch of permuted distance matrices
_BATCH_CELLS = 4_000_000

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


@dataclass(frozen=True)
class Segment:
    start: int
    end: int

    def __post_init__(self) -> None:
        if not 0 <= self.start < self.end:
            raise InvalidArgument(f"invalid segment [{self.start}, {self.end})")

    def __len__(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class SplitCandidate:
    tau: int
    qhat: float


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha <= 2.0:
        raise InvalidArgument(f"alpha must be in (0, 2], got {alpha}")


def divergence(x: Sequence[float], y: Sequence[float], alpha: float = 1.0) -> float:
    """Energy divergence between samples ``x`` and ``y`` (both of length >= 2)."""
    _check_alpha(alpha)
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    m, n = len(xa), len(ya)
    if m < 2 or n < 2:
        raise TooShort("divergence needs at least 2 points on each side")
    # canonical argument order makes the result bit-for-bit symmetric
    if (m, xa.tolist()) > (n, ya.tolist()):
        xa, ya, m, n = ya, xa, n, m
    cross = np.abs(xa[:, None] - ya[None, :]) ** alpha
    within_x = np.abs(xa[:, None] - xa[None, :]) ** alpha
    within_y = np.abs(ya[:, None] - ya[None, :]) ** alpha
    # full-matrix sums count every unordered pair twice
    bracket = (
        2.0 * cross.sum() / (m * n)
        - within_x.sum() / (m * (m - 1))
        - within_y.sum() / (n * (n - 1))
    )
    return max(0.0, float(m * n / (m + n) * bracket))


def _split_stats(values: np.ndarray, alpha: float, min_segment: int) -> np.ndarray:
    """qhat for every admissible split of each row of ``values``.

    ``values`` has shape (batch, L); the result has shape
    (batch, L - 2*min_segment + 1) where column ``c`` is the split at
    ``tau = min_segment + c`` (local index).
    """
    batch, length = values.shape
    dist = np.abs(values[:, :, None] - values[:, None, :])
    if alpha != 1.0:
        dist **= alpha
    prefix = np.zeros((batch, length + 1, length + 1))
    np.cumsum(dist, axis=1, out=prefix[:, 1:, 1:])
    np.cumsum(prefix[:, 1:, 1:], axis=2, out=prefix[:, 1:, 1:])

    taus = np.arange(min_segment, length - min_segment + 1)
    m = taus.astype(float)
    n = length - m
    s_tt = prefix[:, taus, taus]
    s_tl = prefix[:, taus, length]
    s_ll = prefix[:, length, length][:, None]
    cross = s_tl - s_tt
    within_left = s_tt
    within_right = s_ll - 2.0 * s_tl + s_tt
    bracket = 2.0 * cross / (m * n) - within_left / (m * (m - 1)) - within_right / (n * (n - 1))
    return np.maximum(0.0, m * n / (m + n) * bracket)


def best_split(values: Sequence[float], segment: Segment, config: DetectionConfig) -> SplitCandidate | None:
    """Split of ``segment`` maximising the divergence; smallest tau wins ties."""
    if len(segment) < 2 * config.min_segment:
        return None
    seg = np.asarray(values, dtype=float)[segment.start:segment.end]
    stats = _split_stats(seg[None, :], config.alpha, config.min_segment)[0]
    best = int(np.argmax(stats))
    return SplitCandidate(tau=segment.start + config.min_segment + best, qhat=float(stats[best]))


def _splitmix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def _stream_key(seed: int, segment: Segment) -> np.uint64:
    with np.errstate(over="ignore"):
        key = np.array([seed], dtype=np.uint64)
        for word in (segment.start, segment.end):
            key = _splitmix64(key + _GOLDEN) ^ np.uint64(word)
        return _splitmix64(key + _GOLDEN)[0]


def permutation_orders(seed: int, segment: Segment, trials: np.ndarray) -> np.ndarray:
    """Row ``r`` is the ordering used by permutation trial ``trials[r]``.

    Position ``i`` of trial ``t`` gets the sort key
    ``splitmix64(stream + golden * (t * L + i + 1))``; the ordering is the
    stable argsort of those keys.
    """
    length = len(segment)
    stream = _stream_key(seed, segment)
    counters = trials.astype(np.uint64)[:, None] * np.uint64(length) + np.arange(
        1, length + 1, dtype=np.uint64
    )
    with np.errstate(over="ignore"):
        keys = _splitmix64(stream + _GOLDEN * counters)
    return np.argsort(keys, axis=1, kind="stable")


def permutation_pvalue(
    values: Sequence[float], segment: Segment, observed_qhat: float, config: DetectionConfig
) -> float:
    """(1 + #trials with best qhat >= observed) / (permutations + 1)."""
    if observed_qhat <= 0.0:
        return 1.0
    seg = np.asarray(values, dtype=float)[segment.start:segment.end]
    length = len(seg)
    if length < 2 * config.min_segment:
        return 1.0
    batch = max(1, _BATCH_CELLS // (length * length))
    exceed = 0
    for first in range(0, config.permutations, batch):
        trials = np.arange(first, min(first + batch, config.permutations))
        shuffled = seg[permutation_orders(config.seed, segment, trials)]
        best = _split_stats(shuffled, config.alpha, config.min_segment).max(axis=1)
        exceed += int(np.count_nonzero(best >= observed_qhat))
    return (1 + exceed) / (config.permutations + 1)


def _magnitude(before: float, after: float) -> float:
    if before != 0.0:
        return after / before - 1.0
    if after == 0.0:
        return 0.0
    return math.copysign(math.inf, after)


def significant_splits(values: Sequence[float], config: DetectionConfig) -> list[tuple[int, float, float]]:
    """Hierarchical divisive search; returns (tau, qhat, p) in acceptance order."""
    arr = np.asarray(values, dtype=float)
    if len(arr) < 2 * config.min_segment:
        return []
    pending: dict[Segment, SplitCandidate | None] = {}
    root = Segment(0, len(arr))
    pending[root] = best_split(arr, root, config)
    accepted: list[tuple[int, float, float]] = []
    while True:
        live = [(seg, cand) for seg, cand in pending.items() if cand is not None]
        if not live:
            break
        # strongest candidate first; earliest segment on ties
        seg, cand = max(live, key=lambda item: (item[1].qhat, -item[0].start))
        p = permutation_pvalue(arr, seg, cand.qhat, config)
        logger.debug("candidate tau=%d qhat=%.6g p=%.6g in [%d,%d)", cand.tau, cand.qhat, p, seg.start, seg.end)
        if p > config.p_threshold:
            break
        accepted.append((cand.tau, cand.qhat, p))
        del pending[seg]
        for child in (Segment(seg.start, cand.tau), Segment(cand.tau, seg.end)):
            pending[child] = best_split(arr, child, config)
    return accepted


def detect(series: Series, config: DetectionConfig | None = None) -> list[ChangePoint]:
    """Significant change points of ``series`` that pass the magnitude filter."""
    config = config or DetectionConfig()
    values = np.asarray(series.values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise InvalidSeries("series contains non-finite values")
    splits = sorted(significant_splits(values, config))
    bounds = [0] + [tau for tau, _, _ in splits] + [len(values)]
    changes = []
    for k, (tau, qhat, p) in enumerate(splits):
        before = float(values[bounds[k]:tau].mean())
        after = float(values[tau:bounds[k + 2]].mean())
        magnitude = _magnitude(before, after)
        if abs(magnitude) < config.magnitude_threshold:
            continue
        changes.append(
            ChangePoint(
                index=tau,
                before_commit=series.points[tau - 1].commit,
                after_commit=series.points[tau].commit,
                qhat=qhat,
                p_value=p,
                magnitude=magnitude,
            )
        )
    return changes
