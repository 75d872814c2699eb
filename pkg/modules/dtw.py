"""
Banded dynamic time warping: distance, optimal path, alignment and the
subsequence (displacement-window) variant.

All series are (m, p) float64 arrays internally; the pointwise cost is the
Euclidean norm of the difference vector. Indices in returned paths are 0-based.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Tuple, Union

import numpy as np
from numba import njit

from .dataset import TimeSeries
from .errors import DomainError

logger = logging.getLogger(__name__)

# Out-of-band cells; compares larger than any finite cost
UNREACHABLE = np.inf

SeriesLike = Union[TimeSeries, np.ndarray]

jitkw = {
    "nogil": True,
    "cache": True,
    "fastmath": False,
}


class DistanceKind(str, Enum):
    DTW = "dtw"
    DTWSUBSEQ = "dtwsubseq"


@dataclass(frozen=True)
class DtwParams:
    """Bandwidth (bw) and displacement window (dw)"""
    bw: int = 8
    dw: int = 1

    def __post_init__(self):
        if self.bw < 0:
            raise DomainError(f"bandwidth must be >= 0, got {self.bw}")
        if self.dw < 1:
            raise DomainError(f"displacement window must be >= 1, got {self.dw}")

    def check_length(self, m: int):
        if self.dw > m - 1:
            raise DomainError(f"displacement window {self.dw} exceeds m - 1 = {m - 1}")


@dataclass(frozen=True)
class CostMatrix:
    """Accumulated-cost grid; out-of-band cells hold UNREACHABLE"""
    D: np.ndarray
    bw: int

    @property
    def distance(self) -> float:
        return float(self.D[-1, -1])


@dataclass(frozen=True)
class WarpingPath:
    pairs: np.ndarray  # (L, 2), 0-based (s, t)
    cost: float

    def __len__(self) -> int:
        return self.pairs.shape[0]

    def is_valid(self, m_a: int, m_b: int) -> bool:
        """Boundary, continuity and monotonicity conditions"""
        pairs = self.pairs
        if pairs.ndim != 2 or pairs.shape[1] != 2 or pairs.shape[0] == 0:
            return False
        if tuple(pairs[0]) != (0, 0) or tuple(pairs[-1]) != (m_a - 1, m_b - 1):
            return False
        steps = np.diff(pairs, axis=0)
        allowed = {(1, 0), (0, 1), (1, 1)}
        return all(tuple(int(v) for v in step) in allowed for step in steps)


@njit(**jitkw)
def _pointwise(a, b, s, t):
    total = 0.0
    for c in range(a.shape[1]):
        diff = a[s, c] - b[t, c]
        total += diff * diff
    return np.sqrt(total)


@njit(**jitkw)
def _accumulate(a, b, bw):
    """Banded DP; ties prefer the diagonal, then (s-1, t), then (s, t-1)"""
    m = a.shape[0]
    n = b.shape[0]
    D = np.full((m, n), UNREACHABLE)
    for s in range(m):
        lo = max(0, s - bw)
        hi = min(n - 1, s + bw)
        for t in range(lo, hi + 1):
            cost = _pointwise(a, b, s, t)
            if s == 0 and t == 0:
                D[s, t] = cost
                continue
            best = UNREACHABLE
            if s > 0 and t > 0:
                best = D[s - 1, t - 1]
            if s > 0 and D[s - 1, t] < best:
                best = D[s - 1, t]
            if t > 0 and D[s, t - 1] < best:
                best = D[s, t - 1]
            D[s, t] = cost + best
    return D


@njit(**jitkw)
def _backtrack(D):
    s = D.shape[0] - 1
    t = D.shape[1] - 1
    out = np.empty((s + t + 1, 2), dtype=np.int64)
    k = 0
    out[k, 0] = s
    out[k, 1] = t
    while s > 0 or t > 0:
        if s == 0:
            t -= 1
        elif t == 0:
            s -= 1
        else:
            diag = D[s - 1, t - 1]
            up = D[s - 1, t]
            left = D[s, t - 1]
            if diag <= up and diag <= left:
                s -= 1
                t -= 1
            elif up <= left:
                s -= 1
            else:
                t -= 1
        k += 1
        out[k, 0] = s
        out[k, 1] = t
    return out[: k + 1][::-1].copy()


@njit(**jitkw)
def _subseq(a, b, dw, bw):
    """Minimum over shifts and both directions of the length-weighted banded DTWD"""
    m = a.shape[0]
    best = UNREACHABLE
    for k in range(1, dw + 1):
        shift = k - 1
        length = m - shift
        weight = m / length
        forward = _accumulate(a[shift:], b[:length], bw)[length - 1, length - 1] * weight
        if forward < best:
            best = forward
        if shift > 0:
            backward = _accumulate(b[shift:], a[:length], bw)[length - 1, length - 1] * weight
            if backward < best:
                best = backward
    return best


def as_array(series: SeriesLike) -> np.ndarray:
    """(m, p) contiguous float64 view of a series"""
    if isinstance(series, TimeSeries):
        values = series.values
    else:
        values = np.asarray(series, dtype=np.float64)
        if values.ndim == 1:
            values = values.reshape(-1, 1)
    return np.ascontiguousarray(values, dtype=np.float64)


def _check_pair(a: SeriesLike, b: SeriesLike, bw: int) -> Tuple[np.ndarray, np.ndarray]:
    a = as_array(a)
    b = as_array(b)
    if a.ndim != 2 or b.ndim != 2:
        raise DomainError("series must be 1-D or 2-D arrays")
    if a.shape != b.shape:
        raise DomainError(f"series shapes differ: {a.shape} vs {b.shape}")
    if a.shape[0] < 2:
        raise DomainError(f"series need at least 2 samples, got {a.shape[0]}")
    if bw < 0:
        raise DomainError(f"bandwidth must be >= 0, got {bw}")
    return a, b


def cost_matrix(a: SeriesLike, b: SeriesLike, bw: int) -> CostMatrix:
    a, b = _check_pair(a, b, bw)
    return CostMatrix(_accumulate(a, b, int(bw)), int(bw))


def dtw_distance(a: SeriesLike, b: SeriesLike, bw: int) -> float:
    """
    Banded DTW distance: accumulated pointwise cost along the optimal path.

    With bw >= m - 1 the band covers the whole grid (exact DTW).
    """
    a, b = _check_pair(a, b, bw)
    return float(_accumulate(a, b, int(bw))[-1, -1])


def dtw_path(a: SeriesLike, b: SeriesLike, bw: int) -> WarpingPath:
    """Optimal warping path from (0, 0) to (m-1, m-1) inside the band"""
    a, b = _check_pair(a, b, bw)
    D = _accumulate(a, b, int(bw))
    return WarpingPath(_backtrack(D), float(D[-1, -1]))


def align(reference: SeriesLike, moving: SeriesLike, bw: int) -> TimeSeries:
    """
    Warp `moving` onto the time axis of `reference`.

    The value at reference index s is the mean of every moving value matched to
    s on the optimal path.
    """
    reference, moving = _check_pair(reference, moving, bw)
    path = _backtrack(_accumulate(reference, moving, int(bw)))
    m, p = reference.shape
    sums = np.zeros((m, p))
    counts = np.zeros(m)
    np.add.at(sums, path[:, 0], moving[path[:, 1]])
    np.add.at(counts, path[:, 0], 1.0)
    return TimeSeries(sums / counts[:, None])


def dtwsubseq_distance(a: SeriesLike, b: SeriesLike, dw: int, bw: int) -> float:
    """
    Subsequence DTW distance over displacements k = 1..dw.

    For each k the pair is truncated to length m - k + 1 (head of one series
    against the tail of the other, both directions) and the banded DTWD is
    scaled by m / (m - k + 1). k = 1 is the plain distance, so the result never
    exceeds dtw_distance.
    """
    a, b = _check_pair(a, b, bw)
    m = a.shape[0]
    if not 1 <= dw <= m - 1:
        raise DomainError(f"displacement window must lie in [1, {m - 1}], got {dw}")
    return float(_subseq(a, b, int(dw), int(bw)))


def series_distance(a: SeriesLike, b: SeriesLike, params: DtwParams, kind: DistanceKind) -> float:
    """Distance of the configured kind"""
    if DistanceKind(kind) is DistanceKind.DTW:
        return dtw_distance(a, b, params.bw)
    return dtwsubseq_distance(a, b, params.dw, params.bw)
