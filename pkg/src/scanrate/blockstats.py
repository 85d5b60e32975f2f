"""Block statistics evaluated along scans.

Because the blocks of a scan are nested, block k is block k-1 plus one
element.  A trajectory is therefore an accumulation (cumsum, running max,
...) over the scan's addition order, which is O(n) per scan and vectorizes
across many scans at once.
"""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeError
from .scanmodel import ScanPath, addition_order, block_starts, shrink_bits

_KINDS = ("sum-squares", "mean-squares", "abs-moment-sum", "abs-moment-mean", "mean", "max", "min", "range")
_ID_RE = re.compile(r"^(abs-moment-sum|abs-moment-mean):(\d+)$")


@dataclass(frozen=True)
class Statistic:
    """A block statistic.  ``r`` is the moment order for the abs-moment kinds."""

    kind: str
    r: int = 2

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise DomainError(f"unknown statistic {self.kind!r}")
        if self.kind in ("sum-squares", "mean-squares") and self.r != 2:
            raise DomainError("sum-squares/mean-squares have fixed order 2")
        if self.r < 1:
            raise DomainError("moment order r must be >= 1")

    @classmethod
    def parse(cls, text: "str | Statistic") -> "Statistic":
        if isinstance(text, Statistic):
            return text
        m = _ID_RE.match(text)
        if m:
            return cls(m.group(1), int(m.group(2)))
        return cls(text)

    @property
    def id(self) -> str:
        if self.kind.startswith("abs-moment"):
            return f"{self.kind}:{self.r}"
        return self.kind

    @property
    def form(self) -> str | None:
        """'sum' for diverging sums, 'average' for their 1/k versions."""
        if self.kind in ("sum-squares", "abs-moment-sum"):
            return "sum"
        if self.kind in ("mean-squares", "abs-moment-mean"):
            return "average"
        return None

    @property
    def moment_order(self) -> int | None:
        return self.r if self.form else None

    def transform(self, x: np.ndarray) -> np.ndarray:
        """Per-element summand for the additive statistics."""
        if self.kind in ("sum-squares", "mean-squares"):
            return np.square(x)
        if self.kind.startswith("abs-moment"):
            return np.abs(x) ** self.r
        return x

    def __str__(self) -> str:
        return self.id


def batch_value(window, stat) -> float:
    """Evaluate ``stat`` on ``window`` from scratch."""
    stat = Statistic.parse(stat)
    x = np.asarray(window, dtype=float)
    if x.size == 0:
        raise DomainError("statistic of an empty window")
    if stat.kind == "max":
        return float(x.max())
    if stat.kind == "min":
        return float(x.min())
    if stat.kind == "range":
        return float(x.max() - x.min())
    total = math.fsum(stat.transform(x))
    if stat.kind in ("mean", "mean-squares", "abs-moment-mean"):
        return total / x.size
    return total


class IncrementalStatistic:
    """Streaming evaluation of a statistic on a window growing at both ends.

    Sums use Neumaier compensation; extrema are kept directly.
    """

    def __init__(self, stat, x: float):
        self.stat = Statistic.parse(stat)
        self.k = 0
        self._sum = 0.0
        self._comp = 0.0
        self._max = -math.inf
        self._min = math.inf
        self._push(x)

    def _push(self, x: float) -> None:
        self.k += 1
        self._max = max(self._max, x)
        self._min = min(self._min, x)
        term = float(self.stat.transform(np.float64(x)))
        t = self._sum + term
        if abs(self._sum) >= abs(term):
            self._comp += (self._sum - t) + term
        else:
            self._comp += (term - t) + self._sum
        self._sum = t

    # order within the window does not matter to any supported statistic
    extend_left = _push
    extend_right = _push

    def value(self) -> float:
        kind = self.stat.kind
        if kind == "max":
            return self._max
        if kind == "min":
            return self._min
        if kind == "range":
            return self._max - self._min
        total = self._sum + self._comp
        if kind in ("mean", "mean-squares", "abs-moment-mean"):
            return total / self.k
        return total


@dataclass(frozen=True, eq=False)
class Trajectory:
    values: np.ndarray
    scan: ScanPath | None
    stat: Statistic

    @property
    def n(self) -> int:
        return len(self.values)

    def block_starts(self) -> np.ndarray:
        if self.scan is None:
            return np.full(self.n, 0)
        return self.scan.starts

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["k", "block_start", "T_k"])
        for k, (start, value) in enumerate(zip(self.block_starts(), self.values), start=1):
            writer.writerow([k, int(start), f"{value:.12g}"])
        return buf.getvalue()


def trajectory_matrix(series, bits: np.ndarray, stat, kmax: int | None = None) -> np.ndarray:
    """Trajectories of ``stat`` along a batch of scans.

    ``bits`` is the (count, n-1) shrink matrix (True = Left).  Returns an
    array of shape (count, kmax) whose column k-1 is the statistic on the
    size-k block; ``kmax`` defaults to n.
    """
    stat = Statistic.parse(stat)
    x = np.asarray(series, dtype=float)
    bits = np.atleast_2d(bits)
    n = bits.shape[1] + 1
    if x.ndim != 1 or x.size != n:
        raise ShapeError(f"series length {x.size} does not match scan length {n}")
    order = addition_order(bits)
    if kmax is not None:
        order = order[:, :kmax]
    kind = stat.kind
    if kind in ("max", "min", "range"):
        added = x[order]
        hi = np.maximum.accumulate(added, axis=1)
        lo = np.minimum.accumulate(added, axis=1)
        return {"max": hi, "min": lo, "range": hi - lo}[kind]
    values = np.cumsum(stat.transform(x)[order], axis=1)
    if kind in ("mean", "mean-squares", "abs-moment-mean"):
        values /= np.arange(1, order.shape[1] + 1)
    return values


def trajectory(series, scan: ScanPath, stat) -> Trajectory:
    stat = Statistic.parse(stat)
    values = trajectory_matrix(series, shrink_bits(scan), stat)[0]
    return Trajectory(values, scan, stat)


def trajectory_batch_oracle(series, scan: ScanPath, stat) -> np.ndarray:
    """O(n^2) recomputation of every block value from scratch."""
    x = np.asarray(series, dtype=float)
    starts = block_starts(shrink_bits(scan))[0]
    return np.array([batch_value(x[s - 1 : s - 1 + k], stat) for k, s in enumerate(starts, start=1)])
