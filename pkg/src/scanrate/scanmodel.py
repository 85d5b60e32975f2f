"""Scans of a length-n sequence: nested families with one block per size.

A scan is encoded by its shrink sequence: reading from the full block
X_1..X_n down to a single observation, each step removes either the
leftmost ("L") or rightmost ("R") element.  Every one of the 2**(n-1)
strings over {L, R} is a valid scan, which makes uniform sampling a matter
of fair coin flips.

Indices exposed to callers are 1-based to match the usual B_i^k notation;
array helpers that feed numpy indexing are 0-based and say so.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from math import comb

import numpy as np

from .errors import CapacityError, DomainError, InvalidLengthError

LEFT = "L"
RIGHT = "R"

ENUMERATION_CAP = 20


@dataclass(frozen=True)
class BlockWindow:
    start: int
    size: int

    @property
    def stop(self) -> int:
        """1-based index of the last element in the block."""
        return self.start + self.size - 1

    def validate(self, n: int) -> None:
        if self.size < 1 or self.start < 1 or self.stop > n:
            raise DomainError(f"block (start={self.start}, size={self.size}) is not inside 1..{n}")

    def contains(self, other: "BlockWindow") -> bool:
        return self.start <= other.start and other.stop <= self.stop


@dataclass(frozen=True)
class ScanPath:
    n: int
    shrinks: str

    def __post_init__(self):
        _check_length(self.n)
        if len(self.shrinks) != self.n - 1:
            raise DomainError(f"shrink sequence must have length n-1={self.n - 1}, got {len(self.shrinks)}")
        if set(self.shrinks) - {LEFT, RIGHT}:
            raise DomainError("shrink tags must be 'L' or 'R'")

    @property
    def start(self) -> int:
        """1-based index of the size-1 block."""
        return 1 + self.shrinks.count(LEFT)

    @property
    def expansions(self) -> str:
        """Growth directions from size 1 up to size n (shrinks reversed)."""
        return self.shrinks[::-1]

    @cached_property
    def starts(self) -> np.ndarray:
        """1-based start index of the size-k block at position k-1."""
        return block_starts(shrink_bits(self))[0]

    def block_of_size(self, k: int) -> BlockWindow:
        if not 1 <= k <= self.n:
            raise DomainError(f"block size {k} outside 1..{self.n}")
        return BlockWindow(int(self.starts[k - 1]), k)

    def blocks(self) -> list[BlockWindow]:
        return [BlockWindow(int(s), k) for k, s in enumerate(self.starts, start=1)]

    def to_text(self) -> str:
        return f"{self.start}:{self.expansions}"

    @classmethod
    def from_text(cls, text: str) -> "ScanPath":
        head, _, tail = text.partition(":")
        scan = cls(len(tail) + 1, tail[::-1])
        if scan.start != int(head):
            raise DomainError(f"start index {head} inconsistent with expansions {tail!r}")
        return scan

    def __str__(self) -> str:
        return self.to_text()


def _check_length(n) -> None:
    if int(n) != n or n < 1:
        raise InvalidLengthError(f"series length must be a positive integer, got {n!r}")


def direct_scan(n: int) -> ScanPath:
    _check_length(n)
    return ScanPath(n, RIGHT * (n - 1))


def reverse_scan(n: int) -> ScanPath:
    _check_length(n)
    return ScanPath(n, LEFT * (n - 1))


def uniform_random_scan(n: int, rng: np.random.Generator) -> ScanPath:
    """Draw one scan with probability exactly 2**-(n-1)."""
    _check_length(n)
    return scan_from_bits(random_shrink_bits(n, 1, rng)[0])


def random_shrink_bits(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Boolean matrix (count, n-1) of fair shrink draws; True means Left.

    One ``rng.random`` double per tag, row by row, so the first rows of a
    larger draw coincide with a smaller draw from the same stream state.
    """
    _check_length(n)
    return rng.random((count, n - 1)) < 0.5


def start_uniform_shrink_bits(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Scans whose size-1 block start is uniform on 1..n, uniform given the start.

    Not the uniform law on scans: that law puts the start at 1 + Binomial(n-1, 1/2),
    so all its small blocks crowd the middle of the series.  Rows are drawn one
    at a time (start via ``rng.integers``, then n-1 ``rng.random`` keys whose
    j-1 smallest mark the Left shrinks) so prefixes of a batch are reproducible.
    """
    _check_length(n)
    out = np.zeros((count, n - 1), dtype=bool)
    for row in out:
        j = int(rng.integers(1, n + 1))
        keys = rng.random(n - 1)
        if j > 1:
            row[np.argpartition(keys, j - 2)[: j - 1]] = True
    return out


def scan_from_bits(bits) -> ScanPath:
    bits = np.asarray(bits, dtype=bool)
    return ScanPath(bits.size + 1, "".join(LEFT if b else RIGHT for b in bits))


def shrink_bits(*scans: ScanPath) -> np.ndarray:
    n = scans[0].n
    if any(s.n != n for s in scans):
        raise DomainError("all scans in a batch must share the same n")
    out = np.zeros((len(scans), n - 1), dtype=bool)
    for row, scan in zip(out, scans):
        row[:] = np.frombuffer(scan.shrinks.encode(), dtype=np.uint8) == ord(LEFT)
    return out


def block_starts(bits: np.ndarray) -> np.ndarray:
    """1-based block starts, shape (count, n); column k-1 is the size-k block."""
    bits = np.atleast_2d(bits)
    count = bits.shape[0]
    lefts = np.zeros((count, bits.shape[1] + 1), dtype=np.int64)
    np.cumsum(bits, axis=1, out=lefts[:, 1:])
    # size-k block has had n-k shrinks applied
    return 1 + lefts[:, ::-1]


def addition_order(bits: np.ndarray) -> np.ndarray:
    """0-based index of the element added when the block grows to size k.

    Column 0 is the size-1 block itself; column k-1 (k >= 2) is the element
    that block k has and block k-1 lacks.  Each row is a permutation of 0..n-1.
    """
    bits = np.atleast_2d(bits)
    n = bits.shape[1] + 1
    starts0 = block_starts(bits) - 1
    out = starts0.copy()
    if n > 1:
        # growing k-1 -> k undoes shrink number n-k
        grew_left = bits[:, ::-1]
        ks = np.arange(2, n + 1)
        right_end = starts0[:, 1:] + ks - 1
        out[:, 1:] = np.where(grew_left, starts0[:, 1:], right_end)
    return out


def enumerate_scans(n: int, cap: int = ENUMERATION_CAP) -> list[ScanPath]:
    _check_length(n)
    if n > cap:
        raise CapacityError(f"enumerating 2**{n - 1} scans exceeds the cap n <= {cap}")
    return [ScanPath(n, "".join(tags)) for tags in itertools.product(RIGHT + LEFT, repeat=n - 1)]


def count_scans_containing(n: int, window: BlockWindow) -> int:
    """Number of scans whose size-k block is B_i^k: C(n-k, i-1) * 2**(k-1)."""
    _check_length(n)
    window.validate(n)
    return comb(n - window.size, window.start - 1) * 2 ** (window.size - 1)


def block_of_size(scan: ScanPath, k: int) -> BlockWindow:
    return scan.block_of_size(k)
