from collections import Counter
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scanrate.errors import CapacityError, DomainError, InvalidLengthError
from scanrate.scanmodel import (
    BlockWindow,
    ScanPath,
    addition_order,
    block_starts,
    count_scans_containing,
    direct_scan,
    enumerate_scans,
    random_shrink_bits,
    reverse_scan,
    scan_from_bits,
    shrink_bits,
    start_uniform_shrink_bits,
    uniform_random_scan,
)


def naive_blocks(scan: ScanPath):
    """Apply the shrinks one by one to the full block (independent of cumsum logic)."""
    lo, hi = 1, scan.n
    out = [(lo, hi)]
    for tag in scan.shrinks:
        if tag == "L":
            lo += 1
        else:
            hi -= 1
        out.append((lo, hi))
    return [BlockWindow(a, b - a + 1) for a, b in reversed(out)]


def test_direct_scan_single_element():
    scan = direct_scan(1)
    assert scan.shrinks == ""
    assert scan.blocks() == [BlockWindow(1, 1)]


def test_direct_scan_n3_blocks():
    assert direct_scan(3).blocks() == [BlockWindow(1, 1), BlockWindow(1, 2), BlockWindow(1, 3)]


def test_direct_scan_n4_size2_block():
    assert direct_scan(4).block_of_size(2) == BlockWindow(1, 2)


def test_reverse_scan_n3_blocks():
    assert reverse_scan(3).blocks() == [BlockWindow(3, 1), BlockWindow(2, 2), BlockWindow(1, 3)]


def test_reverse_scan_n1_equals_direct():
    assert reverse_scan(1) == direct_scan(1)


def test_reverse_scan_n5_size2_block():
    assert reverse_scan(5).block_of_size(2) == BlockWindow(4, 2)


def test_block_of_size_examples():
    assert direct_scan(5).block_of_size(3) == BlockWindow(1, 3)
    assert reverse_scan(5).block_of_size(3) == BlockWindow(3, 3)


@given(st.text(alphabet="LR", min_size=0, max_size=30))
def test_full_block_last_and_nesting(shrinks):
    scan = ScanPath(len(shrinks) + 1, shrinks)
    blocks = scan.blocks()
    assert blocks[-1] == BlockWindow(1, scan.n)
    assert blocks == naive_blocks(scan)
    for small, big in zip(blocks, blocks[1:]):
        assert big.contains(small) and big.size == small.size + 1


@given(st.text(alphabet="LR", min_size=0, max_size=30))
def test_text_round_trip(shrinks):
    scan = ScanPath(len(shrinks) + 1, shrinks)
    assert ScanPath.from_text(scan.to_text()) == scan
    assert scan_from_bits(shrink_bits(scan)[0]) == scan


@given(st.text(alphabet="LR", min_size=0, max_size=30))
def test_addition_order_is_permutation_matching_blocks(shrinks):
    scan = ScanPath(len(shrinks) + 1, shrinks)
    order = addition_order(shrink_bits(scan))[0]
    assert sorted(order) == list(range(scan.n))
    for k, block in enumerate(scan.blocks(), start=1):
        assert set(order[:k]) == set(range(block.start - 1, block.stop))


def test_uniform_scan_n2_two_outcomes(rng):
    seen = Counter(uniform_random_scan(2, rng).to_text() for _ in range(4000))
    assert set(seen) == {"1:R", "2:L"}
    assert abs(seen["1:R"] / 4000 - 0.5) < 0.04


def test_random_bits_prefix_consistent():
    a = random_shrink_bits(50, 20, np.random.default_rng(3))
    b = random_shrink_bits(50, 100, np.random.default_rng(3))
    assert np.array_equal(a, b[:20])
    c = start_uniform_shrink_bits(50, 5, np.random.default_rng(3))
    d = start_uniform_shrink_bits(50, 9, np.random.default_rng(3))
    assert np.array_equal(c, d[:5])


def test_start_uniform_policy_start_distribution():
    n, count = 7, 35_000
    starts = block_starts(start_uniform_shrink_bits(n, count, np.random.default_rng(5)))[:, 0]
    freq = np.bincount(starts, minlength=n + 1)[1:] / count
    assert np.allclose(freq, 1 / n, atol=0.01)


def test_enumerate_counts():
    assert len(enumerate_scans(1)) == 1
    assert len(enumerate_scans(4)) == 8
    scans = enumerate_scans(10)
    assert len(scans) == 512
    assert len({s.shrinks for s in scans}) == 512


def test_enumerate_cap():
    with pytest.raises(CapacityError):
        enumerate_scans(21)
    with pytest.raises(CapacityError):
        enumerate_scans(8, cap=5)


def test_count_containing_examples():
    assert count_scans_containing(4, BlockWindow(1, 4)) == 8
    assert count_scans_containing(4, BlockWindow(2, 2)) == 4


@pytest.mark.parametrize("n", [3, 6, 8])
def test_count_containing_matches_enumeration(n):
    tally = Counter()
    for scan in enumerate_scans(n):
        for block in scan.blocks():
            tally[(block.start, block.size)] += 1
    for k in range(1, n + 1):
        assert sum(count_scans_containing(n, BlockWindow(i, k)) for i in range(1, n - k + 2)) == 2 ** (n - 1)
        for i in range(1, n - k + 2):
            assert tally[(i, k)] == comb(n - k, i - 1) * 2 ** (k - 1)


def test_invalid_inputs():
    with pytest.raises(InvalidLengthError):
        direct_scan(0)
    with pytest.raises(DomainError):
        ScanPath(3, "LX")
    with pytest.raises(DomainError):
        direct_scan(4).block_of_size(5)
    with pytest.raises(DomainError):
        count_scans_containing(4, BlockWindow(4, 2))
    with pytest.raises(DomainError):
        ScanPath.from_text("1:LR")
