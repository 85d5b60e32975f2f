"""Counter-based derivation of independent random streams.

A replicate's stream is ``SeedSequence(entropy=master_seed,
spawn_key=(cell_key, replicate))`` where ``cell_key`` is the first four
bytes (big-endian) of SHA-256 over the UTF-8 cell id.  That sequence is
split with ``spawn(2)``: child 0 feeds the data generator, child 1 the
scan generator.  Both use PCG64.  Nothing depends on execution order.
"""

from __future__ import annotations

import hashlib

import numpy as np


def cell_key(cell_id: str) -> int:
    return int.from_bytes(hashlib.sha256(cell_id.encode("utf-8")).digest()[:4], "big")


def replicate_seedseq(master_seed: int, cell_id: str, replicate: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(master_seed), spawn_key=(cell_key(cell_id), int(replicate)))


def replicate_streams(master_seed: int, cell_id: str, replicate: int) -> tuple[np.random.Generator, np.random.Generator]:
    """(data stream, scan stream) for one replicate of one cell."""
    data, scans = replicate_seedseq(master_seed, cell_id, replicate).spawn(2)
    return np.random.Generator(np.random.PCG64(data)), np.random.Generator(np.random.PCG64(scans))
