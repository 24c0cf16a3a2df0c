"""Table-game constructions used by the property tests.

These build new explicit score tables from existing ones: duplicating a
player (for symmetry checks), appending a dummy player (nullity), and
linear combination (linearity).
"""

from __future__ import annotations

import numpy as np

from multiorder.games import TableGame


def merge_players(base: TableGame, dup: int) -> TableGame:
    """Extend by one player that is interchangeable with player ``dup``.

    The new player n carries the same information as ``dup``: the score
    only depends on whether at least one of the two is present.
    """
    n = base.n
    out = np.empty(1 << (n + 1), dtype=np.float64)
    low_mask = (1 << n) - 1
    for bits in range(out.size):
        low = bits & low_mask
        if (bits >> n) & 1:
            low |= 1 << dup
        out[bits] = base.table[low]
    return TableGame(n + 1, out, label=f"merge[{base.descriptor}:{dup}]")


def with_dummy(base: TableGame) -> TableGame:
    """Extend by one player whose presence never changes the score."""
    n = base.n
    out = np.empty(1 << (n + 1), dtype=np.float64)
    low_mask = (1 << n) - 1
    for bits in range(out.size):
        out[bits] = base.table[bits & low_mask]
    return TableGame(n + 1, out, label=f"dummy[{base.descriptor}]")


def combine(a: TableGame, b: TableGame, ca: float, cb: float) -> TableGame:
    """Score table of the linear combination ca*a + cb*b."""
    assert a.n == b.n
    return TableGame(a.n, ca * a.table + cb * b.table,
                     label=f"lin[{ca}*{a.descriptor}+{cb}*{b.descriptor}]")
