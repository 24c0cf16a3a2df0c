"""Players and packed-bit coalitions.

A coalition over ``n`` players is stored as a single Python integer where
bit ``k`` set means player ``k`` is present.  Equality and hashing follow
the bit content, so coalitions behave as values and can key caches.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import InvalidPlayer, SizeLimit

MAX_PLAYERS = 4096


def _check_n(n: int) -> None:
    if not 1 <= n <= MAX_PLAYERS:
        raise SizeLimit(f"player count must be in [1, {MAX_PLAYERS}], got {n}")


@dataclass(frozen=True)
class PlayerSet:
    """The fixed player universe 0..n-1 of one analysis."""

    n: int

    def __post_init__(self) -> None:
        _check_n(self.n)

    def players(self) -> range:
        return range(self.n)

    def pairs(self) -> Iterator[tuple[int, int]]:
        """All unordered distinct pairs (i, j) with i < j."""
        for i in range(self.n):
            for j in range(i + 1, self.n):
                yield i, j

    def empty(self) -> "Coalition":
        return Coalition(self.n, 0)

    def full(self) -> "Coalition":
        return Coalition(self.n, (1 << self.n) - 1)


class Coalition:
    """An immutable subset of players, packed into an int bit vector."""

    __slots__ = ("n", "bits")

    def __init__(self, n: int, bits: int):
        _check_n(n)
        if bits < 0 or bits >> n:
            raise InvalidPlayer(f"bits 0x{bits:x} do not fit {n} players")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "bits", bits)

    def __setattr__(self, name, value):  # pragma: no cover - guard only
        raise AttributeError("Coalition is immutable")

    @classmethod
    def empty(cls, n: int) -> "Coalition":
        return cls(n, 0)

    @classmethod
    def full(cls, n: int) -> "Coalition":
        return cls(n, (1 << n) - 1)

    @classmethod
    def from_members(cls, n: int, members: Iterable[int]) -> "Coalition":
        bits = 0
        for k in members:
            if not 0 <= k < n:
                raise InvalidPlayer(f"player {k} out of range for n={n}")
            bits |= 1 << k
        return cls(n, bits)

    # equality and hashing are by bit content
    def __eq__(self, other) -> bool:
        if not isinstance(other, Coalition):
            return NotImplemented
        return self.bits == other.bits

    def __hash__(self) -> int:
        return hash(self.bits)

    def __repr__(self) -> str:
        return f"Coalition(n={self.n}, members={list(self.members())})"

    def __contains__(self, player: int) -> bool:
        return bool((self.bits >> player) & 1)

    @property
    def size(self) -> int:
        return self.bits.bit_count()

    def members(self) -> tuple[int, ...]:
        bits = self.bits
        out = []
        while bits:
            low = bits & -bits
            out.append(low.bit_length() - 1)
            bits ^= low
        return tuple(out)

    def add(self, *players: int) -> "Coalition":
        bits = self.bits
        for k in players:
            if not 0 <= k < self.n:
                raise InvalidPlayer(f"player {k} out of range for n={self.n}")
            bits |= 1 << k
        return Coalition(self.n, bits)

    def remove(self, *players: int) -> "Coalition":
        bits = self.bits
        for k in players:
            bits &= ~(1 << k)
        return Coalition(self.n, bits)

    def complement(self) -> "Coalition":
        return Coalition(self.n, self.bits ^ ((1 << self.n) - 1))

    def is_full(self) -> bool:
        return self.bits == (1 << self.n) - 1

    # --- wire / array encodings -----------------------------------------

    def to_hex(self) -> str:
        """Lowercase hex, zero padded to ceil(n/4) digits, bit k = player k."""
        width = (self.n + 3) // 4
        return format(self.bits, f"0{width}x")

    @classmethod
    def from_hex(cls, n: int, text: str) -> "Coalition":
        width = (n + 3) // 4
        if len(text) != width:
            raise InvalidPlayer(f"hex mask must have {width} digits for n={n}, got {len(text)}")
        return cls(n, int(text, 16))

    def to_mask(self) -> np.ndarray:
        """0/1 uint8 vector of length n, index k = player k."""
        return bits_to_mask(self.bits, self.n)


def bits_to_mask(bits: int, n: int) -> np.ndarray:
    nbytes = (n + 7) // 8
    raw = np.frombuffer(bits.to_bytes(nbytes, "little"), dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little")[:n]


def mask_matrix(coalitions: Sequence[Coalition], n: int) -> np.ndarray:
    """Stack coalitions into a (len, n) 0/1 uint8 matrix.

    One buffer-level unpack; this is the fast path every vectorized
    evaluator shares.
    """
    nbytes = (n + 7) // 8
    buf = b"".join(c.bits.to_bytes(nbytes, "little") for c in coalitions)
    raw = np.frombuffer(buf, dtype=np.uint8).reshape(len(coalitions), nbytes)
    return np.unpackbits(raw, axis=1, bitorder="little")[:, :n]
