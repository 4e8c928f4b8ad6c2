"""Coalition bookkeeping for the joint-location attribution game.

The g coordinate columns form one player that enters and leaves coalitions
atomically; the other p-g columns are one player each, giving k = p-g+1
players. Weights are evaluated in exact rational arithmetic and converted to
float once, because the factorial ratios are hopeless in naive floating point.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import OutOfRange


@dataclass(frozen=True)
class CoalitionSpace:
    """Player roster over p columns: scalar features first, GEO last."""

    n_columns: int
    geo_cols: tuple

    def __post_init__(self):
        object.__setattr__(self, "geo_cols", tuple(int(c) for c in self.geo_cols))
        if len(self.geo_cols) < 1:
            raise ValueError("need at least one geo column")
        if len(set(self.geo_cols)) != len(self.geo_cols):
            raise ValueError("geo columns repeat")
        if any(not 0 <= c < self.n_columns for c in self.geo_cols):
            raise ValueError("geo column index out of range")

    @classmethod
    def from_schema(cls, schema):
        return cls(n_columns=schema.p, geo_cols=schema.geo_indices)

    @property
    def p(self):
        return self.n_columns

    @property
    def g(self):
        return len(self.geo_cols)

    @property
    def k(self):
        return self.n_columns - self.g + 1

    @property
    def scalar_cols(self):
        geo = set(self.geo_cols)
        return tuple(c for c in range(self.n_columns) if c not in geo)

    @property
    def geo_player(self):
        """Index of the GEO player in the roster (always last)."""
        return self.k - 1

    def player_columns(self, player):
        if player == self.geo_player:
            return self.geo_cols
        return (self.scalar_cols[player],)

    def column_player(self):
        """Length-p array mapping each column to its owning player index."""
        owner = np.empty(self.n_columns, dtype=np.int64)
        for c in self.geo_cols:
            owner[c] = self.geo_player
        for i, c in enumerate(self.scalar_cols):
            owner[c] = i
        return owner


def coalition_weight_feature(s, p, g):
    """Weight s!(p-s-g)!/(p-g+1)! of a size-s coalition (joint game, g>=1).

    s counts players (the merged location player counts as one). At g=1 this
    is the classic Shapley weight s!(p-s-1)!/p!.
    """
    k = p - g + 1
    if g < 1 or p < g:
        raise OutOfRange(f"need p >= g >= 1, got p={p}, g={g}")
    if not 0 <= s <= k - 1:
        raise OutOfRange(f"coalition size {s} outside [0, {k - 1}]")
    w = Fraction(math.factorial(s) * math.factorial(p - s - g),
                 math.factorial(p - g + 1))
    return float(w)


def coalition_weight_pair(s, p, g):
    """Weight s!(p-s-g-1)!/(p-g+1)! for the location-feature synergy terms."""
    k = p - g + 1
    if g < 1 or p < g:
        raise OutOfRange(f"need p >= g >= 1, got p={p}, g={g}")
    if not 0 <= s <= k - 2:
        raise OutOfRange(f"coalition size {s} outside [0, {k - 2}]")
    w = Fraction(math.factorial(s) * math.factorial(p - s - g - 1),
                 math.factorial(p - g + 1))
    return float(w)


def main_weight_table(p, g):
    k = p - g + 1
    return np.array([coalition_weight_feature(s, p, g) for s in range(k)])


def pair_weight_table(p, g):
    k = p - g + 1
    return np.array([coalition_weight_pair(s, p, g) for s in range(k - 1)])


def kernel_weight(s, k):
    """Shapley kernel weight of one size-s pattern, 0 < s < k."""
    if not 0 < s < k:
        raise OutOfRange(f"kernel weight undefined at size {s} of {k}")
    return (k - 1) / (math.comb(k, s) * s * (k - s))


def popcounts(n_bits):
    """Bit counts of 0..2^n_bits-1."""
    sizes = np.zeros(1, dtype=np.int64)
    for _ in range(n_bits):
        sizes = np.concatenate([sizes, sizes + 1])
    return sizes
