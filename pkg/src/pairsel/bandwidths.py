"""Dyadic bandwidth candidate sets."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable

from .errors import EmptyGridError, InvalidParameterError
from .kernels import BandwidthVec, as_bandwidth


def window(m: int) -> tuple[float, float]:
    """Admissible range ``[ln(m)/m, exp(-sqrt(ln m))]`` for the bandwidth volume."""
    lm = math.log(m)
    return lm / m, math.exp(-math.sqrt(lm))


def _compositions(total: int, parts: int):
    """All tuples of ``parts`` nonnegative integers summing to ``total``."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@dataclass(frozen=True)
class DyadicGrid:
    """Candidate bandwidths sorted by decreasing volume, then by exponent vector."""

    dim: int
    m: int
    mode: str
    members: tuple[BandwidthVec, ...]

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __getitem__(self, i):
        return self.members[i]

    @property
    def largest(self) -> BandwidthVec:
        return self.members[0]

    @property
    def smallest(self) -> BandwidthVec:
        return self.members[-1]

    def min_component(self) -> tuple[float, ...]:
        return tuple(min(h.h[j] for h in self.members) for j in range(self.dim))

    def max_component(self) -> tuple[float, ...]:
        return tuple(max(h.h[j] for h in self.members) for j in range(self.dim))

    @classmethod
    def from_members(cls, members: Iterable, m: int = 0, mode: str = "custom") -> "DyadicGrid":
        """Wrap an explicit candidate list (sorted and de-duplicated)."""
        uniq = {as_bandwidth(h) for h in members}
        if not uniq:
            raise EmptyGridError("candidate set is empty")
        dims = {h.dim for h in uniq}
        if len(dims) != 1:
            raise InvalidParameterError("candidates must share one dimension")
        return cls(dims.pop(), m, mode, tuple(sorted(uniq, key=BandwidthVec.sort_key)))


def build_grid(m: int, d: int = 1, mode: str = "full") -> DyadicGrid:
    """Every ``h = (2^-k_1, ..., 2^-k_d)`` with ``ln(m)/m <= V_h <= exp(-sqrt(ln m))``.

    ``mode="isotropic"`` keeps only the vectors with equal components.
    """
    if int(m) != m or m < 3:
        raise InvalidParameterError(f"effective sample size must be an integer >= 3, got {m}")
    if int(d) != d or d < 1:
        raise InvalidParameterError(f"dimension must be a positive integer, got {d}")
    if mode not in ("full", "isotropic"):
        raise InvalidParameterError(f"unknown grid mode {mode!r}")
    lo, hi = window(m)
    # total exponent K = sum k_j with lo <= 2^-K <= hi
    k_min = math.ceil(-math.log2(hi) - 1e-12)
    k_max = math.floor(-math.log2(lo) + 1e-12)
    members = []
    for total in range(max(k_min, 0), k_max + 1):
        if mode == "isotropic":
            if total % d:
                continue
            combos = [(total // d,) * d]
        else:
            combos = _compositions(total, d)
        for ks in combos:
            h = BandwidthVec(tuple(2.0 ** -k for k in ks))
            if lo <= h.v_h <= hi:
                members.append(h)
    if not members:
        if k_min > k_max:
            raise EmptyGridError(f"no dyadic volume between ln(m)/m = {lo:.6g} and exp(-sqrt(ln m)) = {hi:.6g}")
        raise EmptyGridError(f"no isotropic dyadic vector in [{lo:.6g}, {hi:.6g}] for d = {d}")
    return DyadicGrid(int(d), int(m), mode, tuple(sorted(members, key=BandwidthVec.sort_key)))
