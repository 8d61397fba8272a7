"""Bell-diagonal two-qubit states and the (fidelity, shape) classification grid.

A Bell-diagonal pair is described by four populations.  In canonical form the
populations are sorted in descending order, so ``f1`` is the fidelity with the
target Bell state.  The planner buckets states by fidelity and by the shape
parameter ``v = (f3 + f4) / (2 (f2 + f3 + f4))``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numba
import numpy as np

SUM_TOL = 1e-12
NEG_TOL = -1e-12


class Unclassifiable(ValueError):
    """Raised for pairs with fidelity below 1/2; such pairs carry no usable entanglement."""


@dataclass(frozen=True)
class BellDiagonalState:
    f1: float
    f2: float
    f3: float
    f4: float

    def __post_init__(self):
        pops = self.populations
        if np.any(pops < NEG_TOL):
            raise ValueError(f"negative population in {tuple(pops)}")
        if abs(pops.sum() - 1.0) > 1e-9:
            raise ValueError(f"populations sum to {pops.sum()!r}, expected 1")

    @classmethod
    def from_array(cls, pops: Sequence[float]) -> "BellDiagonalState":
        return cls(*(float(x) for x in pops))

    @classmethod
    def werner(cls, fidelity: float) -> "BellDiagonalState":
        e = (1.0 - fidelity) / 3.0
        return cls(fidelity, e, e, e)

    @classmethod
    def perfect(cls) -> "BellDiagonalState":
        return cls(1.0, 0.0, 0.0, 0.0)

    @property
    def populations(self) -> np.ndarray:
        return np.array([self.f1, self.f2, self.f3, self.f4], dtype=np.float64)

    @property
    def fidelity(self) -> float:
        return self.f1

    def is_canonical(self) -> bool:
        return self.f1 >= self.f2 >= self.f3 >= self.f4

    def __iter__(self):
        return iter((self.f1, self.f2, self.f3, self.f4))


@numba.njit(cache=True, inline="always")
def canonical_inplace(pops, total):
    """Divide by ``total`` and sort descending (insertion sort; 4 entries)."""
    for i in range(4):
        pops[i] = pops[i] / total
    for i in range(1, 4):
        x = pops[i]
        j = i - 1
        while j >= 0 and pops[j] < x:
            pops[j + 1] = pops[j]
            j -= 1
        pops[j + 1] = x


def canonicalize(s: BellDiagonalState | Sequence[float]) -> BellDiagonalState:
    pops = np.array(list(s), dtype=np.float64)
    if np.any(pops < NEG_TOL):
        raise ValueError(f"negative population in {tuple(pops)}; upstream numerical error")
    pops = np.clip(pops, 0.0, None)
    total = pops.sum()
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"populations sum to {total!r}, expected 1")
    canonical_inplace(pops, total)
    return BellDiagonalState.from_array(pops)


@numba.njit(cache=True, inline="always")
def shape_of(pops):
    err = pops[1] + pops[2] + pops[3]
    if err <= 0.0:
        return 0.0
    return 0.5 * (pops[2] + pops[3]) / err


def shape_parameter(s: BellDiagonalState) -> float:
    """Fraction of the error weight outside the dominant error channel, halved.

    Zero for a perfect pair, 1/3 for Werner states, 0 for pure single-error states.
    """
    return float(shape_of(s.populations))


@dataclass(frozen=True)
class StateClass:
    fidelity_bin: int
    shape_bin: int


class ClassGrid:
    """Fidelity edges over [0.5, 1] and shape edges over [0, 0.5]."""

    def __init__(self, fidelity_edges: Iterable[float], shape_edges: Iterable[float]):
        fe = np.asarray(list(fidelity_edges), dtype=np.float64)
        se = np.asarray(list(shape_edges), dtype=np.float64)
        for name, edges, lo, hi in (("fidelity", fe, 0.5, 1.0), ("shape", se, 0.0, 0.5)):
            if edges.size < 2 or np.any(np.diff(edges) <= 0):
                raise ValueError(f"{name} edges must be strictly increasing with >= 2 entries")
            if edges[0] != lo or edges[-1] != hi:
                raise ValueError(f"{name} edges must span [{lo}, {hi}]")
        if fe.size < 3:
            raise ValueError("need at least two fidelity bins")
        self.fidelity_edges = fe
        self.shape_edges = se
        self.fidelity_edges.flags.writeable = False
        self.shape_edges.flags.writeable = False

    @classmethod
    def uniform(cls, q: int = 100, shape_bins: int = 8) -> "ClassGrid":
        return cls(np.linspace(0.5, 1.0, q + 1), np.linspace(0.0, 0.5, shape_bins + 1))

    @classmethod
    def two_tier(cls, split: float = 0.9, coarse: int = 40, fine: int = 100,
                 shape_bins: int = 8) -> "ClassGrid":
        """``coarse`` uniform bins on [0.5, split) and ``fine`` on [split, 1]."""
        if not 0.5 < split < 1.0:
            raise ValueError("split must lie in (0.5, 1)")
        low = np.linspace(0.5, split, coarse + 1)[:-1]
        high = np.linspace(split, 1.0, fine + 1)
        return cls(np.concatenate([low, high]), np.linspace(0.0, 0.5, shape_bins + 1))

    @property
    def q(self) -> int:
        return self.fidelity_edges.size - 1

    @property
    def shape_bins(self) -> int:
        return self.shape_edges.size - 1

    @property
    def n_classes(self) -> int:
        return self.q * self.shape_bins

    def flat(self, c: StateClass) -> int:
        return c.fidelity_bin * self.shape_bins + c.shape_bin

    def unflat(self, idx: int) -> StateClass:
        return StateClass(idx // self.shape_bins, idx % self.shape_bins)

    def __eq__(self, other):
        return (isinstance(other, ClassGrid)
                and np.array_equal(self.fidelity_edges, other.fidelity_edges)
                and np.array_equal(self.shape_edges, other.shape_edges))

    def __repr__(self):
        return f"ClassGrid(q={self.q}, shape_bins={self.shape_bins})"


@numba.njit(cache=True, inline="always")
def bin_of(x, edges):
    """Half-open bins, last one closed; -1 outside.

    Starts from the uniform-grid guess and walks to the right bin, so any ascending
    edges work and uniform grids cost O(1).
    """
    n = edges.size - 1
    if not (edges[0] <= x <= edges[n]):
        return -1
    b = int((x - edges[0]) / (edges[n] - edges[0]) * n)
    b = min(max(b, 0), n - 1)
    while b > 0 and x < edges[b]:
        b -= 1
    while b < n - 1 and x >= edges[b + 1]:
        b += 1
    return b


@numba.njit(cache=True, inline="always")
def class_of(pops, fid_edges, shape_edges):
    """Flat class index of a canonical state, or -1 if below the fidelity floor."""
    fb = bin_of(pops[0], fid_edges)
    if fb < 0:
        return -1
    sb = bin_of(shape_of(pops), shape_edges)
    return fb * (shape_edges.size - 1) + sb


def classify(s: BellDiagonalState, grid: ClassGrid) -> StateClass:
    idx = class_of(s.populations, grid.fidelity_edges, grid.shape_edges)
    if idx < 0:
        raise Unclassifiable(f"fidelity {s.f1:.6g} is outside [0.5, 1]")
    return grid.unflat(int(idx))
