"""Cell partitions of [0, inf) and probability vectors over them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError, ParameterError

__all__ = ["CellPartition", "BinnedDistribution", "MASS_FLOOR", "floor_renormalize", "as_masses"]

MASS_FLOOR = 1e-12


@dataclass(frozen=True)
class CellPartition:
    """Half-open cells [c_{i-1}, c_i), the last one unbounded above."""

    boundaries: tuple

    def __post_init__(self):
        b = tuple(float(c) for c in self.boundaries)
        if len(b) < 2:
            raise ParameterError("a partition needs at least two cells")
        if any(not np.isfinite(c) for c in b) or any(b1 <= b0 for b0, b1 in zip(b, b[1:])):
            raise ParameterError("cell boundaries must be finite and strictly increasing")
        object.__setattr__(self, "boundaries", b)

    @property
    def size(self) -> int:
        return len(self.boundaries)

    def edges(self) -> np.ndarray:
        """Lower and upper edge of every cell; the last upper edge is +inf."""
        return np.append(np.asarray(self.boundaries), np.inf)

    def index(self, x):
        """0-based cell index of each value (values below c_0 are an error)."""
        arr = np.asarray(x, dtype=float)
        if np.any(arr < self.boundaries[0]):
            raise ParameterError(f"value below the first cell edge {self.boundaries[0]}")
        idx = np.searchsorted(np.asarray(self.boundaries), arr, side="right") - 1
        return int(idx) if np.ndim(x) == 0 else idx

    def labels(self) -> list[str]:
        b = self.boundaries
        out = [f"[{_fmt(lo)},{_fmt(hi)})" for lo, hi in zip(b, b[1:])]
        out.append(f"[{_fmt(b[-1])},inf)")
        return out


def _fmt(c: float) -> str:
    return str(int(c)) if float(c).is_integer() else repr(c)


@dataclass(frozen=True)
class BinnedDistribution:
    masses: np.ndarray
    cells: CellPartition

    def __post_init__(self):
        m = np.asarray(self.masses, dtype=float)
        if m.shape != (self.cells.size,):
            raise ParameterError(f"expected {self.cells.size} masses, got shape {m.shape}")
        if np.any(m < 0) or abs(m.sum() - 1.0) > 1e-9:
            raise ParameterError("masses must be nonnegative and sum to 1")
        object.__setattr__(self, "masses", m)


def floor_renormalize(masses, floor: float = MASS_FLOOR) -> np.ndarray:
    """Clip masses below ``floor`` up to it and rescale rows to sum to one."""
    m = np.maximum(np.asarray(masses, dtype=float), floor)
    total = m.sum(axis=-1, keepdims=True)
    if np.any(~np.isfinite(total)) or np.any(total <= 0):
        raise NumericError("cannot normalise cell masses")
    return m / total


def as_masses(p):
    """Masses and partition (or None) from a BinnedDistribution or array."""
    if isinstance(p, BinnedDistribution):
        return p.masses, p.cells
    m = np.asarray(p, dtype=float)
    if m.ndim != 1 or m.size < 1:
        raise ParameterError("masses must be a 1-d array")
    if np.any(m < 0) or abs(m.sum() - 1.0) > 1e-9:
        raise ParameterError("masses must be nonnegative and sum to 1")
    return m, None
