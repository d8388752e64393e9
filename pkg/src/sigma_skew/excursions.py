"""Excursion intervals of a sampled path away from zero, and the last-zero map."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .paths import Path, sign_boundaries


@dataclass(frozen=True, eq=False)
class ExcursionDecomposition:
    """Maximal nonzero runs of a path, in grid indices.

    ``intervals[n] = (g_n, d_n)`` with zeros at both ends, except that the last
    interval ends at the final index when ``unfinished`` is set.
    ``ordinal[i]`` is the excursion containing index i (-1 on the zero set).
    """

    intervals: np.ndarray
    zero_mask: np.ndarray
    gamma: np.ndarray
    ordinal: np.ndarray
    unfinished: bool

    @property
    def n_excursions(self) -> int:
        return self.intervals.shape[0]

    def __len__(self) -> int:
        return self.zero_mask.size


def _from_mask(mask: np.ndarray) -> ExcursionDecomposition:
    mask = np.asarray(mask, dtype=bool)
    n = mask.size
    if not mask[0]:
        raise ParameterError("path does not vanish at 0")
    inside = ~mask
    start = np.zeros(n, dtype=bool)
    start[1:] = inside[1:] & mask[:-1]
    last = np.zeros(n, dtype=bool)
    last[:-1] = inside[:-1] & mask[1:]
    last[-1] = inside[-1]
    g = np.flatnonzero(start) - 1
    d = np.flatnonzero(last) + 1
    unfinished = bool(inside[-1])
    if unfinished:
        d[-1] = n - 1
    ordinal = np.where(inside, np.cumsum(start) - 1, -1)
    idx = np.arange(n)
    gamma = np.maximum.accumulate(np.where(mask, idx, 0))
    for arr in (mask, gamma, ordinal):
        arr.setflags(write=False)
    intervals = np.stack([g, d], axis=1) if g.size else np.zeros((0, 2), dtype=np.int64)
    intervals.setflags(write=False)
    return ExcursionDecomposition(intervals, mask, gamma, ordinal, unfinished)


def decompose(x: Path, zero_tol: float) -> ExcursionDecomposition:
    """Excursions of ``x`` where the zero set is ``|x| <= zero_tol``."""
    if zero_tol is None or not zero_tol >= 0:
        raise ParameterError(f"zero_tol must be a nonnegative number, got {zero_tol!r}")
    return _from_mask(np.abs(x.values) <= zero_tol)


def decompose_by_sign(signed: Path) -> ExcursionDecomposition:
    """Excursions of |signed| with zeros placed on the sign changes of ``signed``."""
    return _from_mask(sign_boundaries(signed.values))


def last_zero(dec: ExcursionDecomposition, i: int) -> int:
    if not 0 <= i < len(dec):
        raise IndexError(f"index {i} out of range [0, {len(dec)})")
    return int(dec.gamma[i])


def write_decomposition_csv(dec: ExcursionDecomposition, fh) -> None:
    fh.write("n,g_index,d_index,unfinished\n")
    k = dec.n_excursions
    for n, (g, d) in enumerate(dec.intervals.tolist()):
        flag = int(dec.unfinished and n == k - 1)
        fh.write(f"{n},{g},{d},{flag}\n")
