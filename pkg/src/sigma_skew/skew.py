"""Skew Brownian motions built by flipping excursion signs of a class-(Σ) process.

With X = M + A in the class (Σ) and a random excursion sign process Z, the
product Y = Z X solves

    Y_t = W_t + int_0^t (2 alpha(s) - 1) dL^0_s(Y)

in law, where W = int Z dM.  When M is not a Brownian motion, X is first
run on the clock of <M, M> and the signs are drawn on the excursions of the
time-changed path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ParameterError
from .excursions import ExcursionDecomposition, decompose
from .paths import Path, SigmaProcess, time_change
from .signs import AlphaSchedule, SignPath, sample_z_alpha_schedule

QV_CLOCK_TOLERANCE = 0.05
# generators whose martingale part is a Brownian motion by construction
BROWNIAN_DRIVER_KINDS = ("abs_bm", "drawdown")


@dataclass(frozen=True, eq=False)
class SkewSolution:
    y: Path
    source: SigmaProcess
    source_used: SigmaProcess
    sign: SignPath
    schedule: AlphaSchedule
    construction: str
    decomposition: ExcursionDecomposition
    local_time_ref: Optional[Path] = field(default=None)

    def __post_init__(self):
        if self.construction not in ("direct", "time_changed"):
            raise ParameterError(f"unknown construction {self.construction!r}")


def _zero_tol(src: SigmaProcess, zero_tol: Optional[float]) -> float:
    if zero_tol is not None:
        return zero_tol
    if src.kind == "custom":
        raise ParameterError("custom processes need an explicit zero_tol")
    # shipped generators carry exact zeros on their excursion boundaries
    return 0.0


def _flip(src: SigmaProcess, used: SigmaProcess, schedule, seed: int,
          construction: str, zero_tol: Optional[float]) -> SkewSolution:
    schedule = AlphaSchedule.coerce(schedule)
    dec = decompose(used.x, _zero_tol(src, zero_tol))
    sign = sample_z_alpha_schedule(dec, schedule, (used.x.t0, used.x.dt), seed)
    y = used.x.replace(sign.values * used.x.values, label=f"Y[{construction}]")
    return SkewSolution(y, src, used, sign, schedule, construction, dec)


def build_direct(src: SigmaProcess, schedule, seed: int,
                 zero_tol: Optional[float] = None) -> SkewSolution:
    """Y = Z X for a source whose martingale part runs on the identity clock."""
    horizon = src.x.horizon - src.x.t0
    terminal = float(src.qv.values[-1])
    brownian = src.kind in BROWNIAN_DRIVER_KINDS
    if not brownian and not math.isclose(terminal, horizon, rel_tol=QV_CLOCK_TOLERANCE):
        raise ParameterError(
            "martingale part is not a standard Brownian motion; use build_time_changed "
            f"(terminal qv {terminal:.6g} vs horizon {horizon:.6g})"
        )
    return _flip(src, src, schedule, seed, "direct", zero_tol)


def build_time_changed(src: SigmaProcess, schedule, seed: int, horizon: float,
                       dt: Optional[float] = None,
                       zero_tol: Optional[float] = None) -> SkewSolution:
    """Time-change X by the inverse of <M, M>, then flip the new path's excursions."""
    used = time_change(src, horizon, dt)
    return _flip(src, used, schedule, seed, "time_changed", zero_tol)


def drift_ledger(sol: SkewSolution, lt: Path) -> Path:
    """Cumulative drift sum (2 alpha(t_j) - 1) dL_j, alpha read at the left end of each step."""
    if not sol.y.same_grid(lt):
        raise ParameterError("local time and solution must share a grid")
    dl = np.diff(lt.values)
    if np.any(dl < 0):
        raise ParameterError("local time must be nondecreasing")
    weights = 2.0 * sol.schedule(sol.y.times[:-1]) - 1.0
    out = np.zeros(len(lt))
    np.cumsum(weights * dl, out=out[1:])
    return lt.replace(out, label="D")


def write_drift_csv(d: Path, fh) -> None:
    fh.write("t,D\n")
    for t, v in zip(d.times, d.values):
        fh.write(f"{t:.17g},{v:.17g}\n")
