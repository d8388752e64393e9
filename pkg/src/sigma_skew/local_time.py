"""Symmetric local time at level 0 of a sampled semimartingale.

Two estimators are provided so they can cross-check each other:

* ``lt_band``: occupation of the band ``|x| <= eps`` measured in the
  quadratic-variation clock and divided by ``2 eps``;
* ``lt_tanaka``: the discrete Tanaka residual ``|x_t| - |x_0| - sum sgn(x) dx``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ParameterError
from .paths import Path, SigmaProcess, tanaka_sum

METHODS = ("band", "tanaka")


@dataclass(frozen=True, eq=False)
class LocalTimeEstimate:
    lt: Path
    method: str
    eps: Optional[float] = None
    raw: Optional[Path] = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ParameterError(f"unknown local time method {self.method!r}")
        v = self.lt.values
        if v[0] != 0.0 or np.any(np.diff(v) < 0):
            raise ParameterError("local time must start at 0 and be nondecreasing")


def default_eps(x: Path, qv: Path) -> float:
    """Square root of the mean nonzero qv increment.

    Equals sqrt(dt * qv_T / T) on a grid where every step moves the clock, and
    follows the effective step of time-changed paths that repeat values.
    """
    dq = np.diff(qv.values)
    moving = np.count_nonzero(dq > 0)
    if moving == 0:
        return math.sqrt(x.dt)
    return math.sqrt(float(qv.values[-1]) / moving)


def lt_band(x: Path, qv: Path, eps: Optional[float] = None) -> LocalTimeEstimate:
    if not x.same_grid(qv):
        raise ParameterError("x and qv must share a grid")
    if eps is None:
        eps = default_eps(x, qv)
    if not eps > 0:
        raise ParameterError(f"eps must be > 0, got {eps!r}")
    near = np.abs(x.values[:-1]) <= eps
    dq = np.diff(qv.values)
    out = np.zeros(len(x))
    np.cumsum(np.where(near, dq, 0.0), out=out[1:])
    out /= 2.0 * eps
    return LocalTimeEstimate(x.replace(out, label="L_band"), "band", float(eps))


def lt_tanaka(x: Path) -> LocalTimeEstimate:
    """Running maximum of the discrete Tanaka residual (sgn(0) = +1)."""
    v = x.values
    raw = np.abs(v) - abs(v[0]) - tanaka_sum(v)
    lt = np.maximum.accumulate(np.maximum(raw, 0.0))
    return LocalTimeEstimate(
        x.replace(lt, label="L_tanaka"), "tanaka", None, x.replace(raw, label="L_tanaka_raw")
    )


def sigma_local_time(src: SigmaProcess, method: str = "band",
                     eps: Optional[float] = None) -> LocalTimeEstimate:
    """Estimate of the finite-variation part A of a nonnegative class-(Σ) process.

    The Tanaka route runs on the signed path when the generator has one
    (A is the local time of B for |B|); otherwise it uses the running maximum
    of X - M, which is exact for the drawdown (A = running max of B).
    """
    if method == "band":
        return lt_band(src.x, src.qv, eps)
    if method == "tanaka":
        if src.signed is not None:
            return lt_tanaka(src.signed)
        a = src.finite_variation.values
        lt = np.maximum.accumulate(np.maximum(a, 0.0))
        return LocalTimeEstimate(src.x.replace(lt, label="L_tanaka"), "tanaka", None,
                                 src.x.replace(a, label="A"))
    raise ParameterError(f"unknown local time method {method!r}")


def write_local_time_csv(est: LocalTimeEstimate, fh) -> None:
    fh.write("t,lt,method,eps\n")
    eps = "" if est.eps is None else f"{est.eps:.17g}"
    for t, v in zip(est.lt.times, est.lt.values):
        fh.write(f"{t:.17g},{v:.17g},{est.method},{eps}\n")
