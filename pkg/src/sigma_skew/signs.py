"""Random excursion signs.

Each excursion n of a path receives an independent sign zeta_n with
P(zeta_n = +1) = alpha.  For a time-dependent alpha given by a step schedule,
an independent sign zeta^i_n is drawn for every (schedule interval i,
excursion n) pair and the sign in force at time t is the one of the interval
containing t, so it can switch inside an excursion at a breakpoint.

Signs are keyed: zeta^i_n is the n-th draw of the stream keyed by
(seed, i), so it never depends on how many excursions or replicates exist.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _rng
from .errors import ParameterError
from .excursions import ExcursionDecomposition
from .paths import Path, StepFunction


class AlphaSchedule(StepFunction):
    """Step schedule of skewness levels, each in [0, 1]."""

    def __post_init__(self):
        super().__post_init__()
        if not all(0.0 <= a <= 1.0 for a in self.levels):
            raise ParameterError("alpha out of [0,1]")

    @classmethod
    def coerce(cls, alpha) -> "AlphaSchedule":
        if isinstance(alpha, AlphaSchedule):
            return alpha
        if isinstance(alpha, StepFunction):
            return cls(alpha.breakpoints, alpha.levels)
        if isinstance(alpha, str):
            return cls.parse(alpha)
        return cls.constant(float(alpha))


@dataclass(frozen=True, eq=False)
class SignPath:
    values: np.ndarray
    excursion_signs: np.ndarray
    seed: int
    t0: float = 0.0
    dt: float = 1.0

    def as_path(self) -> Path:
        return Path(self.t0, self.dt, self.values.astype(np.float64), label="sign")


def _draw(seed: int, interval: int, n: int, alpha: float) -> np.ndarray:
    u = _rng.keyed_generator(seed, _rng.SIGN, interval).random(n)
    return np.where(u < alpha, 1, -1).astype(np.int8)


def sample_z_alpha(dec: ExcursionDecomposition, alpha: float, seed: int,
                   t0: float = 0.0, dt: float = 1.0) -> SignPath:
    if not 0.0 <= alpha <= 1.0:
        raise ParameterError("alpha out of [0,1]")
    zeta = _draw(seed, 0, dec.n_excursions, alpha)
    inside = dec.ordinal >= 0
    values = np.zeros(len(dec), dtype=np.int8)
    values[inside] = zeta[dec.ordinal[inside]]
    return SignPath(values, zeta[:, None], int(seed), t0, dt)


def sample_z_alpha_schedule(dec: ExcursionDecomposition, schedule: AlphaSchedule,
                            grid: tuple[float, float], seed: int) -> SignPath:
    schedule = AlphaSchedule.coerce(schedule)
    t0, dt = grid
    if not dt > 0:
        raise ParameterError("grid step must be > 0")
    k = dec.n_excursions
    zeta = np.stack([_draw(seed, i, k, a) for i, a in enumerate(schedule.levels)], axis=1)
    times = t0 + np.arange(len(dec)) * dt
    interval = schedule.interval_index(times)
    inside = dec.ordinal >= 0
    values = np.zeros(len(dec), dtype=np.int8)
    if k:
        values[inside] = zeta[dec.ordinal[inside], interval[inside]]
    return SignPath(values, zeta, int(seed), t0, dt)


def to_cadlag_k(sp: SignPath, dec: ExcursionDecomposition) -> Path:
    """Closed-left, open-right version of the sign path.

    Equal to the sign path except at each excursion's left end g_n, where it
    already takes the excursion's first sign.
    """
    k = sp.values.astype(np.float64)
    if dec.n_excursions:
        g = dec.intervals[:, 0]
        k[g] = sp.values[g + 1]
    return Path(sp.t0, sp.dt, k, label="k")


def write_sign_csv(sp: SignPath, fh) -> None:
    fh.write("index,sign\n")
    fh.writelines(f"{i},{s}\n" for i, s in enumerate(sp.values.tolist()))


def write_sign_table_csv(sp: SignPath, fh) -> None:
    fh.write("n,i,zeta\n")
    for n, row in enumerate(sp.excursion_signs.tolist()):
        fh.writelines(f"{n},{i},{z}\n" for i, z in enumerate(row))
