"""Sampled paths, class-(Σ) example generators, realized QV and time change.

A :class:`Path` is a uniform-grid trajectory; its grid is implicit
(``t0 + i * dt``).  A :class:`SigmaProcess` bundles a nonnegative process X of
the class (Σ) with the martingale part M of its decomposition X = M + A and
the bracket <M, M>.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _rng
from .errors import InsufficientQuadraticVariationError, ParameterError

KINDS = ("abs_bm", "drawdown", "scaled_abs", "product_abs", "custom")


def _frozen(values, dtype=np.float64) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Path:
    t0: float
    dt: float
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ParameterError(f"dt must be finite and > 0, got {self.dt!r}")
        values = _frozen(self.values)
        if values.ndim != 1 or values.size == 0:
            raise ParameterError("path values must be a nonempty 1-d sequence")
        if not np.all(np.isfinite(values)):
            raise ParameterError("path values must be finite")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size

    @property
    def n_steps(self) -> int:
        return self.values.size - 1

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.values.size) * self.dt

    @property
    def horizon(self) -> float:
        return self.t0 + self.n_steps * self.dt

    def index_of(self, t: float) -> int:
        """Grid index nearest to time ``t``."""
        i = int(round((t - self.t0) / self.dt))
        if not 0 <= i < self.values.size:
            raise IndexError(f"time {t!r} outside the grid")
        return i

    def at(self, t: float) -> float:
        return float(self.values[self.index_of(t)])

    def same_grid(self, other: "Path") -> bool:
        return self.t0 == other.t0 and self.dt == other.dt and len(self) == len(other)

    def replace(self, values, label: Optional[str] = None) -> "Path":
        return Path(self.t0, self.dt, values, self.label if label is None else label)


@dataclass(frozen=True)
class StepFunction:
    """Right-continuous piecewise-constant function of time on [0, inf).

    ``levels[i]`` holds on ``[breakpoints[i], breakpoints[i + 1])``.
    """

    breakpoints: tuple
    levels: tuple

    def __post_init__(self):
        bp = tuple(float(b) for b in self.breakpoints)
        lv = tuple(float(v) for v in self.levels)
        if len(bp) == 0 or len(bp) != len(lv):
            raise ParameterError("breakpoints and levels must be nonempty and of equal length")
        if bp[0] != 0.0:
            raise ParameterError("first breakpoint must be 0")
        if any(b1 <= b0 for b0, b1 in zip(bp, bp[1:])):
            raise ParameterError("breakpoints must be strictly increasing")
        if not all(math.isfinite(v) for v in lv):
            raise ParameterError("levels must be finite")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "levels", lv)

    @classmethod
    def constant(cls, level: float):
        return cls((0.0,), (level,))

    @classmethod
    def parse(cls, text: str):
        """Parse ``"0:0.3,1:0.8"`` (time:level pairs)."""
        pairs = []
        for item in text.split(","):
            item = item.strip()
            if not item:
                continue
            try:
                t, v = item.split(":")
                pairs.append((float(t), float(v)))
            except ValueError:
                raise ParameterError(f"malformed time:value pair {item!r}") from None
        if not pairs:
            raise ParameterError("empty step function")
        return cls(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))

    def format(self) -> str:
        """Shortest text that parses back to exactly the same function."""
        def num(v: float) -> str:
            return str(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)

        return ",".join(f"{num(t)}:{num(v)}" for t, v in zip(self.breakpoints, self.levels))

    @property
    def is_constant(self) -> bool:
        return len(set(self.levels)) == 1

    def interval_index(self, t) -> np.ndarray:
        """Index of the interval containing each time (closed on the left)."""
        return np.searchsorted(np.asarray(self.breakpoints), t, side="right") - 1

    def __call__(self, t):
        idx = self.interval_index(np.clip(t, 0.0, None))
        return np.asarray(self.levels)[idx]


@dataclass(frozen=True, eq=False)
class SigmaProcess:
    """X = M + A with ``driver`` holding M and ``qv`` holding <M, M>.

    ``signed`` is the signed path whose absolute value X is built from
    (B for abs_bm, B1*B2 for product_abs); excursion boundaries of abs-type
    generators are located on its sign changes.
    """

    x: Path
    driver: Path
    qv: Path
    kind: str
    signed: Optional[Path] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown kind {self.kind!r}")
        for p in (self.driver, self.qv) + ((self.signed,) if self.signed is not None else ()):
            if not self.x.same_grid(p):
                raise ParameterError("x, driver and qv must share t0, dt and length")
        if self.x.values[0] != 0.0:
            raise ParameterError("class-(Σ) paths must start at 0")
        q = self.qv.values
        if q[0] != 0.0 or np.any(np.diff(q) < 0):
            raise ParameterError("qv must start at 0 and be nondecreasing")

    @property
    def finite_variation(self) -> Path:
        """A = X - M, the part of X carried by its zero set."""
        return self.x.replace(self.x.values - self.driver.values, label="A")


def sgn(values: np.ndarray) -> np.ndarray:
    """Sign with the grid convention sgn(0) = +1."""
    return np.where(values >= 0, 1.0, -1.0)


def tanaka_sum(values: np.ndarray) -> np.ndarray:
    """Cumulative discrete integral of sgn(v) dv, starting at 0."""
    out = np.zeros_like(values, dtype=np.float64)
    np.cumsum(sgn(values[:-1]) * np.diff(values), out=out[1:])
    return out


def sign_boundaries(values: np.ndarray) -> np.ndarray:
    """Grid surrogate of the zero set of a signed path.

    Marks every index holding an exact 0 and, for each sign change between
    i and i + 1, the one of the two indices with smaller magnitude (i on ties).
    """
    v = np.asarray(values, dtype=np.float64)
    mask = v == 0.0
    a, b = v[:-1], v[1:]
    change = ((a > 0) & (b < 0)) | ((a < 0) & (b > 0))
    left = change & (np.abs(a) <= np.abs(b))
    right = change & ~left
    mask[:-1] |= left
    mask[1:] |= right
    return mask


def generate_bm(n_steps: int, dt: float, seed: int, index: int = 0, stream: int = _rng.BM) -> Path:
    """Standard Brownian path with B_0 = 0; bit-exact given (seed, index)."""
    if int(n_steps) != n_steps or n_steps < 1:
        raise ParameterError(f"n_steps must be an integer >= 1, got {n_steps!r}")
    if not (math.isfinite(dt) and dt > 0):
        raise ParameterError(f"dt must be finite and > 0, got {dt!r}")
    gen = _rng.keyed_generator(seed, index, stream)
    values = np.zeros(int(n_steps) + 1)
    np.cumsum(gen.standard_normal(int(n_steps)) * math.sqrt(dt), out=values[1:])
    return Path(0.0, dt, values, label=f"bm[{seed}:{index}]")


def realized_qv(p: Path) -> Path:
    out = np.zeros(len(p))
    np.cumsum(np.diff(p.values) ** 2, out=out[1:])
    return p.replace(out, label="qv")


def _abs_type(signed: Path, kind: str, driver_values: np.ndarray, qv_values=None, params=None):
    boundaries = sign_boundaries(signed.values)
    x = np.where(boundaries, 0.0, np.abs(signed.values))
    driver = signed.replace(driver_values, label="M")
    qv = realized_qv(driver) if qv_values is None else signed.replace(qv_values, label="qv")
    return SigmaProcess(
        x=signed.replace(x, label=kind), driver=driver, qv=qv, kind=kind,
        signed=signed, params=params or {},
    )


def sigma_from_bm(b: Path) -> SigmaProcess:
    """|B| with its Tanaka martingale part sum sgn(B) dB."""
    return _abs_type(b, "abs_bm", tanaka_sum(b.values))


def drawdown_from_bm(b: Path) -> SigmaProcess:
    running_max = np.maximum.accumulate(b.values)
    driver = b.replace(-b.values, label="M")
    return SigmaProcess(
        x=b.replace(running_max - b.values, label="drawdown"),
        driver=driver, qv=realized_qv(driver), kind="drawdown",
    )


def scaled_abs_from_bm(b: Path, sigma: StepFunction) -> SigmaProcess:
    """|M| with M = int sigma dB for a deterministic step function sigma."""
    if min(sigma.levels) <= 0:
        raise ParameterError("sigma must be > 0")
    s = sigma(b.times[:-1])
    m = np.zeros(len(b))
    np.cumsum(s * np.diff(b.values), out=m[1:])
    qv = np.zeros(len(b))
    np.cumsum(s * s * b.dt, out=qv[1:])
    signed = b.replace(m, label="M_scaled")
    return _abs_type(signed, "scaled_abs", tanaka_sum(m), qv, {"sigma": sigma.format()})


def product_abs_from_bms(b1: Path, b2: Path) -> SigmaProcess:
    """|B1| |B2| for independent drivers; the bracket [|B1|, |B2|] vanishes."""
    if not b1.same_grid(b2):
        raise ParameterError("component paths must share a grid")
    x1, x2 = np.abs(b1.values), np.abs(b2.values)
    dm1, dm2 = np.diff(tanaka_sum(b1.values)), np.diff(tanaka_sum(b2.values))
    driver = np.zeros(len(b1))
    np.cumsum(x1[:-1] * dm2 + x2[:-1] * dm1, out=driver[1:])
    signed = b1.replace(b1.values * b2.values, label="B1*B2")
    return _abs_type(signed, "product_abs", driver)


def make_sigma_process(
    kind: str,
    n_steps: int,
    dt: float,
    seed: int,
    index: int = 0,
    sigma: Optional[StepFunction | float] = None,
    component_seeds: Optional[Sequence[int]] = None,
) -> SigmaProcess:
    """Seeded class-(Σ) example process for replicate ``index``."""
    if kind == "abs_bm":
        return sigma_from_bm(generate_bm(n_steps, dt, seed, index))
    if kind == "drawdown":
        return drawdown_from_bm(generate_bm(n_steps, dt, seed, index))
    if kind == "scaled_abs":
        if sigma is None:
            sigma = 1.0
        if not isinstance(sigma, StepFunction):
            sigma = StepFunction.constant(float(sigma))
        return scaled_abs_from_bm(generate_bm(n_steps, dt, seed, index), sigma)
    if kind == "product_abs":
        if component_seeds is None:
            b1 = generate_bm(n_steps, dt, seed, index, _rng.BM)
            b2 = generate_bm(n_steps, dt, seed, index, _rng.BM_SECOND)
        else:
            s1, s2 = component_seeds
            if s1 == s2:
                raise ParameterError("product_abs needs two distinct component seeds")
            b1 = generate_bm(n_steps, dt, s1, index)
            b2 = generate_bm(n_steps, dt, s2, index)
        return product_abs_from_bms(b1, b2)
    raise ParameterError(f"unknown kind {kind!r}")


def time_change_indices(qv: np.ndarray, horizon: float, dt: float) -> np.ndarray:
    """Original grid indices of tau_t = inf{s : qv_s > t} on t = 0, dt, ..., horizon.

    Where qv passes through t strictly the first index with qv >= t is used;
    where qv sits flat at exactly t > 0 the index at which it leaves t is used.
    tau_0 is always index 0.
    """
    qv = np.asarray(qv, dtype=np.float64)
    if horizon > qv[-1]:
        raise InsufficientQuadraticVariationError(horizon, float(qv[-1]))
    n_new = int(math.floor(horizon / dt + 1e-9))
    t = np.arange(n_new + 1) * dt
    left = np.searchsorted(qv, t, side="left")
    right = np.searchsorted(qv, t, side="right") - 1
    hit = qv[np.minimum(left, qv.size - 1)] == t
    idx = np.where(hit, right, left)
    # the new clock starts where the old one does, even if qv is flat on the first cells
    idx[0] = 0
    return idx


def time_change(p: SigmaProcess, horizon: float, dt: Optional[float] = None) -> SigmaProcess:
    """Re-index X, M and <M, M> on the quadratic-variation clock (no interpolation)."""
    dt = p.x.dt if dt is None else dt
    if not (math.isfinite(dt) and dt > 0):
        raise ParameterError(f"dt must be finite and > 0, got {dt!r}")
    idx = time_change_indices(p.qv.values, horizon, dt)

    def reindex(path: Optional[Path]):
        if path is None:
            return None
        return Path(0.0, dt, path.values[idx], label=path.label)

    params = dict(p.params)
    params["tau_index"] = idx
    params["source_dt"] = p.x.dt
    return SigmaProcess(
        x=reindex(p.x), driver=reindex(p.driver), qv=reindex(p.qv), kind=p.kind,
        signed=reindex(p.signed), params=params,
    )


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Replicate paths stacked row-wise on a shared uniform grid."""

    values: np.ndarray
    t0: float = 0.0
    dt: float = 1.0
    label: str = ""

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] == 0 or values.shape[1] == 0:
            raise ParameterError("ensemble values must be a nonempty 2-d array")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_paths(cls, paths: Sequence[Path], label: str = ""):
        paths = list(paths)
        if not paths:
            raise ParameterError("empty ensemble")
        first = paths[0]
        if not all(first.same_grid(p) for p in paths):
            raise ParameterError("ensemble paths must share a grid")
        return cls(np.stack([p.values for p in paths]), first.t0, first.dt, label)

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    @property
    def n_steps(self) -> int:
        return self.values.shape[1] - 1

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.values.shape[1]) * self.dt

    def index_of(self, t: float) -> int:
        i = int(round((t - self.t0) / self.dt))
        if not 0 <= i <= self.n_steps:
            raise IndexError(f"time {t!r} outside the grid")
        return i

    def column(self, t: float) -> np.ndarray:
        return self.values[:, self.index_of(t)]

    def path(self, i: int) -> Path:
        return Path(self.t0, self.dt, self.values[i], self.label)


def write_path_csv(p: Path, fh) -> None:
    fh.write("t,value\n")
    for t, v in zip(p.times, p.values):
        fh.write(f"{t:.17g},{v:.17g}\n")


def read_path_csv(fh, label: str = "") -> Path:
    rows = list(csv.DictReader(fh))
    if len(rows) < 1:
        raise ParameterError("empty path file")
    t = np.array([float(r["t"]) for r in rows])
    v = np.array([float(r["value"]) for r in rows])
    dt = t[1] - t[0] if t.size > 1 else 1.0
    return Path(float(t[0]), float(dt), v, label)


def write_ensemble_csv(ens: Ensemble, fh, value_name: str = "value") -> None:
    fh.write(f"replicate,t,{value_name}\n")
    times = ["%.17g" % t for t in ens.times]
    for r, row in enumerate(ens.values):
        fh.writelines(f"{r},{t},{v:.17g}\n" for t, v in zip(times, row.tolist()))


def read_ensemble_csv(fh) -> Ensemble:
    header = fh.readline().strip().split(",")
    if len(header) != 3 or header[:2] != ["replicate", "t"]:
        raise ParameterError(f"not an ensemble file (header {header!r})")
    data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.size == 0:
        raise ParameterError("empty ensemble file")
    reps = data[:, 0].astype(np.int64)
    n_paths = int(reps.max()) + 1
    values = data[:, 2].reshape(n_paths, -1)
    times = data[: values.shape[1], 1]
    dt = float(times[1] - times[0]) if times.size > 1 else 1.0
    return Ensemble(values, float(times[0]), dt)
