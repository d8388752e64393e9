"""Statistical and pathwise checks on ensembles of class-(Σ) processes and skew solutions.

Martingale claims are checked cross-sectionally: at each block boundary the
forward increment is regressed on (1, Y_t) across replicates and both
coefficients are tested jointly against zero with a heteroskedasticity-robust
Wald statistic, Bonferroni-corrected across blocks.  Distributional claims use
the one-sample Kolmogorov-Smirnov distance with the asymptotic critical value.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy import stats
from scipy.special import ndtr

from .errors import DegenerateEnsembleError, ParameterError
from .local_time import LocalTimeEstimate, lt_band, sigma_local_time
from .paths import Ensemble, Path, SigmaProcess, StepFunction
from .signs import AlphaSchedule
from .skew import SkewSolution, drift_ledger

MIN_PATHS = 1000
MIN_NONZERO = 100


@dataclass
class TestReport:
    name: str
    statistic: float
    threshold: float
    p_value: Optional[float]
    passed: bool
    n_paths: int
    n_steps: int
    seed: Optional[int] = None
    notes: str = ""

    __test__ = False  # not a pytest class

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return {k: d[k] for k in ("name", "statistic", "threshold", "p_value", "pass",
                                  "n_paths", "n_steps", "seed", "notes")}

    @classmethod
    def from_dict(cls, d: dict) -> "TestReport":
        try:
            return cls(
                name=str(d["name"]), statistic=float(d["statistic"]),
                threshold=float(d["threshold"]),
                p_value=None if d.get("p_value") is None else float(d["p_value"]),
                passed=bool(d["pass"]), n_paths=int(d["n_paths"]), n_steps=int(d["n_steps"]),
                seed=None if d.get("seed") is None else int(d["seed"]),
                notes=str(d.get("notes", "")),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParameterError(f"malformed report entry: {exc}") from None

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        p = "" if self.p_value is None else f" p={self.p_value:.4g}"
        return f"[{status}] {self.name}: statistic={self.statistic:.6g} threshold={self.threshold:.6g}{p}"


def ks_critical_value(n: int, level: float) -> float:
    """Asymptotic Kolmogorov critical value c(level) / sqrt(n)."""
    return float(stats.kstwobign.isf(level)) / math.sqrt(n)


def ks_distance(sample: np.ndarray, cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    x = np.sort(np.asarray(sample, dtype=np.float64))
    n = x.size
    f = cdf(x)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


def skew_bm_cdf(y, alpha: float, t: float):
    """CDF of skew Brownian motion started at 0 with skewness alpha, at time t."""
    y = np.asarray(y, dtype=np.float64)
    phi = ndtr(y / math.sqrt(t))
    return np.where(y <= 0, 2.0 * (1.0 - alpha) * phi, (1.0 - alpha) + alpha * (2.0 * phi - 1.0))


def _mean(values: np.ndarray) -> float:
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size >= 1_000_000:
        return math.fsum(values.tolist()) / values.size
    return float(np.mean(values))


def _ensemble(data) -> Ensemble:
    if isinstance(data, Ensemble):
        return data
    if isinstance(data, np.ndarray):
        return Ensemble(data)
    items = list(data)
    if items and isinstance(items[0], SkewSolution):
        items = [s.y for s in items]
    return Ensemble.from_paths(items)


def _robust_wald(x: np.ndarray, dy: np.ndarray) -> tuple[float, int]:
    """HC1 Wald statistic for intercept = slope = 0 in dy = a + b x + e."""
    n = x.size
    if np.all(x == x[0]):
        mean = dy.mean()
        var = dy.var(ddof=1)
        if var == 0:
            return (0.0 if mean == 0 else math.inf), 1
        return float(n * mean * mean / var), 1
    design = np.column_stack([np.ones(n), x])
    xtx_inv = np.linalg.inv(design.T @ design)
    beta = xtx_inv @ (design.T @ dy)
    resid = dy - design @ beta
    meat = (design * (resid * resid)[:, None]).T @ design
    cov = xtx_inv @ meat @ xtx_inv * n / (n - 2)
    try:
        stat = float(beta @ np.linalg.solve(cov, beta))
    except np.linalg.LinAlgError:
        stat = 0.0 if np.all(beta == 0) else math.inf
    return stat, 2


def martingale_increment_test(ensemble, block: int, level: float = 0.01,
                              name: str = "martingale_increment", seed: Optional[int] = None,
                              min_paths: int = MIN_PATHS) -> TestReport:
    """Joint zero-drift test of forward increments across the ensemble.

    Passes when the Bonferroni-adjusted smallest block p-value is >= level.
    The mean realized QV at the block boundaries is fitted by a line through
    the origin and its largest relative deviation is recorded in the notes.
    """
    ens = _ensemble(ensemble)
    if ens.n_paths < min_paths:
        raise ParameterError(f"need at least {min_paths} paths, got {ens.n_paths}")
    if block < 1 or ens.n_steps % block:
        raise ParameterError(f"block {block} must divide the {ens.n_steps} grid steps")
    v = ens.values
    if not np.any(v != v[:, :1]):
        return TestReport(name, 0.0, level, 1.0, True, ens.n_paths, ens.n_steps, seed,
                          "constant ensemble; rule p_value >= level")
    if np.all(v == v[:1]):
        raise DegenerateEnsembleError("ensemble has zero cross-sectional variance")
    boundaries = range(0, ens.n_steps, block)
    pvals, wald = [], []
    for k in boundaries:
        stat, dof = _robust_wald(v[:, k], v[:, k + block] - v[:, k])
        wald.append(stat)
        pvals.append(float(stats.chi2.sf(stat, dof)) if math.isfinite(stat) else 0.0)
    n_blocks = len(pvals)
    p_adj = min(1.0, min(pvals) * n_blocks)

    sq = np.diff(v, axis=1) ** 2
    q = np.cumsum(sq.reshape(ens.n_paths, n_blocks, block).sum(axis=2).mean(axis=0))
    tt = np.arange(1, n_blocks + 1) * block * ens.dt
    slope = float(q @ tt / (tt @ tt))
    qv_dev = float(np.max(np.abs(q - slope * tt)) / (slope * tt[-1])) if slope > 0 else 0.0
    notes = (f"rule p_value >= level; HC1 Wald on (1, Y_t), Bonferroni over {n_blocks} blocks; "
             f"max_wald={max(wald):.6g}; qv_linear_max_rel_dev={qv_dev:.6g}")
    return TestReport(name, float(max(wald)), level, p_adj, p_adj >= level,
                      ens.n_paths, ens.n_steps, seed, notes)


def half_flip(sources: Iterable[SigmaProcess], seed: int,
              seeds: Optional[Callable[[int], int]] = None) -> Ensemble:
    """Ensemble of Z X with alpha = 1/2 signs drawn on each source's excursions."""
    from ._rng import SIGN, derive_seed
    from .excursions import decompose
    from .signs import sample_z_alpha

    rows = []
    first = None
    for r, src in enumerate(sources):
        s = derive_seed(seed, r, SIGN) if seeds is None else seeds(r)
        tol = 0.0 if src.kind != "custom" else None
        dec = decompose(src.x, tol)
        sp = sample_z_alpha(dec, 0.5, s)
        rows.append(sp.values * src.x.values)
        if first is None:
            first = src.x
    if first is None:
        raise ParameterError("empty source ensemble")
    return Ensemble(np.stack(rows), first.t0, first.dt, "half_flip")


def sigma_membership_test(sources: Iterable[SigmaProcess], seed: int, level: float = 0.01,
                          block: Optional[int] = None, name: str = "sigma_membership",
                          min_paths: int = MIN_PATHS) -> TestReport:
    """Flip excursion signs with alpha = 1/2 and test the result for the martingale property."""
    ens = half_flip(sources, seed)
    block = block or _default_block(ens.n_steps)
    rep = martingale_increment_test(ens, block, level, name=name, seed=seed, min_paths=min_paths)
    rep.notes = "alpha=1/2 flip; " + rep.notes
    return rep


def _default_block(n_steps: int) -> int:
    for nb in (8, 4, 2, 1):
        if n_steps % nb == 0:
            return n_steps // nb
    return n_steps


def occupation_probability_test(solutions, schedule, times: Sequence[float], tol: float,
                                name: str = "occupation_probability",
                                seed: Optional[int] = None) -> TestReport:
    """Largest |P(y_t > 0 | y_t != 0) - alpha(t)| over the requested times."""
    ens = _ensemble(solutions)
    schedule = AlphaSchedule.coerce(schedule)
    devs = []
    for t in times:
        col = ens.column(t)
        nonzero = col != 0
        k = int(nonzero.sum())
        if k < MIN_NONZERO:
            raise ParameterError(f"only {k} nonzero samples at t={t}")
        frac = float(np.count_nonzero(col > 0)) / k
        devs.append(abs(frac - float(schedule(t))))
    stat = max(devs)
    notes = "rule statistic <= threshold; deviations " + ",".join(
        f"t={t:g}:{d:.6g}" for t, d in zip(times, devs))
    return TestReport(name, stat, tol, None, stat <= tol, ens.n_paths, ens.n_steps, seed, notes)


def skew_marginal_ks_test(solutions, alpha, t: float, level: float = 0.01,
                          name: str = "skew_marginal_ks", seed: Optional[int] = None) -> TestReport:
    if isinstance(alpha, StepFunction):
        if not alpha.is_constant:
            raise ParameterError("time-dependent alpha is unsupported; use the occupation test")
        alpha = alpha.levels[0]
    alpha = float(alpha)
    if not 0.0 <= alpha <= 1.0:
        raise ParameterError("alpha out of [0,1]")
    ens = _ensemble(solutions)
    sample = ens.column(t)
    d = ks_distance(sample, lambda y: skew_bm_cdf(y, alpha, t))
    crit = ks_critical_value(sample.size, level)
    p = float(stats.kstwo.sf(d, sample.size))
    return TestReport(name, d, crit, p, d < crit, ens.n_paths, ens.n_steps, seed,
                      f"rule statistic < threshold (asymptotic KS at level {level}); alpha={alpha:g}, t={t:g}")


def solution_local_time(sol: SkewSolution, eps: Optional[float] = None) -> LocalTimeEstimate:
    """Symmetric band estimate of L^0(y) in the clock of the source's bracket."""
    return lt_band(sol.y, sol.source_used.qv, eps)


def sde_residual_test(solutions: Iterable[SkewSolution], tol_qv: float = 0.02,
                      level: float = 0.01, eps: Optional[float] = None,
                      local_time: Optional[Callable[[SkewSolution], LocalTimeEstimate]] = None,
                      name: str = "sde_residual", seed: Optional[int] = None) -> TestReport:
    """W = y - drift must look like a Brownian motion at the horizon.

    Checks W_0 = 0, |mean realized QV of W at the horizon - horizon| <= tol_qv * horizon
    and W_horizon against N(0, horizon) by KS at ``level``.
    """
    local_time = local_time or (lambda s: solution_local_time(s, eps))
    w_end, qv_end, w0_bad = [], [], 0
    horizon, n_steps = None, None
    for sol in solutions:
        lt = local_time(sol)
        w = sol.y.values - drift_ledger(sol, lt.lt).values
        if horizon is None:
            horizon, n_steps = sol.y.horizon - sol.y.t0, sol.y.n_steps
        elif sol.y.n_steps != n_steps:
            raise ParameterError("misaligned grids across solutions")
        w0_bad += w[0] != 0.0
        w_end.append(w[-1])
        qv_end.append(float(np.sum(np.diff(w) ** 2)))
    if horizon is None:
        raise ParameterError("empty solution ensemble")
    w_end = np.asarray(w_end)
    n = w_end.size
    qv_mean = _mean(np.asarray(qv_end))
    qv_dev = abs(qv_mean - horizon) / horizon
    d = ks_distance(w_end, lambda x: ndtr(x / math.sqrt(horizon)))
    crit = ks_critical_value(n, level)
    passed = w0_bad == 0 and qv_dev <= tol_qv and d < crit
    notes = (f"rule W0==0 and qv_rel_dev <= {tol_qv:g} and ks < threshold; "
             f"w0_nonzero={w0_bad}; mean_qv={qv_mean:.6g}; qv_rel_dev={qv_dev:.6g}; horizon={horizon:g}")
    return TestReport(name, d, crit, float(stats.kstwo.sf(d, n)), passed, n, n_steps, seed, notes)


@dataclass(frozen=True, eq=False)
class MultiplicativeDecomposition:
    """X = C W - 1 with C = exp(A) and W = exp(-A) (X + 1); ``i`` is the running inf of W."""

    c: Path
    w: Path
    i: Path

    def __post_init__(self):
        if self.c.values[0] != 1.0 or np.any(np.diff(self.c.values) < 0):
            raise ParameterError("C must start at 1 and be nondecreasing")
        if self.w.values[0] != 1.0 or np.any(self.w.values <= 0):
            raise ParameterError("W must start at 1 and stay positive")


def multiplicative_decomposition(x: Path, lt: Path) -> MultiplicativeDecomposition:
    if np.any(x.values < 0):
        raise ParameterError("x must be nonnegative")
    a = lt.values
    w = (1.0 + x.values) * np.exp(-a)
    return MultiplicativeDecomposition(
        c=lt.replace(np.exp(a), label="C"),
        w=x.replace(w, label="W"),
        i=x.replace(np.minimum.accumulate(w), label="I"),
    )


def azema_yor_sup_error(x: Path, lt: Path) -> float:
    """sup_t |M_t / I_t - 1 - x_t| with M = (1 + x) exp(-L) and I its running infimum."""
    md = multiplicative_decomposition(x, lt)
    return float(np.max(np.abs(md.w.values / md.i.values - 1.0 - x.values)))


def _default_lt(src: SigmaProcess) -> Path:
    return sigma_local_time(src, "tanaka").lt


def azema_yor_identity_test(sources: Iterable[SigmaProcess], tol: float = 0.05,
                            lt: Optional[Callable[[SigmaProcess], Path]] = None,
                            name: str = "azema_yor_identity", seed: Optional[int] = None) -> TestReport:
    lt = lt or _default_lt
    errs, n_steps = [], 0
    for src in sources:
        errs.append(azema_yor_sup_error(src.x, lt(src)))
        n_steps = src.x.n_steps
    if not errs:
        raise ParameterError("empty source ensemble")
    stat = float(np.median(errs))
    return TestReport(name, stat, tol, None, stat <= tol, len(errs), n_steps, seed,
                      "rule statistic <= threshold; statistic = median pathwise sup-error")


@dataclass(frozen=True)
class TabulatedFunction:
    """A bounded function f tabulated on [0, upper] with its exact antiderivative F."""

    name: str
    grid: np.ndarray
    f: np.ndarray
    antiderivative: np.ndarray

    def _check(self, a: np.ndarray):
        if a.size and (a.min() < self.grid[0] or a.max() > self.grid[-1]):
            raise ParameterError(
                f"table for {self.name} covers [{self.grid[0]:g}, {self.grid[-1]:g}] "
                f"but the local time reaches {a.max():g}")

    def __call__(self, a):
        a = np.asarray(a, dtype=np.float64)
        self._check(a)
        return np.interp(a, self.grid, self.f)

    def big_f(self, a):
        a = np.asarray(a, dtype=np.float64)
        self._check(a)
        return np.interp(a, self.grid, self.antiderivative)

    @classmethod
    def exp_neg(cls, upper: float = 20.0, n: int = 200_001):
        g = np.linspace(0.0, upper, n)
        return cls("exp_neg", g, np.exp(-g), -np.expm1(-g))

    @classmethod
    def unit(cls, upper: float = 20.0, n: int = 2):
        g = np.linspace(0.0, upper, n)
        return cls("unit", g, np.ones_like(g), g.copy())


def transform_ensemble(sources: Iterable[SigmaProcess], f: TabulatedFunction,
                       lt: Optional[Callable[[SigmaProcess], Path]] = None) -> Ensemble:
    """Rows f(L_t) x_t - F(L_t) for each source."""
    lt = lt or _default_lt
    rows, first = [], None
    for src in sources:
        a = lt(src).values
        rows.append(f(a) * src.x.values - f.big_f(a))
        if first is None:
            first = src.x
    if first is None:
        raise ParameterError("empty source ensemble")
    return Ensemble(np.stack(rows), first.t0, first.dt, f"transform[{f.name}]")


def transform_martingale_test(sources: Iterable[SigmaProcess], f: TabulatedFunction,
                              level: float = 0.01, lt=None, block: Optional[int] = None,
                              name: Optional[str] = None, seed: Optional[int] = None,
                              min_paths: int = MIN_PATHS) -> TestReport:
    ens = transform_ensemble(sources, f, lt)
    block = block or _default_block(ens.n_steps)
    return martingale_increment_test(ens, block, level, name or f"transform_martingale[{f.name}]",
                                     seed, min_paths)


def balayage_ensemble(sources: Iterable[SigmaProcess], k: StepFunction,
                      lt: Optional[Callable[[SigmaProcess], Path]] = None) -> Ensemble:
    """Rows K(gamma_t) x_t - sum K(t_j) dL_j, with gamma the last zero of x."""
    from .excursions import decompose

    if not all(math.isfinite(v) for v in k.levels):
        raise ParameterError("K must be bounded")
    lt = lt or _default_lt
    rows, first = [], None
    for src in sources:
        times = src.x.times
        kt = k(times)
        dec = decompose(src.x, 0.0 if src.kind != "custom" else None)
        a = lt(src).values
        comp = np.zeros_like(a)
        np.cumsum(kt[:-1] * np.diff(a), out=comp[1:])
        rows.append(kt[dec.gamma] * src.x.values - comp)
        if first is None:
            first = src.x
    if first is None:
        raise ParameterError("empty source ensemble")
    return Ensemble(np.stack(rows), first.t0, first.dt, "balayage")


def balayage_identity_test(sources: Iterable[SigmaProcess], k: StepFunction, level: float = 0.01,
                           lt=None, block: Optional[int] = None, name: str = "balayage_identity",
                           seed: Optional[int] = None, min_paths: int = MIN_PATHS) -> TestReport:
    ens = balayage_ensemble(sources, k, lt)
    block = block or _default_block(ens.n_steps)
    return martingale_increment_test(ens, block, level, name, seed, min_paths)


def abs_match_test(solutions, name: str = "abs_match") -> TestReport:
    """Count grid points where |y| differs from the (time-changed) source x."""
    if isinstance(solutions, SkewSolution):
        solutions = [solutions]
    mismatches, n, n_steps = 0, 0, 0
    for sol in solutions:
        mismatches += int(np.count_nonzero(np.abs(sol.y.values) != sol.source_used.x.values))
        n += 1
        n_steps = sol.y.n_steps
    return TestReport(name, float(mismatches), 0.0, None, mismatches == 0, n, n_steps, None,
                      "rule statistic <= threshold; statistic = mismatch count")


def reports_to_json(reports: Sequence[TestReport]) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2) + "\n"


def reports_from_json(text: str) -> list[TestReport]:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParameterError(f"malformed report file: {exc}") from None
    if isinstance(data, dict):
        data = [data]
    if not isinstance(data, list):
        raise ParameterError("report file must hold an object or an array")
    return [TestReport.from_dict(d) for d in data]


def digest_csv(reports: Sequence[TestReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["name", "statistic", "threshold", "pass"])
    for r in reports:
        w.writerow([r.name, "%.17g" % r.statistic, "%.17g" % r.threshold, str(r.passed).lower()])
    return buf.getvalue()
