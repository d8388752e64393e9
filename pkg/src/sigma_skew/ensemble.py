"""Replicate generation for simulation campaigns.

Replicate r of a campaign uses source seed ``(seed, r)`` for its driving
Brownian paths and ``derive_seed(seed, r, SIGN)`` for its excursion signs, so
any replicate can be regenerated in isolation and results do not depend on
chunking or on the number of worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, TypeVar

import numpy as np

from . import _rng
from .errors import ParameterError
from .paths import Ensemble, SigmaProcess, StepFunction, make_sigma_process
from .signs import AlphaSchedule
from .skew import SkewSolution, build_direct, build_time_changed

T = TypeVar("T")

DIRECT_KINDS = ("abs_bm", "drawdown")
PRODUCT_HORIZON_DIVISOR = 50.0


@dataclass(frozen=True)
class CampaignConfig:
    process: str = "abs_bm"
    alpha: AlphaSchedule = field(default_factory=lambda: AlphaSchedule.constant(0.5))
    n_paths: int = 1000
    n_steps: int = 4096
    dt: float = 2.0 ** -12
    seed: int = 0
    horizon: Optional[float] = None
    sigma: Optional[StepFunction] = None
    eps: Optional[float] = None
    threads: int = 1

    def __post_init__(self):
        if self.n_paths < 1:
            raise ParameterError("paths must be >= 1")
        if self.n_steps < 1:
            raise ParameterError("steps must be >= 1")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ParameterError("dt must be > 0")
        if self.threads < 1:
            raise ParameterError("threads must be >= 1")
        if self.sigma is not None and min(self.sigma.levels) <= 0:
            raise ParameterError("sigma must be > 0")
        if self.eps is not None and not self.eps > 0:
            raise ParameterError("eps must be > 0")
        if self.horizon is not None:
            if not self.horizon > 0:
                raise ParameterError("horizon must be > 0")
            if self.horizon > self.n_steps * self.dt * (1 + 1e-12):
                raise ParameterError("horizon exceeds steps * dt")

    @property
    def construction(self) -> str:
        return "direct" if self.process in DIRECT_KINDS else "time_changed"

    @property
    def effective_horizon(self) -> float:
        if self.horizon is not None:
            return self.horizon
        span = self.n_steps * self.dt
        if self.process == "scaled_abs":
            s = self.sigma.levels if self.sigma is not None else (1.0,)
            return span * min(1.0, min(s) ** 2)
        if self.process == "product_abs":
            # the bracket int (B1^2 + B2^2) ds has mean span^2 and falls below
            # span^2 / 50 with probability about exp(-25)
            return span * span / PRODUCT_HORIZON_DIVISOR
        return span

    def to_dict(self) -> dict:
        return {
            "process": self.process,
            "alpha_schedule": self.alpha.format(),
            "paths": self.n_paths,
            "steps": self.n_steps,
            "dt": self.dt,
            "seed": self.seed,
            "horizon": self.effective_horizon,
            "sigma": None if self.sigma is None else self.sigma.format(),
            "eps": self.eps,
            "construction": self.construction,
        }


def sign_seed(seed: int, replicate: int) -> int:
    return _rng.derive_seed(seed, replicate, _rng.SIGN)


def source(config: CampaignConfig, replicate: int) -> SigmaProcess:
    return make_sigma_process(config.process, config.n_steps, config.dt, config.seed,
                              replicate, sigma=config.sigma)


def solution(config: CampaignConfig, replicate: int) -> SkewSolution:
    src = source(config, replicate)
    seed = sign_seed(config.seed, replicate)
    if config.construction == "direct":
        sol = build_direct(src, config.alpha, seed)
        h = config.horizon
        if h is not None and h < src.x.horizon:
            # direct solutions are reported on [0, horizon]
            return _truncate(sol, int(round(h / config.dt)))
        return sol
    return build_time_changed(src, config.alpha, seed, config.effective_horizon, config.dt)


def _truncate(sol: SkewSolution, n: int) -> SkewSolution:
    from .paths import Path
    from .skew import SkewSolution as S

    def cut(p):
        return None if p is None else Path(p.t0, p.dt, p.values[: n + 1], p.label)

    s = sol.source_used
    used = SigmaProcess(cut(s.x), cut(s.driver), cut(s.qv), s.kind, cut(s.signed), dict(s.params))
    return S(cut(sol.y), sol.source, used, sol.sign, sol.schedule, sol.construction,
             sol.decomposition, sol.local_time_ref)


def map_replicates(fn: Callable[[int], T], n: int, start: int = 0, threads: int = 1) -> list[T]:
    """Apply ``fn`` to replicate indices in order; results never depend on ``threads``."""
    idx = range(start, start + n)
    if threads <= 1:
        return [fn(r) for r in idx]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, idx))


def iter_chunks(fn: Callable[[int], T], n: int, chunk: int = 2000,
                threads: int = 1) -> Iterator[list[T]]:
    for start in range(0, n, chunk):
        yield map_replicates(fn, min(chunk, n - start), start, threads)


def simulate(config: CampaignConfig) -> Ensemble:
    """Ensemble of the solution paths y for every replicate."""
    paths = map_replicates(lambda r: solution(config, r).y, config.n_paths,
                           threads=config.threads)
    return Ensemble.from_paths(paths, label=config.process)


def iter_solutions(config: CampaignConfig, start: int = 0,
                   stop: Optional[int] = None) -> Iterator[SkewSolution]:
    stop = config.n_paths if stop is None else stop
    for r in range(start, stop):
        yield solution(config, r)


def iter_sources(config: CampaignConfig, start: int = 0,
                 stop: Optional[int] = None) -> Iterator[SigmaProcess]:
    stop = config.n_paths if stop is None else stop
    for r in range(start, stop):
        yield source(config, r)
