"""Command line front end: ``sigma-skew simulate | verify | report``.

Exit codes: 0 success, 1 a verification test failed, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path as FsPath
from typing import Callable, Optional

from . import __version__, checks
from .errors import InsufficientQuadraticVariationError, ParameterError
from .ensemble import CampaignConfig, iter_solutions, iter_sources, map_replicates, solution
from .paths import Ensemble, StepFunction, read_ensemble_csv, write_ensemble_csv
from .signs import AlphaSchedule

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
PROCESSES = {
    "abs-bm": "abs_bm",
    "drawdown": "drawdown",
    "scaled-abs": "scaled_abs",
    "product-abs": "product_abs",
}
DEFAULT_TESTS = ("occupation", "ks", "sde-residual", "abs-match")


class UsageError(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--process", default="abs-bm",
                        choices=sorted(PROCESSES) + sorted(PROCESSES.values()))
    common.add_argument("--alpha", type=float, default=None)
    common.add_argument("--alpha-schedule", default=None, help='time:level pairs, e.g. "0:0.3,1:0.8"')
    common.add_argument("--sigma", default=None, help='scaled-abs volatility, "2" or "0:1,0.5:2"')
    common.add_argument("--paths", type=int, default=1000)
    common.add_argument("--steps", type=int, default=4096)
    common.add_argument("--dt", type=float, default=2.0 ** -12)
    common.add_argument("--horizon", type=float, default=None)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--eps", type=float, default=None)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--out", default=os.environ.get("SIGMA_SKEW_OUT", "."))
    common.add_argument("--format", choices=("csv", "json"), default="csv")

    parser = argparse.ArgumentParser(prog="sigma-skew", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="simulate a solution ensemble")
    v = sub.add_parser("verify", parents=[common], help="run statistical checks")
    v.add_argument("--tests", default=",".join(DEFAULT_TESTS),
                   help="comma-separated names, optionally name:tolerance")
    v.add_argument("--level", type=float, default=0.01)
    v.add_argument("--expect-fail", default="", help="tests whose failure is the expected outcome")
    v.add_argument("--from", dest="source_dir", default=None,
                   help="directory holding manifest.json and a simulated ensemble")
    r = sub.add_parser("report", help="merge report files into one digest CSV")
    r.add_argument("reports", nargs="+")
    r.add_argument("--out", default=None, help="digest file (stdout when omitted)")
    return parser


def _config(args) -> CampaignConfig:
    if args.alpha is not None and args.alpha_schedule is not None:
        raise ParameterError("give either --alpha or --alpha-schedule")
    if args.alpha_schedule is not None:
        alpha = AlphaSchedule.parse(args.alpha_schedule)
    else:
        a = 0.5 if args.alpha is None else args.alpha
        if not 0.0 <= a <= 1.0:
            raise ParameterError("alpha out of [0,1]")
        alpha = AlphaSchedule.constant(a)
    sigma = None
    if args.sigma is not None:
        sigma = StepFunction.parse(args.sigma) if ":" in args.sigma else StepFunction.constant(float(args.sigma))
    return CampaignConfig(
        process=PROCESSES.get(args.process, args.process), alpha=alpha, n_paths=args.paths,
        n_steps=args.steps, dt=args.dt, seed=args.seed, horizon=args.horizon, sigma=sigma,
        eps=args.eps, threads=args.threads,
    )


def _config_from_manifest(path: FsPath, args) -> CampaignConfig:
    try:
        data = json.loads(path.read_text())["config"]
        sigma = data.get("sigma")
        return CampaignConfig(
            process=data["process"], alpha=AlphaSchedule.parse(data["alpha_schedule"]),
            n_paths=int(data["paths"]), n_steps=int(data["steps"]), dt=float(data["dt"]),
            seed=int(data["seed"]), horizon=float(data["horizon"]),
            sigma=None if sigma is None else StepFunction.parse(sigma),
            eps=data.get("eps"), threads=args.threads,
        )
    except (OSError, KeyError, ValueError, TypeError) as exc:
        raise UsageError(f"cannot read manifest {path}: {exc}") from None


def manifest(config: CampaignConfig, files: list[str]) -> dict:
    return {
        "library": "sigma_skew",
        "library_version": __version__,
        "config": config.to_dict(),
        "seed_derivation": {
            "source": "replicate r draws its Brownian increments from Philox keyed by "
                      "SeedSequence([seed, r, stream]) (stream 1; stream 2 for the second "
                      "product_abs component)",
            "signs": "replicate r uses sign seed SeedSequence([seed, r, 3]).generate_state(1, uint64); "
                     "zeta^i_n is draw n of Philox keyed by SeedSequence([sign_seed, 3, i])",
        },
        "files": files,
    }


def _out_dir(path: str) -> FsPath:
    out = FsPath(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {out}: {exc}") from None
    if not os.access(out, os.W_OK):
        raise UsageError(f"output directory {out} is not writable")
    return out


def _simulate_ensemble(config: CampaignConfig) -> Ensemble:
    paths = map_replicates(lambda r: solution(config, r).y, config.n_paths, threads=config.threads)
    return Ensemble.from_paths(paths, label=config.process)


def _write_ensemble(ens: Ensemble, out: FsPath, fmt: str) -> str:
    if fmt == "json":
        name = "ensemble.json"
        payload = {"t0": ens.t0, "dt": ens.dt, "label": ens.label, "values": ens.values.tolist()}
        (out / name).write_text(json.dumps(payload) + "\n")
    else:
        name = "ensemble.csv"
        with open(out / name, "w", newline="") as fh:
            write_ensemble_csv(ens, fh, "y")
    return name


def _read_ensemble(directory: FsPath) -> Ensemble:
    csv_path, json_path = directory / "ensemble.csv", directory / "ensemble.json"
    try:
        if csv_path.exists():
            with open(csv_path) as fh:
                return read_ensemble_csv(fh)
        if json_path.exists():
            d = json.loads(json_path.read_text())
            return Ensemble(d["values"], d["t0"], d["dt"], d.get("label", ""))
    except (ValueError, KeyError) as exc:
        raise UsageError(f"malformed ensemble in {directory}: {exc}") from None
    raise UsageError(f"missing ensemble in {directory}")


def cmd_simulate(args) -> int:
    config = _config(args)
    out = _out_dir(args.out)
    ens = _simulate_ensemble(config)
    name = _write_ensemble(ens, out, args.format)
    (out / "manifest.json").write_text(json.dumps(manifest(config, [name]), indent=2) + "\n")
    print(f"wrote {out / name} ({ens.n_paths} paths x {ens.n_steps + 1} points)")
    return EXIT_OK


def _parse_tests(text: str) -> list[tuple[str, Optional[float]]]:
    tests = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        name, _, tol = item.partition(":")
        if name not in TESTS:
            raise UsageError(f"unknown test {name!r}; choose from {', '.join(sorted(TESTS))}")
        try:
            tests.append((name, float(tol) if tol else None))
        except ValueError:
            raise UsageError(f"bad tolerance in {item!r}") from None
    if not tests:
        raise UsageError("no tests requested")
    return tests


class _Campaign:
    """Lazily materialized ensembles shared by the tests of one verify run."""

    def __init__(self, config: CampaignConfig, level: float, ensemble: Optional[Ensemble] = None):
        self.config = config
        self.level = level
        self._y = ensemble

    @property
    def y(self) -> Ensemble:
        if self._y is None:
            self._y = _simulate_ensemble(self.config)
        return self._y

    def solutions(self):
        return iter_solutions(self.config)

    def sources(self):
        return iter_sources(self.config)

    @property
    def block(self) -> int:
        return checks._default_block(self.y.n_steps)


def _occupation(c: _Campaign, tol):
    h = c.y.dt * c.y.n_steps
    times = {h}
    bp = list(c.config.alpha.breakpoints) + [math.inf]
    for a, b in zip(bp, bp[1:]):
        if a < h:
            times.add((a + min(b, h)) / 2)
    times = sorted(times)
    if tol is None:
        worst = max(a * (1 - a) for a in c.config.alpha.levels)
        tol = max(4.0 * math.sqrt(worst / c.y.n_paths), 1e-12)
    return checks.occupation_probability_test(c.y, c.config.alpha, times, tol,
                                              name="occupation", seed=c.config.seed)


def _ks(c: _Campaign, tol):
    h = c.y.dt * c.y.n_steps
    return checks.skew_marginal_ks_test(c.y, c.config.alpha, h, tol or c.level, name="ks",
                                        seed=c.config.seed)


def _martingale(c: _Campaign, tol):
    return checks.martingale_increment_test(c.y, c.block, tol or c.level, name="martingale",
                                            seed=c.config.seed, min_paths=1)


def _martingale_source(c: _Campaign, tol):
    ens = Ensemble.from_paths([s.x for s in c.sources()])
    return checks.martingale_increment_test(ens, checks._default_block(ens.n_steps), tol or c.level,
                                            name="martingale-source", seed=c.config.seed,
                                            min_paths=1)


def _sde(c: _Campaign, tol):
    return checks.sde_residual_test(c.solutions(), tol_qv=0.02 if tol is None else tol,
                                    level=c.level, eps=c.config.eps, name="sde-residual",
                                    seed=c.config.seed)


def _abs_match(c: _Campaign, tol):
    return checks.abs_match_test(c.solutions(), name="abs-match")


def _azema_yor(c: _Campaign, tol):
    return checks.azema_yor_identity_test(c.sources(), 0.05 if tol is None else tol,
                                          name="azema-yor", seed=c.config.seed)


def _transform(f, name):
    def run(c: _Campaign, tol):
        return checks.transform_martingale_test(c.sources(), f(), tol or c.level, name=name,
                                                seed=c.config.seed, min_paths=1)
    return run


def _balayage(c: _Campaign, tol):
    h = c.config.n_steps * c.config.dt
    k = StepFunction((0.0, h / 2), (1.0, -1.0))
    return checks.balayage_identity_test(c.sources(), k, tol or c.level, name="balayage",
                                         seed=c.config.seed, min_paths=1)


def _membership(c: _Campaign, tol):
    return checks.sigma_membership_test(c.sources(), c.config.seed, tol or c.level,
                                        name="membership", min_paths=1)


TESTS: dict[str, Callable] = {
    "occupation": _occupation,
    "ks": _ks,
    "martingale": _martingale,
    "martingale-source": _martingale_source,
    "sde-residual": _sde,
    "abs-match": _abs_match,
    "azema-yor": _azema_yor,
    "transform-exp": _transform(checks.TabulatedFunction.exp_neg, "transform-exp"),
    "transform-unit": _transform(checks.TabulatedFunction.unit, "transform-unit"),
    "balayage": _balayage,
    "membership": _membership,
}


def cmd_verify(args) -> int:
    tests = _parse_tests(args.tests)
    expect_fail = {t.strip() for t in args.expect_fail.split(",") if t.strip()}
    unknown = expect_fail - set(TESTS)
    if unknown:
        raise UsageError(f"unknown test in --expect-fail: {', '.join(sorted(unknown))}")
    if args.source_dir is not None:
        src = FsPath(args.source_dir)
        mpath = src / "manifest.json"
        if not mpath.exists():
            raise UsageError(f"missing ensemble: no manifest.json in {src}")
        config = _config_from_manifest(mpath, args)
        campaign = _Campaign(config, args.level, _read_ensemble(src))
    else:
        campaign = _Campaign(_config(args), args.level)
    out = _out_dir(args.out)

    reports, ok = [], True
    for name, tol in tests:
        rep = TESTS[name](campaign, tol)
        if name in expect_fail:
            rep.notes = f"expected to fail (inverted); {rep.notes}"
            good = not rep.passed
        else:
            good = rep.passed
        ok &= good
        reports.append(rep)
        print(("ok   " if good else "BAD  ") + rep.line())
    (out / "report.json").write_text(checks.reports_to_json(reports))
    (out / "report.csv").write_text(checks.digest_csv(reports))
    return EXIT_OK if ok else EXIT_FAIL


def cmd_report(args) -> int:
    merged = []
    for path in args.reports:
        try:
            text = FsPath(path).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read {path}: {exc}") from None
        merged.extend(checks.reports_from_json(text))
    merged.sort(key=lambda r: r.name)
    digest = checks.digest_csv(merged)
    if args.out:
        FsPath(args.out).write_text(digest)
    else:
        sys.stdout.write(digest)
    return EXIT_OK


def main(argv=None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    handler = {"simulate": cmd_simulate, "verify": cmd_verify, "report": cmd_report}[args.command]
    try:
        return handler(args)
    except (UsageError, ParameterError, InsufficientQuadraticVariationError) as exc:
        print(f"sigma-skew: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
