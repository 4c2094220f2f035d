"""Command line driver: function in, certified persistence diagram out."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import kernels
from .expr import Expr, parse_prefix, to_prefix
from .filtration import (
    FilteredComplex,
    ThresholdSchedule,
    ThresholdStatus,
    a_posteriori_bound,
    build_schedule,
    grid_value,
    intersect_into_filtration,
)
from .fourier import fourier_from_terms, generate_fourier
from .grid import GridConfig, GridFailure, GridTree, Verifier, construct_verified_grid
from .persistence import PersistenceDiagram

log = logging.getLogger("verifiedph")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NO_VERIFIED = 3


class ConfigError(Exception):
    pass


class VerificationError(Exception):
    pass


@dataclass
class RunConfig:
    function: str | None = None
    dim: int = 2
    delta: float = 0.1
    bounds: tuple[float, float] | None = None
    max_depth: int = 25
    k: int = 7
    threads: int = 1
    out: str | None = None
    seed: int = 0
    modes: int = 2
    retry_offset: bool = False

    def validate(self) -> None:
        if not self.delta > 0:
            raise ConfigError("delta must be positive")
        if not 1 <= self.dim <= 3:
            raise ConfigError("dim must be 1, 2 or 3")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        if self.modes < 1:
            raise ConfigError("modes must be at least 1")
        if self.bounds is not None and not self.bounds[0] < self.bounds[1]:
            raise ConfigError("range must satisfy lo < hi")
        try:
            GridConfig(self.max_depth, self.k)
        except ValueError as e:
            raise ConfigError(str(e)) from None


@dataclass
class RunResult:
    report: dict
    diagram: PersistenceDiagram
    filtration: FilteredComplex
    statuses: list[ThresholdStatus]
    schedule: ThresholdSchedule
    timing: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# function spec


def load_function_spec(path: str) -> Expr:
    try:
        with open(path) as fh:
            spec = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read function spec {path}: {e}") from None
    return function_from_spec(spec)


def function_from_spec(spec: dict) -> Expr:
    if not isinstance(spec, dict):
        raise ConfigError("function spec must be a JSON object")
    kind = spec.get("kind")
    try:
        if kind == "expr":
            return parse_prefix(str(spec["text"]))
        if kind == "fourier":
            n = int(spec["n"])
            terms = [tuple(t) for t in spec["coeffs"]]
            for i, j, _k, _v in terms:
                if not (1 <= int(i) <= n and 1 <= int(j) <= n):
                    raise ValueError(f"mode ({i}, {j}) exceeds n={n}")
            return fourier_from_terms(terms)
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"bad function spec: {e}") from None
    raise ConfigError(f"unknown function kind {kind!r}")


# ---------------------------------------------------------------------------
# pipeline

_WORKER: dict = {}


def _init_worker(f: Expr, ndim: int, k: int, max_depth: int) -> None:
    _WORKER["v"] = Verifier(f, ndim, k)
    _WORKER["cfg"] = GridConfig(max_depth, k)


def _grid_task(t: float):
    try:
        return construct_verified_grid(_WORKER["v"], t, _WORKER["cfg"])
    except GridFailure as e:
        return (e.kind, e.cube)


def _build_grids(f: Expr, cfg: RunConfig, values) -> list:
    if cfg.threads > 1 and len(values) > 1:
        with ProcessPoolExecutor(
            max_workers=cfg.threads, initializer=_init_worker, initargs=(f, cfg.dim, cfg.k, cfg.max_depth)
        ) as ex:
            return list(ex.map(_grid_task, values))
    _init_worker(f, cfg.dim, cfg.k, cfg.max_depth)
    return [_grid_task(t) for t in values]


def _statuses(values, results) -> list[ThresholdStatus]:
    out = []
    for t, r in zip(values, results):
        if isinstance(r, GridTree):
            out.append(ThresholdStatus(t, True, leaves=len(r.leaves)))
        else:
            out.append(ThresholdStatus(t, False, failure=r[0], cube=tuple(r[1])))
    return out


def _half_offset(schedule: ThresholdSchedule, lo: float, hi: float) -> ThresholdSchedule:
    # thresholds at (j + 1/2) * delta, still strictly enclosing [lo, hi]
    d = schedule.delta
    vals = []
    j = int(lo // d) - 1
    while grid_value(2 * j + 1, d / 2) >= lo:
        j -= 1
    while True:
        vals.append(grid_value(2 * j + 1, d / 2))
        if vals[-1] > hi and len(vals) >= 3:
            break
        j += 1
    return ThresholdSchedule(d, tuple(vals))


def _attempt(f: Expr, cfg: RunConfig, schedule: ThresholdSchedule):
    t0 = time.perf_counter()
    results = _build_grids(f, cfg, schedule.values)
    t1 = time.perf_counter()
    statuses = _statuses(schedule.values, results)
    eps, F = a_posteriori_bound(schedule, statuses)
    return results, statuses, eps, F, t1 - t0


def run_pipeline(cfg: RunConfig, f: Expr | None = None, schedule: ThresholdSchedule | None = None) -> RunResult:
    """Schedule, grids, filtration and persistence for one configuration.

    Writes ``diagram.csv``, ``report.json`` and ``timing.json`` when
    ``cfg.out`` is set.  Raises ConfigError or VerificationError.
    """
    cfg.validate()
    t_start = time.perf_counter()
    if f is None:
        if cfg.function is not None:
            f = load_function_spec(cfg.function)
        else:
            if cfg.dim != 2:
                raise ConfigError("generated Fourier functions are two-dimensional")
            f = generate_fourier(cfg.modes, cfg.seed)
    if f.ndim > cfg.dim:
        raise ConfigError(f"function uses x{f.ndim - 1} but dim={cfg.dim}")
    out_dir = None
    if cfg.out is not None:
        out_dir = Path(cfg.out)
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ConfigError(f"cannot create output directory: {e}") from None
        if not os.access(out_dir, os.W_OK):
            raise ConfigError(f"output directory {out_dir} is not writable")

    verifier = Verifier(f, cfg.dim, cfg.k)
    rng_lo, rng_hi = verifier.f_range([0.0] * cfg.dim, [1.0] * cfg.dim)
    if schedule is None:
        try:
            schedule = build_schedule(verifier, cfg.delta, k=cfg.k, bounds=cfg.bounds)
        except ValueError as e:
            raise ConfigError(str(e)) from None
    elif not schedule.covers(rng_lo, rng_hi):
        raise ConfigError("schedule does not enclose the certified range")

    results, statuses, eps, F, t_grids = _attempt(f, cfg, schedule)
    retry = None
    if cfg.retry_offset and F > 0:
        alt = _half_offset(schedule, rng_lo, rng_hi)
        r2, s2, e2, F2, t2 = _attempt(f, cfg, alt)
        retry = {"epsilon": e2, "F": F2, "used": e2 < eps}
        t_grids += t2
        if e2 < eps:
            schedule, results, statuses, eps, F = alt, r2, s2, e2, F2

    interior = statuses[1:-1]
    if interior and not any(s.verified for s in interior):
        raise VerificationError("no interior threshold could be verified")

    t1 = time.perf_counter()
    trees = [r if isinstance(r, GridTree) else None for r in results]
    fc = intersect_into_filtration(schedule.values, trees)
    t2 = time.perf_counter()
    dgm = fc.diagram()
    t3 = time.perf_counter()

    counts = [0] * (cfg.dim + 1)
    for d in fc.structure.dims:
        counts[d] += 1
    report = {
        "function": to_prefix(f),
        "config": {
            "dim": cfg.dim,
            "delta": cfg.delta,
            "range": list(cfg.bounds) if cfg.bounds else None,
            "max_depth": cfg.max_depth,
            "eval_subdiv": cfg.k,
            "seed": cfg.seed,
            "modes": cfg.modes,
            "retry_offset": cfg.retry_offset,
        },
        "certified_range": [rng_lo, rng_hi],
        "thresholds": len(schedule),
        "statuses": [s.to_json() for s in statuses],
        "failed": sum(1 for s in statuses if not s.verified),
        "F": F,
        "epsilon": eps,
        "cells": {"total": len(fc), "by_dim": counts},
        "diagram_points": len(dgm),
        "retry": retry,
    }
    timing = {
        "grids_s": t_grids,
        "filtration_s": t2 - t1,
        "persistence_s": t3 - t2,
        "wall_s": time.perf_counter() - t_start,
        "backend": kernels.BACKEND,
        "threads": cfg.threads,
    }
    if out_dir is not None:
        (out_dir / "diagram.csv").write_text(dgm.to_csv())
        (out_dir / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        (out_dir / "timing.json").write_text(json.dumps(timing, indent=2, sort_keys=True) + "\n")
    return RunResult(report, dgm, fc, statuses, schedule, timing)


# ---------------------------------------------------------------------------
# argv


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="verifiedph",
        description="Certified persistence diagram of a function on the unit cube.",
    )
    p.add_argument("--function", help="JSON function spec (default: random Fourier series)")
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--delta", type=float, default=0.1, help="threshold spacing")
    p.add_argument("--range", nargs=2, type=float, metavar=("LO", "HI"), help="explicit threshold bounds")
    p.add_argument("--max-depth", type=int, default=25)
    p.add_argument("--eval-subdiv", type=int, default=7, help="bisections per axis inside each evaluation")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", default="out")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--modes", type=int, default=2)
    p.add_argument("--retry-offset", action="store_true", help="retry once with thresholds shifted by delta/2")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, format="%(message)s")
    cfg = RunConfig(
        function=a.function,
        dim=a.dim,
        delta=a.delta,
        bounds=tuple(a.range) if a.range else None,
        max_depth=a.max_depth,
        k=a.eval_subdiv,
        threads=a.threads,
        out=a.out,
        seed=a.seed,
        modes=a.modes,
        retry_offset=a.retry_offset,
    )
    try:
        res = run_pipeline(cfg)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except VerificationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NO_VERIFIED
    r = res.report
    print(f"thresholds {r['thresholds']}, failed {r['failed']}, F={r['F']}, epsilon={r['epsilon']}")
    print(f"cells {r['cells']['total']}, diagram points {r['diagram_points']} -> {cfg.out}")
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
