"""Monte Carlo sweeps, CSV emission and gnuplot script generation.

One trial = one topology + channel realization drawn from a splittable
per-trial seed; the sweep then re-derives the scenario constants for
each value and runs every requested (scheme, algorithm) pair on matched
channels.  Rows are merged in (trial, sweep index) order no matter how
the work pool schedules them, so a given master seed always produces a
byte-identical table.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .algorithms import optimize
from .channel import apply_csi_error, draw_channels, generate_topology, trial_rng
from .errors import Infeasible
from .params import SystemParams, dbm_to_watts

SWEEPABLE = ("p_max_dbm", "m", "eta", "r_min", "sigma_eps2")

CSV_HEADER = "trial,seed,sweep_name,sweep_value,scheme,algorithm,feasible,ee,tau,iterations,wall_ms"


@dataclass(frozen=True)
class ExperimentConfig:
    sweep_name: str
    sweep_values: tuple[float, ...]
    base: SystemParams = field(default_factory=SystemParams)
    trials: int = 100
    master_seed: int = 2024
    schemes: tuple[str, ...] = ("noma",)
    algorithms: tuple[str, ...] = ("alt",)
    csi: str = "perfect"  # "perfect" | "imperfect"
    sigma_eps2: float = 0.0  # fixed error variance unless it is the sweep
    xi: float = 0.1
    tol: float = 1e-5
    workers: int | None = None

    def __post_init__(self) -> None:
        if self.sweep_name not in SWEEPABLE:
            raise ValueError(f"sweep must be one of {SWEEPABLE}")
        if not self.sweep_values:
            raise ValueError("sweep value list must be nonempty")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.csi not in ("perfect", "imperfect"):
            raise ValueError("csi must be 'perfect' or 'imperfect'")
        for s in self.schemes:
            if s not in ("noma", "oma"):
                raise ValueError(f"unknown scheme {s!r}")
        for a in self.algorithms:
            if a not in ("alt", "exhaustive"):
                raise ValueError(f"unknown algorithm {a!r}")


@dataclass(frozen=True)
class ResultRow:
    trial: int
    seed: int
    sweep_name: str
    sweep_value: float
    scheme: str
    algorithm: str
    feasible: bool
    ee: float
    tau: float
    iterations: int
    wall_ms: float


def apply_sweep_value(base: SystemParams, name: str, value: float) -> SystemParams:
    if name == "p_max_dbm":
        return base.replace(p_max=dbm_to_watts(value))
    if name == "m":
        return base.replace(m=int(value))
    if name == "eta":
        return base.replace(eta=value)
    if name == "r_min":
        return base.replace(r_min=value)
    if name == "sigma_eps2":
        return base  # affects the error draw, not the scenario constants
    raise ValueError(f"unknown sweep variable {name!r}")


def trial_seed(master_seed: int, trial: int) -> int:
    """Scalar seed recorded per trial (the generators use the full tuple)."""
    return int(np.random.SeedSequence((master_seed, trial)).generate_state(1)[0])


def run_trial(config: ExperimentConfig, trial: int) -> list[ResultRow]:
    """All rows of one trial: every sweep value, scheme and algorithm.

    The topology stream is independent of the sweep value; the channel
    stream is re-derived per value so that dropping a value from the
    sweep never changes any other row.
    """
    rows: list[ResultRow] = []
    seed = trial_seed(config.master_seed, trial)
    topology_params = config.base
    topology = generate_topology(topology_params, trial_rng(config.master_seed, trial, 0))

    for value in config.sweep_values:
        params = apply_sweep_value(config.base, config.sweep_name, value)
        channels = draw_channels(topology, params, trial_rng(config.master_seed, trial, 1))
        realization = None
        if config.csi == "imperfect":
            var = value if config.sweep_name == "sigma_eps2" else config.sigma_eps2
            channels, realization = apply_csi_error(
                channels, var, trial_rng(config.master_seed, trial, 2)
            )
        for scheme in config.schemes:
            for algorithm in config.algorithms:
                start = time.perf_counter()
                try:
                    sol = optimize(
                        channels,
                        params,
                        scheme=scheme,
                        algorithm=algorithm,
                        xi=config.xi,
                        tol=config.tol,
                        realization=realization,
                    )
                    row = ResultRow(
                        trial=trial,
                        seed=seed,
                        sweep_name=config.sweep_name,
                        sweep_value=float(value),
                        scheme=scheme,
                        algorithm=algorithm,
                        feasible=True,
                        ee=sol.ee,
                        tau=sol.tau.tau,
                        iterations=sol.iterations,
                        wall_ms=(time.perf_counter() - start) * 1e3,
                    )
                except Infeasible:
                    row = ResultRow(
                        trial=trial,
                        seed=seed,
                        sweep_name=config.sweep_name,
                        sweep_value=float(value),
                        scheme=scheme,
                        algorithm=algorithm,
                        feasible=False,
                        ee=math.nan,
                        tau=math.nan,
                        iterations=0,
                        wall_ms=(time.perf_counter() - start) * 1e3,
                    )
                rows.append(row)
    return rows


def _trial_worker(args: tuple[ExperimentConfig, int]) -> list[ResultRow]:
    return run_trial(*args)


def run_sweep(config: ExperimentConfig) -> list[ResultRow]:
    """Execute all trials, in a process pool when workers allow it."""
    workers = config.workers if config.workers is not None else (os.cpu_count() or 1)
    workers = max(1, min(workers, config.trials))
    if workers == 1:
        per_trial = [run_trial(config, t) for t in range(config.trials)]
    else:
        _kernels.warmup()  # compile once in the parent before forking
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_trial = list(
                pool.map(_trial_worker, [(config, t) for t in range(config.trials)])
            )
    rows: list[ResultRow] = []
    for batch in per_trial:  # already ordered by trial, then sweep index
        rows.extend(batch)
    return rows


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(table: list[ResultRow], path: str) -> None:
    """Locale-independent CSV with the fixed column set."""
    if not table:
        raise ValueError("refusing to write an empty results table")
    lines = [CSV_HEADER]
    for r in table:
        lines.append(
            ",".join(
                _format_value(v)
                for v in (
                    r.trial,
                    r.seed,
                    r.sweep_name,
                    r.sweep_value,
                    r.scheme,
                    r.algorithm,
                    r.feasible,
                    r.ee,
                    r.tau,
                    r.iterations,
                    r.wall_ms,
                )
            )
        )
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv(path: str) -> list[ResultRow]:
    with open(path, encoding="ascii") as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"unexpected header: {header}")
        rows = []
        for line in fh:
            t, s, name, val, scheme, alg, feas, ee, tau, it, wall = line.strip().split(",")
            rows.append(
                ResultRow(
                    trial=int(t),
                    seed=int(s),
                    sweep_name=name,
                    sweep_value=float(val),
                    scheme=scheme,
                    algorithm=alg,
                    feasible=feas == "true",
                    ee=float(ee),
                    tau=float(tau),
                    iterations=int(it),
                    wall_ms=float(wall),
                )
            )
    return rows


def mean_ee_by_value(
    table: list[ResultRow], scheme: str, algorithm: str
) -> dict[float, float]:
    """Mean EE of feasible rows per sweep value for one (scheme, algorithm)."""
    groups: dict[float, list[float]] = {}
    for r in table:
        if r.scheme == scheme and r.algorithm == algorithm and r.feasible:
            groups.setdefault(r.sweep_value, []).append(r.ee)
    return {v: float(np.mean(es)) for v, es in sorted(groups.items())}


def emit_plot_script(table: list[ResultRow], path: str) -> None:
    """Gnuplot script plotting mean EE with std bars per (scheme, algorithm)."""
    feasible = [r for r in table if r.feasible]
    if not feasible:
        raise ValueError("no feasible rows to plot")
    sweep_name = feasible[0].sweep_name
    combos = sorted({(r.scheme, r.algorithm) for r in feasible})

    blocks = []
    plots = []
    for scheme, algorithm in combos:
        tag = f"{scheme}_{algorithm}"
        stats: dict[float, list[float]] = {}
        for r in feasible:
            if r.scheme == scheme and r.algorithm == algorithm:
                stats.setdefault(r.sweep_value, []).append(r.ee)
        lines = [f"$data_{tag} << EOD"]
        for value in sorted(stats):
            es = np.asarray(stats[value])
            lines.append(f"{value!r} {np.mean(es)!r} {np.std(es)!r}")
        lines.append("EOD")
        blocks.append("\n".join(lines))
        plots.append(f"$data_{tag} using 1:2:3 with yerrorlines title '{scheme}/{algorithm}'")

    script = "\n".join(
        [
            "# mean energy efficiency with one-sigma bars per (scheme, algorithm)",
            f"set xlabel '{sweep_name}'",
            "set ylabel 'energy efficiency'",
            "set key left top",
            "",
            "\n\n".join(blocks),
            "",
            "plot " + ", \\\n     ".join(plots),
            "",
        ]
    )
    with open(path, "w", encoding="ascii") as fh:
        fh.write(script)
