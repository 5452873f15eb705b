"""Command-line entry point: solve | sweep | serve-env | oracle.

Configuration files are flat key=value lines (TOML-compatible scalars,
'#' comments).  Flags override config values.  Exit codes: 0 on success,
2 when every attempted optimization was infeasible, 1 on any other
error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from .algorithms import optimize
from .channel import apply_csi_error, draw_channels, generate_topology, trial_rng
from .errors import Infeasible
from .experiments import (
    ExperimentConfig,
    emit_plot_script,
    run_sweep,
    write_csv,
)
from .params import SystemParams, dbm_to_watts
from .rl_env import serve


def parse_config_file(path: str) -> dict:
    """Flat key = value lines; values parsed as bool/int/float/str."""
    out: dict = {}
    with open(path, encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{ln}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            out[key] = _parse_scalar(value)
    return out


def _parse_scalar(text: str):
    text = text.strip().strip('"').strip("'")
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def params_from_config(cfg: dict) -> SystemParams:
    base = SystemParams()
    kwargs = {}
    if "k" in cfg:
        kwargs["k"] = int(cfg["k"])
    if "m" in cfg:
        kwargs["m"] = int(cfg["m"])
    if "p_max_dbm" in cfg:
        kwargs["p_max"] = dbm_to_watts(float(cfg["p_max_dbm"]))
    if "p_max_w" in cfg:
        kwargs["p_max"] = float(cfg["p_max_w"])
    if "sigma2_dbm" in cfg:
        kwargs["sigma2"] = dbm_to_watts(float(cfg["sigma2_dbm"]))
    if "eta" in cfg:
        kwargs["eta"] = float(cfg["eta"])
    if "p_c" in cfg:
        kwargs["p_c"] = float(cfg["p_c"])
    if "r_min" in cfg:
        kwargs["r_min"] = float(cfg["r_min"])
    return base.replace(**kwargs) if kwargs else base


def _split_list(value) -> tuple:
    if isinstance(value, (int, float)):
        return (value,)
    return tuple(_parse_scalar(v) for v in str(value).split(",") if v.strip())


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eed2d",
        description="Energy-efficiency optimizer for a wireless-powered D2D pair "
        "under a multi-antenna NOMA downlink",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--seed", type=int, default=2024)
        p.add_argument("--trials", type=int)
        p.add_argument("--out", help="output path")
        p.add_argument("--scheme", choices=["noma", "oma"])
        p.add_argument("--algorithm", choices=["alt", "exhaustive"])
        p.add_argument("--csi", choices=["perfect", "imperfect"])
        p.add_argument("--sigma-eps", type=float, help="CSI error variance")
        p.add_argument("--xi", type=float, help="exhaustive search step size")

    p_solve = sub.add_parser("solve", help="optimize one seeded channel realization")
    common(p_solve)

    p_sweep = sub.add_parser("sweep", help="Monte Carlo sweep, CSV + plot script")
    common(p_sweep)
    p_sweep.add_argument("--sweep", help="sweep variable", default=None)
    p_sweep.add_argument("--values", help="comma-separated sweep values", default=None)
    p_sweep.add_argument("--workers", type=int, default=None)

    p_env = sub.add_parser("serve-env", help="line-JSON RL environment on stdio")
    common(p_env)
    p_env.add_argument("--mode", choices=["fixed", "redraw"], default="fixed")

    p_oracle = sub.add_parser(
        "oracle", help="K=1, M=1 dense-grid global check against the solver"
    )
    common(p_oracle)
    p_oracle.add_argument("--grid", type=int, default=200)
    return parser


def _cmd_solve(args, cfg: dict) -> int:
    params = params_from_config(cfg)
    scheme = args.scheme or cfg.get("scheme", "noma")
    algorithm = args.algorithm or cfg.get("algorithm", "alt")
    csi = args.csi or cfg.get("csi", "perfect")
    sigma_eps2 = args.sigma_eps if args.sigma_eps is not None else cfg.get("sigma_eps2", 0.0)
    xi = args.xi if args.xi is not None else cfg.get("xi", 0.1)

    rng = trial_rng(args.seed, 0)
    channels = draw_channels(generate_topology(params, rng), params, rng)
    realization = None
    if csi == "imperfect":
        channels, realization = apply_csi_error(channels, sigma_eps2, rng)
    try:
        sol = optimize(
            channels, params, scheme=scheme, algorithm=algorithm, xi=xi,
            realization=realization,
        )
    except Infeasible as exc:
        print(json.dumps({"feasible": False, "reason": str(exc)}))
        return 2
    print(
        json.dumps(
            {
                "feasible": True,
                "ee": sol.ee,
                "tau": sol.tau.tau,
                "iterations": sol.iterations,
                "converged": sol.converged,
                "scheme": sol.scheme,
                "algorithm": sol.algorithm,
                "d2d_rate": sol.rates.r_d2d,
                "harvested_w": sol.rates.p_harvested,
                "user_rates": sol.rates.r_users.tolist(),
            }
        )
    )
    return 0


def _cmd_sweep(args, cfg: dict) -> int:
    params = params_from_config(cfg)
    sweep_name = args.sweep or cfg.get("sweep", "p_max_dbm")
    if args.values is not None:
        values = _split_list(args.values)
    elif "values" in cfg:
        values = _split_list(cfg["values"])
    else:
        values = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    config = ExperimentConfig(
        sweep_name=sweep_name,
        sweep_values=tuple(float(v) for v in values),
        base=params,
        trials=args.trials or int(cfg.get("trials", 100)),
        master_seed=args.seed,
        schemes=tuple(cfg.get("schemes", "noma").split(",")) if not args.scheme else (args.scheme,),
        algorithms=tuple(cfg.get("algorithms", "alt").split(",")) if not args.algorithm else (args.algorithm,),
        csi=args.csi or cfg.get("csi", "perfect"),
        sigma_eps2=args.sigma_eps if args.sigma_eps is not None else cfg.get("sigma_eps2", 0.0),
        xi=args.xi if args.xi is not None else cfg.get("xi", 0.1),
        workers=args.workers,
    )
    table = run_sweep(config)
    out = args.out or cfg.get("out", "sweep.csv")
    write_csv(table, out)
    feasible_rows = [r for r in table if r.feasible]
    if feasible_rows:
        emit_plot_script(table, out.rsplit(".", 1)[0] + ".gp")
    print(
        json.dumps(
            {
                "rows": len(table),
                "feasible_rows": len(feasible_rows),
                "csv": out,
            }
        )
    )
    return 0 if feasible_rows else 2


def _cmd_serve_env(args, cfg: dict) -> int:
    params = params_from_config(cfg)
    serve(
        params,
        mode=args.mode,
        seed=args.seed,
        csi=args.csi or cfg.get("csi", "perfect"),
        sigma_eps2=args.sigma_eps if args.sigma_eps is not None else cfg.get("sigma_eps2", 0.0),
    )
    return 0


def _cmd_oracle(args, cfg: dict) -> int:
    """Dense (power, tau) grid versus the alternating solver at K = M = 1."""
    params = params_from_config(cfg).replace(k=1, m=1)
    rng = trial_rng(args.seed, 0)
    channels = draw_channels(generate_topology(params, rng), params, rng)

    h1 = abs(channels.h_users[0, 0]) ** 2
    hdt = abs(channels.h_dt[0]) ** 2
    hdr = abs(channels.h_dr[0]) ** 2
    hdd = abs(channels.h_dd) ** 2
    hd1 = abs(channels.h_dt_users[0]) ** 2
    gamma = params.gamma_min

    def ee_scalar(p: float, tau: float) -> float:
        tb = tau / (1.0 - tau)
        p_r = hdt * p
        p_t = params.eta * tb * p_r
        sinr_user = h1 * p / (p_t * hd1 + params.sigma2)
        if gamma > 0 and sinr_user < gamma:
            return -math.inf
        r_d = (1.0 - tau) * math.log2(1.0 + p_t * hdd / (hdr * p + params.sigma2))
        return r_d / (params.eta * tau * p_r + params.p_c)

    n = args.grid
    powers = np.linspace(params.p_max / n, params.p_max, n)
    taus = np.linspace(1e-3, 1.0 - 1e-3, n)
    best = max(
        (ee_scalar(p, t), p, t) for p in powers for t in taus
    )
    # one refinement pass around the incumbent
    _, p0, t0 = best
    powers = np.linspace(max(p0 - params.p_max / n, 1e-12), min(p0 + params.p_max / n, params.p_max), n)
    taus = np.linspace(max(t0 - 1.0 / n, 1e-4), min(t0 + 1.0 / n, 1.0 - 1e-4), n)
    best = max(best, max((ee_scalar(p, t), p, t) for p in powers for t in taus))

    try:
        sol = optimize(channels, params)
        alt_ee = sol.ee
    except Infeasible:
        alt_ee = math.nan
    rel_gap = abs(alt_ee - best[0]) / best[0] if best[0] > 0 else math.nan
    print(
        json.dumps(
            {
                "oracle_ee": best[0],
                "oracle_power": best[1],
                "oracle_tau": best[2],
                "solver_ee": alt_ee,
                "rel_gap": rel_gap,
            }
        )
    )
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = parse_config_file(args.config) if args.config else {}
        if args.command == "solve":
            return _cmd_solve(args, cfg)
        if args.command == "sweep":
            return _cmd_sweep(args, cfg)
        if args.command == "serve-env":
            return _cmd_serve_env(args, cfg)
        if args.command == "oracle":
            return _cmd_oracle(args, cfg)
        parser.error(f"unknown command {args.command}")
    except Infeasible:
        return 2
    except BrokenPipeError:
        return 0
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
