"""Command-line interface.

Commands
--------
price        one claim, JSON report on stdout
sweep        one- or two-axis market sweep, CSV to a file or stdout
table1       canned funding-account table over alpha x r_f_minus
table2       canned funding-account table over r_f_minus at alpha = 0.9
convergence  grid-refinement study (closed-form and self-convergence)
bench        timing comparison of the compiled and fallback backends

The sweep worker count honours the XVA_THREADS environment variable;
XVA_NUMBA=0 selects the pure numpy/scipy solver path.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time

import numpy as np

from .benchmark import benchmark_surface, bs_closed_form
from .config import (
    ArbitrageViolationError,
    ClaimSpec,
    DEFAULT_MARKET,
    MarketConfig,
    apply_overrides,
    load_market_config,
    validate_no_arbitrage,
)
from .grid import SolverConfig, build_grid
from .kernels import HAS_NUMBA, active_backend
from .pde import solve_semilinear
from .sweep import SweepAxis, SweepSpec, default_threads, run_sweep, write_csv
from .xva import hedge_at, report_from_solution, solve_trade

__all__ = ["main"]


def _add_claim_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--claim", choices=["call", "put", "custom"], default="call")
    p.add_argument("--strike", type=float, default=1.0)
    p.add_argument("--maturity", type=float, default=1.0)
    p.add_argument("--knots", default=None,
                   help="custom payoff knots as spot:value,spot:value,...")


def _add_grid_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--nx", type=int, default=801, help="spatial node count")
    p.add_argument("--nt", type=int, default=400, help="time step count")
    p.add_argument("--width-sigmas", type=float, default=6.0)
    p.add_argument("--theta", type=float, default=0.5)
    p.add_argument("--no-rannacher", action="store_true")
    p.add_argument("--picard-tol", type=float, default=1e-12)
    p.add_argument("--picard-max-iter", type=int, default=50)


def _add_market_args(p: argparse.ArgumentParser, config_required: bool) -> None:
    p.add_argument("--config", required=config_required, default=None,
                   help="market config JSON (field names as keys)")
    p.add_argument("--set", action="append", default=[], metavar="FIELD=VALUE",
                   help="override one market field (repeatable)")
    p.add_argument("--allow-arbitrage", action="store_true",
                   help="warn instead of failing on rate-ordering violations")


def _claim_from_args(args) -> ClaimSpec:
    if args.claim == "custom":
        if not args.knots:
            raise ValueError("custom claim requires --knots")
        knots = []
        for part in args.knots.split(","):
            s, _, v = part.partition(":")
            knots.append((float(s), float(v)))
        return ClaimSpec.custom(knots, maturity=args.maturity)
    return ClaimSpec(kind=args.claim, strike=args.strike, maturity=args.maturity)


def _market_from_args(args) -> MarketConfig:
    cfg = load_market_config(args.config) if args.config else DEFAULT_MARKET
    overrides: dict[str, float] = {}
    for item in args.set:
        name, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"--set expects FIELD=VALUE, got {item!r}")
        overrides[name.strip()] = float(value)
    return apply_overrides(cfg, overrides) if overrides else cfg


def _solver_from_args(args) -> SolverConfig:
    return SolverConfig(
        picard_tol=args.picard_tol,
        picard_max_iter=args.picard_max_iter,
        theta_scheme=args.theta,
        rannacher=not args.no_rannacher,
    )


def _grid_from_args(args, claim: ClaimSpec, cfg: MarketConfig):
    return build_grid(claim, cfg, width_sigmas=args.width_sigmas,
                      n_x=args.nx, n_t=args.nt)


def _write_jsonl(path: str, records: list[dict]) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


def cmd_price(args) -> int:
    claim = _claim_from_args(args)
    cfg = _market_from_args(args)
    solver = _solver_from_args(args)
    grid = _grid_from_args(args, claim, cfg)
    sol = solve_trade(claim, cfg, grid, solver, allow_arbitrage=args.allow_arbitrage)
    spot = args.spot if args.spot is not None else (
        claim.strike if claim.strike is not None else 1.0
    )
    report = report_from_solution(sol, spot)
    hedge = hedge_at(sol.seller, sol.benchmark, cfg, 0.0, spot)
    out = {"backend": active_backend(), **report.to_dict(),
           "hedge_seller_0": hedge.to_dict()}
    if args.log:
        records: list[dict] = []
        for label, surf in (("benchmark", sol.benchmark), ("seller", sol.seller),
                            ("buyer", sol.buyer)):
            diag = surf.diagnostics
            if diag is None:
                continue
            for rec in diag.to_records():
                records.append({"solve": label, **rec})
        records.append({"event": "report", **report.to_dict()})
        _write_jsonl(args.log, records)
    print(json.dumps(out, indent=2))
    return 0


def _sweep_axis(text: str) -> SweepAxis:
    name, sep, values = text.partition("=")
    if not sep or not values:
        raise ValueError(f"axis must be FIELD=v1,v2,..., got {text!r}")
    return SweepAxis(name=name.strip(),
                     values=tuple(float(v) for v in values.split(",")))


def cmd_sweep(args) -> int:
    claim = _claim_from_args(args)
    cfg = _market_from_args(args)
    solver = _solver_from_args(args)
    grid = _grid_from_args(args, claim, cfg)
    spec = SweepSpec(
        claim=claim,
        base=cfg,
        axis1=_sweep_axis(args.axis),
        axis2=_sweep_axis(args.axis2) if args.axis2 else None,
        spot=args.spot,
    )
    rows = run_sweep(spec, grid, solver, threads=args.threads,
                     allow_arbitrage=args.allow_arbitrage,
                     fail_fast=args.fail_fast)
    if args.out:
        write_csv(rows, args.out)
    else:
        write_csv(rows, sys.stdout)
    return 0


def _canned_table(args, base: MarketConfig, axis1: SweepAxis,
                  axis2: SweepAxis | None) -> int:
    claim = ClaimSpec(kind="call", strike=1.0, maturity=1.0)
    solver = _solver_from_args(args)
    grid = _grid_from_args(args, claim, base)
    spec = SweepSpec(claim=claim, base=base, axis1=axis1, axis2=axis2, spot=1.0)
    # The canned reference sweeps include r_f_minus points beyond the
    # validated rate ordering; price them anyway (with the usual warning).
    rows = run_sweep(spec, grid, solver, threads=args.threads,
                     allow_arbitrage=True)
    keep = list(rows[0].keys())[: (1 if axis2 is None else 2)] + [
        "v_hat_0", "v_sell_0", "v_buy_0", "xva_sell", "xva_buy",
        "funding_sell_0", "funding_buy_0",
    ]
    slim = [{k: row[k] for k in keep} for row in rows]
    if args.out:
        write_csv(slim, args.out)
    else:
        write_csv(slim, sys.stdout)
    return 0


def cmd_table1(args) -> int:
    base = _market_from_args(args)
    return _canned_table(
        args, base,
        SweepAxis("alpha", (0.0, 0.25, 0.75, 1.0)),
        SweepAxis("r_f_minus", (0.08, 0.2)),
    )


def cmd_table2(args) -> int:
    base = apply_overrides(_market_from_args(args), {"alpha": 0.9})
    return _canned_table(
        args, base,
        SweepAxis("r_f_minus", (0.08, 0.1, 0.15, 0.2)),
        None,
    )


def cmd_convergence(args) -> int:
    if args.levels < 2:
        raise ValueError(f"--levels must be >= 2, got {args.levels}")
    cfg = _market_from_args(args)
    solver = _solver_from_args(args)
    claim = ClaimSpec(kind=args.claim, strike=args.strike, maturity=args.maturity) \
        if args.claim != "custom" else _claim_from_args(args)
    spot = args.spot if args.spot is not None else (claim.strike or 1.0)

    rows: list[dict] = []
    # closed-form comparison for the default-free linear equation
    if claim.kind in ("call", "put"):
        exact = bs_closed_form(0.0, spot, claim, cfg.r_D, cfg.sigma)
        errs = []
        for lvl in range(args.levels):
            n_x = (args.base_nx - 1) * 2 ** lvl + 1
            n_t = args.base_nt * 2 ** lvl
            grid = build_grid(claim, cfg, width_sigmas=args.width_sigmas,
                              n_x=n_x, n_t=n_t)
            bench = benchmark_surface(grid, claim, cfg, solver)
            err = abs(bench.value_at(0.0, spot) - exact)
            errs.append(err)
            order = math.log2(errs[-2] / err) if lvl and err > 0.0 else None
            rows.append({"case": "linear", "level": lvl, "n_x": n_x, "n_t": n_t,
                         "value": bench.value_at(0.0, spot), "error": err,
                         "order": order})

    # self-convergence of the seller solve (Richardson estimate)
    vals = []
    for lvl in range(args.levels):
        n_x = (args.base_nx - 1) * 2 ** lvl + 1
        n_t = args.base_nt * 2 ** lvl
        grid = build_grid(claim, cfg, width_sigmas=args.width_sigmas,
                          n_x=n_x, n_t=n_t)
        bench = benchmark_surface(grid, claim, cfg, solver)
        sell = solve_semilinear(claim, cfg, grid, solver, side="seller",
                                benchmark=bench,
                                allow_arbitrage=args.allow_arbitrage)
        vals.append(sell.value_at(0.0, spot))
        diff = abs(vals[-1] - vals[-2]) if lvl else None
        order = None
        if lvl >= 2 and diff and diff > 0.0:
            prev = abs(vals[-2] - vals[-3])
            order = math.log2(prev / diff) if prev > 0.0 else None
        rows.append({"case": "semilinear", "level": lvl, "n_x": n_x, "n_t": n_t,
                     "value": vals[-1], "error": diff, "order": order})
    if args.out:
        write_csv(rows, args.out)
    else:
        write_csv(rows, sys.stdout)
    return 0


def cmd_bench(args) -> int:
    claim = ClaimSpec(kind="call", strike=1.0, maturity=1.0)
    cfg = _market_from_args(args)
    solver = _solver_from_args(args)
    grid = _grid_from_args(args, claim, cfg)

    def run_once():
        bench = benchmark_surface(grid, claim, cfg, solver)
        sell = solve_semilinear(claim, cfg, grid, solver, side="seller",
                                benchmark=bench)
        return sell.values

    results: dict[str, np.ndarray] = {}
    timings: dict[str, float] = {}
    saved = os.environ.get("XVA_NUMBA")
    try:
        for backend, flag in (("numba", "1"), ("numpy", "0")):
            if backend == "numba" and not HAS_NUMBA:
                continue
            os.environ["XVA_NUMBA"] = flag
            run_once()  # warm-up (JIT compile / cache load)
            t0 = time.perf_counter()
            for _ in range(args.repeat):
                values = run_once()
            timings[backend] = (time.perf_counter() - t0) / args.repeat
            results[backend] = values
    finally:
        if saved is None:
            os.environ.pop("XVA_NUMBA", None)
        else:
            os.environ["XVA_NUMBA"] = saved

    print(f"grid: {grid.n_x} x {grid.n_t}, repeat: {args.repeat}")
    for backend, secs in timings.items():
        print(f"{backend:>6}: {secs * 1e3:9.2f} ms per solve pair")
    if len(results) == 2:
        diff = float(np.max(np.abs(results["numba"] - results["numpy"])))
        ratio = timings["numpy"] / timings["numba"]
        print(f"max |numba - numpy| = {diff:.3e}, speedup x{ratio:.1f}")
    else:
        print("numba unavailable: fallback path only")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="xvaband",
        description="XVA band pricer under asymmetric funding, repo, and "
                    "collateral rates with bilateral default risk",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("price", help="price one claim, JSON to stdout")
    _add_claim_args(p)
    _add_market_args(p, config_required=True)
    _add_grid_args(p)
    p.add_argument("--spot", type=float, default=None)
    p.add_argument("--log", default=None, help="write per-step JSONL run log")
    p.set_defaults(fn=cmd_price)

    p = sub.add_parser("sweep", help="sweep one or two market fields, CSV out")
    _add_claim_args(p)
    _add_market_args(p, config_required=True)
    _add_grid_args(p)
    p.add_argument("--axis", required=True, metavar="FIELD=V1,V2,...")
    p.add_argument("--axis2", default=None, metavar="FIELD=V1,V2,...")
    p.add_argument("--spot", type=float, default=None)
    p.add_argument("--out", default=None, help="output CSV path (default stdout)")
    p.add_argument("--threads", type=int, default=None,
                   help=f"worker threads (default {default_threads()})")
    p.add_argument("--fail-fast", action="store_true")
    p.set_defaults(fn=cmd_sweep)

    for name, fn, help_text in (
        ("table1", cmd_table1, "funding table over alpha x r_f_minus"),
        ("table2", cmd_table2, "funding table over r_f_minus at alpha = 0.9"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_market_args(p, config_required=False)
        _add_grid_args(p)
        p.add_argument("--out", default=None)
        p.add_argument("--threads", type=int, default=None)
        p.set_defaults(fn=fn)

    p = sub.add_parser("convergence", help="grid refinement study")
    _add_claim_args(p)
    _add_market_args(p, config_required=False)
    _add_grid_args(p)
    p.add_argument("--spot", type=float, default=None)
    p.add_argument("--levels", type=int, default=4)
    p.add_argument("--base-nx", type=int, default=101)
    p.add_argument("--base-nt", type=int, default=50)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_convergence)

    p = sub.add_parser("bench", help="compare compiled and fallback backends")
    _add_market_args(p, config_required=False)
    _add_grid_args(p)
    p.add_argument("--repeat", type=int, default=3)
    p.set_defaults(fn=cmd_bench)

    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ArbitrageViolationError as err:
        print(f"error: {err}", file=sys.stderr)
        print("use --allow-arbitrage to price anyway", file=sys.stderr)
        return 1
    except (ValueError, OSError, RuntimeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
