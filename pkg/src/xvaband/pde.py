"""Crank-Nicolson marching for the linear reference equation and the
semilinear wealth PDE.

In log-space x = ln S the two equations share the operator structure

    w_t + a w_x + (sigma^2/2) w_xx - kappa w + G(t, x, w, w_x) = 0,
    w(T, x) = payoff(e^x),

with kappa = r_D and G = 0 for the default-free reference value, and
kappa = h_I_Q + h_C_Q with G the close-out settlement source plus the
nonlinear financing driver for the adjusted value.  The linear-in-slope
part of the repo charge is folded into the convection coefficient a (see
:func:`xvaband.driver.repo_drift_split`); this keeps the per-step Picard
map a strong contraction even on fine grids, where the raw slope coupling
scales like dt/dx.

Boundary rows impose zero second difference in x (payoffs here are
asymptotically linear in S = e^x only at the call wing, but linearity in x
is the standard truncation closure and its error lives in the outer wings
far from the reporting region).  Eliminating those rows leaves a strictly
diagonally dominant tridiagonal system on the interior nodes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, TYPE_CHECKING

import numpy as np
from scipy.linalg import solve_banded

from . import kernels
from .config import (
    ArbitrageViolationError,
    ClaimSpec,
    MarketConfig,
    validate_no_arbitrage,
)
from .driver import driver_value, repo_drift_split
from .grid import (
    GridSpec,
    SolveDiagnostics,
    SolverConfig,
    Surface,
    time_schedule,
    uniform_row_indices,
)

if TYPE_CHECKING:  # pragma: no cover
    from .benchmark import BenchmarkSurface

__all__ = [
    "PicardConvergenceError",
    "StepContext",
    "cn_step",
    "march_schedule",
    "solve_semilinear",
    "terminal_slice",
]


class PicardConvergenceError(RuntimeError):
    """Per-step fixed-point iteration failed to reach picard_tol."""

    def __init__(self, step_index: int, t: float, residual: float, iterations: int):
        self.step_index = step_index
        self.t = t
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"Picard iteration did not converge at step {step_index} "
            f"(t = {t:.6g}): residual {residual:.3e} after {iterations} iterations"
        )


@dataclass(eq=False)
class StepContext:
    """Frozen ingredients of one backward solve: operator plus optional source.

    ``source(t, w_full)`` returns the interior source G; None means a purely
    linear step.  The reduced operator arrays carry the boundary-eliminated
    tridiagonal coefficients.
    """

    grid: GridSpec
    solver: SolverConfig
    a_eff: float
    b: float
    kappa: float
    lo: np.ndarray
    di: np.ndarray
    up: np.ndarray
    source: Callable[[float, np.ndarray], np.ndarray] | None = None


def make_step_context(
    grid: GridSpec,
    solver: SolverConfig,
    a_eff: float,
    b: float,
    kappa: float,
    source: Callable[[float, np.ndarray], np.ndarray] | None = None,
) -> StepContext:
    lo, di, up = kernels.reduced_operator(grid.n_x, grid.dx, a_eff, b, kappa)
    return StepContext(grid=grid, solver=solver, a_eff=a_eff, b=b, kappa=kappa,
                       lo=lo, di=di, up=up, source=source)


def _apply_reduced(lo, di, up, u):
    """Reduced-operator product A u on the interior."""
    au = np.empty_like(u)
    au[1:-1] = lo[1:-1] * u[:-2] + di[1:-1] * u[1:-1] + up[1:-1] * u[2:]
    au[0] = di[0] * u[0] + up[0] * u[1]
    au[-1] = lo[-1] * u[-2] + di[-1] * u[-1]
    return au


def _extend(u: np.ndarray, n_x: int) -> np.ndarray:
    w = np.empty(n_x)
    w[1:-1] = u
    w[0] = 2.0 * u[0] - u[1]
    w[-1] = 2.0 * u[-1] - u[-2]
    return w


def cn_step(
    w_next: np.ndarray,
    t_next: float,
    dt: float,
    theta: float,
    ctx: StepContext,
    w_start: np.ndarray | None = None,
) -> tuple[np.ndarray, int, float]:
    """One backward step from t_next to t_next - dt.

    Returns (full slice at the new level, number of implicit solves, final
    sup-norm update).  With no source the step is a single tridiagonal
    solve; otherwise the implicit source coupling is resolved by Picard
    iteration warm-started at ``w_start`` (default: the current slice).
    """
    m = ctx.grid.n_x - 2
    u_next = w_next[1:-1]
    llo = theta * dt * ctx.lo
    ldi = 1.0 + theta * dt * ctx.di
    lup = theta * dt * ctx.up
    ab = np.zeros((3, m))
    ab[0, 1:] = lup[:-1]
    ab[1, :] = ldi
    ab[2, :-1] = llo[1:]

    c_e = (1.0 - theta) * dt
    rhs0 = u_next - c_e * _apply_reduced(ctx.lo, ctx.di, ctx.up, u_next)
    if ctx.source is not None and theta < 1.0:
        rhs0 = rhs0 + c_e * ctx.source(t_next, w_next)

    if ctx.source is None:
        u = solve_banded((1, 1), ab, rhs0, check_finite=False)
        return _extend(u, ctx.grid.n_x), 1, 0.0

    t_new = t_next - dt
    u = u_next.copy() if w_start is None else w_start[1:-1].copy()
    w_cur = np.empty(ctx.grid.n_x)
    n_it = 0
    delta = np.inf
    while n_it < ctx.solver.picard_max_iter:
        n_it += 1
        w_cur[1:-1] = u
        w_cur[0] = 2.0 * u[0] - u[1]
        w_cur[-1] = 2.0 * u[-1] - u[-2]
        rhs = rhs0 + theta * dt * ctx.source(t_new, w_cur)
        u_new = solve_banded((1, 1), ab, rhs, check_finite=False)
        delta = float(np.max(np.abs(u_new - u)))
        u = u_new
        if delta < ctx.solver.picard_tol:
            break
    if delta >= ctx.solver.picard_tol:
        raise PicardConvergenceError(-1, t_new, delta, n_it)
    return _extend(u, ctx.grid.n_x), n_it, delta


@dataclass(eq=False)
class SemilinearTerms:
    """Driver and settlement source data for one side of the wealth PDE."""

    side: int
    cfg: MarketConfig
    m_fold: float
    bench_sched: np.ndarray  # (n_levels, n_x) reference slices in march order


def _source_reference(terms: SemilinearTerms, dx: float, bench_row: np.ndarray,
                      w_full: np.ndarray) -> np.ndarray:
    cfg = terms.cfg
    bh = bench_row[1:-1]
    e = (1.0 - cfg.alpha) * bh
    th_i = bh - cfg.L_I * np.maximum(e, 0.0)
    th_c = bh + cfg.L_C * np.maximum(-e, 0.0)
    w = w_full[1:-1]
    wx = (w_full[2:] - w_full[:-2]) / (2.0 * dx)
    z_i = th_i - w
    z_c = th_c - w
    f = driver_value(terms.side, w, cfg.sigma * wx, z_i, z_c, bh, cfg)
    # The default legs accrue at the intensity-adjusted rate r_D + h_j: the
    # marched source carries h_j * z_j on top of the plain driver, which
    # prices them at r_D.  Must stay in lockstep with kernels._source_terms.
    return (cfg.h_I_Q * th_i + cfg.h_C_Q * th_c + f
            + cfg.h_I_Q * z_i + cfg.h_C_Q * z_c + terms.m_fold * wx)


def march_schedule(
    w_terminal: np.ndarray,
    grid: GridSpec,
    solver: SolverConfig,
    a_eff: float,
    b: float,
    kappa: float,
    terms: SemilinearTerms | None = None,
) -> tuple[np.ndarray, np.ndarray, SolveDiagnostics]:
    """Backward march over the full schedule on the selected backend.

    Returns (sched_times, sched_values, diagnostics); sched_values[k] is
    the full slice at sched_times[k], marching from T down to 0.
    """
    times, thetas = time_schedule(grid, solver)
    dts = times[:-1] - times[1:]
    w_terminal = np.ascontiguousarray(w_terminal, dtype=float)

    if kernels.numba_enabled():
        cfg = terms.cfg if terms is not None else None
        has_driver = terms is not None
        bench = terms.bench_sched if has_driver else np.zeros((1, 1))
        surf, iters, resids, fail = kernels.march(
            w_terminal, dts, thetas, grid.dx, a_eff, b, kappa,
            has_driver, terms.side if has_driver else 1,
            np.ascontiguousarray(bench), terms.m_fold if has_driver else 0.0,
            cfg.sigma if has_driver else 1.0,
            cfg.r_D if has_driver else 0.0,
            cfg.alpha if has_driver else 0.0,
            cfg.L_I if has_driver else 0.0,
            cfg.L_C if has_driver else 0.0,
            cfg.r_f_plus if has_driver else 0.0,
            cfg.r_f_minus if has_driver else 0.0,
            cfg.r_r_plus if has_driver else 0.0,
            cfg.r_r_minus if has_driver else 0.0,
            cfg.r_c_plus if has_driver else 0.0,
            cfg.r_c_minus if has_driver else 0.0,
            cfg.h_I_Q if has_driver else 0.0,
            cfg.h_C_Q if has_driver else 0.0,
            solver.picard_tol, solver.picard_max_iter,
        )
        if fail >= 0:
            raise PicardConvergenceError(
                int(fail), float(times[fail + 1]), float(resids[fail]),
                int(iters[fail]),
            )
        diag = SolveDiagnostics(step_times=times[1:].copy(), iterations=iters,
                                residuals=resids)
        return times, surf, diag

    # numpy/scipy reference path: march by repeated cn_step
    n_steps = dts.size
    surf = np.empty((n_steps + 1, grid.n_x))
    surf[0] = w_terminal
    iters = np.zeros(n_steps, dtype=np.int64)
    resids = np.zeros(n_steps)

    if terms is not None:
        bench_by_level = terms.bench_sched

        def build_source(k: int):
            def source(t: float, w_full: np.ndarray) -> np.ndarray:
                # t is either the step start (level k) or target (level k+1)
                level = k if abs(t - times[k]) <= abs(t - times[k + 1]) else k + 1
                return _source_reference(terms, grid.dx, bench_by_level[level], w_full)

            return source

    for k in range(n_steps):
        src = build_source(k) if terms is not None else None
        ctx = make_step_context(grid, solver, a_eff, b, kappa, source=src)
        if k == 0:
            w_start = surf[0]
        else:
            r = dts[k] / dts[k - 1]
            w_start = surf[k] + r * (surf[k] - surf[k - 1])
        try:
            w_new, n_it, res = cn_step(surf[k], float(times[k]), float(dts[k]),
                                       float(thetas[k]), ctx, w_start=w_start)
        except PicardConvergenceError as err:
            raise PicardConvergenceError(k, float(times[k + 1]), err.residual,
                                         err.iterations) from None
        surf[k + 1] = w_new
        iters[k] = n_it
        resids[k] = res

    diag = SolveDiagnostics(step_times=times[1:].copy(), iterations=iters,
                            residuals=resids)
    return times, surf, diag


def terminal_slice(claim: ClaimSpec, grid: GridSpec) -> np.ndarray:
    """Payoff evaluated on the spatial nodes."""
    return np.asarray(claim.payoff(np.exp(grid.x_nodes())), dtype=float)


def solve_semilinear(
    claim: ClaimSpec,
    cfg: MarketConfig,
    grid: GridSpec,
    solver: SolverConfig | None = None,
    side: str = "seller",
    benchmark: "BenchmarkSurface | None" = None,
    allow_arbitrage: bool = False,
) -> Surface:
    """Solve the semilinear wealth PDE for one side of the trade.

    ``benchmark`` must live on the same grid and schedule (it is computed
    on demand when omitted).  Configs that violate the no-arbitrage rate
    ordering raise :class:`ArbitrageViolationError` unless
    ``allow_arbitrage`` is set, in which case a warning is emitted and the
    solve proceeds.
    """
    if side not in ("seller", "buyer"):
        raise ValueError(f"side must be 'seller' or 'buyer', got {side!r}")
    solver = solver or SolverConfig()
    if abs(claim.maturity - grid.maturity) > 1e-12:
        raise ValueError(
            f"claim maturity {claim.maturity} != grid maturity {grid.maturity}"
        )
    violations = validate_no_arbitrage(cfg)
    if violations:
        if not allow_arbitrage:
            raise ArbitrageViolationError(violations)
        warnings.warn(
            "solving despite arbitrage in the rate configuration: "
            + "; ".join(violations),
            RuntimeWarning,
            stacklevel=2,
        )

    if benchmark is None:
        from .benchmark import benchmark_surface

        benchmark = benchmark_surface(grid, claim, cfg, solver)
    if benchmark.grid != grid:
        raise ValueError("benchmark surface grid does not match the solve grid")
    times, _ = time_schedule(grid, solver)
    if not np.array_equal(benchmark.sched_times, times):
        raise ValueError(
            "benchmark surface schedule does not match the solver settings "
            "(same SolverConfig required)"
        )

    m_fold, _ = repo_drift_split(cfg)
    a = cfg.r_D - 0.5 * cfg.sigma * cfg.sigma
    terms = SemilinearTerms(
        side=+1 if side == "seller" else -1,
        cfg=cfg,
        m_fold=m_fold,
        bench_sched=benchmark.sched_values,
    )
    sched_times, sched_values, diag = march_schedule(
        terminal_slice(claim, grid), grid, solver,
        a_eff=a - m_fold, b=0.5 * cfg.sigma * cfg.sigma,
        kappa=cfg.h_I_Q + cfg.h_C_Q, terms=terms,
    )
    rows = uniform_row_indices(grid, solver)
    return Surface(grid=grid, values=sched_values[rows].copy(), diagnostics=diag)
