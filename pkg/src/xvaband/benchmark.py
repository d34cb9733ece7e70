"""Default-free reference value, close-out amounts, and collateral.

The reference value discounts the terminal payoff at the domestic rate
under the risk-neutral dynamics dS/S = r_D dt + sigma dW, i.e. it solves

    w_t + (r_D - sigma^2/2) w_x + (sigma^2/2) w_xx - r_D w = 0

in log space.  It is the mark used for collateral calls and default
close-out: on an own default the hedger settles theta_I = v_hat -
L_I*((1-alpha) v_hat)^+ (the uncollateralised positive part is haircut),
and on a counterparty default theta_C = v_hat + L_C*((1-alpha) v_hat)^-.
Both close-outs bracket v_hat: theta_I <= v_hat <= theta_C.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .config import ClaimSpec, MarketConfig
from .grid import (
    GridSpec,
    SolveDiagnostics,
    SolverConfig,
    surface_slope_at,
    surface_value_at,
    time_schedule,
    uniform_row_indices,
)

__all__ = [
    "BenchmarkSurface",
    "bs_closed_form",
    "closeout_I",
    "closeout_C",
    "collateral",
    "benchmark_surface",
]


def bs_closed_form(t: float, s: float, claim: ClaimSpec, r: float, sigma: float) -> float:
    """Black-Scholes value of a vanilla call/put at (t, spot).

    Custom payoffs are rejected; degenerate sigma*sqrt(T - t) collapses to
    the discounted intrinsic on the forward.
    """
    if claim.kind not in ("call", "put"):
        raise ValueError(f"closed form requires a call or put, got {claim.kind!r}")
    if s <= 0.0:
        raise ValueError(f"spot must be positive, got {s}")
    if not 0.0 <= t <= claim.maturity:
        raise ValueError(f"t = {t} outside [0, {claim.maturity}]")
    k = claim.strike
    tau = claim.maturity - t
    if tau == 0.0:
        return float(claim.payoff(s))
    vol = sigma * math.sqrt(tau)
    df = math.exp(-r * tau)
    if vol < 1e-8:
        fwd = s / df
        intrinsic = max(fwd - k, 0.0) if claim.kind == "call" else max(k - fwd, 0.0)
        return df * intrinsic
    d1 = (math.log(s / k) + (r + 0.5 * sigma * sigma) * tau) / vol
    d2 = d1 - vol
    if claim.kind == "call":
        return float(s * norm.cdf(d1) - k * df * norm.cdf(d2))
    return float(k * df * norm.cdf(-d2) - s * norm.cdf(-d1))


def closeout_I(v_hat, alpha: float, l_i: float):
    """Settlement value on own default: haircut the uncollateralised claim."""
    e = (1.0 - alpha) * np.asarray(v_hat, dtype=float)
    out = v_hat - l_i * np.maximum(e, 0.0)
    return float(out) if np.ndim(out) == 0 else out


def closeout_C(v_hat, alpha: float, l_c: float):
    """Settlement value on counterparty default."""
    e = (1.0 - alpha) * np.asarray(v_hat, dtype=float)
    out = v_hat + l_c * np.maximum(-e, 0.0)
    return float(out) if np.ndim(out) == 0 else out


def collateral(v_hat, alpha: float):
    """Collateral account balance for a reference mark v_hat."""
    out = alpha * np.asarray(v_hat, dtype=float)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True, eq=False)
class BenchmarkSurface:
    """Reference value on the lattice, plus the slices at every march level.

    ``values`` holds the uniform time levels (t increasing, like
    :class:`xvaband.grid.Surface`); ``sched_values`` holds one row per
    march level including any Rannacher half step, which is what the
    semilinear solve consumes.
    """

    grid: GridSpec
    values: np.ndarray
    sched_times: np.ndarray
    sched_values: np.ndarray
    diagnostics: SolveDiagnostics | None = None

    def value_at(self, t: float, s: float) -> float:
        return surface_value_at(self.grid, self.values, t, s)

    def slope_at(self, t: float, s: float) -> float:
        return surface_slope_at(self.grid, self.values, t, s)


def benchmark_surface(
    grid: GridSpec,
    claim: ClaimSpec,
    cfg: MarketConfig,
    solver: SolverConfig | None = None,
) -> BenchmarkSurface:
    """Solve the default-free reference PDE on the shared schedule.

    Uses the same stepper, schedule, and boundary policy as the semilinear
    solve so that in the symmetric-rate zero-loss limit the two solves
    coincide on the lattice to iteration tolerance.
    """
    from .pde import march_schedule, terminal_slice

    solver = solver or SolverConfig()
    if abs(claim.maturity - grid.maturity) > 1e-12:
        raise ValueError(
            f"claim maturity {claim.maturity} != grid maturity {grid.maturity}"
        )
    a = cfg.r_D - 0.5 * cfg.sigma * cfg.sigma
    times, surf, diag = march_schedule(
        terminal_slice(claim, grid), grid, solver,
        a_eff=a, b=0.5 * cfg.sigma * cfg.sigma, kappa=cfg.r_D, terms=None,
    )
    rows = uniform_row_indices(grid, solver)
    return BenchmarkSurface(
        grid=grid,
        values=surf[rows].copy(),
        sched_times=times,
        sched_values=surf,
        diagnostics=diag,
    )
