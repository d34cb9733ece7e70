"""Asymmetric financing rates and the nonlinear drivers of the hedger's wealth.

The seller's driver aggregates the running financing costs of a replicating
portfolio: unsecured funding on the cash account (different rates for long
and short balances), repo financing of the stock leg, remuneration of the
collateral account, and the domestic-rate carry of the two default-risky
bond positions.  With ``y = v + z_I + z_C - alpha*v_hat`` the funding
balance and ``c = alpha*v_hat`` the collateral account,

    f_seller = -( r_f_plus*y^+ - r_f_minus*y^-
                  + ((r_D - r_r_minus)*z^+ - (r_D - r_r_plus)*z^-)/sigma
                  - r_D*z_I - r_D*z_C
                  + r_c_plus*c^+ - r_c_minus*c^- )

and the buyer's driver is the reflection ``f_buyer(v, z, z_I, z_C; v_hat)
= -f_seller(-v, -z, -z_I, -z_C; -v_hat)``.  Both are piecewise linear,
hence globally Lipschitz, and coincide when all plus/minus rate pairs are
symmetric.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import MarketConfig

__all__ = [
    "DriverInputs",
    "rate_fund",
    "rate_repo",
    "rate_coll",
    "f_seller",
    "f_buyer",
    "driver_value",
]


@dataclass(frozen=True)
class DriverInputs:
    """Arguments of the wealth driver at one point of the state space.

    v      current candidate value of the hedged position
    z      volatility-scaled delta exposure (sigma * S * dV/dS)
    z_I    jump exposure to own default (close-out value minus v)
    z_C    jump exposure to counterparty default
    v_hat  default-free reference value used for collateral and close-out
    """

    v: float
    z: float
    z_I: float
    z_C: float
    v_hat: float


def rate_fund(y, cfg: MarketConfig):
    """Unsecured funding rate applied to a cash balance y (0 at y == 0)."""
    y = np.asarray(y, dtype=float)
    out = np.where(y > 0.0, cfg.r_f_plus, np.where(y < 0.0, cfg.r_f_minus, 0.0))
    return float(out) if out.ndim == 0 else out


def rate_repo(x, cfg: MarketConfig):
    """Repo rate applied to a stock-financing position x (0 at x == 0)."""
    x = np.asarray(x, dtype=float)
    out = np.where(x > 0.0, cfg.r_r_plus, np.where(x < 0.0, cfg.r_r_minus, 0.0))
    return float(out) if out.ndim == 0 else out


def rate_coll(c, cfg: MarketConfig):
    """Collateral remuneration rate for an account balance c (0 at c == 0)."""
    c = np.asarray(c, dtype=float)
    out = np.where(c > 0.0, cfg.r_c_plus, np.where(c < 0.0, cfg.r_c_minus, 0.0))
    return float(out) if out.ndim == 0 else out


def _f_plus(v, z, z_i, z_c, v_hat, cfg: MarketConfig):
    """Seller-side driver; accepts scalars or numpy arrays."""
    y = v + z_i + z_c - cfg.alpha * v_hat
    c = cfg.alpha * v_hat
    fund = cfg.r_f_plus * np.maximum(y, 0.0) - cfg.r_f_minus * np.maximum(-y, 0.0)
    repo = (
        (cfg.r_D - cfg.r_r_minus) * np.maximum(z, 0.0)
        - (cfg.r_D - cfg.r_r_plus) * np.maximum(-z, 0.0)
    ) / cfg.sigma
    coll = cfg.r_c_plus * np.maximum(c, 0.0) - cfg.r_c_minus * np.maximum(-c, 0.0)
    return -(fund + repo - cfg.r_D * z_i - cfg.r_D * z_c + coll)


def f_seller(inp: DriverInputs, cfg: MarketConfig) -> float:
    """Driver of the seller's (upper) wealth equation."""
    return float(_f_plus(inp.v, inp.z, inp.z_I, inp.z_C, inp.v_hat, cfg))


def f_buyer(inp: DriverInputs, cfg: MarketConfig) -> float:
    """Driver of the buyer's (lower) wealth equation, the seller's reflection."""
    return float(-_f_plus(-inp.v, -inp.z, -inp.z_I, -inp.z_C, -inp.v_hat, cfg))


def driver_value(side: int, v, z, z_i, z_c, v_hat, cfg: MarketConfig):
    """Array-friendly driver for either side: side=+1 seller, -1 buyer."""
    if side > 0:
        return _f_plus(v, z, z_i, z_c, v_hat, cfg)
    return -_f_plus(
        np.negative(v), np.negative(z), np.negative(z_i), np.negative(z_c),
        np.negative(v_hat), cfg,
    )


def repo_drift_split(cfg: MarketConfig) -> tuple[float, float]:
    """Split the repo term of the driver into linear and kink parts.

    In terms of the log-space slope ``w_x = z / sigma`` the repo charge is
    ``m*w_x + s*|w_x|`` with ``m = (2 r_D - r_r_plus - r_r_minus)/2`` and
    ``s = (r_r_plus - r_r_minus)/2``.  The linear part can be folded into
    the PDE convection coefficient, which sharpens the per-step fixed-point
    contraction; the kink part (zero for symmetric repo rates) stays in the
    nonlinear driver.
    """
    m = 0.5 * (2.0 * cfg.r_D - cfg.r_r_plus - cfg.r_r_minus)
    s = 0.5 * (cfg.r_r_plus - cfg.r_r_minus)
    return m, s
