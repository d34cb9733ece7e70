"""Market, claim, and credit parameter records with no-arbitrage validation.

The market carries one flat volatility and a family of flat rates: the
domestic short rate ``r_D``, asymmetric unsecured funding rates
(``r_f_plus`` earned on long cash, ``r_f_minus`` paid on short cash),
asymmetric repo rates for financing the stock leg, asymmetric rates on
posted/received collateral, the two risky bond yields ``r_I`` / ``r_C``,
risk-neutral default intensities ``h_I_Q`` / ``h_C_Q``, loss fractions
applied at close-out, and the collateralisation fraction ``alpha``.

Absence of arbitrage in the hedging market requires the rate ordering

    r_r_plus <= r_f_plus <= r_r_minus,      r_f_plus <= r_f_minus,
    max(r_f_plus, r_D) <  r_I + h_I_P,      max(r_f_plus, r_D) < r_C + h_C_P,
    max(r_c_plus, r_c_minus) <= r_f_minus <= min(r_I + h_I_P, r_C + h_C_P),

where ``h_i_P = h_i_Q - (r_i - r_D)`` are the real-world intensities
implied by the bond yields.  ``validate_no_arbitrage`` reports every
violated inequality instead of stopping at the first.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

__all__ = [
    "MarketConfig",
    "ClaimSpec",
    "CreditP",
    "ArbitrageViolationError",
    "DEFAULT_MARKET",
    "intensity_q_to_p",
    "intensity_p_to_q",
    "credit_under_p",
    "validate_no_arbitrage",
    "load_market_config",
    "market_config_from_dict",
    "apply_overrides",
]


@dataclass(frozen=True)
class MarketConfig:
    """Flat market parameters (rates per year, sigma per sqrt-year)."""

    sigma: float
    r_D: float
    r_f_plus: float
    r_f_minus: float
    r_r_plus: float
    r_r_minus: float
    r_c_plus: float
    r_c_minus: float
    r_I: float
    r_C: float
    h_I_Q: float
    h_C_Q: float
    L_I: float
    L_C: float
    alpha: float

    def __post_init__(self) -> None:
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise TypeError(f"{f.name} must be a number, got {v!r}")
            if not math.isfinite(v):
                raise ValueError(f"{f.name} must be finite, got {v!r}")
        if self.sigma <= 0.0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.h_I_Q < 0.0 or self.h_C_Q < 0.0:
            raise ValueError("default intensities h_I_Q, h_C_Q must be >= 0")
        if not 0.0 <= self.L_I <= 1.0 or not 0.0 <= self.L_C <= 1.0:
            raise ValueError("loss fractions L_I, L_C must lie in [0, 1]")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")


#: Desk default parameter set used by the canned tables and the CLI.
DEFAULT_MARKET = MarketConfig(
    sigma=0.2,
    r_D=0.01,
    r_f_plus=0.05,
    r_f_minus=0.08,
    r_r_plus=0.05,
    r_r_minus=0.05,
    r_c_plus=0.01,
    r_c_minus=0.01,
    r_I=0.03,
    r_C=0.04,
    h_I_Q=0.2,
    h_C_Q=0.15,
    L_I=0.5,
    L_C=0.5,
    alpha=0.9,
)


@dataclass(frozen=True)
class ClaimSpec:
    """European claim: vanilla call/put, or a piecewise-linear custom payoff.

    Custom payoffs are given as ``knots`` of (spot, value) pairs with
    strictly increasing spots; the payoff is linearly interpolated between
    knots and linearly extrapolated beyond the end segments (a single knot
    means a constant payoff).
    """

    kind: str
    strike: float | None = None
    maturity: float = 1.0
    knots: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("call", "put", "custom"):
            raise ValueError(f"kind must be call, put, or custom, got {self.kind!r}")
        if not math.isfinite(self.maturity) or self.maturity <= 0.0:
            raise ValueError(f"maturity must be positive, got {self.maturity}")
        if self.kind in ("call", "put"):
            if self.strike is None or not math.isfinite(self.strike) or self.strike <= 0.0:
                raise ValueError(f"{self.kind} claim needs a positive strike")
        else:
            if not self.knots:
                raise ValueError("custom claim needs at least one payoff knot")
            ss = [k[0] for k in self.knots]
            if any(not math.isfinite(s) or s <= 0.0 for s in ss):
                raise ValueError("payoff knot spots must be positive and finite")
            if any(b <= a for a, b in zip(ss, ss[1:])):
                raise ValueError("payoff knot spots must be strictly increasing")
            if any(not math.isfinite(k[1]) for k in self.knots):
                raise ValueError("payoff knot values must be finite")

    @classmethod
    def call(cls, strike: float, maturity: float) -> "ClaimSpec":
        return cls(kind="call", strike=strike, maturity=maturity)

    @classmethod
    def put(cls, strike: float, maturity: float) -> "ClaimSpec":
        return cls(kind="put", strike=strike, maturity=maturity)

    @classmethod
    def custom(cls, knots, maturity: float) -> "ClaimSpec":
        return cls(kind="custom", maturity=maturity,
                   knots=tuple((float(s), float(v)) for s, v in knots))

    def payoff(self, s):
        """Terminal payoff evaluated at spot(s); accepts scalars or arrays."""
        s = np.asarray(s, dtype=float)
        if self.kind == "call":
            out = np.maximum(s - self.strike, 0.0)
        elif self.kind == "put":
            out = np.maximum(self.strike - s, 0.0)
        else:
            ks = np.array([k[0] for k in self.knots])
            vs = np.array([k[1] for k in self.knots])
            out = np.interp(s, ks, vs)
            if ks.size >= 2:
                # np.interp clamps; extend the end segments linearly instead
                lo = s < ks[0]
                hi = s > ks[-1]
                if lo.any():
                    slope = (vs[1] - vs[0]) / (ks[1] - ks[0])
                    out = np.where(lo, vs[0] + slope * (s - ks[0]), out)
                if hi.any():
                    slope = (vs[-1] - vs[-2]) / (ks[-1] - ks[-2])
                    out = np.where(hi, vs[-1] + slope * (s - ks[-1]), out)
        if out.ndim == 0:
            return float(out)
        return out


@dataclass(frozen=True)
class CreditP:
    """Real-world default intensities implied by bond yields."""

    h_I_P: float
    h_C_P: float


class ArbitrageViolationError(ValueError):
    """Raised when a market config admits arbitrage in the hedging market."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("arbitrage in hedging market: " + "; ".join(violations))


def intensity_q_to_p(h_q: float, r_bond: float, r_d: float) -> float:
    """Risk-neutral to real-world intensity: h_P = h_Q - (r_bond - r_D).

    Raises if the implied real-world intensity is negative, which signals
    an inconsistent (arbitrageable) bond yield.
    """
    h_p = h_q - (r_bond - r_d)
    if h_p < 0.0:
        raise ValueError(
            f"implied real-world intensity is negative: {h_q} - ({r_bond} - {r_d}) = {h_p}"
        )
    return h_p


def intensity_p_to_q(h_p: float, r_bond: float, r_d: float) -> float:
    """Real-world to risk-neutral intensity: h_Q = h_P + (r_bond - r_D)."""
    return h_p + (r_bond - r_d)


def credit_under_p(cfg: MarketConfig) -> CreditP:
    """Real-world intensities for both names implied by the config."""
    return CreditP(
        h_I_P=intensity_q_to_p(cfg.h_I_Q, cfg.r_I, cfg.r_D),
        h_C_P=intensity_q_to_p(cfg.h_C_Q, cfg.r_C, cfg.r_D),
    )


def validate_no_arbitrage(cfg: MarketConfig) -> list[str]:
    """Return one descriptor per violated no-arbitrage inequality.

    An empty list means the rate configuration is arbitrage-free.  Strict
    inequalities are required against the risky bond returns; the others
    tolerate equality.
    """
    v: list[str] = []
    # raw formula: negativity is reported here rather than raised
    h_I_P = cfg.h_I_Q - (cfg.r_I - cfg.r_D)
    h_C_P = cfg.h_C_Q - (cfg.r_C - cfg.r_D)
    if h_I_P < 0.0:
        v.append(f"h_I_P >= 0 violated: implied h_I_P = {h_I_P}")
    if h_C_P < 0.0:
        v.append(f"h_C_P >= 0 violated: implied h_C_P = {h_C_P}")
    ret_I = cfg.r_I + h_I_P
    ret_C = cfg.r_C + h_C_P
    if cfg.r_r_plus > cfg.r_f_plus:
        v.append(f"r_r_plus <= r_f_plus violated: {cfg.r_r_plus} > {cfg.r_f_plus}")
    if cfg.r_f_plus > cfg.r_r_minus:
        v.append(f"r_f_plus <= r_r_minus violated: {cfg.r_f_plus} > {cfg.r_r_minus}")
    if cfg.r_f_plus > cfg.r_f_minus:
        v.append(f"r_f_plus <= r_f_minus violated: {cfg.r_f_plus} > {cfg.r_f_minus}")
    if max(cfg.r_f_plus, cfg.r_D) >= ret_I:
        v.append(
            f"max(r_f_plus, r_D) < r_I + h_I_P violated: "
            f"{max(cfg.r_f_plus, cfg.r_D)} >= {ret_I}"
        )
    if max(cfg.r_f_plus, cfg.r_D) >= ret_C:
        v.append(
            f"max(r_f_plus, r_D) < r_C + h_C_P violated: "
            f"{max(cfg.r_f_plus, cfg.r_D)} >= {ret_C}"
        )
    if max(cfg.r_c_plus, cfg.r_c_minus) > cfg.r_f_minus:
        v.append(
            f"max(r_c_plus, r_c_minus) <= r_f_minus violated: "
            f"{max(cfg.r_c_plus, cfg.r_c_minus)} > {cfg.r_f_minus}"
        )
    if cfg.r_f_minus > min(ret_I, ret_C):
        v.append(
            f"r_f_minus <= min(r_I + h_I_P, r_C + h_C_P) violated: "
            f"{cfg.r_f_minus} > {min(ret_I, ret_C)}"
        )
    return v


def market_config_from_dict(raw: dict) -> MarketConfig:
    """Build a MarketConfig from a plain dict, rejecting unknown keys."""
    if not isinstance(raw, dict):
        raise ValueError(f"market config must be a JSON object, got {type(raw).__name__}")
    known = {f.name for f in fields(MarketConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ValueError(f"unknown market config keys: {', '.join(unknown)}")
    missing = sorted(known - set(raw))
    if missing:
        raise ValueError(f"missing market config keys: {', '.join(missing)}")
    return MarketConfig(**{k: float(raw[k]) for k in known})


def load_market_config(path: str | Path) -> MarketConfig:
    """Load a MarketConfig from a JSON file whose keys match the field names."""
    with open(path) as fh:
        raw = json.load(fh)
    return market_config_from_dict(raw)


def apply_overrides(cfg: MarketConfig, overrides: dict[str, float]) -> MarketConfig:
    """Return a copy of cfg with named fields replaced; unknown names raise."""
    import dataclasses

    known = {f.name for f in fields(MarketConfig)}
    unknown = sorted(set(overrides) - known)
    if unknown:
        raise ValueError(f"unknown market config fields: {', '.join(unknown)}")
    return dataclasses.replace(cfg, **{k: float(v) for k, v in overrides.items()})
