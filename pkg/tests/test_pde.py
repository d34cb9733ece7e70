"""Backward theta-scheme march and the semilinear solve."""

from dataclasses import replace

import numpy as np
import pytest

from xvaband import (
    ArbitrageViolationError,
    ClaimSpec,
    GridSpec,
    SolverConfig,
    benchmark_surface,
    build_grid,
    cn_step,
    solve_semilinear,
)
from xvaband.pde import (
    PicardConvergenceError,
    make_step_context,
    march_schedule,
    terminal_slice,
)

DT = 0.0025
KAPPA = 0.35
# one Crank-Nicolson step applied to a constant slice multiplies it by
# (1 - (1-theta) dt kappa) / (1 + theta dt kappa); frozen for dt=0.0025,
# theta=0.5, kappa=0.35
CONST_STEP_FACTOR = 0.9991253826450927


def _ctx(source=None, n_x=101, solver=None):
    grid = GridSpec(x_min=-0.5, x_max=0.5, n_x=n_x, n_t=1, maturity=DT)
    solver = solver or SolverConfig()
    return make_step_context(grid, solver, a_eff=-0.01, b=0.02, kappa=KAPPA, source=source)


class TestCnStep:
    def test_constant_slice_decays_at_the_killing_rate(self):
        ctx = _ctx()
        w = np.ones(101)
        out, n_solves, delta = cn_step(w, DT, DT, 0.5, ctx)
        assert n_solves == 1
        assert delta == 0.0
        assert np.all(np.abs(out - CONST_STEP_FACTOR) < 1e-12)

    def test_zero_slice_is_a_fixed_point(self):
        ctx = _ctx()
        out, _, _ = cn_step(np.zeros(101), DT, DT, 0.5, ctx)
        assert np.all(out == 0.0)

    def test_source_balancing_the_killing_term_freezes_the_slice(self):
        # with G = kappa * 1 the decay of a constant unit slice is exactly
        # cancelled, so the step must return ones
        ctx = _ctx(source=lambda t, w: np.full(99, KAPPA))
        out, n_solves, _ = cn_step(np.ones(101), DT, DT, 0.5, ctx)
        assert n_solves >= 1
        assert np.all(np.abs(out - 1.0) < 1e-12)

    def test_unreachable_tolerance_raises(self):
        solver = SolverConfig(picard_tol=1e-30, picard_max_iter=3)
        ctx = _ctx(source=lambda t, w: w[1:-1] ** 2, solver=solver)
        with pytest.raises(PicardConvergenceError) as exc:
            cn_step(np.ones(101), DT, DT, 0.5, ctx)
        assert exc.value.iterations == 3
        assert exc.value.residual > 0.0

    def test_fully_implicit_step_ignores_the_explicit_source_weight(self):
        calls = []

        def source(t, w):
            calls.append(t)
            return np.zeros(99)

        ctx = _ctx(source=source)
        cn_step(np.ones(101), DT, DT, 1.0, ctx)
        # theta = 1: the source must never be evaluated at the known level
        assert DT not in calls
        assert all(t == 0.0 for t in calls)


class TestMarchSchedule:
    def test_shapes_and_diagnostics(self, call_claim, market, solver):
        grid = build_grid(call_claim, market, n_x=101, n_t=8)
        w_t = terminal_slice(call_claim, grid)
        times, surf, diag = march_schedule(
            w_t, grid, solver, a_eff=-0.01, b=0.02, kappa=0.0
        )
        assert times.shape == (grid.n_t + 2,)  # extra Rannacher half level
        assert surf.shape == (grid.n_t + 2, grid.n_x)
        assert np.array_equal(surf[0], w_t)
        assert diag.iterations.shape == (grid.n_t + 1,)
        assert diag.max_iterations() >= 1

    def test_without_rannacher(self, call_claim, market):
        solver = SolverConfig(rannacher=False)
        grid = build_grid(call_claim, market, n_x=101, n_t=8)
        times, surf, _ = march_schedule(
            terminal_slice(call_claim, grid), grid, solver,
            a_eff=-0.01, b=0.02, kappa=0.0,
        )
        assert times.shape == (grid.n_t + 1,)
        assert surf.shape == (grid.n_t + 1, grid.n_x)


class TestSolveSemilinear:
    def test_symmetric_rates_collapse_to_the_reference(
        self, call_claim, symmetric_market, small_grid, solver, backend
    ):
        bench = benchmark_surface(small_grid, call_claim, symmetric_market, solver)
        for side in ("seller", "buyer"):
            surf = solve_semilinear(
                call_claim, symmetric_market, small_grid, solver,
                side=side, benchmark=bench,
            )
            assert np.max(np.abs(surf.values - bench.values)) < 1e-10

    def test_zero_payoff_prices_to_zero(self, market, small_grid, solver):
        claim = ClaimSpec.custom([(1.0, 0.0)], maturity=1.0)
        surf = solve_semilinear(claim, market, small_grid, solver, side="seller")
        assert np.all(surf.values == 0.0)

    def test_seller_value_sits_above_the_reference_here(
        self, call_claim, market, medium_grid, solver
    ):
        bench = benchmark_surface(medium_grid, call_claim, market, solver)
        surf = solve_semilinear(
            call_claim, market, medium_grid, solver, side="seller", benchmark=bench
        )
        assert surf.value_at(0.0, 1.0) > bench.value_at(0.0, 1.0)

    def test_comparison_principle_in_the_terminal_data(
        self, call_claim, market, small_grid, solver
    ):
        # same dynamics, same reference surface, terminal data shifted up by
        # 0.01 everywhere => the solution may never drop below the original
        shifted = ClaimSpec.custom(
            [(0.01, 0.01), (1.0, 0.01), (5.0, 4.01)], maturity=1.0
        )
        bench = benchmark_surface(small_grid, call_claim, market, solver)
        lo = solve_semilinear(
            call_claim, market, small_grid, solver, side="seller", benchmark=bench
        )
        hi = solve_semilinear(
            shifted, market, small_grid, solver, side="seller", benchmark=bench
        )
        assert np.min(hi.values - lo.values) > -1e-10

    def test_edges_stay_on_the_linear_extension(
        self, call_claim, market, small_grid, solver
    ):
        surf = solve_semilinear(call_claim, market, small_grid, solver, side="seller")
        v = surf.values[:-1]  # last row is raw payoff data, not a solved slice
        left = np.abs(v[:, 0] - 2.0 * v[:, 1] + v[:, 2])
        right = np.abs(v[:, -1] - 2.0 * v[:, -2] + v[:, -3])
        assert left.max() < 1e-12
        assert right.max() < 1e-12

    def test_bitwise_deterministic(self, call_claim, market, solver, backend):
        grid = build_grid(call_claim, market, n_x=201, n_t=50)
        a = solve_semilinear(call_claim, market, grid, solver, side="buyer")
        b = solve_semilinear(call_claim, market, grid, solver, side="buyer")
        assert np.array_equal(a.values, b.values)

    def test_picard_settles_fast_on_the_base_market(
        self, call_claim, market, small_grid, solver
    ):
        surf = solve_semilinear(call_claim, market, small_grid, solver, side="seller")
        assert surf.diagnostics is not None
        assert surf.diagnostics.max_iterations() <= 5

    def test_starving_the_iteration_raises(
        self, call_claim, market, small_grid, backend
    ):
        solver = SolverConfig(picard_tol=1e-12, picard_max_iter=1)
        bench = benchmark_surface(small_grid, call_claim, market, solver)
        with pytest.raises(PicardConvergenceError) as exc:
            solve_semilinear(
                call_claim, market, small_grid, solver, side="seller", benchmark=bench
            )
        assert exc.value.step_index >= 0
        assert exc.value.iterations == 1
        assert exc.value.residual > 1e-12
        assert 0.0 <= exc.value.t < 1.0

    def test_one_halving_shrinks_the_error_about_fourfold(
        self, call_claim, market, solver
    ):
        # second-order scheme: error ratio between (201,100) and (401,200)
        # sits near 4 (measured 4.008); the acceptance suite fits the full
        # convergence order over three halvings
        from xvaband import bs_closed_form

        errs = []
        exact = bs_closed_form(0.0, 1.0, call_claim, market.r_D, market.sigma)
        for n_x, n_t in [(201, 100), (401, 200)]:
            grid = build_grid(call_claim, market, n_x=n_x, n_t=n_t)
            bench = benchmark_surface(grid, call_claim, market, solver)
            errs.append(abs(bench.value_at(0.0, 1.0) - exact))
        ratio = errs[0] / errs[1]
        assert 3.0 < ratio < 5.0

    def test_rejects_bad_side(self, call_claim, market, small_grid):
        with pytest.raises(ValueError, match="side"):
            solve_semilinear(call_claim, market, small_grid, side="dealer")

    def test_rejects_maturity_mismatch(self, market, small_grid):
        claim = ClaimSpec.call(strike=1.0, maturity=0.5)
        with pytest.raises(ValueError, match="maturity"):
            solve_semilinear(claim, market, small_grid)

    def test_rejects_benchmark_on_another_grid(
        self, call_claim, market, small_grid, solver
    ):
        other = build_grid(call_claim, market, n_x=101, n_t=100)
        bench = benchmark_surface(other, call_claim, market, solver)
        with pytest.raises(ValueError, match="grid"):
            solve_semilinear(
                call_claim, market, small_grid, solver, benchmark=bench
            )

    def test_rejects_benchmark_on_another_schedule(
        self, call_claim, market, small_grid
    ):
        bench = benchmark_surface(
            small_grid, call_claim, market, SolverConfig(rannacher=False)
        )
        with pytest.raises(ValueError, match="SolverConfig"):
            solve_semilinear(
                call_claim, market, small_grid, SolverConfig(), benchmark=bench
            )

    def test_arbitrage_configs_need_the_override(
        self, call_claim, market, small_grid, solver
    ):
        bad = replace(market, r_f_minus=0.2)
        with pytest.raises(ArbitrageViolationError):
            solve_semilinear(call_claim, bad, small_grid, solver)
        with pytest.warns(RuntimeWarning, match="arbitrage"):
            surf = solve_semilinear(
                call_claim, bad, small_grid, solver, allow_arbitrage=True
            )
        assert np.isfinite(surf.values).all()
