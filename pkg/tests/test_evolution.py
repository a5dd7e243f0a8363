import numpy as np
import pytest

from evofam.errors import ConfigurationError, DomainError
from evofam.evolution import (PropagatorEngine, cocycle_defect,
                              derivative_defect, growth_bound,
                              extrapolated_propagate, observed_orders,
                              product_formula_errors)
from evofam.semigroup import FrozenOperator
from evofam.spectral import Grid, GridFunction, extrapolated_norm, mode, norm, \
    random_band_limited
from evofam.symbols import CoefficientFunction, SymbolSpec, constant


@pytest.fixture(scope="module")
def engine(td1, grid):
    return PropagatorEngine(td1, grid)


class TestExactPropagator:
    def test_oscillating_mode_closed_form(self, engine, grid):
        # integral of (2 + sin tau) over [0, pi] is 2 pi + 2; plus a0 = 1 gives pi
        out = engine.propagate(0.0, np.pi, mode(grid, 1))
        assert norm(out) == pytest.approx(np.exp(-(3.0 * np.pi + 2.0)), rel=1e-12)

    def test_identity_at_equal_times(self, engine, grid, rng):
        f = random_band_limited(grid, rng)
        out = engine.propagate(1.2, 1.2, f)
        assert np.allclose(out.values, f.values)

    def test_autonomous_reduces_to_semigroup(self, h1, grid, rng):
        eng = PropagatorEngine(h1, grid)
        f = random_band_limited(grid, rng, band=8)
        from evofam.semigroup import frozen_semigroup
        direct = frozen_semigroup(FrozenOperator(h1, 0.0), 0.6, f)
        via_engine = eng.propagate(0.2, 0.8, f)
        assert np.allclose(direct.values, via_engine.values)

    def test_time_order_enforced(self, engine, grid):
        with pytest.raises(DomainError):
            engine.propagate(2.0, 1.0, mode(grid, 0))

    def test_antiderivative_self_check_catches_lies(self):
        # a coefficient whose antiderivative is deliberately inconsistent
        class Broken(CoefficientFunction):
            def antiderivative(self, t):
                return np.zeros_like(np.asarray(t), dtype=complex)[()]
        bad = SymbolSpec(dim=1, order=2, horizon=1.0, coefficients={
            (2,): Broken(const=-1.0), (0,): Broken(const=1.0)})
        with pytest.raises(ConfigurationError):
            PropagatorEngine(bad, Grid(1, 64, 2 * np.pi))

    def test_step_symbol_quadrature_splits_panels(self, grid):
        step = SymbolSpec(dim=1, order=2, horizon=2.0, coefficients={
            (2,): CoefficientFunction(const=-2.0, steps=((1.0, -1.0),)),
            (0,): constant(1.0)})
        eng = PropagatorEngine(step, grid)    # construction self-check passes
        out = eng.propagate(0.5, 1.5, mode(grid, 1))
        # xi^2 weight integrates to 2*0.5 + 3*0.5 = 2.5; a0 adds the length 1
        assert norm(out) == pytest.approx(np.exp(-3.5), rel=1e-12)


class TestCocycle:
    def test_exact_engine_additivity(self, engine, grid, rng):
        f = random_band_limited(grid, rng, band=4)
        for _ in range(20):
            r, s, t = np.sort(rng.uniform(0.0, engine.spec.horizon, 3))
            assert cocycle_defect(engine, r, s, t, f) <= 1e-10

    def test_zero_vector(self, engine, grid):
        z = GridFunction(grid, "frequency", np.zeros(grid.shape, dtype=complex))
        assert cocycle_defect(engine, 0.1, 0.5, 1.0, z) == 0.0

    def test_product_engine_first_order_defect(self, td1, grid, rng):
        f = random_band_limited(grid, rng, band=4)
        defects = []
        for n in (64, 128):
            eng = PropagatorEngine(td1, grid, method="product", steps=n)
            defects.append(cocycle_defect(eng, 0.0, 1.0, 2.0, f))
        assert 1.6 <= defects[0] / defects[1] <= 2.4

    def test_ordering_enforced(self, engine, grid):
        with pytest.raises(DomainError):
            cocycle_defect(engine, 1.0, 0.5, 2.0, mode(grid, 0))


class TestDerivatives:
    def test_dt_second_order(self, engine, grid):
        f = mode(grid, 1)
        d1 = derivative_defect(engine, 0.3, 2.0, f, h=1e-3, which="dt")
        d2 = derivative_defect(engine, 0.3, 2.0, f, h=5e-4, which="dt")
        assert 3.5 <= d1 / d2 <= 4.5

    def test_ds_second_order(self, engine, grid, rng):
        f = random_band_limited(grid, rng, band=4)
        d1 = derivative_defect(engine, 0.5, 2.0, f, h=1e-3, which="ds")
        d2 = derivative_defect(engine, 0.5, 2.0, f, h=5e-4, which="ds")
        assert 3.5 <= d1 / d2 <= 4.5

    def test_autonomous_matches_frozen_generator_check(self, h1, grid, rng):
        # on an autonomous symbol the evolution-family stencil equals the
        # frozen-semigroup stencil applied at the same elapsed time
        f = random_band_limited(grid, rng, band=4)
        eng = PropagatorEngine(h1, grid)
        h = 1e-3
        via_family = derivative_defect(eng, 0.1, 0.7, f, h=h, which="dt")
        from evofam.semigroup import frozen_semigroup
        op = FrozenOperator(h1, 0.0)
        base = frozen_semigroup(op, 0.6, f)
        plus = frozen_semigroup(op, 0.6 + h, f)
        minus = frozen_semigroup(op, 0.6 - h, f)
        a = np.broadcast_to(h1.on_axes(0.0, grid.xi_axes()), grid.shape)
        resid = (plus.values - minus.values) / (2 * h) + a * base.values
        via_frozen = norm(GridFunction(grid, "frequency", resid))
        assert abs(via_family - via_frozen) <= 1e-8

    def test_zero_vector(self, engine, grid):
        z = GridFunction(grid, "frequency", np.zeros(grid.shape, dtype=complex))
        assert derivative_defect(engine, 0.3, 1.0, z, which="dt") == 0.0

    def test_stencil_domain_guard(self, engine, grid):
        with pytest.raises(DomainError):
            derivative_defect(engine, 0.0, engine.spec.horizon, mode(grid, 0),
                              h=1e-3, which="dt")


class TestGrowthAndGauges:
    def test_oscillating_operator_norm(self, engine):
        # || U(t,s) || = e^{-(t-s)}: the grid max sits at xi = 0
        assert engine.operator_norm(0.5, 2.5) == pytest.approx(np.exp(-2.0))

    def test_growth_certificate(self, engine, rng):
        pairs = [tuple(np.sort(rng.uniform(0.0, engine.spec.horizon, 2)))
                 for _ in range(25)]
        rep = growth_bound(engine, pairs, m=1.0, omega=-1.0)
        assert rep.verdict
        assert rep.max_ratio == pytest.approx(1.0, rel=1e-9)

    def test_trivial_at_equal_times(self, engine):
        assert engine.operator_norm(1.0, 1.0) == pytest.approx(1.0)

    def test_extrapolated_restriction_zero_defect(self, engine, grid, td1, rng):
        f = random_band_limited(grid, rng, band=8)
        out, gnorm, defect = extrapolated_propagate(
            engine, 0.0, 1.5, f, extrapolated_norm(td1, 0.0))
        assert defect == 0.0
        assert gnorm == pytest.approx(norm(out, extrapolated_norm(td1, 0.0)))

    def test_extrapolated_operator_norm_gauge_free(self, engine, grid, td1):
        # diagonal gauges cancel: same operator norm in X and X_{-1} readings
        s, t = 0.3, 1.7
        mult = engine.multiplier(s, t)
        from evofam.spectral import multiplier_operator_norm, extrapolated_norm
        plain = multiplier_operator_norm(lambda xi: mult, grid)
        gauged = multiplier_operator_norm(lambda xi: mult, grid,
                                          extrapolated_norm(td1, 0.0))
        assert plain == gauged


class TestStrongContinuity:
    def test_time_modulus_bounded_by_symbol(self, engine, grid, rng):
        f = random_band_limited(grid, rng, band=4)
        axes = grid.xi_axes()
        band_max = max(abs(engine.spec.eval(t, xi))
                       for t in np.linspace(0, engine.spec.horizon, 32)
                       for xi in np.linspace(-4, 4, 17))
        delta = 1e-3
        out0 = engine.propagate(0.0, 1.0, f)
        out1 = engine.propagate(0.0, 1.0 + delta, f)
        diff = norm(GridFunction(grid, "frequency", out1.values - out0.values))
        assert diff <= band_max * delta * norm(f) * 1.05


class TestProductFormula:
    def test_left_endpoint_first_order(self, td1, grid, rng):
        f = random_band_limited(grid, rng, band=4)
        errs = product_formula_errors(td1, grid, 0.0, 2.0, f, "left",
                                      [64, 128, 256])
        for order in observed_orders(errs):
            assert 0.8 <= order <= 1.2

    def test_midpoint_second_order(self, td1, grid, rng):
        f = random_band_limited(grid, rng, band=4)
        errs = product_formula_errors(td1, grid, 0.0, 2.0, f, "midpoint",
                                      [64, 128, 256])
        for order in observed_orders(errs):
            assert 1.7 <= order <= 2.3

    def test_bad_rule_rejected(self, td1, grid):
        with pytest.raises(ConfigurationError):
            PropagatorEngine(td1, grid, method="product", rule="simpson")


def test_observed_orders_requires_two_errors():
    with pytest.raises(ConfigurationError):
        observed_orders([1.0])
