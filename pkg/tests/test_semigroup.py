import numpy as np
import pytest

from evofam.errors import ConfigurationError, DomainError, NumericError
from evofam.semigroup import (FavardEstimate, FrozenOperator, favard_norm,
                              frozen_resolvent, frozen_semigroup,
                              gauss_legendre_panels, laplace_tail_bound,
                              laplace_transform_check,
                              generator_difference_quotient)
from evofam.spectral import (GridFunction, extrapolated_norm, mode,
                             multiplier_operator_norm, norm,
                             random_band_limited)


@pytest.fixture()
def op_h1(h1):
    return FrozenOperator(h1, 0.0)


class TestFrozenSemigroup:
    def test_identity_at_zero(self, op_h1, grid, rng):
        f = random_band_limited(grid, rng)
        out = frozen_semigroup(op_h1, 0.0, f)
        assert np.allclose(out.values, f.values)

    def test_single_mode_decay(self, op_h1, grid):
        out = frozen_semigroup(op_h1, 1.0, mode(grid, 1))
        assert norm(out) == pytest.approx(np.exp(-2.0))

    def test_semigroup_law(self, op_h1, grid, rng):
        f = random_band_limited(grid, rng)
        one = frozen_semigroup(op_h1, 0.7, frozen_semigroup(op_h1, 0.4, f))
        two = frozen_semigroup(op_h1, 1.1, f)
        diff = GridFunction(grid, "frequency", one.values - two.values)
        assert norm(diff) <= 1e-12 * norm(f)

    def test_negative_time_rejected(self, op_h1, grid):
        with pytest.raises(DomainError):
            frozen_semigroup(op_h1, -0.1, mode(grid, 0))

    def test_frozen_time_of_nonautonomous(self, td1, grid):
        op = FrozenOperator(td1, np.pi / 2)
        out = frozen_semigroup(op, 0.5, mode(grid, 1))
        assert norm(out) == pytest.approx(np.exp(-0.5 * 4.0))


class TestFrozenResolvent:
    def test_single_mode(self, op_h1, grid):
        out = frozen_resolvent(op_h1, 1.0, mode(grid, 2))
        assert norm(out) == pytest.approx(1.0 / 6.0)

    def test_resolvent_identity(self, op_h1, grid, rng):
        f = random_band_limited(grid, rng)
        lam, mu = 1.3 + 0.4j, 0.2 - 1.1j
        lhs = frozen_resolvent(op_h1, lam, f).values \
            - frozen_resolvent(op_h1, mu, f).values
        rhs = (mu - lam) * frozen_resolvent(
            op_h1, lam, frozen_resolvent(op_h1, mu, f)).values
        assert norm(GridFunction(grid, "frequency", lhs - rhs)) <= 1e-12 * norm(f)

    def test_inverts_generator_shift(self, op_h1, grid, rng):
        f = random_band_limited(grid, rng)
        lam = 0.8
        rf = frozen_resolvent(op_h1, lam, f)
        # (lambda - A) R(lambda) f = f
        back = lam * rf.values - op_h1.apply(rf).values
        assert norm(GridFunction(grid, "frequency", back - f.values)) \
            <= 1e-12 * norm(f)

    def test_singular_bin_detected(self, op_h1, grid):
        with pytest.raises(NumericError):
            frozen_resolvent(op_h1, -1.0, mode(grid, 0))   # lambda + a = 0


class TestLaplaceTransform:
    def test_zero_mode_closed_form(self, op_h1, grid):
        # integral of e^{-2 tau} e^{-tau} over [0, inf) = 1/3 = resolvent value
        res = laplace_transform_check(op_h1, 2.0, mode(grid, 0), 40.0, 64)
        assert res <= 1e-10

    def test_band_limited_contract(self, op_h1, grid, rng):
        f = random_band_limited(grid, rng, band=4)
        res = laplace_transform_check(op_h1, 2.0, f, 40.0, 64)
        tail = laplace_tail_bound(2.0 + 0j, 1.0, 40.0, norm(f))
        assert res <= tail + 1e-8

    def test_tail_dominated_decay(self, op_h1, grid):
        # at lambda = 0.5 the truncation tail dominates the quadrature floor,
        # so doubling H drops the residual by the tail ratio e^{-15} >> 1e3
        f = mode(grid, 0)
        r10 = laplace_transform_check(op_h1, 0.5, f, 10.0, 64)
        r20 = laplace_transform_check(op_h1, 0.5, f, 20.0, 64)
        tail10 = laplace_tail_bound(0.5 + 0j, 1.0, 10.0, 1.0)
        assert r10 <= tail10
        assert r10 / max(r20, 1e-300) >= 1e3

    def test_bad_horizon(self, op_h1, grid):
        with pytest.raises(DomainError):
            laplace_transform_check(op_h1, 2.0, mode(grid, 0), -1.0, 8)

    def test_gl_panel_weights_sum(self):
        nodes, weights = gauss_legendre_panels(0.0, 3.0, 5, nodes=6)
        assert np.sum(weights) == pytest.approx(3.0)
        assert nodes.min() > 0.0 and nodes.max() < 3.0


class TestGeneratorQuotient:
    def test_taylor_constant(self, op_h1, grid):
        # mode 1 on H1: defect ~ (h/2) |a|^2 with a = 2
        d = generator_difference_quotient(op_h1, mode(grid, 1), 1e-3)
        assert d == pytest.approx(2e-3, rel=0.2)

    def test_first_order_in_h(self, op_h1, grid, rng):
        f = random_band_limited(grid, rng, band=4)
        d1 = generator_difference_quotient(op_h1, f, 1e-3)
        d2 = generator_difference_quotient(op_h1, f, 5e-4)
        assert 1.8 <= d1 / d2 <= 2.2

    def test_zero_vector(self, op_h1, grid):
        z = GridFunction(grid, "frequency", np.zeros(grid.shape, dtype=complex))
        assert generator_difference_quotient(op_h1, z, 1e-3) == 0.0


class TestFavard:
    def test_f1_single_mode(self, op_h1, grid):
        est = favard_norm(op_h1, mode(grid, 1), "F1")
        assert est.value == pytest.approx(2.0, rel=0.01)

    def test_f1_matches_generator_norm(self, op_h1, grid, rng):
        f = random_band_limited(grid, rng, band=4)
        est = favard_norm(op_h1, f, "F1")
        assert est.value == pytest.approx(norm(op_h1.apply(f)), rel=0.01)

    def test_f0_recovers_plain_norm(self, td1, grid, rng):
        f = random_band_limited(grid, rng, band=4)
        op = FrozenOperator(td1, 1.0)
        est = favard_norm(op, f, "F0")
        assert est.value == pytest.approx(norm(f), rel=0.01)

    def test_zero_vector(self, op_h1, grid):
        z = GridFunction(grid, "frequency", np.zeros(grid.shape, dtype=complex))
        assert favard_norm(op_h1, z, "F1").value == 0.0

    def test_monotone_in_samples(self, op_h1, grid):
        f = mode(grid, 3)
        coarse = favard_norm(op_h1, f, "F1", t_samples=2.0 ** -np.arange(5))
        fine = favard_norm(op_h1, f, "F1", t_samples=2.0 ** -np.arange(20))
        assert fine.value >= coarse.value

    def test_empty_samples_rejected(self, op_h1, grid):
        with pytest.raises(ConfigurationError):
            favard_norm(op_h1, mode(grid, 1), "F1", t_samples=np.array([]))


class TestExtrapolationModel:
    def test_extended_semigroup_norm_equality(self, td1, grid):
        # || T_{-1}(t) || = || T(t) || : the max-modulus formula is gauge free
        op = FrozenOperator(td1, 0.5)
        m = lambda xi: np.exp(-0.8 * td1.on_axes(0.5, xi))
        plain = multiplier_operator_norm(m, grid)
        gauged = multiplier_operator_norm(m, grid, op.gauge())
        assert plain == gauged

    def test_generator_isometry_into_extrapolation(self, td1, grid, rng):
        # || A(s) f ||_{-1, s-gauge} = || f ||_2 exactly, for any grid f
        op = FrozenOperator(td1, 1.3)
        f = random_band_limited(grid, rng, band=100)
        assert norm(op.apply(f), op.gauge()) == pytest.approx(norm(f), rel=1e-12)
