import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from corrnoise.errors import BoundsUnavailable, ParameterError
from corrnoise.spectra import eigenvalues, validate_correlation
from corrnoise.templates import (
    CorrelationTemplate,
    GroupSpec,
    Kind,
    analytic_bounds,
    build_template,
    hub_first_row,
    hub_lambda1_first_row,
    hub_lambda1_rowsum,
    hub_lambdaN_lower,
    poisson_kernel,
    shift_part,
    shifted_block_matrix,
)

TABLE1 = CorrelationTemplate.constant((100, 50, 80), (0.7, 0.7, 0.4), delta=0.25)


@st.composite
def constant_templates(draw, min_size=1):
    k = draw(st.integers(1, 4))
    sizes = draw(st.lists(st.integers(min_size, 25), min_size=k, max_size=k))
    rhos = draw(st.lists(st.floats(0.0, 0.95), min_size=k, max_size=k))
    delta = draw(st.floats(0.0, 1.0)) * min(rhos) * 0.99
    return CorrelationTemplate.constant(sizes, rhos, delta)


@st.composite
def toeplitz_templates(draw):
    k = draw(st.integers(1, 3))
    sizes = draw(st.lists(st.integers(1, 40), min_size=k, max_size=k))
    rhos = draw(st.lists(st.floats(0.0, 0.95), min_size=k, max_size=k))
    return CorrelationTemplate.toeplitz(sizes, rhos)


@st.composite
def hub_templates(draw):
    k = draw(st.integers(1, 3))
    groups = []
    for _ in range(k):
        g = draw(st.integers(3, 40))
        rho = draw(st.floats(0.0, 0.9))
        tau = draw(st.floats(0.0, 1.0)) * min((1 - rho) / 0.75 * 0.99, rho / (g - 2))
        groups.append(GroupSpec(Kind.HUB, g, rho, tau))
    return CorrelationTemplate(tuple(groups))


any_template = st.one_of(constant_templates(), toeplitz_templates(), hub_templates())


class TestBuildTemplate:
    def test_constant_block(self):
        t = CorrelationTemplate.constant((3,), (0.5,))
        np.testing.assert_array_equal(build_template(t).dense, [[1, .5, .5], [.5, 1, .5], [.5, .5, 1]])

    def test_toeplitz_first_row(self):
        t = CorrelationTemplate.toeplitz((4,), (0.9,))
        np.testing.assert_allclose(build_template(t).dense[0], [1, 0.9, 0.81, 0.729])

    def test_hub_first_row(self):
        t = CorrelationTemplate((GroupSpec(Kind.HUB, 4, 0.7, 0.2),))
        np.testing.assert_allclose(build_template(t).dense[0], [1, 0.7, 0.5, 0.3])

    def test_off_block_entries(self):
        m = build_template(TABLE1).dense
        assert np.all(m[:100, 100:] == 0.25)
        assert np.all(m[100:150, 150:] == 0.25)
        tt = build_template(CorrelationTemplate.toeplitz((3, 2), (0.5, 0.5))).dense
        assert np.all(tt[:3, 3:] == 0)

    def test_shape_and_labels(self):
        assert TABLE1.n == 230
        assert list(np.bincount(TABLE1.labels)[1:]) == [100, 50, 80]

    def test_rejects_mixed_kinds(self):
        with pytest.raises(ParameterError):
            CorrelationTemplate((GroupSpec(Kind.CONSTANT, 3, 0.5), GroupSpec(Kind.TOEPLITZ, 3, 0.5)))

    def test_rejects_bad_delta(self):
        with pytest.raises(ParameterError):
            CorrelationTemplate.constant((3, 3), (0.5, 0.3), delta=0.3)
        with pytest.raises(ParameterError):
            CorrelationTemplate((GroupSpec(Kind.TOEPLITZ, 3, 0.5),), delta=0.1)

    def test_rejects_bad_rho(self):
        for bad in (1.0, -0.1):
            with pytest.raises(ParameterError):
                GroupSpec(Kind.CONSTANT, 3, bad)

    def test_rejects_hub_leaving_range(self):
        with pytest.raises(ParameterError):
            GroupSpec(Kind.HUB, 10, 0.5, 0.3)

    def test_zero_rho_group_forces_zero_delta(self):
        with pytest.raises(ParameterError):
            CorrelationTemplate.constant((2, 2), (0.0, 0.5), delta=0.1)
        t = CorrelationTemplate.constant((2, 2), (0.0, 0.5))
        assert validate_correlation(build_template(t)).positive_definite

    @settings(max_examples=60, deadline=None)
    @given(any_template)
    def test_templates_are_pd_correlations(self, t):
        r = validate_correlation(build_template(t))
        assert r.valid and r.positive_definite and math.isfinite(r.condition_number)


class TestHubFirstRow:
    def test_linear(self):
        np.testing.assert_allclose(hub_first_row(4, 0.7, 0.3, 1), [1, 0.7, 0.5, 0.3])

    def test_endpoints_only(self):
        np.testing.assert_allclose(hub_first_row(3, 0.6, 0.1, 2), [1, 0.6, 0.1])

    def test_quadratic(self):
        expected = [1, 0.8, 0.8 - 0.8 / 9, 0.8 - 0.8 * 4 / 9, 0]
        np.testing.assert_allclose(hub_first_row(5, 0.8, 0.0, 2), expected, atol=1e-15)

    def test_rejects_small_g(self):
        with pytest.raises(ParameterError):
            hub_first_row(2, 0.5, 0.2, 1)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(3, 50), st.floats(-0.9, 0.9), st.floats(0, 1), st.floats(0.1, 5))
    def test_monotone_with_fixed_ends(self, g, hi, frac, gamma):
        lo = hi - frac * (hi + 0.95)
        row = hub_first_row(g, hi, lo, gamma)
        assert row[0] == 1 and row[1] == pytest.approx(hi) and row[-1] == pytest.approx(lo)
        assert np.all(np.diff(row[1:]) <= 1e-15)

    def test_nonlinear_group_builds_from_row(self):
        g = GroupSpec.hub(5, 0.8, 0.0, gamma=2)
        np.testing.assert_allclose(g.first_row(), hub_first_row(5, 0.8, 0.0, 2))


class TestAnalyticBounds:
    def test_constant_table1(self):
        b = analytic_bounds(TABLE1)
        assert b.epsilon_max == pytest.approx(0.3)
        assert b.lambda1_upper == 231
        # (230 * 1.29 + 1) / 0.01
        assert b.kappa_bound(0.29) == pytest.approx(29770.0, rel=1e-9)

    def test_toeplitz(self):
        b = analytic_bounds(CorrelationTemplate.toeplitz((10,), (0.9,)))
        assert b.lambda1_upper == pytest.approx(19)
        assert b.lambdaN_lower == pytest.approx(1 / 19)
        assert b.epsilon_max == pytest.approx(0.0526, abs=1e-4)

    def test_toeplitz_kappa_example(self):
        b = analytic_bounds(CorrelationTemplate.toeplitz((50,), (0.5,)))
        assert b.kappa_bound(0.3) == pytest.approx((3 + 49 * 0.3) / (1 / 3 - 0.3))
        assert b.kappa_bound(0.3) == pytest.approx(531.0)

    def test_hub_lambda_n(self):
        t = CorrelationTemplate((GroupSpec(Kind.HUB, 10, 0.7, 0.05),))
        assert hub_lambdaN_lower(t) == pytest.approx(0.2625)
        assert analytic_bounds(t).lambdaN_lower == pytest.approx(0.2625)

    def test_hub_nonlinear_unavailable(self):
        t = CorrelationTemplate.hub((10,), (0.7,), (0.1,), gamma=2.0)
        with pytest.raises(BoundsUnavailable):
            analytic_bounds(t)

    def test_hub_negative_row_unavailable(self):
        t = CorrelationTemplate.hub((20,), (0.3,), (-0.4,))
        with pytest.raises(BoundsUnavailable):
            analytic_bounds(t)

    def test_kappa_infinite_at_limit(self):
        b = analytic_bounds(TABLE1)
        assert math.isinf(b.kappa_bound(b.epsilon_max))

    @settings(max_examples=80, deadline=None)
    @given(any_template)
    def test_certificate_soundness(self, t):
        b = analytic_bounds(t)
        v = eigenvalues(build_template(t)).values
        assert b.lambdaN_lower <= v[-1] + 1e-9
        assert v[0] <= b.lambda1_upper + 1e-9

    @settings(max_examples=40, deadline=None)
    @given(any_template, st.floats(0, 1), st.floats(0, 1))
    def test_kappa_bound_monotone(self, t, a, c):
        b = analytic_bounds(t)
        e1, e2 = sorted((a * b.epsilon_max * 0.999, c * b.epsilon_max * 0.999))
        assert b.kappa_bound(e1) <= b.kappa_bound(e2)


class TestBlockSpectrum:
    def test_shifted_equals_template(self):
        np.testing.assert_array_equal(shifted_block_matrix(TABLE1).dense, build_template(TABLE1).dense)

    def test_a_part_eigenvalues(self):
        t = CorrelationTemplate.constant((5,), (0.6,), delta=0.25)
        v = eigenvalues(shift_part(t)).values
        np.testing.assert_allclose(v, [2.15, 0.4, 0.4, 0.4, 0.4], atol=1e-12)

    def test_wrong_kind(self):
        with pytest.raises(ParameterError):
            shifted_block_matrix(CorrelationTemplate.toeplitz((3,), (0.5,)))

    @settings(max_examples=40, deadline=None)
    @given(constant_templates(min_size=2))
    def test_exact_eigenstructure(self, t):
        v = eigenvalues(build_template(t)).values
        assert v[-1] == pytest.approx(1 - t.rho_max, abs=1e-8)
        for g in t.groups:
            hits = np.sum(np.abs(v - (1 - g.rho)) <= 1e-7)
            assert hits >= g.size - 1


class TestToeplitzSpectrum:
    @pytest.mark.parametrize("rho", [0.2, 0.5, 0.8, 0.9])
    @pytest.mark.parametrize("g", [5, 20, 100])
    def test_envelope(self, rho, g):
        v = eigenvalues(build_template(CorrelationTemplate.toeplitz((g,), (rho,)))).values
        assert v[-1] >= (1 - rho) / (1 + rho) and v[0] <= (1 + rho) / (1 - rho)

    def test_lambda1_grows_toward_limit(self):
        lam = [eigenvalues(build_template(CorrelationTemplate.toeplitz((g,), (0.5,)))).largest for g in (20, 50, 200)]
        assert lam[0] <= lam[1] <= lam[2]
        assert 3 - lam[2] < 3 - lam[0]


class TestHubBounds:
    def test_rowsum_bound_holds_where_first_row_fails(self):
        # interior rows of a decaying hub block carry more mass than the first row
        t = CorrelationTemplate.hub((100,), (0.7,), (0.0,))
        lam1 = eigenvalues(build_template(t)).largest
        assert lam1 > hub_lambda1_first_row(t)
        assert lam1 <= hub_lambda1_rowsum(t)

    def test_first_row_formula_exact_without_decay(self):
        t = CorrelationTemplate((GroupSpec(Kind.HUB, 6, 0.4, 0.0),))
        assert eigenvalues(build_template(t)).largest == pytest.approx(hub_lambda1_first_row(t))

    def test_lambda_n_bound_fails_with_negative_row(self):
        # why negative first rows get no analytic certificate
        t = CorrelationTemplate.hub((10,), (0.1,), (-0.3,))
        assert 0.4 < eigenvalues(build_template(t)).smallest < hub_lambdaN_lower(t) - 0.3

    @settings(max_examples=60, deadline=None)
    @given(hub_templates())
    def test_lambda_n_lower_bound(self, t):
        assume(all(g.rho_min >= 0 for g in t.groups))
        assert eigenvalues(build_template(t)).smallest >= hub_lambdaN_lower(t) - 1e-9


class TestPoissonKernel:
    def test_printed_variant(self):
        assert poisson_kernel(0.5, 0.0, variant="single_cosine") == pytest.approx(1.0)

    def test_standard_extremes(self):
        rho = 0.8
        assert poisson_kernel(rho, 0.0) == pytest.approx((1 + rho) / (1 - rho))
        assert poisson_kernel(rho, math.pi) == pytest.approx((1 - rho) / (1 + rho))

    def test_even(self):
        for variant in ("standard", "single_cosine"):
            assert poisson_kernel(0.3, math.pi, variant) == pytest.approx(poisson_kernel(0.3, -math.pi, variant))

    def test_ratio(self):
        r = poisson_kernel(0.8, 0.0) / poisson_kernel(0.8, math.pi)
        assert math.isfinite(r) and r > 1

    def test_rejects_rho(self):
        with pytest.raises(ParameterError):
            poisson_kernel(1.0, 0.0)
