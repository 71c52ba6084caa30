from dataclasses import replace

import math

import numpy as np
import pytest

from src.experiment.hypothesis.bounds import (
    LOWER_BOUNDS,
    UPPER_BOUNDS,
    BoundParams,
    ReliabilityRegion,
    binary_asymptotic_value,
    evaluate_bounds,
    in_region,
    lb_alpha_form,
    lb_uniform_prior,
    lb_v1,
    lb_v2,
    primal_lower,
    reliability_region,
    submartingale_stopping_bound,
    ub_v1bar,
    ub_v2bar,
    ub_v2bar_pointwise,
    ub_v3,
    ub_v3_feasibility
)
from src.experiment.hypothesis.errors import PreconditionError
from src.experiment.hypothesis.games import FamilyLimits, alpha, compute_quantities, family_limits
from src.experiment.hypothesis.model import LOG2E, Belief, binary_entropy, psi

from .conftest import nds_model


D_BSC = 0.5 * math.log2(3.0)


class TestBoundParams:
    def test_defaults(self):
        params = BoundParams().resolve(100.0, 2)
        assert params.delta == pytest.approx(1.0 / math.log2(400.0))
        assert params.iota == pytest.approx(math.log2(100.0) ** -0.25)
        assert params.chernoff_delta == pytest.approx(math.log2(100.0) ** (-1.0 / 3.0))
        assert params.b == pytest.approx(math.log2(math.log2(200.0)))

    def test_explicit_values_survive_resolve(self):
        params = BoundParams(delta=0.2, b=3.0).resolve(100.0, 2)
        assert params.delta == 0.2 and params.b == 3.0

    @pytest.mark.parametrize("kwargs", [{"delta": 0.7}, {"iota": 1.0}, {"b": 0.0}, {"K2_prime": -1.0},
                                        {"threshold_rho": 0.5}])
    def test_out_of_range(self, kwargs):
        with pytest.raises(PreconditionError):
            BoundParams(**kwargs)


class TestLowerBounds:
    def test_region(self):
        assert in_region(Belief.uniform(2), 100.0)
        assert not in_region(Belief.from_values([0.999, 0.001]), 100.0)

    def test_lb_v1_outside_region(self, bsc_quantities):
        with pytest.raises(PreconditionError):
            lb_v1(Belief.from_values([0.999, 0.001]), 100.0, bsc_quantities, BoundParams())

    def test_lb_v1_bsc_uniform(self, bsc_quantities):
        value = lb_v1(Belief.uniform(2), 100.0, bsc_quantities, BoundParams())
        assert value == pytest.approx(math.log2(99.0) / D_BSC, rel=1e-6)

    def test_lb_alpha_form_bsc_uniform(self, bsc_quantities):
        i_max = bsc_quantities.i_max
        a = alpha(100.0, 2, i_max)
        value = lb_alpha_form(Belief.uniform(2), 100.0, 2, i_max)
        assert value == pytest.approx((1.0 - binary_entropy(a)) / i_max + 100.0 * a, rel=1e-9)
        assert value == pytest.approx(1.0 / i_max, rel=1e-3)

    def test_lb_alpha_form_at_balanced_point(self):
        # rho = (a/(M-1), ..., a/(M-1), 1 - a) has entropy h(a) + a log(M-1).
        L, M, i_max = 10.0, 4, 0.3
        a = alpha(L, M, i_max)
        nu = Belief.from_values([a / (M - 1)] * (M - 1) + [1.0 - a])
        assert lb_alpha_form(nu, L, M, i_max) == pytest.approx(a * L, rel=1e-9)

    def test_lb_v1_needs_separable_pairs(self, bsc_quantities):
        blind = replace(bsc_quantities, pair_max_divergence=np.zeros((2, 2)))
        with pytest.raises(PreconditionError):
            lb_v1(Belief.uniform(2), 100.0, blind, BoundParams())

    def test_lb_v1_not_applicable_in_report(self, bsc_model, bsc_quantities):
        blind = replace(bsc_quantities, pair_max_divergence=np.zeros((2, 2)))
        report = evaluate_bounds(Belief.uniform(2), 100.0, blind, BoundParams(), bsc_model)
        assert report.lb_v1 == 0.0
        assert any(note.startswith("lb_v1: not applicable") for note in report.notes)

    def test_lb_alpha_form_vanishes_at_vertex(self, bsc_quantities):
        value = lb_alpha_form(Belief.point_mass(2, 0), 100.0, 2, bsc_quantities.i_max)
        assert value == pytest.approx(0.0, abs=1e-3)

    def test_lb_v2_regime(self, bsc_quantities):
        with pytest.raises(PreconditionError):
            lb_v2(Belief.uniform(2), 2.0, bsc_quantities, BoundParams())

    def test_lb_v2_dominates_uniform_prior_form(self, bsc_quantities):
        for L in (100.0, 1000.0):
            v2 = lb_v2(Belief.uniform(2), L, bsc_quantities, BoundParams())
            uniform = lb_uniform_prior(2, L, family_limits([bsc_quantities]))
            assert v2 >= uniform - 1e-12

    def test_lower_bounds_below_pi2_upper_bound(self, bsc_model, bsc_quantities):
        for probs in ([0.5, 0.5], [0.7, 0.3], [0.2, 0.8]):
            belief = Belief.from_values(probs)
            upper = ub_v2bar(belief, 100.0, bsc_quantities, BoundParams())
            assert lb_alpha_form(belief, 100.0, 2, bsc_quantities.i_max) <= upper
            assert lb_v1(belief, 100.0, bsc_quantities, BoundParams()) <= upper


class TestUpperBounds:
    def test_ub_v2bar_bsc_uniform(self, bsc_quantities):
        params = BoundParams()
        expected = (1.0 + math.log2(9.0) + math.log2(3.0) + LOG2E) / D_BSC + math.log2(100.0) / D_BSC + 1.0
        assert ub_v2bar(Belief.uniform(2), 100.0, bsc_quantities, params) == pytest.approx(expected, rel=1e-6)

    def test_pointwise_form_never_exceeds_plain(self, bsc_quantities):
        params = BoundParams()
        for p in np.linspace(0.0, 1.0, 21):
            belief = Belief.from_values([p, 1.0 - p])
            assert (ub_v2bar_pointwise(belief, 100.0, bsc_quantities, params)
                    <= ub_v2bar(belief, 100.0, bsc_quantities, params) + 1e-9)

    def test_refined_falls_back(self, bsc_quantities):
        quantities = replace(bsc_quantities, i_eta_threshold=bsc_quantities.i_eta0)
        belief = Belief.uniform(2)
        params = BoundParams()
        assert (ub_v2bar(belief, 100.0, quantities, params, refined=True)
                == ub_v2bar(belief, 100.0, quantities, params))

    def test_refined_form(self, bsc_quantities):
        quantities = replace(bsc_quantities, i_eta0=1.0, i_eta_threshold=0.5)
        rho_t = 0.9
        expected = ((1.0 + math.log2(9.0) + math.log2(3.0)) / 1.0
                    + math.log2(100.0) / D_BSC
                    + ((1.0 - rho_t) * 1.0 + (2.0 - rho_t) * math.log2(3.0) + 4.0 + LOG2E) / 0.5
                    + 1.0)
        value = ub_v2bar(Belief.uniform(2), 100.0, quantities, BoundParams(), refined=True)
        assert value == pytest.approx(expected, rel=1e-6)

    def test_ub_v3_with_b_at_xi_matches_ub_v2bar(self, bsc_model, bsc_quantities):
        params = BoundParams(b=bsc_model.xi)
        belief = Belief.from_values([0.3, 0.7])
        assert (ub_v3(belief, 100.0, bsc_quantities, params, bsc_model)
                == pytest.approx(ub_v2bar(belief, 100.0, bsc_quantities, params), abs=1e-9))

    def test_ub_v3_infeasible(self, bsc_model, bsc_quantities):
        params = BoundParams(b=0.01)
        assert math.isinf(ub_v3(Belief.uniform(2), 100.0, bsc_quantities, params, bsc_model))
        feasible, _ = ub_v3_feasibility(bsc_quantities, psi(bsc_model, 0.01), 0.01)
        assert not feasible

    def test_ub_v1bar(self, bsc_quantities):
        belief = Belief.uniform(2)
        value = ub_v1bar(belief, 100.0, bsc_quantities, BoundParams())
        assert math.isfinite(value)
        assert value >= lb_alpha_form(belief, 100.0, 2, bsc_quantities.i_max)

    def test_ub_v1bar_vacuous_without_i1(self, bsc_quantities):
        quantities = replace(bsc_quantities, i_1=0.0)
        assert math.isinf(ub_v1bar(Belief.uniform(2), 100.0, quantities, BoundParams()))


class TestEvaluateBounds:
    def test_report(self, bsc_model, bsc_quantities):
        quantities = replace(bsc_quantities, i_eta_threshold=bsc_quantities.i_eta0)
        report = evaluate_bounds(Belief.uniform(2), 100.0, quantities, BoundParams(), bsc_model)
        values = report.values()
        assert list(values) == list(LOWER_BOUNDS + UPPER_BOUNDS)
        assert all(v >= 0 for v in values.values())
        assert values["ub_v2bar_pointwise"] <= values["ub_v2bar"] + 1e-9
        assert any(note.startswith("ub_v2bar_refined") for note in report.notes)

        frame = report.to_frame(100.0)
        assert list(frame.columns) == ["L", "bound", "value"]
        assert len(frame) == len(LOWER_BOUNDS) + len(UPPER_BOUNDS)

    def test_failed_precondition_reads_as_zero(self, bsc_model, bsc_quantities):
        report = evaluate_bounds(Belief.from_values([0.999, 0.001]), 100.0, bsc_quantities, BoundParams(), bsc_model)
        assert report.lb_v1 == 0.0
        assert any(note.startswith("lb_v1: not applicable") for note in report.notes)

    def test_vacuous_upper_bound_is_noted(self, bsc_model, bsc_quantities):
        report = evaluate_bounds(Belief.uniform(2), 100.0, bsc_quantities, BoundParams(b=0.01), bsc_model)
        assert math.isinf(report.ub_v3bar)
        assert any(note.startswith("ub_v3bar: infeasible") for note in report.notes)


class TestAuxiliaryBounds:
    def test_submartingale_bound(self):
        value = submartingale_stopping_bound(10.0, -2.0, 0.5, 1.0, 2.0)
        assert value == pytest.approx(12.0 + 2.0 + (2.0 + LOG2E) / 0.5)

    def test_submartingale_bound_ordering(self):
        with pytest.raises(PreconditionError):
            submartingale_stopping_bound(10.0, 0.0, 1.0, 0.5, 2.0)
        with pytest.raises(PreconditionError):
            submartingale_stopping_bound(1.0, 3.0, 0.5, 1.0, 2.0)

    def test_primal_lower(self):
        assert primal_lower(10.0, 100.0, 0.001) == pytest.approx(0.9 * 9.0)
        with pytest.raises(PreconditionError):
            primal_lower(10.0, 100.0, 1.5)

    def test_binary_asymptotic_value(self, bsc_model):
        value = binary_asymptotic_value(Belief.uniform(2), 1024.0, bsc_model)
        assert value == pytest.approx(10.0 / D_BSC)
        with pytest.raises(PreconditionError):
            binary_asymptotic_value(Belief.point_mass(2, 0), 1024.0, bsc_model)

    def test_reliability_region(self, bsc_quantities):
        region = reliability_region([bsc_quantities])
        curves = region.curves(11)
        assert list(curves.columns) == ["R", "E_upper", "E_achievable"]
        assert curves["E_upper"].iloc[0] == pytest.approx(D_BSC)
        assert curves["E_upper"].iloc[-1] == pytest.approx(0.0, abs=1e-12)

    def test_upper_line_dominates_achievable_line(self):
        limits = FamilyLimits(d_max_sup=1.2, d_max_inf=0.8, i_max_sup=0.19, i_max_inf=0.1,
                              i2_inf=0.15, d2_inf=0.7, xi_sup=1.6)
        region = ReliabilityRegion(limits=limits)
        rate = np.linspace(0.0, limits.i2_inf, 51)
        assert np.all(region.upper(rate) >= region.achievable(rate))
        assert region.achievable(limits.i2_inf) == pytest.approx(0.0)

    def test_family_reliability_ordering(self):
        family = [compute_quantities(nds_model(M), 0.9, 100.0) for M in (2, 3, 4)]
        limits = reliability_region(family).limits
        assert limits.d2_inf <= limits.d_max_sup
        assert limits.i2_inf > 0
