import numpy as np
import pytest

from src.experiment.hypothesis.dp import value_iterate
from src.experiment.hypothesis.errors import PreconditionError
from src.experiment.hypothesis.games import ActionMixture, compute_quantities
from src.experiment.hypothesis.model import Belief, Model
from src.experiment.hypothesis.policies import (
    CHERNOFF,
    GRID,
    PI1,
    PI2,
    Decision,
    PolicyConfig,
    chernoff_decide,
    grid_policy_decide,
    make_policy,
    pi1_decide,
    pi2_decide
)

from .conftest import nds_model, random_model


@pytest.fixture(scope="module")
def nds3():
    model = nds_model(3)
    return model, compute_quantities(model, 0.9, 100.0)


class TestDecision:
    def test_exactly_one_kind(self):
        with pytest.raises(ValueError):
            Decision()
        with pytest.raises(ValueError):
            Decision(mixture=ActionMixture.point_mass(1, 0), hypothesis=0)

    def test_declare(self):
        decision = Decision.declare(1)
        assert decision.is_declare and decision.hypothesis == 1


class TestPolicyConfig:
    def test_rejects_small_L(self, bsc_quantities):
        with pytest.raises(PreconditionError):
            PolicyConfig(L=1.0, threshold_rho=0.9, quantities=bsc_quantities)

    def test_rejects_threshold(self, bsc_quantities):
        with pytest.raises(PreconditionError):
            PolicyConfig(L=100.0, threshold_rho=1.0, quantities=bsc_quantities)

    def test_declare_level(self, bsc_quantities):
        assert PolicyConfig(L=100.0, threshold_rho=0.9, quantities=bsc_quantities).declare_level == pytest.approx(0.99)


class TestTwoPhasePolicies:
    def test_explores_below_threshold(self, nds3):
        _, quantities = nds3
        config = PolicyConfig(L=100.0, threshold_rho=0.9, quantities=quantities)
        decision = pi2_decide(config, Belief.uniform(3))
        assert decision.mixture is quantities.eta0
        assert pi1_decide(config, Belief.uniform(3)).mixture is quantities.mu0

    def test_confirms_above_threshold(self, nds3):
        _, quantities = nds3
        config = PolicyConfig(L=100.0, threshold_rho=0.9, quantities=quantities)
        belief = Belief.from_values([0.05, 0.95, 0.0])
        assert pi2_decide(config, belief).mixture is quantities.eta[1]
        assert pi1_decide(config, belief).mixture is quantities.mu[1]

    def test_declares_at_level(self, nds3):
        _, quantities = nds3
        config = PolicyConfig(L=100.0, threshold_rho=0.9, quantities=quantities)
        decision = pi2_decide(config, Belief.from_values([0.0, 0.005, 0.995]))
        assert decision.is_declare and decision.hypothesis == 2

    def test_threshold_boundary_is_inclusive(self, nds3):
        _, quantities = nds3
        config = PolicyConfig(L=100.0, threshold_rho=0.9, quantities=quantities)
        assert pi2_decide(config, Belief.from_values([0.9, 0.1, 0.0])).mixture is quantities.eta[0]


class TestChernoff:
    def test_samples_leader_mixture(self, nds3):
        _, quantities = nds3
        config = PolicyConfig(L=100.0, threshold_rho=0.9, quantities=quantities)
        assert chernoff_decide(config, Belief.from_values([0.2, 0.5, 0.3])).mixture is quantities.mu[1]

    def test_ties_pick_lowest_index(self, nds3):
        _, quantities = nds3
        config = PolicyConfig(L=100.0, threshold_rho=0.9, quantities=quantities)
        assert chernoff_decide(config, Belief.uniform(3)).mixture is quantities.mu[0]

    def test_declares(self, nds3):
        _, quantities = nds3
        config = PolicyConfig(L=100.0, threshold_rho=0.9, quantities=quantities)
        assert chernoff_decide(config, Belief.from_values([0.995, 0.005, 0.0])).hypothesis == 0


def phase(decision: Decision, quantities, phase1: str = "eta0", phase2: str = "eta"):
    """(kind, hypothesis) of a decision, with the sampled mixture identified by its slot in `quantities`."""
    if decision.is_declare:
        return "declare", decision.hypothesis
    if decision.mixture is getattr(quantities, phase1):
        return phase1, None
    slots = getattr(quantities, phase2)
    return phase2, next(i for i, mixture in enumerate(slots) if mixture is decision.mixture)


@pytest.fixture(scope="module")
def nds3_relabeled(nds3):
    model, _ = nds3
    perm = [1, 2, 0]
    permuted = Model.from_kernels(model.kernels[:, perm, :])
    return perm, compute_quantities(permuted, 0.9, 100.0)


class TestLabelEquivariance:
    BELIEFS = ([0.2, 0.5, 0.3], [0.05, 0.92, 0.03], [0.004, 0.995, 0.001], [0.0, 0.1, 0.9])

    @pytest.mark.parametrize("decide,slots", [(pi2_decide, ("eta0", "eta")), (pi1_decide, ("mu0", "mu")),
                                              (chernoff_decide, ("mu0", "mu"))])
    def test_relabeling_moves_the_decision(self, nds3, nds3_relabeled, decide, slots):
        _, quantities = nds3
        perm, moved = nds3_relabeled
        config = PolicyConfig(L=100.0, threshold_rho=0.9, quantities=quantities)
        moved_config = PolicyConfig(L=100.0, threshold_rho=0.9, quantities=moved)

        for probs in self.BELIEFS:
            kind, index = phase(decide(config, Belief.from_values(probs)), quantities, *slots)
            moved_kind, moved_index = phase(
                decide(moved_config, Belief.from_values(np.asarray(probs)[perm])), moved, *slots)
            assert moved_kind == kind
            assert (moved_index is None and index is None) or perm[moved_index] == index


class TestTwoHypotheses:
    def test_pi2_agrees_with_pi1(self, rng):
        model = random_model(rng, 2, 2, 3)
        quantities = compute_quantities(model, 0.9, 100.0)
        config = PolicyConfig(L=100.0, threshold_rho=0.9, quantities=quantities)
        for rho in np.linspace(0.0, 1.0, 41):
            belief = Belief.from_values([rho, 1.0 - rho])
            first, second = pi1_decide(config, belief), pi2_decide(config, belief)
            assert first.is_declare == second.is_declare
            if first.is_declare:
                assert first.hypothesis == second.hypothesis
            else:
                assert np.allclose(first.mixture.weights, second.mixture.weights, atol=1e-4)


@pytest.fixture(scope="module")
def grid(bsc_model):
    return value_iterate(bsc_model, 100.0, 100)


class TestGridPolicy:
    def test_stops_near_vertex(self, bsc_model, grid):
        decision = grid_policy_decide(grid, bsc_model, 100.0, Belief.from_values([0.999, 0.001]))
        assert decision.is_declare and decision.hypothesis == 0

    def test_samples_at_uniform(self, bsc_model, grid):
        decision = grid_policy_decide(grid, bsc_model, 100.0, Belief.uniform(2))
        assert not decision.is_declare
        assert np.array_equal(decision.mixture.weights, [1.0])

    def test_rejects_mismatched_L(self, bsc_model, grid):
        with pytest.raises(PreconditionError):
            grid_policy_decide(grid, bsc_model, 1000.0, Belief.uniform(2))


class TestMakePolicy:
    def test_policy_ids(self, bsc_model, bsc_quantities):
        config = PolicyConfig(L=100.0, threshold_rho=0.9, quantities=bsc_quantities)
        for policy_id in (PI1, PI2, CHERNOFF):
            policy = make_policy(policy_id, bsc_model, config)
            assert policy.policy_id == policy_id
            assert not policy.decide(Belief.uniform(2)).is_declare

    def test_grid_needs_value_grid(self, bsc_model, bsc_quantities):
        config = PolicyConfig(L=100.0, threshold_rho=0.9, quantities=bsc_quantities)
        with pytest.raises(PreconditionError):
            make_policy(GRID, bsc_model, config)

    def test_unknown_policy(self, bsc_model, bsc_quantities):
        config = PolicyConfig(L=100.0, threshold_rho=0.9, quantities=bsc_quantities)
        with pytest.raises(PreconditionError):
            make_policy("greedy", bsc_model, config)
