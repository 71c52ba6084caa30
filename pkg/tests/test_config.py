import pytest

from src.experiment.config.cli_config import get_bound_params_from_args, setup_cli_parser
from src.experiment.config.experiment_config import (
    create_config,
    get_default_config,
    parse_float_list,
    parse_prior
)
from src.experiment.hypothesis.errors import PreconditionError


class TestParsing:
    def test_prior(self):
        assert parse_prior("uniform") == "uniform"
        assert parse_prior(None) == "uniform"
        assert parse_prior("0.2,0.8") == [0.2, 0.8]

    def test_bad_prior(self):
        with pytest.raises(PreconditionError):
            parse_prior("a,b")

    def test_float_list(self):
        assert parse_float_list("100,1e3") == [100.0, 1000.0]
        with pytest.raises(PreconditionError):
            parse_float_list("100,x")


class TestCreateConfig:
    def test_defaults(self):
        config = create_config()
        assert config.policy == "pi2"
        assert config.threshold_rho == 0.9
        assert config.prior == "uniform"

    def test_environment_override(self, monkeypatch):
        monkeypatch.setenv("HYPOTEST_TRIALS", "37")
        monkeypatch.setenv("HYPOTEST_POLICY", "chernoff")
        config = get_default_config()
        assert config.n_trials == 37
        assert config.policy == "chernoff"

    def test_log_level(self, monkeypatch):
        assert create_config().log_level == "INFO"
        assert create_config(log_level="debug").log_level == "DEBUG"
        monkeypatch.setenv("HYPOTEST_LOG_LEVEL", "warning")
        assert get_default_config().log_level == "WARNING"

    def test_flags_override_environment(self, monkeypatch):
        monkeypatch.setenv("HYPOTEST_SEED", "5")
        assert create_config(master_seed=9).master_seed == 9

    def test_invalid_environment(self, monkeypatch):
        monkeypatch.setenv("HYPOTEST_TRIALS", "many")
        with pytest.raises(PreconditionError):
            get_default_config()

    @pytest.mark.parametrize("kwargs", [
        {"policy": "greedy"},
        {"L_values": [1.0]},
        {"threshold_rho": 0.5},
        {"n_trials": 0},
        {"resolution": 5},
        {"tol": 0.0},
        {"step_cap": 0},
        {"prior": [0.5, 0.6]},
        {"model_path": "does/not/exist.json"},
        {"log_level": "loud"},
        {"prior": [0.5, 0.5 + 1e-10]},
    ])
    def test_rejects(self, kwargs):
        with pytest.raises(PreconditionError):
            create_config(**kwargs)

    def test_prior_values(self):
        config = create_config(prior=[0.25, 0.75])
        assert config.prior_values(2) == [0.25, 0.75]
        with pytest.raises(PreconditionError):
            config.prior_values(3)
        assert create_config().prior_values(4) == [0.25] * 4


class TestBoundArguments:
    def test_defaults(self):
        args = setup_cli_parser().parse_args(["bounds", "--model", "m.json"])
        params = get_bound_params_from_args(args, 0.9)
        assert params.K_prime == 1.0
        assert params.K2_prime == 0.0
        assert params.delta is None and not params.refined

    def test_overrides(self):
        args = setup_cli_parser().parse_args(["sandwich", "--b", "2.5", "--refined", "--K-prime", "3"])
        params = get_bound_params_from_args(args, 0.8)
        assert params.b == 2.5 and params.refined
        assert params.K_prime == 3.0 and params.threshold_rho == 0.8
