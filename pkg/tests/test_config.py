"""Tests for runtime configuration and hyper-parameter records"""

import pytest

from src.config import Config, LossWeights, NetworkConfig, TrainConfig
from src.exceptions import ConfigurationError


class TestEnvironmentConfig:

    def test_defaults(self, monkeypatch):
        for name in ('SUPERPIX_THREADS', 'SUPERPIX_LOG_EVERY', 'SUPERPIX_DEVICE'):
            monkeypatch.delenv(name, raising=False)
        config = Config()
        assert config.threads == 0
        assert config.log_every == 100
        assert config.device == 'cpu'
        assert config.log_format == 'human'

    def test_invalid_integer_falls_back_to_default(self, monkeypatch):
        monkeypatch.setenv('SUPERPIX_LOG_EVERY', 'often')
        assert Config().log_every == 100

    def test_boolean_parsing(self, monkeypatch):
        monkeypatch.setenv('SUPERPIX_LOG_TO_FILE', 'yes')
        assert Config().log_to_file is True
        monkeypatch.setenv('SUPERPIX_LOG_TO_FILE', 'off')
        assert Config().log_to_file is False

    def test_threads_env_overrides_jobs_flag(self, monkeypatch):
        monkeypatch.setenv('SUPERPIX_THREADS', '3')
        assert Config().resolve_jobs(8) == 3

    def test_jobs_flag_used_without_env(self, monkeypatch):
        monkeypatch.delenv('SUPERPIX_THREADS', raising=False)
        assert Config().resolve_jobs(5) == 5

    def test_zero_jobs_means_all_cores(self, monkeypatch):
        monkeypatch.delenv('SUPERPIX_THREADS', raising=False)
        assert Config().resolve_jobs(0) >= 1


class TestLossWeights:

    def test_defaults(self):
        weights = LossWeights()
        assert (weights.lambda_, weights.alpha, weights.beta, weights.eta, weights.sigma) == (2.0, 2.0, 10.0, 1.0, 8.0)
        assert weights.soft_reconstruction is True

    @pytest.mark.parametrize('field_name', ['lambda_', 'alpha', 'beta', 'eta'])
    def test_negative_weight_rejected(self, field_name):
        with pytest.raises(ConfigurationError):
            LossWeights(**{field_name: -0.1})

    def test_zero_weights_allowed(self):
        LossWeights(beta=0.0, eta=0.0)

    @pytest.mark.parametrize('sigma', [0.0, -1.0, float('inf')])
    def test_sigma_must_be_positive_and_finite(self, sigma):
        with pytest.raises(ConfigurationError):
            LossWeights(sigma=sigma)


class TestNetworkConfig:

    def test_defaults(self):
        cfg = NetworkConfig()
        assert cfg.block_channels == [32, 64, 128, 256]
        assert cfg.feature_channels == 480
        assert cfg.dilation_rates == [1, 2, 4, 8]

    def test_single_superpixel_rejected(self):
        with pytest.raises(ConfigurationError):
            NetworkConfig(n_superpixels=1)

    def test_empty_dilation_rates_rejected(self):
        with pytest.raises(ConfigurationError):
            NetworkConfig(dilation_rates=[])

    def test_zero_dilation_rejected(self):
        with pytest.raises(ConfigurationError):
            NetworkConfig(dilation_rates=[1, 0])

    def test_last_block_only_channels(self):
        assert NetworkConfig(concat_all_blocks=False).feature_channels == 256

    def test_dict_round_trip(self):
        cfg = NetworkConfig(n_superpixels=50, seed=7, laplacian_features=False)
        assert NetworkConfig.from_dict(cfg.to_dict()) == cfg

    def test_unknown_field_rejected(self):
        with pytest.raises(ConfigurationError):
            NetworkConfig.from_dict({'n_superpixels': 10, 'depth': 3})


class TestTrainConfig:

    def test_defaults(self):
        cfg = TrainConfig()
        assert cfg.iterations == 1000
        assert cfg.learning_rate == 0.01
        assert cfg.weight_decay == 0.0
        assert cfg.enforce_connectivity is False
        assert cfg.min_component_frac == 0.25

    def test_zero_iterations_rejected(self):
        with pytest.raises(ConfigurationError):
            TrainConfig(iterations=0)

    def test_non_positive_learning_rate_rejected(self):
        with pytest.raises(ConfigurationError):
            TrainConfig(learning_rate=0.0)

    def test_dict_round_trip_rebuilds_loss_weights(self):
        cfg = TrainConfig(iterations=12, loss_weights=LossWeights(beta=0.0), seed=3)
        restored = TrainConfig.from_dict(cfg.to_dict())
        assert isinstance(restored.loss_weights, LossWeights)
        assert restored == cfg
