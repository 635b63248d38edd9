#!/usr/bin/env python3
"""
Configuration management for the superpixel segmenter
Handles environment variables, default settings and the hyper-parameter records
shared by the network, the objective and the training loop
"""

import math
import os
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Tuple

try:
    from .exceptions import ConfigurationError
except ImportError:
    from exceptions import ConfigurationError


class Config:
    """Configuration manager with environment variable support"""

    VERSION = "1.0.0"

    def __init__(self):
        # Output directory used when the CLI is not given -o
        self.output_dir = self._get_env_path(
            'SUPERPIX_OUTPUT_DIR',
            'superpix_outputs'
        )

        # Worker threads for per-image parallelism (0 = all available cores)
        self.threads = self._get_env_int(
            'SUPERPIX_THREADS',
            0
        )

        # Intra-op torch threads inside each worker (0 = leave torch default)
        self.torch_threads = self._get_env_int(
            'SUPERPIX_TORCH_THREADS',
            0
        )

        self.device = self._get_env_str(
            'SUPERPIX_DEVICE',
            'cpu'
        )

        # Training progress is logged every N iterations
        self.log_every = self._get_env_int(
            'SUPERPIX_LOG_EVERY',
            100
        )

        # Logging configuration
        self.log_level = self._get_env_str(
            'SUPERPIX_LOG_LEVEL',
            'INFO'
        )

        self.log_format = self._get_env_str(
            'SUPERPIX_LOG_FORMAT',
            'human'  # 'human' or 'json'
        )

        self.log_to_console = self._get_env_bool(
            'SUPERPIX_LOG_TO_CONSOLE',
            True
        )

        self.log_to_file = self._get_env_bool(
            'SUPERPIX_LOG_TO_FILE',
            False
        )

        self.log_file_path = self._get_env_str(
            'SUPERPIX_LOG_FILE_PATH',
            'superpix.log'
        )

        self.file_log_level = self._get_env_str(
            'SUPERPIX_FILE_LOG_LEVEL',
            'DEBUG'
        )

        self.log_max_bytes = self._get_env_int(
            'SUPERPIX_LOG_MAX_BYTES',
            10 * 1024 * 1024  # 10MB
        )

        self.log_backup_count = self._get_env_int(
            'SUPERPIX_LOG_BACKUP_COUNT',
            5
        )

    def _get_env_str(self, env_var: str, default: str) -> str:
        """Get string environment variable with default"""
        return os.getenv(env_var, default)

    def _get_env_int(self, env_var: str, default: int) -> int:
        """Get integer environment variable with default"""
        try:
            value = os.getenv(env_var)
            return int(value) if value is not None else default
        except (ValueError, TypeError):
            return default

    def _get_env_bool(self, env_var: str, default: bool) -> bool:
        """Get boolean environment variable with default"""
        value = os.getenv(env_var)
        if value is None:
            return default
        return value.lower() in ('true', '1', 'yes', 'on')

    def _get_env_path(self, env_var: str, default: str) -> str:
        """Get path environment variable with default, expanding user paths"""
        path = os.getenv(env_var, default)
        return os.path.expanduser(path)

    def resolve_jobs(self, requested: int = None) -> int:
        """
        Decide how many images are processed in parallel

        SUPERPIX_THREADS wins over the --jobs flag; zero or negative means
        one worker per available core.
        """
        jobs = self.threads if self.threads > 0 else (requested or 0)
        if jobs <= 0:
            jobs = os.cpu_count() or 1
        return jobs

    def print_config(self):
        """Print current configuration for debugging"""
        print("=" * 60)
        print("SUPERPIXEL SEGMENTER - CONFIGURATION")
        print("=" * 60)
        print(f"Output Dir: {self.output_dir}")
        print(f"Worker Threads: {self.threads or 'auto'}")
        print(f"Torch Threads: {self.torch_threads or 'torch default'}")
        print(f"Device: {self.device}")
        print(f"Log Every: {self.log_every} iterations")
        print(f"Log Level: {self.log_level}")
        print(f"Log Format: {self.log_format}")
        print(f"Log to Console: {self.log_to_console}")
        print(f"Log to File: {self.log_to_file}")
        if self.log_to_file:
            print(f"Log File Path: {self.log_file_path}")


# Global configuration instance
config = Config()


def get_config() -> Config:
    """Get the global configuration instance"""
    return config


def _finite(value: float) -> bool:
    return isinstance(value, (int, float)) and math.isfinite(value)


class _Record:
    """Shared dict round-tripping for the hyper-parameter dataclasses"""

    def __post_init__(self):
        valid, error = self.validate()
        if not valid:
            raise ConfigurationError(f"Invalid {type(self).__name__}: {error}",
                                     setting_name=type(self).__name__)

    def validate(self) -> Tuple[bool, str]:
        return True, ""

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(
                f"Unknown {cls.__name__} fields: {', '.join(sorted(unknown))}",
                setting_name=cls.__name__
            )
        return cls(**data)


@dataclass
class LossWeights(_Record):
    """
    Balancing coefficients of the objective

    total = clustering(lambda_) + alpha * smoothness + beta * reconstruction + eta * edge
    """
    lambda_: float = 2.0
    alpha: float = 2.0
    beta: float = 10.0
    eta: float = 1.0
    sigma: float = 8.0
    # False drops the soft superpixelated image from the reconstruction and edge terms
    soft_reconstruction: bool = True

    def validate(self) -> Tuple[bool, str]:
        for name in ('lambda_', 'alpha', 'beta', 'eta'):
            value = getattr(self, name)
            if not _finite(value) or value < 0:
                return False, f"{name} must be finite and >= 0, got {value}"
        if not _finite(self.sigma) or self.sigma <= 0:
            return False, f"sigma must be finite and > 0, got {self.sigma}"
        return True, ""


@dataclass
class NetworkConfig(_Record):
    """Architecture of the per-image network"""
    n_superpixels: int = 100
    base_channels: int = 32
    n_feature_blocks: int = 4
    dilation_rates: List[int] = field(default_factory=lambda: [1, 2, 4, 8])
    aspp_branch_channels: int = 64
    projection_channels: int = 256
    seed: int = 0
    # False feeds only the last feature block into ASPP
    concat_all_blocks: bool = True
    laplacian_features: bool = True

    def validate(self) -> Tuple[bool, str]:
        if self.n_superpixels < 2:
            return False, f"n_superpixels must be >= 2, got {self.n_superpixels}"
        if self.base_channels < 1:
            return False, f"base_channels must be >= 1, got {self.base_channels}"
        if self.n_feature_blocks < 1:
            return False, f"n_feature_blocks must be >= 1, got {self.n_feature_blocks}"
        if not self.dilation_rates:
            return False, "dilation_rates must not be empty"
        if any(rate < 1 for rate in self.dilation_rates):
            return False, f"dilation_rates must all be >= 1, got {self.dilation_rates}"
        if self.aspp_branch_channels < 1 or self.projection_channels < 1:
            return False, "aspp_branch_channels and projection_channels must be >= 1"
        return True, ""

    @property
    def block_channels(self) -> List[int]:
        """Widths of the feature blocks, doubling from base_channels"""
        return [self.base_channels * 2 ** k for k in range(self.n_feature_blocks)]

    @property
    def feature_channels(self) -> int:
        """Channel count leaving the feature extractor"""
        widths = self.block_channels
        return sum(widths) if self.concat_all_blocks else widths[-1]


@dataclass
class TrainConfig(_Record):
    """Per-image optimisation settings"""
    iterations: int = 1000
    learning_rate: float = 0.01
    weight_decay: float = 0.0
    loss_weights: LossWeights = field(default_factory=LossWeights)
    seed: int = 0
    enforce_connectivity: bool = False
    min_component_frac: float = 0.25
    device: str = field(default_factory=lambda: get_config().device)

    def __post_init__(self):
        if isinstance(self.loss_weights, dict):
            self.loss_weights = LossWeights.from_dict(self.loss_weights)
        super().__post_init__()

    def validate(self) -> Tuple[bool, str]:
        if self.iterations < 1:
            return False, f"iterations must be >= 1, got {self.iterations}"
        if not _finite(self.learning_rate) or self.learning_rate <= 0:
            return False, f"learning_rate must be > 0, got {self.learning_rate}"
        if not _finite(self.weight_decay) or self.weight_decay < 0:
            return False, f"weight_decay must be >= 0, got {self.weight_decay}"
        if not _finite(self.min_component_frac) or self.min_component_frac < 0:
            return False, f"min_component_frac must be >= 0, got {self.min_component_frac}"
        return True, ""


def print_env_vars_help():
    """Print help for environment variables"""
    print("""
Superpixel Segmenter - Environment Variables
============================================

Execution:
  SUPERPIX_THREADS              Images processed in parallel; overrides --jobs (default: all cores)
  SUPERPIX_TORCH_THREADS        Torch intra-op threads per worker (default: torch default)
  SUPERPIX_DEVICE               Torch device for training (default: cpu)
  SUPERPIX_OUTPUT_DIR           Output directory when -o is not given (default: superpix_outputs)

Logging Configuration:
  SUPERPIX_LOG_LEVEL            Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL) (default: INFO)
  SUPERPIX_LOG_FORMAT           Log format: 'human' or 'json' (default: human)
  SUPERPIX_LOG_TO_CONSOLE       Enable console logging (default: true)
  SUPERPIX_LOG_TO_FILE          Enable file logging (default: false)
  SUPERPIX_LOG_FILE_PATH        Log file path (default: superpix.log)
  SUPERPIX_FILE_LOG_LEVEL       File log level (default: DEBUG)
  SUPERPIX_LOG_MAX_BYTES        Max log file size in bytes (default: 10485760)
  SUPERPIX_LOG_BACKUP_COUNT     Number of backup log files (default: 5)
  SUPERPIX_LOG_EVERY            Log training progress every N iterations (default: 100)

Example usage:
  export SUPERPIX_THREADS=4
  export SUPERPIX_LOG_FORMAT=json
  python superpix.py eval data/bsds_test -o results.csv -n 100
""")


if __name__ == "__main__":
    config.print_config()
    print()
    print_env_vars_help()
