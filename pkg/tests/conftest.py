"""Shared fixtures for the superpixel segmenter test suite"""

import os
import sys

import numpy as np
import pytest
import torch
from PIL import Image

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.config import LossWeights, NetworkConfig, TrainConfig  # noqa: E402
from src.dataset_io import save_image, save_label_map  # noqa: E402


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False,
                     help='run full-length training tests')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_net_cfg():
    """A network small enough to train in well under a second per step"""
    return NetworkConfig(
        n_superpixels=4,
        base_channels=4,
        n_feature_blocks=2,
        dilation_rates=[1, 2],
        aspp_branch_channels=4,
        projection_channels=8,
        seed=0,
    )


@pytest.fixture
def short_train_cfg():
    return TrainConfig(iterations=30, learning_rate=0.01, loss_weights=LossWeights(), seed=0)


def quadrant_image(size: int = 64) -> np.ndarray:
    """Four constant-color quadrants"""
    image = np.zeros((size, size, 3), dtype=np.float32)
    half = size // 2
    image[:half, :half] = (0.9, 0.1, 0.1)
    image[:half, half:] = (0.1, 0.8, 0.2)
    image[half:, :half] = (0.1, 0.2, 0.9)
    image[half:, half:] = (0.9, 0.9, 0.2)
    return image


def quadrant_labels(size: int = 64) -> np.ndarray:
    labels = np.zeros((size, size), dtype=np.int64)
    half = size // 2
    labels[:half, half:] = 1
    labels[half:, :half] = 2
    labels[half:, half:] = 3
    return labels


def two_color_image(size: int = 64) -> np.ndarray:
    """Left half red, right half blue"""
    image = np.zeros((size, size, 3), dtype=np.float32)
    image[:, :size // 2] = (1.0, 0.0, 0.0)
    image[:, size // 2:] = (0.0, 0.0, 1.0)
    return image


def brute_force_laplacian(array: np.ndarray) -> np.ndarray:
    """Direct 4-neighbour Laplacian with edge-clamped indices"""
    height, width, channels = array.shape
    out = np.zeros_like(array)
    for i in range(height):
        for j in range(width):
            up = array[max(i - 1, 0), j]
            down = array[min(i + 1, height - 1), j]
            left = array[i, max(j - 1, 0)]
            right = array[i, min(j + 1, width - 1)]
            out[i, j] = up + down + left + right - 4 * array[i, j]
    return out


@pytest.fixture
def dataset_dir(tmp_path):
    """
    Three 16x16 images with annotations, plus one image without any

    img_a has two annotations (one PNG, one CSV); img_b and img_c have one.
    """
    root = tmp_path / 'dataset'
    root.mkdir()
    size = 16
    for index, image_id in enumerate(['img_a', 'img_b', 'img_c']):
        image = quadrant_image(size)
        image = np.roll(image, shift=index, axis=1)
        save_image(image, root / f'{image_id}.png')
        save_label_map(np.roll(quadrant_labels(size), shift=index, axis=1), root / f'{image_id}_gt0.png')

    vertical = np.zeros((size, size), dtype=np.int64)
    vertical[:, size // 2:] = 5
    save_label_map(vertical, root / 'img_a_gt1.csv')

    save_image(quadrant_image(size), root / 'lonely.png')
    return root


@pytest.fixture
def image_file(tmp_path):
    path = tmp_path / 'quadrants.png'
    Image.fromarray((quadrant_image(16) * 255).astype(np.uint8)).save(path)
    return path


@pytest.fixture(autouse=True)
def _deterministic_torch():
    torch.manual_seed(0)
    yield
