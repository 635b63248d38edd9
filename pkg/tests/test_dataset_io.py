"""Tests for image/label-map I/O and network input construction"""

import numpy as np
import pytest
import torch
from PIL import Image

from src.dataset_io import (build_network_input, discover_dataset, load_image, load_label_map,
                            render_boundary_overlay, save_image, save_label_map, save_overlay)
from src.exceptions import (ImageDecodeError, LabelMapError, PathNotFoundError,
                            ShapeMismatchError)


class TestLoadImage:

    def test_rgb_png_scaled_to_unit_range(self, tmp_path):
        pixels = np.array([[[0, 128, 255], [255, 255, 255]]], dtype=np.uint8)
        path = tmp_path / 'rgb.png'
        Image.fromarray(pixels).save(path)

        image = load_image(path)
        assert image.dtype == np.float32
        assert image.shape == (1, 2, 3)
        np.testing.assert_allclose(image[0, 0], [0.0, 128 / 255, 1.0], atol=1e-6)

    def test_grayscale_replicated_to_three_channels(self, tmp_path):
        path = tmp_path / 'gray.png'
        Image.fromarray(np.full((4, 5), 51, dtype=np.uint8)).save(path)
        image = load_image(path)
        assert image.shape == (4, 5, 3)
        np.testing.assert_allclose(image, 0.2, atol=1e-6)

    def test_rgba_alpha_dropped(self, tmp_path):
        path = tmp_path / 'rgba.png'
        Image.fromarray(np.full((3, 3, 4), 255, dtype=np.uint8)).save(path)
        assert load_image(path).shape == (3, 3, 3)

    def test_jpeg_supported(self, tmp_path):
        path = tmp_path / 'photo.jpg'
        Image.fromarray(np.full((8, 8, 3), 100, dtype=np.uint8)).save(path, format='JPEG')
        image = load_image(path)
        assert image.shape == (8, 8, 3)
        assert 0.0 <= image.min() <= image.max() <= 1.0

    def test_missing_file(self, tmp_path):
        with pytest.raises(PathNotFoundError):
            load_image(tmp_path / 'absent.png')

    def test_undecodable_file(self, tmp_path):
        path = tmp_path / 'broken.png'
        path.write_bytes(b'not an image at all')
        with pytest.raises(ImageDecodeError):
            load_image(path)

    def test_unsupported_format(self, tmp_path):
        path = tmp_path / 'image.bmp'
        Image.fromarray(np.zeros((4, 4, 3), dtype=np.uint8)).save(path, format='BMP')
        with pytest.raises(ImageDecodeError):
            load_image(path)


class TestLabelMaps:

    def test_png_round_trip_with_large_ids(self, tmp_path):
        labels = np.array([[0, 1, 300], [65535, 2, 2]], dtype=np.int64)
        path = tmp_path / 'labels.png'
        save_label_map(labels, path)
        np.testing.assert_array_equal(load_label_map(path), labels)

    def test_csv_round_trip(self, tmp_path):
        labels = np.arange(12, dtype=np.int64).reshape(3, 4)
        path = tmp_path / 'labels.csv'
        save_label_map(labels, path)
        loaded = load_label_map(path)
        assert loaded.dtype == np.int64
        np.testing.assert_array_equal(loaded, labels)

    def test_ids_read_verbatim(self, tmp_path):
        path = tmp_path / 'gt.csv'
        path.write_text('7,7,9\n9,9,7\n')
        np.testing.assert_array_equal(load_label_map(path), [[7, 7, 9], [9, 9, 7]])

    def test_negative_csv_ids_rejected(self, tmp_path):
        path = tmp_path / 'gt.csv'
        path.write_text('0,-1\n1,1\n')
        with pytest.raises(LabelMapError):
            load_label_map(path)

    def test_empty_csv_rejected(self, tmp_path):
        path = tmp_path / 'gt.csv'
        path.write_text('')
        with pytest.raises(LabelMapError, match='empty'):
            load_label_map(path)

    def test_multichannel_png_rejected(self, tmp_path):
        path = tmp_path / 'rgb_labels.png'
        Image.fromarray(np.zeros((4, 4, 3), dtype=np.uint8)).save(path)
        with pytest.raises(LabelMapError):
            load_label_map(path)

    def test_expected_shape_enforced(self, tmp_path):
        path = tmp_path / 'gt.csv'
        path.write_text('0,1\n1,0\n')
        with pytest.raises(ShapeMismatchError):
            load_label_map(path, expected_shape=(3, 3))

    def test_ids_above_16_bits_rejected(self, tmp_path):
        with pytest.raises(LabelMapError):
            save_label_map(np.array([[0, 70000]]), tmp_path / 'too_many.png')


class TestBuildNetworkInput:

    def test_shape_and_dtype(self, rng):
        image = rng.random((6, 9, 3)).astype(np.float32)
        tensor = build_network_input(image)
        assert tensor.shape == (6, 9, 5)
        assert tensor.dtype == torch.float32

    def test_channels_standardized(self, rng):
        tensor = build_network_input(rng.random((8, 8, 3)))
        flat = tensor.reshape(-1, 5).double()
        np.testing.assert_allclose(flat.mean(dim=0).numpy(), 0.0, atol=1e-6)
        np.testing.assert_allclose(flat.var(dim=0, unbiased=False).numpy(), 1.0, atol=1e-5)

    def test_constant_image_channels_become_zero(self):
        tensor = build_network_input(np.full((4, 4, 3), 0.5))
        assert torch.all(tensor[..., :3] == 0)

    def test_coordinate_channels(self):
        tensor = build_network_input(np.zeros((2, 3, 3)))
        # column channel increases left to right, row channel top to bottom
        column, row = tensor[..., 3], tensor[..., 4]
        assert column[0, 0] < column[0, 1] < column[0, 2]
        assert row[0, 0] < row[1, 0]
        torch.testing.assert_close(column[0], column[1])

    def test_wrong_channel_count(self):
        with pytest.raises(ShapeMismatchError):
            build_network_input(np.zeros((4, 4, 4)))


class TestOverlay:

    def test_boundaries_painted_red(self):
        image = np.full((3, 4, 3), 0.5, dtype=np.float32)
        labels = np.array([[0, 0, 1, 1]] * 3)
        overlay = render_boundary_overlay(image, labels)
        np.testing.assert_array_equal(overlay[:, 1], [[1.0, 0.0, 0.0]] * 3)
        np.testing.assert_array_equal(overlay[:, [0, 2, 3]], image[:, [0, 2, 3]])

    def test_input_not_modified(self):
        image = np.zeros((2, 2, 3), dtype=np.float32)
        render_boundary_overlay(image, np.array([[0, 1], [0, 1]]))
        assert not image.any()

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            render_boundary_overlay(np.zeros((3, 3, 3)), np.zeros((3, 4), dtype=np.int64))

    def test_save_overlay_writes_rgb_png(self, tmp_path):
        path = tmp_path / 'overlay.png'
        save_overlay(np.zeros((4, 4, 3)), np.array([[0, 0, 1, 1]] * 4), path)
        with Image.open(path) as img:
            assert img.mode == 'RGB'
            assert img.getpixel((1, 0)) == (255, 0, 0)

    def test_save_image_round_trip(self, tmp_path, rng):
        image = rng.random((5, 5, 3))
        path = tmp_path / 'image.png'
        save_image(image, path)
        np.testing.assert_allclose(load_image(path), image, atol=0.5 / 255 + 1e-6)


class TestDiscoverDataset:

    def test_images_and_annotations_paired(self, dataset_dir):
        items = discover_dataset(dataset_dir)
        assert [item.image_id for item in items] == ['img_a', 'img_b', 'img_c', 'lonely']
        assert [p.name for p in items[0].annotation_paths] == ['img_a_gt0.png', 'img_a_gt1.csv']
        assert items[3].annotation_paths == []

    def test_missing_directory(self, tmp_path):
        with pytest.raises(PathNotFoundError):
            discover_dataset(tmp_path / 'nowhere')
