"""Tests for the soft/hard superpixel operators and edge distributions"""

import numpy as np
import pytest
import torch
from conftest import brute_force_laplacian

from src.exceptions import ShapeMismatchError
from src.superpix_ops import (edge_distribution, hard_assignment, hard_superpixelated_image,
                              laplacian_response, soft_superpixel_colors,
                              soft_superpixelated_image)


def random_assignment(generator, height, width, n, dtype=torch.float64):
    logits = torch.randn(height, width, n, generator=generator, dtype=dtype)
    return torch.softmax(logits, dim=-1)


class TestLaplacian:

    def test_matches_brute_force(self, rng):
        array = rng.random((5, 7, 2))
        response = laplacian_response(torch.as_tensor(array))
        np.testing.assert_allclose(response.numpy(), brute_force_laplacian(array), atol=1e-12)

    def test_constant_image_has_zero_response(self):
        response = laplacian_response(torch.full((4, 4, 3), 0.3, dtype=torch.float64))
        assert torch.all(response.abs() < 1e-12)

    def test_shape_preserved(self):
        assert laplacian_response(torch.zeros(3, 6, 4)).shape == (3, 6, 4)

    def test_requires_three_dimensions(self):
        with pytest.raises(ShapeMismatchError):
            laplacian_response(torch.zeros(4, 4))


class TestSoftSuperpixelColors:

    def test_colors_are_weighted_means(self):
        generator = torch.Generator().manual_seed(3)
        assignment = random_assignment(generator, 4, 4, 3)
        image = torch.rand(4, 4, 3, generator=generator, dtype=torch.float64)

        result = soft_superpixel_colors(assignment, image)
        for s in range(3):
            weights = assignment[..., s]
            expected = (weights[..., None] * image).sum(dim=(0, 1)) / weights.sum()
            torch.testing.assert_close(result.colors[s], expected)
        torch.testing.assert_close(result.masses, assignment.sum(dim=(0, 1)))

    def test_empty_superpixel_gets_zero_color(self):
        assignment = torch.zeros(2, 2, 2, dtype=torch.float64)
        assignment[..., 0] = 1.0
        image = torch.ones(2, 2, 3, dtype=torch.float64)
        colors = soft_superpixel_colors(assignment, image).colors
        assert torch.all(torch.isfinite(colors))
        torch.testing.assert_close(colors[1], torch.zeros(3, dtype=torch.float64))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            soft_superpixel_colors(torch.ones(3, 3, 2) / 2, torch.zeros(4, 3, 3))


class TestSoftHardConsistency:

    @pytest.mark.parametrize('trial', range(50))
    def test_one_hot_soft_equals_hard(self, trial):
        generator = torch.Generator().manual_seed(trial)
        height, width, n = 3 + trial % 4, 4 + trial % 3, 2 + trial % 5
        labels = torch.randint(0, n, (height, width), generator=generator)
        image = torch.rand(height, width, 3, generator=generator, dtype=torch.float64)
        one_hot = torch.nn.functional.one_hot(labels, n).to(torch.float64)

        soft = soft_superpixelated_image(one_hot, image)
        hard = hard_superpixelated_image(labels.numpy(), image)
        np.testing.assert_allclose(soft.numpy(), hard.numpy(), atol=1e-6)

    def test_hard_image_uses_region_means(self):
        labels = np.array([[0, 0], [1, 1]])
        image = torch.tensor([[[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]],
                              [[0.2, 0.4, 0.6], [0.2, 0.4, 0.6]]], dtype=torch.float64)
        hard = hard_superpixelated_image(labels, image)
        torch.testing.assert_close(hard[0, 0], torch.full((3,), 0.5, dtype=torch.float64))
        torch.testing.assert_close(hard[1, 1], image[1, 1])

    def test_soft_image_is_differentiable(self):
        generator = torch.Generator().manual_seed(0)
        logits = torch.randn(4, 4, 3, generator=generator, dtype=torch.float64, requires_grad=True)
        image = torch.rand(4, 4, 3, generator=generator, dtype=torch.float64)
        soft_superpixelated_image(torch.softmax(logits, dim=-1), image).sum().backward()
        assert logits.grad is not None and torch.all(torch.isfinite(logits.grad))


class TestHardAssignment:

    def test_argmax_with_lowest_index_on_ties(self):
        assignment = torch.tensor([[[0.5, 0.5, 0.0], [0.1, 0.2, 0.7]]])
        np.testing.assert_array_equal(hard_assignment(assignment), [[0, 2]])

    def test_returns_int64_numpy(self):
        labels = hard_assignment(torch.full((2, 2, 3), 1 / 3))
        assert isinstance(labels, np.ndarray)
        assert labels.dtype == np.int64


class TestEdgeDistribution:

    def test_is_a_distribution(self, rng):
        edges = edge_distribution(torch.as_tensor(rng.random((6, 5, 3))))
        assert edges.shape == (6, 5)
        assert torch.all(edges > 0)
        assert abs(float(edges.sum()) - 1.0) < 1e-9

    def test_constant_image_gives_uniform(self):
        edges = edge_distribution(torch.full((4, 4, 3), 0.7, dtype=torch.float64))
        torch.testing.assert_close(edges, torch.full((4, 4), 1 / 16, dtype=torch.float64))

    def test_brighter_laplacian_gets_more_mass(self):
        image = torch.zeros(5, 5, 3, dtype=torch.float64)
        image[2, 2] = -1.0
        edges = edge_distribution(image)
        # a dark spot has a positive Laplacian response at its centre
        assert edges[2, 2] == edges.max()


class TestOperatorProperties:

    def test_impulse_response(self):
        impulse = torch.zeros(3, 3, 1, dtype=torch.float64)
        impulse[1, 1] = 1.0
        response = laplacian_response(impulse)[..., 0]
        assert response[1, 1] == -4.0
        for i, j in [(0, 1), (1, 0), (1, 2), (2, 1)]:
            assert response[i, j] == 1.0

    def test_ramp_has_zero_interior_response(self):
        ramp = torch.arange(6, dtype=torch.float64).repeat(5, 1)[..., None]
        response = laplacian_response(ramp)[..., 0]
        assert torch.all(response[1:-1, 1:-1] == 0)

    def test_laplacian_is_linear(self, rng):
        t1 = torch.as_tensor(rng.random((5, 5, 3)))
        t2 = torch.as_tensor(rng.random((5, 5, 3)))
        torch.testing.assert_close(laplacian_response(2.0 * t1 - 0.5 * t2),
                                   2.0 * laplacian_response(t1) - 0.5 * laplacian_response(t2))

    def test_uniform_assignment_gives_global_mean(self, rng):
        image = torch.as_tensor(rng.random((4, 4, 3)))
        uniform = torch.full((4, 4, 3), 1 / 3, dtype=torch.float64)
        soft = soft_superpixelated_image(uniform, image)
        torch.testing.assert_close(soft, image.mean(dim=(0, 1)).expand(4, 4, 3))

    def test_soft_image_matches_brute_force(self):
        generator = torch.Generator().manual_seed(11)
        assignment = random_assignment(generator, 4, 4, 3)
        image = torch.rand(4, 4, 3, generator=generator, dtype=torch.float64)

        colors = []
        for s in range(3):
            numerator = torch.zeros(3, dtype=torch.float64)
            denominator = 0.0
            for i in range(4):
                for j in range(4):
                    numerator += assignment[i, j, s] * image[i, j]
                    denominator += float(assignment[i, j, s])
            colors.append(numerator / denominator)
        expected = torch.zeros(4, 4, 3, dtype=torch.float64)
        for i in range(4):
            for j in range(4):
                expected[i, j] = sum(assignment[i, j, s] * colors[s] for s in range(3))

        torch.testing.assert_close(soft_superpixelated_image(assignment, image), expected)

    def test_permutation_invariance(self):
        generator = torch.Generator().manual_seed(5)
        assignment = random_assignment(generator, 5, 5, 4)
        image = torch.rand(5, 5, 3, generator=generator, dtype=torch.float64)
        permuted = assignment[..., torch.tensor([2, 0, 3, 1])]
        torch.testing.assert_close(soft_superpixelated_image(assignment, image),
                                   soft_superpixelated_image(permuted, image))

    def test_soft_image_gradient_matches_finite_differences(self):
        generator = torch.Generator().manual_seed(2)
        assignment = random_assignment(generator, 4, 4, 3).requires_grad_(True)
        image = torch.rand(4, 4, 3, generator=generator, dtype=torch.float64)
        assert torch.autograd.gradcheck(lambda p: soft_superpixelated_image(p, image), (assignment,),
                                        eps=1e-4, atol=1e-6, rtol=1e-3)

    def test_each_pixel_its_own_label_is_identity(self, rng):
        image = torch.as_tensor(rng.random((3, 3, 3)))
        labels = np.arange(9).reshape(3, 3)
        torch.testing.assert_close(hard_superpixelated_image(labels, image), image)
