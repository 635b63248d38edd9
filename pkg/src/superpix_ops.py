#!/usr/bin/env python3
"""
Differentiable and hard superpixel operators

All tensors use the H x W x C layout:
    image       H x W x 3 (or any channel count for laplacian_response)
    assignment  H x W x N, each pixel a probability distribution over N superpixels
    labels      H x W integer map (numpy), as produced by hard_assignment
"""

from dataclasses import dataclass
from typing import Union

import numpy as np
import torch
import torch.nn.functional as F

try:
    from .exceptions import ShapeMismatchError
except ImportError:
    from exceptions import ShapeMismatchError

COLOR_EPS = 1e-8

# 4-neighbour discrete Laplacian
LAPLACIAN_KERNEL = torch.tensor([[0.0, 1.0, 0.0],
                                 [1.0, -4.0, 1.0],
                                 [0.0, 1.0, 0.0]])


@dataclass
class SuperpixelColors:
    """Soft mean color and soft pixel mass of every superpixel"""
    colors: torch.Tensor   # N x 3
    masses: torch.Tensor   # N


def laplacian_nchw(x: torch.Tensor) -> torch.Tensor:
    """Per-channel Laplacian of a B x C x H x W batch with replicate padding"""
    channels = x.shape[1]
    kernel = LAPLACIAN_KERNEL.to(dtype=x.dtype, device=x.device).expand(channels, 1, 3, 3).contiguous()
    padded = F.pad(x, (1, 1, 1, 1), mode='replicate')
    return F.conv2d(padded, kernel, groups=channels)


def laplacian_response(t: torch.Tensor) -> torch.Tensor:
    """
    Per-channel Laplacian response of an H x W x C tensor

    Uses the kernel [[0,1,0],[1,-4,1],[0,1,0]] with edge-clamped borders;
    the output has the input's shape.
    """
    if t.dim() != 3:
        raise ShapeMismatchError('laplacian_response', ('H', 'W', 'C'), tuple(t.shape))
    nchw = t.permute(2, 0, 1).unsqueeze(0)
    return laplacian_nchw(nchw).squeeze(0).permute(1, 2, 0)


def _check_pair(operation: str, assignment: torch.Tensor, image: torch.Tensor) -> None:
    if assignment.shape[:2] != image.shape[:2]:
        raise ShapeMismatchError(operation, tuple(image.shape[:2]), tuple(assignment.shape[:2]))


def soft_superpixel_colors(assignment: torch.Tensor, image: torch.Tensor) -> SuperpixelColors:
    """
    Soft mean color of every superpixel

    colors_s = sum_hw P[h,w,s] * I[h,w] / max(sum_hw P[h,w,s], eps)
    """
    _check_pair('soft_superpixel_colors', assignment, image)
    image = image.to(assignment.dtype)
    masses = assignment.sum(dim=(0, 1))
    weighted = torch.einsum('hwn,hwc->nc', assignment, image)
    colors = weighted / masses.clamp(min=COLOR_EPS).unsqueeze(1)
    return SuperpixelColors(colors=colors, masses=masses)


def soft_superpixelated_image(assignment: torch.Tensor, image: torch.Tensor) -> torch.Tensor:
    """
    Differentiable superpixelated image: each pixel mixes the superpixel
    colors by its assignment probabilities

    Reduces to hard_superpixelated_image when the assignment is one-hot.
    """
    colors = soft_superpixel_colors(assignment, image).colors
    return torch.einsum('hwn,nc->hwc', assignment, colors)


def hard_assignment(assignment: torch.Tensor) -> np.ndarray:
    """Per-pixel argmax over superpixels; ties go to the lowest index"""
    return assignment.detach().argmax(dim=-1).cpu().numpy().astype(np.int64)


def hard_superpixelated_image(labels: Union[np.ndarray, torch.Tensor],
                              image: torch.Tensor) -> torch.Tensor:
    """Replace every pixel with the mean color of the pixels sharing its label"""
    labels = torch.as_tensor(labels, device=image.device)
    if tuple(labels.shape) != tuple(image.shape[:2]):
        raise ShapeMismatchError('hard_superpixelated_image', tuple(image.shape[:2]), tuple(labels.shape))

    _, index = torch.unique(labels.reshape(-1), return_inverse=True)
    n_regions = int(index.max().item()) + 1
    pixels = image.reshape(-1, image.shape[-1])

    sums = torch.zeros(n_regions, pixels.shape[1], dtype=pixels.dtype, device=pixels.device)
    sums.index_add_(0, index, pixels)
    counts = torch.bincount(index, minlength=n_regions).to(pixels.dtype)
    means = sums / counts.unsqueeze(1)

    return means[index].reshape(image.shape)


def edge_distribution(t: torch.Tensor) -> torch.Tensor:
    """
    Spatial edge distribution of an image

    Channel-mean Laplacian response, softmaxed over all H*W positions.
    Every entry is positive and the map sums to 1.
    """
    response = laplacian_response(t).mean(dim=-1)
    return torch.softmax(response.reshape(-1), dim=0).reshape(response.shape)
