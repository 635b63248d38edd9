#!/usr/bin/env python3
"""
Objective terms for unsupervised superpixel optimisation

    total = clustering + alpha * smoothness + beta * reconstruction + eta * edge

Every term takes H x W x C tensors and returns a differentiable scalar.
Natural logarithms throughout; probabilities are clamped to LOG_EPS before
any logarithm.
"""

from dataclasses import dataclass
from typing import Dict, Optional

import torch

try:
    from .config import LossWeights
    from .exceptions import ShapeMismatchError
    from .superpix_ops import edge_distribution, soft_superpixelated_image
except ImportError:
    from config import LossWeights
    from exceptions import ShapeMismatchError
    from superpix_ops import edge_distribution, soft_superpixelated_image

LOG_EPS = 1e-12

__all__ = [
    'LossReport', 'LossWeights', 'clustering_loss', 'smoothness_loss',
    'reconstruction_loss', 'edge_loss', 'kl_divergence', 'total_objective',
]


@dataclass
class LossReport:
    """The four objective terms and their weighted sum, as scalar tensors"""
    clustering: torch.Tensor
    smoothness: torch.Tensor
    reconstruction: torch.Tensor
    edge: torch.Tensor
    total: torch.Tensor

    def as_floats(self) -> Dict[str, float]:
        return {
            'clustering': float(self.clustering.detach()),
            'smoothness': float(self.smoothness.detach()),
            'reconstruction': float(self.reconstruction.detach()),
            'edge': float(self.edge.detach()),
            'total': float(self.total.detach()),
        }

    def is_finite(self) -> bool:
        return bool(torch.isfinite(self.total.detach()))


def _safe_log(t: torch.Tensor) -> torch.Tensor:
    return torch.log(t.clamp(min=LOG_EPS))


def clustering_loss(assignment: torch.Tensor, lambda_: float) -> torch.Tensor:
    """
    Mean per-pixel assignment entropy plus lambda times the negative entropy
    of the mean assignment

    The first term pushes pixels towards deterministic assignments, the
    second towards superpixels of equal area.
    """
    pixel_entropy = -(assignment * _safe_log(assignment)).sum(dim=-1).mean()
    marginal = assignment.mean(dim=(0, 1))
    marginal_neg_entropy = (marginal * _safe_log(marginal)).sum()
    return pixel_entropy + lambda_ * marginal_neg_entropy


def smoothness_loss(assignment: torch.Tensor, image: torch.Tensor, sigma: float) -> torch.Tensor:
    """
    Edge-aware smoothness of the assignment

    L1 forward differences of the assignment to the right and bottom
    neighbours, each damped by exp(-||image difference||^2 / sigma), summed
    and divided by H*W. The last column/row has no forward difference.
    """
    if assignment.shape[:2] != image.shape[:2]:
        raise ShapeMismatchError('smoothness_loss', tuple(image.shape[:2]), tuple(assignment.shape[:2]))
    image = image.to(assignment.dtype)
    height, width = assignment.shape[:2]

    dx_assignment = (assignment[:, 1:] - assignment[:, :-1]).abs().sum(dim=-1)
    dx_image = (image[:, 1:] - image[:, :-1]).pow(2).sum(dim=-1)
    dy_assignment = (assignment[1:, :] - assignment[:-1, :]).abs().sum(dim=-1)
    dy_image = (image[1:, :] - image[:-1, :]).pow(2).sum(dim=-1)

    horizontal = (dx_assignment * torch.exp(-dx_image / sigma)).sum()
    vertical = (dy_assignment * torch.exp(-dy_image / sigma)).sum()
    return (horizontal + vertical) / (height * width)


def reconstruction_loss(image: torch.Tensor, reconstruction: torch.Tensor,
                        soft_image: Optional[torch.Tensor] = None) -> torch.Tensor:
    """
    Squared error of the network reconstruction and of the soft superpixelated
    image against the input, divided by 3*H*W

    With soft_image=None only the reconstruction term is kept.
    """
    operands = [reconstruction] + ([soft_image] if soft_image is not None else [])
    for operand in operands:
        if operand.shape != image.shape:
            raise ShapeMismatchError('reconstruction_loss', tuple(image.shape), tuple(operand.shape))

    image = image.to(reconstruction.dtype)
    loss = (image - reconstruction).pow(2).sum()
    if soft_image is not None:
        loss = loss + (image - soft_image).pow(2).sum()
    return loss / image.numel()


def kl_divergence(reference: torch.Tensor, candidate: torch.Tensor) -> torch.Tensor:
    """KL(reference || candidate) = sum reference * log(reference / candidate)"""
    return (reference * (_safe_log(reference) - _safe_log(candidate))).sum()


def edge_loss(edges_input: torch.Tensor, edges_reconstruction: torch.Tensor,
              edges_soft: Optional[torch.Tensor] = None) -> torch.Tensor:
    """
    KL divergence from the input image's edge distribution to the edge
    distributions of the reconstruction and of the soft superpixelated image
    """
    for operand in (edges_reconstruction, edges_soft):
        if operand is not None and operand.shape != edges_input.shape:
            raise ShapeMismatchError('edge_loss', tuple(edges_input.shape), tuple(operand.shape))

    reference = edges_input.to(edges_reconstruction.dtype)
    loss = kl_divergence(reference, edges_reconstruction)
    if edges_soft is not None:
        loss = loss + kl_divergence(reference, edges_soft)
    return loss


def total_objective(assignment: torch.Tensor, image: torch.Tensor, reconstruction: torch.Tensor,
                    weights: LossWeights) -> LossReport:
    """
    Evaluate every objective term and their weighted sum

    Args:
        assignment: H x W x N soft assignment (post-softmax)
        image: H x W x 3 input image in [0, 1]
        reconstruction: H x W x 3 network reconstruction
        weights: Balancing coefficients

    Returns:
        LossReport with differentiable scalar tensors
    """
    image = image.to(device=assignment.device, dtype=assignment.dtype)

    clustering = clustering_loss(assignment, weights.lambda_)
    smoothness = smoothness_loss(assignment, image, weights.sigma)

    edges_input = edge_distribution(image)
    edges_reconstruction = edge_distribution(reconstruction)

    if weights.soft_reconstruction:
        soft_image = soft_superpixelated_image(assignment, image)
        reconstruction_term = reconstruction_loss(image, reconstruction, soft_image)
        edge = edge_loss(edges_input, edges_reconstruction, edge_distribution(soft_image))
    else:
        reconstruction_term = reconstruction_loss(image, reconstruction)
        edge = edge_loss(edges_input, edges_reconstruction)

    total = (clustering
             + weights.alpha * smoothness
             + weights.beta * reconstruction_term
             + weights.eta * edge)

    return LossReport(
        clustering=clustering,
        smoothness=smoothness,
        reconstruction=reconstruction_term,
        edge=edge,
        total=total
    )
