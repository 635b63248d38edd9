#!/usr/bin/env python3
"""
Per-image optimisation loop and segmentation extraction

fit() trains a freshly seeded SuperpixelNet on one image with Adam;
segment() turns the trained assignment into a compact label map, optionally
merging small disconnected fragments so every superpixel is 4-connected.
"""

import csv
import heapq
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import torch
from scipy import ndimage

try:
    from .config import LossWeights, NetworkConfig, TrainConfig, get_config
    from .dataset_io import build_network_input
    from .exceptions import ConfigurationError, FileAccessError, NonFiniteLossError
    from .logger import get_logger, log_operation_start, log_operation_success, log_training_step
    from .losses import total_objective
    from .network import ModelOutput, SuperpixelNet
    from .superpix_ops import hard_assignment
    from .validator import ProcessingValidator
except ImportError:
    from config import LossWeights, NetworkConfig, TrainConfig, get_config
    from dataset_io import build_network_input
    from exceptions import ConfigurationError, FileAccessError, NonFiniteLossError
    from logger import get_logger, log_operation_start, log_operation_success, log_training_step
    from losses import total_objective
    from network import ModelOutput, SuperpixelNet
    from superpix_ops import hard_assignment
    from validator import ProcessingValidator

logger = get_logger('trainer')

ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8
TRACE_COLUMNS = ['iteration', 'clustering', 'smoothness', 'reconstruction', 'edge', 'total']

# 4-connectivity
_CROSS = ndimage.generate_binary_structure(2, 1)

__all__ = [
    'LossWeights', 'TrainConfig', 'TrainTrace', 'SegmentationResult', 'fit', 'segment',
    'run_segmentation', 'label_components', 'enforce_connectivity', 'compact_labels',
]


@dataclass
class TrainTrace:
    """Objective components of every iteration, plus wall-clock duration"""
    records: List[Dict[str, float]] = field(default_factory=list)
    duration_seconds: float = 0.0

    def __len__(self) -> int:
        return len(self.records)

    @property
    def initial_total(self) -> float:
        return self.records[0]['total']

    @property
    def final_total(self) -> float:
        return self.records[-1]['total']

    def totals(self) -> List[float]:
        return [record['total'] for record in self.records]

    def to_csv(self, path: Union[str, Path]) -> None:
        """Write one row per iteration: iteration, clustering, smoothness, reconstruction, edge, total"""
        path = Path(path)
        try:
            with open(path, 'w', newline='', encoding='utf-8') as f:
                writer = csv.DictWriter(f, fieldnames=TRACE_COLUMNS)
                writer.writeheader()
                for record in self.records:
                    writer.writerow({key: record[key] for key in TRACE_COLUMNS})
        except OSError as e:
            raise FileAccessError(str(path), 'write loss trace') from e


@dataclass
class SegmentationResult:
    """Everything one segmentation run produces"""
    labels: np.ndarray
    output: ModelOutput
    trace: TrainTrace
    model: Optional[SuperpixelNet] = None


def _check_image(image) -> None:
    valid, error = ProcessingValidator.validate_image(image, min_size=3, channels=3)
    if not valid:
        raise ConfigurationError(f"Cannot train on this image: {error}", setting_name='image')


def _optimise(image: np.ndarray, net_cfg: NetworkConfig,
              train_cfg: TrainConfig) -> Tuple[SuperpixelNet, ModelOutput, TrainTrace]:
    _check_image(image)
    device = torch.device(train_cfg.device)
    torch.manual_seed(train_cfg.seed)

    model = SuperpixelNet(net_cfg).to(device)
    input_tensor = build_network_input(image).to(device)
    target = torch.as_tensor(np.asarray(image), dtype=torch.float32, device=device)

    optimizer = torch.optim.Adam(
        model.parameters(),
        lr=train_cfg.learning_rate,
        betas=ADAM_BETAS,
        eps=ADAM_EPS,
        weight_decay=train_cfg.weight_decay
    )

    log_every = max(1, get_config().log_every)
    height, width = image.shape[:2]
    log_operation_start('fit', height=height, width=width,
                        n_superpixels=net_cfg.n_superpixels, iterations=train_cfg.iterations)

    trace = TrainTrace()
    start = time.perf_counter()
    model.train()
    for iteration in range(1, train_cfg.iterations + 1):
        optimizer.zero_grad()
        output = model(input_tensor)
        report = total_objective(output.assignment, target, output.reconstruction,
                                 train_cfg.loss_weights)
        losses = report.as_floats()

        if not report.is_finite():
            raise NonFiniteLossError(iteration, components=losses)

        report.total.backward()
        optimizer.step()

        trace.records.append({'iteration': iteration, **losses})
        if iteration % log_every == 0 or iteration in (1, train_cfg.iterations):
            log_training_step(iteration, train_cfg.iterations, losses)

    model.eval()
    with torch.no_grad():
        final = model(input_tensor)
    valid, error = ProcessingValidator.validate_assignment(final.assignment)
    if not valid:
        logger.warning(f"Final assignment failed validation: {error}")
    trace.duration_seconds = time.perf_counter() - start

    log_operation_success('fit', duration=trace.duration_seconds,
                          initial_total=trace.initial_total, final_total=trace.final_total)
    return model, final, trace


def fit(image: np.ndarray, net_cfg: NetworkConfig, train_cfg: TrainConfig) -> Tuple[ModelOutput, TrainTrace]:
    """
    Optimise a freshly initialised network on a single image

    Args:
        image: H x W x 3 float image in [0, 1]
        net_cfg: Architecture, including N and the initialisation seed
        train_cfg: Optimiser settings and loss weights

    Returns:
        (final forward output, per-iteration trace)

    Raises:
        NonFiniteLossError: The objective became NaN/Inf; carries the iteration index
    """
    _, output, trace = _optimise(image, net_cfg, train_cfg)
    return output, trace


def run_segmentation(image: np.ndarray, net_cfg: NetworkConfig, train_cfg: TrainConfig) -> SegmentationResult:
    """fit() followed by label extraction, keeping the model and trace"""
    model, output, trace = _optimise(image, net_cfg, train_cfg)
    labels = hard_assignment(output.assignment)

    if train_cfg.enforce_connectivity:
        labels = enforce_connectivity(labels, net_cfg.n_superpixels, train_cfg.min_component_frac)
    else:
        labels = compact_labels(labels)

    logger.info(f"Segmented {labels.shape[0]}x{labels.shape[1]} image into "
                f"{int(labels.max()) + 1} superpixels (N={net_cfg.n_superpixels})")
    return SegmentationResult(labels=labels, output=output, trace=trace, model=model)


def segment(image: np.ndarray, net_cfg: NetworkConfig, train_cfg: TrainConfig) -> np.ndarray:
    """Train on the image and return its superpixel label map with IDs 0..K-1"""
    return run_segmentation(image, net_cfg, train_cfg).labels


def compact_labels(labels: np.ndarray) -> np.ndarray:
    """Renumber label IDs to 0..K-1, preserving their relative order"""
    labels = np.asarray(labels)
    _, inverse = np.unique(labels, return_inverse=True)
    return inverse.reshape(labels.shape).astype(np.int64)


def label_components(labels: np.ndarray) -> Tuple[np.ndarray, int]:
    """
    Split every label into its 4-connected components

    Returns:
        (component map with IDs 0..C-1, C). Components are numbered by
        label ID first, then in raster order within a label.
    """
    labels = np.asarray(labels)
    components = np.zeros(labels.shape, dtype=np.int64)
    count = 0
    for value in np.unique(labels):
        pieces, n_pieces = ndimage.label(labels == value, structure=_CROSS)
        mask = pieces > 0
        components[mask] = pieces[mask] - 1 + count
        count += n_pieces
    return components, count


def _shared_boundaries(components: np.ndarray, count: int) -> List[Counter]:
    """Number of 4-neighbour pixel pairs shared between every two adjacent components"""
    adjacency = [Counter() for _ in range(count)]
    for a, b in ((components[:, :-1], components[:, 1:]), (components[:-1, :], components[1:, :])):
        differ = a != b
        if not differ.any():
            continue
        pairs, counts = np.unique(np.stack([a[differ], b[differ]], axis=1), axis=0, return_counts=True)
        for (first, second), n in zip(pairs.tolist(), counts.tolist()):
            adjacency[first][second] += n
            adjacency[second][first] += n
    return adjacency


def enforce_connectivity(labels: np.ndarray, n_superpixels: int, min_component_frac: float = 0.25) -> np.ndarray:
    """
    Make every superpixel 4-connected

    Components smaller than min_component_frac * H*W / n_superpixels are
    merged, smallest first, into the adjacent component sharing the longest
    boundary (lowest ID on ties). Components at or above the threshold keep
    their pixels. IDs are compacted to 0..K-1.
    """
    labels = np.asarray(labels)
    components, count = label_components(labels)
    if count <= 1:
        return compact_labels(components)

    threshold = min_component_frac * labels.size / n_superpixels
    sizes = np.bincount(components.ravel(), minlength=count).astype(np.int64)
    adjacency = _shared_boundaries(components, count)
    parent = np.arange(count)
    alive = np.ones(count, dtype=bool)

    heap = [(int(size), index) for index, size in enumerate(sizes) if size < threshold]
    heapq.heapify(heap)
    merges = 0

    while heap:
        size, small = heapq.heappop(heap)
        if not alive[small] or size != sizes[small] or size >= threshold:
            continue
        neighbours = adjacency[small]
        if not neighbours:
            continue

        longest = max(neighbours.values())
        target = min(n for n, shared in neighbours.items() if shared == longest)

        # fold small into target
        for neighbour, shared in neighbours.items():
            del adjacency[neighbour][small]
            if neighbour != target:
                adjacency[target][neighbour] += shared
                adjacency[neighbour][target] += shared
        adjacency[small] = Counter()
        alive[small] = False
        parent[small] = target
        sizes[target] += sizes[small]
        sizes[small] = 0
        merges += 1

        if sizes[target] < threshold:
            heapq.heappush(heap, (int(sizes[target]), target))

    # resolve merge chains
    for index in range(count):
        root = index
        while parent[root] != root:
            root = parent[root]
        parent[index] = root

    if merges:
        logger.debug(f"Connectivity: merged {merges} of {count} components below {threshold:.1f} pixels")
    return compact_labels(parent[components])
