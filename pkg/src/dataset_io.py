#!/usr/bin/env python3
"""
Dataset input/output for the superpixel segmenter

Loads RGB images and ground-truth label maps, builds the standardized
5-channel network input and writes segmentation artifacts (label maps,
boundary overlays, plain RGB images).

Conventions:
    ImageTensor  numpy float32 array, H x W x 3, values in [0, 1]
    LabelMap     numpy int64 array, H x W, non-negative IDs
    InputTensor  torch float32 tensor, H x W x 5 (R, G, B, column, row)
"""

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import torch
from PIL import Image, UnidentifiedImageError

try:
    from .exceptions import (FileAccessError, ImageDecodeError, LabelMapError,
                             PathNotFoundError, ShapeMismatchError)
    from .logger import get_logger
    from .metrics import boundary_map
except ImportError:
    from exceptions import (FileAccessError, ImageDecodeError, LabelMapError,
                            PathNotFoundError, ShapeMismatchError)
    from logger import get_logger
    from metrics import boundary_map

logger = get_logger('dataset_io')

PathLike = Union[str, Path]

SUPPORTED_IMAGE_FORMATS = {'PNG', 'JPEG'}
IMAGE_EXTENSIONS = {'.png', '.jpg', '.jpeg'}
ANNOTATION_EXTENSIONS = {'.png', '.csv'}
MAX_LABEL_ID = 65535
BOUNDARY_COLOR = (1.0, 0.0, 0.0)

# <image_id>_gt<k>.png / .csv
_ANNOTATION_PATTERN = re.compile(r'^(?P<image_id>.+)_gt(?P<index>\d+)$')


@dataclass
class DatasetItem:
    """One image of an evaluation dataset and its ground-truth annotations"""
    image_id: str
    image_path: Path
    annotation_paths: List[Path] = field(default_factory=list)


def load_image(path: PathLike) -> np.ndarray:
    """
    Load a PNG or JPEG file as an RGB image scaled to [0, 1]

    Args:
        path: Image file path

    Returns:
        float32 array of shape (H, W, 3)

    Raises:
        PathNotFoundError: If the file does not exist
        ImageDecodeError: If the file is not a decodable PNG/JPEG or cannot become RGB
    """
    path = Path(path)
    if not path.is_file():
        raise PathNotFoundError(str(path), operation='load_image')

    try:
        with Image.open(path) as img:
            if img.format not in SUPPORTED_IMAGE_FORMATS:
                raise ImageDecodeError(str(path), reason=f"unsupported format {img.format}")

            if img.mode.startswith('I;16') or img.mode == 'I':
                # 16-bit grayscale: keep the full range instead of clipping to 8 bits
                gray = np.asarray(img, dtype=np.float64) / 65535.0
                array = np.repeat(gray[:, :, None], 3, axis=2)
            else:
                array = np.asarray(img.convert('RGB'), dtype=np.float64) / 255.0
    except ImageDecodeError:
        raise
    except (UnidentifiedImageError, OSError, ValueError) as e:
        raise ImageDecodeError(str(path), reason=str(e)) from e

    array = np.clip(array, 0.0, 1.0).astype(np.float32)
    logger.debug(f"Loaded image {path.name}: {array.shape[0]}x{array.shape[1]}")
    return array


def load_label_map(path: PathLike, expected_shape: Optional[Tuple[int, int]] = None) -> np.ndarray:
    """
    Load a ground-truth or predicted label map

    Args:
        path: 16-bit (or 8-bit) single-channel PNG, or a CSV grid of integers
        expected_shape: Optional (H, W) the map must have

    Returns:
        int64 array of shape (H, W) with IDs read verbatim

    Raises:
        PathNotFoundError: If the file does not exist
        LabelMapError: If the file is malformed, multi-channel or has negative IDs
        ShapeMismatchError: If expected_shape is given and differs
    """
    path = Path(path)
    if not path.is_file():
        raise PathNotFoundError(str(path), operation='load_label_map')

    if path.suffix.lower() == '.csv':
        try:
            labels = np.loadtxt(path, delimiter=',', dtype=np.int64, ndmin=2)
        except ValueError as e:
            raise LabelMapError(f"Cannot parse label grid {path}: {e}", path=str(path)) from e
        if labels.size == 0:
            raise LabelMapError(f"Label grid {path} is empty", path=str(path))
        if labels.min() < 0:
            raise LabelMapError(f"Negative label IDs in {path}", path=str(path))
    else:
        try:
            with Image.open(path) as img:
                if img.mode not in ('1', 'L', 'P', 'I', 'I;16', 'I;16B', 'I;16L'):
                    raise LabelMapError(
                        f"Label map {path} must be single-channel, got mode {img.mode}",
                        path=str(path)
                    )
                labels = np.asarray(img).astype(np.int64)
        except LabelMapError:
            raise
        except (UnidentifiedImageError, OSError, ValueError) as e:
            raise LabelMapError(f"Cannot decode label map {path}: {e}", path=str(path)) from e

        if labels.min() < 0:
            raise LabelMapError(f"Negative label IDs in {path}", path=str(path))

    if expected_shape is not None and tuple(labels.shape) != tuple(expected_shape):
        raise ShapeMismatchError('load_label_map', expected_shape, labels.shape,
                                 context={'path': str(path)})

    return labels


def save_label_map(labels: np.ndarray, path: PathLike) -> None:
    """
    Save a label map as a 16-bit grayscale PNG (or a CSV grid for *.csv paths)

    load_label_map inverts this exactly.

    Raises:
        LabelMapError: If IDs are negative or exceed 65535
        FileAccessError: If the path cannot be written
    """
    path = Path(path)
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise LabelMapError(f"Label map must be 2-D, got shape {labels.shape}", path=str(path))
    if labels.size and (labels.min() < 0 or labels.max() > MAX_LABEL_ID):
        raise LabelMapError(
            f"Label IDs must lie in [0, {MAX_LABEL_ID}], got [{labels.min()}, {labels.max()}]",
            path=str(path)
        )

    try:
        if path.suffix.lower() == '.csv':
            np.savetxt(path, labels.astype(np.int64), fmt='%d', delimiter=',')
        else:
            Image.fromarray(labels.astype(np.uint16)).save(path, format='PNG')
    except OSError as e:
        raise FileAccessError(str(path), 'save_label_map') from e

    logger.debug(f"Saved label map {path.name} ({len(np.unique(labels))} labels)")


def build_network_input(image: Union[np.ndarray, torch.Tensor]) -> torch.Tensor:
    """
    Stack RGB with pixel coordinates and standardize every channel

    Channels are (R, G, B, column, row), zero-based. Each channel is
    standardized independently to mean 0 and variance 1; constant channels
    become all zeros.

    Args:
        image: (H, W, 3) RGB image

    Returns:
        float32 tensor of shape (H, W, 5)
    """
    if torch.is_tensor(image):
        rgb = image.detach().cpu().to(torch.float64)
    else:
        rgb = torch.as_tensor(np.asarray(image), dtype=torch.float64)
    if rgb.dim() != 3 or rgb.shape[2] != 3:
        raise ShapeMismatchError('build_network_input', ('H', 'W', 3), tuple(rgb.shape))

    height, width, _ = rgb.shape
    rows, columns = torch.meshgrid(
        torch.arange(height, dtype=torch.float64),
        torch.arange(width, dtype=torch.float64),
        indexing='ij'
    )
    stacked = torch.cat([rgb, columns[:, :, None], rows[:, :, None]], dim=2)

    mean = stacked.mean(dim=(0, 1), keepdim=True)
    var = stacked.var(dim=(0, 1), unbiased=False, keepdim=True)
    constant = var < 1e-12
    std = torch.where(constant, torch.ones_like(var), var.sqrt())
    standardized = torch.where(constant, torch.zeros_like(stacked), (stacked - mean) / std)

    return standardized.to(torch.float32)


def render_boundary_overlay(image: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """
    Paint superpixel boundaries pure red on a copy of the image

    A pixel is a boundary pixel when its right or bottom 4-neighbour has a
    different label.

    Raises:
        ShapeMismatchError: If image and labels differ spatially
    """
    image = np.asarray(image)
    labels = np.asarray(labels)
    if image.shape[:2] != labels.shape:
        raise ShapeMismatchError('render_boundary_overlay', image.shape[:2], labels.shape)

    overlay = image.astype(np.float32, copy=True)
    overlay[boundary_map(labels)] = BOUNDARY_COLOR
    return overlay


def save_image(image: np.ndarray, path: PathLike) -> None:
    """Write an RGB image in [0, 1] as an 8-bit PNG"""
    path = Path(path)
    pixels = np.round(np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0) * 255.0).astype(np.uint8)
    try:
        Image.fromarray(pixels).save(path, format='PNG')
    except OSError as e:
        raise FileAccessError(str(path), 'save_image') from e


def save_overlay(image: np.ndarray, labels: np.ndarray, path: PathLike) -> None:
    """Render the boundary overlay and write it as an 8-bit RGB PNG"""
    save_image(render_boundary_overlay(image, labels), path)


def discover_dataset(dataset_dir: PathLike) -> List[DatasetItem]:
    """
    Find images and their <image_id>_gt<k> annotations in a directory

    Args:
        dataset_dir: Directory holding images and annotation files side by side

    Returns:
        DatasetItems sorted by image ID; annotations sorted by k. Images
        without annotations are included with an empty annotation list.
    """
    dataset_dir = Path(dataset_dir)
    if not dataset_dir.is_dir():
        raise PathNotFoundError(str(dataset_dir), operation='discover_dataset')

    images = {}
    annotations = {}
    for path in sorted(dataset_dir.iterdir()):
        if not path.is_file():
            continue
        suffix = path.suffix.lower()
        match = _ANNOTATION_PATTERN.match(path.stem)
        if match and suffix in ANNOTATION_EXTENSIONS:
            annotations.setdefault(match.group('image_id'), []).append(
                (int(match.group('index')), path)
            )
        elif suffix in IMAGE_EXTENSIONS:
            images[path.stem] = path

    items = []
    for image_id in sorted(images):
        found = sorted(annotations.get(image_id, []), key=lambda entry: entry[0])
        items.append(DatasetItem(image_id, images[image_id], [p for _, p in found]))

    orphaned = sorted(set(annotations) - set(images))
    if orphaned:
        logger.warning(f"Annotations without an image: {', '.join(orphaned[:5])}"
                       f"{'...' if len(orphaned) > 5 else ''}")

    logger.info(f"Discovered {len(items)} images in {dataset_dir}")
    return items
