#!/usr/bin/env python3
"""
Input/Output validation for the superpixel segmenter

Provides validation methods to ensure data integrity throughout the pipeline.
"""

import os
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import torch

try:
    from .logger import get_logger
except ImportError:
    from logger import get_logger

logger = get_logger('validator')


class ProcessingValidator:
    """
    Validates inputs and outputs for processing stages

    Every check returns (is_valid, error_message) so callers decide whether
    a failure is fatal or only worth a warning.
    """

    @staticmethod
    def validate_input_files(file_paths: List[str]) -> Tuple[bool, str]:
        """
        Validate input files exist and are readable

        Args:
            file_paths: List of file paths to validate

        Returns:
            Tuple of (is_valid, error_message)
        """
        if not file_paths:
            return False, "No input files provided"

        if not isinstance(file_paths, list):
            return False, f"Expected list of file paths, got {type(file_paths).__name__}"

        missing_files = []
        unreadable_files = []

        for file_path in file_paths:
            if not os.path.exists(file_path):
                missing_files.append(str(file_path))
            elif not os.access(file_path, os.R_OK):
                unreadable_files.append(str(file_path))

        if missing_files:
            return False, (
                f"Missing {len(missing_files)} files:\n"
                f"{chr(10).join(missing_files[:5])}\n"
                f"{'...' if len(missing_files) > 5 else ''}"
            )

        if unreadable_files:
            return False, (
                f"Cannot read {len(unreadable_files)} files:\n"
                f"{chr(10).join(unreadable_files[:5])}\n"
                f"Check file permissions"
            )

        logger.debug(f"Validated {len(file_paths)} input files successfully")
        return True, ""

    @staticmethod
    def validate_output_path(output_path: Path) -> Tuple[bool, str]:
        """
        Validate output path is writable, creating its directory when needed

        Args:
            output_path: Path where output will be written

        Returns:
            Tuple of (is_valid, error_message)
        """
        output_path = Path(output_path)
        output_dir = output_path.parent

        if not output_dir.exists():
            try:
                output_dir.mkdir(parents=True, exist_ok=True)
                logger.info(f"Created output directory: {output_dir}")
            except Exception as e:
                return False, f"Cannot create output directory {output_dir}: {e}"

        if not os.access(output_dir, os.W_OK):
            return False, f"Output directory {output_dir} is not writable"

        if output_path.exists() and not os.access(output_path, os.W_OK):
            return False, f"Output file {output_path} exists but is not writable"

        return True, ""

    @staticmethod
    def validate_image(image: Any, min_size: int = 3, channels: Optional[int] = 3) -> Tuple[bool, str]:
        """
        Validate an H x W x C image array or tensor

        Args:
            image: numpy array or torch tensor
            min_size: Minimum height and width
            channels: Required channel count, or None for any

        Returns:
            Tuple of (is_valid, error_message)
        """
        shape = tuple(image.shape)
        if len(shape) != 3:
            return False, f"Expected an H x W x C image, got shape {shape}"

        height, width, n_channels = shape
        if height < min_size or width < min_size:
            return False, f"Image must be at least {min_size}x{min_size}, got {height}x{width}"

        if channels is not None and n_channels != channels:
            return False, f"Expected {channels} channels, got {n_channels}"

        finite = torch.isfinite(image).all() if torch.is_tensor(image) else np.isfinite(image).all()
        if not bool(finite):
            return False, "Image contains NaN or infinite values"

        return True, ""

    @staticmethod
    def validate_assignment(assignment: torch.Tensor, tolerance: float = 1e-5) -> Tuple[bool, str]:
        """
        Validate an H x W x N assignment tensor: non-negative, rows summing to one

        Args:
            assignment: Probability tensor
            tolerance: Allowed deviation of each pixel's sum from 1

        Returns:
            Tuple of (is_valid, error_message)
        """
        if assignment.dim() != 3:
            return False, f"Expected an H x W x N assignment, got shape {tuple(assignment.shape)}"

        if bool((assignment < 0).any()):
            return False, "Assignment has negative entries"

        deviation = (assignment.sum(dim=-1) - 1).abs().max().item()
        if deviation > tolerance:
            return False, f"Assignment rows do not sum to 1 (max deviation {deviation:.3g})"

        return True, ""


class StageResult:
    """
    Result container for one per-image job

    Provides consistent result format with success status,
    data payload, and error information.
    """

    def __init__(self, success: bool, data: Optional[Dict] = None,
                 error: Optional[str] = None):
        self.success = success
        self.data = data or {}
        self.error = error

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary representation"""
        return {
            'success': self.success,
            'data': self.data,
            'error': self.error
        }
