#!/usr/bin/env python3
"""
Custom exception classes for the superpixel segmenter
Provides domain-specific exceptions with error codes and remediation guidance
"""

from typing import Any, Dict, Optional, Tuple


class SuperpixError(Exception):
    """Base exception class for the superpixel segmenter"""

    def __init__(self, message: str, error_code: str = None, remediation: str = None,
                 context: Dict[str, Any] = None):
        super().__init__(message)
        self.error_code = error_code or self.__class__.__name__
        self.remediation = remediation
        self.context = context or {}

    def to_dict(self) -> Dict[str, Any]:
        """Convert exception to dictionary for structured logging"""
        return {
            'error_type': self.__class__.__name__,
            'error_code': self.error_code,
            'message': str(self),
            'remediation': self.remediation,
            'context': self.context
        }


class ConfigurationError(SuperpixError):
    """Invalid hyper-parameter or runtime setting"""

    def __init__(self, message: str, setting_name: str = None, **kwargs):
        super().__init__(message, **kwargs)
        if setting_name:
            self.context['setting_name'] = setting_name


class PathNotFoundError(SuperpixError):
    """File or directory path not found"""

    def __init__(self, path: str, operation: str = None, **kwargs):
        message = f"Path not found: {path}"
        if operation:
            message = f"Path not found for {operation}: {path}"

        remediation = f"Please verify the path exists and is accessible: {path}"

        super().__init__(message, remediation=remediation, **kwargs)
        self.context['path'] = str(path)
        self.context['operation'] = operation


class ImageDecodeError(SuperpixError):
    """Image could not be decoded or converted to RGB"""

    def __init__(self, path: str, reason: str = None, **kwargs):
        message = f"Failed to decode image: {path}"
        if reason:
            message = f"Failed to decode image {path}: {reason}"

        remediation = (
            "Only PNG and JPEG files are supported. Check that the file is not truncated "
            "and that its colour mode can be converted to RGB."
        )

        super().__init__(message, remediation=remediation, **kwargs)
        self.context['path'] = str(path)
        self.context['reason'] = reason


class LabelMapError(SuperpixError):
    """Label map file or array is malformed"""

    def __init__(self, message: str, path: str = None, **kwargs):
        remediation = (
            "Label maps must be single-channel 16-bit PNGs or comma-separated integer grids "
            "with non-negative IDs no larger than 65535."
        )
        super().__init__(message, remediation=remediation, **kwargs)
        if path is not None:
            self.context['path'] = str(path)


class ShapeMismatchError(SuperpixError):
    """Two operands do not share the required shape"""

    def __init__(self, operation: str, expected: Tuple[int, ...], actual: Tuple[int, ...], **kwargs):
        message = f"Shape mismatch in {operation}: expected {tuple(expected)}, got {tuple(actual)}"
        super().__init__(message, **kwargs)
        self.context['operation'] = operation
        self.context['expected'] = list(expected)
        self.context['actual'] = list(actual)


class NonFiniteLossError(SuperpixError):
    """The training objective became NaN or infinite"""

    def __init__(self, iteration: int, components: Dict[str, float] = None, **kwargs):
        message = f"Non-finite objective at iteration {iteration}"

        remediation = (
            "Lower the learning rate or the loss weights, or check the input image for "
            "NaN/Inf values."
        )

        super().__init__(message, remediation=remediation, **kwargs)
        self.iteration = iteration
        self.context['iteration'] = iteration
        self.context['components'] = components or {}


class EvaluationError(SuperpixError):
    """Metrics could not be computed"""

    def __init__(self, message: str, image_id: str = None, **kwargs):
        super().__init__(message, **kwargs)
        if image_id:
            self.context['image_id'] = image_id


class WeightFormatError(SuperpixError):
    """Weight container is malformed or does not match the model"""

    def __init__(self, path: str, reason: str, **kwargs):
        message = f"Invalid weight file {path}: {reason}"
        remediation = "Re-export the weights with save_weights using the same network configuration"
        super().__init__(message, remediation=remediation, **kwargs)
        self.context['path'] = str(path)
        self.context['reason'] = reason


class FileAccessError(SuperpixError):
    """File access permission or write errors"""

    def __init__(self, filename: str, operation: str, **kwargs):
        message = f"File access error during {operation}: {filename}"

        remediation = (
            f"Verify read/write permissions for: {filename}. "
            f"Ensure the parent directory exists and the disk is not full."
        )

        super().__init__(message, remediation=remediation, **kwargs)
        self.context['filename'] = str(filename)
        self.context['operation'] = operation


def create_exception_from_error(error: Exception, context: Dict[str, Any] = None) -> SuperpixError:
    """Convert standard exceptions to SuperpixError with context"""

    context = context or {}

    if isinstance(error, SuperpixError):
        return error

    error_type = type(error).__name__
    error_message = str(error)

    if isinstance(error, FileNotFoundError):
        return PathNotFoundError(
            path=context.get('path', error.filename or 'unknown'),
            operation=context.get('operation', 'file access'),
            context=context
        )

    elif isinstance(error, PermissionError):
        return FileAccessError(
            filename=context.get('filename', error.filename or 'unknown'),
            operation=context.get('operation', 'file access'),
            context=context
        )

    elif isinstance(error, OSError):
        return FileAccessError(
            filename=context.get('filename', getattr(error, 'filename', None) or 'unknown'),
            operation=context.get('operation', f"{error_type}: {error_message}"),
            context=context
        )

    elif isinstance(error, (ValueError, TypeError)):
        return ConfigurationError(
            f"{error_type}: {error_message}",
            setting_name=context.get('field'),
            context=context
        )

    return SuperpixError(
        message=f"{error_type}: {error_message}",
        error_code=error_type,
        context=context
    )
