"""Unsupervised per-image superpixel segmentation"""

__version__ = "1.0.0"
