#!/usr/bin/env python3
"""
Per-image convolutional network producing superpixel assignments

    input (H x W x 5)
      -> feature extractor: ConvInReLU blocks, widths doubling from base_channels
      -> concat(features, Laplacian(features))
      -> ASPP: one dilated ConvInReLU branch per dilation rate, concatenated
      -> projection: ConvInReLU, then 1x1 conv to N + 3 channels
      -> softmax over the first N channels = assignment, last 3 = reconstruction

Modules work on B x C x H x W tensors internally; SuperpixelNet.forward takes
and returns the H x W x C layout used by the rest of the package.
"""

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np
import torch
from torch import nn

try:
    from .config import NetworkConfig
    from .exceptions import ShapeMismatchError, WeightFormatError
    from .logger import get_logger
    from .superpix_ops import laplacian_nchw
except ImportError:
    from config import NetworkConfig
    from exceptions import ShapeMismatchError, WeightFormatError
    from logger import get_logger
    from superpix_ops import laplacian_nchw

logger = get_logger('network')

WEIGHTS_MAGIC = b'SPXW'
WEIGHTS_FORMAT_VERSION = 1


@dataclass
class ModelOutput:
    """Network output split into its two heads"""
    assignment: torch.Tensor      # H x W x N, rows sum to 1
    reconstruction: torch.Tensor  # H x W x 3, unbounded


class ConvInReLU(nn.Module):
    """3x3 (optionally dilated) convolution, instance normalization, ReLU"""

    def __init__(self, in_channels: int, out_channels: int, dilation: int = 1):
        super().__init__()
        # padding = dilation keeps the spatial shape for a 3x3 kernel
        self.conv = nn.Conv2d(in_channels, out_channels, kernel_size=3, stride=1,
                              padding=dilation, dilation=dilation, bias=False)
        self.norm = nn.InstanceNorm2d(out_channels, affine=True)
        self.relu = nn.ReLU()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.relu(self.norm(self.conv(x)))


class FeatureExtractor(nn.Module):
    """Chain of ConvInReLU blocks whose widths double from base_channels"""

    def __init__(self, in_channels: int, cfg: NetworkConfig):
        super().__init__()
        self.concat_all_blocks = cfg.concat_all_blocks
        blocks = []
        previous = in_channels
        for width in cfg.block_channels:
            blocks.append(ConvInReLU(previous, width))
            previous = width
        self.blocks = nn.ModuleList(blocks)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        outputs = []
        for block in self.blocks:
            x = block(x)
            outputs.append(x)
        if not self.concat_all_blocks:
            return outputs[-1]
        return torch.cat(outputs, dim=1)


class ASPP(nn.Module):
    """Atrous spatial pyramid: parallel dilated ConvInReLU branches, concatenated"""

    def __init__(self, in_channels: int, branch_channels: int, dilation_rates: List[int]):
        super().__init__()
        self.branches = nn.ModuleList(
            ConvInReLU(in_channels, branch_channels, dilation=rate) for rate in dilation_rates
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return torch.cat([branch(x) for branch in self.branches], dim=1)


class SuperpixelNet(nn.Module):
    """
    The per-image superpixel network

    Weights are initialised deterministically from cfg.seed, so two instances
    built from the same config are identical.
    """

    INPUT_CHANNELS = 5
    RECONSTRUCTION_CHANNELS = 3

    def __init__(self, cfg: NetworkConfig):
        super().__init__()
        self.cfg = cfg
        self.features = FeatureExtractor(self.INPUT_CHANNELS, cfg)

        aspp_in = cfg.feature_channels * (2 if cfg.laplacian_features else 1)
        self.aspp = ASPP(aspp_in, cfg.aspp_branch_channels, cfg.dilation_rates)

        self.projection = ConvInReLU(cfg.aspp_branch_channels * len(cfg.dilation_rates),
                                     cfg.projection_channels)
        self.head = nn.Conv2d(cfg.projection_channels,
                              cfg.n_superpixels + self.RECONSTRUCTION_CHANNELS,
                              kernel_size=1)

        self.reset_parameters(cfg.seed)

    def reset_parameters(self, seed: int) -> None:
        """He-style uniform fan-in initialisation drawn from a seeded generator"""
        generator = torch.Generator().manual_seed(seed)
        with torch.no_grad():
            for module in self.modules():
                if isinstance(module, nn.Conv2d):
                    fan_in = module.in_channels // module.groups * math.prod(module.kernel_size)
                    bound = math.sqrt(6.0 / fan_in)
                    module.weight.copy_(
                        torch.empty(module.weight.shape).uniform_(-bound, bound, generator=generator)
                    )
                    if module.bias is not None:
                        bias_bound = 1.0 / math.sqrt(fan_in)
                        module.bias.copy_(
                            torch.empty(module.bias.shape).uniform_(-bias_bound, bias_bound,
                                                                    generator=generator)
                        )
                elif isinstance(module, nn.InstanceNorm2d):
                    module.weight.fill_(1.0)
                    module.bias.fill_(0.0)

    def forward_logits(self, x: torch.Tensor) -> torch.Tensor:
        """Raw head output, 1 x (N + 3) x H x W, for an H x W x 5 input"""
        if x.dim() != 3 or x.shape[2] != self.INPUT_CHANNELS:
            raise ShapeMismatchError('SuperpixelNet.forward', ('H', 'W', self.INPUT_CHANNELS), tuple(x.shape))

        h = x.permute(2, 0, 1).unsqueeze(0)
        features = self.features(h)
        if self.cfg.laplacian_features:
            features = torch.cat([features, laplacian_nchw(features)], dim=1)
        return self.head(self.projection(self.aspp(features)))

    def forward(self, x: torch.Tensor) -> ModelOutput:
        logits = self.forward_logits(x)
        return split_logits(logits, self.cfg.n_superpixels)


def split_logits(logits: torch.Tensor, n_superpixels: int) -> ModelOutput:
    """Softmax the first N channels into an assignment; the rest is the reconstruction"""
    logits = logits.squeeze(0).permute(1, 2, 0)
    assignment = torch.softmax(logits[..., :n_superpixels], dim=-1)
    reconstruction = logits[..., n_superpixels:]
    return ModelOutput(assignment=assignment, reconstruction=reconstruction)


def save_weights(model: SuperpixelNet, path: Union[str, Path]) -> None:
    """
    Write the parameters to a flat little-endian float32 container

    Layout: b'SPXW', uint32 header length, UTF-8 JSON header, float32 data.
    """
    path = Path(path)
    entries = []
    chunks = []
    offset = 0
    for name, parameter in model.named_parameters():
        values = parameter.detach().cpu().numpy().astype('<f4').ravel()
        entries.append({'name': name, 'shape': list(parameter.shape), 'offset': offset, 'count': int(values.size)})
        chunks.append(values.tobytes())
        offset += int(values.size)

    header = json.dumps({
        'format_version': WEIGHTS_FORMAT_VERSION,
        'dtype': 'float32-le',
        'network_config': model.cfg.to_dict(),
        'parameters': entries,
    }, sort_keys=True).encode('utf-8')

    with open(path, 'wb') as f:
        f.write(WEIGHTS_MAGIC)
        f.write(struct.pack('<I', len(header)))
        f.write(header)
        for chunk in chunks:
            f.write(chunk)

    logger.debug(f"Saved {len(entries)} parameter tensors ({offset} values) to {path}")


def _parse_container(path: Path, raw: bytes) -> Tuple[dict, int]:
    if raw[:4] != WEIGHTS_MAGIC:
        raise WeightFormatError(str(path), 'bad magic bytes')
    if len(raw) < 8:
        raise WeightFormatError(str(path), 'truncated header')
    (length,) = struct.unpack('<I', raw[4:8])
    try:
        header = json.loads(raw[8:8 + length].decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise WeightFormatError(str(path), f'unreadable header: {e}') from e
    return header, 8 + length


def read_weights_header(path: Union[str, Path]) -> dict:
    """Read only the JSON header of a weight container"""
    path = Path(path)
    header, _ = _parse_container(path, path.read_bytes())
    return header


def load_weights(model: SuperpixelNet, path: Union[str, Path]) -> SuperpixelNet:
    """Load parameters written by save_weights into a model of the same architecture"""
    path = Path(path)
    raw = path.read_bytes()
    header, data_start = _parse_container(path, raw)
    if header.get('format_version') != WEIGHTS_FORMAT_VERSION:
        raise WeightFormatError(str(path), f"unsupported format version {header.get('format_version')}")

    payload = raw[data_start:]
    if len(payload) % 4:
        raise WeightFormatError(str(path), 'data section is not a whole number of float32 values')
    data = np.frombuffer(payload, dtype='<f4')

    parameters = dict(model.named_parameters())
    entries = header['parameters']
    if [entry['name'] for entry in entries] != list(parameters):
        raise WeightFormatError(str(path), 'parameter names do not match the model')

    with torch.no_grad():
        for entry in entries:
            target = parameters[entry['name']]
            if list(target.shape) != entry['shape']:
                raise WeightFormatError(str(path), f"shape mismatch for {entry['name']}")
            end = entry['offset'] + entry['count']
            if end > data.size:
                raise WeightFormatError(str(path), 'truncated data section')
            values = torch.from_numpy(data[entry['offset']:end].copy()).reshape(entry['shape'])
            target.copy_(values.to(dtype=target.dtype, device=target.device))

    logger.debug(f"Loaded {len(entries)} parameter tensors from {path}")
    return model


def forward(input_tensor: torch.Tensor, cfg: NetworkConfig) -> ModelOutput:
    """One forward pass of a freshly initialised network built from cfg"""
    return SuperpixelNet(cfg)(input_tensor)
