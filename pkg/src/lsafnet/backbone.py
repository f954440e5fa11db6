"""ResNet-34 style siamese encoder producing the five-level feature pyramid."""

from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import NamedTuple, Tuple
import zlib

import torch
import torch.nn as nn

from .errors import ConfigError, ShapeError, ValidationError

PIXEL_MEAN = 0.5
PIXEL_STD = 0.5


@dataclass
class NetworkConfig:
    num_classes: int = 6
    width_multiplier: float = 1.0
    encoder_depth: Tuple[int, int, int, int] = (3, 4, 6, 3)
    reduction_ratio: int = 4
    decoder_channels: int = 0  # 0 -> 64 * width_multiplier
    use_lgaa: bool = True
    use_lgce: bool = True
    pretrained: bool = False

    def __post_init__(self):
        self.encoder_depth = tuple(int(d) for d in self.encoder_depth)
        if not self.decoder_channels:
            self.decoder_channels = self.scaled(64)
        self.validate()

    @classmethod
    def tiny(cls, num_classes=6, **kwargs):
        """Quarter-width, one-block-per-stage encoder for tests and desk-scale runs.

        The decoder keeps its full 64 channels; at a quarter width it underfits
        badly at the small learning rates used for tiny runs.
        """
        kwargs.setdefault("width_multiplier", 0.25)
        kwargs.setdefault("encoder_depth", (1, 1, 1, 1))
        kwargs.setdefault("decoder_channels", 64)
        return cls(num_classes=num_classes, **kwargs)

    @classmethod
    def from_dict(cls, d):
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**known)

    def to_dict(self):
        d = asdict(self)
        d["encoder_depth"] = list(self.encoder_depth)
        return d

    def scaled(self, channels):
        return int(Fraction(str(self.width_multiplier)) * channels)

    @property
    def pyramid_channels(self):
        return tuple(self.scaled(c) for c in (64, 64, 128, 256, 512))

    def validate(self):
        if self.num_classes < 2:
            raise ConfigError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.width_multiplier <= 0:
            raise ConfigError("width_multiplier must be positive")
        if Fraction(str(self.width_multiplier)) * 64 != self.scaled(64):
            raise ConfigError(
                f"width_multiplier {self.width_multiplier} does not give an integer stem width"
            )
        if len(self.encoder_depth) != 4 or min(self.encoder_depth) < 1:
            raise ConfigError(f"encoder_depth needs four positive counts, got {self.encoder_depth}")
        if self.reduction_ratio < 1:
            raise ConfigError("reduction_ratio must be a positive integer")
        if self.decoder_channels < 1:
            raise ConfigError("decoder_channels must be positive")
        # every channel count that passes through a gate
        gated = {self.pyramid_channels[2], self.pyramid_channels[3]}
        for c in sorted(gated):
            if c % self.reduction_ratio:
                raise ConfigError(
                    f"reduction_ratio {self.reduction_ratio} does not divide gated width {c}"
                )
        if self.pretrained and (self.width_multiplier != 1 or self.encoder_depth != (3, 4, 6, 3)):
            raise ConfigError("pretrained weights exist only for the full-width ResNet-34 encoder")


class FeaturePyramid(NamedTuple):
    f_low: torch.Tensor   # stride 2
    f_mid: torch.Tensor   # stride 4
    f1: torch.Tensor      # stride 8
    f2: torch.Tensor      # stride 16
    f3: torch.Tensor      # stride 32


def normalize_image(image):
    """Map 8-bit RGB (B, 3, H, W) or (3, H, W) to roughly [-1, 1] floats."""
    x = torch.as_tensor(image).float() / 255.0
    return (x - PIXEL_MEAN) / PIXEL_STD


class BasicBlock(nn.Module):
    expansion = 1

    def __init__(self, inplanes, planes, stride=1):
        super().__init__()
        self.conv1 = nn.Conv2d(inplanes, planes, 3, stride, 1, bias=False)
        self.bn1 = nn.BatchNorm2d(planes)
        self.relu = nn.ReLU(inplace=True)
        self.conv2 = nn.Conv2d(planes, planes, 3, 1, 1, bias=False)
        self.bn2 = nn.BatchNorm2d(planes)
        self.downsample = None
        if stride != 1 or inplanes != planes:
            self.downsample = nn.Sequential(
                nn.Conv2d(inplanes, planes, 1, stride, bias=False),
                nn.BatchNorm2d(planes),
            )

    def forward(self, x):
        identity = x if self.downsample is None else self.downsample(x)
        out = self.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return self.relu(out + identity)


class ResNetEncoder(nn.Module):
    """Module names mirror torchvision's resnet so its state dicts load directly."""

    def __init__(self, config: NetworkConfig):
        super().__init__()
        self.config = config
        c_low, c_mid, c1, c2, c3 = config.pyramid_channels
        self.conv1 = nn.Conv2d(3, c_low, 7, 2, 3, bias=False)
        self.bn1 = nn.BatchNorm2d(c_low)
        self.relu = nn.ReLU(inplace=True)
        self.maxpool = nn.MaxPool2d(3, 2, 1)
        self.layer1 = self._make_layer(c_low, c_mid, config.encoder_depth[0], 1)
        self.layer2 = self._make_layer(c_mid, c1, config.encoder_depth[1], 2)
        self.layer3 = self._make_layer(c1, c2, config.encoder_depth[2], 2)
        self.layer4 = self._make_layer(c2, c3, config.encoder_depth[3], 2)

    @staticmethod
    def _make_layer(inplanes, planes, blocks, stride):
        layers = [BasicBlock(inplanes, planes, stride)]
        layers += [BasicBlock(planes, planes) for _ in range(blocks - 1)]
        return nn.Sequential(*layers)

    def forward(self, x) -> FeaturePyramid:
        check_image(x)
        f_low = self.relu(self.bn1(self.conv1(x)))
        f_mid = self.layer1(self.maxpool(f_low))
        f1 = self.layer2(f_mid)
        f2 = self.layer3(f1)
        f3 = self.layer4(f2)
        return FeaturePyramid(f_low, f_mid, f1, f2, f3)

    def load_imagenet(self):
        from torchvision.models import ResNet34_Weights, resnet34

        state = resnet34(weights=ResNet34_Weights.IMAGENET1K_V1).state_dict()
        load_torchvision_state(self, state)


def load_torchvision_state(encoder, state):
    state = {k: v for k, v in state.items() if not k.startswith("fc.")}
    encoder.load_state_dict(state, strict=True)


def check_image(x):
    if x.dim() != 4 or x.shape[1] != 3:
        raise ShapeError(f"expected a (B, 3, H, W) image batch, got {tuple(x.shape)}")
    for name, size in (("height", x.shape[2]), ("width", x.shape[3])):
        if size % 32:
            raise ShapeError(f"image {name} {size} is not divisible by 32")
    if not torch.isfinite(x).all():
        raise ValidationError("image contains non-finite values")


def extract_features(encoder: ResNetEncoder, image) -> FeaturePyramid:
    if image.dim() == 3:
        image = image.unsqueeze(0)
    return encoder(image)


def _param_generator(seed, name):
    g = torch.Generator()
    g.manual_seed((int(seed) * 1_000_003 + zlib.crc32(name.encode())) % (2**63))
    return g


def init_weights(module: nn.Module, seed: int):
    """He-normal (fan_in) init for every conv, unit/zero for norm layers.

    Each kernel draws from its own generator keyed by (seed, parameter name), so
    modules that share parameter names start from identical values even when the
    surrounding architecture differs.
    """
    for name, m in module.named_modules():
        if isinstance(m, nn.Conv2d):
            g = _param_generator(seed, name + ".weight")
            nn.init.kaiming_normal_(m.weight, mode="fan_in", nonlinearity="relu", generator=g)
            if m.bias is not None:
                nn.init.zeros_(m.bias)
        elif isinstance(m, (nn.BatchNorm2d, nn.BatchNorm1d)):
            nn.init.ones_(m.weight)
            nn.init.zeros_(m.bias)
            m.reset_running_stats()
    return module
