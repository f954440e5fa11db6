"""Channel-attention fusion blocks: LGAA, LGCE, SFM and the decoder ConvBlock."""

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ConfigError, ShapeError


def upsample_to(x, size):
    return F.interpolate(x, size=size, mode="bilinear", align_corners=False)


def _check_same(a, b, what):
    if a.shape != b.shape:
        raise ShapeError(f"{what}: shapes differ, {tuple(a.shape)} vs {tuple(b.shape)}")


class GateContext(nn.Module):
    """Two-path channel context: a GAP'd global vector and a per-position local map.

    Layer order follows BN -> Conv -> ReLU -> BN -> Conv on each path. The global
    BatchNorm sees one value per channel per sample, so training mode needs a
    batch of at least two.
    """

    def __init__(self, channels, reduction_ratio=4):
        super().__init__()
        if channels < reduction_ratio or channels % reduction_ratio:
            raise ConfigError(
                f"gate over {channels} channels is incompatible with reduction ratio {reduction_ratio}"
            )
        mid = channels // reduction_ratio
        self.global_ctx = nn.Sequential(
            nn.AdaptiveAvgPool2d(1),
            nn.BatchNorm2d(channels),
            nn.Conv2d(channels, mid, 1),
            nn.ReLU(inplace=True),
            nn.BatchNorm2d(mid),
            nn.Conv2d(mid, channels, 1),
        )
        self.local_ctx = nn.Sequential(
            nn.BatchNorm2d(channels),
            nn.Conv2d(channels, mid, 1),
            nn.ReLU(inplace=True),
            nn.BatchNorm2d(mid),
            nn.Conv2d(mid, channels, 1),
        )

    def forward(self, x):
        """Returns (w_global, w_local) shaped (B, C, 1, 1) and (B, C, H, W)."""
        return self.global_ctx(x), self.local_ctx(x)

    def gate(self, x):
        w_global, w_local = self(x)
        return torch.sigmoid(w_global + w_local)


class LGAA(nn.Module):
    """Local-global attentional aggregation of two equal-shape maps.

    out = f_i * s + f_j * (1 - s) with s = sigmoid(w_global + w_local) computed from
    f_i + f_j. Evaluated as f_j + s * (f_i - f_j) so that equal inputs come back
    bit-for-bit.
    """

    def __init__(self, channels, reduction_ratio=4):
        super().__init__()
        self.channels = channels
        self.context = GateContext(channels, reduction_ratio)

    def forward(self, f_i, f_j):
        _check_same(f_i, f_j, "lgaa")
        if f_i.shape[1] != self.channels:
            raise ShapeError(f"lgaa built for {self.channels} channels, got {f_i.shape[1]}")
        s = self.context.gate(f_i + f_j)
        return f_j + s * (f_i - f_j)


class ConcatFusion(nn.Module):
    """Ablation stand-in for LGAA: concatenate, then a pointwise MLP back to C channels."""

    def __init__(self, channels, reduction_ratio=4):
        super().__init__()
        self.channels = channels
        self.mlp = nn.Sequential(
            nn.Conv2d(2 * channels, channels, 1, bias=False),
            nn.BatchNorm2d(channels),
            nn.ReLU(inplace=True),
            nn.Conv2d(channels, channels, 1),
        )

    def forward(self, f_i, f_j):
        _check_same(f_i, f_j, "concat fusion")
        return self.mlp(torch.cat([f_i, f_j], dim=1))


class LGCE(nn.Module):
    """Local-global context enhancement: self-gating by the same two-path attention."""

    def __init__(self, channels, reduction_ratio=4):
        super().__init__()
        self.channels = channels
        self.context = GateContext(channels, reduction_ratio)

    def forward(self, f_h):
        return f_h * self.context.gate(f_h)


def make_fusion(channels, reduction_ratio, use_lgaa=True):
    return LGAA(channels, reduction_ratio) if use_lgaa else ConcatFusion(channels, reduction_ratio)


def make_enhance(channels, reduction_ratio, use_lgce=True):
    return LGCE(channels, reduction_ratio) if use_lgce else nn.Identity()


class ReduceUp(nn.Module):
    """Pointwise channel reduction, BN, ReLU, then 2x bilinear upsampling."""

    def __init__(self, in_channels, out_channels):
        super().__init__()
        self.conv = nn.Conv2d(in_channels, out_channels, 1, bias=False)
        self.bn = nn.BatchNorm2d(out_channels)

    def forward(self, x, size=None):
        x = F.relu(self.bn(self.conv(x)))
        if size is None:
            size = (2 * x.shape[2], 2 * x.shape[3])
        return upsample_to(x, size)


class SFM(nn.Module):
    """Semantic fusion: collapse (f1, f2, f3) into one map at f1's resolution."""

    def __init__(self, c1, c2, c3, reduction_ratio=4, use_lgaa=True):
        super().__init__()
        self.channels = (c1, c2, c3)
        self.reduce3 = ReduceUp(c3, c2)
        self.fuse2 = make_fusion(c2, reduction_ratio, use_lgaa)
        self.reduce2 = ReduceUp(c2, c1)
        self.fuse1 = make_fusion(c1, reduction_ratio, use_lgaa)

    def forward(self, f1, f2, f3):
        for f, c, name in zip((f1, f2, f3), self.channels, ("f1", "f2", "f3")):
            if f.shape[1] != c:
                raise ShapeError(f"sfm expects {c} channels for {name}, got {f.shape[1]}")
        if f2.shape[2:] != (2 * f3.shape[2], 2 * f3.shape[3]) or f1.shape[2:] != (
            2 * f2.shape[2],
            2 * f2.shape[3],
        ):
            raise ShapeError(
                "sfm inputs must halve in size level by level, got "
                f"{tuple(f1.shape[2:])}, {tuple(f2.shape[2:])}, {tuple(f3.shape[2:])}"
            )
        f2_fused = self.fuse2(f2, self.reduce3(f3, f2.shape[2:]))
        return self.fuse1(f1, self.reduce2(f2_fused, f1.shape[2:]))


class ResBlock(nn.Module):
    def __init__(self, in_channels, out_channels):
        super().__init__()
        self.conv1 = nn.Conv2d(in_channels, out_channels, 3, 1, 1, bias=False)
        self.bn1 = nn.BatchNorm2d(out_channels)
        self.conv2 = nn.Conv2d(out_channels, out_channels, 3, 1, 1, bias=False)
        self.bn2 = nn.BatchNorm2d(out_channels)
        self.skip = None
        if in_channels != out_channels:
            self.skip = nn.Sequential(
                nn.Conv2d(in_channels, out_channels, 1, bias=False),
                nn.BatchNorm2d(out_channels),
            )

    def forward(self, x):
        identity = x if self.skip is None else self.skip(x)
        out = F.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return F.relu(out + identity)


class ConvBlock(nn.Module):
    """upsample(high) ++ low -> two ResBlocks -> depthwise 3x3 (BN, ReLU)."""

    def __init__(self, high_channels, low_channels, out_channels):
        super().__init__()
        self.res1 = ResBlock(high_channels + low_channels, out_channels)
        self.res2 = ResBlock(out_channels, out_channels)
        self.dw = nn.Conv2d(out_channels, out_channels, 3, 1, 1, groups=out_channels, bias=False)
        self.dw_bn = nn.BatchNorm2d(out_channels)

    def forward(self, high, low):
        if high.shape[0] != low.shape[0]:
            raise ShapeError("conv_block inputs have different batch sizes")
        if low.shape[2:] != (2 * high.shape[2], 2 * high.shape[3]):
            raise ShapeError(
                f"conv_block needs low at twice the size of high, got {tuple(low.shape[2:])} "
                f"and {tuple(high.shape[2:])}"
            )
        x = torch.cat([upsample_to(high, low.shape[2:]), low], dim=1)
        x = self.res2(self.res1(x))
        return F.relu(self.dw_bn(self.dw(x)))
