"""LSAFNet assembly: shared semantic branches fused only in the change decoder."""

from dataclasses import dataclass
from typing import NamedTuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from .backbone import NetworkConfig, ResNetEncoder, init_weights
from .errors import ConfigError, ShapeError
from .fusion_blocks import SFM, ConvBlock, make_enhance, make_fusion, upsample_to


class SSBranchOutput(NamedTuple):
    sem_logits: torch.Tensor   # (B, N, H, W)
    f_h_prime: torch.Tensor    # stride 8
    f_m_prime: torch.Tensor    # stride 4
    f_l_prime: torch.Tensor    # stride 2


@dataclass
class ForwardOutput:
    x1_logits: torch.Tensor
    x2_logits: torch.Tensor
    xc_logit: torch.Tensor
    cons_feat1: torch.Tensor
    cons_feat2: torch.Tensor


class SSDecoder(nn.Module):
    def __init__(self, config: NetworkConfig):
        super().__init__()
        c_low, c_mid, c1, c2, c3 = config.pyramid_channels
        dec = config.decoder_channels
        r = config.reduction_ratio
        self.sfm = SFM(c1, c2, c3, r, config.use_lgaa)
        self.lgce = make_enhance(c1, r, config.use_lgce)
        self.block_mid = ConvBlock(c1, c_mid, dec)
        self.block_low = ConvBlock(dec, c_low, dec)
        self.classifier = nn.Conv2d(dec, config.num_classes, 1)

    def forward(self, pyramid) -> SSBranchOutput:
        f_h = self.lgce(self.sfm(pyramid.f1, pyramid.f2, pyramid.f3))
        f_m = self.block_mid(f_h, pyramid.f_mid)
        f_l = self.block_low(f_m, pyramid.f_low)
        logits = self.classifier(f_l)
        logits = upsample_to(logits, (2 * logits.shape[2], 2 * logits.shape[3]))
        return SSBranchOutput(logits, f_h, f_m, f_l)


class CDDecoder(nn.Module):
    def __init__(self, config: NetworkConfig):
        super().__init__()
        c1 = config.pyramid_channels[2]
        dec = config.decoder_channels
        self.fuse_high = make_fusion(c1, config.reduction_ratio, config.use_lgaa)
        self.reduce_conv = nn.Conv2d(c1, dec, 1, bias=False)
        self.reduce_bn = nn.BatchNorm2d(dec)
        self.block_mid = ConvBlock(dec, dec, dec)
        self.block_low = ConvBlock(dec, dec, dec)
        self.classifier = nn.Conv2d(dec, 1, 1)

    @staticmethod
    def difference_maps(out1: SSBranchOutput, out2: SSBranchOutput):
        return (out1.f_m_prime - out2.f_m_prime).abs(), (out1.f_l_prime - out2.f_l_prime).abs()

    def change_features(self, out1: SSBranchOutput, out2: SSBranchOutput):
        for a, b, name in zip(out1[1:], out2[1:], ("F'_H", "F'_M", "F'_L")):
            if a.shape != b.shape:
                raise ShapeError(
                    f"branch tap {name} differs: {tuple(a.shape)} vs {tuple(b.shape)}"
                )
        high = self.fuse_high(out1.f_h_prime, out2.f_h_prime)
        high = F.relu(self.reduce_bn(self.reduce_conv(high)))
        diff_mid, diff_low = self.difference_maps(out1, out2)
        f_c = self.block_mid(high, diff_mid)
        return self.block_low(f_c, diff_low)

    def forward(self, out1, out2):
        logit = self.classifier(self.change_features(out1, out2))
        return upsample_to(logit, (2 * logit.shape[2], 2 * logit.shape[3]))


class LSAFNet(nn.Module):
    def __init__(self, config: NetworkConfig, seed=None):
        super().__init__()
        self.config = config
        self.encoder = ResNetEncoder(config)
        self.ss_decoder = SSDecoder(config)
        self.cd_decoder = CDDecoder(config)
        if seed is not None:
            init_weights(self, seed)
        if config.pretrained:
            self.encoder.load_imagenet()

    def branch(self, image) -> SSBranchOutput:
        return self.ss_decoder(self.encoder(image))

    def forward(self, t1, t2) -> ForwardOutput:
        if t1.shape != t2.shape:
            raise ShapeError(f"image pair shapes differ: {tuple(t1.shape)} vs {tuple(t2.shape)}")
        if self.training:
            # one joint pass: BN batch statistics pooled over both phases, which is
            # what the running statistics used at eval time estimate
            joint = self.branch(torch.cat([t1, t2]))
            b = t1.shape[0]
            out1 = SSBranchOutput(*(x[:b] for x in joint))
            out2 = SSBranchOutput(*(x[b:] for x in joint))
        else:
            out1 = self.branch(t1)
            out2 = self.branch(t2)
        xc = self.cd_decoder(out1, out2)
        size = t1.shape[2:]
        return ForwardOutput(
            x1_logits=out1.sem_logits,
            x2_logits=out2.sem_logits,
            xc_logit=xc,
            cons_feat1=upsample_to(out1.f_l_prime, size),
            cons_feat2=upsample_to(out2.f_l_prime, size),
        )


def semantic_change_maps(out: ForwardOutput, threshold=0.5):
    """(map1, map2, mask); maps hold classes 1..N inside the mask and 0 elsewhere."""
    if not 0.0 < threshold < 1.0:
        raise ConfigError(f"threshold must lie in (0, 1), got {threshold}")
    mask = torch.sigmoid(out.xc_logit[:, 0]) > threshold
    map1 = (out.x1_logits.argmax(dim=1) + 1) * mask
    map2 = (out.x2_logits.argmax(dim=1) + 1) * mask
    return map1, map2, mask.long()


@torch.no_grad()
def predict(model: LSAFNet, t1, t2, threshold=0.5):
    if not 0.0 < threshold < 1.0:
        raise ConfigError(f"threshold must lie in (0, 1), got {threshold}")
    was_training = model.training
    model.eval()
    try:
        out = model(t1, t2)
    finally:
        model.train(was_training)
    return semantic_change_maps(out, threshold)
