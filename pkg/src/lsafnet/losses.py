"""Multi-task objective: semantic CE, change BCE, semantic consistency and their sum."""

from dataclasses import dataclass, fields
import math

import torch
import torch.nn.functional as F

from .errors import ConfigError, NumericError, ShapeError, ValidationError

CONVENTIONS = ("as_printed", "inverted")
COSINE_EPS = 1e-8


@dataclass
class LossBundle:
    l_ss1: torch.Tensor
    l_ss2: torch.Tensor
    l_bcd: torch.Tensor
    l_sc: torch.Tensor
    total: torch.Tensor

    def as_floats(self):
        return {f.name: float(torch.as_tensor(getattr(self, f.name)).detach()) for f in fields(self)}


def ce_semantic(logits, label):
    """Softmax CE over pixels with label != 0; label k is scored against channel k - 1.

    Averaged per image, then over the batch with equal image weights. An image with
    no labelled pixel contributes 0.
    """
    if logits.dim() == 3:
        logits, label = logits.unsqueeze(0), label.unsqueeze(0)
    n = logits.shape[1]
    if label.shape != (logits.shape[0],) + tuple(logits.shape[2:]):
        raise ShapeError(f"label shape {tuple(label.shape)} does not fit logits {tuple(logits.shape)}")
    label = label.long()
    if label.numel() and (label.min() < 0 or label.max() > n):
        raise ValidationError(f"semantic labels must lie in 0..{n}")
    valid = label > 0
    pix = F.cross_entropy(logits, (label - 1).clamp(min=0), reduction="none")
    pix = pix * valid
    count = valid.flatten(1).sum(dim=1)
    per_image = pix.flatten(1).sum(dim=1) / count.clamp(min=1)
    return per_image.mean()


def bce_change(logit, y_c):
    if logit.dim() == 4:
        logit = logit[:, 0]
    if logit.shape != y_c.shape:
        raise ShapeError(f"change target {tuple(y_c.shape)} does not fit logit {tuple(logit.shape)}")
    pix = F.binary_cross_entropy_with_logits(logit, y_c.to(logit.dtype), reduction="none")
    if pix.dim() == 2:
        return pix.mean()
    return pix.flatten(1).mean(dim=1).mean()


def cosine_map(x1, x2):
    """Cosine over the channel axis; exact-zero vectors give 0."""
    dot = (x1 * x2).sum(dim=1)
    norms = x1.norm(dim=1) * x2.norm(dim=1)
    return dot / norms.clamp(min=COSINE_EPS)


def consistency(x1, x2, y_c, convention="as_printed"):
    """Per-pixel 1 - cos on changed pixels and cos on unchanged ones (as_printed).

    ``inverted`` swaps the two branches.
    """
    if convention not in CONVENTIONS:
        raise ConfigError(f"unknown consistency convention {convention!r}")
    if x1.dim() == 3:
        x1, x2, y_c = x1.unsqueeze(0), x2.unsqueeze(0), y_c.unsqueeze(0)
    if x1.shape != x2.shape:
        raise ShapeError(f"consistency features differ: {tuple(x1.shape)} vs {tuple(x2.shape)}")
    if y_c.shape != (x1.shape[0],) + tuple(x1.shape[2:]):
        raise ShapeError(f"change target {tuple(y_c.shape)} does not fit features {tuple(x1.shape)}")
    cos = cosine_map(x1, x2)
    changed = y_c.to(torch.bool)
    if convention == "inverted":
        changed = ~changed
    pix = torch.where(changed, 1.0 - cos, cos)
    return pix.flatten(1).mean(dim=1).mean()


def total(l_bcd, l_ss1, l_ss2, l_sc) -> LossBundle:
    parts = {"l_bcd": l_bcd, "l_ss1": l_ss1, "l_ss2": l_ss2, "l_sc": l_sc}
    for name, value in parts.items():
        scalar = float(value.detach()) if torch.is_tensor(value) else float(value)
        if not math.isfinite(scalar):
            raise NumericError(f"loss component {name} is not finite ({scalar})")
    value = l_bcd + 0.5 * (l_ss1 + l_ss2) + l_sc
    return LossBundle(l_ss1=l_ss1, l_ss2=l_ss2, l_bcd=l_bcd, l_sc=l_sc, total=value)


def lsafnet_loss(out, gt1, gt2, convention="as_printed") -> LossBundle:
    """Full objective for a batch of ForwardOutput against semantic change labels."""
    y_c = (gt1 != 0).long()
    return total(
        bce_change(out.xc_logit, y_c),
        ce_semantic(out.x1_logits, gt1),
        ce_semantic(out.x2_logits, gt2),
        consistency(out.cons_feat1, out.cons_feat2, y_c, convention),
    )
