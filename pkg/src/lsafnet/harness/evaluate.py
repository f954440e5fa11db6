"""Deterministic evaluation of a checkpoint on a dataset."""

from pathlib import Path

import numpy as np
import torch

from ..data import Palette, PALETTE_FILE, load_dataset, to_tensors
from ..errors import ConfigError
from ..metrics import ConfusionMatrix, MetricReport
from ..network import predict
from .checkpoint import load_checkpoint, model_from_checkpoint


def iter_batches(samples, batch_size):
    for start in range(0, len(samples), batch_size):
        chunk = [to_tensors(s) for s in samples[start : start + batch_size]]
        yield [torch.stack(items) for items in zip(*chunk)]


def predict_samples(model, samples, threshold=0.5, batch_size=8):
    """Yields (map1, map2, mask) numpy arrays, one triple per sample."""
    for t1, t2, _, _ in iter_batches(samples, batch_size):
        map1, map2, mask = predict(model, t1, t2, threshold)
        for a, b, m in zip(map1.numpy(), map2.numpy(), mask.numpy()):
            yield a, b, m


def confusion_for(model, samples, threshold=0.5, batch_size=8, oracle=False) -> ConfusionMatrix:
    cm = ConfusionMatrix(model.config.num_classes)
    if oracle:
        for s in samples:
            cm.accumulate(s.gt1, s.gt2, s.gt1, s.gt2)
        return cm
    for s, (p1, p2, _) in zip(samples, predict_samples(model, samples, threshold, batch_size)):
        cm.accumulate(p1, p2, s.gt1, s.gt2)
    return cm


def _resolve_samples(data, num_classes):
    if isinstance(data, (str, Path)):
        root = Path(data)
        palette = Palette.from_json(root / PALETTE_FILE)
        if palette.num_classes != num_classes:
            raise ConfigError(
                f"checkpoint predicts {num_classes} classes but the dataset palette has "
                f"{palette.num_classes}"
            )
        return load_dataset(root, palette)
    return list(data)


def evaluate(checkpoint, data, threshold=0.5, shards=1, batch_size=8, oracle=False) -> MetricReport:
    """Report for ``checkpoint`` (path, state dict or model) on a dataset root or samples.

    With ``shards > 1`` the samples are split into contiguous shards whose
    confusion matrices are merged before reporting.
    """
    if isinstance(checkpoint, torch.nn.Module):
        model = checkpoint
    else:
        state = checkpoint if isinstance(checkpoint, dict) else load_checkpoint(checkpoint)
        model = model_from_checkpoint(state)
    samples = _resolve_samples(data, model.config.num_classes)
    if shards < 1:
        raise ConfigError("shards must be positive")
    cm = ConfusionMatrix(model.config.num_classes)
    for part in np.array_split(np.arange(len(samples)), shards):
        shard = [samples[i] for i in part]
        cm = cm.merge(confusion_for(model, shard, threshold, batch_size, oracle))
    return cm.report()
