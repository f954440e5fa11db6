"""Versioned checkpoint files."""

import io
import os
from pathlib import Path

import torch

from ..backbone import NetworkConfig
from ..errors import CheckpointError
from ..network import LSAFNet

FORMAT_VERSION = "lsafnet-ckpt-1"


def make_checkpoint(model, optimizer=None, epoch=0, step=0, best_sek=None, extra=None):
    return {
        "format_version": FORMAT_VERSION,
        "network_config": model.config.to_dict(),
        "model": model.state_dict(),
        "optimizer": None if optimizer is None else optimizer.state_dict(),
        "epoch": int(epoch),
        "step": int(step),
        "best_sek": best_sek,
        "rng_states": {"torch": torch.get_rng_state()},
        "extra": dict(extra or {}),
    }


def save_checkpoint(path, state):
    # serialize through a buffer: saving straight to a path embeds the file
    # name in the archive, so equal states under different names would differ
    buf = io.BytesIO()
    torch.save(state, buf)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(buf.getvalue())
    os.replace(tmp, path)
    return path


def load_checkpoint(path):
    try:
        state = torch.load(path, map_location="cpu", weights_only=False)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(state, dict) or state.get("format_version") != FORMAT_VERSION:
        found = state.get("format_version") if isinstance(state, dict) else type(state).__name__
        raise CheckpointError(f"checkpoint {path} has format {found!r}, expected {FORMAT_VERSION!r}")
    return state


def model_from_checkpoint(state) -> LSAFNet:
    if not isinstance(state, dict):
        state = load_checkpoint(state)
    config = NetworkConfig.from_dict(dict(state["network_config"], pretrained=False))
    model = LSAFNet(config)
    model.load_state_dict(state["model"])
    model.eval()
    return model
