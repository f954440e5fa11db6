"""SGD training loop with polynomial learning-rate decay."""

from dataclasses import dataclass, field
import logging
import math
from pathlib import Path
from typing import List

import torch

from ..data import Palette, PALETTE_FILE, SCDDataset, load_dataset
from ..errors import ConfigError, NumericError
from ..losses import lsafnet_loss
from ..network import LSAFNet
from .checkpoint import load_checkpoint, make_checkpoint, save_checkpoint
from .config import TrainConfig, write_config
from .evaluate import confusion_for

log = logging.getLogger(__name__)

LOSS_KEYS = ("l_ss1", "l_ss2", "l_bcd", "l_sc", "total")
LOG_KEYS = ("epoch", "step") + LOSS_KEYS + ("miou", "avg", "sek", "fscd")


@dataclass
class TrainResult:
    out_dir: Path
    last_checkpoint: Path
    best_checkpoint: Path
    log_path: Path
    history: List[dict] = field(default_factory=list)


def poly_lr(base_lr, step, total_steps, power=0.9):
    return base_lr * (1.0 - min(step, total_steps) / total_steps) ** power


def format_record(record):
    parts = []
    for key in LOG_KEYS:
        if key not in record:
            continue
        value = record[key]
        parts.append(f"{key}={value}" if isinstance(value, int) else f"{key}={value:.8g}")
    return " ".join(parts)


def parse_log(path):
    records = []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        rec = {}
        for item in line.split():
            key, value = item.split("=", 1)
            rec[key] = int(value) if key in ("epoch", "step") else float(value)
        records.append(rec)
    return records


def set_deterministic(seed):
    torch.manual_seed(seed)
    torch.use_deterministic_algorithms(True)


def _load_split(root, num_classes):
    palette = Palette.from_json(Path(root) / PALETTE_FILE)
    if num_classes is not None and palette.num_classes != num_classes:
        raise ConfigError(
            f"network configured for {num_classes} classes but {root} has {palette.num_classes}"
        )
    return load_dataset(root, palette), palette


def _batch_indices(order, batch_size):
    for start in range(0, len(order), batch_size):
        idx = order[start : start + batch_size]
        # gate BatchNorm over pooled vectors needs two samples in training mode
        if len(idx) >= 2:
            yield idx


def _batches(dataset, order, batch_size):
    for idx in _batch_indices(order, batch_size):
        items = [dataset[int(i)] for i in idx]
        yield [torch.stack(parts) for parts in zip(*items)]


def train(config: TrainConfig, resume=None) -> TrainResult:
    set_deterministic(config.seed)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_config(config, out_dir)

    train_samples, palette = _load_split(config.data_root, config.network.get("num_classes"))
    net_config = config.network_config(num_classes=palette.num_classes)
    if net_config.num_classes != palette.num_classes:
        raise ConfigError("network num_classes does not match the dataset palette")
    if config.val_root:
        val_samples, _ = _load_split(config.val_root, net_config.num_classes)
    else:
        val_samples = train_samples

    model = LSAFNet(net_config, seed=config.seed)
    optimizer = torch.optim.SGD(
        model.parameters(), lr=config.lr, momentum=config.momentum, weight_decay=config.weight_decay
    )
    dataset = SCDDataset(train_samples, augment=config.augment, seed=config.seed)
    steps_per_epoch = sum(1 for _ in _batch_indices(range(len(dataset)), config.batch_size))
    if steps_per_epoch == 0:
        raise ConfigError("dataset too small for one training batch")
    total_steps = config.max_steps or config.epochs * steps_per_epoch
    epochs = math.ceil(total_steps / steps_per_epoch)

    start_epoch, step, best_sek = 1, 0, None
    log_path = out_dir / "train_log.txt"
    if resume is not None:
        state = load_checkpoint(resume)
        model.load_state_dict(state["model"])
        optimizer.load_state_dict(state["optimizer"])
        torch.set_rng_state(state["rng_states"]["torch"])
        start_epoch, step, best_sek = state["epoch"] + 1, state["step"], state["best_sek"]
    else:
        log_path.write_text("")

    last_path, best_path = out_dir / "last.pt", out_dir / "best.pt"
    history = []
    for epoch in range(start_epoch, epochs + 1):
        if step >= total_steps:
            break
        model.train()
        dataset.set_epoch(epoch)
        g = torch.Generator().manual_seed(config.seed * 100_003 + epoch)
        order = torch.randperm(len(dataset), generator=g).tolist()
        sums = dict.fromkeys(LOSS_KEYS, 0.0)
        n_steps = 0
        for t1, t2, gt1, gt2 in _batches(dataset, order, config.batch_size):
            if step >= total_steps:
                break
            lr = poly_lr(config.lr, step, total_steps, config.lr_power)
            for group in optimizer.param_groups:
                group["lr"] = lr
            out = model(t1, t2)
            try:
                bundle = lsafnet_loss(out, gt1, gt2, config.consistency_convention)
            except NumericError as exc:
                raise NumericError(f"step {step + 1}, epoch {epoch}: {exc}") from exc
            optimizer.zero_grad(set_to_none=True)
            bundle.total.backward()
            optimizer.step()
            step += 1
            n_steps += 1
            for key, value in bundle.as_floats().items():
                sums[key] += value

        record = {"epoch": epoch, "step": step}
        record.update({k: v / max(n_steps, 1) for k, v in sums.items()})
        if epoch % config.eval_interval == 0 or step >= total_steps:
            report = confusion_for(model, val_samples, config.threshold, config.batch_size).report()
            record.update(report.as_dict())
            if best_sek is None or report.sek > best_sek:
                best_sek = report.sek
                save_checkpoint(best_path, make_checkpoint(model, optimizer, epoch, step, best_sek))
        history.append(record)
        with open(log_path, "a") as fh:
            fh.write(format_record(record) + "\n")
        log.info(format_record(record))
        save_checkpoint(last_path, make_checkpoint(model, optimizer, epoch, step, best_sek))

    if not best_path.exists() and last_path.exists():
        save_checkpoint(best_path, load_checkpoint(last_path))
    return TrainResult(out_dir, last_path, best_path, log_path, history)
