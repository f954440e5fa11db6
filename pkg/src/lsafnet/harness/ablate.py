"""Four-variant ablation: Base, Base + LGAA, Base + LGCE, full model."""

from dataclasses import replace
from pathlib import Path

from .config import VARIANT_LABELS, VARIANTS, TrainConfig, write_config
from .evaluate import evaluate
from .train import train

# Full-scale SECOND / Landsat-SCD ablation figures (mIoU, SeK), shown for comparison only.
REFERENCE_TABLE = {
    "base": ((73.59, 23.37), (86.09, 48.67)),
    "+lgaa": ((73.82, 23.90), (87.45, 49.57)),
    "+lgce": ((73.69, 23.69), (87.44, 49.29)),
    "full": ((74.01, 24.32), (87.60, 49.94)),
}


def format_table(rows):
    lines = [
        f"{'Method':<14} {'mIoU(%)':>8} {'SeK(%)':>8}",
        "-" * 32,
    ]
    for variant, report in rows:
        lines.append(f"{VARIANT_LABELS[variant]:<14} {report.miou:>8.2f} {report.sek:>8.2f}")
    lines += [
        "",
        "reference targets at full scale (not reproduced here)",
        f"{'Method':<14} {'SECOND mIoU':>11} {'SeK':>6} {'Landsat mIoU':>12} {'SeK':>6}",
    ]
    for variant in VARIANTS:
        (m1, s1), (m2, s2) = REFERENCE_TABLE[variant]
        lines.append(f"{VARIANT_LABELS[variant]:<14} {m1:>11.2f} {s1:>6.2f} {m2:>12.2f} {s2:>6.2f}")
    return "\n".join(lines) + "\n"


def ablate(config: TrainConfig):
    """Train and evaluate every variant under the same seed, data order and schedule.

    Returns ``[(variant, MetricReport), ...]`` in table order and writes
    ``ablation.txt`` under ``config.out_dir``.
    """
    root = Path(config.out_dir)
    write_config(config, root)
    rows = []
    for variant in VARIANTS:
        cfg = replace(config, variant=variant, out_dir=str(root / variant.lstrip("+")))
        result = train(cfg)
        report = evaluate(result.best_checkpoint, config.val_root or config.data_root, config.threshold)
        rows.append((variant, report))
    (root / "ablation.txt").write_text(format_table(rows))
    return rows
