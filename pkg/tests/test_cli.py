import subprocess
import sys

import numpy as np
import pytest

from lsafnet.data import Palette, load_dataset
from lsafnet.harness.cli import main
from lsafnet.harness.render import parse_label_png, parse_mask_png
from lsafnet.harness.train import parse_log
from lsafnet.metrics import MetricReport


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    assert main(["gen-synthetic", "--set", f"out_dir={data}", "--set", "count=4",
                 "--set", "size=32", "--set", "num_classes=3", "--set", "seed=2"]) == 0
    cfg = root / "train.yaml"
    cfg.write_text(
        "train:\n"
        f"  data_root: {data}\n"
        f"  out_dir: {root / 'run'}\n"
        "  model_size: tiny\n"
        "  epochs: 1\n"
        "  batch_size: 2\n"
        "  lr: 7e-3\n"
    )
    assert main(["train", "--config", str(cfg)]) == 0
    return root


def test_gen_synthetic_writes_valid_dataset(workspace):
    samples = load_dataset(workspace / "data")
    assert len(samples) == 4
    assert (workspace / "data" / "synthetic_config.yaml").exists()


def test_train_writes_outputs(workspace):
    run = workspace / "run"
    for name in ("config.yaml", "train_log.txt", "best.pt", "last.pt"):
        assert (run / name).exists()
    assert len(parse_log(run / "train_log.txt")) == 1


def test_eval_prints_report(workspace, capsys):
    out = workspace / "eval"
    assert main(["eval", "--set", f"checkpoint={workspace / 'run' / 'best.pt'}",
                 "--set", f"data_root={workspace / 'data'}", "--set", f"out_dir={out}"]) == 0
    line = capsys.readouterr().out.strip()
    report = MetricReport.from_text(line)
    assert line.startswith("mIoU=") and (out / "report.txt").read_text().strip() == line
    assert -100 <= report.sek <= 100


def test_eval_oracle_flag(workspace, capsys):
    assert main(["eval", "--set", f"checkpoint={workspace / 'run' / 'best.pt'}",
                 "--set", f"data_root={workspace / 'data'}", "--set", "oracle=true"]) == 0
    assert capsys.readouterr().out.strip() == "mIoU=100.00 Avg=100.00 SeK=100.00 Fscd=100.00"


def test_predict_renders_consistent_maps(workspace):
    out = workspace / "pred"
    assert main(["predict", "--set", f"checkpoint={workspace / 'run' / 'best.pt'}",
                 "--set", f"data_root={workspace / 'data'}", "--set", f"out_dir={out}"]) == 0
    palette = Palette.from_json(workspace / "data" / "palette.json")
    for s in load_dataset(workspace / "data"):
        m1 = parse_label_png(out / f"{s.stem}_t1.png", palette)
        m2 = parse_label_png(out / f"{s.stem}_t2.png", palette)
        mask = parse_mask_png(out / f"{s.stem}_change.png")
        assert np.array_equal(m1 == 0, mask == 0) and np.array_equal(m2 == 0, mask == 0)
    assert (out / "predict_config.yaml").exists()


def test_resume_flag(workspace):
    run = workspace / "run"
    assert main(["train", "--config", str(workspace / "train.yaml"), "--set", "epochs=2",
                 "--resume", str(run / "last.pt")]) == 0
    assert [r["epoch"] for r in parse_log(run / "train_log.txt")] == [1, 2]


def test_ablate_command(workspace, capsys):
    out = workspace / "ablation"
    assert main(["ablate", "--config", str(workspace / "train.yaml"), "--set", f"out_dir={out}",
                 "--set", "max_steps=1"]) == 0
    text = capsys.readouterr().out
    for label in ("Base", "Base + LGAA", "Base + LGCE", "LSAFNet"):
        assert label in text
    assert (out / "ablation.txt").read_text() == text


def test_errors_exit_with_code_2(workspace, capsys):
    assert main(["train", "--set", "variant=bogus"]) == 2
    assert "variant" in capsys.readouterr().err
    assert main(["gen-synthetic", "--set", f"out_dir={workspace / 'bad'}", "--set", "size=40"]) == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "lsafnet", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for cmd in ("gen-synthetic", "train", "eval", "predict", "ablate"):
        assert cmd in proc.stdout
