import json
import math
import re

import numpy as np
import pytest

from auction_gan import cli
from auction_gan.config import TrainConfig
from auction_gan.data import gmm_log_density
from auction_gan.errors import NumericError
from auction_gan.nn import MlpParams
from auction_gan.nn.checkpoint import load_checkpoint, save_checkpoint
from auction_gan.plotting import Axis, Series, coverage_svg
from auction_gan.trainer import eval_samples, load_ensemble, read_metrics_csv

SMALL = ["--set", "hidden=8,8", "--set", "n_data=256", "--set", "steps_per_epoch=3",
         "--set", "n_eval=300", "--batch-size", "16", "--lot-size", "16"]


def train(out, *extra):
    return cli.main(["--quiet", "train", "--n-gans", "3", "--epochs", "2", *SMALL,
                     "--out", str(out), *extra])


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("runs") / "a"
    assert train(out, "--seed", "7") == 0
    return out


def test_train_writes_artifacts(run_dir):
    assert {"run.json", "metrics.csv", "summary.json", "checkpoints"} <= {
        p.name for p in run_dir.iterdir()}
    header = (run_dir / "metrics.csv").read_text().splitlines()[1]
    assert header.endswith("score,is_best")
    assert json.loads((run_dir / "run.json").read_text())["config"]["seed"] == 7


def test_baseline_has_no_auction_columns(tmp_path):
    assert train(tmp_path, "--baseline") == 0
    header = (tmp_path / "metrics.csv").read_text().splitlines()[1]
    assert "score" not in header and "is_best" not in header


def test_progress_lines(tmp_path, capsys):
    cli.main(["train", "--n-gans", "3", "--epochs", "2", *SMALL, "--out", str(tmp_path)])
    lines = [l for l in capsys.readouterr().out.splitlines() if l.startswith("epoch")]
    assert len(lines) == 2
    assert re.match(r"epoch 1/2  best gan \d \(score [+-]\d\.\d{4}\)  mean score [+-]0\.0000"
                    r"  mean likelihood -?\d+\.\d{3}$", lines[0])


def test_single_gan_needs_baseline(tmp_path, capsys):
    assert cli.main(["train", "--n-gans", "1", "--out", str(tmp_path)]) == 1
    assert "multi-player mode requires n_gans ≥ 2" in capsys.readouterr().err


def test_bad_config_names_key(tmp_path, capsys):
    assert cli.main(["train", "--set", "widht=3", "--out", str(tmp_path)]) == 1
    assert "widht" in capsys.readouterr().err
    assert cli.main(["train", "--lambda", "-1", "--out", str(tmp_path)]) == 1
    assert "lambda" in capsys.readouterr().err


def test_usage_error_exit_code(capsys):
    assert cli.main(["train", "--no-such-flag"]) == 1
    assert cli.main([]) == 1


def test_numeric_failure_exit_code(tmp_path, monkeypatch):
    def boom(*args, **kwargs):
        raise NumericError("non-finite gradient", gan=1)

    monkeypatch.setattr(cli, "train_run", boom)
    assert train(tmp_path) == 2


def test_precedence_flag_over_file_over_default(tmp_path):
    cfg = tmp_path / "cfg.txt"
    cfg.write_text("# tiny\nepochs = 3\nlambda = 0.25\nn_gans = 3\n"
                   "hidden = 8, 8\nn_data = 256\nsteps_per_epoch = 2\nn_eval = 100\n")
    out = tmp_path / "r"
    assert cli.main(["--quiet", "train", "--config", str(cfg), "--epochs", "1",
                     "--out", str(out)]) == 0
    resolved = json.loads((out / "run.json").read_text())["config"]
    assert resolved["epochs"] == 1          # flag
    assert resolved["lambda"] == 0.25       # file
    assert resolved["batch_size"] == 256    # default


def test_run_json_round_trip(run_dir, tmp_path):
    out = tmp_path / "again"
    assert cli.main(["--quiet", "train", "--config", str(run_dir / "run.json"),
                     "--out", str(out)]) == 0
    assert (out / "metrics.csv").read_bytes() == (run_dir / "metrics.csv").read_bytes()


def test_train_independent_of_thread_count(tmp_path, monkeypatch):
    monkeypatch.setenv("AUCTION_GAN_THREADS", "1")
    assert train(tmp_path / "one") == 0
    monkeypatch.setenv("AUCTION_GAN_THREADS", "4")
    assert train(tmp_path / "four") == 0
    assert (tmp_path / "one" / "metrics.csv").read_bytes() == (
        tmp_path / "four" / "metrics.csv").read_bytes()


# ---- eval --------------------------------------------------------------------

def test_eval_reproduces_training_record(run_dir, tmp_path):
    out = tmp_path / "eval.json"
    assert cli.main(["--quiet", "eval", str(run_dir / "checkpoints" / "epoch_0002"),
                     "--out", str(out)]) == 0
    records = json.loads(out.read_text())
    rows = [r for r in read_metrics_csv(run_dir / "metrics.csv") if r["epoch"] == "2"]
    assert len(records) == len(rows) == 3
    for rec, row in zip(records, rows):
        assert repr(rec["mean_log_likelihood"]) == row["mean_log_likelihood"]
        assert repr(float(rec["coverage_w1"])) == row["coverage_w1"]
        assert rec["mode_counts"] == [int(row[f"mode_{k}"]) for k in range(8)]


def test_eval_other_seed_within_monte_carlo_band(run_dir, tmp_path):
    config = TrainConfig.from_mapping(
        json.loads((run_dir / "run.json").read_text())["config"]).resolved()
    ckpt = run_dir / "checkpoints" / "epoch_0002"
    recorded = cli.eval_checkpoint(ckpt)
    other = cli.eval_checkpoint(ckpt, seed=12345)
    for (nets, meta), a, b in zip(load_ensemble(ckpt), recorded, other):
        dens = gmm_log_density(config.gmm, eval_samples(nets["generator"], 12345, 2,
                                                        meta["gan_id"], config.n_eval))
        band = 3 * dens.std(ddof=1) / math.sqrt(config.n_eval)
        assert abs(b.mean_log_likelihood - a.mean_log_likelihood) <= band


def test_eval_zero_generator(run_dir, tmp_path):
    nets, header = load_checkpoint(run_dir / "checkpoints" / "epoch_0002" / "gan_00.ckpt")
    gen = nets["generator"]
    zero = MlpParams([np.zeros_like(w) for w in gen.weights],
                     [np.zeros_like(b) for b in gen.biases], gen.activations)
    ckpt = tmp_path / "checkpoints" / "epoch_0002"
    (tmp_path / "run.json").write_text((run_dir / "run.json").read_text())
    save_checkpoint(ckpt / "gan_00.ckpt", {"generator": zero,
                                           "discriminator": nets["discriminator"]},
                    meta=header["meta"])
    (rec,) = cli.eval_checkpoint(ckpt)
    assert rec.covered_modes <= 1


def test_eval_mismatch_is_reported(run_dir, tmp_path, capsys):
    (tmp_path / "run.json").write_text(
        (run_dir / "run.json").read_text().replace('"hidden": [\n      8,\n      8\n    ]',
                                                   '"hidden": [\n      16\n    ]'))
    ckpt = tmp_path / "checkpoints" / "epoch_0002"
    ckpt.mkdir(parents=True)
    src = run_dir / "checkpoints" / "epoch_0002" / "gan_00.ckpt"
    (ckpt / "gan_00.ckpt").write_bytes(src.read_bytes())
    assert cli.main(["eval", str(ckpt)]) == 1
    assert "does not match" in capsys.readouterr().err


# ---- plot --------------------------------------------------------------------

def test_plot_counts_and_values(run_dir, tmp_path):
    out = tmp_path / "plots"
    assert cli.main(["--quiet", "plot", str(run_dir), "--out", str(out)]) == 0
    scatters = sorted(out.glob("scatter_gan_*.svg"))
    assert len(scatters) == 3 and (out / "coverage.svg").exists()
    for path in scatters:
        assert path.read_text().count('class="sample"') == 300

    svg = (out / "coverage.svg").read_text()
    rows = read_metrics_csv(run_dir / "metrics.csv")
    lines = re.findall(r'<polyline[^>]*>', svg)
    assert len(lines) == 3
    for gan_id, line in enumerate(lines):
        values = re.search(r'data-values="([^"]*)"', line).group(1).split()
        expected = [r["coverage_w1"] for r in rows if int(r["gan_id"]) == gan_id]
        assert values == expected
        assert "stroke-dasharray" in line  # proposed arm


def test_coverage_pixels_decode_to_csv_values(tmp_path):
    values = [0.5, 0.25, float("nan"), 1.5]
    svg = coverage_svg([Series("a", [0, 1, 2, 3], values)])
    points = re.search(r'points="([^"]*)"', svg).group(1).split()
    y_hi = 1.5 * 1.05
    axis = Axis(0.0, y_hi, 420 - 40, 40)
    decoded = [axis.inverse(float(p.split(",")[1])) for p in points]
    np.testing.assert_allclose(decoded, [0.5, 0.25, 1.5], atol=1e-4)


def test_plot_overlays_baseline_solid_and_proposed_dashed(tmp_path):
    assert train(tmp_path / "classic", "--baseline") == 0
    assert train(tmp_path / "proposed") == 0
    out = tmp_path / "plots"
    assert cli.main(["--quiet", "plot", str(tmp_path / "classic"), str(tmp_path / "proposed"),
                     "--out", str(out)]) == 0
    lines = re.findall(r'<polyline[^>]*>', (out / "coverage.svg").read_text())
    solid = [l for l in lines if "stroke-dasharray" not in l]
    dashed = [l for l in lines if "stroke-dasharray" in l]
    assert len(solid) == len(dashed) == 3
    assert all("baseline" in l for l in solid) and all("proposed" in l for l in dashed)
    assert len(list(out.glob("*scatter_gan_*.svg"))) == 6


def test_plot_missing_metrics(tmp_path, capsys):
    (tmp_path / "run.json").write_text("{}")
    assert cli.main(["plot", str(tmp_path)]) == 3
    assert "metrics.csv" in capsys.readouterr().err


# ---- compare -----------------------------------------------------------------

def test_parse_seeds():
    assert cli.parse_seeds(["0-3", "7", "9,11"]) == [0, 1, 2, 3, 7, 9, 11]


def test_compare_prints_table_and_shares_init(tmp_path, capsys):
    assert cli.main(["--quiet", "compare", "--n-gans", "2", "--epochs", "1", *SMALL,
                     "--seeds", "0", "1", "--out", str(tmp_path)]) == 0
    table = capsys.readouterr().out
    assert "classic" in table and "proposed" in table and "min likelihood" in table
    for seed in (0, 1):
        a = tmp_path / f"seed_{seed}" / "classic" / "checkpoints" / "epoch_0000"
        b = tmp_path / f"seed_{seed}" / "proposed" / "checkpoints" / "epoch_0000"
        for name in ("gan_00.ckpt", "gan_01.ckpt"):
            assert (a / name).read_bytes() == (b / name).read_bytes()


def test_compare_lambda_zero_arms_match(tmp_path):
    assert cli.main(["--quiet", "compare", "--n-gans", "2", "--epochs", "1", "--lambda", "0",
                     *SMALL, "--seeds", "3", "--out", str(tmp_path)]) == 0
    result = json.loads((tmp_path / "comparison.json").read_text())["per_seed"][0]
    assert result["classic"]["mean_likelihood"] == result["proposed"]["mean_likelihood"]
