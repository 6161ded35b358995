"""``auction-gan`` command line: train, compare, eval, plot.

Exit codes: 0 success, 1 usage or configuration error, 2 numeric failure,
3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import TrainConfig, load_config_file
from .data import gmm_sample
from .errors import ConfigError, NumericError
from .metrics import evaluate_samples
from .nn.checkpoint import load_checkpoint
from .nn.rng import SeededRng
from .plotting import PALETTE, Series, coverage_svg, scatter_svg
from .trainer import (
    EpochReport,
    atomic_write_text,
    compare,
    eval_samples,
    load_ensemble,
    read_metrics_csv,
    train_run,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3

# flag destination -> config key
FLAG_KEYS = {
    "model": "model", "n_gans": "n_gans", "lam": "lambda", "epochs": "epochs",
    "batch_size": "batch_size", "lot_size": "lot_size", "baseline": "baseline",
    "normalize_bids": "normalize_bids",
}


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value file or JSON (run.json works too)")
    p.add_argument("--model", choices=("gan", "wgan"))
    p.add_argument("--n-gans", type=int)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lot-size", type=int)
    p.add_argument("--baseline", action="store_true", default=None,
                   help="independent training without auction or matching term")
    p.add_argument("--normalize-bids", choices=("none", "zscore"))
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="any other config key; repeatable")


def build_parser() -> argparse.ArgumentParser:
    parser = Parser(prog="auction-gan", description=__doc__.splitlines()[0])
    parser.add_argument("--quiet", action="store_true", help="no progress output")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)

    p = sub.add_parser("train", help="train one ensemble")
    _config_flags(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="runs/train")
    p.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)

    p = sub.add_parser("compare", help="classic vs proposed over several seeds")
    _config_flags(p)
    p.add_argument("--seeds", nargs="+", default=["0-9"],
                   help="seed list, ranges like 0-9 allowed")
    p.add_argument("--out", default="runs/compare")
    p.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)

    p = sub.add_parser("eval", help="recompute metrics from a checkpoint directory")
    p.add_argument("checkpoint")
    p.add_argument("--seed", type=int, help="evaluation seed (default: the run's)")
    p.add_argument("--n-eval", type=int)
    p.add_argument("--out", help="write the records as JSON here")
    p.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)

    p = sub.add_parser("plot", help="SVG scatter and coverage plots for run directories")
    p.add_argument("runs", nargs="+")
    p.add_argument("--out", help="output directory (default: <first run>/plots)")
    p.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)
    return parser


# ---- helpers ---------------------------------------------------------------

def parse_seeds(items) -> list[int]:
    seeds = []
    for item in items:
        for part in str(item).split(","):
            part = part.strip()
            if not part:
                continue
            if "-" in part[1:]:
                lo, hi = part.split("-", 1)
                seeds += range(int(lo), int(hi) + 1)
            else:
                seeds.append(int(part))
    if not seeds:
        raise ConfigError("at least one seed is required", key="seeds")
    return seeds


def resolve_config(args) -> TrainConfig:
    """Defaults, then the config file, then explicit flags."""
    mapping = dict(load_config_file(args.config)) if args.config else {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}", key=item)
        key, value = item.split("=", 1)
        mapping[key.strip()] = value.strip()
    for dest, key in FLAG_KEYS.items():
        value = getattr(args, dest, None)
        if value is not None:
            mapping[key] = value
    if getattr(args, "seed", None) is not None:
        mapping["seed"] = args.seed
    return TrainConfig.from_mapping(mapping).validate()


def _say(args, text: str) -> None:
    if not args.quiet:
        print(text, flush=True)


def progress_line(report: EpochReport, epochs: int) -> str:
    parts = [f"epoch {report.epoch}/{epochs}"]
    if report.auction is not None:
        scores = report.auction.scores
        best = report.auction.best_index
        parts.append(f"best gan {best} (score {scores[best]:+.4f})")
        parts.append(f"mean score {float(np.mean(scores)):+.4f}")
    else:
        parts.append("best gan -")
    if report.metrics:
        parts.append(f"mean likelihood "
                     f"{float(np.mean([r.mean_log_likelihood for r in report.metrics])):.3f}")
    return "  ".join(parts)


def find_run_json(path: Path) -> Path:
    for parent in [path, *path.parents]:
        if (parent / "run.json").is_file():
            return parent / "run.json"
    raise FileNotFoundError(f"no run.json above {path}")


# ---- commands ----------------------------------------------------------------

def cmd_train(args) -> int:
    config = resolve_config(args)
    _say(args, f"training {config.n_gans} x {config.model} "
               f"({'baseline' if config.baseline else f'lambda={config.lam}'}) -> {args.out}")
    result = train_run(config, args.out,
                       progress=lambda r: _say(args, progress_line(r, config.epochs)))
    s = result.summary
    _say(args, f"final mean likelihood {s['mean_likelihood']:.3f}  "
               f"min likelihood {s['min_likelihood']:.3f}  "
               f"covered modes {s['mean_covered_modes']:.2f}")
    return EXIT_OK


def cmd_compare(args) -> int:
    config = resolve_config(args)
    seeds = parse_seeds(args.seeds)
    result = compare(config, seeds, args.out, progress=lambda msg: _say(args, msg))
    print(result["table"], end="")
    return EXIT_OK


def eval_checkpoint(path, seed: int | None = None, n_eval: int | None = None) -> list:
    path = Path(path)
    run_json = find_run_json(path)
    config = TrainConfig.from_mapping(json.loads(run_json.read_text())["config"]).resolved()
    eval_seed = config.eval_seed if seed is None else seed
    n_eval = config.n_eval if n_eval is None else n_eval
    if path.is_dir():
        entries = load_ensemble(path)
    else:
        nets, header = load_checkpoint(path)
        entries = [(nets, header["meta"])]
    records = []
    for nets, meta in entries:
        gen = nets["generator"]
        kind = meta.get("model")
        if kind != config.model or gen.sizes != [config.latent_dim, *config.hidden, 2]:
            raise ConfigError(
                f"checkpoint gan {meta.get('gan_id')} ({kind}, layers {gen.sizes}) does not "
                f"match {run_json} ({config.model}, hidden {list(config.hidden)})", key="hidden")
        samples = eval_samples(gen, eval_seed, meta["epoch"], meta["gan_id"], n_eval)
        records.append(evaluate_samples(samples, config.gmm, meta["epoch"], meta["gan_id"],
                                        config.quality_radius, config.coverage_threshold,
                                        config.ground_metric))
    return records


def record_dict(rec) -> dict:
    return {"epoch": rec.epoch, "gan_id": rec.gan_id,
            "mean_log_likelihood": rec.mean_log_likelihood, "coverage_w1": rec.coverage_w1,
            "covered_modes": rec.covered_modes, "unassigned": rec.histogram.unassigned,
            "mode_counts": [int(c) for c in rec.histogram.counts]}


def cmd_eval(args) -> int:
    records = eval_checkpoint(args.checkpoint, args.seed, args.n_eval)
    for rec in records:
        _say(args, f"epoch {rec.epoch}  gan {rec.gan_id}  "
                   f"likelihood {rec.mean_log_likelihood:.4f}  "
                   f"coverage_w1 {rec.coverage_w1:.4f}  covered {rec.covered_modes}")
    text = json.dumps([record_dict(r) for r in records], indent=2, allow_nan=True) + "\n"
    if args.out:
        atomic_write_text(args.out, text)
    elif args.quiet:
        print(text, end="")
    return EXIT_OK


def _latest_checkpoint(run: Path) -> Path:
    dirs = sorted((run / "checkpoints").glob("epoch_*"))
    if not dirs:
        raise FileNotFoundError(f"{run / 'checkpoints'}: no epoch_* checkpoint directories")
    return dirs[-1]


def cmd_plot(args) -> int:
    runs = [Path(r) for r in args.runs]
    out = Path(args.out) if args.out else runs[0] / "plots"
    series, written = [], []
    for k, run in enumerate(runs):
        for name in ("run.json", "metrics.csv"):
            if not (run / name).is_file():
                raise FileNotFoundError(f"missing {run / name}")
        config = TrainConfig.from_mapping(json.loads((run / "run.json").read_text())["config"])
        config = config.resolved()
        rows = read_metrics_csv(run / "metrics.csv")
        arm = "baseline" if config.baseline else "proposed"
        prefix = f"{run.name}_" if len(runs) > 1 else ""
        background = gmm_sample(config.gmm, SeededRng(config.seed).fork("plot"), 1000)
        extent = config.radius + 5 * config.std + 0.5
        for nets, meta in load_ensemble(_latest_checkpoint(run)):
            samples = eval_samples(nets["generator"], config.eval_seed, meta["epoch"],
                                   meta["gan_id"], config.n_eval)
            path = out / f"{prefix}scatter_gan_{meta['gan_id']:02d}.svg"
            atomic_write_text(path, scatter_svg(
                samples, background, extent,
                f"{run.name} {arm}: GAN {meta['gan_id']} at epoch {meta['epoch']}"))
            written.append(path)
        for gan_id in sorted({int(r["gan_id"]) for r in rows}):
            mine = [r for r in rows if int(r["gan_id"]) == gan_id]
            series.append(Series(f"{run.name} {arm} gan {gan_id}",
                                 [int(r["epoch"]) for r in mine],
                                 [float(r["coverage_w1"]) for r in mine],
                                 dashed=not config.baseline,
                                 color=PALETTE[(gan_id + k) % len(PALETTE)]))
    path = out / "coverage.svg"
    atomic_write_text(path, coverage_svg(series, "coverage W1 (solid: baseline, dashed: proposed)"))
    written.append(path)
    _say(args, f"wrote {len(written)} SVG files to {out}")
    return EXIT_OK


COMMANDS = {"train": cmd_train, "compare": cmd_compare, "eval": cmd_eval, "plot": cmd_plot}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as err:
        print(err, file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as err:
        print(f"config error ({err.key}): {err}" if err.key else f"config error: {err}",
              file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as err:
        print(f"numeric failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as err:
        print(f"I/O error: {err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
