"""Multi-pair training loop: individual training, auction, auxiliary training.

Each epoch runs three phases with a barrier between them:

1. individual training of every pair on its own minibatches;
2. an auction over post-individual parameters that picks the best pair;
3. a second pass over minibatches in which every discriminator minimises
   ``L_D + lam * L_aux``, where ``L_aux`` matches its per-sample loss outputs to
   those of a frozen snapshot of the best discriminator.

Baseline runs replace phase 3 with the identical minibatch loop without the
matching term and skip the auction, so both arms get the same number of
updates. All randomness comes from streams keyed by (phase, epoch, gan id).
"""

from __future__ import annotations

import csv
import io
import json
import os
import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterator, Sequence

import numpy as np

from . import __version__
from .auction import AuctionResult, run_auction
from .config import TrainConfig
from .data import GmmSpec, gmm_sample
from .errors import ConfigError, NumericError
from .metrics import MetricsRecord, ensemble_summary, evaluate_samples
from .nn.checkpoint import atomic_write_bytes, load_checkpoint, save_checkpoint
from .nn.mlp import MlpParams, mlp_forward
from .nn.rng import SeededRng, sample_latent
from .objectives import SELF, GanPair, aux_value, breakdown, individual_step, make_pair

METRICS_HEADER = "# auction-gan metrics v1"
THREADS_ENV = "AUCTION_GAN_THREADS"


def auxiliary_loss(pair: GanPair, best_disc: MlpParams, real_batch: np.ndarray,
                   fake_batch: np.ndarray, granularity: str = "sample") -> float:
    """MSE between this pair's and the best discriminator's loss outputs.

    Both discriminators are evaluated on the same real and fake batches; the
    per-sample vector is the real-branch terms followed by the fake-branch terms.
    """
    if best_disc.output_activation != pair.discriminator.output_activation:
        raise ConfigError("auxiliary target must be the same model kind", key="model")
    own = breakdown(pair.kind, pair.discriminator, real_batch, fake_batch)
    ref = breakdown(pair.kind, best_disc, real_batch, fake_batch)
    return aux_value(own, ref, granularity)


@dataclass
class EpochReport:
    epoch: int
    auction: AuctionResult | None
    individual_d_losses: list[float]
    individual_g_losses: list[float]
    aux_d_losses: list[float]
    aux_losses: list[list[float]]  # every recorded value, per GAN
    checksums_before_auction: list[str]
    checksums_after_auction: list[str]
    metrics: list[MetricsRecord] | None = None


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}",
                          key=THREADS_ENV) from None


def _map(fn: Callable, items: Sequence, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(fn, items))


def minibatches(dataset: np.ndarray, rng: SeededRng, count: int, batch: int) -> Iterator[np.ndarray]:
    """``count`` batches taken in order from successive shuffles of the dataset."""
    n = dataset.shape[0]
    order, pos = rng.permutation(n), 0
    for _ in range(count):
        if pos + batch > n:
            order, pos = rng.permutation(n), 0
        idx = order[pos:pos + batch] if batch <= n else rng.choice(n, size=batch)
        pos += batch
        yield dataset[idx]


def _phase(pair: GanPair, dataset: np.ndarray, config: TrainConfig, rng: SeededRng,
           target=None, lam: float = 0.0) -> tuple[GanPair, list[float], list[float], list[float]]:
    """``steps_per_epoch`` generator steps for one pair."""
    per_step = config.n_critic if pair.kind == "wgan" else 1
    batches = minibatches(dataset, rng.fork("batches"), config.steps_per_epoch * per_step,
                          config.batch_size)
    noise = rng.fork("noise")
    d_losses, g_losses, aux = [], [], []
    for step in range(config.steps_per_epoch):
        real = [next(batches) for _ in range(per_step)]
        try:
            pair, log = individual_step(
                pair, real, noise, n_critic=config.n_critic, saturating=config.saturating,
                aux_target=target, lam=lam, granularity=config.aux_granularity)
        except NumericError as err:
            raise err.add_context(minibatch=step)
        d_losses += log.d_losses
        g_losses.append(log.g_loss)
        aux += log.aux_losses
    return pair, d_losses, g_losses, aux


def individual_training(ensemble: Sequence[GanPair], dataset: np.ndarray, config: TrainConfig,
                        root: SeededRng, epoch: int, threads: int = 1):
    def work(pair: GanPair):
        try:
            return _phase(pair, dataset, config, root.fork("individual", epoch, pair.id))
        except NumericError as err:
            raise err.add_context(epoch=epoch, phase="individual")

    return _map(work, list(ensemble), threads)


def auxiliary_pass(ensemble: Sequence[GanPair], best_index: int | None, dataset: np.ndarray,
                   config: TrainConfig, root: SeededRng, epoch: int, threads: int = 1):
    """Second training pass; ``best_index=None`` runs it without the matching term.

    The best discriminator is snapshotted before any pair moves. The best pair
    itself is its own reference, so its matching term is identically zero.
    """
    frozen = ensemble[best_index].discriminator.copy() if best_index is not None else None

    def work(item):
        i, pair = item
        if best_index is None:
            target, lam = None, 0.0
        else:
            target, lam = (SELF if i == best_index else frozen), config.lam
        try:
            return _phase(pair, dataset, config, root.fork("aux", epoch, pair.id), target, lam)
        except NumericError as err:
            raise err.add_context(epoch=epoch, phase="auxiliary")

    return _map(work, list(enumerate(ensemble)), threads)


def train_epoch(ensemble: Sequence[GanPair], dataset: np.ndarray, config: TrainConfig,
                root: SeededRng, epoch: int, threads: int = 1
                ) -> tuple[list[GanPair], EpochReport]:
    config = config.resolved()
    first = individual_training(ensemble, dataset, config, root, epoch, threads)
    ensemble = [r[0] for r in first]
    before = [p.checksum() for p in ensemble]
    auction = None
    if not config.baseline:
        auction = run_auction(ensemble, root.fork("auction", epoch), config.lot_size,
                              config.normalize_bids)
    after = [p.checksum() for p in ensemble]
    if after != before:
        raise RuntimeError("auction modified ensemble parameters")
    second = auxiliary_pass(ensemble, None if auction is None else auction.best_index,
                            dataset, config, root, epoch, threads)
    ensemble = [r[0] for r in second]
    report = EpochReport(
        epoch=epoch,
        auction=auction,
        individual_d_losses=[float(np.mean(r[1])) for r in first],
        individual_g_losses=[float(np.mean(r[2])) for r in first],
        aux_d_losses=[float(np.mean(r[1])) for r in second],
        aux_losses=[r[3] if auction is not None else [0.0] * len(r[3]) for r in second],
        checksums_before_auction=before,
        checksums_after_auction=after,
    )
    return ensemble, report


# ---- ensemble set-up and evaluation --------------------------------------

def init_ensemble(config: TrainConfig) -> list[GanPair]:
    """Initial pairs; depends only on the seed and network settings."""
    config = config.resolved()
    root = SeededRng(config.seed)
    g_opt, d_opt = config.optimizer_settings()
    return [make_pair(i, config.model, root.fork("init", i), config.hidden, config.latent_dim,
                      g_opt=g_opt, d_opt=d_opt) for i in range(config.n_gans)]


def make_dataset(config: TrainConfig) -> np.ndarray:
    return gmm_sample(config.gmm, SeededRng(config.seed).fork("data"), config.n_data)


def eval_samples(generator: MlpParams, eval_seed: int, epoch: int, gan_id: int,
                 n_eval: int) -> np.ndarray:
    rng = SeededRng(eval_seed).fork("eval", epoch, gan_id)
    return mlp_forward(generator, sample_latent(rng, n_eval, generator.in_dim))


def evaluate_ensemble(ensemble: Sequence[GanPair], config: TrainConfig, epoch: int,
                      threads: int = 1) -> list[MetricsRecord]:
    config = config.resolved()
    spec = config.gmm

    def work(pair: GanPair) -> MetricsRecord:
        samples = eval_samples(pair.generator, config.eval_seed, epoch, pair.id, config.n_eval)
        return evaluate_samples(samples, spec, epoch, pair.id, config.quality_radius,
                                config.coverage_threshold, config.ground_metric)

    return _map(work, list(ensemble), threads)


# ---- run artifacts -------------------------------------------------------

def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode())


def _fmt(x: float) -> str:
    return repr(float(x))


def metrics_csv(rows: list[tuple[MetricsRecord, AuctionResult | None]], n_modes: int,
                with_auction: bool) -> str:
    buf = io.StringIO()
    buf.write(METRICS_HEADER + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    header = ["epoch", "gan_id", "mean_log_likelihood", "coverage_w1", "covered_modes",
              "unassigned"] + [f"mode_{k}" for k in range(n_modes)]
    if with_auction:
        header += ["score", "is_best"]
    writer.writerow(header)
    for rec, auction in rows:
        row = [rec.epoch, rec.gan_id, _fmt(rec.mean_log_likelihood), _fmt(rec.coverage_w1),
               rec.covered_modes, rec.histogram.unassigned, *map(int, rec.histogram.counts)]
        if with_auction:
            if auction is None:
                row += ["", ""]
            else:
                row += [_fmt(auction.scores[rec.gan_id]), int(auction.best_index == rec.gan_id)]
        writer.writerow(row)
    return buf.getvalue()


def read_metrics_csv(path) -> list[dict]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != METRICS_HEADER:
        raise ValueError(f"{path}: missing metrics header line")
    return list(csv.DictReader(lines[1:]))


def save_ensemble(directory, ensemble: Sequence[GanPair], config: TrainConfig, epoch: int) -> None:
    for pair in ensemble:
        save_checkpoint(
            Path(directory) / f"gan_{pair.id:02d}.ckpt",
            {"generator": pair.generator, "discriminator": pair.discriminator},
            rng_state=SeededRng(config.eval_seed).fork("eval", epoch, pair.id).get_state(),
            meta={"epoch": epoch, "gan_id": pair.id, "model": pair.kind, "seed": config.seed},
        )


def load_ensemble(directory) -> list[tuple[dict[str, MlpParams], dict]]:
    """(networks, meta) for every ``gan_*.ckpt`` in ``directory``."""
    paths = sorted(Path(directory).glob("gan_*.ckpt"))
    if not paths:
        raise FileNotFoundError(f"no gan_*.ckpt files in {directory}")
    out = []
    for p in paths:
        nets, header = load_checkpoint(p)
        out.append((nets, header["meta"]))
    return out


def run_metadata(config: TrainConfig) -> dict:
    return {
        "config": config.resolved().to_dict(),
        "config_digest": config.digest(),
        "seed": config.seed,
        "version": __version__,
        "numpy": np.__version__,
        "python": platform.python_version(),
    }


@dataclass
class RunResult:
    config: TrainConfig
    ensemble: list[GanPair]
    reports: list[EpochReport]
    records: list[MetricsRecord]
    summary: dict
    out_dir: Path | None = None


def _summary(config: TrainConfig, records: list[MetricsRecord], epoch: int) -> dict:
    final = [r for r in records if r.epoch == epoch]
    return {
        "epoch": epoch,
        "baseline": config.baseline,
        "model": config.model,
        "seed": config.seed,
        **ensemble_summary(final),
        "per_gan": [{"gan_id": r.gan_id, "mean_log_likelihood": r.mean_log_likelihood,
                     "coverage_w1": r.coverage_w1, "covered_modes": r.covered_modes}
                    for r in final],
    }


def _json(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True, allow_nan=True) + "\n"


def train_run(config: TrainConfig, out_dir=None, ensemble: Sequence[GanPair] | None = None,
              threads: int | None = None,
              progress: Callable[[EpochReport], None] | None = None) -> RunResult:
    """Train for ``config.epochs`` epochs; write artifacts when ``out_dir`` is given.

    Metrics are evaluated at initialisation, every ``eval_interval`` epochs and
    at the final epoch. On a numeric failure the last completed epoch's
    parameters are saved under ``checkpoints/last_good`` before re-raising.
    """
    config = config.validate().resolved()
    threads = thread_count() if threads is None else threads
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        atomic_write_text(out / "run.json", _json(run_metadata(config)))
        if config.auction_dump and not config.baseline:
            atomic_write_text(out / "auction_bids.csv", "epoch,i,j,bid\n")
            atomic_write_text(out / "auction_scores.csv", "epoch,i,score,is_best\n")

    root = SeededRng(config.seed)
    dataset = make_dataset(config)
    ensemble = [p.copy() for p in ensemble] if ensemble is not None else init_ensemble(config)
    if len(ensemble) != config.n_gans:
        raise ConfigError("initial ensemble size does not match n_gans", key="n_gans")

    rows: list[tuple[MetricsRecord, AuctionResult | None]] = []
    reports: list[EpochReport] = []

    def record(epoch: int, auction: AuctionResult | None) -> list[MetricsRecord]:
        recs = evaluate_ensemble(ensemble, config, epoch, threads)
        rows.extend((r, auction) for r in recs)
        if out is not None:
            atomic_write_text(out / "metrics.csv",
                              metrics_csv(rows, config.n_modes, not config.baseline))
        return recs

    record(0, None)
    if out is not None:
        save_ensemble(out / "checkpoints" / "epoch_0000", ensemble, config, 0)

    for epoch in range(1, config.epochs + 1):
        try:
            new_ensemble, report = train_epoch(ensemble, dataset, config, root, epoch, threads)
        except NumericError as err:
            err.add_context(epoch=epoch)
            if out is not None:
                save_ensemble(out / "checkpoints" / "last_good", ensemble, config, epoch - 1)
            raise
        ensemble = new_ensemble
        if epoch % config.eval_interval == 0 or epoch == config.epochs:
            report.metrics = record(epoch, report.auction)
        if out is not None:
            if epoch % config.checkpoint_interval == 0 or epoch == config.epochs:
                save_ensemble(out / "checkpoints" / f"epoch_{epoch:04d}", ensemble, config, epoch)
            if config.auction_dump and report.auction is not None:
                _append_auction_dump(out, epoch, report.auction)
        reports.append(report)
        if progress is not None:
            progress(report)

    records = [r for r, _ in rows]
    summary = _summary(config, records, config.epochs)
    if out is not None:
        atomic_write_text(out / "summary.json", _json(summary))
    return RunResult(config, ensemble, reports, records, summary, out)


def _append_auction_dump(out: Path, epoch: int, auction: AuctionResult) -> None:
    bids = (out / "auction_bids.csv").read_text()
    scores = (out / "auction_scores.csv").read_text()
    n = auction.bids.n
    bids += "".join(f"{epoch},{i},{j},{_fmt(auction.bids.values[i, j])}\n"
                    for i in range(n) for j in range(n) if i != j)
    scores += "".join(f"{epoch},{i},{_fmt(auction.scores[i])},{int(i == auction.best_index)}\n"
                      for i in range(n))
    atomic_write_text(out / "auction_bids.csv", bids)
    atomic_write_text(out / "auction_scores.csv", scores)


# ---- paired comparison ---------------------------------------------------

ARMS = (("classic", True), ("proposed", False))
TABLE_ROWS = (("mean likelihood", "mean_likelihood"), ("min likelihood", "min_likelihood"),
              ("coverage W1", "mean_coverage_w1"), ("covered modes", "mean_covered_modes"))


def _stats(values: list[float]) -> dict:
    arr = np.array(values, dtype=np.float64)
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return {"mean": float(arr.mean()), "std": std, "values": [float(v) for v in arr]}


def aggregate_summaries(per_seed: list[dict]) -> dict:
    return {arm: {key: _stats([s[arm][key] for s in per_seed]) for _, key in TABLE_ROWS}
            for arm, _ in ARMS}


def format_table(aggregate: dict, title: str = "Likelihood evaluations") -> str:
    lines = [title, f"{'':<18}{'classic':>20}{'proposed':>20}"]
    for label, key in TABLE_ROWS:
        cells = [f"{aggregate[arm][key]['mean']:.3f} ± {aggregate[arm][key]['std']:.3f}"
                 for arm, _ in ARMS]
        lines.append(f"{label:<18}{cells[0]:>20}{cells[1]:>20}")
    return "\n".join(lines) + "\n"


def _completed(run_dir: Path, config: TrainConfig) -> dict | None:
    try:
        meta = json.loads((run_dir / "run.json").read_text())
        summary = json.loads((run_dir / "summary.json").read_text())
        read_metrics_csv(run_dir / "metrics.csv")
    except (OSError, ValueError):
        return None
    if meta.get("config_digest") != config.digest():
        return None
    return summary


def compare(config: TrainConfig, seeds: Sequence[int], out_root,
            threads: int | None = None, progress: Callable[[str], None] | None = None) -> dict:
    """Classic and proposed arms per seed from identical initial ensembles.

    Finished runs whose config digest matches are reused; the manifest lists
    each seed's status. Writes ``comparison.json`` and ``manifest.json``.
    """
    if not seeds:
        raise ConfigError("compare needs at least one seed", key="seeds")
    out_root = Path(out_root)
    per_seed, statuses = [], {}
    for seed in seeds:
        seed_cfg = replace(config, seed=int(seed))
        init = init_ensemble(replace(seed_cfg, baseline=False).validate())
        entry = {"seed": int(seed)}
        for arm, baseline in ARMS:
            arm_cfg = replace(seed_cfg, baseline=baseline).validate()
            run_dir = out_root / f"seed_{seed}" / arm
            summary = _completed(run_dir, arm_cfg)
            if summary is None:
                summary = train_run(arm_cfg, run_dir, ensemble=init, threads=threads).summary
                statuses[f"{seed}/{arm}"] = "completed"
            else:
                statuses[f"{seed}/{arm}"] = "reused"
            entry[arm] = {k: summary[k] for _, k in TABLE_ROWS}
            entry[arm]["run_dir"] = str(run_dir)
            if progress is not None:
                progress(f"seed {seed} {arm}: {statuses[f'{seed}/{arm}']} "
                         f"min likelihood {summary['min_likelihood']:.3f}")
        per_seed.append(entry)

    aggregate = aggregate_summaries(per_seed)
    table = format_table(aggregate, f"Likelihood evaluations ({config.model})")
    comparison = {"model": config.model, "seeds": [int(s) for s in seeds],
                  "per_seed": per_seed, "aggregate": aggregate, "table": table}
    manifest = {"config_digest": config.digest(), "config": config.resolved().to_dict(),
                "seeds": [int(s) for s in seeds], "output_root": str(out_root),
                "runs": [e[arm]["run_dir"] for e in per_seed for arm, _ in ARMS],
                "status": statuses, "aggregate": aggregate}
    out_root.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out_root / "comparison.json", _json(comparison))
    atomic_write_text(out_root / "manifest.json", _json(manifest))
    return comparison
