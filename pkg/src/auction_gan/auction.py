"""Auction-style cross valuation of an ensemble of GAN pairs.

Every generator offers a lot of K samples; every other discriminator bids the
mean of its outputs on that lot. A pair's score is the mean bid its lot
received minus the mean bid its own discriminator placed on the other lots,
so good generators with discerning discriminators rank highest.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, ContractError, NumericError
from .nn.mlp import mlp_forward
from .nn.rng import SeededRng, sample_latent
from .objectives import GanPair

BID_NORMALIZATIONS = ("none", "zscore")


@dataclass
class Lot:
    auctioneer: int
    items: np.ndarray    # (K, data_dim)
    latents: np.ndarray  # (K, latent_dim)

    def __post_init__(self):
        if self.items.shape[0] < 1 or self.items.shape[0] != self.latents.shape[0]:
            raise ContractError("a lot needs K >= 1 items with matching latents")

    @property
    def size(self) -> int:
        return self.items.shape[0]


@dataclass
class BidMatrix:
    """``values[i, j]`` is discriminator j's bid on generator i's lot.

    The diagonal is undefined and stored as NaN.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ContractError(f"bid matrix must be square, got {v.shape}")
        np.fill_diagonal(v, np.nan)
        off = ~np.eye(v.shape[0], dtype=bool)
        if not np.isfinite(v[off]).all():
            raise NumericError("bid matrix has missing or non-finite off-diagonal entries")
        self.values = v

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def off_diagonal(self) -> np.ndarray:
        return self.values[~np.eye(self.n, dtype=bool)]

    def map(self, fn: Callable[[np.ndarray], np.ndarray]) -> "BidMatrix":
        """Apply ``fn`` to the off-diagonal entries (elementwise or vectorised)."""
        v = self.values.copy()
        off = ~np.eye(self.n, dtype=bool)
        v[off] = fn(v[off])
        return BidMatrix(v)


@dataclass
class AuctionResult:
    bids: BidMatrix
    scores: np.ndarray
    best_index: int
    lots: list[Lot] | None = None


def make_lot(pair: GanPair, rng: SeededRng, k: int) -> Lot:
    if k < 1:
        raise ContractError("lot size must be >= 1")
    latents = sample_latent(rng, k, pair.latent_dim)
    return Lot(pair.id, mlp_forward(pair.generator, latents), latents)


def compute_bid(bidder: GanPair, lot: Lot) -> float:
    """Mean discriminator output over the lot (a probability for vanilla GANs)."""
    if bidder.id == lot.auctioneer:
        raise ContractError(f"discriminator {bidder.id} may not bid on its own lot")
    return float(mlp_forward(bidder.discriminator, lot.items).mean())


def compute_scores(bids: BidMatrix) -> np.ndarray:
    """S(i) = mean_{j != i} b[i, j] - mean_{j != i} b[j, i]."""
    n = bids.n
    if n < 2:
        raise ConfigError("scoring requires at least two GAN pairs", key="n_gans")
    v = np.where(np.isnan(bids.values), 0.0, bids.values)
    received = v.sum(axis=1) / (n - 1)
    placed = v.sum(axis=0) / (n - 1)
    return received - placed


def select_best(scores: Sequence[float]) -> int:
    """Index of the highest score; ties go to the lowest index."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size < 2:
        raise ConfigError("selection requires at least two GAN pairs", key="n_gans")
    bad = np.flatnonzero(~np.isfinite(scores))
    if bad.size:
        raise NumericError(f"non-finite auction score for GAN {int(bad[0])}", gan=int(bad[0]))
    return int(np.argmax(scores))


def zscore_bids(bids: BidMatrix) -> BidMatrix:
    """Standardise each discriminator's bids across the lots it evaluated."""
    v = bids.values.copy()
    for j in range(bids.n):
        col = np.delete(v[:, j], j)
        sd = col.std()
        col = (col - col.mean()) / sd if sd > 0 else np.zeros_like(col)
        v[np.arange(bids.n) != j, j] = col
    return BidMatrix(v)


def run_auction(
    ensemble: Sequence[GanPair],
    rng: SeededRng,
    k: int,
    normalize: str = "none",
    bid_transform: Callable[[BidMatrix], BidMatrix] | None = None,
) -> AuctionResult:
    """Hold one auction per generator, score every pair, pick the best.

    Every generator maps the same K latents (drawn from ``rng.fork("lots")``),
    so lots differ only through the generators. Nothing in the ensemble is
    modified. ``bid_transform`` is applied to the raw bids before scoring; it
    exists for invariance testing.
    """
    n = len(ensemble)
    if n < 2:
        raise ConfigError("an auction requires at least two GAN pairs", key="n_gans")
    if normalize not in BID_NORMALIZATIONS:
        raise ConfigError(f"unknown bid normalisation {normalize!r}", key="normalize_bids")
    lots = [make_lot(pair, rng.fork("lots"), k) for pair in ensemble]
    values = np.full((n, n), np.nan)
    for i, lot in enumerate(lots):
        for j, bidder in enumerate(ensemble):
            if i != j:
                values[i, j] = compute_bid(bidder, lot)
    bids = BidMatrix(values)
    if bid_transform is not None:
        bids = bid_transform(bids)
    scored = zscore_bids(bids) if normalize == "zscore" else bids
    scores = compute_scores(scored)
    return AuctionResult(bids, scores, select_best(scores), lots)
