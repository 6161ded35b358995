"""Auction-style multi-pair GAN training on 2D Gaussian mixtures."""

__version__ = "0.1.0"

from .auction import (  # noqa: E402
    AuctionResult,
    BidMatrix,
    Lot,
    compute_bid,
    compute_scores,
    make_lot,
    run_auction,
    select_best,
)
from .config import TrainConfig  # noqa: E402
from .data import GmmSpec, gmm_log_density, gmm_sample  # noqa: E402
from .nn import SeededRng  # noqa: E402
from .metrics import (  # noqa: E402
    MetricsRecord,
    ModeHistogram,
    assign_modes,
    coverage_wasserstein,
    covered_mode_count,
    mean_log_likelihood,
)
from .objectives import (  # noqa: E402
    DiscriminatorLossBreakdown,
    GanPair,
    disc_loss,
    gen_loss,
    individual_step,
    make_pair,
)
from .trainer import (  # noqa: E402
    EpochReport,
    auxiliary_loss,
    auxiliary_pass,
    compare,
    train_epoch,
    train_run,
)
