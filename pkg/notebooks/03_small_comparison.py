"""
A two-seed classic vs proposed comparison at toy scale
======================================================

Takes a couple of minutes on one core. Writes runs under ./toy_compare and
SVG plots for seed 0.
"""

from pathlib import Path

from auction_gan import TrainConfig, compare
from auction_gan.cli import main as cli_main

config = TrainConfig(model="gan", n_gans=4, epochs=8, steps_per_epoch=50, batch_size=64,
                     lot_size=64, n_data=4096, hidden=(64, 64), lr=1e-3, n_eval=1000)
out = Path("toy_compare")
result = compare(config, seeds=[0, 1], out_root=out, progress=print)
print(result["table"])

# scatter plots for both arms and an overlaid coverage curve
cli_main(["plot", str(out / "seed_0" / "classic"), str(out / "seed_0" / "proposed"),
          "--out", str(out / "plots")])
