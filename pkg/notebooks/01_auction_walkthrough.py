"""
One auction round on a freshly initialised ensemble
===================================================

Four untrained pairs, one lot each, every other discriminator bids.
"""

import numpy as np

from auction_gan import SeededRng, make_pair, run_auction

np.set_printoptions(precision=4, suppress=True)

ensemble = [make_pair(i, "gan", SeededRng(0).fork("init", i), hidden=(32, 32)) for i in range(4)]
result = run_auction(ensemble, SeededRng(0).fork("auction", 1), k=256)

# row i: bids received by generator i's lot; column j: bids placed by discriminator j
print(result.bids.values)

# received minus placed; the scores always sum to zero
print("scores", result.scores, "sum", result.scores.sum())
print("best pair", result.best_index)
