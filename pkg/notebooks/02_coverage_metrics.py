"""
Likelihood and coverage on hand-made sample sets
================================================
"""

import numpy as np

from auction_gan import GmmSpec, SeededRng, gmm_sample
from auction_gan.metrics import evaluate_samples

ring = GmmSpec.ring(8, 2.0, 0.2)
true = gmm_sample(ring, SeededRng(1), 5000)

# a collapsed generator: everything near one center
collapsed = ring.centers[3] + 0.05 * SeededRng(2).normal((5000, 2))

# half the modes, evenly spaced
half = true[np.isin(np.argmin(np.linalg.norm(true[:, None] - ring.centers, axis=2), 1),
                    [0, 2, 4, 6])]

for name, x in [("true samples", true), ("one mode", collapsed), ("every other mode", half)]:
    rec = evaluate_samples(x, ring, epoch=0, gan_id=0)
    print(f"{name:18s} likelihood {rec.mean_log_likelihood:7.3f}  "
          f"coverage W1 {rec.coverage_w1:.3f}  covered modes {rec.covered_modes}")
# the collapsed set scores the best likelihood and the worst coverage, which is
# why both numbers are reported
