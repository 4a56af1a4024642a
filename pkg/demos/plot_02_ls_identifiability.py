"""
How many pilots does least squares need?
========================================

Each uplink pilot hands the gNB one scalar per antenna, and a 2x2 block has
four unknowns, so four uplink pilots pin down the whole channel. The UE only
sees one scalar per downlink pilot for 4 n_t unknowns.
"""

import numpy as np

from prmiso import NoiseSpec, RandomizationPolicy, RngStream, sample_channel
from prmiso.baselines import ls_estimate_downlink, ls_estimate_uplink
from prmiso.pilots import run_downlink_frame, run_uplink_frame

rng = RngStream(2)
noiseless = NoiseSpec(0.0, 0.0, 1.0, 1.0)
policy = RandomizationPolicy()   # fresh polarizations and beamformer every slot


def rel_error(est, H):
    return np.linalg.norm(est.H_hat - H, axis=(-2, -1)) / np.linalg.norm(H, axis=(-2, -1))


n_t = 4
H = sample_channel(rng, n_t, (200,))

print("uplink, n_t=%d" % n_t)
for L in (1, 2, 3, 4, 6):
    est = ls_estimate_uplink(run_uplink_frame(rng, H, L, policy, noiseless))
    print("  L=%2d  median error %.2e" % (L, np.median(rel_error(est, H))))

print("downlink, n_t=%d (needs 4 n_t = %d)" % (n_t, 4 * n_t))
for L in (4, 8, 15, 16, 20):
    est = ls_estimate_downlink(run_downlink_frame(rng, H, L, policy, noiseless))
    print("  L=%2d  median error %.2e" % (L, np.median(rel_error(est, H))))

# with noise, more pilots average it down
noisy = NoiseSpec.from_snr_db(0.0)
for L in (4, 8, 32):
    est = ls_estimate_uplink(run_uplink_frame(rng, H, L, policy, noisy))
    print("uplink at 0 dB, L=%2d  median error %.3f" % (L, np.median(rel_error(est, H))))
