"""
Polarization-reconfigurable channel and beamforming gain
========================================================

A tour of the channel model: per-antenna 2x2 blocks, polarization vectors on
the quarter circle, and the coherent gain of a phase-matched beamformer.
"""

import numpy as np

from prmiso import PolarizationConfig, RngStream, sample_channel
from prmiso.channel import achievable_rate, beamforming_gain, blocks, effective_channel
from prmiso.baselines import phase_matched_beamformer

rng = RngStream(1)
n_t = 8

# one Rayleigh channel: 2 x 2n_t, unit-variance complex entries
H = sample_channel(rng, n_t)
print("H shape:", H.shape, " per-antenna blocks:", blocks(H).shape)
print("mean |h|^2 per entry: %.3f" % np.mean(np.abs(H) ** 2))

# vertical everywhere: the effective channel is just the vv entry of each block
vertical = PolarizationConfig(np.zeros(n_t), 0.0)
h = effective_channel(H, vertical)
print("vv entries match:", np.allclose(h, blocks(H)[:, 0, 0]))

# matched filtering collects |h|^2 coherently; a random unit vector does not
w = phase_matched_beamformer(h)
print("matched gain  %.3f  (sum |h_i|^2 = %.3f)" % (beamforming_gain(H, vertical, w), np.sum(np.abs(h) ** 2)))
w_rand = rng.normal(n_t) + 1j * rng.normal(n_t)
w_rand /= np.linalg.norm(w_rand)
print("random w gain %.3f" % beamforming_gain(H, vertical, w_rand))

# the gain only depends on the angles through h, so sweep the UE angle
for deg in (0, 30, 60, 90):
    cfg = PolarizationConfig(np.zeros(n_t), np.deg2rad(deg))
    h = effective_channel(H, cfg)
    g = beamforming_gain(H, cfg, phase_matched_beamformer(h))
    print("theta_ue = %2d deg  gain %.3f  rate at 0 dB %.3f b/s/Hz" % (deg, g, achievable_rate(g, 1.0)))
