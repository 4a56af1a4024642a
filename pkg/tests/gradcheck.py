"""Central-difference check of the hand-written backward pass."""
import numpy as np

from prmiso.channel import NoiseSpec, sample_channel
from prmiso.neural import TrainConfig, backward, build_models, forward_pass, network_inputs
from prmiso.numerics import RngStream


def gradient_check(n_t=4, n_pilots=2, hidden=(16, 12), batch=8, per_layer=20, h=1e-5, seed=3):
    """
    Largest relative error between analytic and numerical gradients over
    ``per_layer`` random coordinates of every parameter array of both networks.
    """
    cfg = TrainConfig(n_t, n_pilots, 0.0, hidden=hidden, seed=seed)
    gnb, ue, codebook = build_models(cfg)
    rng = RngStream(seed + 1)
    H = sample_channel(rng, n_t, (batch,))
    x_gnb, x_ue = network_inputs(codebook, H, rng, NoiseSpec.from_snr_db(0.0), 1.0)
    _, tape = forward_pass(gnb, ue, H, x_gnb, x_ue)
    analytic = backward(tape, gnb, ue)
    picker = np.random.default_rng(seed)
    worst = 0.0
    for model, grads in zip((gnb, ue), analytic):
        for p, g in zip(model.params, grads):
            flat, gflat = p.reshape(-1), g.reshape(-1)
            for idx in picker.choice(flat.size, min(per_layer, flat.size), replace=False):
                keep = flat[idx]
                flat[idx] = keep + h
                up = forward_pass(gnb, ue, H, x_gnb, x_ue)[0]
                flat[idx] = keep - h
                down = forward_pass(gnb, ue, H, x_gnb, x_ue)[0]
                flat[idx] = keep
                num = (up - down) / (2 * h)
                err = abs(num - gflat[idx]) / max(abs(num), abs(gflat[idx]), 1e-8)
                worst = max(worst, err)
    return worst
