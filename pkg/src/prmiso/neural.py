"""
Learned alignment: two multilayer perceptrons that map received pilots
straight to polarization angles (and the gNB beamformer), trained jointly
and without labels by maximising the beamforming gain.

gNB network: ``2 L n_t -> hidden... -> 3 n_t``. Output ``z`` is split into
angles ``sigmoid(z[:n_t]) * pi/2`` and a beamformer
``(z[n_t:2n_t] + 1j z[2n_t:]) / ||z[n_t:]||``.
UE network: ``2 L -> hidden... -> 1`` with angle ``sigmoid(g) * pi/2``.

Everything is plain numpy; gradients are derived by hand and checked against
finite differences in the test-suite.
"""

import csv
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import AlignmentSolution
from .channel import (HALF_PI, NoiseSpec, PolarizationConfig, achievable_rate, beamforming_gain,
                      blocks, pol_vector, sample_channel)
from .containers import read_container, write_container
from .numerics import ContractError, RngStream
from .pilots import (FIXED, PilotCodebook, RandomizationPolicy, flatten_for_dnn,
                     run_downlink_frame, run_uplink_frame)

log = logging.getLogger(__name__)

NORM_FLOOR = 1e-12
CHECKPOINT_MAGIC = b"PRMISOM1"
CHECKPOINT_VERSION = 1


class TrainingDiverged(RuntimeError):
    pass


def sigmoid(x):
    # split form avoids overflow in exp for large |x|
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class MlpModel:
    """Fully connected network; ``weights[k]`` has shape ``(dims[k], dims[k+1])``."""

    dims: list
    weights: list
    biases: list
    activation: str = "relu"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.activation != "relu":
            raise ContractError(f"unsupported activation {self.activation!r}")
        if len(self.weights) != len(self.dims) - 1 or len(self.biases) != len(self.weights):
            raise ContractError("layer count does not match dims")
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.shape != (self.dims[k], self.dims[k + 1]) or b.shape != (self.dims[k + 1],):
                raise ContractError(f"layer {k} has shape {W.shape}/{b.shape}, dims say {self.dims}")

    @classmethod
    def init(cls, rng, dims, meta=None):
        """Uniform fan-in initialisation: ``U(-1/sqrt(fan_in), 1/sqrt(fan_in))``."""
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, (fan_in, fan_out)))
            biases.append(rng.uniform(-bound, bound, (fan_out,)))
        return cls(list(dims), weights, biases, meta=dict(meta or {}))

    @property
    def params(self):
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    def copy(self):
        return replace(self, weights=[W.copy() for W in self.weights],
                       biases=[b.copy() for b in self.biases], meta=dict(self.meta))

    def forward(self, x):
        """Returns the linear output layer and the cache needed by :meth:`backward`."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.dims[0]:
            raise ContractError(f"input width {x.shape[-1]} != {self.dims[0]}")
        acts = [x]
        h = x
        last = len(self.weights) - 1
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ W + b
            if k < last:
                h = np.maximum(h, 0.0)
                acts.append(h)
        return h, acts

    def backward(self, acts, dout):
        """Parameter gradients ``[dW0, db0, dW1, ...]`` given ``dLoss/dOutput``."""
        grads = [None] * (2 * len(self.weights))
        d = dout
        for k in range(len(self.weights) - 1, -1, -1):
            a = acts[k]
            grads[2 * k] = a.T @ d
            grads[2 * k + 1] = d.sum(axis=0)
            if k > 0:
                d = (d @ self.weights[k].T) * (a > 0)
        return grads


# -- heads -----------------------------------------------------------------

def gnb_heads(z, n_t):
    """Split the gNB output into angles and a unit-norm beamformer."""
    s = sigmoid(z[..., :n_t])
    theta = s * HALF_PI
    a = z[..., n_t:2 * n_t] + 1j * z[..., 2 * n_t:3 * n_t]
    norm = np.sqrt(np.sum(z[..., n_t:] ** 2, axis=-1, keepdims=True))
    denom = np.maximum(norm, NORM_FLOOR)
    w = a / denom
    return theta, w, (s, w, denom, norm >= NORM_FLOOR)


def gnb_heads_backward(cache, d_theta, g_w):
    """``dLoss/dz`` from ``dLoss/dtheta`` and the complex gradient ``g_w = dL/dRe w + j dL/dIm w``."""
    s, w, denom, on_sphere = cache
    dz1 = d_theta * HALF_PI * s * (1.0 - s)
    # tangent projection of the normalisation; plain scaling when the floor is active
    radial = np.real(np.sum(np.conj(w) * g_w, axis=-1, keepdims=True))
    g_a = np.where(on_sphere, g_w - radial * w, g_w) / denom
    return np.concatenate([dz1, g_a.real, g_a.imag], axis=-1)


def ue_head(g):
    s = sigmoid(g[..., 0])
    return s * HALF_PI, s


def gnb_forward(model, y_flat):
    """Angles ``(..., n_t)`` and beamformer ``(..., n_t)`` for flattened uplink pilots."""
    n_t = model.dims[-1] // 3
    z, _ = model.forward(y_flat)
    theta, w, _ = gnb_heads(z, n_t)
    return theta, w


def ue_forward(model, y_flat):
    g, _ = model.forward(y_flat)
    return ue_head(g)[0]


# -- objective -------------------------------------------------------------

def gain_with_grads(H, theta_gnb, w, theta_ue):
    """
    Beamforming gain ``|sum_i h_i w_i|^2`` with ``h_i = p_ue^T H_i p_i`` and its
    gradients with respect to the gNB angles, ``w`` (complex form) and the UE angle.
    """
    Hb = blocks(H)
    p_ue = pol_vector(theta_ue)
    dp_ue = np.stack([-np.sin(theta_ue), np.cos(theta_ue)], axis=-1)
    p = pol_vector(theta_gnb)
    dp = np.stack([-np.sin(theta_gnb), np.cos(theta_gnb)], axis=-1)
    u = np.einsum("...r,...irc->...ic", p_ue, Hb)
    h = np.sum(u * p, axis=-1)
    s = np.sum(h * w, axis=-1)
    gain = np.abs(s) ** 2
    cs = np.conj(s)[..., None]
    g_w = 2.0 * s[..., None] * np.conj(h)
    d_theta = 2.0 * np.real(cs * w * np.sum(u * dp, axis=-1))
    dh_ue = np.einsum("...r,...irc,...ic->...i", dp_ue, Hb, p)
    d_theta_ue = 2.0 * np.real(np.conj(s) * np.sum(w * dh_ue, axis=-1))
    return gain, d_theta, g_w, d_theta_ue


def loss(H, gnb_out, theta_ue):
    """Negative batch-mean beamforming gain; ``gnb_out = (theta_gnb, w)``."""
    theta_gnb, w = gnb_out
    config = PolarizationConfig(theta_gnb, theta_ue)
    return -float(np.mean(beamforming_gain(H, config, w)))


@dataclass
class GradientTape:
    H: np.ndarray
    gnb_acts: list
    ue_acts: list
    gnb_cache: tuple
    ue_sig: np.ndarray
    theta_gnb: np.ndarray
    w: np.ndarray
    theta_ue: np.ndarray
    gain: np.ndarray


def forward_pass(gnb, ue, H, x_gnb, x_ue):
    """Joint forward pass; returns the scalar loss and a tape for :func:`backward`."""
    n_t = gnb.dims[-1] // 3
    z, gnb_acts = gnb.forward(x_gnb)
    theta, w, cache = gnb_heads(z, n_t)
    g, ue_acts = ue.forward(x_ue)
    theta_ue, sig = ue_head(g)
    gain = np.abs(np.einsum("...r,...irc,...ic,...i->...", pol_vector(theta_ue), blocks(H),
                            pol_vector(theta), w)) ** 2
    tape = GradientTape(H, gnb_acts, ue_acts, cache, sig, theta, w, theta_ue, gain)
    return -float(np.mean(gain)), tape


def backward(tape, gnb, ue):
    """Exact gradients of the joint loss for every parameter of both networks."""
    if tape is None:
        raise ContractError("backward needs a tape from forward_pass")
    batch = tape.gain.shape[0]
    _, d_theta, g_w, d_theta_ue = gain_with_grads(tape.H, tape.theta_gnb, tape.w, tape.theta_ue)
    scale = -1.0 / batch
    dz = gnb_heads_backward(tape.gnb_cache, scale * d_theta, scale * g_w)
    dg = (scale * d_theta_ue * HALF_PI * tape.ue_sig * (1.0 - tape.ue_sig))[:, None]
    return gnb.backward(tape.gnb_acts, dz), ue.backward(tape.ue_acts, dg)


class Adam:
    """Adaptive moment estimation with bias correction."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


# -- training ----------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    n_t: int
    n_pilots: int
    snr_db: float
    hidden: tuple = None
    batch_size: int = 1024
    lr: float = 1e-3
    steps: int = 5000
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    rho: float = 1.0

    def __post_init__(self):
        if self.n_t < 1 or self.n_pilots < 1 or self.batch_size < 1 or self.steps < 0:
            raise ValueError("sizes must be positive")
        if not np.isfinite(self.lr) or self.lr < 0:
            raise ValueError("learning rate must be finite and >= 0")
        if self.hidden is None:
            # 512 x 512 at n_t = 64, scaled with the array size
            width = max(32, 512 * self.n_t // 64)
            object.__setattr__(self, "hidden", (width, width))
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    @property
    def noise(self):
        return NoiseSpec.from_snr_db(self.snr_db, self.rho)


def _streams(seed):
    root = RngStream(seed)
    return {"init": root.child(0), "codebook": root.child(1), "train": root.child(2)}


def scenario_meta(config):
    return {"n_t": config.n_t, "n_pilots": config.n_pilots, "snr_db": float(config.snr_db),
            "seed": int(config.seed), "rho": float(config.rho),
            "input_scale": 1.0 / np.sqrt(config.rho)}


def build_models(config):
    """Freshly initialised gNB and UE networks plus the pilot codebook they read."""
    streams = _streams(config.seed)
    meta = scenario_meta(config)
    n_t, L = config.n_t, config.n_pilots
    gnb = MlpModel.init(streams["init"], (2 * L * n_t,) + config.hidden + (3 * n_t,),
                        dict(meta, role="gnb"))
    ue = MlpModel.init(streams["init"], (2 * L,) + config.hidden + (1,), dict(meta, role="ue"))
    codebook = PilotCodebook.draw(streams["codebook"], n_t, L)
    return gnb, ue, codebook


def network_inputs(codebook, H, rng, noise, input_scale):
    """Run both fixed-codebook pilot frames for channels ``H`` and flatten them for the networks."""
    policy = RandomizationPolicy(FIXED, codebook)
    L = codebook.n_pilots
    up = run_uplink_frame(rng, H, L, policy, noise)
    down = run_downlink_frame(rng, H, L, policy, noise)
    return flatten_for_dnn(up) * input_scale, flatten_for_dnn(down) * input_scale


@dataclass
class TrainedNetworks:
    gnb: MlpModel
    ue: MlpModel
    codebook: PilotCodebook
    log: list = field(default_factory=list)

    def __iter__(self):
        return iter((self.gnb, self.ue, self.log))

    @property
    def scenario(self):
        m = self.gnb.meta
        return m["n_t"], m["n_pilots"], m["snr_db"]


def train(config, progress_every=0):
    """
    Train both networks online: every step draws a fresh minibatch of
    channels, simulates the pilot frames with the shared codebook, and takes
    one Adam step on the negative mean gain.

    Returns a :class:`TrainedNetworks`, which unpacks as ``gnb, ue, log``;
    ``log`` rows are ``(step, loss, mean_gain)``.
    """
    gnb, ue, codebook = build_models(config)
    rng = _streams(config.seed)["train"]
    noise = config.noise
    scale = gnb.meta["input_scale"]
    opt = Adam(gnb.params + ue.params, config.lr, config.beta1, config.beta2, config.eps)
    rows = []
    for step in range(1, config.steps + 1):
        H = sample_channel(rng, config.n_t, (config.batch_size,))
        x_gnb, x_ue = network_inputs(codebook, H, rng, noise, scale)
        value, tape = forward_pass(gnb, ue, H, x_gnb, x_ue)
        if not np.isfinite(value):
            raise TrainingDiverged(f"non-finite loss {value} at step {step} "
                                   f"(lr={config.lr}, batch={config.batch_size})")
        g_gnb, g_ue = backward(tape, gnb, ue)
        if config.lr > 0:
            opt.step(g_gnb + g_ue)
        rows.append((step, value, -value))
        if progress_every and step % progress_every == 0:
            recent = np.mean([r[2] for r in rows[-progress_every:]])
            log.info("step %d  mean gain %.4f", step, recent)
    return TrainedNetworks(gnb, ue, codebook, rows)


def write_training_log(path, rows):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["step", "loss", "mean_gain"])
        for step, value, gain in rows:
            out.writerow([step, repr(float(value)), repr(float(gain))])


# -- inference / evaluation ----------------------------------------------------

def dnn_align_frames(nets, H, uplink, downlink):
    """Alignment decisions from already simulated fixed-codebook frames, scored on ``H``."""
    n_t, L, _ = nets.scenario
    if uplink.n_t != n_t or uplink.n_pilots != L or downlink.n_pilots != L:
        raise ContractError(f"networks expect n_t={n_t}, L={L}")
    scale = nets.gnb.meta["input_scale"]
    theta, w = gnb_forward(nets.gnb, flatten_for_dnn(uplink) * scale)
    theta_ue = ue_forward(nets.ue, flatten_for_dnn(downlink) * scale)
    config = PolarizationConfig(theta, theta_ue)
    return AlignmentSolution(config, w, beamforming_gain(H, config, w))


def dnn_align(nets, H, rng, noise):
    """Simulate the pilot frames for ``H`` and return the networks' alignment decisions."""
    n_t, L, _ = nets.scenario
    if H.shape[-1] != 2 * n_t:
        raise ContractError(f"networks were trained for n_t={n_t}")
    policy = RandomizationPolicy(FIXED, nets.codebook)
    up = run_uplink_frame(rng, H, L, policy, noise)
    down = run_downlink_frame(rng, H, L, policy, noise)
    return dnn_align_frames(nets, H, up, down)


@dataclass(frozen=True)
class EvalResult:
    gain_mean: float
    gain_se: float
    rate_mean: float
    gains: np.ndarray
    rates: np.ndarray


def summarize(gains, sigma2_over_rho):
    gains = np.asarray(gains, dtype=np.float64)
    rates = achievable_rate(gains, sigma2_over_rho)
    se = float(np.std(gains, ddof=1) / np.sqrt(len(gains))) if len(gains) > 1 else 0.0
    return EvalResult(float(gains.mean()), se, float(rates.mean()), gains, rates)


def evaluate(nets, rng, n_trials, scenario=None, chunk=1024):
    """
    Mean gain over ``n_trials`` fresh channels and pilot frames.

    ``scenario`` is ``(n_t, L, snr_db)``; it must match the trained networks
    in ``n_t`` and ``L`` (the SNR may differ). Gain is measured noiselessly on
    the true channel.
    """
    n_t, L, snr_db = nets.scenario
    if scenario is not None:
        if (scenario[0], scenario[1]) != (n_t, L):
            raise ContractError(f"networks expect n_t={n_t}, L={L}; got {scenario[:2]}")
        snr_db = scenario[2]
    noise = NoiseSpec.from_snr_db(snr_db, nets.gnb.meta["rho"])
    gains = []
    for start in range(0, n_trials, chunk):
        H = sample_channel(rng, n_t, (min(chunk, n_trials - start),))
        gains.append(dnn_align(nets, H, rng, noise).gain_predicted)
    return summarize(np.concatenate(gains), noise.sigma2_ue / noise.rho_gnb)


# -- checkpoints -------------------------------------------------------------

def save_checkpoint(path, nets):
    """
    Versioned checkpoint: JSON header (layer dims, activation, scenario, seed)
    followed by little-endian float64 weights and biases of the gNB then UE
    network in layer order, then the pilot codebook.
    """
    arrays = {}
    for role, model in (("gnb", nets.gnb), ("ue", nets.ue)):
        for k, (W, b) in enumerate(zip(model.weights, model.biases)):
            arrays[f"{role}.W{k}"] = W
            arrays[f"{role}.b{k}"] = b
    cb = nets.codebook
    arrays.update({"codebook.theta_ue": cb.theta_ue, "codebook.ul_theta_gnb": cb.ul_theta_gnb,
                   "codebook.dl_theta_gnb": cb.dl_theta_gnb, "codebook.dl_w": cb.dl_w})
    meta = {k: v for k, v in nets.gnb.meta.items() if k != "role"}
    header = {"format": "prmiso-checkpoint", "version": CHECKPOINT_VERSION,
              "activation": nets.gnb.activation, "gnb_dims": list(nets.gnb.dims),
              "ue_dims": list(nets.ue.dims), "scenario": meta}
    write_container(path, CHECKPOINT_MAGIC, header, arrays)


def load_checkpoint(path):
    header, a = read_container(path, CHECKPOINT_MAGIC)
    if header.get("version") != CHECKPOINT_VERSION:
        raise ContractError(f"{path}: unsupported checkpoint version {header.get('version')}")
    models = {}
    for role in ("gnb", "ue"):
        dims = header[f"{role}_dims"]
        n = len(dims) - 1
        models[role] = MlpModel(dims, [a[f"{role}.W{k}"] for k in range(n)],
                                [a[f"{role}.b{k}"] for k in range(n)], header["activation"],
                                dict(header["scenario"], role=role))
    cb = PilotCodebook(a["codebook.theta_ue"], a["codebook.ul_theta_gnb"],
                       a["codebook.dl_theta_gnb"], a["codebook.dl_w"])
    return TrainedNetworks(models["gnb"], models["ue"], cb)
