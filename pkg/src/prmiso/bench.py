"""
Benchmark sweeps over pilot length and SNR.

Every method is scored on the same channel realizations (common random
numbers), and each (method, L, SNR) point draws its pilot noise from its own
addressed child stream, so a sweep is a pure function of its seed.

Methods
-------
pcsi      optimal angles and phase-matched beamformer on the true channel
ls        first-estimate-then-optimize on per-slot randomized pilots
ls-fixed  the same pipeline fed the learned networks' fixed-codebook pilots
dnn       the trained gNB / UE networks
random    random angles and beamformer
"""

import csv
import logging
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .baselines import (first_estimate_then_optimize, optimize_polarization_iterative,
                        random_baseline)
from .channel import NoiseSpec, beamforming_gain, sample_channel
from .neural import (TrainConfig, dnn_align_frames, load_checkpoint, save_checkpoint, summarize,
                     train)
from .numerics import ContractError, RngStream
from .pilots import (FIXED, PilotCodebook, RandomizationPolicy, run_downlink_frame,
                     run_uplink_frame)

log = logging.getLogger(__name__)

METHODS = ("dnn", "ls", "ls-fixed", "pcsi", "random")
CSV_HEADER = "method,n_t,L,snr_db,gain_mean,gain_se,rate_mean,n_trials,seed,wall_s"

# child-stream addresses under the sweep seed
_CHANNELS, _RANDOM, _LS, _FIXED = 0, 1, 2, 3


@dataclass
class SweepSpec:
    n_t: int = 16
    methods: tuple = ("pcsi", "ls", "random")
    pilot_lengths: tuple = (3, 4, 5)
    snr_dbs: tuple = (-10.0,)
    n_trials: int = 2000
    seed: int = 0
    out: str = None
    channel: str = "rayleigh"
    checkpoint_dir: str = None
    train_steps: int = 0
    train_overrides: dict = field(default_factory=dict)
    chunk: int = 500

    def __post_init__(self):
        self.methods = tuple(self.methods)
        self.pilot_lengths = tuple(int(L) for L in self.pilot_lengths)
        self.snr_dbs = tuple(float(s) for s in self.snr_dbs)
        if not self.methods or not self.pilot_lengths or not self.snr_dbs:
            raise ContractError("methods, pilot lengths and SNRs must be nonempty")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ContractError(f"unknown methods {sorted(unknown)}; choose from {METHODS}")
        if self.n_trials < 1 or self.n_t < 1 or min(self.pilot_lengths) < 1:
            raise ContractError("n_t, n_trials and pilot lengths must be >= 1")
        if self.channel != "rayleigh":
            raise ContractError(f"unsupported channel model {self.channel!r}")


@dataclass
class ResultRow:
    method: str
    n_t: int
    L: int
    snr_db: float
    gain_mean: float
    gain_se: float
    rate_mean: float
    n_trials: int
    seed: int
    wall_s: float = 0.0


def checkpoint_path(directory, n_t, n_pilots, snr_db):
    return os.path.join(directory, f"dnn_nt{n_t}_L{n_pilots}_snr{snr_db:g}.ckpt")


def _snr_key(snr_db):
    # stable non-negative integer address for an SNR value (0.001 dB resolution)
    return int(round((snr_db + 1000.0) * 1000))


def _networks_for(spec, n_pilots, snr_db, cache):
    key = (n_pilots, snr_db)
    if key in cache:
        return cache[key]
    path = checkpoint_path(spec.checkpoint_dir, spec.n_t, n_pilots, snr_db) \
        if spec.checkpoint_dir else None
    if path and os.path.exists(path):
        nets = load_checkpoint(path)
    elif spec.train_steps > 0:
        cfg = TrainConfig(spec.n_t, n_pilots, snr_db, steps=spec.train_steps,
                          seed=spec.seed, **spec.train_overrides)
        log.info("training dnn for n_t=%d L=%d snr=%g (%d steps)",
                 spec.n_t, n_pilots, snr_db, spec.train_steps)
        nets = train(cfg)
        if path:
            os.makedirs(spec.checkpoint_dir, exist_ok=True)
            save_checkpoint(path, nets)
    else:
        expected = path or checkpoint_path("<checkpoint-dir>", spec.n_t, n_pilots, snr_db)
        raise ContractError(f"no dnn checkpoint at {expected}; train one with "
                            f"`prmiso train --nt {spec.n_t} --pilots {n_pilots} "
                            f"--snr-db {snr_db:g} --checkpoint {expected}` "
                            f"or request inline training")
    n_t, L, _ = nets.scenario
    if (n_t, L) != (spec.n_t, n_pilots):
        raise ContractError(f"checkpoint {path} is for n_t={n_t}, L={L}")
    cache[key] = nets
    return nets


def _chunks(n, size):
    for start in range(0, n, size):
        yield start, min(start + size, n)


def run_sweep(spec):
    """
    Evaluate every requested method at every (L, SNR) point.

    Returns rows sorted by (method, L, SNR). ``pcsi`` and ``random`` do not
    depend on the pilots, so their rows repeat the same gain across L.
    """
    root = RngStream(spec.seed)
    H = sample_channel(root.child(_CHANNELS), spec.n_t, (spec.n_trials,))
    rows = []
    nets_cache = {}

    fixed_gains = {}
    if "pcsi" in spec.methods:
        t0 = time.perf_counter()
        g = np.concatenate([optimize_polarization_iterative(H[a:b]).gain_predicted
                            for a, b in _chunks(spec.n_trials, spec.chunk)])
        fixed_gains["pcsi"] = (g, time.perf_counter() - t0)
    if "random" in spec.methods:
        t0 = time.perf_counter()
        sol = random_baseline(root.child(_RANDOM), spec.n_t, (spec.n_trials,))
        fixed_gains["random"] = (beamforming_gain(H, sol.config, sol.w), time.perf_counter() - t0)

    for si, snr_db in enumerate(spec.snr_dbs):
        noise = NoiseSpec.from_snr_db(snr_db)
        rate_scale = noise.sigma2_ue / noise.rho_gnb
        for L in spec.pilot_lengths:
            point = {}
            for name, (g, wall) in fixed_gains.items():
                point[name] = (g, wall)
            if "ls" in spec.methods:
                t0 = time.perf_counter()
                rng = root.child(_LS, L, _snr_key(snr_db))
                policy = RandomizationPolicy()
                parts = []
                for a, b in _chunks(spec.n_trials, spec.chunk):
                    up = run_uplink_frame(rng, H[a:b], L, policy, noise)
                    down = run_downlink_frame(rng, H[a:b], L, policy, noise)
                    sol = first_estimate_then_optimize(up, down)
                    parts.append(beamforming_gain(H[a:b], sol.config, sol.w))
                point["ls"] = (np.concatenate(parts), time.perf_counter() - t0)
            if "dnn" in spec.methods or "ls-fixed" in spec.methods:
                rng = root.child(_FIXED, L, _snr_key(snr_db))
                if "dnn" in spec.methods:
                    nets = _networks_for(spec, L, snr_db, nets_cache)
                    codebook = nets.codebook
                else:
                    nets = None
                    codebook = PilotCodebook.draw(root.child(_FIXED, L), spec.n_t, L)
                policy = RandomizationPolicy(FIXED, codebook)
                parts = {"dnn": [], "ls-fixed": []}
                walls = {"dnn": 0.0, "ls-fixed": 0.0}
                for a, b in _chunks(spec.n_trials, spec.chunk):
                    up = run_uplink_frame(rng, H[a:b], L, policy, noise)
                    down = run_downlink_frame(rng, H[a:b], L, policy, noise)
                    if nets is not None:
                        t0 = time.perf_counter()
                        sol = dnn_align_frames(nets, H[a:b], up, down)
                        parts["dnn"].append(sol.gain_predicted)
                        walls["dnn"] += time.perf_counter() - t0
                    if "ls-fixed" in spec.methods:
                        t0 = time.perf_counter()
                        sol = first_estimate_then_optimize(up, down)
                        parts["ls-fixed"].append(beamforming_gain(H[a:b], sol.config, sol.w))
                        walls["ls-fixed"] += time.perf_counter() - t0
                for name in ("dnn", "ls-fixed"):
                    if name in spec.methods:
                        point[name] = (np.concatenate(parts[name]), walls[name])
            for name, (g, wall) in point.items():
                res = summarize(g, rate_scale)
                rows.append(ResultRow(name, spec.n_t, L, snr_db, res.gain_mean, res.gain_se,
                                      res.rate_mean, spec.n_trials, spec.seed, wall))
            log.info("done L=%d snr=%g", L, snr_db)

    rows.sort(key=lambda r: (r.method, r.L, r.snr_db))
    if spec.out:
        emit_results(rows, spec.out)
    return rows


def _fmt(x):
    return f"{x:.15g}"


def format_row(row):
    return ",".join([row.method, str(row.n_t), str(row.L), _fmt(row.snr_db), _fmt(row.gain_mean),
                     _fmt(row.gain_se), _fmt(row.rate_mean), str(row.n_trials), str(row.seed),
                     f"{row.wall_s:.3f}"])


def emit_results(rows, path):
    """Write rows as CSV with the fixed header, ordered by (method, L, SNR)."""
    if not rows:
        raise ContractError("refusing to write an empty result table")
    ordered = sorted(rows, key=lambda r: (r.method, r.L, r.snr_db))
    with open(path, "w", newline="") as fh:
        fh.write(CSV_HEADER + "\n")
        for row in ordered:
            fh.write(format_row(row) + "\n")


def read_results(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if ",".join(reader.fieldnames) != CSV_HEADER:
            raise ContractError(f"{path}: unexpected header {reader.fieldnames}")
        return [ResultRow(r["method"], int(r["n_t"]), int(r["L"]), float(r["snr_db"]),
                          float(r["gain_mean"]), float(r["gain_se"]), float(r["rate_mean"]),
                          int(r["n_trials"]), int(r["seed"]), float(r["wall_s"]))
                for r in reader]


def result_table(rows):
    """``{(method, L, snr_db): row}`` lookup."""
    return {(r.method, r.L, r.snr_db): r for r in rows}
