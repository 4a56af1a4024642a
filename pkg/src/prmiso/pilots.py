"""
Double-side pilot protocol under TDD reciprocity.

Uplink: the UE sends ``L`` pilots ``sqrt(rho_ue)`` and the gNB observes

    y_gnb[:, l] = P_gnb_l^T H^H p_ue_l sqrt(rho_ue) + n_l,   n_l ~ CN(0, sigma2_gnb I)

Downlink: the gNB sends ``L`` pilots ``sqrt(rho_gnb)`` through a random
beamformer ``w_l`` and the UE observes

    y_ue[l] = p_ue_l^T H P_gnb_l w_l sqrt(rho_gnb) + n_l,    n_l ~ CN(0, sigma2_ue)

How the polarization/beamformer randomization varies with ``l`` is set by a
:class:`RandomizationPolicy`. Randomization arrays are recorded on the frame
with shapes broadcastable against the channel batch.
"""

from dataclasses import dataclass

import numpy as np

from .channel import HALF_PI, blocks, n_antennas, pol_vector
from .containers import read_container, write_container
from .numerics import ContractError, DomainError, sample_complex_gaussian

FIXED = "fixed"
PER_SLOT = "per-slot"
MODES = (FIXED, PER_SLOT)


def random_angles(rng, shape):
    return rng.uniform(0.0, HALF_PI, shape)


def random_beamformers(rng, shape):
    """Isotropic unit-norm complex vectors along the last axis of ``shape``."""
    g = sample_complex_gaussian(rng, 1, shape[-1], 1.0, batch=shape[:-1])[..., 0, :]
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


@dataclass(frozen=True)
class PilotCodebook:
    """
    One fixed draw of the fixed-codebook randomization, shared by every channel
    realization (the learned receivers need a stable pilot design).

    The UE keeps a single pilot polarization ``theta_ue`` on both links.
    Shapes: ``theta_ue ()``, ``ul_theta_gnb (L, n_t)``, ``dl_theta_gnb (n_t,)``,
    ``dl_w (L, n_t)``.
    """

    theta_ue: np.ndarray
    ul_theta_gnb: np.ndarray
    dl_theta_gnb: np.ndarray
    dl_w: np.ndarray

    @property
    def n_pilots(self):
        return self.ul_theta_gnb.shape[0]

    @property
    def n_t(self):
        return self.ul_theta_gnb.shape[1]

    @classmethod
    def draw(cls, rng, n_t, n_pilots):
        if n_t < 1 or n_pilots < 1:
            raise DomainError("n_t and n_pilots must be >= 1")
        return cls(
            theta_ue=np.asarray(random_angles(rng, ())),
            ul_theta_gnb=random_angles(rng, (n_pilots, n_t)),
            dl_theta_gnb=random_angles(rng, (n_t,)),
            dl_w=random_beamformers(rng, (n_pilots, n_t)),
        )


@dataclass(frozen=True)
class RandomizationPolicy:
    """
    ``fixed``: p_ue fixed over the frame; uplink P_gnb redrawn per
    slot; downlink P_gnb fixed and w redrawn per slot. With a ``codebook``
    the draw is shared across realizations, otherwise drawn per realization.

    ``per-slot``: p_ue and P_gnb (and w on the downlink) redrawn every slot,
    independently per realization. This makes the full channel identifiable
    from enough pilots and is what the least-squares estimators expect.
    """

    mode: str = PER_SLOT
    codebook: PilotCodebook = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise DomainError(f"unknown randomization mode {self.mode!r}")
        if self.codebook is not None and self.mode != FIXED:
            raise DomainError("a pilot codebook only applies to fixed-codebook mode")


@dataclass(frozen=True)
class UplinkPilotFrame:
    """Uplink observations ``y_gnb (..., n_t, L)`` and their randomization."""

    y_gnb: np.ndarray
    theta_ue: np.ndarray   # (..., L)
    theta_gnb: np.ndarray  # (..., L, n_t)
    amplitude: float
    mode: str

    @property
    def n_pilots(self):
        return self.y_gnb.shape[-1]

    @property
    def n_t(self):
        return self.y_gnb.shape[-2]


@dataclass(frozen=True)
class DownlinkPilotFrame:
    """Downlink observations ``y_ue (..., L)`` and their randomization."""

    y_ue: np.ndarray
    theta_ue: np.ndarray   # (..., L)
    theta_gnb: np.ndarray  # (..., L, n_t)
    w: np.ndarray          # (..., L, n_t), row l is w_l
    amplitude: float
    mode: str

    @property
    def n_pilots(self):
        return self.y_ue.shape[-1]

    @property
    def n_t(self):
        return self.w.shape[-1]


def _check_frame_args(H, n_pilots, policy):
    if n_pilots < 1:
        raise DomainError("pilot length L must be >= 1")
    if not isinstance(policy, RandomizationPolicy):
        raise DomainError("policy must be a RandomizationPolicy")
    n_t = n_antennas(H)
    cb = policy.codebook
    if cb is not None and (cb.n_t != n_t or cb.n_pilots != n_pilots):
        raise ContractError(
            f"codebook is for n_t={cb.n_t}, L={cb.n_pilots}; frame asks n_t={n_t}, L={n_pilots}")
    return n_t


def uplink_signal(H, theta_ue, theta_gnb, amplitude):
    """Noiseless uplink ``P_gnb_l^T H^H p_ue_l * amplitude`` arranged as ``(..., n_t, L)``."""
    p_ue = pol_vector(theta_ue)     # (..., L, 2)
    p_gnb = pol_vector(theta_gnb)   # (..., L, n_t, 2)
    # H_i^H p = conj(H_i)^T p, so the per-antenna term is conj(p_ue^T H_i p_gnb)
    return amplitude * np.einsum("...lr,...irc,...lic->...il", p_ue, np.conj(blocks(H)), p_gnb)


def downlink_signal(H, theta_ue, theta_gnb, w, amplitude):
    """Noiseless downlink ``p_ue_l^T H P_gnb_l w_l * amplitude``, shape ``(..., L)``."""
    p_ue = pol_vector(theta_ue)
    p_gnb = pol_vector(theta_gnb)
    return amplitude * np.einsum("...lr,...irc,...lic,...li->...l", p_ue, blocks(H), p_gnb, w)


def run_uplink_frame(rng, H, n_pilots, policy, noise):
    """
    Simulate one uplink pilot frame per channel in ``H`` (shape ``(..., 2, 2n_t)``).

    Randomization is drawn first, then the noise, so the noise stream is
    aligned across policies with the same shapes.
    """
    H = np.asarray(H)
    n_t = _check_frame_args(H, n_pilots, policy)
    batch = H.shape[:-2]
    L = n_pilots
    if policy.mode == PER_SLOT:
        theta_ue = random_angles(rng, batch + (L,))
        theta_gnb = random_angles(rng, batch + (L, n_t))
    elif policy.codebook is not None:
        cb = policy.codebook
        theta_ue = np.broadcast_to(cb.theta_ue, (L,))
        theta_gnb = cb.ul_theta_gnb
    else:
        theta_ue = np.repeat(random_angles(rng, batch)[..., None], L, axis=-1)
        theta_gnb = random_angles(rng, batch + (L, n_t))
    amp = np.sqrt(noise.rho_ue)
    y = uplink_signal(H, theta_ue, theta_gnb, amp)
    y = y + sample_complex_gaussian(rng, n_t, L, noise.sigma2_gnb, batch=batch)
    return UplinkPilotFrame(y, np.asarray(theta_ue), np.asarray(theta_gnb), amp, policy.mode)


def run_downlink_frame(rng, H, n_pilots, policy, noise):
    """Simulate one downlink pilot frame per channel in ``H``."""
    H = np.asarray(H)
    n_t = _check_frame_args(H, n_pilots, policy)
    batch = H.shape[:-2]
    L = n_pilots
    if policy.mode == PER_SLOT:
        theta_ue = random_angles(rng, batch + (L,))
        theta_gnb = random_angles(rng, batch + (L, n_t))
        w = random_beamformers(rng, batch + (L, n_t))
    elif policy.codebook is not None:
        cb = policy.codebook
        theta_ue = np.broadcast_to(cb.theta_ue, (L,))
        theta_gnb = np.broadcast_to(cb.dl_theta_gnb, (L, n_t))
        w = cb.dl_w
    else:
        theta_ue = np.repeat(random_angles(rng, batch)[..., None], L, axis=-1)
        theta_gnb = np.repeat(random_angles(rng, batch + (n_t,))[..., None, :], L, axis=-2)
        w = random_beamformers(rng, batch + (L, n_t))
    amp = np.sqrt(noise.rho_gnb)
    y = downlink_signal(H, theta_ue, theta_gnb, w, amp)
    y = y + sample_complex_gaussian(rng, 1, L, noise.sigma2_ue, batch=batch)[..., 0, :]
    return DownlinkPilotFrame(y, np.asarray(theta_ue), np.asarray(theta_gnb), np.asarray(w),
                              amp, policy.mode)


def flatten_for_dnn(frame):
    """
    Real network input ``[vec(Re Y), vec(Im Y)]``.

    ``vec`` stacks columns, so for the uplink matrix ``Y (n_t x L)`` the
    first ``n_t`` entries are ``Re Y[:, 0]``. Length ``2 L n_t`` (uplink) or
    ``2 L`` (downlink). Accepts a frame or a bare observation array.
    """
    if isinstance(frame, UplinkPilotFrame):
        y = np.swapaxes(frame.y_gnb, -1, -2).reshape(frame.y_gnb.shape[:-2] + (-1,))
    elif isinstance(frame, DownlinkPilotFrame):
        y = frame.y_ue
    else:
        y = np.asarray(frame)
        if y.ndim >= 2:
            y = np.swapaxes(y, -1, -2).reshape(y.shape[:-2] + (-1,))
    if y.shape[-1] == 0:
        raise ContractError("empty pilot frame")
    return np.concatenate([y.real, y.imag], axis=-1)


def save_frames(path, uplink, downlink, meta=None):
    """Store an uplink/downlink frame pair in the binary container format."""
    header = {"kind": "pilot-frames", "version": 1, "n_t": uplink.n_t, "L": uplink.n_pilots,
              "mode": uplink.mode, "ul_amplitude": uplink.amplitude,
              "dl_amplitude": downlink.amplitude}
    header.update(meta or {})
    write_container(path, b"PRMISOF1", header, {
        "y_gnb": uplink.y_gnb, "ul_theta_ue": uplink.theta_ue, "ul_theta_gnb": uplink.theta_gnb,
        "y_ue": downlink.y_ue, "dl_theta_ue": downlink.theta_ue,
        "dl_theta_gnb": downlink.theta_gnb, "dl_w": downlink.w,
    })


def load_frames(path):
    meta, a = read_container(path, b"PRMISOF1")
    up = UplinkPilotFrame(a["y_gnb"], a["ul_theta_ue"], a["ul_theta_gnb"],
                          meta["ul_amplitude"], meta["mode"])
    down = DownlinkPilotFrame(a["y_ue"], a["dl_theta_ue"], a["dl_theta_gnb"], a["dl_w"],
                              meta["dl_amplitude"], meta["mode"])
    return up, down, meta
