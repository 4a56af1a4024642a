"""
Depolarized PR-MISO channel, polarization vectors, effective channel,
beamforming gain and achievable rate.

A depolarized channel for ``n_t`` gNB antennas is a complex ``2 x 2n_t``
matrix ``H = [H_1 ... H_nt]`` whose 2x2 block ``H_i`` (columns ``2i, 2i+1``)
holds the vv, vh / hv, hh responses of antenna ``i``. All functions accept
leading batch dimensions, e.g. ``H`` of shape ``(B, 2, 2n_t)``.
"""

import struct
from dataclasses import dataclass

import numpy as np

from .numerics import ContractError, DomainError, sample_complex_gaussian

HALF_PI = np.pi / 2
UNIT_NORM_TOL = 1e-9
_ANGLE_SLACK = 1e-12


def _check_angles(theta):
    theta = np.asarray(theta, dtype=np.float64)
    if not np.all(np.isfinite(theta)):
        raise DomainError("polarization angles must be finite")
    if np.any(theta < -_ANGLE_SLACK) or np.any(theta > HALF_PI + _ANGLE_SLACK):
        raise DomainError("polarization angles must lie in [0, pi/2]")
    return theta


@dataclass(frozen=True)
class PolarizationConfig:
    """gNB angles ``theta_gnb`` (shape ``(..., n_t)``) and UE angle ``theta_ue`` (shape ``(...)``)."""

    theta_gnb: np.ndarray
    theta_ue: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "theta_gnb", _check_angles(self.theta_gnb))
        object.__setattr__(self, "theta_ue", _check_angles(self.theta_ue))
        if self.theta_gnb.ndim < 1:
            raise ContractError("theta_gnb must have an antenna axis")

    @property
    def n_t(self):
        return self.theta_gnb.shape[-1]

    @property
    def p_ue(self):
        return pol_vector(self.theta_ue)

    @property
    def p_gnb(self):
        return pol_vector(self.theta_gnb)


@dataclass(frozen=True)
class NoiseSpec:
    """Pilot powers and noise variances; SNR is ``rho / sigma2``."""

    sigma2_ue: float = 1.0
    sigma2_gnb: float = 1.0
    rho_gnb: float = 1.0
    rho_ue: float = 1.0

    def __post_init__(self):
        for name in ("sigma2_ue", "sigma2_gnb", "rho_gnb", "rho_ue"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be >= 0")

    @classmethod
    def from_snr_db(cls, snr_db, rho=1.0):
        """Equal powers on both links with ``sigma2 = rho / 10^(snr/10)``."""
        sigma2 = rho / 10.0 ** (snr_db / 10.0)
        return cls(sigma2_ue=sigma2, sigma2_gnb=sigma2, rho_gnb=rho, rho_ue=rho)


def sample_channel(rng, n_t, batch=()):
    """Rayleigh NLoS channel: every entry i.i.d. CN(0, 1). Shape ``batch + (2, 2n_t)``."""
    if n_t < 1:
        raise DomainError("n_t must be >= 1")
    return sample_complex_gaussian(rng, 2, 2 * n_t, 1.0, batch=batch)


def n_antennas(H):
    H = np.asarray(H)
    if H.ndim < 2 or H.shape[-2] != 2 or H.shape[-1] % 2 or H.shape[-1] == 0:
        raise ContractError(f"depolarized channel must be 2 x 2n_t, got {H.shape}")
    return H.shape[-1] // 2


def blocks(H):
    """Polarization-basis blocks, shape ``(..., n_t, 2, 2)`` with ``[..., i, :, :] = H_i``."""
    n_t = n_antennas(H)
    H = np.asarray(H)
    return np.swapaxes(H.reshape(H.shape[:-1] + (n_t, 2)), -3, -2)


def from_blocks(B):
    """Inverse of :func:`blocks`."""
    B = np.asarray(B)
    n_t = B.shape[-3]
    return np.swapaxes(B, -3, -2).reshape(B.shape[:-3] + (2, 2 * n_t))


def pol_vector(theta):
    """``(cos theta, sin theta)`` stacked on a new last axis."""
    theta = _check_angles(theta)
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def block_diag_pol(theta_gnb):
    """
    Block-diagonal gNB polarization matrix of shape ``(..., 2n_t, n_t)``.

    Column ``i`` carries ``p_gnb_i`` in rows ``2i, 2i+1``.
    """
    p = pol_vector(theta_gnb)
    n_t = p.shape[-2]
    eye = np.eye(n_t)
    # out[..., 2i + r, k] = p[..., i, r] * delta_ik
    out = p[..., :, :, None] * eye[:, None, :]
    return out.reshape(p.shape[:-2] + (2 * n_t, n_t))


def effective_channel(H, config):
    """
    Effective polarized channel ``h_eff[i] = p_ue^T H_i p_gnb_i``, shape ``(..., n_t)``.
    """
    if n_antennas(H) != config.n_t:
        raise ContractError("channel and polarization config disagree on n_t")
    return np.einsum("...r,...irc,...ic->...i", config.p_ue, blocks(H), config.p_gnb)


def effective_channel_matrix_form(H, config):
    """Same quantity as :func:`effective_channel` via ``p_ue^T H P_gnb``."""
    if n_antennas(H) != config.n_t:
        raise ContractError("channel and polarization config disagree on n_t")
    P = block_diag_pol(config.theta_gnb)
    return np.einsum("...r,...rc,...ck->...k", config.p_ue, np.asarray(H), P)


def check_unit_norm(w, tol=UNIT_NORM_TOL):
    w = np.asarray(w)
    norms = np.linalg.norm(w, axis=-1)
    if not np.all(np.abs(norms - 1.0) <= tol):
        raise ContractError("beamformer must have unit L2 norm")
    return w


def beamforming_gain(H, config, w):
    """``|p_ue^T H P_gnb w|^2`` for a unit-norm beamformer ``w``."""
    w = check_unit_norm(w)
    h_eff = effective_channel(H, config)
    return np.abs(np.sum(h_eff * w, axis=-1)) ** 2


def achievable_rate(gain, sigma2_ue):
    """``log2(1 + gain / sigma2)`` in bits per channel use."""
    if sigma2_ue <= 0:
        raise DomainError("sigma2_ue must be > 0")
    gain = np.asarray(gain, dtype=np.float64)
    if np.any(gain < 0):
        raise DomainError("gain must be >= 0")
    return np.log2(1.0 + gain / sigma2_ue)


# Channel dataset container
#
#   header  : magic b"PRMISOH1" | uint32 n_t | uint64 count | uint64 seed   (little endian)
#   payload : count realizations, each 8*n_t float64 little-endian values:
#             for block i = 1..n_t: Re/Im of h_vv, h_vh, h_hv, h_hh
#             (block entries row-major, real/imag interleaved)

CHANNEL_MAGIC = b"PRMISOH1"
_HEADER = struct.Struct("<8sIQQ")


def save_channels(path, H, seed=0):
    """Write a stack of channels of shape ``(count, 2, 2n_t)``."""
    H = np.asarray(H, dtype=np.complex128)
    if H.ndim == 2:
        H = H[None]
    n_t = n_antennas(H)
    payload = blocks(H).reshape(len(H), n_t * 4)
    flat = np.empty((len(H), 8 * n_t), dtype="<f8")
    flat[:, 0::2] = payload.real
    flat[:, 1::2] = payload.imag
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(CHANNEL_MAGIC, n_t, len(H), int(seed)))
        fh.write(flat.tobytes())


def load_channels(path):
    """Read a channel dataset; returns ``(H, seed)`` with ``H`` of shape ``(count, 2, 2n_t)``."""
    with open(path, "rb") as fh:
        raw = fh.read()
    magic, n_t, count, seed = _HEADER.unpack_from(raw)
    if magic != CHANNEL_MAGIC:
        raise ContractError(f"{path}: not a channel dataset")
    flat = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if flat.size != count * 8 * n_t:
        raise ContractError(f"{path}: truncated payload")
    flat = flat.reshape(count, 8 * n_t)
    payload = (flat[:, 0::2] + 1j * flat[:, 1::2]).reshape(count, n_t, 2, 2)
    return from_blocks(payload), seed
