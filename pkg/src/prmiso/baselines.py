"""
Benchmark anchors: least-squares channel estimation from pilot frames,
perfect-CSI polarization/beamforming alignment, a grid oracle for it, the
random baseline, and the first-estimate-then-optimize pipeline.
"""

from dataclasses import dataclass, field

import numpy as np

from .channel import (HALF_PI, PolarizationConfig, blocks, effective_channel, from_blocks,
                      n_antennas, pol_vector)
from .numerics import ContractError, solve_min_norm_ls
from .pilots import random_angles, random_beamformers


class DegenerateInputError(ContractError):
    """The effective channel is identically zero, so no beamformer is preferred."""


@dataclass(frozen=True)
class ChannelEstimate:
    H_hat: np.ndarray
    source: str
    residual: np.ndarray


@dataclass(frozen=True)
class AlignmentSolution:
    """Polarization angles plus beamformer; ``gain_predicted`` is on the channel it was designed for."""

    config: PolarizationConfig
    w: np.ndarray
    gain_predicted: np.ndarray
    converged: np.ndarray = True
    n_iters: np.ndarray = 0
    history: np.ndarray = field(default=None, repr=False)


# -- least squares -------------------------------------------------------------

def _check_frame(frame):
    for name in ("theta_ue", "theta_gnb"):
        if getattr(frame, name, None) is None:
            raise ContractError(f"frame lacks its randomization record ({name})")
    if frame.n_pilots < 1:
        raise ContractError("frame has no pilots")
    if frame.amplitude <= 0:
        raise ContractError("pilot amplitude must be positive to estimate the channel")


def uplink_design(frame):
    """
    Per-antenna LS design of the uplink frame.

    Returns ``A`` of shape ``(..., n_t, L, 4)`` and right-hand side
    ``(..., n_t, L)`` such that antenna ``i`` satisfies
    ``A[i] @ vec_rowmajor(H_i) = rhs[i]`` in the noiseless case. The full
    stacked system over all antennas is block diagonal with these blocks.
    """
    _check_frame(frame)
    n_t = frame.n_t
    L = frame.n_pilots
    p_ue = pol_vector(frame.theta_ue)                        # (..., L, 2)
    p_gnb = pol_vector(frame.theta_gnb)                      # (..., L, n_t, 2)
    p_ue = np.broadcast_to(p_ue[..., None, :], p_gnb.shape)  # (..., L, n_t, 2)
    A = (p_ue[..., :, None] * p_gnb[..., None, :]).reshape(p_gnb.shape[:-1] + (4,))
    A = np.swapaxes(A, -3, -2)                               # (..., n_t, L, 4)
    # conjugating undoes the H^H of the reciprocal link
    rhs = np.conj(frame.y_gnb) / frame.amplitude             # (..., n_t, L)
    batch = np.broadcast_shapes(A.shape[:-3], rhs.shape[:-2])
    return np.broadcast_to(A, batch + (n_t, L, 4)), rhs


def downlink_design(frame):
    """Stacked downlink LS design ``A (..., L, 4 n_t)``, ``rhs (..., L)``; unknowns ordered ``(i, r, c)``."""
    _check_frame(frame)
    p_ue = pol_vector(frame.theta_ue)                        # (..., L, 2)
    p_gnb = pol_vector(frame.theta_gnb)                      # (..., L, n_t, 2)
    A = np.einsum("...lr,...lic,...li->...lirc", p_ue, p_gnb, frame.w)
    A = A.reshape(A.shape[:-3] + (-1,))
    rhs = frame.y_ue / frame.amplitude
    batch = np.broadcast_shapes(A.shape[:-2], rhs.shape[:-1])
    return np.broadcast_to(A, batch + A.shape[-2:]), rhs


def ls_estimate_uplink(frame):
    """
    Minimum-norm LS estimate of ``H`` from an uplink frame.

    With per-slot randomization and ``L >= 4`` the noiseless estimate is
    exact; with fewer pilots each antenna's 2x2 block is recovered on the
    span of the probed rank-one directions only.
    """
    A, rhs = uplink_design(frame)
    x = solve_min_norm_ls(A, rhs)                             # (..., n_t, 4)
    fit = np.einsum("...lk,...k->...l", A, x)
    residual = frame.amplitude ** 2 * np.sum(np.abs(rhs - fit) ** 2, axis=(-2, -1))
    H_hat = from_blocks(x.reshape(x.shape[:-1] + (2, 2)))
    return ChannelEstimate(H_hat, "uplink", residual)


def ls_estimate_downlink(frame):
    """
    Minimum-norm LS estimate of ``H`` from a downlink frame.

    Each slot yields one scalar equation, so exact noiseless recovery needs
    ``L >= 4 n_t`` per-slot pilots.
    """
    A, rhs = downlink_design(frame)
    x = solve_min_norm_ls(A, rhs)
    fit = np.einsum("...lk,...k->...l", A, x)
    residual = frame.amplitude ** 2 * np.sum(np.abs(rhs - fit) ** 2, axis=-1)
    H_hat = from_blocks(x.reshape(x.shape[:-1] + (frame.n_t, 2, 2)))
    return ChannelEstimate(H_hat, "downlink", residual)


# -- perfect-CSI alignment -----------------------------------------------------

def phase_matched_beamformer(h_eff):
    """``w = conj(h_eff) / ||h_eff||``; attains gain ``||h_eff||^2``."""
    h_eff = np.asarray(h_eff)
    norm = np.linalg.norm(h_eff, axis=-1, keepdims=True)
    if np.any(norm == 0):
        raise DegenerateInputError("zero effective channel has no phase-matched beamformer")
    return np.conj(h_eff) / norm


def quarter_circle_argmax(M):
    """
    Maximise ``p(t)^T M p(t)`` over ``t in [0, pi/2]`` for real symmetric 2x2 ``M``.

    ``p^T M p = (a + c)/2 + R cos(2t - phi)`` with ``phi = atan2(b, (a - c)/2)``.
    When ``phi in [0, pi]`` the unconstrained maximiser ``phi/2`` (the
    principal eigenvector's angle) is feasible; otherwise the maximum sits on
    an endpoint. Ties go to the smaller angle.
    """
    a = M[..., 0, 0]
    b = 0.5 * (M[..., 0, 1] + M[..., 1, 0])
    c = M[..., 1, 1]
    phi = np.arctan2(b, 0.5 * (a - c))
    interior = phi >= 0
    endpoint = np.where(a >= c, 0.0, HALF_PI)
    return np.where(interior, 0.5 * np.clip(phi, 0.0, np.pi), endpoint)


def _gnb_angles_given_ue(Hb, theta_ue):
    # u_i = H_i^T p_ue; |u_i^T p|^2 = p^T Re(conj(u_i) u_i^T) p
    u = np.einsum("...r,...irc->...ic", pol_vector(theta_ue), Hb)
    M = np.real(np.conj(u)[..., :, None] * u[..., None, :])
    return quarter_circle_argmax(M)


def _ue_angle_given_gnb(Hb, theta_gnb):
    c = np.einsum("...irc,...ic->...ir", Hb, pol_vector(theta_gnb))
    M = np.real(np.einsum("...ir,...is->...rs", np.conj(c), c))
    return quarter_circle_argmax(M)


def _objective(Hb, theta_gnb, theta_ue):
    h = np.einsum("...r,...irc,...ic->...i", pol_vector(theta_ue), Hb, pol_vector(theta_gnb))
    return np.sum(np.abs(h) ** 2, axis=-1)


def _alternate(Hb, starts, tol, max_iters):
    # Hb: (B, 1, n_t, 2, 2); runs every start for every instance
    B, _, n_t = Hb.shape[:3]
    K = len(starts)
    theta_ue = np.broadcast_to(starts, (B, K)).copy()
    theta_gnb = np.full((B, K, n_t), np.pi / 4)
    obj = _objective(Hb, theta_gnb, theta_ue)
    history = [obj.max(axis=-1)]
    active = np.ones(obj.shape, dtype=bool)
    n_iters = np.zeros(obj.shape, dtype=int)
    for _ in range(max_iters):
        new_gnb = _gnb_angles_given_ue(Hb, theta_ue)
        new_ue = _ue_angle_given_gnb(Hb, new_gnb)
        new_obj = _objective(Hb, new_gnb, new_ue)
        # accept only improvements so rounding never lowers the objective
        take = active & (new_obj >= obj)
        theta_gnb = np.where(take[..., None], new_gnb, theta_gnb)
        theta_ue = np.where(take, new_ue, theta_ue)
        improvement = np.where(take, new_obj - obj, 0.0)
        obj = np.where(take, new_obj, obj)
        n_iters = n_iters + active
        history.append(obj.max(axis=-1))
        active = active & (improvement >= tol)
        if not np.any(active):
            break
    best = np.argmax(obj, axis=-1)[:, None]
    return (np.take_along_axis(theta_gnb, best[..., None], -2)[:, 0, :],
            np.take_along_axis(theta_ue, best, -1)[:, 0],
            np.take_along_axis(obj, best, -1)[:, 0],
            ~np.any(active, axis=-1), n_iters.max(axis=-1), np.array(history))


def optimize_polarization_iterative(H, tol=1e-9, max_iters=200, n_starts=17, chunk=256):
    """
    Alternating closed-form maximisation of ``||h_eff||^2`` over the angles.

    Each sweep sets every gNB angle optimally for the current UE angle (the
    objective decouples per antenna), then the UE angle optimally for the
    current gNB angles. The quarter-circle constraint creates boundary local
    maxima, so the alternation is run from ``n_starts`` UE angles evenly
    spread over ``[0, pi/2]`` (odd counts include ``pi/4``; gNB angles start
    at ``pi/4``) and the best run is kept, earliest start on ties. A run
    stops once a sweep improves its objective by less than ``tol``; no run's
    objective ever decreases.

    ``H`` may carry batch dimensions; instances are solved independently
    (in chunks of ``chunk``). ``history`` has shape ``(sweeps + 1,) + batch``
    and holds the best objective over runs after each sweep, held constant
    once an instance has stopped.
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    if n_starts < 1:
        raise ValueError("n_starts must be >= 1")
    H = np.asarray(H)
    n_t = n_antennas(H)
    batch = H.shape[:-2]
    starts = np.linspace(0.0, HALF_PI, n_starts) if n_starts > 1 else np.array([np.pi / 4])
    Hb = blocks(H).reshape((-1, 1, n_t, 2, 2))
    parts = [_alternate(Hb[k:k + chunk], starts, tol, max_iters)
             for k in range(0, len(Hb), chunk)]
    theta_gnb, theta_ue, obj, converged, n_iters = (
        np.concatenate([p[m] for p in parts]).reshape(batch + parts[0][m].shape[1:])
        for m in range(5))
    depth = max(len(p[5]) for p in parts)
    history = np.concatenate(
        [np.concatenate([p[5], np.repeat(p[5][-1:], depth - len(p[5]), axis=0)]) for p in parts],
        axis=1).reshape((depth,) + batch)
    config = PolarizationConfig(theta_gnb, theta_ue)
    w = phase_matched_beamformer(effective_channel(H, config))
    return AlignmentSolution(config, w, obj, converged=converged, n_iters=n_iters, history=history)


def angle_grid(step_deg):
    if step_deg <= 0:
        raise ValueError("grid step must be > 0")
    n = int(np.ceil(90.0 / step_deg - 1e-9))
    return np.linspace(0.0, HALF_PI, n + 1)


def brute_force_polarization(H, grid_step_deg=0.25):
    """
    Grid oracle for the PCSI polarization problem (single channel).

    Scans the UE angle on a uniform grid over ``[0, pi/2]``; for each value
    the objective splits into independent per-antenna terms, each maximised
    over the same grid. Meant for small ``n_t``.
    """
    H = np.asarray(H)
    if H.ndim != 2:
        raise ContractError("brute_force_polarization takes a single channel")
    Hb = blocks(H)
    grid = angle_grid(grid_step_deg)
    P = pol_vector(grid)                                      # (G, 2)
    u = np.einsum("gr,irc->gic", P, Hb)                       # (G_ue, n_t, 2)
    vals = np.abs(u @ P.T) ** 2                               # (G_ue, n_t, G_gnb)
    best_idx = np.argmax(vals, axis=-1)                       # first max = smallest angle
    per_ue = np.take_along_axis(vals, best_idx[..., None], -1)[..., 0].sum(axis=-1)
    k = int(np.argmax(per_ue))
    config = PolarizationConfig(grid[best_idx[k]], grid[k])
    w = phase_matched_beamformer(effective_channel(H, config))
    return AlignmentSolution(config, w, per_ue[k])


def random_baseline(rng, n_t, batch=()):
    """Uniform random angles and an isotropic unit beamformer."""
    if n_t < 1:
        raise ValueError("n_t must be >= 1")
    batch = tuple(batch)
    theta_ue = random_angles(rng, batch)
    theta_gnb = random_angles(rng, batch + (n_t,))
    w = random_beamformers(rng, batch + (n_t,))
    return AlignmentSolution(PolarizationConfig(theta_gnb, theta_ue), w, np.full(batch, np.nan))


def first_estimate_then_optimize(uplink_frame, downlink_frame, tol=1e-9, max_iters=200,
                                 n_starts=17):
    """
    Conventional two-sided pipeline.

    The gNB LS-estimates ``H`` from its uplink frame and keeps the gNB angles
    and phase-matched beamformer of the PCSI optimiser run on that estimate.
    The UE does the same on its downlink estimate and keeps only the UE angle.
    """
    if uplink_frame is None or downlink_frame is None:
        raise ContractError("both pilot frames are required")
    est_ul = ls_estimate_uplink(uplink_frame)
    est_dl = ls_estimate_downlink(downlink_frame)
    gnb = optimize_polarization_iterative(est_ul.H_hat, tol, max_iters, n_starts)
    ue = optimize_polarization_iterative(est_dl.H_hat, tol, max_iters, n_starts)
    config = PolarizationConfig(gnb.config.theta_gnb, ue.config.theta_ue)
    return AlignmentSolution(config, gnb.w, gnb.gain_predicted,
                             converged=gnb.converged & ue.converged,
                             n_iters=np.maximum(gnb.n_iters, ue.n_iters))
