import numpy as np
import pytest

from prmiso.channel import NoiseSpec, PolarizationConfig, effective_channel, sample_channel
from prmiso.numerics import ContractError, DomainError
from prmiso.pilots import (FIXED, PER_SLOT, DownlinkPilotFrame, PilotCodebook,
                           RandomizationPolicy, downlink_signal, flatten_for_dnn, load_frames,
                           run_downlink_frame, run_uplink_frame, save_frames, uplink_signal)

NOISELESS = NoiseSpec(0.0, 0.0, 1.0, 1.0)


def test_zero_channel_zero_pilots(rng):
    H = np.zeros((2, 8), complex)
    f = run_uplink_frame(rng, H, 3, RandomizationPolicy(), NOISELESS)
    assert np.all(f.y_gnb == 0) and f.y_gnb.shape == (4, 3)


def test_scalar_identity_chain(rng):
    cb = PilotCodebook(np.asarray(0.0), np.zeros((2, 1)), np.zeros(1), np.ones((2, 1), complex))
    policy = RandomizationPolicy(FIXED, cb)
    H = np.eye(2, dtype=complex)
    up = run_uplink_frame(rng, H, 2, policy, NOISELESS)
    assert np.allclose(up.y_gnb, 1.0)
    down = run_downlink_frame(rng, H, 2, policy, NOISELESS)
    assert np.allclose(down.y_ue, 1.0)


def test_uplink_regenerates_from_record(rng):
    H = sample_channel(rng, 5, (4,))
    f = run_uplink_frame(rng, H, 6, RandomizationPolicy(), NOISELESS)
    # offline: column l = P_l^T H^H p_ue_l
    for b in range(4):
        for l in range(6):
            P = np.zeros((10, 5))
            for i in range(5):
                P[2 * i:2 * i + 2, i] = [np.cos(f.theta_gnb[b, l, i]), np.sin(f.theta_gnb[b, l, i])]
            p = np.array([np.cos(f.theta_ue[b, l]), np.sin(f.theta_ue[b, l])])
            expected = P.T @ H[b].conj().T @ p
            assert np.max(np.abs(f.y_gnb[b, :, l] - expected)) < 1e-12


def test_downlink_coherent_case(rng):
    n_t, rho = 4, 2.5
    H = np.tile(np.eye(2, dtype=complex), (1, n_t))
    w = np.ones((3, n_t), complex) / 2.0  # aligned with conj(h_eff) = ones
    cb = PilotCodebook(np.asarray(0.0), np.zeros((3, n_t)), np.zeros(n_t), w)
    f = run_downlink_frame(rng, H, 3, RandomizationPolicy(FIXED, cb),
                           NoiseSpec(0.0, 0.0, rho, rho))
    assert np.allclose(f.y_ue, 2 * np.sqrt(rho))


def test_downlink_noise_floor(rng):
    H = np.zeros((2, 6), complex)
    f = run_downlink_frame(rng, H, 10_000, RandomizationPolicy(), NoiseSpec(3.0, 3.0, 1.0, 1.0))
    assert abs(np.var(f.y_ue) / 3.0 - 1) < 0.05


def test_per_slot_single_slot_direct(rng):
    H = sample_channel(rng, 3)
    f = run_downlink_frame(rng, H, 1, RandomizationPolicy(PER_SLOT), NOISELESS)
    cfg = PolarizationConfig(f.theta_gnb[0], f.theta_ue[0])
    assert abs(f.y_ue[0] - effective_channel(H, cfg) @ f.w[0]) < 1e-12


def test_fixed_holds_polarizations(rng):
    H = sample_channel(rng, 4, (3,))
    up = run_uplink_frame(rng, H, 5, RandomizationPolicy(FIXED), NOISELESS)
    down = run_downlink_frame(rng, H, 5, RandomizationPolicy(FIXED), NOISELESS)
    assert np.all(up.theta_ue == up.theta_ue[..., :1])
    assert not np.all(up.theta_gnb == up.theta_gnb[..., :1, :])
    assert np.all(down.theta_ue == down.theta_ue[..., :1])
    assert np.all(down.theta_gnb == down.theta_gnb[..., :1, :])
    assert not np.allclose(down.w, down.w[..., :1, :])
    assert np.allclose(np.linalg.norm(down.w, axis=-1), 1)


def test_codebook_is_shared_across_realizations(rng):
    cb = PilotCodebook.draw(rng, 4, 3)
    H = sample_channel(rng, 4, (6,))
    up = run_uplink_frame(rng, H, 3, RandomizationPolicy(FIXED, cb), NOISELESS)
    assert np.array_equal(up.theta_gnb, cb.ul_theta_gnb)
    with pytest.raises(ContractError):
        run_uplink_frame(rng, H, 4, RandomizationPolicy(FIXED, cb), NOISELESS)


def test_snr_knob_doubles_signal_energy(rng):
    H = sample_channel(rng, 4, (50,))
    cb = PilotCodebook.draw(rng, 4, 3)
    e1 = np.abs(uplink_signal(H, np.full(3, cb.theta_ue), cb.ul_theta_gnb, np.sqrt(1.0))) ** 2
    e2 = np.abs(uplink_signal(H, np.full(3, cb.theta_ue), cb.ul_theta_gnb, np.sqrt(2.0))) ** 2
    assert np.allclose(e2, 2 * e1, rtol=1e-14)
    tu, tg = np.full(3, cb.theta_ue), np.tile(cb.dl_theta_gnb, (3, 1))
    d1 = np.abs(downlink_signal(H, tu, tg, cb.dl_w, 1.0)) ** 2
    d2 = np.abs(downlink_signal(H, tu, tg, cb.dl_w, np.sqrt(2.0))) ** 2
    assert np.allclose(d2, 2 * d1, rtol=1e-14)


def test_invalid_arguments(rng):
    H = sample_channel(rng, 2)
    with pytest.raises(DomainError):
        run_uplink_frame(rng, H, 0, RandomizationPolicy(), NOISELESS)
    with pytest.raises(DomainError):
        RandomizationPolicy("sometimes")
    with pytest.raises(DomainError):
        run_downlink_frame(rng, H, 2, "per-slot", NOISELESS)


def test_flatten_scalar():
    assert np.array_equal(flatten_for_dnn(np.array([3.0 + 4.0j])), [3.0, 4.0])


def test_flatten_uplink_layout():
    Y = np.array([[1 + 5j, 2 + 6j], [3 + 7j, 4 + 8j]])  # n_t=2 rows, L=2 columns
    frame_vec = flatten_for_dnn(Y)
    # vec stacks columns: Re(Y[:,0]), Re(Y[:,1]), then imaginary parts
    assert np.array_equal(frame_vec, [1, 3, 2, 4, 5, 7, 6, 8])


def test_flatten_lengths_and_conjugation(rng):
    H = sample_channel(rng, 3, (2,))
    up = run_uplink_frame(rng, H, 4, RandomizationPolicy(), NoiseSpec())
    down = run_downlink_frame(rng, H, 4, RandomizationPolicy(), NoiseSpec())
    x = flatten_for_dnn(up)
    assert x.shape == (2, 24) and flatten_for_dnn(down).shape == (2, 8)
    xc = flatten_for_dnn(np.conj(up.y_gnb))
    assert np.array_equal(xc[:, :12], x[:, :12]) and np.array_equal(xc[:, 12:], -x[:, 12:])


def test_flatten_empty():
    with pytest.raises(ContractError):
        flatten_for_dnn(np.zeros((3, 0), complex))


def test_frames_roundtrip(tmp_path, rng):
    H = sample_channel(rng, 3, (4,))
    up = run_uplink_frame(rng, H, 2, RandomizationPolicy(), NoiseSpec())
    down = run_downlink_frame(rng, H, 2, RandomizationPolicy(), NoiseSpec())
    save_frames(tmp_path / "f.bin", up, down, {"seed": 5})
    up2, down2, meta = load_frames(tmp_path / "f.bin")
    assert meta["seed"] == 5 and meta["n_t"] == 3
    assert np.array_equal(up2.y_gnb, up.y_gnb) and np.array_equal(down2.w, down.w)
    assert isinstance(down2, DownlinkPilotFrame)
