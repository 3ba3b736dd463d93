"""Passband chain operations and the batched fast-path simulators."""

import numpy as np
import pytest
from scipy.signal import fftconvolve

from trpclink.channel import ChannelRealization, apply_channel
from trpclink.signals import (
    TrConfig,
    Waveform,
    bpsk_baseband,
    rrc_pulse,
    sample_index,
    tr_baseband,
    trpc_baseband,
)
from trpclink.transceiver import (
    IntegrationWindow,
    SrakeLtiSimulator,
    TrLtiSimulator,
    TrpcLtiSimulator,
    TrpcPassbandSimulator,
    _brownian_rows,
    _filtered_waveform,
    acr_decide,
    add_awgn,
    downconvert_iq,
    lowpass_taps,
    select_window,
    simulate_coupled_trpc,
    srake_fingers,
    srake_mrc_decide,
    tr_acr_decide,
    tr_frame_windows,
    upconvert,
)


def _tx(cfg, bits, ch, theta=0.0):
    x = trpc_baseband(np.asarray(bits, dtype=float), cfg, cfg.fs_pass)
    return apply_channel(upconvert(x, theta, cfg), ch)


def _rx(cfg, r, n_symbols, delta_f=0.0, phi=0.0, mode="iq", win=None, ch=None):
    z = downconvert_iq(r, 0.0, cfg, delta_f=delta_f, phi=phi, mode=mode)
    return acr_decide(z, cfg, win or select_window(ch, cfg), n_symbols)


def test_integration_window_validation():
    IntegrationWindow(0.0, 1e-8)
    with pytest.raises(ValueError):
        IntegrationWindow(-1e-9, 1e-8)
    with pytest.raises(ValueError):
        IntegrationWindow(2e-8, 2e-8)


def test_upconvert_carrier_form(cfg):
    w = Waveform(np.ones(8), cfg.fs_pass)
    s = upconvert(w, 0.0, cfg)
    # sqrt(2) cos(2 pi f_c t + pi/4) on the 4-samples-per-cycle grid
    np.testing.assert_allclose(s.samples, [1, -1, -1, 1, 1, -1, -1, 1], atol=1e-9)


def test_upconvert_energy_preserved(cfg):
    x = trpc_baseband(np.array([1.0, -1.0, 1.0]), cfg, cfg.fs_pass)
    s = upconvert(x, 0.0, cfg)
    assert s.energy() == pytest.approx(x.energy(), rel=1e-3)


def test_upconvert_zero_in_zero_out(cfg):
    s = upconvert(Waveform(np.zeros(64), cfg.fs_pass), 0.3, cfg)
    np.testing.assert_array_equal(s.samples, 0.0)


def test_add_awgn_variance(cfg):
    rng = np.random.default_rng(0)
    w = Waveform(np.zeros(10_000_000), cfg.fs_base)
    n0 = 1e-9
    out = add_awgn(rng, w, n0)
    assert out.samples.var() == pytest.approx(n0 * cfg.fs_base / 2, rel=0.01)

    same = add_awgn(rng, w, 0.0)
    np.testing.assert_array_equal(same.samples, w.samples)

    wc = Waveform(np.zeros(2_000_000, dtype=complex), cfg.fs_base)
    out = add_awgn(rng, wc, n0)
    assert out.samples.real.var() == pytest.approx(n0 * cfg.fs_base / 2, rel=0.01)
    assert out.samples.imag.var() == pytest.approx(n0 * cfg.fs_base / 2, rel=0.01)


def test_loopback_z_is_half_one_plus_j_times_baseband(cfg, single_tap):
    """Ideal oscillators: the downconverter output is (1+j)/2 times the
    lowpass-filtered baseband signal, up to the double-frequency residue."""
    bits = np.array([1.0, -1.0])
    z = downconvert_iq(_tx(cfg, bits, single_tap), 0.0, cfg)

    ref = _filtered_waveform(
        trpc_baseband(bits, cfg, cfg.fs_base), single_tap,
        lowpass_taps(cfg, cfg.fs_base))
    k_z = sample_index(z.t0, cfg.fs_base, tol=1e-3)
    k_r = sample_index(ref.t0, cfg.fs_base, tol=1e-3)
    want = 0.5 * (1 + 1j) * ref.samples[k_z - k_r : k_z - k_r + len(z.samples)]

    err = np.abs(z.samples - want) ** 2
    nmse = err.sum() / np.abs(want).sum() ** 2 * len(want)
    assert nmse < 1e-3
    assert np.abs(z.samples - want).max() < 0.02 * np.abs(want).max()


def test_loopback_recovers_bits_exactly(cfg, cm1):
    """Filter-delay accounting: no channel noise, no impairments, BER 0."""
    rng = np.random.default_rng(4)
    bits = rng.integers(0, 2, 16) * 2.0 - 1.0
    ch = cm1[0]
    rec = _rx(cfg, _tx(cfg, bits, ch), len(bits), ch=ch)
    np.testing.assert_array_equal(rec.bits, bits)


def test_phase_offset_pi_flips_output(cfg, single_tap):
    bits = np.array([1.0])
    r = _tx(cfg, bits, single_tap)
    z0 = downconvert_iq(r, 0.0, cfg, phi=0.0)
    zpi = downconvert_iq(r, 0.0, cfg, phi=np.pi)
    np.testing.assert_allclose(zpi.samples, -z0.samples,
                               atol=1e-9 * np.abs(z0.samples).max())


def test_freq_offset_keeps_envelope(cfg, single_tap):
    bits = np.array([1.0])
    r = _tx(cfg, bits, single_tap)
    e0 = np.abs(downconvert_iq(r, 0.0, cfg).samples) ** 2
    e5 = np.abs(downconvert_iq(r, 0.0, cfg, delta_f=5e6).samples) ** 2
    assert e5.sum() == pytest.approx(e0.sum(), rel=0.01)


def test_i_only_zeroes_quadrature(cfg, single_tap):
    r = _tx(cfg, np.array([1.0]), single_tap)
    z_iq = downconvert_iq(r, 0.0, cfg, phi=0.7, mode="iq")
    z_i = downconvert_iq(r, 0.0, cfg, phi=0.7, mode="i_only")
    np.testing.assert_array_equal(z_i.samples.imag, 0.0)
    np.testing.assert_array_equal(z_i.samples.real, z_iq.samples.real)
    with pytest.raises(ValueError):
        downconvert_iq(r, 0.0, cfg, mode="q_only")


def test_loopback_snr_calibration(cfg, single_tap):
    """Post-filter SNR tracks the configured Eb/N0 within 0.2 dB.

    The filtered symbol energy is kappa*e_b with kappa the fraction of the
    pulse energy passed by the receive filter, computed here from baseband
    arithmetic alone; the chain measurement must agree with the dial.
    """
    bits = np.ones(48)
    r_clean = _tx(cfg, bits, single_tap)
    z_clean = downconvert_iq(r_clean, 0.0, cfg)
    m = len(bits)
    eb_hat = z_clean.energy() / m / 0.5

    x1 = trpc_baseband(np.array([1.0]), cfg, cfg.fs_base)
    flt = fftconvolve(x1.samples, lowpass_taps(cfg, cfg.fs_base))
    kappa = (np.sum(flt**2) / cfg.fs_base) / x1.energy()

    lpf_p = lowpass_taps(cfg, cfg.fs_pass)
    for rho_db in (0.0, 10.0, 20.0):
        n0 = cfg.e_b * 10 ** (-rho_db / 10)
        rng = np.random.default_rng(int(rho_db))
        r = add_awgn(rng, r_clean, n0)
        z = downconvert_iq(r, 0.0, cfg)
        noise = z.samples - z_clean.samples
        n0_hat = 2 * np.mean(np.abs(noise) ** 2) / (cfg.fs_pass * np.sum(lpf_p**2))
        rho_hat = 10 * np.log10(eb_hat / (kappa * n0_hat))
        assert rho_hat == pytest.approx(rho_db, abs=0.2)


def test_select_window_single_tap(cfg, single_tap):
    win = select_window(single_tap, cfg)
    assert win.t1 == 0.0
    assert win.t2 == pytest.approx(64 / 3.952e9, rel=1e-12)  # the bare cluster


def test_select_window_two_tap(cfg):
    ch = ChannelRealization(np.array([0, 40]), np.ones(2) / np.sqrt(2), cfg.t_c)
    win = select_window(ch, cfg)
    assert win.t1 == 0.0
    assert win.t2 == pytest.approx(104 / 3.952e9, rel=1e-12)


def test_select_window_skips_weak_leading_tap(cfg):
    gains = np.array([0.05, 1.0])
    gains = gains / np.linalg.norm(gains)
    ch = ChannelRealization(np.array([0, 20]), gains, cfg.t_c)
    win = select_window(ch, cfg)
    assert win.t1 == pytest.approx(20 * cfg.t_c, rel=1e-12)
    assert win.t2 == pytest.approx((20 + 64 + 20) * cfg.t_c, rel=1e-12)


def test_select_window_clamps_to_symbol(cfg):
    ch = ChannelRealization(np.array([0, 3900]), np.ones(2) / np.sqrt(2), cfg.t_c)
    win = select_window(ch, cfg)
    assert win.t2 == cfg.t_s


def test_acr_decide_ties_and_coverage(cfg, single_tap):
    win = select_window(single_tap, cfg)
    z = Waveform(np.zeros(4000, dtype=complex), cfg.fs_base, t0=-32 / cfg.fs_base)
    rec = acr_decide(z, cfg, win, 1)
    assert rec.bits[0] == 1 and rec.dvs[0] == 0.0

    bare = Waveform(np.zeros(4000, dtype=complex), cfg.fs_base, t0=0.0)
    with pytest.raises(ValueError):
        acr_decide(bare, cfg, win, 1)  # no pre-roll for the lag
    with pytest.raises(ValueError):
        acr_decide(z, cfg, win, 10)  # runs past the buffer


def test_trpc_passband_simulator_matches_operations(cfg, cm1):
    """The batched passband simulator is the chain of operations, windowed."""
    ch = cm1[0]
    rng = np.random.default_rng(8)
    bits = rng.integers(0, 2, 8) * 2.0 - 1.0
    delta_f, phi = 1.7e6, 0.9

    z = downconvert_iq(_tx(cfg, bits, ch), 0.0, cfg, delta_f=delta_f, phi=phi)
    ops = acr_decide(z, cfg, select_window(ch, cfg), len(bits))

    sim = TrpcPassbandSimulator(cfg, ch, n0=0.0, delta_f=delta_f, phi=phi)
    rec = sim.run(bits, np.random.default_rng(0))
    np.testing.assert_allclose(rec.dvs, ops.dvs, rtol=1e-7)
    np.testing.assert_array_equal(rec.bits, ops.bits)


def test_trpc_lti_simulator_matches_operations(cfg, cm1):
    ch = cm1[1]
    rng = np.random.default_rng(9)
    bits = rng.integers(0, 2, 8) * 2.0 - 1.0
    delta_f, phi = -2.4e6, 2.2

    z = downconvert_iq(_tx(cfg, bits, ch), 0.0, cfg, delta_f=delta_f, phi=phi)
    ops = acr_decide(z, cfg, select_window(ch, cfg), len(bits))

    sim = TrpcLtiSimulator(cfg, ch, n0=0.0, delta_f=delta_f, phi=phi)
    rec = sim.run(bits, np.random.default_rng(0))
    np.testing.assert_allclose(rec.dvs, ops.dvs, rtol=0.02)
    np.testing.assert_array_equal(rec.bits, ops.bits)


def test_lag_product_identity(cfg, single_tap):
    """r_I r_I' + r_Q r_Q' collapses to the half-product of envelopes times
    the cosine of the accumulated phase difference, exactly."""
    fs = cfg.fs_base
    s_w = _filtered_waveform(trpc_baseband(np.array([1.0]), cfg, fs), single_tap,
                             lowpass_taps(cfg, fs))
    s = s_w.samples
    rng = np.random.default_rng(2)
    from trpclink.phasenoise import brownian_phase

    theta = brownian_phase(rng, 1e5, len(s), fs)
    delta_f, phi = 3.1e6, 1.3
    t = s_w.times()
    psi = theta - 2 * np.pi * delta_f * t - phi
    r_i = 0.5 * s * (np.cos(psi) - np.sin(psi))
    r_q = 0.5 * s * (np.cos(psi) + np.sin(psi))

    lag = sample_index(cfg.t_d, fs)
    lhs = r_i[lag:] * r_i[:-lag] + r_q[lag:] * r_q[:-lag]
    big_phi = (theta[lag:] - theta[:-lag]) - 2 * np.pi * delta_f * cfg.t_d
    rhs = 0.5 * s[lag:] * s[:-lag] * np.cos(big_phi)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12 * np.abs(rhs).max())


def test_tr_simulator_matches_operations(cfg, cm1):
    ch = cm1[2]
    tr = TrConfig(t_f=800 / cfg.fs_base, t_d_prime=400 / cfg.fs_base)
    rng = np.random.default_rng(10)
    bits = rng.integers(0, 2, 6) * 2.0 - 1.0
    delta_f, phi = 0.9e6, 0.4

    x = tr_baseband(bits, cfg, tr, cfg.fs_pass)
    r = apply_channel(upconvert(x, 0.0, cfg), ch)
    z = downconvert_iq(r, 0.0, cfg, delta_f=delta_f, phi=phi)
    ops = tr_acr_decide(z, cfg, tr, tr_frame_windows(ch, cfg, tr), len(bits))

    sim = TrLtiSimulator(cfg, ch, tr, n0=0.0, delta_f=delta_f, phi=phi)
    rec = sim.run(bits, np.random.default_rng(0))
    np.testing.assert_allclose(rec.dvs, ops.dvs, rtol=0.02)
    np.testing.assert_array_equal(rec.bits, ops.bits)


def test_srake_simulator_matches_operations(cfg, cm1):
    ch = cm1[3]
    t_f_prime = 400 / cfg.fs_base
    rng = np.random.default_rng(11)
    bits = rng.integers(0, 2, 6) * 2.0 - 1.0

    x = bpsk_baseband(bits, cfg, t_f_prime, cfg.fs_pass)
    r = apply_channel(upconvert(x, 0.0, cfg), ch)
    z = downconvert_iq(r, 0.0, cfg)
    # a tracked receiver aligns the carrier phase: rotate and keep the real part
    r_b = Waveform((z.samples * np.exp(-1j * np.pi / 4)).real, z.fs, z.t0)
    fingers = srake_fingers(ch, 8)
    ops = srake_mrc_decide(r_b, ch, cfg, t_f_prime, fingers, len(bits))

    sim = SrakeLtiSimulator(cfg, ch, t_f_prime, n0=0.0)
    rec = sim.run(bits, np.random.default_rng(0))
    np.testing.assert_allclose(rec.dvs, ops.dvs, rtol=0.02)
    np.testing.assert_array_equal(rec.bits, ops.bits)


def test_srake_noise_scale_matches_operations(cfg, cm1):
    """The closed-form detector noise deviation agrees with the full chain."""
    ch = cm1[3]
    t_f_prime = 400 / cfg.fs_base
    n0 = 0.25
    bits = np.ones(192)
    rng = np.random.default_rng(12)

    x = bpsk_baseband(bits, cfg, t_f_prime, cfg.fs_pass)
    r = add_awgn(rng, apply_channel(upconvert(x, 0.0, cfg), ch), n0)
    z = downconvert_iq(r, 0.0, cfg)
    r_b = Waveform((z.samples * np.exp(-1j * np.pi / 4)).real, z.fs, z.t0)
    ops = srake_mrc_decide(r_b, ch, cfg, t_f_prime, srake_fingers(ch, 8), len(bits))

    sim = SrakeLtiSimulator(cfg, ch, t_f_prime, n0=n0)
    assert ops.dvs.std(ddof=1) == pytest.approx(sim.noise_std, rel=0.15)
    assert ops.dvs.mean() == pytest.approx(sim.w_blk.sum() / np.sqrt(2),
                                           abs=3 * sim.noise_std / np.sqrt(len(bits)))


def test_srake_fingers_selection():
    ch = ChannelRealization(np.array([0, 5, 9]), np.array([0.1, -0.9, 0.3]), 1e-9)
    np.testing.assert_array_equal(srake_fingers(ch, 2), [1, 2])
    np.testing.assert_array_equal(srake_fingers(ch, 10), [1, 2, 0])  # clamps


def test_srake_single_tap_noiseless_always_correct(cfg, single_tap):
    sim = SrakeLtiSimulator(cfg, single_tap, 400 / cfg.fs_base, n0=0.0)
    rng = np.random.default_rng(0)
    bits = rng.integers(0, 2, 64) * 2.0 - 1.0
    rec = sim.run(bits, rng)
    np.testing.assert_array_equal(rec.bits, bits)


def test_brownian_rows_continue_the_walk():
    rng = np.random.default_rng(6)
    rows, n = 20_000, 4
    step_var, gap_var = 0.01, 0.05
    traj, state = _brownian_rows(rng, rows, n, step_var, gap_var, 0.0)
    assert traj.shape == (rows, n)
    # within-row increments follow the step variance
    assert np.diff(traj, axis=1).var() == pytest.approx(step_var, rel=0.05)
    # across rows: one gap jump between the last and next first sample
    jumps = traj[1:, 0] - traj[:-1, -1]
    assert jumps.var() == pytest.approx(gap_var, rel=0.05)
    # the continuation state is where the next block picks up
    traj2, _ = _brownian_rows(rng, 1, n, step_var, gap_var, state)
    assert abs(traj2[0, 0] - state) < 5 * np.sqrt(gap_var)

    flat, state = _brownian_rows(rng, 3, n, 0.0, 0.0, 1.25)
    np.testing.assert_array_equal(flat, 1.25)
    assert state == 1.25


def test_simulator_runs_are_seed_deterministic(cfg, cm1):
    bits = np.tile([1.0, -1.0], 32)
    a = TrpcLtiSimulator(cfg, cm1[0], n0=0.1, beta=1e4).run(
        bits, np.random.default_rng(42))
    b = TrpcLtiSimulator(cfg, cm1[0], n0=0.1, beta=1e4).run(
        bits, np.random.default_rng(42))
    np.testing.assert_array_equal(a.dvs, b.dvs)


def test_coupled_passband_and_fast_paths_agree(cfg, cm1):
    """Same randomness through both models: decisions nearly always match."""
    ch = cm1[0]
    rng = np.random.default_rng(13)
    bits = rng.integers(0, 2, 768) * 2.0 - 1.0
    n0 = cfg.e_b * 10 ** (-14 / 10)
    rec_p, rec_l = simulate_coupled_trpc(
        cfg, ch, n0, beta=1e5, delta_f=2.3e6, phi=1.1, bits=bits, seed=99)
    agree = np.mean(rec_p.bits == rec_l.bits)
    assert agree >= 0.99
    # and the fast path is not a copy: both decide against the same bits
    assert np.mean(rec_p.bits == bits) > 0.9


def test_coupled_noiseless_dvs_track_closely(cfg, cm1):
    """Without noise the only gap left is the model gap; decision variables
    from the two paths stay within a couple percent of the working scale
    even with a drifting oscillator pair."""
    ch = cm1[1]
    rng = np.random.default_rng(8)
    bits = rng.integers(0, 2, 200) * 2.0 - 1.0
    rec_p, rec_l = simulate_coupled_trpc(
        cfg, ch, 0.0, beta=1e5, delta_f=-3.7e6, phi=0.6, bits=bits, seed=5)
    rms = np.sqrt(np.mean(rec_p.dvs ** 2))
    assert np.max(np.abs(rec_p.dvs - rec_l.dvs)) < 0.02 * rms
    np.testing.assert_array_equal(rec_p.bits, rec_l.bits)
