"""Multipath channel generation, persistence, and application."""

import numpy as np
import pytest

from trpclink.channel import (
    CHANNEL_MODELS,
    ChannelRealization,
    apply_channel,
    delay_statistics,
    generate_ensemble,
    generate_realization,
    load_ensemble,
    save_ensemble,
)
from trpclink.signals import Waveform, rrc_pulse

# Reference targets for the two indoor scenarios (mean excess delay, rms
# delay spread), as published for the standardized model parameter sets.
DELAY_TARGETS_NS = {"CM1": (5.05, 5.28), "CM2": (10.38, 8.03)}


def test_known_models():
    assert set(CHANNEL_MODELS) == {"CM1", "CM2"}
    with pytest.raises(KeyError):
        generate_realization("CM3", None, 0)


def test_realization_determinism(cfg):
    a = generate_realization("CM1", cfg, 1234)
    b = generate_realization("CM1", cfg, 1234)
    np.testing.assert_array_equal(a.tap_indices, b.tap_indices)
    np.testing.assert_array_equal(a.gains, b.gains)


def test_ensemble_extension_keeps_prefix(cfg):
    short = generate_ensemble("CM1", 3, 5, cfg)
    long = generate_ensemble("CM1", 5, 5, cfg)
    for a, b in zip(short, long):
        np.testing.assert_array_equal(a.tap_indices, b.tap_indices)
        np.testing.assert_array_equal(a.gains, b.gains)


@pytest.mark.parametrize("model", ["CM1", "CM2"])
def test_realization_invariants(cfg, model):
    for ch in generate_ensemble(model, 20, 1, cfg):
        assert ch.energy() == pytest.approx(1.0, abs=1e-9)
        assert ch.tap_indices[0] == 0
        assert np.all(np.diff(ch.tap_indices) > 0)
        assert ch.tap_spacing == pytest.approx(cfg.t_c)
        # no-ISI guard: the whole response plus the cluster fits one symbol
        assert ch.max_delay + cfg.cluster_duration <= cfg.t_s


@pytest.mark.parametrize("model", ["CM1", "CM2"])
def test_ensemble_delay_statistics(model):
    mean_ex, rms = delay_statistics(model, 1000, 7)
    want_mean, want_rms = DELAY_TARGETS_NS[model]
    assert mean_ex * 1e9 == pytest.approx(want_mean, rel=0.15)
    assert rms * 1e9 == pytest.approx(want_rms, rel=0.15)


def test_save_load_round_trip(cfg, tmp_path):
    ens = generate_ensemble("CM2", 4, 9, cfg)
    path = tmp_path / "ens.json"
    save_ensemble(path, ens, "CM2", 9)
    back = load_ensemble(path)
    assert len(back) == 4
    for a, b in zip(ens, back):
        np.testing.assert_array_equal(a.tap_indices, b.tap_indices)
        assert a.gains.tolist() == b.gains.tolist()  # bit-exact round trip
        assert b.tap_spacing == a.tap_spacing
        assert b.model == "CM2"
        assert b.seed == 9


def test_save_rejects_empty(tmp_path):
    with pytest.raises(ValueError):
        save_ensemble(tmp_path / "x.json", [], "CM1", 0)


def test_apply_channel_identity_and_shift(cfg, single_tap):
    w = Waveform(np.arange(5.0), cfg.fs_base)
    out = apply_channel(w, single_tap)
    np.testing.assert_array_equal(out.samples, w.samples)

    shifted = ChannelRealization(np.array([4]), np.array([0.5]), cfg.t_c)
    out = apply_channel(w, shifted)
    assert len(out.samples) == 9
    np.testing.assert_array_equal(out.samples[4:], 0.5 * w.samples)
    np.testing.assert_array_equal(out.samples[:4], 0.0)
    assert out.t0 == w.t0


def test_apply_channel_linearity(cfg):
    rng = np.random.default_rng(0)
    ch = generate_realization("CM1", cfg, 3)
    w1 = Waveform(rng.normal(size=64), cfg.fs_base)
    w2 = Waveform(rng.normal(size=64), cfg.fs_base)
    combo = Waveform(2.0 * w1.samples - 3.0 * w2.samples, cfg.fs_base)
    lhs = apply_channel(combo, ch).samples
    rhs = 2.0 * apply_channel(w1, ch).samples - 3.0 * apply_channel(w2, ch).samples
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_apply_channel_energy_on_isolated_pulse(cfg):
    """Disjoint echoes add power: output energy equals sum of tap powers."""
    g = rrc_pulse(cfg, cfg.fs_base)
    ch = ChannelRealization(np.array([0, 200]), np.array([0.6, -0.8]), cfg.t_c)
    out = apply_channel(g, ch)
    assert out.energy() == pytest.approx(ch.energy(), rel=1e-9)


def test_apply_channel_rejects_off_grid(cfg, single_tap):
    w = Waveform(np.ones(8), fs=1.5e9)  # tap spacing not an integer sample count
    with pytest.raises(ValueError):
        apply_channel(w, single_tap)


def test_passband_grid_places_taps_on_samples(cfg, cm1):
    step = cm1[0].tap_spacing * cfg.fs_pass
    assert step == pytest.approx(4.0)
