"""Passband transceiver chain and fast per-symbol simulators.

Two levels of machinery live here. The waveform-level operations (upconvert,
add_awgn, downconvert_iq, acr_decide, ...) spell out the full passband chain
one step at a time and are the reference against which everything else is
checked. The *Simulator classes batch per-symbol active windows for Monte
Carlo runs: because symbols do not interfere (the channel support plus the
pulse cluster fits inside the symbol period), only the samples that reach the
detector are generated, with the oscillator random walk carried across the
dead time between windows as a single exact Gaussian jump.

Signal model conventions. The quadrature downconverter output is kept as one
complex series z = r_I + j*r_Q. With both upconversion branches driven, the
noiseless chain gives z = ((1+j)/2) * x * exp(j*Psi) where x is the filtered
baseband signal convolved with the channel and Psi collects the oscillator
difference walk, the frequency offset ramp, and the phase offset; the white
passband noise lands in z as in-phase/quadrature components of spectral
density N0/4 each. The pulse-cluster fast path simulates
s = lpf{ch(x * exp(j*theta_tx)) * exp(-j*(theta_rx + 2*pi*df*t + phi)) + nu}
with nu of per-component density N0/2: the transmit phase rides each channel
arrival with the delay that arrival had, and the receive rotation sits where
the mixer sits, before the lowpass, so phase that drifts across the delay
spread or the filter support is smeared the same way the full chain smears
it. The (1+j)/2 scale is applied inside the detector constant, which
reproduces the same decision statistic exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve, resample_poly

from .channel import ChannelRealization, apply_channel
from .signals import (
    SystemConfig,
    TrConfig,
    Waveform,
    bpsk_baseband,
    rrc_pulse,
    sample_index,
    tr_baseband,
    trpc_baseband,
)

__all__ = [
    "IntegrationWindow",
    "DecisionRecord",
    "lowpass_taps",
    "upconvert",
    "add_awgn",
    "downconvert_iq",
    "select_window",
    "acr_decide",
    "tr_frame_windows",
    "tr_acr_decide",
    "srake_fingers",
    "srake_mrc_decide",
    "TrpcLtiSimulator",
    "TrpcPassbandSimulator",
    "TrLtiSimulator",
    "SrakeLtiSimulator",
    "simulate_coupled_trpc",
]


@dataclass(frozen=True)
class IntegrationWindow:
    """Detector integration limits within each symbol, seconds from symbol start."""

    t1: float
    t2: float

    def __post_init__(self) -> None:
        if not 0 <= self.t1 < self.t2:
            raise ValueError("need 0 <= t1 < t2")


@dataclass
class DecisionRecord:
    """Per-symbol detector outputs for one run: hard decisions and the statistics."""

    bits: np.ndarray
    dvs: np.ndarray


def lowpass_taps(cfg: SystemConfig, fs: float) -> np.ndarray:
    """Receiver lowpass: the shaping pulse renormalized to unity DC gain."""
    g = rrc_pulse(cfg, fs).samples
    return g / g.sum()


def upconvert(w: Waveform, theta: np.ndarray | float, cfg: SystemConfig) -> Waveform:
    """Drive both quadrature branches with the baseband signal.

    s_T = s*cos(arg) - s*sin(arg) with arg = 2*pi*f_c*t + theta, i.e.
    sqrt(2)*s*cos(arg + pi/4), so the transmitted energy equals the baseband
    energy up to the double-frequency residue.
    """
    t = w.times()
    arg = 2 * np.pi * cfg.f_c * t + theta
    return Waveform(w.samples * (np.cos(arg) - np.sin(arg)), w.fs, w.t0)


def add_awgn(rng: np.random.Generator, w: Waveform, n0: float) -> Waveform:
    """White Gaussian noise of one-sided density n0: variance n0*fs/2 per real sample."""
    sigma = np.sqrt(n0 * w.fs / 2)
    n = len(w.samples)
    if np.iscomplexobj(w.samples):
        noise = rng.normal(0.0, sigma, n) + 1j * rng.normal(0.0, sigma, n)
    else:
        noise = rng.normal(0.0, sigma, n)
    return Waveform(w.samples + noise, w.fs, w.t0)


def downconvert_iq(
    r: Waveform,
    theta_rx: np.ndarray | float,
    cfg: SystemConfig,
    delta_f: float = 0.0,
    phi: float = 0.0,
    mode: str = "iq",
) -> Waveform:
    """Quadrature downconversion, lowpass filtering, decimation to fs_base.

    Returns z = r_I + j*r_Q where the branches mix with cos and -sin of
    2*pi*(f_c + delta_f)*t + theta_rx + phi. In mode "i_only" the quadrature
    branch is zeroed, which is how the single-branch receiver is modeled.
    """
    if mode not in ("iq", "i_only"):
        raise ValueError(f"unknown downconversion mode {mode!r}")
    t = r.times()
    zeta = r.samples * np.exp(-1j * (2 * np.pi * (cfg.f_c + delta_f) * t + theta_rx + phi))
    z = fftconvolve(zeta, lowpass_taps(cfg, r.fs), mode="same")

    decim = cfg.decimation
    k0 = sample_index(r.t0, r.fs, tol=1e-3)
    offset = (-k0) % decim
    z = z[offset::decim]
    if mode == "i_only":
        z = z.real.astype(complex)
    return Waveform(z, cfg.fs_base, r.t0 + offset / r.fs)


def _leading_edge(ch: ChannelRealization):
    """(first significant delay, 95 percent energy delay) of a realization."""
    p = ch.gains**2
    p = p / p.sum()
    cum = np.cumsum(p)
    before = cum - p
    t1 = float(ch.delays[np.searchsorted(before, 0.005, side="left") - 1])
    tau95 = float(ch.delays[np.searchsorted(cum, 0.95, side="left")])
    return t1, tau95


def select_window(ch: ChannelRealization, cfg: SystemConfig) -> IntegrationWindow:
    """Energy-based integration window stand-in.

    t1 skips leading taps holding under 0.5 percent of the energy; t2 extends
    past the pulse cluster by the channel's 95 percent energy delay, clamped
    to the symbol period. A sounding receiver would adapt this; the fixed
    rule keeps runs reproducible.
    """
    t1, tau95 = _leading_edge(ch)
    t2 = min(t1 + cfg.cluster_duration + tau95, cfg.t_s)
    return IntegrationWindow(t1, t2)


def _window_dv(z: np.ndarray, lag: int, j1: int, j2: int, dt: float) -> float:
    """sum over j in [j1, j2) of Re(z[j] conj(z[j - lag])) * dt."""
    seg = z[j1:j2] * np.conj(z[j1 - lag : j2 - lag])
    return float(np.sum(seg.real) * dt)


def acr_decide(
    z: Waveform,
    cfg: SystemConfig,
    win: IntegrationWindow,
    n_symbols: int,
    lag_s: float | None = None,
) -> DecisionRecord:
    """Delay-correlate and integrate per symbol; decide the data-pulse sign.

    D_i integrates Re(z(t) conj(z(t - lag))) over [i*t_s + t1, i*t_s + t2);
    ties decide +1.
    """
    fs = z.fs
    lag = sample_index(lag_s if lag_s is not None else cfg.t_d, fs)
    dvs = np.empty(n_symbols)
    for i in range(n_symbols):
        j1 = sample_index(i * cfg.t_s + win.t1 - z.t0, fs, tol=1e-3)
        j2 = sample_index(i * cfg.t_s + win.t2 - z.t0, fs, tol=1e-3)
        if j1 - lag < 0 or j2 > len(z.samples):
            raise ValueError("waveform does not cover the integration window")
        dvs[i] = _window_dv(z.samples, lag, j1, j2, 1 / fs)
    bits = np.where(dvs >= 0, 1, -1)
    return DecisionRecord(bits, dvs)


def tr_frame_windows(ch: ChannelRealization, cfg: SystemConfig, tr: TrConfig):
    """Per-frame integration windows for the framed reference/data system.

    Each frame integrates [t_d_prime + t1, t_d_prime + t1 + t_p + tau95) from
    the frame start, the single-pulse analog of the cluster window.
    """
    t1, tau95 = _leading_edge(ch)
    length = cfg.t_p + tau95
    wins = []
    for m in range(cfg.n_f):
        a = m * tr.t_f + tr.t_d_prime + t1
        wins.append(IntegrationWindow(a, min(a + length, (m + 1) * tr.t_f)))
    return wins


def tr_acr_decide(
    z: Waveform,
    cfg: SystemConfig,
    tr: TrConfig,
    wins,
    n_symbols: int,
) -> DecisionRecord:
    """Frame-summed lag correlation at t_d_prime for the framed system."""
    fs = z.fs
    lag = sample_index(tr.t_d_prime, fs)
    dvs = np.zeros(n_symbols)
    for i in range(n_symbols):
        for w in wins:
            j1 = sample_index(i * cfg.t_s + w.t1 - z.t0, fs, tol=1e-3)
            j2 = sample_index(i * cfg.t_s + w.t2 - z.t0, fs, tol=1e-3)
            if j1 - lag < 0 or j2 > len(z.samples):
                raise ValueError("waveform does not cover the integration window")
            dvs[i] += _window_dv(z.samples, lag, j1, j2, 1 / fs)
    bits = np.where(dvs >= 0, 1, -1)
    return DecisionRecord(bits, dvs)


def srake_fingers(ch: ChannelRealization, count: int) -> np.ndarray:
    """Indices of the count strongest taps, strongest first."""
    order = np.argsort(np.abs(ch.gains))[::-1]
    return order[: min(count, len(ch.gains))]


def srake_mrc_decide(
    r_b: Waveform,
    ch: ChannelRealization,
    cfg: SystemConfig,
    t_f_prime: float,
    fingers: np.ndarray,
    n_symbols: int,
) -> DecisionRecord:
    """Reference combining receiver: per-finger pulse-train correlation, gain weighted.

    r_b is the phase-aligned real branch of the downconverter output. The
    correlation template is the transmit pulse train placed at each selected
    tap delay; combining weights are the tap gains. Slow reference for the
    fast kernel.
    """
    fs = r_b.fs
    pulse = rrc_pulse(cfg, fs)
    offs = [sample_index(m * t_f_prime, fs) for m in range(2 * cfg.n_f)]
    n_tpl = offs[-1] + len(pulse.samples)
    tpl = np.zeros(n_tpl)
    for o in offs:
        tpl[o : o + len(pulse.samples)] += pulse.samples

    step_sym = sample_index(cfg.t_s, fs)
    tap_step = sample_index(ch.tap_spacing, fs)
    k_start = sample_index(pulse.t0 - r_b.t0, fs, tol=1e-3)
    x = r_b.samples
    dvs = np.empty(n_symbols)
    for i in range(n_symbols):
        acc = 0.0
        for l in fingers:
            j0 = i * step_sym + int(ch.tap_indices[l]) * tap_step + k_start
            if j0 < 0 or j0 + n_tpl > len(x):
                raise ValueError("waveform does not cover the correlation template")
            acc += ch.gains[l] * np.dot(x[j0 : j0 + n_tpl], tpl)
        dvs[i] = acc / fs
    bits = np.where(dvs >= 0, 1, -1)
    return DecisionRecord(bits, dvs)


# ---------------------------------------------------------------------------
# Batched per-symbol simulators
# ---------------------------------------------------------------------------


def _brownian_rows(rng, b, n, step_var, gap_var, state):
    """b per-symbol rows of one continuing random walk, gap jumps between rows.

    Row i starts where row i-1 ended plus one jump covering the dead time.
    Returns (trajectories (b, n), new_state).
    """
    if step_var == 0.0:
        return np.full((b, n), state), state
    inc = rng.normal(0.0, np.sqrt(step_var), (b, n - 1))
    jumps = rng.normal(0.0, np.sqrt(gap_var), b) if gap_var > 0 else np.zeros(b)
    row_delta = inc.sum(axis=1) + jumps
    starts = state + np.concatenate([[0.0], np.cumsum(row_delta)[:-1]])
    traj = np.empty((b, n))
    traj[:, 0] = starts
    np.cumsum(inc, axis=1, out=traj[:, 1:])
    traj[:, 1:] += starts[:, None]
    return traj, float(starts[-1] + row_delta[-1])


def _embed(dst_lo: int, dst_n: int, w: Waveform) -> np.ndarray:
    """Sample w onto the absolute index range [dst_lo, dst_lo + dst_n), zero outside."""
    out = np.zeros(dst_n, dtype=w.samples.dtype)
    src_lo = sample_index(w.t0, w.fs, tol=1e-3)
    a = max(dst_lo, src_lo)
    b = min(dst_lo + dst_n, src_lo + len(w.samples))
    if b > a:
        out[a - dst_lo : b - dst_lo] = w.samples[a - src_lo : b - src_lo]
    return out


def _filtered_waveform(wave: Waveform, ch: ChannelRealization, taps: np.ndarray) -> Waveform:
    """Channel convolution followed by the group-delay-corrected lowpass."""
    y = apply_channel(wave, ch)
    filt = fftconvolve(y.samples, taps)
    return Waveform(filt, y.fs, y.t0 - (len(taps) - 1) / 2 / y.fs)


class TrpcLtiSimulator:
    """Fast pulse-cluster path on the complex-envelope grid.

    Per symbol only the detector window plus the correlation lag plus the
    filter support is simulated. The transmit oscillator's phase multiplies
    the bare cluster before the channel, so each arrival carries the phase
    the oscillator had when that energy left the antenna; the receive
    oscillator, frequency offset, and phase offset rotate the channel output
    at the mixer, before the lowpass. With a perfect transmit oscillator the
    channel collapses into two precomputed per-bit templates and the
    per-symbol convolution is skipped. Decision statistics carry the (1+j)/2
    downconverter scale so values are directly comparable with the full
    passband chain.
    Draw order per block: transmit walk, receive walk, then noise.
    """

    def __init__(
        self,
        cfg: SystemConfig,
        ch: ChannelRealization,
        n0: float,
        beta: float = 0.0,
        delta_f: float = 0.0,
        phi: float = 0.0,
        mode: str = "iq",
        win: IntegrationWindow | None = None,
    ):
        if mode not in ("iq", "i_only"):
            raise ValueError(f"unknown downconversion mode {mode!r}")
        fs = cfg.fs_base
        self.cfg, self.n0, self.beta = cfg, n0, beta
        self.delta_f, self.phi, self.mode = delta_f, phi, mode
        self.fs = fs
        self.win = win or select_window(ch, cfg)
        self.lag = sample_index(cfg.t_d, fs)
        n1 = sample_index(self.win.t1, fs, tol=1e-3)
        n2 = sample_index(self.win.t2, fs, tol=1e-3)
        self.n_lo = n1 - self.lag
        self.n = n2 - self.n_lo

        self._lpf = lowpass_taps(cfg, fs)
        # pre-filter span: the window plus the filter support on both sides
        self.m_lo = self.n_lo - (len(self._lpf) - 1) // 2
        self.m = self.n + len(self._lpf) - 1
        x_p = apply_channel(trpc_baseband(np.array([1.0]), cfg, fs), ch)
        x_m = apply_channel(trpc_baseband(np.array([-1.0]), cfg, fs), ch)
        self.x_plus = _embed(self.m_lo, self.m, x_p)
        self.x_minus = _embed(self.m_lo, self.m, x_m)

        # bare cluster templates plus the channel as a frequency response,
        # for the per-symbol convolution when the transmit phase drifts
        tp = trpc_baseband(np.array([1.0]), cfg, fs)
        tm = trpc_baseband(np.array([-1.0]), cfg, fs)
        self.s_lo = sample_index(tp.t0, fs, tol=1e-3)
        self.s_n = len(tp.samples)
        self.tpl_plus = tp.samples
        self.tpl_minus = tm.samples
        tap_step = sample_index(ch.tap_spacing, fs)
        # taps arriving past the pre-filter span never reach the detector
        keep = ch.tap_indices * tap_step < self.m_lo + self.m - self.s_lo
        if not keep.any():
            raise ValueError("integration window precedes the channel response")
        self.conv_n = self.s_n + int(ch.tap_indices[keep].max()) * tap_step
        self.nfft = 1 << int(np.ceil(np.log2(self.conv_n)))
        h = np.zeros(self.nfft)
        h[ch.tap_indices[keep] * tap_step] = ch.gains[keep]
        self._ch_f = np.fft.fft(h)

        # oscillator walks cover the transmit support and the receive span
        self.u_lo = min(self.s_lo, self.m_lo)
        self.u_n = max(self.s_lo + self.s_n, self.m_lo + self.m) - self.u_lo

        self._theta_tx = 0.0
        self._theta_rx = 0.0
        self._symbol_index = 0
        gap = cfg.t_s - (self.u_n - 1) / fs
        self._step_var = 2 * np.pi * beta / fs
        self._gap_var = 2 * np.pi * beta * gap
        self._noise_sigma = np.sqrt((n0 / 2) * fs)

    def run(self, bits: np.ndarray, rng: np.random.Generator) -> DecisionRecord:
        b = len(bits)
        theta_tx = theta_rx = None
        if self.beta > 0:
            theta_tx, self._theta_tx = _brownian_rows(
                rng, b, self.u_n, self._step_var, self._gap_var, self._theta_tx)
            theta_rx, self._theta_rx = _brownian_rows(
                rng, b, self.u_n, self._step_var, self._gap_var, self._theta_rx)
        nu = None
        if self.n0 > 0:
            nu = self._noise_sigma * (
                rng.normal(size=(b, self.m)) + 1j * rng.normal(size=(b, self.m)))
        i0 = self._symbol_index
        self._symbol_index += b
        return self._chain(np.asarray(bits), theta_tx, theta_rx, nu, i0)

    def _chain(self, bits, theta_tx, theta_rx, nu, i0) -> DecisionRecord:
        up = (bits > 0)[:, None]
        if theta_tx is None:
            s = np.where(up, self.x_plus, self.x_minus)
        else:
            tx0 = self.s_lo - self.u_lo
            tx = np.where(up, self.tpl_plus, self.tpl_minus) \
                * np.exp(1j * theta_tx[:, tx0 : tx0 + self.s_n])
            conv = np.fft.ifft(np.fft.fft(tx, self.nfft, axis=1) * self._ch_f, axis=1)
            s = np.zeros((len(bits), self.m), dtype=complex)
            a = max(self.m_lo, self.s_lo)
            b_hi = min(self.m_lo + self.m, self.s_lo + self.conv_n)
            s[:, a - self.m_lo : b_hi - self.m_lo] = conv[:, a - self.s_lo : b_hi - self.s_lo]
        if theta_rx is not None or self.delta_f != 0 or self.phi != 0:
            t_abs = ((i0 + np.arange(len(bits))) * self.cfg.t_s)[:, None] \
                + (self.m_lo + np.arange(self.m)) / self.fs
            psi = -2 * np.pi * self.delta_f * t_abs - self.phi
            if theta_rx is not None:
                rx0 = self.m_lo - self.u_lo
                psi = psi - theta_rx[:, rx0 : rx0 + self.m]
            s = s * np.exp(1j * psi)
        elif not np.iscomplexobj(s):
            s = s.astype(complex)
        if nu is not None:
            s = s + nu
        s = fftconvolve(s, self._lpf[None, :], mode="valid", axes=1)

        lag, dt = self.lag, 1 / self.fs
        if self.mode == "iq":
            prod = s[:, lag:] * np.conj(s[:, :-lag])
            dvs = 0.5 * prod.real.sum(axis=1) * dt
        else:
            u = 0.5 * (s.real - s.imag)
            dvs = np.sum(u[:, lag:] * u[:, :-lag], axis=1) * dt
        return DecisionRecord(np.where(dvs >= 0, 1, -1), dvs)


class TrpcPassbandSimulator:
    """Full passband pulse-cluster chain, batched over per-symbol windows.

    Everything the waveform-level operations do, minus the dead time: carrier
    multiplication with the transmit oscillator trajectory, passband channel
    convolution, white noise at the passband rate, quadrature downconversion
    with the receive oscillator, lowpass, decimation, windowed lag
    correlation. Oscillator walks are generated at the passband rate over the
    union of the transmit and receive spans and jumped across the dead time.
    Draw order per block: transmit walk, receive walk, then noise.
    """

    def __init__(
        self,
        cfg: SystemConfig,
        ch: ChannelRealization,
        n0: float,
        beta: float = 0.0,
        delta_f: float = 0.0,
        phi: float = 0.0,
        mode: str = "iq",
        win: IntegrationWindow | None = None,
    ):
        if mode not in ("iq", "i_only"):
            raise ValueError(f"unknown downconversion mode {mode!r}")
        self.cfg, self.n0, self.beta = cfg, n0, beta
        self.delta_f, self.phi, self.mode = delta_f, phi, mode
        fs_b, fs_p = cfg.fs_base, cfg.fs_pass
        decim = cfg.decimation
        self.fs_b, self.fs_p, self.decim = fs_b, fs_p, decim

        self.win = win or select_window(ch, cfg)
        self.lag = sample_index(cfg.t_d, fs_b)
        n1 = sample_index(self.win.t1, fs_b, tol=1e-3)
        n2 = sample_index(self.win.t2, fs_b, tol=1e-3)
        self.b_lo = n1 - self.lag          # decimated output span [b_lo, b_lo + b_n)
        self.b_n = n2 - self.b_lo

        self._lpf_p = lowpass_taps(cfg, fs_p)
        lh = (len(self._lpf_p) - 1) // 2
        self.k_lo = self.b_lo * decim - lh  # raw passband span [k_lo, k_lo + k_n)
        self.k_n = self.b_n * decim + 2 * lh

        # transmit templates at the passband rate; channel applied after the carrier
        s_p = trpc_baseband(np.array([1.0]), cfg, fs_p)
        s_m = trpc_baseband(np.array([-1.0]), cfg, fs_p)
        self.s_lo = sample_index(s_p.t0, fs_p, tol=1e-3)
        self.s_n = len(s_p.samples)
        self.s_tpl = np.stack([s_m.samples, s_p.samples])  # index by bit > 0

        # taps arriving past the receive span never reach the detector
        tap_step = sample_index(ch.tap_spacing, fs_p)
        keep = ch.tap_indices * tap_step < self.k_lo + self.k_n - self.s_lo
        if not keep.any():
            raise ValueError("integration window precedes the channel response")
        self.x_n = self.s_n + int(ch.tap_indices[keep].max()) * tap_step
        self.nfft = 1 << int(np.ceil(np.log2(self.x_n)))
        h = np.zeros(self.nfft)
        h[ch.tap_indices[keep] * tap_step] = ch.gains[keep]
        self._ch_f = np.fft.rfft(h)

        # oscillator span covers both the transmit support and the receive span
        self.o_lo = min(self.s_lo, self.k_lo)
        self.o_n = max(self.s_lo + self.s_n, self.k_lo + self.k_n) - self.o_lo

        if sample_index(cfg.t_s, fs_p) % decim:
            raise ValueError("symbol period must hold a whole number of carrier cycles")
        self._carrier_tx = (np.pi / 2) * ((self.s_lo + np.arange(self.s_n)) % 4)
        self._carrier_rx = (np.pi / 2) * ((self.k_lo + np.arange(self.k_n)) % 4)
        self._theta_tx = 0.0
        self._theta_rx = 0.0
        self._symbol_index = 0
        gap = cfg.t_s - (self.o_n - 1) / fs_p
        self._step_var = 2 * np.pi * beta / fs_p
        self._gap_var = 2 * np.pi * beta * gap
        self._noise_sigma = np.sqrt(n0 * fs_p / 2)

    def run(self, bits: np.ndarray, rng: np.random.Generator) -> DecisionRecord:
        b = len(bits)
        theta_tx, self._theta_tx = _brownian_rows(
            rng, b, self.o_n, self._step_var, self._gap_var, self._theta_tx)
        theta_rx, self._theta_rx = _brownian_rows(
            rng, b, self.o_n, self._step_var, self._gap_var, self._theta_rx)
        noise = self._noise_sigma * rng.normal(size=(b, self.k_n)) if self.n0 > 0 else None
        i0 = self._symbol_index
        self._symbol_index += b
        return self._chain(np.asarray(bits), theta_tx, theta_rx, noise, i0)

    def _chain(self, bits, theta_tx, theta_rx, noise, i0) -> DecisionRecord:
        b = len(bits)
        sel = (bits > 0).astype(int)
        tx = slice(self.s_lo - self.o_lo, self.s_lo - self.o_lo + self.s_n)
        arg = self._carrier_tx + theta_tx[:, tx]
        u = self.s_tpl[sel] * (np.cos(arg) - np.sin(arg))

        x = np.fft.irfft(np.fft.rfft(u, self.nfft, axis=1) * self._ch_f, self.nfft, axis=1)

        r = np.zeros((b, self.k_n))
        a = max(self.k_lo, self.s_lo)
        hi = min(self.k_lo + self.k_n, self.s_lo + self.x_n)
        if hi > a:
            r[:, a - self.k_lo : hi - self.k_lo] = x[:, a - self.s_lo : hi - self.s_lo]
        if noise is not None:
            r = r + noise

        t_abs = ((i0 + np.arange(b)) * self.cfg.t_s)[:, None] \
            + (self.k_lo + np.arange(self.k_n)) / self.fs_p
        rx = slice(self.k_lo - self.o_lo, self.k_lo - self.o_lo + self.k_n)
        ang = self._carrier_rx + 2 * np.pi * self.delta_f * t_abs + theta_rx[:, rx] + self.phi
        zeta = r * np.exp(-1j * ang)

        z = fftconvolve(zeta, self._lpf_p[None, :], mode="valid", axes=1)[:, :: self.decim]
        if self.mode == "i_only":
            z = z.real.astype(complex)

        prod = z[:, self.lag :] * np.conj(z[:, : -self.lag])
        dvs = prod.real.sum(axis=1) / self.fs_b
        return DecisionRecord(np.where(dvs >= 0, 1, -1), dvs)


class TrLtiSimulator:
    """Fast path for the framed reference/data system: long lag, per-frame windows."""

    def __init__(
        self,
        cfg: SystemConfig,
        ch: ChannelRealization,
        tr: TrConfig,
        n0: float,
        beta: float = 0.0,
        delta_f: float = 0.0,
        phi: float = 0.0,
    ):
        tr.validate_for(cfg)
        fs = cfg.fs_base
        self.cfg, self.tr, self.n0, self.beta = cfg, tr, n0, beta
        self.delta_f, self.phi = delta_f, phi
        self.fs = fs
        self.lag = sample_index(tr.t_d_prime, fs)
        self.wins = tr_frame_windows(ch, cfg, tr)

        j1 = [sample_index(w.t1, fs, tol=1e-3) for w in self.wins]
        j2 = [sample_index(w.t2, fs, tol=1e-3) for w in self.wins]
        self.n_lo = min(j1) - self.lag
        self.n = max(j2) - self.n_lo
        mask = np.zeros(self.n - self.lag, dtype=bool)
        for a, b in zip(j1, j2):
            mask[a - self.n_lo - self.lag : b - self.n_lo - self.lag] = True
        self._mask = mask

        self._lpf = lowpass_taps(cfg, fs)
        x_p = _filtered_waveform(tr_baseband(np.array([1.0]), cfg, tr, fs), ch, self._lpf)
        x_m = _filtered_waveform(tr_baseband(np.array([-1.0]), cfg, tr, fs), ch, self._lpf)
        self.x_plus = _embed(self.n_lo, self.n, x_p)
        self.x_minus = _embed(self.n_lo, self.n, x_m)

        self._theta_state = 0.0
        self._symbol_index = 0
        gap = cfg.t_s - (self.n - 1) / fs
        self._step_var = 2 * (2 * np.pi * beta / fs)
        self._gap_var = 2 * (2 * np.pi * beta * gap)
        self._noise_sigma = np.sqrt((n0 / 2) * fs)

    def run(self, bits: np.ndarray, rng: np.random.Generator) -> DecisionRecord:
        b = len(bits)
        fs, n = self.fs, self.n
        theta = None
        if self.beta > 0:
            theta, self._theta_state = _brownian_rows(
                rng, b, n, self._step_var, self._gap_var, self._theta_state)

        s = np.where((np.asarray(bits) > 0)[:, None], self.x_plus, self.x_minus)
        if theta is not None or self.delta_f != 0 or self.phi != 0:
            t_abs = ((self._symbol_index + np.arange(b)) * self.cfg.t_s)[:, None] \
                + (self.n_lo + np.arange(n)) / fs
            psi = -2 * np.pi * self.delta_f * t_abs - self.phi
            if theta is not None:
                psi = psi + theta
            s = s * np.exp(1j * psi)
        else:
            s = s.astype(complex)
        self._symbol_index += b

        if self.n0 > 0:
            lw = len(self._lpf)
            white = self._noise_sigma * (
                rng.normal(size=(b, n + lw - 1)) + 1j * rng.normal(size=(b, n + lw - 1)))
            s = s + fftconvolve(white, self._lpf[None, :], mode="valid", axes=1)

        prod = s[:, self.lag :] * np.conj(s[:, : -self.lag])
        dvs = 0.5 * prod.real[:, self._mask].sum(axis=1) / fs
        return DecisionRecord(np.where(dvs >= 0, 1, -1), dvs)


class SrakeLtiSimulator:
    """Fast path for the coherent combining receiver.

    Per symbol the statistic is Z = b/sqrt(2) * sum_t W(t) cos(Phi(t)) dt
    + noise, with W the precomputed product of the received noiseless
    waveform and the gain-weighted finger template bank, so only the slow
    phase process is sampled (on a coarse block grid) plus one Gaussian for
    the filtered noise.

    Phase handling: a coherent receiver tracks the carrier, so the phase
    offset and the accumulated walk are re-referenced to the estimate taken
    one symbol earlier; Phi(t) is the oscillator drift since that estimate.
    A constant frequency offset is taken as compensated by the same tracker.
    """

    PHASE_BLOCK = 64  # samples per phase block at fs_base, about 16 ns

    def __init__(
        self,
        cfg: SystemConfig,
        ch: ChannelRealization,
        t_f_prime: float,
        n0: float,
        beta: float = 0.0,
        n_fingers: int = 8,
    ):
        fs = cfg.fs_base
        self.cfg, self.n0, self.beta = cfg, n0, beta
        self.fs = fs
        taps = lowpass_taps(cfg, fs)
        x = _filtered_waveform(bpsk_baseband(np.array([1.0]), cfg, t_f_prime, fs), ch, taps)

        pulse = rrc_pulse(cfg, fs)
        offs = [sample_index(m * t_f_prime, fs) for m in range(2 * cfg.n_f)]
        fingers = srake_fingers(ch, n_fingers)
        tap_step = sample_index(ch.tap_spacing, fs)
        k_pulse = sample_index(pulse.t0, fs, tol=1e-3)
        q_lo = k_pulse + int(ch.tap_indices[fingers].min()) * tap_step
        q_hi = k_pulse + offs[-1] + len(pulse.samples) \
            + int(ch.tap_indices[fingers].max()) * tap_step
        q = np.zeros(q_hi - q_lo)
        for l in fingers:
            d = int(ch.tap_indices[l]) * tap_step
            for o in offs:
                j = k_pulse + o + d - q_lo
                q[j : j + len(pulse.samples)] += ch.gains[l] * pulse.samples

        x_lo = sample_index(x.t0, fs, tol=1e-3)
        lo = min(q_lo, x_lo)
        hi = max(q_hi, x_lo + len(x.samples))
        xw = _embed(lo, hi - lo, x)
        qw = _embed(lo, hi - lo, Waveform(q, fs, q_lo / fs))
        w_full = xw * qw / fs

        blk = self.PHASE_BLOCK
        nb = int(np.ceil(len(w_full) / blk))
        w_pad = np.zeros(nb * blk)
        w_pad[: len(w_full)] = w_full
        self.w_blk = w_pad.reshape(nb, blk).sum(axis=1)
        self.nb = nb

        # noise variance of sum(n * q) dt with n the lowpass-filtered white
        # branch noise of density n0/4
        fq = np.convolve(taps, qw)
        self.noise_std = float(np.sqrt((n0 / 4) / fs * np.sum(fq**2)))
        self.fingers = fingers

        # phase sample grid: block centers plus the symbol-start tracking point
        t_blk = (lo + (np.arange(nb) + 0.5) * blk) / fs
        pos = int(np.searchsorted(t_blk, 0.0))
        t_pts = np.insert(t_blk, pos, 0.0)
        wrap = cfg.t_s - (t_pts[-1] - t_pts[0])
        if wrap <= 0:
            raise ValueError("template span exceeds the symbol period")
        var = 2 * np.pi * (2 * beta)  # two independent oscillators
        self._stds = np.sqrt(var * np.concatenate([[wrap], np.diff(t_pts)]))
        self._pos = pos
        self._blk_cols = np.delete(np.arange(nb + 1), pos)
        self._theta_last = 0.0   # walk value at the previous symbol's last grid point
        self._ref_state = 0.0    # walk value at the previous symbol's start
        # a fresh simulator owes the first symbol the drift between the
        # imagined previous symbol's start and its last grid point
        self._init_gap_std = float(np.sqrt(var * t_pts[-1]))
        self._fresh = True

    def run(self, bits: np.ndarray, rng: np.random.Generator) -> DecisionRecord:
        b = len(bits)
        bits = np.asarray(bits, dtype=float)
        if self.beta > 0:
            if self._fresh:
                self._ref_state = self._theta_last - rng.normal(0.0, self._init_gap_std)
                self._fresh = False
            inc = rng.standard_normal((b, self.nb + 1)) * self._stds[None, :]
            vals = self._theta_last + np.cumsum(inc.reshape(-1)).reshape(b, self.nb + 1)
            refs = np.concatenate([[self._ref_state], vals[:-1, self._pos]])
            self._ref_state = float(vals[-1, self._pos])
            self._theta_last = float(vals[-1, -1])
            phases = vals[:, self._blk_cols] - refs[:, None]
            gain = (self.w_blk[None, :] * np.cos(phases)).sum(axis=1) / np.sqrt(2)
            dvs = bits * gain
        else:
            dvs = bits * (self.w_blk.sum() / np.sqrt(2))
        if self.n0 > 0:
            dvs = dvs + rng.normal(0.0, self.noise_std, b)
        return DecisionRecord(np.where(dvs >= 0, 1, -1), dvs)


def simulate_coupled_trpc(
    cfg: SystemConfig,
    ch: ChannelRealization,
    n0: float,
    beta: float,
    delta_f: float,
    phi: float,
    bits: np.ndarray,
    seed,
    block: int = 256,
):
    """Run the passband chain and the fast path on shared randomness.

    The oscillator walks are drawn once at the passband rate and subsampled
    onto the decimated grid for the fast path; the noise is drawn once as a
    complex envelope at fs_base, consumed rotated-then-filtered by the fast
    path and polyphase-upsampled onto the carrier for the passband chain.
    Residual decision disagreement is then down to the modeling differences
    themselves: phase drift within a carrier cycle, the two-rate lowpass,
    and the noise resampler.

    Returns (passband DecisionRecord, fast-path DecisionRecord).
    """
    pb = TrpcPassbandSimulator(cfg, ch, n0=0.0, beta=0.0, delta_f=delta_f, phi=phi)
    lt = TrpcLtiSimulator(cfg, ch, n0=0.0, beta=0.0, delta_f=delta_f, phi=phi)
    if pb.b_lo != lt.n_lo or pb.b_n != lt.n:
        raise AssertionError("window layouts diverged")
    decim = cfg.decimation
    fs_b, fs_p = cfg.fs_base, cfg.fs_pass
    lpf_b = lowpass_taps(cfg, fs_b)
    lw = len(lpf_b)
    half_b = (lw - 1) // 2

    # raw envelope span: exactly the fast path's pre-filter span, which in
    # turn tiles the raw passband span after upsampling; the oscillator
    # span tiles the same way, so the walks subsample by plain striding
    env_lo = lt.m_lo
    env_n = lt.m
    if env_lo * decim != pb.k_lo or env_n * decim != pb.k_n:
        raise AssertionError("envelope span does not tile the passband span")
    if lt.u_lo * decim != pb.o_lo or lt.u_n * decim != pb.o_n:
        raise AssertionError("oscillator span does not tile the passband span")

    rng = np.random.default_rng(seed)
    step_var = 2 * np.pi * beta / fs_p
    gap_var = 2 * np.pi * beta * (cfg.t_s - (pb.o_n - 1) / fs_p)
    th_tx = th_rx = 0.0
    sigma = np.sqrt((n0 / 2) * fs_b)
    k_env = pb.k_lo + np.arange(env_n * decim)
    carrier = np.exp(1j * (np.pi / 2) * (k_env % 4))
    rot_col0 = env_lo * decim - pb.o_lo

    dec_p, dvs_p, dec_l, dvs_l = [], [], [], []
    for i0 in range(0, len(bits), block):
        chunk = np.asarray(bits[i0 : i0 + block])
        nb = len(chunk)
        theta_tx, th_tx = _brownian_rows(rng, nb, pb.o_n, step_var, gap_var, th_tx)
        theta_rx, th_rx = _brownian_rows(rng, nb, pb.o_n, step_var, gap_var, th_rx)
        env = sigma * (rng.normal(size=(nb, env_n)) + 1j * rng.normal(size=(nb, env_n)))

        # passband side: ride the envelope on the carrier as real noise
        up = resample_poly(env, decim, 1, axis=1)
        noise_p = np.sqrt(2) * (up * carrier[None, :]).real
        rec_p = pb._chain(chunk, theta_tx, theta_rx, noise_p, i0)

        # fast-path side: rotate the same envelope the way the receiver
        # mixer would and undo the (1+j)/2 scale; the chain applies the
        # shared lowpass to signal and noise together
        t_env = ((i0 + np.arange(nb)) * cfg.t_s)[:, None] \
            + (env_lo + np.arange(env_n)) / fs_b
        th_rx_env = theta_rx[:, rot_col0 :: decim][:, :env_n]
        rot = np.exp(-1j * (2 * np.pi * delta_f * t_env + th_rx_env + phi))
        nu = (1 - 1j) / np.sqrt(2) * env * rot
        rec_l = lt._chain(chunk, theta_tx[:, ::decim], theta_rx[:, ::decim], nu, i0)

        dec_p.append(rec_p.bits)
        dvs_p.append(rec_p.dvs)
        dec_l.append(rec_l.bits)
        dvs_l.append(rec_l.dvs)

    return (
        DecisionRecord(np.concatenate(dec_p), np.concatenate(dvs_p)),
        DecisionRecord(np.concatenate(dec_l), np.concatenate(dvs_l)),
    )
