"""Oscillator phase noise models and carrier utilities.

Two generators are provided. The Brownian generator integrates white
frequency noise, giving Var[theta(t)] = 2*pi*beta*t where beta is the full
3 dB linewidth of the resulting carrier spectrum. The spectral generator
synthesizes a trajectory from a single-sideband PSD profile (offset in Hz,
level in dBc/Hz) by weighting a unit Gaussian frequency comb with the square
root of the interpolated PSD and inverse transforming, which reproduces an
arbitrary measured profile instead of the pure Lorentzian.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import welch

from .signals import Waveform

__all__ = [
    "VcoSpec",
    "PhaseTrajectory",
    "brownian_phase",
    "spectral_phase",
    "lorentzian_ssb",
    "lorentzian_profile",
    "carrier_waves",
    "psd_estimate",
    "full_width_3db",
]


@dataclass(frozen=True)
class VcoSpec:
    """Oscillator description: linewidth plus the generator used for trajectories."""

    beta: float = 0.0
    mode: str = "brownian"
    profile: tuple = ()  # ((offset_hz, dbc_hz), ...) for mode "spectral"

    def __post_init__(self) -> None:
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if self.mode not in ("brownian", "spectral"):
            raise ValueError(f"unknown phase noise mode {self.mode!r}")
        if self.mode == "spectral" and len(self.profile) < 2:
            raise ValueError("spectral mode needs a PSD profile with at least 2 points")


@dataclass
class PhaseTrajectory:
    theta: np.ndarray
    fs: float
    t0: float = 0.0


def brownian_phase(rng: np.random.Generator, beta: float, n: int, fs: float,
                   theta0: float = 0.0) -> np.ndarray:
    """Random-walk phase: theta[0] = theta0, increments N(0, 2*pi*beta/fs)."""
    if beta == 0.0:
        return np.full(n, theta0)
    steps = rng.normal(0.0, np.sqrt(2 * np.pi * beta / fs), n - 1)
    theta = np.empty(n)
    theta[0] = theta0
    np.cumsum(steps, out=theta[1:])
    theta[1:] += theta0
    return theta


def spectral_phase(rng: np.random.Generator, profile, n: int, fs: float) -> np.ndarray:
    """Synthesize phase from an SSB PSD profile.

    The profile levels (dBc/Hz) are taken as the two-sided phase PSD in
    rad^2/Hz, valid in the small-angle regime where the carrier sideband and
    the phase spectrum coincide. Interpolation is linear in (log f, dB) and
    clamps at the profile edges; the DC bin is zeroed.
    """
    prof = np.asarray(profile, dtype=float)
    f_prof, dbc = prof[:, 0], prof[:, 1]
    if np.any(f_prof <= 0) or np.any(np.diff(f_prof) <= 0):
        raise ValueError("profile offsets must be positive and increasing")

    freqs = np.fft.rfftfreq(n, 1 / fs)
    s = np.zeros_like(freqs)
    nz = freqs > 0
    s[nz] = 10 ** (np.interp(np.log10(freqs[nz]), np.log10(f_prof), dbc) / 10)

    scale = np.sqrt(s * fs * n / 2)
    spec = (rng.normal(size=len(freqs)) + 1j * rng.normal(size=len(freqs))) / np.sqrt(2) * scale
    spec[0] = 0.0
    if n % 2 == 0:
        spec[-1] = rng.normal() * np.sqrt(s[-1] * fs * n / 2)
    return np.fft.irfft(spec, n)


def lorentzian_ssb(f, beta: float):
    """Closed-form carrier sideband PSD (1/Hz) for Brownian phase with linewidth beta.

    Var[theta(t)] = 2*pi*beta*t gives a Lorentzian carrier line whose full
    3 dB width is beta, i.e. half-power offsets at +/- beta/2.
    """
    f = np.asarray(f, dtype=float)
    half = beta / 2
    return (beta / (2 * np.pi)) / (half**2 + f**2)


def lorentzian_profile(beta: float, f_lo: float | None = None, f_hi: float | None = None,
                       points: int = 64):
    """Log-spaced (offset, dBc/Hz) feature set for the Lorentzian line of width beta."""
    f_lo = f_lo or beta / 100
    f_hi = f_hi or beta * 1e4
    f = np.geomspace(f_lo, f_hi, points)
    f = np.unique(np.concatenate([f, [beta / 2, beta]]))
    return np.column_stack([f, 10 * np.log10(lorentzian_ssb(f, beta))])


def carrier_waves(theta: np.ndarray, fs: float, f_c: float, t0: float = 0.0,
                  delta_f: float = 0.0, phi: float = 0.0):
    """Quadrature oscillator outputs cos(arg) and -sin(arg).

    arg = 2*pi*(f_c + delta_f)*t + theta + phi with absolute time t. The
    transmitter uses the defaults; a receiver passes its frequency and phase
    offsets.
    """
    t = t0 + np.arange(len(theta)) / fs
    arg = 2 * np.pi * (f_c + delta_f) * t + theta + phi
    return Waveform(np.cos(arg), fs, t0), Waveform(-np.sin(arg), fs, t0)


def psd_estimate(theta: np.ndarray, fs: float, nperseg: int | None = None):
    """Single-sideband PSD of the noisy carrier exp(j*theta), in dBc/Hz.

    Welch with no detrending (the carrier line is the signal), two-sided
    spectrum folded about zero offset. Returns (offsets_hz, dbc_hz) for
    positive offsets.
    """
    nperseg = nperseg or min(len(theta) // 16, 1 << 14)
    f, pxx = welch(np.exp(1j * theta), fs=fs, nperseg=nperseg,
                   return_onesided=False, detrend=False)
    order = np.argsort(f)
    f, pxx = f[order], pxx[order]
    pxx = pxx / np.sum(pxx * (f[1] - f[0]))  # normalize to unit carrier power

    pos = f > 0
    p_pos = pxx[pos]
    # an even segment length carries the Nyquist bin on the negative side only
    p_neg = pxx[f < 0][::-1][: len(p_pos)]
    folded = (p_pos + p_neg) / 2
    return f[pos], 10 * np.log10(folded)


def full_width_3db(offsets: np.ndarray, dbc: np.ndarray) -> float:
    """Full 3 dB width of a folded SSB estimate: twice the half-power offset.

    The reference level is the median of the lowest-offset bins, which rides
    out estimator noise on the flat top of the line.
    """
    k = max(3, np.searchsorted(offsets, offsets[0] * 4))
    ref = np.median(dbc[:k])
    smooth = np.array([np.median(dbc[max(0, i - 2): i + 3]) for i in range(len(dbc))])
    below = np.nonzero(smooth < ref - 3.0103)[0]
    below = below[below >= k]
    if len(below) == 0:
        raise ValueError("no 3 dB crossing inside the estimated span")
    i = below[0]
    # log-domain linear interpolation between the bracketing bins
    f1, f2 = offsets[i - 1], offsets[i]
    d1, d2 = smooth[i - 1], smooth[i]
    frac = (ref - 3.0103 - d1) / (d2 - d1) if d2 != d1 else 0.5
    return 2 * float(f1 * (f2 / f1) ** frac)
