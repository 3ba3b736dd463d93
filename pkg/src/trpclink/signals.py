"""Baseband signal construction for pulse-cluster UWB links.

All quantities are SI (seconds, Hz). Waveforms carry their own sample rate
and start time so that filters and channel delays can be composed without
implicit alignment conventions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SystemConfig",
    "TrConfig",
    "Waveform",
    "rrc_pulse",
    "trpc_baseband",
    "tr_baseband",
    "bpsk_baseband",
    "sample_index",
]


def sample_index(t: float, fs: float, tol: float = 1e-6) -> int:
    """Convert a time offset to an integer sample index, insisting it lands on the grid."""
    k = round(t * fs)
    if abs(k - t * fs) > tol * max(1.0, abs(t * fs)):
        raise ValueError(f"time {t!r} s is off the 1/{fs!r} s sample grid")
    return int(k)


@dataclass(frozen=True)
class SystemConfig:
    """Link parameters for the pulse-cluster system.

    Defaults give a 3.952 GHz carrier with the passband grid at 4 samples per
    carrier cycle and the baseband grid at 1 sample per carrier cycle, so the
    channel tap spacing t_c = 1/f_c and the intra-cluster delay t_d both land
    on integer sample offsets at either rate.
    """

    f_c: float = 3.952e9
    fs_pass: float = 4 * 3.952e9
    fs_base: float = 3.952e9
    n_f: int = 4
    t_s: float = 1e-6
    t_p: float = 8 / 3.952e9
    t_d: float = 8 / 3.952e9
    rolloff: float = 0.25
    pulse_span: float = 8.0
    e_b: float = 1.0

    def __post_init__(self) -> None:
        if min(self.f_c, self.fs_pass, self.fs_base, self.t_s, self.t_p, self.t_d) <= 0:
            raise ValueError("frequencies and durations must be positive")
        if not 0 < self.rolloff < 1:
            raise ValueError("rolloff must be in (0, 1)")
        ratio = self.fs_pass / (4 * self.f_c)
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ValueError("fs_pass must be an integer multiple of 4*f_c")
        decim = self.fs_pass / self.fs_base
        if abs(decim - round(decim)) > 1e-9 or round(decim) < 1:
            raise ValueError("fs_pass must be an integer multiple of fs_base")
        if abs(self.fs_base * self.t_c - round(self.fs_base * self.t_c)) > 1e-6:
            raise ValueError("fs_base must place the tap spacing 1/f_c on the sample grid")
        if self.fs_base * self.t_p < 8:
            raise ValueError("need at least 8 samples per t_p at fs_base")
        if self.n_f < 1:
            raise ValueError("n_f must be at least 1")
        if 2 * self.n_f * self.t_d >= self.t_s:
            raise ValueError("pulse cluster does not fit in the symbol period")

    @property
    def t_c(self) -> float:
        return 1.0 / self.f_c

    @property
    def decimation(self) -> int:
        return int(round(self.fs_pass / self.fs_base))

    @property
    def cluster_duration(self) -> float:
        """Span of the 2*n_f pulse positions, first pulse start to last pulse start plus t_d."""
        return 2 * self.n_f * self.t_d

    @property
    def pulse_amplitude(self) -> float:
        return float(np.sqrt(self.e_b / (2 * self.n_f)))


@dataclass(frozen=True)
class TrConfig:
    """Frame layout for the reference-pulse-per-frame comparison system.

    Each of the n_f frames of length t_f carries a reference pulse at the
    frame start and a data pulse t_d_prime later.
    """

    t_f: float
    t_d_prime: float

    def __post_init__(self) -> None:
        if self.t_d_prime <= 0 or self.t_f <= 0:
            raise ValueError("frame durations must be positive")
        if self.t_f < 2 * self.t_d_prime:
            raise ValueError("need t_f >= 2*t_d_prime to keep reference and data separated")

    def validate_for(self, cfg: SystemConfig) -> None:
        if cfg.n_f * self.t_f > cfg.t_s:
            raise ValueError("n_f frames do not fit in the symbol period")


@dataclass
class Waveform:
    """Uniformly sampled signal with an absolute start time."""

    samples: np.ndarray
    fs: float
    t0: float = 0.0

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.fs

    def times(self) -> np.ndarray:
        return self.t0 + np.arange(len(self.samples)) / self.fs

    def energy(self) -> float:
        """Continuous-time energy estimate sum(|x|^2) * dt."""
        return float(np.sum(np.abs(self.samples) ** 2) / self.fs)


def rrc_pulse(cfg: SystemConfig, fs: float) -> Waveform:
    """Unit-energy root-raised-cosine pulse, peak at t = 0.

    The pulse is truncated to a total span of cfg.pulse_span * t_p and
    renormalized so its sampled energy is exactly 1.
    """
    t_p, beta = cfg.t_p, cfg.rolloff
    n_half = sample_index(cfg.pulse_span / 2 * t_p, fs, tol=1e-3)
    t = np.arange(-n_half, n_half + 1) / fs
    x = t / t_p

    # Regular part, with the two removable singularities patched by closed forms.
    with np.errstate(divide="ignore", invalid="ignore"):
        num = np.sin(np.pi * x * (1 - beta)) + 4 * beta * x * np.cos(np.pi * x * (1 + beta))
        den = np.pi * x * (1 - (4 * beta * x) ** 2)
        g = num / den
    g[x == 0] = 1 + beta * (4 / np.pi - 1)
    sing = np.isclose(np.abs(x), 1 / (4 * beta), rtol=0, atol=1e-9)
    g[sing] = (beta / np.sqrt(2)) * (
        (1 + 2 / np.pi) * np.sin(np.pi / (4 * beta)) + (1 - 2 / np.pi) * np.cos(np.pi / (4 * beta))
    )

    g /= np.sqrt(np.sum(g**2) / fs)
    return Waveform(g, fs, t0=-n_half / fs)


def _pulse_layout(cfg: SystemConfig, tr: TrConfig | None = None, bpsk_t_f_prime: float | None = None):
    """Per-symbol pulse offsets and data flags (flag 1 means the pulse carries the bit sign).

    Exactly one of the three layouts is produced: the default pulse cluster,
    the framed reference/data layout (tr), or the uniformly spaced
    single-polarity train (bpsk_t_f_prime).
    """
    if tr is not None and bpsk_t_f_prime is not None:
        raise ValueError("pass at most one of tr and bpsk_t_f_prime")
    if tr is not None:
        offsets = []
        flags = []
        for m in range(cfg.n_f):
            offsets += [m * tr.t_f, m * tr.t_f + tr.t_d_prime]
            flags += [0, 1]
    elif bpsk_t_f_prime is not None:
        offsets = [m * bpsk_t_f_prime for m in range(2 * cfg.n_f)]
        flags = [1] * (2 * cfg.n_f)
    else:
        offsets = []
        flags = []
        for m in range(cfg.n_f):
            offsets += [2 * m * cfg.t_d, (2 * m + 1) * cfg.t_d]
            flags += [0, 1]
    return np.asarray(offsets), np.asarray(flags)


def _pulse_train(
    bits: np.ndarray,
    cfg: SystemConfig,
    fs: float,
    offsets: np.ndarray,
    flags: np.ndarray,
) -> Waveform:
    """Superpose the shaping pulse at per-symbol offsets, bits applied where flagged."""
    from scipy.signal import fftconvolve

    bits = np.asarray(bits, dtype=float)
    if not np.all(np.isin(bits, (-1.0, 1.0))):
        raise ValueError("bits must be +/-1")

    n_sym = len(bits)
    step = sample_index(cfg.t_s, fs)
    off_n = np.array([sample_index(o, fs) for o in offsets])
    amp = cfg.pulse_amplitude

    deltas = np.zeros((n_sym - 1) * step + int(off_n.max()) + 1)
    base = np.arange(n_sym) * step
    for o, f in zip(off_n, flags):
        deltas[base + o] += amp * (bits if f else 1.0)

    pulse = rrc_pulse(cfg, fs)
    out = fftconvolve(deltas, pulse.samples)
    return Waveform(out, fs, t0=pulse.t0)


def trpc_baseband(bits: np.ndarray, cfg: SystemConfig, fs: float) -> Waveform:
    """Pulse-cluster baseband stream: per symbol, n_f reference/data pulse pairs at t_d spacing.

    Every reference pulse is positive; data pulses carry the bit sign, so one
    symbol occupies 2*n_f*t_d plus the pulse tails. Adjacent pulses of the
    root-raised-cosine family overlap but are mutually orthogonal at integer
    multiples of t_p, which keeps the symbol energy at e_b up to the
    truncation residue of the pulse.
    """
    offsets, flags = _pulse_layout(cfg)
    return _pulse_train(bits, cfg, fs, offsets, flags)


def tr_baseband(bits: np.ndarray, cfg: SystemConfig, tr: TrConfig, fs: float) -> Waveform:
    """Framed reference/data stream: n_f frames per symbol, data delayed by t_d_prime."""
    tr.validate_for(cfg)
    offsets, flags = _pulse_layout(cfg, tr=tr)
    return _pulse_train(bits, cfg, fs, offsets, flags)


def bpsk_baseband(bits: np.ndarray, cfg: SystemConfig, t_f_prime: float, fs: float) -> Waveform:
    """Antipodal train of 2*n_f identically signed pulses spaced t_f_prime apart."""
    if 2 * cfg.n_f * t_f_prime > cfg.t_s:
        raise ValueError("pulse train does not fit in the symbol period")
    offsets, flags = _pulse_layout(cfg, bpsk_t_f_prime=t_f_prime)
    return _pulse_train(bits, cfg, fs, offsets, flags)
