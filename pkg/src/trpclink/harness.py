"""Monte Carlo and semi-analytical sweep orchestration.

Reproducibility rules. Every random draw traces back to one master seed
through named SeedSequence paths: channel realization r of an ensemble uses
(channel_seed, r); the frequency/phase offsets of realization r use
(seed, 100, r) and are drawn once, so every sweep point sees the same
offsets; the symbols, oscillator walks, and noise of sweep point p,
realization r, wave w use (seed, kind, p, r, w) with a fresh simulator per
task. Decision statistics are invariant to the absolute oscillator phase at
a window start, so restarting the walk per task changes nothing
statistically while making every task independently schedulable: sweeps are
byte-identical across thread counts.

Early stop happens at wave boundaries (one block per realization per wave),
keeping every channel realization at an equal symbol count and the stop
decision independent of scheduling.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .analysis import SemiAnalyticPoint, semianalytic_pe
from .channel import CHANNEL_MODELS, generate_ensemble
from .signals import SystemConfig, TrConfig
from .transceiver import (
    SrakeLtiSimulator,
    TrLtiSimulator,
    TrpcLtiSimulator,
    TrpcPassbandSimulator,
)

__all__ = [
    "RunConfig",
    "PointResult",
    "run_monte_carlo",
    "run_semianalytic",
    "ensure_channels",
    "write_ber_csv",
    "write_semianalytic_csv",
    "write_psd_csv",
    "write_sidecar",
    "parse_config_file",
    "config_from_mapping",
    "output_dir",
]

SYSTEM_KINDS = {"trpc": 0, "trpc-passband": 1, "tr": 2, "srake": 3}
_KIND_OFFSETS = 100
_KIND_TRAIN = 101
_DEFAULT_BLOCK = {"trpc": 4096, "trpc-passband": 256, "tr": 1024, "srake": 8192}

OUT_ENV = "TRPCLINK_OUT"


@dataclass(frozen=True)
class RunConfig:
    """One sweep: which system, which impairments, how hard to push each point."""

    system: str = "trpc"
    mode: str = "iq"
    ebn0_db: tuple = (0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0)
    beta: float = 0.0
    freq_offset_max: float = 5e6
    random_phase: bool = True
    channel_model: str = "CM1"
    n_channels: int = 20
    channel_seed: int = 1
    seed: int = 0
    max_symbols: int = 2_000_000
    max_errors: int = 200
    block: int = 0              # 0 resolves to a per-system default
    n_train: int = 20_000
    n_fingers: int = 8
    tr_t_d_prime: float = 0.0   # 0.0 resolves to 400 base samples
    tr_t_f: float = 0.0         # 0.0 resolves to 2 * t_d_prime
    srake_t_f_prime: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "system", self.system.lower())
        object.__setattr__(self, "mode", self.mode.lower())
        object.__setattr__(self, "channel_model", self.channel_model.upper())
        if self.system not in SYSTEM_KINDS:
            raise ValueError(f"unknown system {self.system!r}")
        if self.mode not in ("iq", "i_only"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.channel_model not in CHANNEL_MODELS:
            raise ValueError(f"unknown channel model {self.channel_model!r}")
        if self.seed < 0 or self.channel_seed < 0:
            raise ValueError("seeds must be non-negative")
        if not self.ebn0_db:
            raise ValueError("need at least one sweep point")
        object.__setattr__(
            self, "ebn0_db", tuple(sorted(float(x) for x in self.ebn0_db)))
        if self.n_channels < 1 or self.max_errors < 1:
            raise ValueError("counts must be positive")
        if self.max_symbols < 1000:
            raise ValueError("max_symbols below 1000 gives meaningless tallies")
        if self.n_train < 1024 or self.n_train % 2:
            raise ValueError("n_train must be even and at least 1024")
        if self.beta < 0 or self.freq_offset_max < 0:
            raise ValueError("beta and freq_offset_max must be non-negative")

    def resolved_block(self) -> int:
        return self.block if self.block > 0 else _DEFAULT_BLOCK[self.system]

    def resolved_tr(self, cfg: SystemConfig) -> TrConfig:
        t_d = self.tr_t_d_prime if self.tr_t_d_prime > 0 else 400 / cfg.fs_base
        t_f = self.tr_t_f if self.tr_t_f > 0 else 2 * t_d
        return TrConfig(t_f=t_f, t_d_prime=t_d)

    def resolved_t_f_prime(self, cfg: SystemConfig) -> float:
        return self.srake_t_f_prime if self.srake_t_f_prime > 0 else 400 / cfg.fs_base


@dataclass
class PointResult:
    """Tallies for one sweep point."""

    ebn0_db: float
    errors: int
    bits: int

    @property
    def ber(self) -> float:
        return self.errors / self.bits if self.bits else float("nan")


def _offsets_for(run: RunConfig, r: int):
    """Frequency and phase offset of channel realization r, fixed across points."""
    rng = np.random.default_rng(np.random.SeedSequence((run.seed, _KIND_OFFSETS, r)))
    delta_f = float(rng.uniform(-run.freq_offset_max, run.freq_offset_max))
    phi = float(rng.uniform(0.0, 2 * np.pi)) if run.random_phase else 0.0
    return delta_f, phi


def _build_simulator(run: RunConfig, cfg: SystemConfig, ch, n0: float, r: int):
    delta_f, phi = _offsets_for(run, r)
    if run.system == "trpc":
        return TrpcLtiSimulator(cfg, ch, n0, run.beta, delta_f, phi, run.mode)
    if run.system == "trpc-passband":
        return TrpcPassbandSimulator(cfg, ch, n0, run.beta, delta_f, phi, run.mode)
    if run.system == "tr":
        return TrLtiSimulator(cfg, ch, run.resolved_tr(cfg), n0, run.beta, delta_f, phi)
    return SrakeLtiSimulator(
        cfg, ch, run.resolved_t_f_prime(cfg), n0, run.beta, run.n_fingers)


def _mc_task(args):
    """One block of one realization at one sweep point; fully seed-determined."""
    run, cfg, ch, p, r, w = args
    ebn0 = run.ebn0_db[p]
    n0 = cfg.e_b * 10 ** (-ebn0 / 10)
    sim = _build_simulator(run, cfg, ch, n0, r)
    ss = np.random.SeedSequence((run.seed, SYSTEM_KINDS[run.system], p, r, w))
    rng = np.random.default_rng(ss)
    block = run.resolved_block()
    bits = rng.integers(0, 2, block) * 2.0 - 1.0
    rec = sim.run(bits, rng)
    return int(np.count_nonzero(rec.bits != bits)), block


def _sa_task(args):
    """Semi-analytical error probability of one realization at one point."""
    run, cfg, ch, p, r = args
    ebn0 = run.ebn0_db[p]
    n0 = cfg.e_b * 10 ** (-ebn0 / 10)
    ss = np.random.SeedSequence((run.seed, _KIND_TRAIN, p, r))
    return semianalytic_pe(cfg, ch, n0, run.beta, run.n_train, ss, mode=run.mode).pe


def _collect(tasks, fn, pool):
    if pool is None:
        return [fn(t) for t in tasks]
    return [f.result() for f in [pool.submit(fn, t) for t in tasks]]


def ensure_channels(run: RunConfig, cfg: SystemConfig, channels=None):
    """Use the supplied ensemble or generate the configured one."""
    if channels is not None:
        if len(channels) != run.n_channels:
            raise ValueError(
                f"ensemble holds {len(channels)} realizations, config wants {run.n_channels}")
        return channels
    return generate_ensemble(run.channel_model, run.n_channels, run.channel_seed, cfg)


def run_monte_carlo(
    run: RunConfig,
    cfg: SystemConfig | None = None,
    channels=None,
    threads: int = 1,
    progress=None,
):
    """Sweep Eb/N0, averaging over the channel ensemble with early stop.

    Returns (list of PointResult, meta dict for the sidecar).
    """
    cfg = cfg or SystemConfig()
    channels = ensure_channels(run, cfg, channels)
    block = run.resolved_block()
    pool = ProcessPoolExecutor(max_workers=threads) if threads > 1 else None
    results, elapsed = [], []
    try:
        for p in range(len(run.ebn0_db)):
            t0 = time.perf_counter()
            errors = bits = 0
            w = 0
            while errors < run.max_errors and bits < run.max_symbols:
                tasks = [(run, cfg, channels[r], p, r, w) for r in range(len(channels))]
                for e, n in _collect(tasks, _mc_task, pool):
                    errors += e
                    bits += n
                w += 1
                if progress is not None:
                    progress(run.ebn0_db[p], w, errors, bits)
            results.append(PointResult(run.ebn0_db[p], errors, bits))
            elapsed.append(time.perf_counter() - t0)
    finally:
        if pool is not None:
            pool.shutdown()
    meta = {
        "config": asdict(run),
        "block": block,
        "threads": threads,
        "elapsed_s": [round(e, 3) for e in elapsed],
    }
    return results, meta


def run_semianalytic(
    run: RunConfig,
    cfg: SystemConfig | None = None,
    channels=None,
    threads: int = 1,
):
    """Semi-analytical sweep over the same ensemble; no early stop needed.

    Returns (list of SemiAnalyticPoint, meta dict).
    """
    if run.system != "trpc":
        raise ValueError("the semi-analytical path models the pulse-cluster system")
    cfg = cfg or SystemConfig()
    channels = ensure_channels(run, cfg, channels)
    pool = ProcessPoolExecutor(max_workers=threads) if threads > 1 else None
    results, elapsed = [], []
    try:
        for p in range(len(run.ebn0_db)):
            t0 = time.perf_counter()
            tasks = [(run, cfg, channels[r], p, r) for r in range(len(channels))]
            pes = _collect(tasks, _sa_task, pool)
            results.append(SemiAnalyticPoint(
                ebn0_db=run.ebn0_db[p],
                beta_hz=run.beta,
                pe_mean=float(np.mean(pes)),
                pe_min=float(np.min(pes)),
                pe_max=float(np.max(pes)),
                pe_values=tuple(pes),
            ))
            elapsed.append(time.perf_counter() - t0)
    finally:
        if pool is not None:
            pool.shutdown()
    meta = {
        "config": asdict(run),
        "threads": threads,
        "elapsed_s": [round(e, 3) for e in elapsed],
    }
    return results, meta


# ---------------------------------------------------------------------------
# Files
# ---------------------------------------------------------------------------


def output_dir(override=None) -> str:
    """Output directory: explicit argument, else the environment, else cwd."""
    return str(override or os.environ.get(OUT_ENV) or ".")


def write_ber_csv(path, results) -> None:
    lines = ["ebn0_db,errors,bits,ber"]
    for r in results:
        lines.append(f"{r.ebn0_db:g},{r.errors},{r.bits},{r.ber!r}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def write_semianalytic_csv(path, results, model: str) -> None:
    lines = ["ebn0_db,pe_mean,pe_min,pe_max,beta_hz,model"]
    for r in results:
        lines.append(
            f"{r.ebn0_db:g},{r.pe_mean!r},{r.pe_min!r},{r.pe_max!r},{r.beta_hz:g},{model}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def write_psd_csv(path, offsets, dbc) -> None:
    lines = ["offset_hz,psd_dbc_hz"]
    for f_off, s in zip(offsets, dbc):
        lines.append(f"{f_off!r},{s!r}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def write_sidecar(path, meta: dict) -> None:
    from . import __version__

    payload = {"version": __version__, **meta}
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, default=str)
        f.write("\n")


# ---------------------------------------------------------------------------
# Flat key=value run files
# ---------------------------------------------------------------------------


def parse_config_file(path) -> dict:
    """key = value lines; # comments and blank lines ignored."""
    out = {}
    with open(path) as f:
        for ln, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{ln}: expected key=value, got {raw.strip()!r}")
            key, val = line.split("=", 1)
            out[key.strip()] = val.strip()
    return out


def _coerce(val: str, typ):
    if typ is bool:
        low = val.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {val!r}")
    if typ is tuple:
        return tuple(float(x) for x in val.split(",") if x.strip())
    return typ(val)


def config_from_mapping(mapping: dict):
    """Split a flat mapping into (RunConfig, SystemConfig) overrides."""
    run_fields = {f.name: f.type for f in fields(RunConfig)}
    sys_fields = {f.name: f.type for f in fields(SystemConfig)}
    type_of = {"str": str, "float": float, "int": int, "bool": bool, "tuple": tuple}
    run_kw, sys_kw = {}, {}
    for key, val in mapping.items():
        if key in run_fields:
            run_kw[key] = _coerce(val, type_of[run_fields[key]])
        elif key in sys_fields:
            sys_kw[key] = _coerce(val, type_of[sys_fields[key]])
        else:
            raise ValueError(f"unknown config key {key!r}")
    return RunConfig(**run_kw), SystemConfig(**sys_kw)


def with_overrides(run: RunConfig, **kw) -> RunConfig:
    """Replace fields, dropping None values."""
    return replace(run, **{k: v for k, v in kw.items() if v is not None})
