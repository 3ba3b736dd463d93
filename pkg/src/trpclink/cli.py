"""Command line front end.

Subcommands map onto the library layers: gen-channels persists a channel
ensemble, simulate runs a Monte Carlo sweep, semianalytic runs the trained
error-probability sweep, pn-psd synthesizes an oscillator trajectory and
reports its spectrum. Every run writes delimited text; unless --no-plot is
given a figure lands next to each table. Output goes to --out, falling back
to the TRPCLINK_OUT environment variable, then the working directory.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import harness, phasenoise, plotting
from .channel import CHANNEL_MODELS, generate_ensemble, load_ensemble, save_ensemble
from .signals import SystemConfig


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="master seed")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker processes (default 1; results do not depend on this)")
    parser.add_argument("--out", default=None,
                        help=f"output directory (default ${harness.OUT_ENV} or cwd)")
    parser.add_argument("--tag", default=None, help="output file stem override")
    parser.add_argument("--no-plot", action="store_true", help="skip figure rendering")
    parser.add_argument("--quiet", action="store_true", help="no progress output")


def _sweep_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="key=value run file")
    parser.add_argument("--system", default=None,
                        choices=sorted(harness.SYSTEM_KINDS))
    parser.add_argument("--mode", default=None, choices=["iq", "i_only"])
    parser.add_argument("--ebn0", default=None, help="comma-separated dB values")
    parser.add_argument("--beta", type=float, default=None, help="3 dB linewidth in Hz")
    parser.add_argument("--freq-offset-max", type=float, default=None,
                        help="frequency offset bound in Hz (uniform draw)")
    parser.add_argument("--channel-model", default=None)
    parser.add_argument("--n-channels", type=int, default=None)
    parser.add_argument("--channel-seed", type=int, default=None)
    parser.add_argument("--channels", default=None, help="ensemble JSON from gen-channels")


def _load_run(args) -> tuple[harness.RunConfig, SystemConfig, list]:
    if args.config:
        run, cfg = harness.config_from_mapping(harness.parse_config_file(args.config))
    else:
        run, cfg = harness.RunConfig(), SystemConfig()
    run = harness.with_overrides(
        run,
        system=args.system,
        mode=args.mode,
        ebn0_db=tuple(float(x) for x in args.ebn0.split(",")) if args.ebn0 else None,
        beta=args.beta,
        freq_offset_max=getattr(args, "freq_offset_max", None),
        channel_model=args.channel_model,
        n_channels=args.n_channels,
        channel_seed=args.channel_seed,
        seed=args.seed,
        max_errors=getattr(args, "max_errors", None),
        max_symbols=getattr(args, "max_symbols", None),
        n_train=getattr(args, "n_train", None),
    )
    channels = None
    if args.channels:
        channels = load_ensemble(args.channels)
        run = harness.with_overrides(
            run, n_channels=len(channels), channel_model=channels[0].model)
    return run, cfg, channels


def _stem(args, run: harness.RunConfig, prefix: str) -> str:
    if args.tag:
        return args.tag
    parts = [prefix, run.system, run.mode]
    if run.beta > 0:
        parts.append(f"beta{run.beta:g}")
    return "_".join(parts)


def _cmd_gen_channels(args) -> int:
    model = args.model.upper()
    if model not in CHANNEL_MODELS:
        raise ValueError(f"unknown channel model {args.model!r}")
    out = harness.output_dir(args.out)
    os.makedirs(out, exist_ok=True)
    seed = args.seed if args.seed is not None else 1
    ens = generate_ensemble(model, args.count, seed)
    name = args.tag or f"channels_{model.lower()}_{args.count}"
    path = os.path.join(out, name + ".json")
    save_ensemble(path, ens, model, seed)
    if not args.quiet:
        print(path)
    return 0


def _cmd_simulate(args) -> int:
    run, cfg, channels = _load_run(args)
    out = harness.output_dir(args.out)
    os.makedirs(out, exist_ok=True)
    progress = None
    if not args.quiet:
        def progress(ebn0, wave, errors, bits):
            print(f"\r{ebn0:g} dB: wave {wave}, {errors} errors / {bits} bits",
                  end="", file=sys.stderr)
    results, meta = harness.run_monte_carlo(
        run, cfg, channels, threads=args.threads, progress=progress)
    if not args.quiet:
        print(file=sys.stderr)
        for r in results:
            print(f"{r.ebn0_db:g} dB: {r.errors} errors / {r.bits} bits, "
                  f"ber {r.ber:.3e}", file=sys.stderr)
    stem = os.path.join(out, _stem(args, run, "ber"))
    harness.write_ber_csv(stem + ".csv", results)
    harness.write_sidecar(stem + ".json", meta)
    if not args.no_plot:
        plotting.plot_ber(stem + ".png", results,
                          title=f"{run.system} {run.mode} {run.channel_model}")
    if not args.quiet:
        print(stem + ".csv")
    return 0


def _cmd_semianalytic(args) -> int:
    run, cfg, channels = _load_run(args)
    out = harness.output_dir(args.out)
    os.makedirs(out, exist_ok=True)
    results, meta = harness.run_semianalytic(run, cfg, channels, threads=args.threads)
    if not args.quiet:
        for r in results:
            print(f"{r.ebn0_db:g} dB: pe {r.pe_mean:.3e} "
                  f"[{r.pe_min:.3e}, {r.pe_max:.3e}]", file=sys.stderr)
    stem = os.path.join(out, _stem(args, run, "sa"))
    harness.write_semianalytic_csv(stem + ".csv", results, run.channel_model)
    harness.write_sidecar(stem + ".json", meta)
    if not args.no_plot:
        plotting.plot_semianalytic(stem + ".png", results,
                                   title=f"semi-analytic {run.channel_model}")
    if not args.quiet:
        print(stem + ".csv")
    return 0


def _cmd_pn_psd(args) -> int:
    out = harness.output_dir(args.out)
    os.makedirs(out, exist_ok=True)
    seed = args.seed if args.seed is not None else 0
    rng = np.random.default_rng(seed)
    reference = None
    if args.kind == "brownian":
        if args.beta is None:
            raise ValueError("--beta is required for the brownian kind")
        theta = phasenoise.brownian_phase(rng, args.beta, args.n, args.fs)
        reference = phasenoise.lorentzian_profile(args.beta, args.fs / args.nperseg * 4,
                                                  args.fs / 4)
    else:
        if args.profile:
            prof = np.loadtxt(args.profile, delimiter=",", skiprows=1)
        elif args.beta is not None:
            prof = phasenoise.lorentzian_profile(args.beta, args.fs / args.nperseg * 4,
                                                 args.fs / 4)
        else:
            raise ValueError("spectral kind needs --profile or --beta")
        theta = phasenoise.spectral_phase(rng, prof, args.n, args.fs)
        reference = prof
    offsets, dbc = phasenoise.psd_estimate(theta, args.fs, args.nperseg)
    stem = os.path.join(out, args.tag or f"pn_{args.kind}")
    harness.write_psd_csv(stem + ".csv", offsets, dbc)
    if not args.no_plot:
        plotting.plot_psd(stem + ".png", offsets, dbc, reference=reference,
                          title=f"{args.kind} oscillator")
    width = phasenoise.full_width_3db(offsets, dbc)
    if not args.quiet:
        print(f"measured full 3 dB width: {width:g} Hz")
        print(stem + ".csv")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="trpclink",
        description="pulse-cluster UWB link simulator and analysis harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-channels", help="generate and save a channel ensemble")
    p.add_argument("--model", default="CM1")
    p.add_argument("--count", type=int, default=20)
    _common(p)
    p.set_defaults(fn=_cmd_gen_channels)

    p = sub.add_parser("simulate", help="Monte Carlo error-rate sweep")
    _sweep_args(p)
    p.add_argument("--max-errors", type=int, default=None)
    p.add_argument("--max-symbols", type=int, default=None)
    _common(p)
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("semianalytic", help="trained error-probability sweep")
    _sweep_args(p)
    p.add_argument("--n-train", type=int, default=None)
    _common(p)
    p.set_defaults(fn=_cmd_semianalytic)

    p = sub.add_parser("pn-psd", help="synthesize an oscillator and report its spectrum")
    p.add_argument("--kind", choices=["brownian", "spectral"], default="brownian")
    p.add_argument("--beta", type=float, default=None, help="3 dB linewidth in Hz")
    p.add_argument("--profile", default=None,
                   help="offset_hz,psd_dbc_hz table for the spectral kind")
    p.add_argument("--n", type=int, default=1 << 22, help="trajectory samples")
    p.add_argument("--fs", type=float, default=5e7, help="trajectory sample rate")
    p.add_argument("--nperseg", type=int, default=1 << 18, help="spectrum segment length")
    _common(p)
    p.set_defaults(fn=_cmd_pn_psd)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
