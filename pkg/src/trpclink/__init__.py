"""Link simulator for pulse-cluster UWB signaling under oscillator impairments."""

__version__ = "0.1.0"

from .analysis import (
    DvStats,
    SemiAnalyticPoint,
    SemiAnalyticResult,
    composite_bep,
    estimate_dv_stats,
    p_phi,
    q_function,
    semianalytic_pe,
)
from .channel import (
    CHANNEL_MODELS,
    ChannelRealization,
    apply_channel,
    generate_ensemble,
    generate_realization,
    load_ensemble,
    save_ensemble,
)
from .harness import (
    PointResult,
    RunConfig,
    run_monte_carlo,
    run_semianalytic,
)
from .phasenoise import (
    VcoSpec,
    brownian_phase,
    carrier_waves,
    full_width_3db,
    lorentzian_profile,
    lorentzian_ssb,
    psd_estimate,
    spectral_phase,
)
from .signals import (
    SystemConfig,
    TrConfig,
    Waveform,
    bpsk_baseband,
    rrc_pulse,
    tr_baseband,
    trpc_baseband,
)
from .transceiver import (
    DecisionRecord,
    IntegrationWindow,
    SrakeLtiSimulator,
    TrLtiSimulator,
    TrpcLtiSimulator,
    TrpcPassbandSimulator,
    acr_decide,
    add_awgn,
    downconvert_iq,
    select_window,
    simulate_coupled_trpc,
    srake_mrc_decide,
    tr_acr_decide,
    upconvert,
)

__all__ = [name for name in dir() if not name.startswith("_")]
