"""Alamouti-STBC joint channel and physical-layer network coding simulator.

Modules: protocode (protograph LDPC construction and encoding), fading
(Nakagami-m channel and noise sampling), relaylink (MAC-stage precoding,
combining, and channel messages), decoder (4-ary and simplified-LLR belief
propagation), analysis (PEXIT thresholds and analytic BER), harness / cli
(Monte-Carlo sweeps and CSV emission).
"""

from .analysis import (
    MiState,
    ThresholdRecord,
    channel_mi,
    find_threshold,
    j_function,
    j_inverse,
    pexit_run,
    theoretical_ber,
)
from .decoder import (
    DecodeResult,
    boxplus,
    cn_update_llr,
    cn_update_q,
    decode,
    decode_simplified,
    vn_update_llr,
    vn_update_q,
)
from .fading import (
    BlockChannel,
    FadingParams,
    sample_amplitude,
    sample_block_channel,
    sample_noise,
)
from .harness import BerRecord, RunConfig, run_ber_sweep
from .protocode import (
    LiftedCode,
    Protograph,
    bundled_code_path,
    encode,
    lift,
    load_protograph,
    puncture_mask,
    syndrome_check,
)
from .relaylink import (
    EffectiveChannel,
    Scheme,
    SchemeConfig,
    channel_message,
    effective_params,
    init_llr_exact,
    init_llr_simplified,
    make_scheme_config,
    mrc_combine,
    normalization_factors,
    simulate_mac_block,
)

__version__ = "0.1.0"
