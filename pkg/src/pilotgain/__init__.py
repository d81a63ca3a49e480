"""Pilot codebooks and large-scale gain estimation for massive MIMO.

Users transmit length-``Q`` pilots ``p_k``; the base station sees the
covariance ``R = P diag(g) P^H + sigma_w2 I`` and recovers the gains ``g``
from ``vec(R) = D g + sigma_w2 vec(I)`` with ``D = [conj(p_k) kron p_k]``.
"""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    CodebookKind,
    DesignMatrix,
    DimensionError,
    PilotCodebook,
    PilotGainError,
    RankDeficientError,
    VecSystem,
    build_design_matrix,
    numerical_rank,
    unvec,
    vec,
    vectorize_covariance,
)
from .codebooks import (  # noqa: E402
    PackingConfig,
    PackingInfo,
    coherence_report,
    gen_gaussian_complex,
    gen_gaussian_real,
    gen_grassmannian,
    gen_random_phase,
    gen_vandermonde,
    generate,
    read_codebook,
    welch_bound,
    write_codebook,
)
from .channel import ChannelRealization, ScenarioConfig, exact_covariance, simulate_trial  # noqa: E402
from .estimator import GainEstimate, Method, build_r_hat, estimate, estimate_nnls, estimate_zf  # noqa: E402
from .analysis import (  # noqa: E402
    NoiseEnhancementReport,
    closed_form_Rz,
    etf_gram_spectrum,
    nmse,
    noise_enhancement,
    theoretical_avg_enhancement_db,
)
