"""Error exponents for DMCs under generalized stochastic likelihood decoding."""

from .probkit import (
    Channel,
    Distribution,
    JointDistribution,
    SimplexGrid,
    compose,
    conditional_divergence,
    entropy,
    enumerate_couplings,
    enumerate_joints_fixed_row,
    kl_divergence,
    mutual_information,
)
from .metrics import DecoderMetric, SourceMetric, eval_f, eval_g
from .rce import (
    RceProblem,
    critical_rate,
    exponent_curve,
    ml_baseline,
    random_coding_exponent,
)
from .expurgated import (
    ExpurgationProblem,
    ckm_baseline,
    expurgated_exponent,
    zchannel_curves,
)
from .jsc import JscProblem, jsc_exponent
from .simulator import (
    SimConfig,
    exact_ensemble_error,
    gld_decode,
    run_monte_carlo,
    sample_codebook,
)

__version__ = "0.1.0"

__all__ = [
    "Channel",
    "Distribution",
    "JointDistribution",
    "SimplexGrid",
    "DecoderMetric",
    "SourceMetric",
    "compose",
    "conditional_divergence",
    "entropy",
    "enumerate_couplings",
    "enumerate_joints_fixed_row",
    "eval_f",
    "eval_g",
    "kl_divergence",
    "mutual_information",
]
