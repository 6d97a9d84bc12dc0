"""Link-level simulator for an OFDM wiretap channel that combines temporal
artificial noise (shaped into the cyclic prefix's null space) with
secret-key-encrypted sub-channels, plus the three-level power optimization
(active-set selection, per-set water-filling, power-fraction grid search).
"""

from .channel import ChannelRealization, sample_realization, substream
from .montecarlo import (
    MonteCarloPlan,
    SweepReport,
    SweepRow,
    average_secrecy,
    evaluate_trial,
    grid_fractions,
    grid_search,
    sweep_ne,
)
from .ofdm import OfdmStructure, SystemConfig, build_structure, frequency_response, toeplitz_channel
from .power import (
    PowerAllocation,
    PowerFractions,
    allocate,
    partition_encrypted,
    select_active,
    water_fill,
)
from .precoder import (
    AnPrecoder,
    DegenerateChannelError,
    EveAnFootprint,
    compute_precoder,
    eve_footprint,
)
from .rates import (
    TrialResult,
    normalize_rate,
    rate_bob,
    rate_eve_joint,
    rate_eve_per_sub,
    secrecy_rate,
)

__version__ = "0.1.0"

__all__ = [
    "AnPrecoder",
    "ChannelRealization",
    "DegenerateChannelError",
    "EveAnFootprint",
    "MonteCarloPlan",
    "OfdmStructure",
    "PowerAllocation",
    "PowerFractions",
    "SweepReport",
    "SweepRow",
    "SystemConfig",
    "TrialResult",
    "allocate",
    "average_secrecy",
    "build_structure",
    "compute_precoder",
    "evaluate_trial",
    "eve_footprint",
    "frequency_response",
    "grid_fractions",
    "grid_search",
    "normalize_rate",
    "partition_encrypted",
    "rate_bob",
    "rate_eve_joint",
    "rate_eve_per_sub",
    "sample_realization",
    "secrecy_rate",
    "select_active",
    "substream",
    "sweep_ne",
    "toeplitz_channel",
    "water_fill",
    "__version__",
]
