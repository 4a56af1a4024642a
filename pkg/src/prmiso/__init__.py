"""Polarization-reconfigurable MISO alignment: channel model, pilots, LS and learned baselines."""

from .baselines import (AlignmentSolution, ChannelEstimate, DegenerateInputError,
                        brute_force_polarization, first_estimate_then_optimize,
                        ls_estimate_downlink, ls_estimate_uplink, optimize_polarization_iterative,
                        phase_matched_beamformer, random_baseline)
from .channel import (NoiseSpec, PolarizationConfig, achievable_rate, beamforming_gain,
                      block_diag_pol, effective_channel, pol_vector, sample_channel)
from .numerics import ContractError, DomainError, RngStream, solve_min_norm_ls
from .pilots import (PilotCodebook, RandomizationPolicy, flatten_for_dnn, run_downlink_frame,
                     run_uplink_frame)

__version__ = "0.1.0"
