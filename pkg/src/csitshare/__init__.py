"""Grassmannian CSIT sharing for interference alignment over finite backhaul.

Base stations that know only their own cross channels share the column
space of their stacked channels (a point on a Grassmann manifold) with a
central node, which aligns on the quantized subspaces and feeds quantized
precoders back.  The package simulates that pipeline end to end.
"""
from .channel import ChannelSet, SystemDims, generate_channel_set, stacked_interference_matrix
from .harness import (
    SimConfig,
    SumRateCurve,
    bits_exchanged,
    dof_slope,
    per_user_rate,
    run_experiment,
    sum_rate,
)
from .ia import (
    IaSolution,
    ia_feasible,
    leakage_decomposition,
    leakage_power,
    rotation_equivalence_check,
    solve_ia,
    total_precoder,
)
from .linalg import (
    chordal_distance,
    haar_truncated_unitary,
    orthonormal_complement,
    qr_orthonormal_factor,
)
from .perturbation import moment_bounds, perturb, perturbation_params, sample_squared_error
from .quantizer import bit_scaling, build_rvq_codebook, grassmann_real_dimension, quantize

__version__ = "0.1.0"
