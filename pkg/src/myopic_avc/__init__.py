"""Capacity and coding simulation for arbitrarily varying channels whose
encoder observes the state through a noisy channel."""

__version__ = "0.1.0"

from .errors import (AVCError, CapacityLimitError, InfeasibleMarginalError, InfeasibleTypeError,
                     InvalidArgumentError, ValidationError)
from .prob import (Alphabet, Channel, Dist, EmpiricalType, JointDist, compose, entropy,
                   enumerate_types, is_typical, joint_type_of, marginal, mutual_information,
                   sample_channel, sample_iid, type_of)
from .strategy import StrategyTable, SystemSpec, assemble_joint, canonical_strategies, objective
from .solver import (CapacityReport, MarginalPolytope, brute_force_oracle, capacity, capacity_oblivious,
                     capacity_omniscient, feasible_z_marginals, inner_min, middle_max)
from .coding import (CodeParams, Codebook, IIDAdversary, MarginalConstrainedAdversary, MemorylessAdversary,
                     CustomAdversary, TrialRecord, build_codebook, candidate_state_types, decode, encode,
                     monte_carlo, parse_adversary, run_trial)
from .derandomize import (ConcatenatedCode, MultiCode, concatenate, decode_concat, encode_concat,
                          evaluate_multicode, sample_multicode)

__all__ = [
    "AVCError",
    "CapacityLimitError",
    "InfeasibleMarginalError",
    "InfeasibleTypeError",
    "InvalidArgumentError",
    "ValidationError",
    "Alphabet",
    "Channel",
    "Dist",
    "EmpiricalType",
    "JointDist",
    "compose",
    "entropy",
    "enumerate_types",
    "is_typical",
    "joint_type_of",
    "marginal",
    "mutual_information",
    "sample_channel",
    "sample_iid",
    "type_of",
    "StrategyTable",
    "SystemSpec",
    "assemble_joint",
    "canonical_strategies",
    "objective",
    "CapacityReport",
    "MarginalPolytope",
    "brute_force_oracle",
    "capacity",
    "capacity_oblivious",
    "capacity_omniscient",
    "feasible_z_marginals",
    "inner_min",
    "middle_max",
    "CodeParams",
    "Codebook",
    "IIDAdversary",
    "MarginalConstrainedAdversary",
    "MemorylessAdversary",
    "CustomAdversary",
    "TrialRecord",
    "build_codebook",
    "candidate_state_types",
    "decode",
    "encode",
    "monte_carlo",
    "parse_adversary",
    "run_trial",
    "ConcatenatedCode",
    "MultiCode",
    "concatenate",
    "decode_concat",
    "encode_concat",
    "evaluate_multicode",
    "sample_multicode",
]
