"""QUBO models of the Hamiltonian cycle and travelling salesman problems, with classical solvers.

Typical use::

    from qubo_forge import load_graph, build_M_TSP, PenaltyConfig, simulated_anneal
    g = load_graph("burma14.tsp")
    m = build_M_TSP(g, PenaltyConfig(), normalize=True)
    report = simulated_anneal(m, graph=g)
"""
from ._kernels import BACKEND
from .errors import (
    ContractError,
    DegenerateNormalizationError,
    EdgeViolationError,
    LimitExceededError,
    ParseError,
    QuboForgeError,
    StructuralError,
    UnsupportedFormatError,
)
from .graph import EdgeCensus, Graph, edge_census, load_graph, parse_hcp, parse_tsplib
from .normalize import NormalizationStats, min_max_normalize
from .qubo import (
    ConstraintCensus,
    PenaltyConfig,
    QuboMatrix,
    build_M_Ec,
    build_M_HCP,
    build_M_pv,
    build_M_TSP,
    build_M_vp,
    build_M_W,
    census,
    census_expected,
    energy,
    from_json,
    from_qbsolv,
    to_json,
    to_qbsolv,
)
from .solve import (
    AnnealSchedule,
    GroundState,
    SolveReport,
    TspOptimum,
    exact_ground_state,
    oracle_hcp,
    oracle_tsp,
    simulated_anneal,
)
from .tour import Tour, ValidityReport, check, decode, encode, tour_cost

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ContractError",
    "DegenerateNormalizationError",
    "EdgeViolationError",
    "LimitExceededError",
    "ParseError",
    "QuboForgeError",
    "StructuralError",
    "UnsupportedFormatError",
    "EdgeCensus",
    "Graph",
    "edge_census",
    "load_graph",
    "parse_hcp",
    "parse_tsplib",
    "NormalizationStats",
    "min_max_normalize",
    "ConstraintCensus",
    "PenaltyConfig",
    "QuboMatrix",
    "build_M_Ec",
    "build_M_HCP",
    "build_M_pv",
    "build_M_TSP",
    "build_M_vp",
    "build_M_W",
    "census",
    "census_expected",
    "energy",
    "from_json",
    "from_qbsolv",
    "to_json",
    "to_qbsolv",
    "AnnealSchedule",
    "GroundState",
    "SolveReport",
    "TspOptimum",
    "exact_ground_state",
    "oracle_hcp",
    "oracle_tsp",
    "simulated_anneal",
    "Tour",
    "ValidityReport",
    "check",
    "decode",
    "encode",
    "tour_cost",
]
