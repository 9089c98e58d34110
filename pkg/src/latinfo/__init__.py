"""Higher-order information measures indexed by the partition lattice."""

from .divergence import (
    DivergenceEstimate,
    EstimatorConfig,
    EstimatorError,
    GaussianSpec,
    estimate_tsallis_knn,
    kl_gaussian,
    tsallis_gaussian,
)
from .lattice import (
    LatticeError,
    PartitionLattice,
    SetPartition,
    bell_number,
    build_lattice,
    enumerate_partitions,
    lancaster_partitions,
    mobius_interval,
    refines,
)
from .measures import (
    EmpiricalSession,
    MeasureReport,
    TermPlan,
    emergence_scan,
    estimation_cost,
    generalized_si,
    interaction_information_gaussian,
    lancaster_information,
    measure_report,
    plan_terms,
    rank_transform,
    select_features,
    streitberg_information,
    total_correlation,
)
from .synth import (
    DataError,
    SampleMatrix,
    copy_gate,
    sample_gaussian,
    sigma_family,
    table1_dataset,
    xor_gate,
)

__version__ = "0.1.0"

__all__ = [
    "DataError",
    "DivergenceEstimate",
    "EmpiricalSession",
    "EstimatorConfig",
    "EstimatorError",
    "GaussianSpec",
    "LatticeError",
    "MeasureReport",
    "PartitionLattice",
    "SampleMatrix",
    "SetPartition",
    "TermPlan",
    "bell_number",
    "build_lattice",
    "copy_gate",
    "emergence_scan",
    "enumerate_partitions",
    "estimate_tsallis_knn",
    "estimation_cost",
    "generalized_si",
    "interaction_information_gaussian",
    "kl_gaussian",
    "lancaster_information",
    "lancaster_partitions",
    "measure_report",
    "mobius_interval",
    "plan_terms",
    "rank_transform",
    "refines",
    "sample_gaussian",
    "select_features",
    "sigma_family",
    "streitberg_information",
    "table1_dataset",
    "total_correlation",
    "tsallis_gaussian",
    "xor_gate",
]
