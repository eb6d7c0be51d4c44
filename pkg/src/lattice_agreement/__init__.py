"""Bounded lattice agreement: quasi-metric lattices, reconciliation protocols
and a Monte Carlo model of asynchronous reconciliation."""

from .agreement import (
    AgreementInstance,
    ComplianceReport,
    InstanceReport,
    check_instance,
    compliance_report,
)
from .checks import (
    Violation,
    bowtie,
    check_normality,
    compute_D,
    compute_Dprime,
    compute_gamma,
    compute_M,
    gamma_normal_fastpath,
    verify_lattice,
    verify_quasi_metric,
)
from .lattice import (
    FiniteLattice,
    IncomparableError,
    LatticeError,
    LatticeTooLarge,
    QuasiMetric,
    build_space,
    chain_space,
    nonnormal_chain_space,
    powerset_space,
    table_chain_space,
    vector_clock_space,
)

__version__ = "0.1.0"

__all__ = [
    "AgreementInstance",
    "ComplianceReport",
    "FiniteLattice",
    "IncomparableError",
    "InstanceReport",
    "LatticeError",
    "LatticeTooLarge",
    "QuasiMetric",
    "Violation",
    "bowtie",
    "build_space",
    "chain_space",
    "check_instance",
    "check_normality",
    "compliance_report",
    "compute_D",
    "compute_Dprime",
    "compute_M",
    "compute_gamma",
    "gamma_normal_fastpath",
    "nonnormal_chain_space",
    "powerset_space",
    "table_chain_space",
    "vector_clock_space",
    "verify_lattice",
    "verify_quasi_metric",
]
