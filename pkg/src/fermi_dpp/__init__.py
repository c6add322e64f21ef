"""Determinantal and Pfaffian point processes sampled through fermionic Givens circuits."""
from .numerics import GivensRotation, pfaffian, hermitian_eig
from .kernels import (
    DppKernel,
    PfaffianKernel,
    ProjectionFactor,
    SMatrix,
    ThermalSpec,
    validate_dpp_kernel,
)
from .qr_engine import (
    CouplingGraph,
    RotationSchedule,
    schedule_graph_constrained,
    schedule_log_depth,
    schedule_sameh_kuck,
    verify_schedule,
)
from .bogoliubov import BdGHamiltonian, diagonalize_bdg, factorize_particle_hole
from .circuit import Circuit, compile_pfpp_circuit, compile_projection_circuit, export_qasm
from .fock_simulator import FockState, run_circuit, exact_distribution, sample_occupations

__all__ = [
    "GivensRotation", "pfaffian", "hermitian_eig",
    "DppKernel", "PfaffianKernel", "ProjectionFactor", "SMatrix", "ThermalSpec", "validate_dpp_kernel",
    "CouplingGraph", "RotationSchedule", "schedule_graph_constrained", "schedule_log_depth",
    "schedule_sameh_kuck", "verify_schedule",
    "BdGHamiltonian", "diagonalize_bdg", "factorize_particle_hole",
    "Circuit", "compile_pfpp_circuit", "compile_projection_circuit", "export_qasm",
    "FockState", "run_circuit", "exact_distribution", "sample_occupations",
]
