"""Eigenvector moment flow: kernels, configuration spaces, generators, integration and experiments."""

from rmtlab.emf.experiments import (
    ParameterOrderError,
    algebra_suite,
    l2_decay_experiment,
    relaxation_experiment,
    replacement_check,
)
from rmtlab.emf.flow import (
    StiffnessError,
    TrajectorySource,
    commutator_norm,
    finite_speed_probe,
    integrate,
    short_long_gap,
    ultracontractivity_probe,
)
from rmtlab.emf.generators import (
    FlowState,
    a_generator,
    apply_A,
    apply_B,
    apply_L,
    apply_S,
    apply_W,
    moment_flow_generator,
)
from rmtlab.emf.kernels import KernelError, KernelSpec, bulk_set, kernel, kernel_matrix
from rmtlab.emf.lattice import AvWindow, StateSpace, av, distance, multiplicity, pi_weight

__all__ = [
    "AvWindow", "FlowState", "KernelError", "KernelSpec", "ParameterOrderError", "StateSpace",
    "StiffnessError", "TrajectorySource", "a_generator", "algebra_suite", "apply_A", "apply_B", "apply_L",
    "apply_S", "apply_W", "av", "bulk_set", "commutator_norm", "distance", "finite_speed_probe",
    "integrate", "kernel", "kernel_matrix", "l2_decay_experiment", "moment_flow_generator",
    "multiplicity", "pi_weight", "relaxation_experiment", "replacement_check", "short_long_gap",
    "ultracontractivity_probe",
]
