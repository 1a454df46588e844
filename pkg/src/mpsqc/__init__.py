"""Compile matrix product states into nearest-neighbor quantum circuits.

The package covers the full path from a state (or classical data amplitude-
encoded as a state) to a hardware-shaped circuit: MPS algebra with gauge
control, sequential and brick-wall disentangler construction, variational
gate refinement, entanglement-driven qubit reordering, CNOT-minimal gate
decomposition, and an MPS-backed simulator for verification.
"""

from .mps import MPS, overlap
from .circuit import Circuit, Gate, cnot_metrics, lower, simulate
from .decompose import (decompose_su4, decompose_isometry_1to2,
                        prep_two_qubit_state, u_lambda_gate)
from .loader import QuanticsGrid, gaussian_amplitudes, levy_amplitudes, \
    lorenz_series, csv_stacked_amplitudes, ising_groundstate_exact
from .tci import TciStats, tci_build
from .reorder import (PermutationPlan, apply_permutation, optimize_permutation,
                      qap_cost)
from .smpd import SmpdConfig, rank2_layer, smpd_build
from .bmpd import (BmpdConfig, bmpd_build, disentangler_ansatz,
                   optimize_bond_disentangler)
from .optimize import (EnvironmentBuilder, environment, ev_update, ev_sweep,
                       euclidean_fidelity_gradient, riemannian_gradient,
                       svd_retraction, riemannian_adam, interleaved_pipeline)
from .estimators import CircuitCompiler, QubitReorderer
from .cli import (load_mps, save_mps, parse_config, run_pipeline,
                  collect_runs, pareto_front)

__all__ = [
    "MPS",
    "overlap",
    "Circuit",
    "Gate",
    "cnot_metrics",
    "lower",
    "simulate",
    "decompose_su4",
    "decompose_isometry_1to2",
    "prep_two_qubit_state",
    "u_lambda_gate",
    "QuanticsGrid",
    "gaussian_amplitudes",
    "levy_amplitudes",
    "lorenz_series",
    "csv_stacked_amplitudes",
    "ising_groundstate_exact",
    "TciStats",
    "tci_build",
    "PermutationPlan",
    "apply_permutation",
    "optimize_permutation",
    "qap_cost",
    "SmpdConfig",
    "rank2_layer",
    "smpd_build",
    "BmpdConfig",
    "bmpd_build",
    "disentangler_ansatz",
    "optimize_bond_disentangler",
]

__version__ = "0.1.0"
