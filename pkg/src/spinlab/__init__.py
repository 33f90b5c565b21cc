"""Phases, moments, and hardness gadgets of antiferromagnetic multi-spin
systems on random Delta-regular bipartite graphs.

The package is organized around the pipeline: classify an interaction
matrix (models), find the tree-recursion fixpoints and their stability
(recursion, phases), evaluate the first/second-moment exponents and the
matrix norms that bound them (moments), enumerate small graphs exactly to
corroborate the formulas (graphs), and build the Max-Cut reduction gadgets
(reduction). The `spinlab` console script exposes every step.
"""

from .errors import (BudgetExceededError, CollapseError, ConvergenceError,
                     DomainError, InfeasibleError, ModelError, RegimeError,
                     SpinLabError, StructureError)
from .models import (SpinModel, classify_signature, colorings_model,
                     model_from_json, perron_decompose, potts_model)
from .recursion import (Fixpoint, bp_step, find_fixpoint,
                        find_fixpoints_multistart, fixpoint_to_phase,
                        jacobian_report)
from .moments import (induced_norm, max_psi1, optimal_x, psi1,
                      psi1_hessian_attractive, psi2_at_dominant,
                      verify_tensor_identity)
from .phases import (dominant_phases, ising_phases, phi_bar, potts_diagram,
                     potts_threshold, solve_half_half)
from .graphs import (BipartiteRegularGraph, Footprint, all_graphs,
                     conditioned_partition, exact_partition,
                     expected_Z_formula, expected_Z2_formula, gadget_check,
                     partition_by_footprint, read_graph, sample_graph,
                     ssc_constants, ssc_w, write_graph)
from .reduction import (build_HF, build_J1, build_J2, check_hf, dp_max_lwt,
                        negdef_certificate, phase_set, reduce_maxcut)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
