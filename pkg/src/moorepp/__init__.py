"""Robust state-feedback pole placement with the Moore parametric form."""

from .errors import *  # noqa: F401,F403
from .system_model import (LtiSystem, SpectrumSpec, FeasibilityReport,
                           validate_system, canonicalize_spectrum,
                           assess_feasibility, load_system_file)
from .moore import (NullspaceFamily, ParameterMatrix, RealizedCandidate,
                    system_matrix, nullspace_basis, build_family, realify,
                    assemble_candidate, residual)
from .conditioning import (MetricBundle, eig_condition_numbers, condition_fro,
                           accuracy, bundle_metrics)
from .optimizer import (ObjectiveKind, ObjectiveSpec, SeedStrategy,
                        GradientMode, SearchConfig, SearchOutcome,
                        free_parameters, evaluate, gradient, solve)

from .bench import (BenchCase, BenchReport, load_byers_nash, gen_survey2,
                    improvement_indices, run_uncontrollable_suite,
                    run_mgrepp_sweep, run_suite)

__version__ = "0.1.0"
