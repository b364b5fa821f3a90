"""Fractional Crank-Nicolson time stepping for subdiffusion with P1 finite
elements, reference solutions, and convergence-study tooling."""
from .cq_symbols import (CqWeights, SymbolError, be_cq_weights, beta_tau, certify_sector_mapping,
                         certify_symbol_bounds, mu, mu0, scalar_kernel_error)
from .fem import (FemSpace, GridFunction, build_interval_space, build_square_space, interpolate,
                  l2_norm, l2_project, load_vector, ritz_project)
from .harness import (ErrorTable, StudySpec, emit_csv, estimate_rate, run_convergence_study,
                      run_scalar_study, run_time_decay_study)
from .oracles import (catalog, fine_step_reference, mittag_leffler, ode_power_solution)
from .stepper import (SchemeConfig, SourceSampler, Trajectory, advance, advance_scalar,
                      history_convolution)

__version__ = "0.1.0"
