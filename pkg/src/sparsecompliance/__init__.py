"""Compliance measures and recovery certificates for sparse models."""
from .cones import (ComplianceReport, estimate_A_nonuniform, estimate_A_uniform,
                    in_descent_set, in_model_descent_cone, model_cone_contains, sample_sphere)
from .errors import (BudgetExceededError, CertificateError, ComplianceError,
                     DimensionMismatchError, InfeasibleError, SolverStallError, SpanError,
                     UnboundedError, ZeroVectorError)
from .experiments import ExperimentConfig, parse_regularizer
from .lp import linprog, simplex
from .model import AtomSet, SparseModel, project_support, sample_atoms, top_support
from .recovery import (Certificate, RecoveryInstance, nonuniform_certificate, nsp_certificate,
                       phase_transition, solve)
from .regularizers import L1, FiniteAtomic, FunctionRegularizer, KSupport, Regularizer, WeightedL1
from .rip import (FunctionalResult, RipResult, SandwichReport, b_sigma, d_sigma, delta_nec,
                  rip_constant, rip_projector, verify_sandwich)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
