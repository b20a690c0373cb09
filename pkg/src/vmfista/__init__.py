"""Variable-metric inexact accelerated forward-backward solver with adaptive
backtracking, plus a TV-regularized Poisson image restoration harness."""

from .exceptions import (BacktrackingError, ConfigError, InnerSolverError,
                         NonFiniteObjectiveError, SolverError, VmfistaError)
from .metrics import (BoxSet, ConstantMetricStrategy, DiagonalMetric,
                      IdentityMetricStrategy, MetricStrategy,
                      SplitGradientStrategy, SqueezeSchedule,
                      check_metric_chain, d_inner, d_norm_sq, gamma_threshold,
                      scaled_project_box, split_gradient_metric)
from .prox import (BoxIndicator, BoxPlusQuadratic, IsotropicNormSum,
                   L1Penalty, ProxResult, StructuredNonsmooth, ZeroFunction,
                   dual_value, inexact_prox, perturbed_scaled_prox,
                   primal_from_dual, primal_value)
from .problems import (ConvolutionOperator, GradientOp, KLTVDeblur,
                       WeightedL2Denoise, build_kl_metric, build_wl2_metric,
                       convolve, convolve_adjoint, div_adjoint, gaussian_psf,
                       grad_op, tv_value)
from .solver import (CompositeProblem, EpsilonSchedule, SmoothPart,
                     SolveResult, SolverConfig, SolverState, TraceRecord,
                     backtracking_condition, compute_beta, inertial_point,
                     rate_certificate, solve, step, update_q, update_t)
from .datagen import (ExperimentSpec, build_ground_truth, make_experiment,
                      phantom_blobs, phantom_piecewise, read_pgm,
                      reference_solution, simulate_acquisition, write_pgm)

__version__ = "0.1.0"
