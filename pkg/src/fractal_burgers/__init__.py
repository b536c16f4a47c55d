"""Source solutions of the critical fractal Burgers equation and their comparison with the stable kernel."""

from .convolution import KernelTail, grad_stable_convolve, stable_convolve
from .errors import (ConvergenceError, DomainError, FractalBurgersError, MassAnomaly, ProfileFormatError,
                     QuadratureError, StepRejected, WrapAroundError)
from .functionals import (FunctionalParams, LemmaReport, H_kernel, HH_composition, Htilde_kernel, ball_mass_bracket,
                          closed_form_C2, h_functionals, hh_bracket, tech_bracket, tech_integral, verify_C2)
from .grid import Grid1D, Profile
from .kernel import KernelParams, ball_mass, density, envelope, gradient, radial_profile
from .quadrature import QuadratureSpec, integrate, singular_quad
from .solver import (SolverConfig, duhamel_residual, evolve_spectral, evolve_spectral_extrapolated,
                     picard_solve)
from .verify import (LowerBoundReport, ProofReplayReport, RatioReport, decay_check, estimate_C1,
                     gradient_bound_check, lower_bound_replay, lp_scaling, proof_replay, ratio_report,
                     self_similarity_error)

__version__ = "0.1.0"
