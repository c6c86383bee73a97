"""momentflow: moment-map descent flows on compact matrix Lie algebras.

Numerical playground for Ad-invariant convex energies of the moment map on
products of projective spaces: descent flows with Kempf-Ness monitoring,
spectral decomposition of the stabilizer at critical points, moment-type
invariants, extremal vector fields, and Legendre-dual functionals over
finite measures.  Command-line entry point: ``mforge``.
"""

from .errors import (ConfigError, ConvergenceError, CriticalityError,
                     DomainError, EmptyStabilizerError, MomentflowError,
                     RankDeficientError, TransportError, ValidationError)
from .lie_core import (AlgebraDescriptor, ComplexLieElement, DualElement,
                       GroupElement, LieElement, adjoint, bracket,
                       coadjoint, coadjoint_inf, coefficients, exponential,
                       from_coefficients, herm_inner, identity_group, norm,
                       orthonormal_basis, pair, pair_complex,
                       random_complex_element, random_dual_element,
                       random_lie_element, random_unitary,
                       sample_group_elements)
from .invariant_convex import (ConvexInvariantFunction, IndefiniteSplit,
                               QuadraticKilling, SpectralFunction,
                               function_from_name, gradient_inverse,
                               hess_inner, legendre_value, scalar_from_name,
                               verify_convex_identities)
from .phase_space import (PhasePoint, PhaseSpace, ProductSpace,
                          ProjectivePower, ProjectiveSpace, TangentVector,
                          phase_distance, space_from_config)
from .flow_engine import (FlowSample, FlowTrace, StepControl,
                          dissipation_check, flow_consistency, gradient_flow,
                          group_flow, kempf_ness_monitor)
from .critical_structure import (CalabiDecomposition, calabi_decomposition,
                                 convexity_counterexample, critical_check,
                                 extremal_field, extremal_field_transport,
                                 mu_invariant, mu_invariant_constancy,
                                 stabilizer_condition)
from .measure_functionals import (DiscreteMeasure, ScalarConvex, ScalarPair,
                                  TianZhuReport, d_functional, d_gradient,
                                  d_hessian, fenchel_young_defect,
                                  legendre_functional, normalize_phi,
                                  normalize_theta, quadratic_pair,
                                  soliton_pair, tian_zhu_check)

__version__ = "0.1.0"

__all__ = [
    "AlgebraDescriptor", "LieElement", "DualElement", "ComplexLieElement",
    "GroupElement", "pair", "pair_complex", "herm_inner", "norm", "bracket",
    "adjoint", "coadjoint", "coadjoint_inf", "exponential",
    "orthonormal_basis", "coefficients", "from_coefficients",
    "identity_group", "random_lie_element", "random_dual_element",
    "random_complex_element", "random_unitary", "sample_group_elements",
    "ConvexInvariantFunction", "QuadraticKilling", "SpectralFunction",
    "IndefiniteSplit", "function_from_name", "scalar_from_name",
    "hess_inner", "gradient_inverse", "legendre_value",
    "verify_convex_identities",
    "PhasePoint", "TangentVector", "PhaseSpace", "ProjectiveSpace",
    "ProjectivePower", "ProductSpace", "phase_distance", "space_from_config",
    "StepControl", "FlowSample", "FlowTrace", "gradient_flow", "group_flow",
    "flow_consistency", "kempf_ness_monitor", "dissipation_check",
    "critical_check", "CalabiDecomposition", "calabi_decomposition",
    "convexity_counterexample", "mu_invariant", "mu_invariant_constancy",
    "extremal_field", "extremal_field_transport", "stabilizer_condition",
    "DiscreteMeasure", "ScalarConvex", "ScalarPair", "soliton_pair",
    "quadratic_pair", "d_functional", "d_gradient", "d_hessian",
    "legendre_functional", "fenchel_young_defect", "normalize_phi",
    "normalize_theta", "TianZhuReport", "tian_zhu_check",
    "MomentflowError", "ValidationError", "DomainError", "ConfigError",
    "ConvergenceError", "RankDeficientError", "EmptyStabilizerError",
    "CriticalityError", "TransportError",
    "__version__",
]
