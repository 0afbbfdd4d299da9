"""Rate-function mathematics: pointwise CGF, conjugates, LDP/MDP rates."""

from .derived import (
    DerivedRate,
    beta_ldp,
    beta_ldp_rate,
    beta_mdp,
    beta_mdp_rate,
    correlation_ldp,
    correlation_ldp_rate,
    correlation_mdp,
    correlation_mdp_rate,
    derived_rate,
)
from .ldp import (
    CgfNodes,
    ConjugateResult,
    HalfspaceInfimum,
    finite_n_cgf,
    halfspace_infimum,
    integrated_cgf,
    integrated_cgf_gradient,
    ldp_conjugate,
    ldp_rate,
    ldp_rate_constant,
    legendre_numeric,
    pathwise_ldp_rate,
)
from .mdp import MdpCovariance, MdpScale, mdp_rate, mdp_sigma1, pathwise_mdp_rate
from .pointwise import (
    cgf_gradient,
    cgf_hessian,
    cgf_hessian_at_zero,
    cgf_pointwise,
    in_cone,
    in_domain,
    legendre_argmax,
    legendre_pointwise,
    recession,
)

__all__ = [
    "CgfNodes",
    "ConjugateResult",
    "DerivedRate",
    "HalfspaceInfimum",
    "MdpCovariance",
    "MdpScale",
    "beta_ldp",
    "beta_ldp_rate",
    "beta_mdp",
    "beta_mdp_rate",
    "cgf_gradient",
    "cgf_hessian",
    "cgf_hessian_at_zero",
    "cgf_pointwise",
    "correlation_ldp",
    "correlation_ldp_rate",
    "correlation_mdp",
    "correlation_mdp_rate",
    "derived_rate",
    "finite_n_cgf",
    "halfspace_infimum",
    "in_cone",
    "in_domain",
    "integrated_cgf",
    "integrated_cgf_gradient",
    "ldp_conjugate",
    "ldp_rate",
    "ldp_rate_constant",
    "legendre_argmax",
    "legendre_numeric",
    "legendre_pointwise",
    "mdp_rate",
    "mdp_sigma1",
    "pathwise_ldp_rate",
    "pathwise_mdp_rate",
    "recession",
]
