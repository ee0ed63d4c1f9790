"""Numerical laboratory for Loewner evolution on the unit ball of C^n.

Integrates evolution families, certifies exponential squeezing and
geraumig conditions on reproducible grids, builds reparametrized, varied,
dilated, close-to-identity and evolution-to-ball chains, and checks the
sharp second-coefficient bound for maps reachable onto a ball in finite
time.
"""

__version__ = "0.1.0"

from .certify import (
    GeraumigCertificate,
    SqueezeCertificate,
    boundedness_report,
    certify_geraumig,
    certify_squeezing,
)
from .coeff import (
    BoundVerdict,
    CoefficientReport,
    functional_L102,
    perturbation_direction,
    reachability_bound_check,
    taylor_coefficient,
)
from .construct import (
    apply_variation,
    chain_from_close_to_identity,
    dilate_chain,
    evolution_to_ball_chain,
    reparam_geraumig,
    sampled_injectivity,
    starlike_truncate,
    variation_epsilon0,
)
from .evolve import (
    ChainHandle,
    EvolutionFamily,
    chain_from_field,
    identity_chain,
    integrate_evolution,
    jacobian,
    recover_chain,
    semigroup_defect,
)
from .fields import (
    BlendedField,
    ComponentwiseField,
    CustomField,
    EMatrixField,
    FieldSpec,
    LinearRadialField,
    MembershipReport,
    SlitExampleField,
    check_class_M,
    eval_field,
    local_squeeze_margin,
)
from .linalg import inverse, min_modulus, operator_norm
from .maps import PolyMap, identity_map, support_map, support_map_inverse
from .sampling import SamplingPlan

__all__ = [
    "BlendedField",
    "BoundVerdict",
    "ChainHandle",
    "CoefficientReport",
    "ComponentwiseField",
    "CustomField",
    "EMatrixField",
    "EvolutionFamily",
    "FieldSpec",
    "GeraumigCertificate",
    "LinearRadialField",
    "MembershipReport",
    "PolyMap",
    "SamplingPlan",
    "SlitExampleField",
    "SqueezeCertificate",
    "apply_variation",
    "boundedness_report",
    "certify_geraumig",
    "certify_squeezing",
    "chain_from_close_to_identity",
    "chain_from_field",
    "check_class_M",
    "dilate_chain",
    "eval_field",
    "evolution_to_ball_chain",
    "functional_L102",
    "identity_chain",
    "identity_map",
    "integrate_evolution",
    "inverse",
    "jacobian",
    "local_squeeze_margin",
    "min_modulus",
    "operator_norm",
    "perturbation_direction",
    "reachability_bound_check",
    "recover_chain",
    "reparam_geraumig",
    "sampled_injectivity",
    "semigroup_defect",
    "starlike_truncate",
    "support_map",
    "support_map_inverse",
    "taylor_coefficient",
    "variation_epsilon0",
]
