"""Measures on hereditary classes of finite relational structures.

The library enumerates the minimal marked structures of a class, builds the
linear and quadratic relation system their measure values satisfy, and
solves it over restricted integer or prime field coefficients.
"""

from .amalgamation import (
    AmalgamationDiagram,
    NotAMemberError,
    ScanReport,
    SeparationQuery,
    amalgamation_property_scan,
    count_amalgamations,
    enumerate_amalgamations,
    is_separated,
    iter_amalgamations,
    oddness_scan,
    self_pair_class_count,
    strong_amalgamation_scan,
)
from .marked import (
    FmmCertificate,
    MarkedStructure,
    MinimalMarkedClass,
    enumerate_minimal_marked,
    fmm_certificate,
    is_extraneous,
    reduce,
)
from .measures import (
    BoundReport,
    DomainValidityError,
    IncompleteMinimalMarkedError,
    LinearRelation,
    MeasureAssignment,
    PreconditionError,
    PrimeField,
    QuadraticRelation,
    RelationSystem,
    RestrictedIntegers,
    VerificationReport,
    build_relation_system,
    count_measures,
    domain_from_name,
    evaluate_embedding,
    export_relations,
    regular_filter,
    sign_measure,
    solve,
    validate_domain,
    verify_assignment,
)
from .structures import (
    AutCheckReport,
    CanonicalStructure,
    ClassDefinition,
    ClassFileError,
    Embedding,
    FraisseError,
    Signature,
    SignatureMismatchError,
    Structure,
    aut_check,
    canonical_form,
    class_from_dict,
    colored,
    colored_linear_orders,
    embeddings,
    enumerate_structures,
    finite_sets,
    is_member,
    join,
    linear_orders,
    load_class_file,
    one_point_extensions,
    s_permutations,
    structure_from_dict,
)

__version__ = "0.1.0"

__all__ = [
    "AmalgamationDiagram",
    "AutCheckReport",
    "BoundReport",
    "CanonicalStructure",
    "ClassDefinition",
    "ClassFileError",
    "DomainValidityError",
    "Embedding",
    "FmmCertificate",
    "FraisseError",
    "IncompleteMinimalMarkedError",
    "LinearRelation",
    "MarkedStructure",
    "MeasureAssignment",
    "MinimalMarkedClass",
    "NotAMemberError",
    "PreconditionError",
    "PrimeField",
    "QuadraticRelation",
    "RelationSystem",
    "RestrictedIntegers",
    "ScanReport",
    "SeparationQuery",
    "Signature",
    "SignatureMismatchError",
    "Structure",
    "VerificationReport",
    "amalgamation_property_scan",
    "aut_check",
    "build_relation_system",
    "canonical_form",
    "class_from_dict",
    "colored",
    "colored_linear_orders",
    "count_amalgamations",
    "count_measures",
    "domain_from_name",
    "embeddings",
    "enumerate_amalgamations",
    "enumerate_minimal_marked",
    "enumerate_structures",
    "evaluate_embedding",
    "export_relations",
    "finite_sets",
    "fmm_certificate",
    "is_extraneous",
    "is_member",
    "is_separated",
    "iter_amalgamations",
    "join",
    "linear_orders",
    "load_class_file",
    "oddness_scan",
    "one_point_extensions",
    "reduce",
    "regular_filter",
    "s_permutations",
    "self_pair_class_count",
    "sign_measure",
    "solve",
    "structure_from_dict",
    "validate_domain",
    "verify_assignment",
]
