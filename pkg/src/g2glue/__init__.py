"""Desk-scale calculus for gluing torsion-free G2-structures over a
cylindrical neck, together with the matched-pair cohomology diagram engine.
"""

__version__ = "0.1.0"

from .forms import (  # noqa: F401
    KForm6,
    KForm7,
    Metric7,
    NotStable,
    Omega0,
    assemble_cylindrical,
    gram_from_3form,
    hodge_star,
    is_g2_form,
    metric_from_3form,
    omega0,
    phi0,
    split_cylindrical,
    su3_tangent_residual,
)
from .fields import (  # noqa: F401
    CylStructure,
    NoDecay,
    NoLimit,
    SpectralForm,
    TGrid,
    codifferential,
    decompose_cyl,
    estimate_decay_rate,
    exterior_d,
    harmonic_project,
    inner_l2,
    norm_l2,
    norm_sup,
)
from .gluing import (  # noqa: F401
    CutoffSpec,
    Diverged,
    GluedField,
    GluingReport,
    MismatchedLimits,
    NeckTooShort,
    NotClosed,
    TorsionMeasure,
    closed_perturbation_structure,
    estimate_L0,
    eta_correction,
    fit_torsion_slope,
    flat_structure,
    glue_fields,
    induced_4form,
    integral_to_infinity,
    modulated_shear_structure,
    sheared_structure,
    sweep_reports,
    torsion_reduce,
    torsion_residual,
)
from .cohomology import (  # noqa: F401
    B1NotZero,
    BoundaryMembership,
    DegreeBlock,
    DerivativeModel,
    DiagramReport,
    HarmonicPair,
    InconsistentTargets,
    SingularBoundary,
    Subspaces,
    SumDiagram,
    boundary_class_check,
    derivative_model,
    diagram_from_json,
    diagram_to_json,
    gluing_matrix,
    load_diagram,
    product_diagram,
    sample_pair,
    save_diagram,
    shift_C,
    singular_levels,
    subspaces,
    synth_diagram,
    validate_C,
    validate_diagram,
    yh_exact,
    yh_full,
)
