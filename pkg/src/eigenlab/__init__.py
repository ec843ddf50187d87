"""eigenlab: a desk-scale numerical laboratory for concentration of
Laplace eigenfunctions on the round sphere and the flat torus."""

from .eigenfunctions import (
    Eigenfunction,
    LatticeShell,
    evaluate,
    evaluate_batch,
    highest_weight,
    highest_weight_constant,
    lambda_of_degree,
    lattice_shell,
    random_harmonic,
    reconstruct,
    torus_eigenfunction,
    zonal,
)
from .errors import (
    CheckFailure,
    ConvergenceError,
    EigenlabError,
    ResourceLimitError,
    UsageError,
)
from .geometry import (
    Geodesic,
    GeodesicBall,
    QuadratureGrid,
    Tube,
    family_layout,
    geodesic_distance,
    geodesic_family,
    distance_to_geodesic,
    sphere_point,
    sphere_quadrature,
    torus_point,
    torus_quadrature,
)
from .norms import (
    NormReport,
    SearchResult,
    ball_mass,
    kn_norm,
    lp_norm,
    restriction_norm,
    sup_ball_mass,
    sup_norm,
    sup_restriction_norm,
    tube_mass,
)
from .nodal import (
    LevelBandMeasure,
    NodalEstimate,
    level_band_volume,
    nodal_length,
)
from .scaling import (
    InequalityCheck,
    ScalingFit,
    ScarWitness,
    SweepConfig,
    SweepRow,
    SweepTable,
    check_inequality,
    check_requirements,
    critical_exponent,
    fit_exponent,
    fit_table,
    reference_exponent,
    run_sweep,
    scar_witness,
    sigma,
)

__version__ = "0.1.0"
