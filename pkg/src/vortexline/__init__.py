"""Abelian vortices on flat tori: a desk-scale moduli laboratory.

Three layers, each checkable against the next:

  * surface / vortex: pseudo-spectral calculus on flat tori and a Newton
    solver for the reduced vortex equation, with analytically regularized
    core data;
  * moduli: Coulomb-gauge tangent lifts and the L2 Kahler form evaluated
    from its gauge-theoretic definition, plus the core-expansion route for
    degree > 1, volumes and the coupling derivative;
  * cohomology / symmetric_oracle: exact rational-times-pi intersection
    calculus on symmetric products producing the predictions the numerics
    are compared with, certified against a brute-force tensor oracle.

The vortexline CLI drives batch experiments from TOML configs.
"""

from .surface import (
    GridField,
    PointOnTorus,
    TorusGeometry,
    constant_field,
    field_from_function,
    greens_function,
    integrate,
    laplacian_apply,
    make_torus,
    poisson_solve,
    spectral_gradient,
    torus_point,
)
from .vortex import (
    BradlowError,
    ConvergenceError,
    DegenerateSolution,
    Divisor,
    ResidualReport,
    TaubesSolution,
    VortexParams,
    bradlow_limit,
    bradlow_margin,
    curvature_field,
    density_field,
    divisor,
    singular_background,
    solve_taubes,
    verify_solution,
    vortex_params,
)
from .moduli import (
    HorizontalLift,
    KahlerMatrix,
    SamolsData,
    connection_one_form,
    dh_slope,
    evaluate_sigma,
    gauge_direction,
    green_psi,
    moduli_stencil,
    one_vortex_volume,
    rotate_lift,
    samols_coefficients,
    samols_form,
    translation_lift,
)
from .cohomology import (
    CohClass,
    IntegralValue,
    PiPolynomial,
    chern_vertical,
    cup,
    dh_slope_class,
    eta,
    family_class,
    integrate_top,
    one_two_bracket_identities,
    parse_pi_rational,
    predicted_volume,
    theta,
    vortex_class,
)
from .storage import load_solution, save_solution

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # surface
    "TorusGeometry",
    "GridField",
    "PointOnTorus",
    "make_torus",
    "torus_point",
    "constant_field",
    "field_from_function",
    "integrate",
    "spectral_gradient",
    "laplacian_apply",
    "poisson_solve",
    "greens_function",
    # vortex
    "Divisor",
    "VortexParams",
    "TaubesSolution",
    "DegenerateSolution",
    "ResidualReport",
    "BradlowError",
    "ConvergenceError",
    "divisor",
    "vortex_params",
    "bradlow_margin",
    "bradlow_limit",
    "singular_background",
    "solve_taubes",
    "density_field",
    "curvature_field",
    "verify_solution",
    # moduli
    "HorizontalLift",
    "KahlerMatrix",
    "SamolsData",
    "green_psi",
    "connection_one_form",
    "translation_lift",
    "gauge_direction",
    "rotate_lift",
    "evaluate_sigma",
    "samols_coefficients",
    "moduli_stencil",
    "samols_form",
    "one_vortex_volume",
    "dh_slope",
    # cohomology
    "PiPolynomial",
    "CohClass",
    "IntegralValue",
    "parse_pi_rational",
    "eta",
    "theta",
    "cup",
    "integrate_top",
    "vortex_class",
    "predicted_volume",
    "one_two_bracket_identities",
    "family_class",
    "chern_vertical",
    "dh_slope_class",
    # storage
    "save_solution",
    "load_solution",
]
