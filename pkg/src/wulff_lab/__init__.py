"""Anisotropic surface-energy minimizers and curvature-deficit experiments.

The package builds minimizer shapes from elliptic surface-energy densities,
measures anisotropy-weighted curvature on discrete closed hypersurfaces
(curves in the plane, surfaces in space), and runs reproducible sweeps that
check rigidity, stability, and closeness inequalities numerically.
"""

from .errors import (
    ConfigError,
    ConvexityError,
    EmbeddingError,
    PreconditionError,
    WulffLabError,
)
from .grids import circular_harmonic, make_grid
from .integrand import (
    ConstantOne,
    EllipticIntegrand,
    ModePerturbation,
    QuadraticForm,
    TabulatedIntegrand,
    WulffShape,
    build_wulff,
    integrand_from_spec,
)
from .surface import (
    AnisoCurvature,
    DiscreteHypersurface,
    ExplicitChart,
    SphereRadialChart,
    TensorField,
    WulffGraphChart,
    aniso_shape_operator,
    build_surface,
    codazzi_residual,
    convexity_check,
    det_identity_residual,
    hausdorff_distance,
    lp_norm,
    nodal_mode_field,
    oscillation_minimum,
    rescale_to_perimeter,
    surface_from_spec,
    w2p_norm,
)
from .stability import (
    CenterResult,
    KernelBasis,
    KernelOffset,
    StabilityOperator,
    best_kernel_offset,
    centering_map,
    expansion_check,
    find_center,
    harmonic_basis,
    linearization_residual,
    reparametrize_over_wulff,
)
from .deficit import (
    StarBody,
    aniso_perimeter,
    asymmetry_index,
    asymmetry_misfit,
    body_from_surface,
    isoperimetric_deficit,
    symmetric_difference_volume,
    wulff_star_body,
)
from .harness import (
    ExperimentConfig,
    ExperimentResult,
    c1_closeness_check,
    fit_constant,
    run_experiment,
)

__version__ = "0.1.0"
