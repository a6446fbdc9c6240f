"""Reconstruction of 2D Helmholtz radiation fields from imaginary-part data.

The package recovers a complex-valued radiation solution of the Helmholtz
equation in the plane from samples of Im(psi) taken along a line outside the
source region: far-field coefficients are extracted from weighted samples on
two opposite rays, converted to a convergent Hankel-based expansion, and the
field is then propagated off the line. A forward scattering solver generates
synthetic near-field data tables for the same pipeline.
"""

from .specfun import (
    AsymptoticCoeffs,
    bessel_j,
    bessel_y,
    hankel1,
    j0_roots,
    hankel_asym_coeffs,
    EULER_GAMMA,
)
from .fields import (
    Multipole,
    PointSource,
    RadiationField,
    RayGeometry,
    ImSamples,
    CounterexampleReport,
    eval_field,
    farfield_oracle,
    sample_im_on_ray,
    counterexample_report,
    field_to_dict,
    field_from_dict,
)
from .karp import (
    KarpCoeffs,
    karp_from_farfield,
    farfield_from_karp,
    eval_karp,
    lommel_karp_oracle,
    karp_to_dict,
    karp_from_dict,
)
from .farfield import (
    FarFieldCoeffs,
    ExtractionSchedule,
    make_schedule,
    schedule_abscissas,
    weighted_im,
    extract_f0_two_point,
    extract_next_coeff,
    extract_sequence_extrapolated,
    extract_all,
    extract_least_squares,
    farfield_to_dict,
    farfield_from_dict,
)
from .propagate import (
    LineSpec,
    HalfPlaneSpec,
    LineTrace,
    green_kernel_normal,
    propagate_halfplane,
    karp_line_trace,
    reconstruct_from_im,
)
from .scatter import (
    PotentialGrid,
    GreenOperatorMatrix,
    green_operator_matrix,
    solve_lippmann_schwinger,
    check_reciprocity,
    plane_wave_solution,
    psi_plus_farfield,
    scattering_amplitude,
    GklReport,
    gkl_reduce,
    potential_to_dict,
    potential_from_dict,
)

__version__ = "0.1.0"

__all__ = [
    "AsymptoticCoeffs",
    "bessel_j",
    "bessel_y",
    "hankel1",
    "j0_roots",
    "hankel_asym_coeffs",
    "EULER_GAMMA",
    "Multipole",
    "PointSource",
    "RadiationField",
    "RayGeometry",
    "ImSamples",
    "CounterexampleReport",
    "eval_field",
    "farfield_oracle",
    "sample_im_on_ray",
    "counterexample_report",
    "field_to_dict",
    "field_from_dict",
    "FarFieldCoeffs",
    "ExtractionSchedule",
    "make_schedule",
    "schedule_abscissas",
    "weighted_im",
    "extract_f0_two_point",
    "extract_next_coeff",
    "extract_sequence_extrapolated",
    "extract_all",
    "extract_least_squares",
    "farfield_to_dict",
    "farfield_from_dict",
    "KarpCoeffs",
    "karp_from_farfield",
    "farfield_from_karp",
    "eval_karp",
    "lommel_karp_oracle",
    "karp_to_dict",
    "karp_from_dict",
    "LineSpec",
    "HalfPlaneSpec",
    "LineTrace",
    "green_kernel_normal",
    "propagate_halfplane",
    "karp_line_trace",
    "reconstruct_from_im",
    "PotentialGrid",
    "GreenOperatorMatrix",
    "green_operator_matrix",
    "solve_lippmann_schwinger",
    "check_reciprocity",
    "plane_wave_solution",
    "psi_plus_farfield",
    "scattering_amplitude",
    "GklReport",
    "gkl_reduce",
    "potential_to_dict",
    "potential_from_dict",
]
