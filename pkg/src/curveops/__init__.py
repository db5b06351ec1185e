"""curveops: theta kernels, commuting operator families, and tame symbols
on curves of genus 0, 1, 2."""

from . import errors
from .curve import (
    INFINITY,
    CurvePoint,
    EllipticCurve,
    HyperellipticCurve,
    RationalCurve,
    abel_map,
    curve_from_spec,
    holomorphic_differentials,
    period_matrix,
    r_a,
    riemann_constants,
    zeta_primitive,
)
from .jets import Jet, derivative, jet_arith, seed_vector
from .kernels import (
    Divisor,
    KernelField,
    TwistVector,
    a_coeffs,
    a_cycle_integral,
    connection_D,
    diagonal_series,
    green,
    green_twisted,
    green_twisted_Q,
    omega_quadratic,
    omega_tilde,
    period_variation,
    phi_and_glambda,
)
from .operators import (
    CorrelationForm,
    KZBConfig,
    apply_Tz,
    apply_Tz_n0,
    apply_Tz_rational,
    apply_ftilde,
    basis_sections,
    commutator_norm,
    kzb_coordinate_variation,
    kzb_point_variation,
    make_theta_test_form,
    pole_order_check,
    twisted_functions,
)
from .theta import (
    PeriodMatrix,
    ThetaCharacteristic,
    theta,
    theta1,
    theta1_jet,
    theta_gradient,
    theta_jet,
)

__all__ = [
    "errors",
    "Jet",
    "jet_arith",
    "derivative",
    "seed_vector",
    "RationalCurve",
    "EllipticCurve",
    "HyperellipticCurve",
    "CurvePoint",
    "INFINITY",
    "curve_from_spec",
    "holomorphic_differentials",
    "period_matrix",
    "abel_map",
    "riemann_constants",
    "r_a",
    "zeta_primitive",
    "PeriodMatrix",
    "ThetaCharacteristic",
    "theta",
    "theta_jet",
    "theta_gradient",
    "theta1",
    "theta1_jet",
    "Divisor",
    "KernelField",
    "TwistVector",
    "green",
    "green_twisted",
    "green_twisted_Q",
    "omega_tilde",
    "omega_quadratic",
    "phi_and_glambda",
    "connection_D",
    "diagonal_series",
    "a_coeffs",
    "a_cycle_integral",
    "period_variation",
    "CorrelationForm",
    "KZBConfig",
    "apply_Tz",
    "apply_Tz_n0",
    "apply_Tz_rational",
    "apply_ftilde",
    "basis_sections",
    "twisted_functions",
    "commutator_norm",
    "pole_order_check",
    "kzb_point_variation",
    "kzb_coordinate_variation",
    "make_theta_test_form",
]
__version__ = "0.1.0"
