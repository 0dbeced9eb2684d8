//! Integral curves, the weight `phi`, super-level regions, the outflow
//! boundary, the geometric observability condition and the cutoff.

pub mod boundary;
pub mod curve;
pub mod cutoff;
pub mod field;
pub mod weight;

pub use boundary::{check_geometric_condition, compute_sigma_plus, BoundaryMask, GeometricReport, Violation};
pub use curve::{trace_integral_curve, CurveExit, IntegralCurve, TraceSettings};
pub use cutoff::{build_cutoff, smoothstep, CutoffField};
pub use field::{check_spd_condition, growth_representation_error, FieldBounds, SpaceTimeField, SpdReport};
pub use weight::{
    check_dissipative, compute_phi0, make_weight, DissipativenessReport, FailurePoint, RegionMask, WeightField,
};
