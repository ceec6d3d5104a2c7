//! Parametric machine geometry, design vector, control-point offsets and
//! geometric constraints.

pub mod design;
pub mod jacobian;
pub mod lattice;
pub mod offsets;
pub mod params;
pub mod template;

pub use design::{clearance_constraints, surface_radius, DesignSpace, DesignVector, NUM_CONSTRAINTS};
pub use jacobian::{
    control_point_jacobian, control_point_jacobians, difference_quotient, ParameterDerivative,
};
pub use offsets::{apply_offsets, smoothness_and_gradient, ControlPointOffsets};
pub use params::{FixedParameter, Parameter, ParameterSet, Unit, NUM_FREE};
pub use template::{build_geometry, GeometryOptions, MachineGeometry};
