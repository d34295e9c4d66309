//! Kaluza-Klein geometry of tangent bundles: covariant calculus on round
//! spheres and tori, Kaluza-Klein metric profiles, the tension field of a
//! vector field viewed as a map into the tangent bundle, profile
//! construction for the explicit harmonic sections, and energy checks.

pub mod energy;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod kk;
pub mod profile;
pub mod rng;
pub mod solver;
pub mod tension;

pub use error::{Error, Result};
pub use fields::{axis_info, closed_form_oracle, AxisInfo, FieldSpec};
pub use geometry::{FieldCalculus, Manifold, Matrix, PointTangent, Vector};
pub use kk::KkMetricSpec;
pub use profile::ScalarProfile;
pub use tension::{tension, TensionResult};

