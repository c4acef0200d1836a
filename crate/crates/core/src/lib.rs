//! Numerical laboratory for asymptotic linking numbers and the cross-helicity
//! (Hopf invariant) of divergence-free vector fields on ℝ³.
//!
//! The pipeline: [`fields`] builds exactly solenoidal flux-tube fields,
//! [`flow`] integrates their flow lines, [`linking`] closes flow arcs with
//! straight short paths and evaluates linking numbers two independent ways,
//! and [`ergodic`] turns those into time-averaged linking estimates and
//! compares them against the helicity integral.

pub mod cli;
pub mod config;
pub mod ergodic;
pub mod error;
pub mod fields;
pub mod flow;
pub mod geometry;
pub mod linking;
pub mod par;
pub mod quadrature;
pub mod vec3;

pub use error::{Error, Result};
pub use fields::{make_hopf_pair, Aabb, FieldSpec, TubeSpec};
pub use flow::{integrate, StepControl, Trajectory};
pub use vec3::Vec3;
