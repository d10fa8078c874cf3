//! Numerical toolkit for metallic and Golden Riemannian structures on flat
//! ambient space.
//!
//! The crate builds submanifolds from parsed parametric immersions with
//! exact forward-mode derivatives, decomposes constant structure operators
//! along them, measures slant angles of tangent distributions, assembles
//! second-fundamental-form data, and verifies the resulting identities by
//! seeded residual sampling. Everything is deterministic for a fixed seed;
//! sample sweeps run in parallel when the `parallel` feature (default) is
//! enabled, with bit-identical results either way.

pub mod error;
pub mod expr;
pub mod extrinsic;
pub mod immersion;
pub mod induced;
pub mod jet;
pub mod metallic;
pub mod report;
pub mod sampling;
pub mod scenario;
pub mod slant;
pub mod suite;

pub use error::{Error, Result};
pub use metallic::{metallic_number, Branch, MetallicParams, StructureOperator};
pub use report::{CheckResult, VerificationReport};
pub use sampling::SamplingPlan;
