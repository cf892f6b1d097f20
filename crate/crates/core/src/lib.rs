//! Numerical toolkit for OT-FKM focal submanifolds `M₊ ⊂ S^{2l-1}`.
//!
//! The crate builds symmetric Clifford systems, samples and frames points of
//! the focal submanifold, evaluates its second fundamental form and curvature
//! tensors in closed form and by finite differences, and checks the classical
//! and variational Yang-Mills criteria for each family.

pub mod cli;
pub mod clifford;
pub mod curvature;
pub mod error;
pub mod focal;
pub mod json;
pub mod products;
pub mod report;
pub mod yang_mills;

pub use clifford::{
    assemble_system, build_generators, irreducible_dimension, variant_classify, CliffordSystem, GeneratorSet,
    VariantKind, VariantTag,
};
pub use error::{Error, Result};
pub use focal::{AdaptedFrame, FdConfig, FocalPoint};
