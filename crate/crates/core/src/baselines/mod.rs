//! Reference reconstructions used for comparison.

mod mbi;
mod rbf;

pub use mbi::{fit_ldpl, mbi_reconstruct, LdplFit};
pub use rbf::{rbf_reconstruct, select_centers, RbfConfig, RbfKind};
