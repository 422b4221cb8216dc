//! Explicit feature-interaction graph neural networks.
//!
//! The crate is layered bottom-up: [`sparse`] and [`dense`] matrices, a
//! reverse-mode [`tape`], the [`model`] definitions, full-batch [`train`]ing,
//! feature-interaction [`interpret`]ation, and on-disk formats ([`bundle`],
//! [`model_file`]).

pub mod bundle;
pub mod csr;
pub mod dense;
pub mod error;
pub mod experiment;
pub mod gradcheck;
pub mod heatmap;
pub mod interpret;
pub mod model;
pub mod model_file;
pub mod oracle;
pub mod scalar;
pub mod sparse;
pub mod tape;
pub mod train;
pub mod verify;

pub use bundle::{load_bundle, write_bundle, Dataset};
pub use csr::CsrMat;
pub use dense::DenseMat;
pub use error::{Error, Result};
pub use scalar::Scalar;
pub use sparse::{normalized_adjacency, spmm, spmm_transpose, EdgeList, SparseAdj};
pub use tape::{Gradients, OpKind, Tape, Var};
