//! Chernoff information between Gaussian tree models.
//!
//! The crate computes the Chernoff information (CI) of two zero-mean,
//! unit-variance Gaussian trees from the generalized eigenvalues of their
//! covariance matrices, implements the tree operations that preserve or
//! order CI (adding, division, cutting, merging, grafting), and selects the
//! CI-maximizing linear projection to fewer observed dimensions.
//!
//! Independent oracles (a dense max-min scan, Monte Carlo error exponents,
//! random projection baselines) live in [`oracle`].

pub mod closed_form;
pub mod dimred;
pub mod error;
pub mod graph_ops;
pub mod oracle;
pub mod par;
pub mod seed;
pub mod spd;
pub mod spectral;
pub mod symmetry;
pub mod tree;
pub mod verify;

pub use error::{Error, Result};
pub use spd::SpdMatrix;
pub use spectral::{chernoff, chernoff_trees, gen_eigs, ChernoffReport, GenEigSpectrum};
pub use tree::{covariance_of, marginal_covariance, parse_gtree, precision_of, random_tree, write_gtree, Edge, GaussianTree};
