//! Average-value sampling on the Sierpinski gasket.
//!
//! Graph approximations of SG and SG₃, spectral decimation on the cell
//! graphs, eigenbases, bandlimited reconstruction from cell averages,
//! sampling-function statistics, blowup sampling sequences, and the SG₃
//! verification suite.

pub mod blowups;
pub mod decimation;
pub mod eigenbasis;
pub mod error;
pub mod geometry;
pub mod graphs;
pub mod sampling;
pub mod sg3;

pub use decimation::{Branch, BranchPolicy, EigenFunction, Lineage, Target};
pub use eigenbasis::{Basis, Provenance};

pub use error::{Error, Result};
pub use geometry::{Fractal, Point2, Word};
pub use graphs::{Convention, Graph, GraphKind, LaplacianOperator, Spectrum};
pub use sampling::{BandlimitedFunction, Normalization, SamplingSpace, SamplingStats};

/// Closeness threshold used when a value is compared against an exceptional
/// eigenvalue (forbidden values, the eigenvalue 6 of the vertex graphs).
pub const EIGEN_TOL: f64 = 1e-9;
