//! Order-theoretic machinery for operator systems: maximal matrix orderings,
//! compression cones certifying abstract projections, and the universal
//! nonsignalling space used to classify bipartite correlations.

pub mod compression;
pub mod conic;
pub mod correlations;
pub mod error;
pub mod linalg;
pub mod nonsignalling;
pub mod space;
pub mod verdict;
pub mod verify;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, Tolerance, C64};
pub use verdict::{Certificate, Status, Verdict};
