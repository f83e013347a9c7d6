//! Linear minimum-variance estimation and Kalman filtering.
//!
//! * [`linalg`]: certified SPD matrices, factor-solves, the matrix inversion lemma.
//! * [`batch`]: Gauss-Markov and minimum-variance batch estimators (gain and information forms).
//! * [`sequential`]: folding a new measurement block into an existing estimate.
//! * [`projection`]: the one-shot predictor recursion for `x̂_{k+1|k}`, `P_{k+1}`.
//! * [`bayes`]: Gaussian predict/correct filter and its density identities.
//! * [`simulator`]: seeded ground truth and exact joint moments for the stacked oracle.
//! * [`consistency`]: NEES/NIS statistics.

pub mod batch;
pub mod bayes;
pub mod consistency;
pub mod error;
pub mod linalg;
pub mod model;
pub mod projection;
pub mod random;
pub mod sequential;
pub mod simulator;
pub mod trace;

pub use error::{Error, Result};
pub use linalg::{Matrix, SpdMatrix, Vector};
pub use model::{Schedule, StateSpaceModel};
pub use sequential::CovarianceForm;
pub use trace::{FilterStep, FilterTrace};
