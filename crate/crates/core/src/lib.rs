//! Diameter-based interactive structure discovery.
//!
//! A structure is a function from atomic questions to responses. The learner
//! keeps a posterior over structures, asks the question whose answer most
//! shrinks the posterior's average pairwise distance, and reweights on noisy
//! answers.

pub mod diameter;
pub mod distance;
pub mod ensemble;
pub mod error;
pub mod harness;
pub mod instances;
pub mod learner;
pub mod oracle;
pub mod posterior;
pub mod rng;
pub mod samplers;
pub mod select;
pub mod space;
pub mod splitting;

pub use distance::{Distance, MatrixDistance};
pub use ensemble::{normalize, WeightedEnsemble};
pub use error::{NdbalError, Result};
pub use posterior::{Loss, PosteriorHandle, UpdateRule};
pub use rng::RngStream;
pub use space::{Atom, AtomId, Response, ResponseSet, StructureSpace};
