//! Exact draws from finite ensembles and Langevin chains for continuous
//! log-concave posteriors.

pub mod continuous;
pub mod finite;
pub mod mala;

pub use continuous::{ContinuousPosterior, LogisticTerm, LogConcaveTarget, SamplerSettings};
pub use finite::sample_finite;
pub use mala::{adapt_step, mala_step, LogDensity, MalaChain};
