use crate::ensemble::WeightedEnsemble;
use crate::error::{NdbalError, Result};
use crate::rng::RngStream;

/// Structure `i` with probability `w_i`.
pub fn sample_finite<G: Clone>(e: &WeightedEnsemble<G>, rng: &mut RngStream) -> Result<G> {
    if e.is_empty() {
        return Err(NdbalError::EmptyPosterior);
    }
    Ok(e.structure(e.sample_index(rng)).clone())
}
