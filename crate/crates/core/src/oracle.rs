//! Response oracles: the conditional law `eta(y | a)` plus a sampler.

use rand::Rng;

use crate::error::{NdbalError, Result};
use crate::rng::RngStream;
use crate::space::{dot, Atom, LinearSpace, Response, StructureSpace};

pub trait Oracle<S: StructureSpace>: Send + Sync {
    /// Probability of each response (indexed like the space's response set).
    fn law(&self, space: &S, a: &Atom<S::Payload>) -> Result<Vec<f64>>;

    fn respond(&self, space: &S, a: &Atom<S::Payload>, rng: &mut RngStream) -> Result<Response> {
        let law = self.law(space, a)?;
        Ok(sample_categorical(&law, rng))
    }

    /// Ground-truth structure, when the oracle is built around one.
    fn target(&self) -> Option<&S::Structure> {
        None
    }

    /// Margin `lambda` with which the true response beats every other one.
    fn massart_margin(&self) -> Option<f64> {
        None
    }
}

pub(crate) fn sample_categorical(probs: &[f64], rng: &mut RngStream) -> Response {
    let u: f64 = rng.random::<f64>();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return Response(i);
        }
    }
    // rounding: fall back to the last response with positive mass
    Response(probs.iter().rposition(|p| *p > 0.0).unwrap_or(0))
}

/// Answers `g*(a)` with probability `1 - q` and a uniformly chosen other
/// response with probability `q`. `q = 0` is the noiseless oracle.
#[derive(Debug, Clone)]
pub struct FlipOracle<G> {
    g_star: G,
    q: f64,
}

impl<G> FlipOracle<G> {
    pub fn new(g_star: G, q: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&q) {
            return Err(NdbalError::invalid(format!("flip rate q={q} outside [0, 1/2)")));
        }
        Ok(FlipOracle { g_star, q })
    }

    pub fn noiseless(g_star: G) -> Self {
        FlipOracle { g_star, q: 0.0 }
    }

    /// Flip oracle whose margin `(1 - q) - q/(|Y| - 1)` equals `lambda`.
    pub fn massart(g_star: G, lambda: f64, n_responses: usize) -> Result<Self> {
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(NdbalError::invalid(format!("Massart margin {lambda} outside (0, 1]")));
        }
        if n_responses < 2 {
            return Err(NdbalError::invalid("Massart oracle needs |Y| >= 2"));
        }
        let k = n_responses as f64;
        let q = (1.0 - lambda) * (k - 1.0) / k;
        Ok(FlipOracle { g_star, q })
    }

    pub fn flip_rate(&self) -> f64 {
        self.q
    }

    pub fn g_star(&self) -> &G {
        &self.g_star
    }
}

impl<S> Oracle<S> for FlipOracle<S::Structure>
where
    S: StructureSpace,
{
    fn law(&self, space: &S, a: &Atom<S::Payload>) -> Result<Vec<f64>> {
        let k = space.response_set().len();
        let truth = space.evaluate(&self.g_star, a.payload())?;
        let other = if k > 1 { self.q / (k as f64 - 1.0) } else { 0.0 };
        let mut law = vec![other; k];
        law[truth.0] = 1.0 - self.q;
        Ok(law)
    }

    fn target(&self) -> Option<&S::Structure> {
        Some(&self.g_star)
    }
}

impl<G> FlipOracle<G> {
    pub fn massart_margin_for(&self, n_responses: usize) -> f64 {
        let k = n_responses as f64;
        (1.0 - self.q) - self.q / (k - 1.0)
    }
}

/// Flip oracle that reports its Massart margin to the learner (used by
/// theory-mode config validation).
#[derive(Debug, Clone)]
pub struct MassartOracle<G> {
    inner: FlipOracle<G>,
    lambda: f64,
}

impl<G> MassartOracle<G> {
    pub fn new(g_star: G, lambda: f64, n_responses: usize) -> Result<Self> {
        Ok(MassartOracle {
            inner: FlipOracle::massart(g_star, lambda, n_responses)?,
            lambda,
        })
    }

    pub fn flip_rate(&self) -> f64 {
        self.inner.q
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

impl<S> Oracle<S> for MassartOracle<S::Structure>
where
    S: StructureSpace,
{
    fn law(&self, space: &S, a: &Atom<S::Payload>) -> Result<Vec<f64>> {
        self.inner.law(space, a)
    }

    fn target(&self) -> Option<&S::Structure> {
        Some(&self.inner.g_star)
    }

    fn massart_margin(&self) -> Option<f64> {
        Some(self.lambda)
    }
}

/// Log-odds confidence `ln((1 - q)/q)` matched to a flip rate `q`.
pub fn recommended_beta(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 0.5) {
        return Err(NdbalError::invalid(format!("q={q} must lie in (0, 1/2)")));
    }
    Ok(((1.0 - q) / q).ln())
}

/// Logistic response model on a linear space with `{-1, +1}` responses:
/// `P(y | a) = 1 / (1 + exp(-y <w*, x(a)>))`.
///
/// On a pairwise choice space `x(a) = x_i - x_j`, so this is the logit choice
/// model picking the first item with probability `logistic(<w*, x_i - x_j>)`.
#[derive(Debug, Clone)]
pub struct LogisticOracle {
    w_star: Vec<f64>,
}

impl LogisticOracle {
    pub fn new(w_star: Vec<f64>) -> Self {
        LogisticOracle { w_star }
    }

    pub fn w_star(&self) -> &[f64] {
        &self.w_star
    }
}

pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl<S: LinearSpace> Oracle<S> for LogisticOracle {
    fn law(&self, space: &S, a: &Atom<S::Payload>) -> Result<Vec<f64>> {
        let x = space.features(a.payload())?;
        if x.len() != self.w_star.len() {
            return Err(NdbalError::IncompatibleAtom(format!(
                "feature dimension {} vs target dimension {}",
                x.len(),
                self.w_star.len()
            )));
        }
        let z = dot(&self.w_star, &x);
        let rs = space.response_set();
        Ok(rs.iter().map(|r| logistic(rs.value(r) * z)).collect())
    }

    fn target(&self) -> Option<&Vec<f64>> {
        Some(&self.w_star)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn massart_binary_margin_sets_flip_rate() {
        let o = FlipOracle::massart(0usize, 0.5, 2).unwrap();
        assert_abs_diff_eq!(o.flip_rate(), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(o.massart_margin_for(2), 0.5, epsilon = 1e-15);
        let o3 = FlipOracle::massart(0usize, 0.4, 3).unwrap();
        assert_abs_diff_eq!(o3.massart_margin_for(3), 0.4, epsilon = 1e-15);
    }

    #[test]
    fn flip_parameters_out_of_range() {
        assert!(FlipOracle::new(0usize, 0.5).is_err());
        assert!(FlipOracle::new(0usize, -0.1).is_err());
        assert!(FlipOracle::massart(0usize, 0.0, 2).is_err());
        assert!(FlipOracle::massart(0usize, 1.5, 2).is_err());
    }

    #[test]
    fn recommended_beta_for_quarter_flip_is_ln3() {
        assert_abs_diff_eq!(recommended_beta(0.25).unwrap(), 3.0f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(recommended_beta(0.25).unwrap(), 1.0986, epsilon = 1e-4);
    }

    #[test]
    fn logistic_is_stable_and_symmetric() {
        assert_eq!(logistic(0.0), 0.5);
        assert_abs_diff_eq!(logistic(3.0f64.ln()), 0.75, epsilon = 1e-15);
        assert!(logistic(800.0) == 1.0);
        assert!(logistic(-800.0) >= 0.0);
        assert_abs_diff_eq!(logistic(2.0) + logistic(-2.0), 1.0, epsilon = 1e-15);
    }
}
