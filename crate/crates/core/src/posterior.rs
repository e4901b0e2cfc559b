//! Posterior handles and the three update rules.

use serde::{Deserialize, Serialize};

use crate::ensemble::WeightedEnsemble;
use crate::error::{NdbalError, Result};
use crate::rng::RngStream;
use crate::space::{Atom, Response, ResponseSet, StructureSpace};

/// Loss of a prediction against an observed response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// `1[g(a) != y]`.
    ZeroOne,
    /// `log(1 + exp(-z y))` on the real-valued margin `z` and `y = ±1`.
    Logistic,
}

impl Loss {
    pub fn is_convex(&self) -> bool {
        matches!(self, Loss::Logistic)
    }

    pub fn of<S: StructureSpace>(
        &self,
        space: &S,
        g: &S::Structure,
        a: &S::Payload,
        y: Response,
    ) -> Result<f64> {
        match self {
            Loss::ZeroOne => Ok(if space.evaluate(g, a)? == y { 0.0 } else { 1.0 }),
            Loss::Logistic => {
                let z = space.margin(g, a).ok_or_else(|| {
                    NdbalError::Unsupported("logistic loss needs a margin-valued space".into())
                })??;
                Ok(logistic_loss(z, space.response_set().value(y)))
            }
        }
    }

    /// Loss of a precomputed prediction. `prediction` is the response for the
    /// 0-1 loss and the margin for the logistic loss.
    pub fn of_prediction(&self, prediction: Prediction, y: Response, responses: &ResponseSet) -> f64 {
        match (self, prediction) {
            (Loss::ZeroOne, Prediction::Label(r)) => (r != y) as u8 as f64,
            (Loss::ZeroOne, Prediction::Margin(z)) => {
                // sign rule on a margin
                let yv = responses.value(y);
                if z * yv > 0.0 { 0.0 } else { 1.0 }
            }
            (Loss::Logistic, Prediction::Margin(z)) => logistic_loss(z, responses.value(y)),
            (Loss::Logistic, Prediction::Label(r)) => {
                logistic_loss(responses.value(r), responses.value(y))
            }
        }
    }

    /// `exp(-beta * loss)` of a precomputed prediction, for finite `beta`.
    pub fn weight_of_prediction(&self, prediction: Prediction, y: Response, responses: &ResponseSet, beta: f64) -> f64 {
        match (self, prediction) {
            (Loss::Logistic, Prediction::Margin(z)) => {
                let base = 1.0 + (-z * responses.value(y)).exp();
                if beta == 1.0 {
                    1.0 / base
                } else {
                    base.powf(-beta)
                }
            }
            _ => (-beta * self.of_prediction(prediction, y, responses)).exp(),
        }
    }
}

/// Structure output on an atom, in the form a loss consumes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prediction {
    Label(Response),
    Margin(f64),
}

/// `log(1 + exp(-z y))`, computed without overflow.
pub fn logistic_loss(z: f64, y: f64) -> f64 {
    softplus(-z * y)
}

pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Posterior update rule applied after each response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum UpdateRule {
    /// Zero out inconsistent structures.
    Hard,
    /// Multiply inconsistent structures by `exp(-beta)`.
    Soft01 { beta: f64 },
    /// Multiply every structure by `exp(-beta * loss(g(a), y))`.
    GeneralLoss { beta: f64, loss: Loss },
}

/// Hard (version-space) update.
pub fn update_hard<S: StructureSpace>(
    e: &WeightedEnsemble<S::Structure>,
    space: &S,
    a: &Atom<S::Payload>,
    y: Response,
) -> Result<WeightedEnsemble<S::Structure>> {
    let mut lw = Vec::with_capacity(e.len());
    for (g, w) in e.structures().iter().zip(e.log_weights()) {
        let consistent = space.evaluate(g, a.payload())? == y;
        lw.push(if consistent { *w } else { f64::NEG_INFINITY });
    }
    e.reweighted(lw).map_err(|err| match err {
        NdbalError::EmptyPosterior => NdbalError::VersionSpaceEmpty,
        other => other,
    })
}

/// Exponential-weights update under the 0-1 loss.
pub fn update_soft01<S: StructureSpace>(
    e: &WeightedEnsemble<S::Structure>,
    space: &S,
    a: &Atom<S::Payload>,
    y: Response,
    beta: f64,
) -> Result<WeightedEnsemble<S::Structure>> {
    if !(beta > 0.0) {
        return Err(NdbalError::invalid(format!("beta={beta} must be > 0")));
    }
    update_general_loss_finite(e, space, a, y, beta, Loss::ZeroOne)
}

/// Exponential-weights update under an arbitrary loss, exact on a finite
/// ensemble. `beta = 0` leaves the posterior unchanged.
pub fn update_general_loss_finite<S: StructureSpace>(
    e: &WeightedEnsemble<S::Structure>,
    space: &S,
    a: &Atom<S::Payload>,
    y: Response,
    beta: f64,
    loss: Loss,
) -> Result<WeightedEnsemble<S::Structure>> {
    if beta < 0.0 || beta.is_nan() {
        return Err(NdbalError::invalid(format!("beta={beta} must be >= 0")));
    }
    if beta == 0.0 {
        return Ok(e.clone());
    }
    let mut lw = Vec::with_capacity(e.len());
    for (g, w) in e.structures().iter().zip(e.log_weights()) {
        let l = loss.of(space, g, a.payload(), y)?;
        lw.push(if l == 0.0 { *w } else { w - beta * l });
    }
    e.reweighted(lw)
}

/// Unifying interface over exact finite posteriors and sampler-backed ones.
pub trait PosteriorHandle<S: StructureSpace> {
    /// `n` structures drawn (approximately) i.i.d. from the posterior.
    fn draw(&mut self, n: usize, rng: &mut RngStream) -> Result<Vec<S::Structure>>;

    fn apply(
        &mut self,
        space: &S,
        a: &Atom<S::Payload>,
        y: Response,
        rule: UpdateRule,
    ) -> Result<()>;

    /// The exact ensemble, when the posterior is finite.
    fn as_finite(&self) -> Option<&WeightedEnsemble<S::Structure>> {
        None
    }

    /// Draws `n` structure pairs.
    fn draw_pairs(
        &mut self,
        n: usize,
        rng: &mut RngStream,
    ) -> Result<Vec<(S::Structure, S::Structure)>> {
        let mut draws = self.draw(2 * n, rng)?.into_iter();
        let mut pairs = Vec::with_capacity(n);
        while let (Some(g), Some(h)) = (draws.next(), draws.next()) {
            pairs.push((g, h));
        }
        Ok(pairs)
    }
}

impl<S: StructureSpace> PosteriorHandle<S> for WeightedEnsemble<S::Structure> {
    fn draw(&mut self, n: usize, rng: &mut RngStream) -> Result<Vec<S::Structure>> {
        Ok((0..n)
            .map(|_| self.structure(self.sample_index(rng)).clone())
            .collect())
    }

    fn apply(
        &mut self,
        space: &S,
        a: &Atom<S::Payload>,
        y: Response,
        rule: UpdateRule,
    ) -> Result<()> {
        *self = match rule {
            UpdateRule::Hard => update_hard(self, space, a, y)?,
            UpdateRule::Soft01 { beta } => update_soft01(self, space, a, y, beta)?,
            UpdateRule::GeneralLoss { beta, loss } => {
                update_general_loss_finite(self, space, a, y, beta, loss)?
            }
        };
        Ok(())
    }

    fn as_finite(&self) -> Option<&WeightedEnsemble<S::Structure>> {
        Some(self)
    }
}

/// General-loss update through any posterior handle.
pub fn update_general_loss<S: StructureSpace, P: PosteriorHandle<S>>(
    p: &mut P,
    space: &S,
    a: &Atom<S::Payload>,
    y: Response,
    beta: f64,
    loss: Loss,
) -> Result<()> {
    p.apply(space, a, y, UpdateRule::GeneralLoss { beta, loss })
}
