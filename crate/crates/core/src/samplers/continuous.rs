//! Gaussian prior times logistic likelihood terms, sampled by a warm-started
//! Langevin chain.

use serde::{Deserialize, Serialize};

use crate::error::{NdbalError, Result};
use crate::oracle::logistic;
use crate::posterior::{logistic_loss, Loss, PosteriorHandle, UpdateRule};
use crate::rng::RngStream;
use crate::samplers::mala::{burn_in, mala_step, LogDensity, MalaChain};
use crate::space::{dot, Atom, LinearSpace, Response};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerSettings {
    /// Burn-in before the first draw.
    pub burn_in: usize,
    /// Burn-in after each new likelihood term.
    pub warm_burn_in: usize,
    pub thinning: usize,
    /// Steps per adaptation window.
    pub window: usize,
    /// Initial step size; `sigma^2 / d` when absent.
    pub initial_eta: Option<f64>,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        SamplerSettings {
            burn_in: 1000,
            warm_burn_in: 200,
            thinning: 5,
            window: 50,
            initial_eta: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticTerm {
    pub x: Vec<f64>,
    pub y: f64,
    pub beta: f64,
}

/// `f(w) = -sum_i beta_i l(<w, x_i>, y_i) - ||w||^2 / (2 sigma^2)`.
#[derive(Debug, Clone)]
pub struct LogConcaveTarget {
    dim: usize,
    sigma: f64,
    terms: Vec<LogisticTerm>,
}

impl LogConcaveTarget {
    pub fn new(dim: usize, sigma: f64) -> Result<Self> {
        if dim == 0 || !(sigma > 0.0) {
            return Err(NdbalError::invalid("need dim >= 1 and sigma > 0"));
        }
        Ok(LogConcaveTarget {
            dim,
            sigma,
            terms: Vec::new(),
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn terms(&self) -> &[LogisticTerm] {
        &self.terms
    }

    pub fn push(&mut self, term: LogisticTerm) -> Result<()> {
        if term.x.len() != self.dim {
            return Err(NdbalError::IncompatibleAtom(format!(
                "feature dimension {} != {}",
                term.x.len(),
                self.dim
            )));
        }
        self.terms.push(term);
        Ok(())
    }
}

impl LogDensity for LogConcaveTarget {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn log_density(&self, w: &[f64]) -> f64 {
        let prior = -dot(w, w) / (2.0 * self.sigma * self.sigma);
        prior
            - self
                .terms
                .iter()
                .map(|t| t.beta * logistic_loss(dot(w, &t.x), t.y))
                .sum::<f64>()
    }

    fn grad(&self, w: &[f64]) -> Vec<f64> {
        let s2 = self.sigma * self.sigma;
        let mut g: Vec<f64> = w.iter().map(|x| -x / s2).collect();
        for t in &self.terms {
            // -beta * dl/dz = beta * y * logistic(-z y)
            let c = t.beta * t.y * logistic(-dot(w, &t.x) * t.y);
            for (gi, xi) in g.iter_mut().zip(&t.x) {
                *gi += c * xi;
            }
        }
        g
    }
}

/// Posterior over weight vectors backed by a MALA chain. The chain persists
/// across updates; each new term triggers a short warm burn-in.
#[derive(Debug, Clone)]
pub struct ContinuousPosterior {
    target: LogConcaveTarget,
    chain: MalaChain,
    settings: SamplerSettings,
    burned_once: bool,
    stale: bool,
}

impl ContinuousPosterior {
    pub fn new(dim: usize, sigma: f64, settings: SamplerSettings) -> Result<Self> {
        let target = LogConcaveTarget::new(dim, sigma)?;
        let eta = settings.initial_eta.unwrap_or(sigma * sigma / dim as f64);
        if settings.thinning == 0 {
            return Err(NdbalError::invalid("thinning must be >= 1"));
        }
        let chain = MalaChain::new(vec![0.0; dim], eta, settings.window)?;
        Ok(ContinuousPosterior {
            target,
            chain,
            settings,
            burned_once: false,
            stale: true,
        })
    }

    pub fn target(&self) -> &LogConcaveTarget {
        &self.target
    }

    pub fn chain(&self) -> &MalaChain {
        &self.chain
    }

    pub fn settings(&self) -> &SamplerSettings {
        &self.settings
    }

    /// Adds `beta * l(<w, x>, y)` to the negative log-density.
    pub fn add_term(&mut self, x: Vec<f64>, y: f64, beta: f64) -> Result<()> {
        if beta < 0.0 || beta.is_nan() {
            return Err(NdbalError::invalid(format!("beta={beta} must be >= 0")));
        }
        if beta == 0.0 {
            return Ok(());
        }
        self.target.push(LogisticTerm { x, y, beta })?;
        self.chain.invalidate();
        self.stale = true;
        Ok(())
    }

    fn ensure_burned(&mut self, rng: &mut RngStream) -> Result<()> {
        if self.stale {
            let steps = if self.burned_once {
                self.settings.warm_burn_in
            } else {
                self.settings.burn_in
            };
            burn_in(&mut self.chain, &self.target, steps, rng)?;
            self.burned_once = true;
            self.stale = false;
        }
        Ok(())
    }

    /// `n` states, `thinning` steps apart, after any pending burn-in.
    pub fn sample_posterior(&mut self, n: usize, rng: &mut RngStream) -> Result<Vec<Vec<f64>>> {
        if n == 0 {
            return Err(NdbalError::invalid("n must be >= 1"));
        }
        self.ensure_burned(rng)?;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            for _ in 0..self.settings.thinning {
                mala_step(&mut self.chain, &self.target, rng)?;
            }
            out.push(self.chain.state().to_vec());
        }
        Ok(out)
    }
}

impl<S: LinearSpace> PosteriorHandle<S> for ContinuousPosterior {
    fn draw(&mut self, n: usize, rng: &mut RngStream) -> Result<Vec<Vec<f64>>> {
        if n == 0 {
            return Ok(Vec::new());
        }
        self.sample_posterior(n, rng)
    }

    fn apply(&mut self, space: &S, a: &Atom<S::Payload>, y: Response, rule: UpdateRule) -> Result<()> {
        match rule {
            UpdateRule::GeneralLoss {
                beta,
                loss: Loss::Logistic,
            } => {
                let x = space.features(a.payload())?;
                self.add_term(x, space.response_set().value(y), beta)
            }
            other => Err(NdbalError::Unsupported(format!(
                "{other:?} needs a convex loss on a sampler-backed posterior"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::linear::LinearClassifierSpace;

    fn moments(xs: &[Vec<f64>], k: usize) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().map(|x| x[k]).sum::<f64>() / n;
        let v = xs.iter().map(|x| (x[k] - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn pure_prior_moments() {
        let mut p = ContinuousPosterior::new(2, 1.0, SamplerSettings::default()).unwrap();
        let mut rng = RngStream::new(10, "prior");
        let xs = p.sample_posterior(10_000, &mut rng).unwrap();
        for k in 0..2 {
            let (m, v) = moments(&xs, k);
            assert!(m.abs() < 0.05, "mean {m}");
            assert!((v - 1.0).abs() < 0.1, "var {v}");
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut t = LogConcaveTarget::new(3, 2.0).unwrap();
        t.push(LogisticTerm { x: vec![0.3, -0.1, 0.9], y: 1.0, beta: 1.5 }).unwrap();
        t.push(LogisticTerm { x: vec![-0.5, 0.5, 0.2], y: -1.0, beta: 0.7 }).unwrap();
        let w = [0.4, -1.2, 0.8];
        let g = t.grad(&w);
        for k in 0..3 {
            let mut hi = w;
            let mut lo = w;
            hi[k] += 1e-6;
            lo[k] -= 1e-6;
            let fd = (t.log_density(&hi) - t.log_density(&lo)) / 2e-6;
            assert!((fd - g[k]).abs() < 1e-6);
        }
    }

    #[test]
    fn huge_beta_concentrates_on_consistent_halfspace() {
        let space = LinearClassifierSpace::new(2).unwrap();
        let mut p = ContinuousPosterior::new(2, 1.0, SamplerSettings::default()).unwrap();
        let a = Atom::new(0, vec![0.6, 0.8]);
        // beta = 20 already makes exp(-beta l) a near-indicator; much larger
        // values make the drift at w = 0 overshoot every proposal
        PosteriorHandle::<LinearClassifierSpace>::apply(
            &mut p,
            &space,
            &a,
            Response(1),
            UpdateRule::GeneralLoss { beta: 20.0, loss: Loss::Logistic },
        )
        .unwrap();
        let mut rng = RngStream::new(4, "halfspace");
        let xs = p.sample_posterior(2000, &mut rng).unwrap();
        let inside = xs.iter().filter(|w| dot(w, &[0.6, 0.8]) > 0.0).count();
        assert!(inside as f64 >= 0.95 * xs.len() as f64);
    }

    #[test]
    fn independent_chains_agree_on_first_moments() {
        let build = |seed| {
            let mut p = ContinuousPosterior::new(2, 1.0, SamplerSettings::default()).unwrap();
            p.add_term(vec![1.0, 0.0], 1.0, 2.0).unwrap();
            p.add_term(vec![0.0, 1.0], -1.0, 1.0).unwrap();
            let mut rng = RngStream::new(seed, "agree");
            p.sample_posterior(5000, &mut rng).unwrap()
        };
        let (a, b) = (build(1), build(2));
        for k in 0..2 {
            let (ma, va) = moments(&a, k);
            let (mb, vb) = moments(&b, k);
            // thinned draws are treated as roughly independent; 4 combined SEs
            // with an autocorrelation allowance of 2
            let se = 2.0 * ((va + vb) / 5000.0).sqrt();
            assert!((ma - mb).abs() < 4.0 * se, "{ma} vs {mb}");
        }
    }

    #[test]
    fn log_density_is_concave_on_segments() {
        let mut t = LogConcaveTarget::new(3, 1.5).unwrap();
        let mut rng = RngStream::new(6, "concave");
        for _ in 0..20 {
            let x = crate::instances::linear::sample_unit_sphere(3, &mut rng);
            t.push(LogisticTerm { x, y: 1.0, beta: 1.0 }).unwrap();
        }
        let mut p = ContinuousPosterior::new(3, 1.5, SamplerSettings::default()).unwrap();
        for term in t.terms() {
            p.add_term(term.x.clone(), term.y, term.beta).unwrap();
        }
        let xs = p.sample_posterior(40, &mut rng).unwrap();
        for pair in xs.chunks(2) {
            let (u, v) = (&pair[0], &pair[1]);
            for k in 1..10 {
                let s = k as f64 / 10.0;
                let mid: Vec<f64> = u.iter().zip(v).map(|(a, b)| s * a + (1.0 - s) * b).collect();
                let chord = s * t.log_density(u) + (1.0 - s) * t.log_density(v);
                assert!(t.log_density(&mid) >= chord - 1e-9);
            }
        }
    }

    #[test]
    fn zero_one_rule_is_rejected() {
        let space = LinearClassifierSpace::new(2).unwrap();
        let mut p = ContinuousPosterior::new(2, 1.0, SamplerSettings::default()).unwrap();
        let a = Atom::new(0, vec![1.0, 0.0]);
        let r = PosteriorHandle::<LinearClassifierSpace>::apply(
            &mut p,
            &space,
            &a,
            Response(1),
            UpdateRule::Soft01 { beta: 1.0 },
        );
        assert!(matches!(r, Err(NdbalError::Unsupported(_))));
    }
}
