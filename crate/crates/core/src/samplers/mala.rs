//! Metropolis-adjusted Langevin chain with windowed step adaptation.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{NdbalError, Result};
use crate::rng::RngStream;

/// Target log-density `f` and its gradient.
pub trait LogDensity {
    fn dimension(&self) -> usize;
    fn log_density(&self, w: &[f64]) -> f64;
    fn grad(&self, w: &[f64]) -> Vec<f64>;
}

#[derive(Debug, Clone)]
pub struct MalaChain {
    state: Vec<f64>,
    eta: f64,
    window: VecDeque<bool>,
    window_size: usize,
    // f and grad f at `state`, recomputed when the target changes
    cached: Option<(f64, Vec<f64>)>,
    pub steps: u64,
    pub accepted: u64,
    pub nonfinite_rejects: u64,
}

impl MalaChain {
    pub fn new(state: Vec<f64>, eta: f64, window_size: usize) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(NdbalError::invalid(format!("step size {eta} must be > 0")));
        }
        if window_size == 0 {
            return Err(NdbalError::invalid("acceptance window must be >= 1"));
        }
        Ok(MalaChain {
            state,
            eta,
            window: VecDeque::with_capacity(window_size),
            window_size,
            cached: None,
            steps: 0,
            accepted: 0,
            nonfinite_rejects: 0,
        })
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Acceptance rate over the current window, if non-empty.
    pub fn window_acceptance(&self) -> Option<f64> {
        if self.window.is_empty() {
            None
        } else {
            Some(self.window.iter().filter(|b| **b).count() as f64 / self.window.len() as f64)
        }
    }

    pub fn window_is_full(&self) -> bool {
        self.window.len() >= self.window_size
    }

    pub fn clear_window(&mut self) {
        self.window.clear();
    }

    /// Forgets cached values; call after the target changes.
    pub fn invalidate(&mut self) {
        self.cached = None;
    }

    fn record(&mut self, accepted: bool) {
        if self.window.len() == self.window_size {
            self.window.pop_front();
        }
        self.window.push_back(accepted);
        self.steps += 1;
        self.accepted += accepted as u64;
    }
}

/// `(1 / 4 eta) * ||to - from - eta grad f(from)||^2`, the negative log of the
/// Gaussian proposal kernel up to a constant.
fn proposal_energy(to: &[f64], from: &[f64], grad_from: &[f64], eta: f64) -> f64 {
    to.iter()
        .zip(from)
        .zip(grad_from)
        .map(|((t, f), g)| {
            let r = t - f - eta * g;
            r * r
        })
        .sum::<f64>()
        / (4.0 * eta)
}

/// Log Metropolis-Hastings ratio for moving from `w` to `v`.
pub fn log_accept_ratio(
    w: &[f64],
    f_w: f64,
    grad_w: &[f64],
    v: &[f64],
    f_v: f64,
    grad_v: &[f64],
    eta: f64,
) -> f64 {
    f_v - f_w + proposal_energy(v, w, grad_w, eta) - proposal_energy(w, v, grad_v, eta)
}

/// One MALA transition. The proposal climbs `f`:
/// `V ~ N(W + eta grad f(W), 2 eta I)`; acceptance is the Metropolis-Hastings
/// ratio for that kernel.
pub fn mala_step<T: LogDensity + ?Sized>(
    c: &mut MalaChain,
    target: &T,
    rng: &mut RngStream,
) -> Result<bool> {
    let (f_w, grad_w) = match c.cached.take() {
        Some(v) => v,
        None => (target.log_density(&c.state), target.grad(&c.state)),
    };
    if !f_w.is_finite() || grad_w.iter().any(|g| !g.is_finite()) {
        return Err(NdbalError::invalid("log-density is not finite at the chain state"));
    }
    let scale = (2.0 * c.eta).sqrt();
    let v: Vec<f64> = c
        .state
        .iter()
        .zip(&grad_w)
        .map(|(w, g)| {
            let z: f64 = StandardNormal.sample(rng);
            w + c.eta * g + scale * z
        })
        .collect();
    let f_v = target.log_density(&v);
    let grad_v = target.grad(&v);
    if !f_v.is_finite() || grad_v.iter().any(|g| !g.is_finite()) {
        c.nonfinite_rejects += 1;
        c.cached = Some((f_w, grad_w));
        c.record(false);
        return Ok(false);
    }
    let log_alpha = log_accept_ratio(&c.state, f_w, &grad_w, &v, f_v, &grad_v, c.eta);
    let accept = log_alpha >= 0.0 || rng.random::<f64>().ln() < log_alpha;
    if accept {
        c.state = v;
        c.cached = Some((f_v, grad_v));
    } else {
        c.cached = Some((f_w, grad_w));
    }
    c.record(accept);
    Ok(accept)
}

/// `eta * 1.1` above 0.7 windowed acceptance, `eta * 0.9` below 0.5.
pub fn adapt_step(c: &mut MalaChain) -> Result<()> {
    let rate = c
        .window_acceptance()
        .ok_or_else(|| NdbalError::invalid("acceptance window is empty"))?;
    if rate > 0.7 {
        c.eta *= 1.1;
    } else if rate < 0.5 {
        c.eta *= 0.9;
    }
    Ok(())
}

/// `steps` transitions, adapting after each full window, then clears the
/// window so post-burn-in steps run at a fixed step size.
pub fn burn_in<T: LogDensity + ?Sized>(
    c: &mut MalaChain,
    target: &T,
    steps: usize,
    rng: &mut RngStream,
) -> Result<()> {
    c.clear_window();
    for _ in 0..steps {
        mala_step(c, target, rng)?;
        if c.window_is_full() {
            adapt_step(c)?;
            c.clear_window();
        }
    }
    c.clear_window();
    Ok(())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// `N(0, sigma^2 I)` in `dim` dimensions.
    pub(crate) struct Gaussian {
        pub dim: usize,
        pub sigma: f64,
    }

    impl LogDensity for Gaussian {
        fn dimension(&self) -> usize {
            self.dim
        }
        fn log_density(&self, w: &[f64]) -> f64 {
            -w.iter().map(|x| x * x).sum::<f64>() / (2.0 * self.sigma * self.sigma)
        }
        fn grad(&self, w: &[f64]) -> Vec<f64> {
            w.iter().map(|x| -x / (self.sigma * self.sigma)).collect()
        }
    }

    #[test]
    fn gaussian_gradient() {
        let g = Gaussian { dim: 2, sigma: 2.0 };
        assert_eq!(g.grad(&[1.0, -2.0]), vec![-0.25, 0.5]);
    }

    #[test]
    fn proposal_at_current_state_has_unit_ratio() {
        let g = Gaussian { dim: 2, sigma: 1.0 };
        let w = [0.3, -0.7];
        let (f, gr) = (g.log_density(&w), g.grad(&w));
        assert_eq!(log_accept_ratio(&w, f, &gr, &w, f, &gr, 0.1), 0.0);
    }

    #[test]
    fn ratio_matches_potential_form() {
        // U = -f: U(W) - U(V) + (|V - W + eta dU(W)|^2 - |W - V + eta dU(V)|^2) / (4 eta)
        let g = Gaussian { dim: 3, sigma: 1.7 };
        let mut rng = RngStream::new(2, "ratio");
        for _ in 0..100 {
            let w: Vec<f64> = (0..3).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let v: Vec<f64> = (0..3).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let eta = 0.05 + rng.random::<f64>();
            let u = |x: &[f64]| -g.log_density(x);
            let du = |x: &[f64]| g.grad(x).into_iter().map(|z| -z).collect::<Vec<_>>();
            let sq = |a: &[f64], b: &[f64], gr: &[f64]| -> f64 {
                (0..3).map(|i| (a[i] - b[i] + eta * gr[i]).powi(2)).sum()
            };
            let want = u(&w) - u(&v) + (sq(&v, &w, &du(&w)) - sq(&w, &v, &du(&v))) / (4.0 * eta);
            let got = log_accept_ratio(
                &w,
                g.log_density(&w),
                &g.grad(&w),
                &v,
                g.log_density(&v),
                &g.grad(&v),
                eta,
            );
            assert!((got - want).abs() < 1e-10);
        }
    }

    #[test]
    fn tiny_steps_are_almost_always_accepted() {
        let g = Gaussian { dim: 2, sigma: 1.0 };
        let mut c = MalaChain::new(vec![0.5, 0.5], 1e-8, 50).unwrap();
        let mut rng = RngStream::new(3, "tiny");
        let acc = (0..1000).filter(|_| mala_step(&mut c, &g, &mut rng).unwrap()).count();
        assert!(acc >= 990);
    }

    #[test]
    fn adaptation_rule() {
        let mut c = MalaChain::new(vec![0.0], 1.0, 10).unwrap();
        assert!(adapt_step(&mut c).is_err());
        (0..10).for_each(|_| c.record(true));
        adapt_step(&mut c).unwrap();
        assert!((c.eta() - 1.1).abs() < 1e-15);
        c.clear_window();
        (0..10).for_each(|_| c.record(false));
        adapt_step(&mut c).unwrap();
        assert!((c.eta() - 0.99).abs() < 1e-15);
        c.clear_window();
        (0..10).for_each(|i| c.record(i < 6));
        adapt_step(&mut c).unwrap();
        assert!((c.eta() - 0.99).abs() < 1e-15);
    }

    #[test]
    fn step_size_is_fixed_after_burn_in() {
        let g = Gaussian { dim: 3, sigma: 1.0 };
        let mut c = MalaChain::new(vec![0.0; 3], 1.0 / 3.0, 50).unwrap();
        let mut rng = RngStream::new(8, "freeze");
        burn_in(&mut c, &g, 1000, &mut rng).unwrap();
        let eta = c.eta();
        for _ in 0..500 {
            mala_step(&mut c, &g, &mut rng).unwrap();
        }
        assert_eq!(c.eta(), eta);
    }

    #[test]
    fn one_dimensional_chi_squared() {
        use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
        let g = Gaussian { dim: 1, sigma: 1.0 };
        let mut c = MalaChain::new(vec![0.0], 1.0, 50).unwrap();
        let mut rng = RngStream::new(21, "chi2");
        burn_in(&mut c, &g, 1000, &mut rng).unwrap();
        let n = 4000;
        let thin = 10;
        let edges = [-1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5];
        let mut counts = vec![0usize; edges.len() + 1];
        for _ in 0..n {
            for _ in 0..thin {
                mala_step(&mut c, &g, &mut rng).unwrap();
            }
            counts[edges.partition_point(|e| *e < c.state()[0])] += 1;
        }
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut cdf = vec![0.0];
        cdf.extend(edges.iter().map(|e| normal.cdf(*e)));
        cdf.push(1.0);
        let stat: f64 = counts
            .iter()
            .enumerate()
            .map(|(i, k)| {
                let expect = n as f64 * (cdf[i + 1] - cdf[i]);
                (*k as f64 - expect).powi(2) / expect
            })
            .sum();
        let crit = ChiSquared::new((counts.len() - 1) as f64).unwrap().inverse_cdf(0.99);
        assert!(stat < crit, "chi2 {stat} vs {crit}");
    }
}
