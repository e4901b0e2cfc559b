//! Average diameter, distance to the target, and the stopping rule.

use serde::{Deserialize, Serialize};

use crate::distance::Distance;
use crate::ensemble::WeightedEnsemble;
use crate::error::{NdbalError, Result};
use crate::posterior::PosteriorHandle;
use crate::rng::RngStream;
use crate::space::StructureSpace;

/// Finite ensembles up to this size are handled exactly.
pub const EXACT_LIMIT: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiamEstimate {
    pub value: f64,
    pub n_pairs: usize,
    pub std_err: f64,
}

/// `sum_{i,j} w_i w_j d(g_i, g_j)`.
pub fn avg_diam_exact<G, D>(e: &WeightedEnsemble<G>, d: &D) -> f64
where
    D: Distance<G> + ?Sized,
{
    let live: Vec<(usize, f64)> = (0..e.len())
        .map(|i| (i, e.weight(i)))
        .filter(|(_, w)| *w > 0.0)
        .collect();
    let mut total = 0.0;
    for (a, &(i, wi)) in live.iter().enumerate() {
        let mut row = 0.0;
        for &(j, wj) in &live[a + 1..] {
            row += wj * d.distance(e.structure(i), e.structure(j));
        }
        total += 2.0 * wi * row;
    }
    total
}

/// Mean of `d` over `n_pairs` i.i.d. posterior pairs.
pub fn avg_diam_mc<S, P, D>(
    p: &mut P,
    d: &D,
    n_pairs: usize,
    rng: &mut RngStream,
) -> Result<DiamEstimate>
where
    S: StructureSpace,
    P: PosteriorHandle<S> + ?Sized,
    D: Distance<S::Structure> + ?Sized,
{
    if n_pairs == 0 {
        return Err(NdbalError::invalid("n_pairs must be >= 1"));
    }
    let pairs = p.draw_pairs(n_pairs, rng)?;
    let ds: Vec<f64> = pairs.iter().map(|(g, h)| d.distance(g, h)).collect();
    Ok(mean_with_err(&ds))
}

fn mean_with_err(xs: &[f64]) -> DiamEstimate {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let std_err = if n > 1 {
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    DiamEstimate {
        value: mean,
        n_pairs: n,
        std_err,
    }
}

/// `E_{g ~ pi}[d(g, g*)]`, exact.
pub fn avg_dist_to_target_exact<G, D>(e: &WeightedEnsemble<G>, g_star: &G, d: &D) -> f64
where
    D: Distance<G> + ?Sized,
{
    (0..e.len())
        .map(|i| e.weight(i))
        .zip(e.structures())
        .filter(|(w, _)| *w > 0.0)
        .map(|(w, g)| w * d.distance(g, g_star))
        .sum()
}

/// `(1/n) sum d(g_i, g*)` over `n` posterior draws; exact for small finite
/// ensembles.
pub fn avg_dist_to_target<S, P, D>(
    p: &mut P,
    g_star: &S::Structure,
    d: &D,
    n: usize,
    rng: &mut RngStream,
) -> Result<f64>
where
    S: StructureSpace,
    P: PosteriorHandle<S> + ?Sized,
    D: Distance<S::Structure> + ?Sized,
{
    if let Some(e) = p.as_finite().filter(|e| e.len() <= EXACT_LIMIT) {
        return Ok(avg_dist_to_target_exact(e, g_star, d));
    }
    if n == 0 {
        return Err(NdbalError::invalid("n must be >= 1"));
    }
    let draws = p.draw(n, rng)?;
    Ok(draws.iter().map(|g| d.distance(g, g_star)).sum::<f64>() / n as f64)
}

/// Number of pairs `ceil((48 lambda^2 / eps) log(t (t + 1) / delta))`.
pub fn stopping_n_t(eps: f64, lambda_prior: f64, t: usize, delta: f64) -> Result<usize> {
    check_stop_args(eps, lambda_prior, t, delta)?;
    let tt = t as f64;
    let n = 48.0 * lambda_prior * lambda_prior / eps * (tt * (tt + 1.0) / delta).ln();
    Ok(n.ceil() as usize)
}

/// Stop threshold `3 eps / (4 lambda^2)`.
pub fn stopping_threshold(eps: f64, lambda_prior: f64) -> f64 {
    0.75 * eps / (lambda_prior * lambda_prior)
}

fn check_stop_args(eps: f64, lambda_prior: f64, t: usize, delta: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(NdbalError::invalid(format!("eps = {eps} must lie in (0, 1)")));
    }
    if !(lambda_prior >= 1.0) {
        return Err(NdbalError::invalid(format!("lambda = {lambda_prior} must be >= 1")));
    }
    if t == 0 {
        return Err(NdbalError::invalid("round index t must be >= 1"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(NdbalError::invalid(format!("delta = {delta} must lie in (0, 1)")));
    }
    Ok(())
}

/// Stopping rule. Small finite ensembles compare the exact average diameter
/// against the threshold; everything else goes through
/// [`stopping_check_mc`].
pub fn stopping_check<S, P, D>(
    p: &mut P,
    eps: f64,
    lambda_prior: f64,
    t: usize,
    delta: f64,
    d: &D,
    rng: &mut RngStream,
) -> Result<bool>
where
    S: StructureSpace,
    P: PosteriorHandle<S> + ?Sized,
    D: Distance<S::Structure> + ?Sized,
{
    check_stop_args(eps, lambda_prior, t, delta)?;
    if let Some(e) = p.as_finite().filter(|e| e.len() <= EXACT_LIMIT) {
        return Ok(avg_diam_exact(e, d) <= stopping_threshold(eps, lambda_prior));
    }
    stopping_check_mc(p, eps, lambda_prior, t, delta, d, rng)
}

/// Monte Carlo stopping rule: mean distance over `n_t` pairs against
/// `3 eps / (4 lambda^2)`.
pub fn stopping_check_mc<S, P, D>(
    p: &mut P,
    eps: f64,
    lambda_prior: f64,
    t: usize,
    delta: f64,
    d: &D,
    rng: &mut RngStream,
) -> Result<bool>
where
    S: StructureSpace,
    P: PosteriorHandle<S> + ?Sized,
    D: Distance<S::Structure> + ?Sized,
{
    let n = stopping_n_t(eps, lambda_prior, t, delta)?;
    let est = avg_diam_mc(p, d, n, rng)?;
    Ok(est.value <= stopping_threshold(eps, lambda_prior))
}
