//! Splitting and average-splitting index estimates, and index checks for the
//! ranking and interval-clustering families.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::ln_gamma;

use crate::diameter::avg_diam_exact;
use crate::distance::Distance;
use crate::ensemble::WeightedEnsemble;
use crate::error::{NdbalError, Result};
use crate::instances::interval::{
    d_interval_i, Interval, IntervalAtomKind, IntervalClustering, IntervalClusteringSpace,
};
use crate::instances::linear::{sample_gaussian, sample_unit_sphere};
use crate::instances::ranking::{rank_distance, ObjectMeasure, RankingSpace};
use crate::rng::RngStream;
use crate::select::exact_average_split;
use crate::space::{Atom, StructureSpace};

/// Structure pairs at distance above `eps_edge`.
#[derive(Debug, Clone)]
pub struct EdgeSet<G> {
    edges: Vec<(G, G)>,
    eps_edge: f64,
}

impl<G: Clone> EdgeSet<G> {
    pub fn new<D: Distance<G> + ?Sized>(edges: Vec<(G, G)>, eps_edge: f64, d: &D) -> Result<Self> {
        if let Some(k) = edges.iter().position(|(g, h)| !(d.distance(g, h) > eps_edge)) {
            return Err(NdbalError::invalid(format!(
                "edge {k} is not longer than {eps_edge}"
            )));
        }
        Ok(EdgeSet { edges, eps_edge })
    }

    /// All unordered pairs of support points at distance above `eps_edge`.
    pub fn from_ensemble<D: Distance<G> + ?Sized>(
        e: &WeightedEnsemble<G>,
        d: &D,
        eps_edge: f64,
    ) -> Self {
        let live: Vec<&G> = (0..e.len())
            .filter(|&i| e.weight(i) > 0.0)
            .map(|i| e.structure(i))
            .collect();
        let mut edges = Vec::new();
        for (k, g) in live.iter().enumerate() {
            for h in &live[k + 1..] {
                if d.distance(g, h) > eps_edge {
                    edges.push(((*g).clone(), (*h).clone()));
                }
            }
        }
        EdgeSet { edges, eps_edge }
    }

    pub fn edges(&self) -> &[(G, G)] {
        &self.edges
    }

    pub fn eps_edge(&self) -> f64 {
        self.eps_edge
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

/// `1 - max_y |{(g, g') in E : g(a) = y = g'(a)}| / |E|`.
pub fn edge_split<S: StructureSpace>(
    e: &EdgeSet<S::Structure>,
    a: &Atom<S::Payload>,
    space: &S,
) -> Result<f64> {
    if e.is_empty() {
        return Err(NdbalError::invalid("edge set is empty"));
    }
    let mut counts = vec![0usize; space.response_set().len()];
    for (g, h) in &e.edges {
        let (yg, yh) = (space.evaluate(g, a.payload())?, space.evaluate(h, a.payload())?);
        if yg == yh {
            counts[yg.0] += 1;
        }
    }
    let max = counts.into_iter().max().unwrap_or(0);
    Ok(1.0 - max as f64 / e.len() as f64)
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: usize, n: usize, level: f64) -> Result<(f64, f64)> {
    if n == 0 || k > n {
        return Err(NdbalError::invalid(format!("invalid counts {k}/{n}")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(NdbalError::invalid(format!("level {level} must lie in (0, 1)")));
    }
    let z = Normal::standard().inverse_cdf(0.5 + level / 2.0);
    let (n, p) = (n as f64, k as f64 / n as f64);
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if k == 0 { 0.0 } else { (centre - half).clamp(0.0, p) };
    let hi = if k as f64 == n { 1.0 } else { (centre + half).clamp(p, 1.0) };
    Ok((lo, hi))
}

/// Confidence level of every interval in this module.
pub const CI_LEVEL: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexReport {
    pub rho_grid: Vec<f64>,
    pub tau_hat: Vec<f64>,
    pub successes: Vec<usize>,
    pub ci: Vec<(f64, f64)>,
    pub level: f64,
    /// Atom draws behind each estimate.
    pub n_atoms: usize,
    /// Structure pairs evaluated per exact split.
    pub n_pairs: usize,
}

impl IndexReport {
    fn from_splits(rho_grid: &[f64], splits: &[f64], n_pairs: usize) -> Result<Self> {
        let n = splits.len();
        let successes: Vec<usize> = rho_grid
            .iter()
            .map(|r| splits.iter().filter(|s| **s >= *r).count())
            .collect();
        let ci = successes
            .iter()
            .map(|&k| wilson_interval(k, n, CI_LEVEL))
            .collect::<Result<Vec<_>>>()?;
        Ok(IndexReport {
            rho_grid: rho_grid.to_vec(),
            tau_hat: successes.iter().map(|&k| k as f64 / n as f64).collect(),
            successes,
            ci,
            level: CI_LEVEL,
            n_atoms: n,
            n_pairs,
        })
    }
}

/// For each `rho`, the fraction of `n_atoms` data-distribution draws whose
/// exact average split of `e` is at least `rho`.
pub fn estimate_avg_split_tau<S, D>(
    space: &S,
    e: &WeightedEnsemble<S::Structure>,
    d: &D,
    rho_grid: &[f64],
    n_atoms: usize,
    rng: &mut RngStream,
) -> Result<IndexReport>
where
    S: StructureSpace,
    D: Distance<S::Structure> + ?Sized,
{
    if n_atoms == 0 || rho_grid.is_empty() {
        return Err(NdbalError::invalid("need atoms and a non-empty rho grid"));
    }
    if !(avg_diam_exact(e, d) > 0.0) {
        return Err(NdbalError::DegeneratePosterior);
    }
    let splits = (0..n_atoms)
        .map(|i| exact_average_split(e, &space.draw_atom(i as u64, rng), d, space))
        .collect::<Result<Vec<_>>>()?;
    let live = (0..e.len()).filter(|&i| e.weight(i) > 0.0).count();
    IndexReport::from_splits(rho_grid, &splits, live * (live - 1) / 2)
}

/// `1 / (16 ceil(log2(2 / eps)))`.
pub fn rho_star(eps: f64) -> f64 {
    1.0 / (16.0 * (2.0 / eps).log2().ceil())
}

/// `{rho*/2, rho*, 2 rho*, 0.1, 0.25, 0.5}`.
pub fn default_rho_grid(rho_star: f64) -> Vec<f64> {
    vec![rho_star / 2.0, rho_star, 2.0 * rho_star, 0.1, 0.25, 0.5]
}

/// Ensemble size for index checks.
pub const INDEX_ENSEMBLE_SIZE: usize = 64;

/// How index-check ensembles are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    /// I.i.d. prior draws.
    Prior,
    /// I.i.d. draws from a prior concentrated around a random centre, with
    /// spread chosen so the average diameter is about `1.5 eps`.
    Localized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexVerification {
    pub eps: f64,
    pub rho_star: f64,
    pub ensemble_kind: EnsembleKind,
    /// One atom per used ensemble.
    pub report: IndexReport,
    /// Ensembles with average diameter `<= eps`, left out.
    pub skipped: usize,
    pub tau_at_rho_star: f64,
    pub tau_ci: (f64, f64),
    pub c_hat: f64,
    pub c_hat_ci: (f64, f64),
    pub tau_floor: Option<f64>,
    /// CI upper bound below the claimed floor.
    pub violation: bool,
}

impl IndexVerification {
    pub fn ci_excludes_zero(&self) -> bool {
        self.tau_ci.0 > 0.0
    }
}

#[allow(clippy::too_many_arguments)]
fn verify_index<S, D, F>(
    space: &S,
    d: &D,
    mut ensemble: F,
    eps: f64,
    tau_floor: Option<f64>,
    kind: EnsembleKind,
    n_trials: usize,
    rng: &mut RngStream,
) -> Result<IndexVerification>
where
    S: StructureSpace,
    D: Distance<S::Structure> + ?Sized,
    F: FnMut(&mut RngStream) -> Vec<S::Structure>,
{
    if !(eps > 0.0 && eps < 1.0) {
        return Err(NdbalError::invalid(format!("eps = {eps} must lie in (0, 1)")));
    }
    if n_trials == 0 {
        return Err(NdbalError::invalid("n_trials must be >= 1"));
    }
    let rs = rho_star(eps);
    let mut splits = Vec::with_capacity(n_trials);
    let mut skipped = 0;
    for t in 0..n_trials {
        let mut trial_rng = rng.derive("index-trial", t as u64);
        let e = WeightedEnsemble::uniform(ensemble(&mut trial_rng))?;
        if avg_diam_exact(&e, d) <= eps {
            skipped += 1;
            continue;
        }
        let a = space.draw_atom(t as u64, &mut trial_rng);
        splits.push(exact_average_split(&e, &a, d, space)?);
    }
    if splits.is_empty() {
        return Err(NdbalError::invalid(
            "every ensemble had average diameter <= eps",
        ));
    }
    let n = INDEX_ENSEMBLE_SIZE;
    let report = IndexReport::from_splits(&default_rho_grid(rs), &splits, n * (n - 1) / 2)?;
    let (tau, tau_ci) = (report.tau_hat[1], report.ci[1]);
    Ok(IndexVerification {
        eps,
        rho_star: rs,
        ensemble_kind: kind,
        skipped,
        tau_at_rho_star: tau,
        tau_ci,
        c_hat: tau / eps,
        c_hat_ci: (tau_ci.0 / eps, tau_ci.1 / eps),
        tau_floor,
        violation: tau_floor.is_some_and(|f| tau_ci.1 < f),
        report,
    })
}

/// `E ||N(0, I_m)||`.
fn mean_gaussian_norm(m: usize) -> f64 {
    let m = m as f64;
    2f64.sqrt() * (ln_gamma((m + 1.0) / 2.0) - ln_gamma(m / 2.0)).exp()
}

/// Ranking index at `rho* = 1/(16 ceil(log2(2/eps)))` under the closed-form
/// ranking distance with uniform-on-sphere objects, localized ensembles.
pub fn verify_ranking_index(
    d_dim: usize,
    eps: f64,
    n_trials: usize,
    rng: &mut RngStream,
) -> Result<IndexVerification> {
    verify_ranking_index_with(d_dim, eps, n_trials, EnsembleKind::Localized, rng)
}

pub fn verify_ranking_index_with(
    d_dim: usize,
    eps: f64,
    n_trials: usize,
    kind: EnsembleKind,
    rng: &mut RngStream,
) -> Result<IndexVerification> {
    let space = RankingSpace::new(d_dim, ObjectMeasure::UniformSphere)?;
    // angle between two perturbed unit vectors ~ kappa ||N(0, 2 I_{d-1})||
    let kappa = 1.5 * eps * std::f64::consts::PI / (2f64.sqrt() * mean_gaussian_norm(d_dim - 1));
    let gen = |r: &mut RngStream| -> Vec<Vec<f64>> {
        match kind {
            EnsembleKind::Prior => (0..INDEX_ENSEMBLE_SIZE)
                .map(|_| sample_unit_sphere(d_dim, r))
                .collect(),
            EnsembleKind::Localized => {
                let centre = sample_unit_sphere(d_dim, r);
                (0..INDEX_ENSEMBLE_SIZE)
                    .map(|_| {
                        let mut w = sample_gaussian(d_dim, kappa, r);
                        w.iter_mut().zip(&centre).for_each(|(x, c)| *x += c);
                        let n = crate::space::norm(&w);
                        w.into_iter().map(|x| x / n).collect()
                    })
                    .collect()
            }
        }
    };
    verify_index(&space, &rank_distance, gen, eps, None, kind, n_trials, rng)
}

/// Interval-clustering index under the identification distance with pair
/// atoms, floor `eps mu(I) / 2`, prior ensembles.
pub fn verify_interval_index(
    k: usize,
    interval: Interval,
    eps: f64,
    n_trials: usize,
    rng: &mut RngStream,
) -> Result<IndexVerification> {
    verify_interval_index_with(k, interval, eps, n_trials, EnsembleKind::Prior, rng)
}

pub fn verify_interval_index_with(
    k: usize,
    interval: Interval,
    eps: f64,
    n_trials: usize,
    kind: EnsembleKind,
    rng: &mut RngStream,
) -> Result<IndexVerification> {
    if k < 2 {
        return Err(NdbalError::invalid("need k >= 2 clusters"));
    }
    let space = IntervalClusteringSpace::new(k, interval, IntervalAtomKind::Pair)?;
    let d = move |g: &IntervalClustering, h: &IntervalClustering| {
        d_interval_i(g, h, &interval).expect("structures keep I intact")
    };
    // the two boundaries next to I each move by a difference of uniforms
    let s = 1.125 * eps;
    let gen = |r: &mut RngStream| -> Vec<IntervalClustering> {
        match kind {
            EnsembleKind::Prior => (0..INDEX_ENSEMBLE_SIZE)
                .map(|_| space.sample_structure(r))
                .collect(),
            EnsembleKind::Localized => {
                let base = space.sample_structure(r);
                (0..INDEX_ENSEMBLE_SIZE)
                    .map(|_| {
                        let bs = base
                            .boundaries()
                            .iter()
                            .map(|&b| {
                                let x = b + s * (2.0 * r.random::<f64>() - 1.0);
                                if b <= interval.lo {
                                    x.clamp(0.0, interval.lo)
                                } else {
                                    x.clamp(interval.hi, 1.0)
                                }
                            })
                            .collect();
                        space.structure(bs).expect("perturbed boundaries stay outside I")
                    })
                    .collect()
            }
        }
    };
    let floor = eps * interval.mass() / 2.0;
    verify_index(&space, &d, gen, eps, Some(floor), kind, n_trials, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub edge_split: f64,
    pub avg_split: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub eps_edge: f64,
    pub n_edges: usize,
    pub rows: Vec<ProbeRow>,
}

impl ProbeReport {
    /// Fraction of atoms with edge split `>= rho`.
    pub fn edge_fraction(&self, rho: f64) -> f64 {
        self.rows.iter().filter(|r| r.edge_split >= rho).count() as f64 / self.rows.len() as f64
    }

    /// Fraction of atoms with average split `>= rho`.
    pub fn avg_fraction(&self, rho: f64) -> f64 {
        self.rows.iter().filter(|r| r.avg_split >= rho).count() as f64 / self.rows.len() as f64
    }

    /// Average-split level matched to edge split `rho`:
    /// `rho / (4 ceil(log2(1 / eps_edge)))`.
    pub fn scaled_rho(&self, rho: f64) -> f64 {
        rho / (4.0 * (1.0 / self.eps_edge).log2().ceil().max(1.0))
    }
}

/// Edge split and exact average split of `e` for `n_atoms` atom draws.
pub fn splitting_vs_avg_splitting_probe<S, D>(
    space: &S,
    e: &WeightedEnsemble<S::Structure>,
    edges: &EdgeSet<S::Structure>,
    d: &D,
    n_atoms: usize,
    rng: &mut RngStream,
) -> Result<ProbeReport>
where
    S: StructureSpace,
    D: Distance<S::Structure> + ?Sized,
{
    if edges.is_empty() {
        return Err(NdbalError::invalid("edge set is empty"));
    }
    if n_atoms == 0 {
        return Err(NdbalError::invalid("n_atoms must be >= 1"));
    }
    let rows = (0..n_atoms)
        .map(|i| {
            let a = space.draw_atom(i as u64, rng);
            Ok::<_, NdbalError>(ProbeRow {
                edge_split: edge_split(edges, &a, space)?,
                avg_split: exact_average_split(e, &a, d, space)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ProbeReport {
        eps_edge: edges.eps_edge(),
        n_edges: edges.len(),
        rows,
    })
}
