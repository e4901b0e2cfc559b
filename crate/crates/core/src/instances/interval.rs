//! Clusterings of `[0, 1]` into intervals that keep a protected interval `I`
//! intact, with the pairwise distance `d_c` and the `I`-cluster distance `d_I`
//! in closed form under the uniform measure.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NdbalError, Result};
use crate::rng::RngStream;
use crate::space::{Response, ResponseSet, StructureSpace};

/// Closed interval `[lo, hi]` inside `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return Err(NdbalError::invalid(format!("[{lo}, {hi}] is not a sub-interval of [0, 1]")));
        }
        Ok(Interval { lo, hi })
    }

    /// Uniform measure of the interval.
    pub fn mass(&self) -> f64 {
        self.hi - self.lo
    }

    fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    fn strictly_contains(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }
}

/// Sorted cluster boundaries. Point `x` lies in cluster `#{b : b < x}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalClustering {
    boundaries: Vec<f64>,
}

impl IntervalClustering {
    pub fn new(mut boundaries: Vec<f64>) -> Result<Self> {
        if boundaries.iter().any(|b| !(0.0..=1.0).contains(b)) {
            return Err(NdbalError::invalid("boundaries must lie in [0, 1]"));
        }
        boundaries.sort_by(|a, b| a.partial_cmp(b).expect("finite boundaries"));
        Ok(IntervalClustering { boundaries })
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn cluster_of(&self, x: f64) -> usize {
        self.boundaries.partition_point(|b| *b < x)
    }

    /// The cluster containing `I`, as an interval `[left, right]`.
    fn cluster_span(&self, i: &Interval) -> (f64, f64) {
        let c = self.cluster_of(i.midpoint());
        let left = if c == 0 { 0.0 } else { self.boundaries[c - 1] };
        let right = self.boundaries.get(c).copied().unwrap_or(1.0);
        (left, right)
    }

    fn check_intact(&self, i: &Interval) -> Result<()> {
        match self.boundaries.iter().find(|b| i.strictly_contains(**b)) {
            Some(b) => Err(NdbalError::invalid(format!(
                "boundary {b} lies inside the protected interval [{}, {}]",
                i.lo, i.hi
            ))),
            None => Ok(()),
        }
    }
}

/// Atom kinds: a point pair (same cluster?) or a single point (same cluster
/// as `I`?).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum IntervalAtom {
    Pair(f64, f64),
    Point(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalAtomKind {
    Pair,
    Point,
}

#[derive(Debug, Clone)]
pub struct IntervalClusteringSpace {
    max_clusters: usize,
    interval: Interval,
    atom_kind: IntervalAtomKind,
    responses: ResponseSet,
}

impl IntervalClusteringSpace {
    pub fn new(max_clusters: usize, interval: Interval, atom_kind: IntervalAtomKind) -> Result<Self> {
        if max_clusters == 0 {
            return Err(NdbalError::invalid("need at least one cluster"));
        }
        Ok(IntervalClusteringSpace {
            max_clusters,
            interval,
            atom_kind,
            responses: ResponseSet::same_different(),
        })
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn max_clusters(&self) -> usize {
        self.max_clusters
    }

    /// Validates a boundary list against the cluster cap and `I`.
    pub fn structure(&self, boundaries: Vec<f64>) -> Result<IntervalClustering> {
        let g = IntervalClustering::new(boundaries)?;
        if g.boundaries.len() + 1 > self.max_clusters {
            return Err(NdbalError::invalid(format!(
                "{} boundaries exceed the cap of {} clusters",
                g.boundaries.len(),
                self.max_clusters
            )));
        }
        g.check_intact(&self.interval)?;
        Ok(g)
    }

    /// Prior draw: `k - 1` sorted uniforms on `[0, 1] \ I`.
    pub fn sample_structure(&self, rng: &mut RngStream) -> IntervalClustering {
        let outside = 1.0 - self.interval.mass();
        let bs = (0..self.max_clusters - 1)
            .map(|_| {
                let u = rng.random::<f64>() * outside;
                if u < self.interval.lo {
                    u
                } else {
                    u + self.interval.mass()
                }
            })
            .collect();
        IntervalClustering::new(bs).expect("draws lie in [0, 1]")
    }
}

impl StructureSpace for IntervalClusteringSpace {
    type Structure = IntervalClustering;
    type Payload = IntervalAtom;

    fn response_set(&self) -> &ResponseSet {
        &self.responses
    }

    fn sample_payload(&self, rng: &mut RngStream) -> IntervalAtom {
        match self.atom_kind {
            IntervalAtomKind::Pair => IntervalAtom::Pair(rng.random(), rng.random()),
            IntervalAtomKind::Point => IntervalAtom::Point(rng.random()),
        }
    }

    fn evaluate(&self, g: &IntervalClustering, a: &IntervalAtom) -> Result<Response> {
        let same = match *a {
            IntervalAtom::Pair(x, y) => {
                check_unit(x)?;
                check_unit(y)?;
                g.cluster_of(x) == g.cluster_of(y)
            }
            IntervalAtom::Point(x) => {
                check_unit(x)?;
                g.cluster_of(x) == g.cluster_of(self.interval.midpoint())
            }
        };
        Ok(Response(same as usize))
    }
}

fn check_unit(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(NdbalError::IncompatibleAtom(format!("point {x} outside [0, 1]")))
    }
}

/// `Pr_{x,y ~ U[0,1]}(g(x,y) != g'(x,y))`, integrated exactly over the
/// common refinement of both boundary lists.
pub fn d_interval_c(g: &IntervalClustering, h: &IntervalClustering) -> f64 {
    let mut cuts: Vec<f64> = g.boundaries.iter().chain(&h.boundaries).copied().collect();
    cuts.push(0.0);
    cuts.push(1.0);
    cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    cuts.dedup();
    let segments: Vec<(f64, usize, usize)> = cuts
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            (w[1] - w[0], g.cluster_of(mid), h.cluster_of(mid))
        })
        .collect();
    let mut total = 0.0;
    for (s, &(ls, gs, hs)) in segments.iter().enumerate() {
        for &(lt, gt, ht) in &segments[s + 1..] {
            if (gs == gt) != (hs == ht) {
                total += 2.0 * ls * lt;
            }
        }
    }
    total
}

/// `Pr_{x ~ U[0,1]}(g(x, I) != g'(x, I))`: the measure of the symmetric
/// difference between the clusters that contain `I`.
pub fn d_interval_i(g: &IntervalClustering, h: &IntervalClustering, i: &Interval) -> Result<f64> {
    g.check_intact(i)?;
    h.check_intact(i)?;
    let (gl, gr) = g.cluster_span(i);
    let (hl, hr) = h.cluster_span(i);
    Ok((gl - hl).abs() + (gr - hr).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(bs: &[f64]) -> IntervalClustering {
        IntervalClustering::new(bs.to_vec()).unwrap()
    }

    /// Midpoint-rule quadrature on a `steps x steps` grid.
    fn grid_d_c(g: &IntervalClustering, h: &IntervalClustering, steps: usize) -> f64 {
        let mut n = 0usize;
        for i in 0..steps {
            for j in 0..steps {
                let x = (i as f64 + 0.5) / steps as f64;
                let y = (j as f64 + 0.5) / steps as f64;
                if (g.cluster_of(x) == g.cluster_of(y)) != (h.cluster_of(x) == h.cluster_of(y)) {
                    n += 1;
                }
            }
        }
        n as f64 / (steps * steps) as f64
    }

    fn grid_d_i(g: &IntervalClustering, h: &IntervalClustering, i: &Interval, steps: usize) -> f64 {
        let z = 0.5 * (i.lo + i.hi);
        let n = (0..steps)
            .filter(|k| {
                let x = (*k as f64 + 0.5) / steps as f64;
                (g.cluster_of(x) == g.cluster_of(z)) != (h.cluster_of(x) == h.cluster_of(z))
            })
            .count();
        n as f64 / steps as f64
    }

    #[test]
    fn worked_example() {
        let i = Interval::new(0.0, 0.2).unwrap();
        let (g, h) = (c(&[0.5]), c(&[0.7]));
        assert_abs_diff_eq!(d_interval_i(&g, &h, &i).unwrap(), 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(d_interval_c(&g, &h), 0.32, epsilon = 1e-12);
        assert!((grid_d_c(&g, &h, 400) - 0.32).abs() < 0.01);
        assert_eq!(d_interval_c(&g, &g), 0.0);
        assert_eq!(d_interval_i(&g, &g, &i).unwrap(), 0.0);
    }

    #[test]
    fn boundary_inside_protected_interval_rejected() {
        let i = Interval::new(0.3, 0.5).unwrap();
        assert!(d_interval_i(&c(&[0.4]), &c(&[0.6]), &i).is_err());
        let space = IntervalClusteringSpace::new(3, i, IntervalAtomKind::Pair).unwrap();
        assert!(space.structure(vec![0.4]).is_err());
        assert!(space.structure(vec![0.1, 0.6, 0.8]).is_err()); // cap of 3 clusters
        assert!(space.structure(vec![0.3, 0.6]).is_ok());
    }

    #[test]
    fn closed_forms_match_grid_quadrature() {
        let mut rng = RngStream::new(4, "interval-quad");
        let i = Interval::new(0.35, 0.5).unwrap();
        let space = IntervalClusteringSpace::new(5, i, IntervalAtomKind::Pair).unwrap();
        for _ in 0..25 {
            let g = space.sample_structure(&mut rng);
            let h = space.sample_structure(&mut rng);
            assert!((d_interval_c(&g, &h) - grid_d_c(&g, &h, 400)).abs() < 0.01);
            let di = d_interval_i(&g, &h, &i).unwrap();
            assert!((di - grid_d_i(&g, &h, &i, 400)).abs() < 0.01);
        }
    }

    #[test]
    fn prior_draws_keep_interval_intact() {
        let mut rng = RngStream::new(8, "prior");
        let i = Interval::new(0.2, 0.45).unwrap();
        let space = IntervalClusteringSpace::new(6, i, IntervalAtomKind::Point).unwrap();
        for _ in 0..500 {
            let g = space.sample_structure(&mut rng);
            assert_eq!(g.boundaries().len(), 5);
            assert!(g.boundaries().windows(2).all(|w| w[0] <= w[1]));
            assert!(space.structure(g.boundaries().to_vec()).is_ok());
        }
    }

    #[test]
    fn straddling_pair_is_different_cluster() {
        let i = Interval::new(0.0, 0.2).unwrap();
        let space = IntervalClusteringSpace::new(2, i, IntervalAtomKind::Pair).unwrap();
        let g = space.structure(vec![0.5]).unwrap();
        let r = space.evaluate(&g, &IntervalAtom::Pair(0.1, 0.9)).unwrap();
        assert_eq!(space.response_set().label(r), "different");
        let r = space.evaluate(&g, &IntervalAtom::Point(0.4)).unwrap();
        assert_eq!(space.response_set().label(r), "same");
        assert!(space.evaluate(&g, &IntervalAtom::Point(1.5)).is_err());
    }
}
