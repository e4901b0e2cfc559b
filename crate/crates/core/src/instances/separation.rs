//! The star-shaped interval family that is hard under `d_c` and easy under
//! `d_I`, plus counters for distinguishing queries.

use rand::Rng;

use crate::error::{NdbalError, Result};
use crate::instances::interval::{
    d_interval_c, Interval, IntervalAtom, IntervalAtomKind, IntervalClustering,
    IntervalClusteringSpace,
};
use crate::rng::RngStream;
use crate::space::StructureSpace;

#[derive(Debug, Clone)]
pub struct SeparationFamily {
    /// Pair-atom space over `G_{k+2, I}`.
    pub space: IntervalClusteringSpace,
    pub interval: Interval,
    pub alpha: f64,
    pub eps: f64,
    /// `g_o` first, then `g_1..g_{N-1}`.
    pub members: Vec<IntervalClustering>,
}

impl SeparationFamily {
    /// Total family size `N`.
    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn center(&self) -> &IntervalClustering {
        &self.members[0]
    }

    /// Adds clusterings that move the right edge of the `I`-cluster to
    /// `c_j = alpha + j (1 - alpha) / (extra + 1)`, `j = 1..=extra`, keeping
    /// the center's boundaries to the right of `c_j`. The exact family has a
    /// single `I`-cluster, so `d_I` is zero on it; these members make the
    /// `d_I` problem non-trivial.
    pub fn augmented(&self, extra: usize) -> Vec<IntervalClustering> {
        let mut out = self.members.clone();
        for j in 1..=extra {
            let c = self.alpha + j as f64 * (1.0 - self.alpha) / (extra + 1) as f64;
            let mut bs = vec![c];
            bs.extend(self.center().boundaries().iter().filter(|b| **b > c));
            out.push(IntervalClustering::new(bs).expect("boundaries in [0, 1]"));
        }
        out
    }

    /// Point-atom space for `d_I` queries on the same interval.
    pub fn point_space(&self, max_clusters: usize) -> Result<IntervalClusteringSpace> {
        IntervalClusteringSpace::new(max_clusters, self.interval, IntervalAtomKind::Point)
    }
}

/// Builds `g_o` with dividing points `alpha + (i - 1)(1 - alpha)/k'` and
/// `g_i` adding the midpoint `b_i = alpha + (2i - 1)(1 - alpha)/(2k')`, where
/// `k' = min(k, floor(1/sqrt(8 eps)))`. `I = [0, alpha]`.
pub fn build_separation_family(k: usize, alpha: f64, eps: f64) -> Result<SeparationFamily> {
    if k == 0 {
        return Err(NdbalError::invalid("k must be >= 1"));
    }
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(NdbalError::invalid(format!("mu(I) = {alpha} must lie in (0, 1/2]")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(NdbalError::invalid(format!("eps = {eps} must lie in (0, 1)")));
    }
    let cap = (1.0 / (8.0 * eps).sqrt()).floor() as usize;
    let k_eff = k.min(cap);
    if k_eff == 0 {
        return Err(NdbalError::invalid("eps too large for a non-empty family"));
    }
    let width = (1.0 - alpha) / k_eff as f64;
    let a: Vec<f64> = (0..k_eff).map(|i| alpha + i as f64 * width).collect();
    let interval = Interval::new(0.0, alpha)?;
    let space = IntervalClusteringSpace::new(k_eff + 2, interval, IntervalAtomKind::Pair)?;
    let mut members = vec![space.structure(a.clone())?];
    for i in 1..=k_eff {
        let mut bs = a.clone();
        bs.push(alpha + (2 * i - 1) as f64 * width / 2.0);
        members.push(space.structure(bs)?);
    }
    Ok(SeparationFamily {
        space,
        interval,
        alpha,
        eps,
        members,
    })
}

/// Indices `i >= 1` of members that answer `a` differently from `g_o`.
pub fn distinguished_by(family: &SeparationFamily, a: &IntervalAtom) -> Result<Vec<usize>> {
    let base = family.space.evaluate(family.center(), a)?;
    let mut out = Vec::new();
    for (i, g) in family.members.iter().enumerate().skip(1) {
        if family.space.evaluate(g, a)? != base {
            out.push(i);
        }
    }
    Ok(out)
}

/// Outcome of identifying `g_o` under `d_c` with noiseless pair queries.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentificationCount {
    /// Queries that removed at least one surviving member.
    pub informative_queries: usize,
    /// Largest number of members a single query removed.
    pub max_removed_per_query: usize,
    /// Atoms drawn in total.
    pub atoms_drawn: usize,
    pub identified: bool,
}

/// Draws pair atoms from `mu x mu` and queries every atom that separates a
/// surviving member from `g_o` (the target), until only `g_o` survives or
/// `max_atoms` is reached.
pub fn exhaustive_identification(
    family: &SeparationFamily,
    max_atoms: usize,
    rng: &mut RngStream,
) -> Result<IdentificationCount> {
    let mut alive: Vec<bool> = vec![true; family.size()];
    let mut count = IdentificationCount {
        informative_queries: 0,
        max_removed_per_query: 0,
        atoms_drawn: 0,
        identified: family.size() == 1,
    };
    while !count.identified && count.atoms_drawn < max_atoms {
        let a = IntervalAtom::Pair(rng.random(), rng.random());
        count.atoms_drawn += 1;
        let removed: Vec<usize> = distinguished_by(family, &a)?
            .into_iter()
            .filter(|i| alive[*i])
            .collect();
        if !removed.is_empty() {
            count.informative_queries += 1;
            count.max_removed_per_query = count.max_removed_per_query.max(removed.len());
            for i in removed {
                alive[i] = false;
            }
        }
        count.identified = alive.iter().skip(1).all(|x| !x);
    }
    Ok(count)
}

/// `d_c(g_o, g_i)` for every non-center member.
pub fn center_distances(family: &SeparationFamily) -> Vec<f64> {
    family
        .members
        .iter()
        .skip(1)
        .map(|g| d_interval_c(family.center(), g))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::interval::d_interval_i;
    use approx::assert_abs_diff_eq;

    #[test]
    fn k4_alpha02_family() {
        let f = build_separation_family(4, 0.2, 0.005).unwrap();
        let expect = [0.2, 0.4, 0.6, 0.8];
        for (b, e) in f.center().boundaries().iter().zip(expect) {
            assert_abs_diff_eq!(*b, e, epsilon = 1e-12);
        }
        assert_eq!(f.size(), 5);
        for (i, g) in f.members.iter().enumerate().skip(1) {
            let b = 0.2 + (2 * i - 1) as f64 * 0.8 / 8.0;
            assert!(g.boundaries().iter().any(|x| (x - b).abs() < 1e-12));
        }
        for d in center_distances(&f) {
            assert_abs_diff_eq!(d, 0.02, epsilon = 1e-12);
        }
    }

    #[test]
    fn size_follows_eps_cap() {
        // 1/sqrt(8 * 1e-4) = 35.35 > 32, so N = 33
        assert_eq!(build_separation_family(32, 0.2, 1e-4).unwrap().size(), 33);
        // 1/sqrt(8 * 0.02) = 2.5, so k' = 2
        assert_eq!(build_separation_family(32, 0.2, 0.02).unwrap().size(), 3);
        assert!(build_separation_family(4, 0.6, 0.01).is_err());
    }

    #[test]
    fn disagreement_regions_are_disjoint() {
        let f = build_separation_family(8, 0.25, 1e-3).unwrap();
        let mut rng = RngStream::new(3, "sep");
        let mut hits = 0;
        for _ in 0..20_000 {
            let a = f.space.sample_payload(&mut rng);
            let d = distinguished_by(&f, &a).unwrap();
            assert!(d.len() <= 1);
            hits += d.len();
        }
        assert!(hits > 0);
    }

    #[test]
    fn identification_needs_one_query_per_member() {
        let f = build_separation_family(6, 0.2, 1e-3).unwrap();
        let mut rng = RngStream::new(5, "ident");
        let c = exhaustive_identification(&f, 1_000_000, &mut rng).unwrap();
        assert!(c.identified);
        assert_eq!(c.max_removed_per_query, 1);
        assert_eq!(c.informative_queries, f.size() - 1);
    }

    #[test]
    fn exact_family_is_trivial_under_d_i() {
        let f = build_separation_family(8, 0.2, 1e-3).unwrap();
        for g in &f.members {
            assert_eq!(d_interval_i(f.center(), g, &f.interval).unwrap(), 0.0);
        }
        let aug = f.augmented(4);
        assert_eq!(aug.len(), f.size() + 4);
        let d = d_interval_i(&aug[f.size()], &aug[f.size() + 1], &f.interval).unwrap();
        assert_abs_diff_eq!(d, 0.8 / 5.0, epsilon = 1e-12);
    }
}
