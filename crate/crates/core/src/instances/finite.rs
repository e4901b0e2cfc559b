//! Explicit finite spaces: response tables, fairness and cluster-identification
//! distances, and random finite instances for exact lemma checks.

use rand::Rng;

use crate::distance::MatrixDistance;
use crate::ensemble::WeightedEnsemble;
use crate::error::{NdbalError, Result};
use crate::rng::RngStream;
use crate::space::{Response, ResponseSet, StructureSpace};

/// Finite atom list and finite structure set given as response tables.
///
/// Structures are row indices; atoms are column indices drawn from an explicit
/// atom distribution. Atoms may carry a protected-attribute bit.
#[derive(Debug, Clone)]
pub struct FiniteLabeledSpace {
    tables: Vec<Vec<usize>>,
    n_atoms: usize,
    responses: ResponseSet,
    atom_probs: Vec<f64>,
    atom_cdf: Vec<f64>,
    protected: Option<Vec<bool>>,
}

impl FiniteLabeledSpace {
    /// Uniform atom distribution, responses `0..n_responses`.
    pub fn new(tables: Vec<Vec<usize>>, n_responses: usize) -> Result<Self> {
        let n_atoms = tables.first().map(|r| r.len()).unwrap_or(0);
        let probs = vec![1.0 / n_atoms.max(1) as f64; n_atoms];
        Self::with_atom_probs(tables, ResponseSet::indexed(n_responses)?, probs)
    }

    pub fn with_atom_probs(
        tables: Vec<Vec<usize>>,
        responses: ResponseSet,
        atom_probs: Vec<f64>,
    ) -> Result<Self> {
        let n_atoms = atom_probs.len();
        if n_atoms == 0 {
            return Err(NdbalError::invalid("finite space needs at least one atom"));
        }
        for (i, row) in tables.iter().enumerate() {
            if row.len() != n_atoms {
                return Err(NdbalError::invalid(format!(
                    "response table {i} has {} entries, expected {n_atoms}",
                    row.len()
                )));
            }
            if let Some(r) = row.iter().find(|r| **r >= responses.len()) {
                return Err(NdbalError::invalid(format!(
                    "response table {i} uses response {r} outside the response set"
                )));
            }
        }
        let total: f64 = atom_probs.iter().sum();
        if !(total > 0.0) || atom_probs.iter().any(|p| *p < 0.0) {
            return Err(NdbalError::invalid("atom probabilities must be >= 0 with positive sum"));
        }
        let atom_probs: Vec<f64> = atom_probs.iter().map(|p| p / total).collect();
        let mut acc = 0.0;
        let atom_cdf = atom_probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(FiniteLabeledSpace {
            tables,
            n_atoms,
            responses,
            atom_probs,
            atom_cdf,
            protected: None,
        })
    }

    pub fn with_protected(mut self, protected: Vec<bool>) -> Result<Self> {
        if protected.len() != self.n_atoms {
            return Err(NdbalError::invalid("one protected bit per atom required"));
        }
        self.protected = Some(protected);
        Ok(self)
    }

    pub fn n_structures(&self) -> usize {
        self.tables.len()
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn atom_prob(&self, a: usize) -> f64 {
        self.atom_probs[a]
    }

    pub fn response(&self, g: usize, a: usize) -> usize {
        self.tables[g][a]
    }

    pub fn protected(&self) -> Option<&[bool]> {
        self.protected.as_deref()
    }
}

impl StructureSpace for FiniteLabeledSpace {
    type Structure = usize;
    type Payload = usize;

    fn response_set(&self) -> &ResponseSet {
        &self.responses
    }

    fn sample_payload(&self, rng: &mut RngStream) -> usize {
        let u: f64 = rng.random::<f64>();
        self.atom_cdf
            .partition_point(|c| *c <= u)
            .min(self.n_atoms - 1)
    }

    fn evaluate(&self, g: &usize, a: &usize) -> Result<Response> {
        let row = self
            .tables
            .get(*g)
            .ok_or_else(|| NdbalError::invalid(format!("structure {g} not in space")))?;
        row.get(*a)
            .map(|r| Response(*r))
            .ok_or_else(|| NdbalError::IncompatibleAtom(format!("atom index {a} out of range")))
    }

    fn enumerate(&self) -> Option<Vec<usize>> {
        Some((0..self.tables.len()).collect())
    }
}

/// Fair-classifier distance: the max of plain disagreement and the two
/// `lambda_fair`-weighted equal-opportunity gaps.
///
/// Responses are read through their numeric values (expected 0/1). A gap
/// whose conditioning event has zero mass in either protected group
/// contributes 0.
pub fn d_fair(g: usize, h: usize, lambda_fair: f64, space: &FiniteLabeledSpace) -> Result<f64> {
    let protected = space
        .protected()
        .ok_or_else(|| NdbalError::invalid("fair distance needs protected bits"))?;
    let rs = space.response_set();
    let value = |s: usize, a: usize| rs.value(Response(space.response(s, a)));

    let mut disagree = 0.0;
    for a in 0..space.n_atoms() {
        if space.response(g, a) != space.response(h, a) {
            disagree += space.atom_prob(a);
        }
    }

    // |E_{D0}[f(a) | c(a) = 1] - E_{D1}[f(a) | c(a) = 1]|
    let gap = |f: usize, c: usize| -> f64 {
        let mut num = [0.0; 2];
        let mut den = [0.0; 2];
        for a in 0..space.n_atoms() {
            if value(c, a) == 1.0 {
                let p = protected[a] as usize;
                den[p] += space.atom_prob(a);
                num[p] += space.atom_prob(a) * value(f, a);
            }
        }
        if den[0] == 0.0 || den[1] == 0.0 {
            0.0
        } else {
            (num[0] / den[0] - num[1] / den[1]).abs()
        }
    };

    Ok(disagree
        .max(lambda_fair * gap(g, h))
        .max(lambda_fair * gap(h, g)))
}

/// Cluster-identification distance between two clusterings of `n` items,
/// given as per-item cluster labels. `C(g, i)` includes `i` itself.
pub fn d_cluster_id(g: &[usize], h: &[usize], i_star: usize) -> Result<f64> {
    if g.len() != h.len() {
        return Err(NdbalError::invalid("clusterings cover different item sets"));
    }
    if i_star >= g.len() {
        return Err(NdbalError::invalid(format!("item {i_star} outside the item universe")));
    }
    let cg: Vec<usize> = (0..g.len()).filter(|&j| g[j] == g[i_star]).collect();
    let ch: Vec<usize> = (0..h.len()).filter(|&j| h[j] == h[i_star]).collect();
    let g_minus_h = cg.iter().filter(|&&j| h[j] != h[i_star]).count() as f64;
    let h_minus_g = ch.iter().filter(|&&j| g[j] != g[i_star]).count() as f64;
    Ok((g_minus_h / cg.len() as f64).max(h_minus_g / ch.len() as f64))
}

/// A random finite instance: response tables, a symmetric distance matrix, a
/// random prior and a target index.
#[derive(Debug, Clone)]
pub struct RandomFiniteInstance {
    pub space: FiniteLabeledSpace,
    pub distance: MatrixDistance,
    pub prior: WeightedEnsemble<usize>,
    pub g_star: usize,
}

impl RandomFiniteInstance {
    /// `n_structures` structures over `n_atoms` atoms with responses drawn
    /// uniformly from `0..n_responses`, distances uniform in `[0, 1]`,
    /// prior weights uniform in `(0, 1]` then normalized.
    pub fn generate(
        n_structures: usize,
        n_atoms: usize,
        n_responses: usize,
        rng: &mut RngStream,
    ) -> Result<Self> {
        if n_structures == 0 || n_atoms == 0 {
            return Err(NdbalError::invalid("instance must be non-empty"));
        }
        let tables: Vec<Vec<usize>> = (0..n_structures)
            .map(|_| (0..n_atoms).map(|_| rng.random_range(0..n_responses)).collect())
            .collect();
        let rows: Vec<Vec<f64>> = (0..n_structures)
            .map(|_| (0..n_structures).map(|_| rng.random::<f64>()).collect())
            .collect();
        let distance = MatrixDistance::from_rows(&rows);
        let probs: Vec<f64> = (0..n_structures)
            .map(|_| 1.0 - rng.random::<f64>())
            .collect();
        let prior = WeightedEnsemble::from_probabilities((0..n_structures).collect(), &probs)?;
        let g_star = rng.random_range(0..n_structures);
        Ok(RandomFiniteInstance {
            space: FiniteLabeledSpace::new(tables, n_responses)?,
            distance,
            prior,
            g_star,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn fair_space(tables: Vec<Vec<usize>>) -> FiniteLabeledSpace {
        FiniteLabeledSpace::new(tables, 2)
            .unwrap()
            .with_protected(vec![false, false, true, true])
            .unwrap()
    }

    #[test]
    fn fair_distance_hand_table() {
        // g' = all ones, g = ones except the last protected atom.
        // disagreement 1/4; gap(g | g'=1) = |1 - 1/2| = 1/2; gap(g' | g=1) = 0.
        let space = fair_space(vec![vec![1, 1, 1, 0], vec![1, 1, 1, 1]]);
        assert_abs_diff_eq!(d_fair(0, 1, 1.0, &space).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(d_fair(1, 0, 1.0, &space).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn fair_distance_reduces_to_disagreement_without_weight() {
        let space = fair_space(vec![vec![1, 1, 1, 0], vec![1, 1, 1, 1]]);
        assert_abs_diff_eq!(d_fair(0, 1, 0.0, &space).unwrap(), 0.25, epsilon = 1e-15);
        assert_eq!(d_fair(0, 0, 1.0, &space).unwrap(), 0.0);
    }

    #[test]
    fn fair_distance_zero_mass_conditional_contributes_zero() {
        // h never predicts 1 on protected atoms: the conditional on D1 is empty.
        let space = fair_space(vec![vec![1, 0, 0, 0], vec![1, 1, 0, 0]]);
        let d = d_fair(0, 1, 1.0, &space).unwrap();
        assert_abs_diff_eq!(d, 0.25, epsilon = 1e-15);
    }

    #[test]
    fn cluster_id_examples() {
        // g: items 0..4 together; h: only 0,1 with i* = 0
        let g = vec![0, 0, 0, 0, 1, 1];
        let h = vec![0, 0, 1, 1, 1, 1];
        assert_abs_diff_eq!(d_cluster_id(&g, &h, 0).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(d_cluster_id(&g, &g, 0).unwrap(), 0.0);
        // disjoint except i*, equal size s = 3
        let g = vec![0, 0, 0, 1, 1];
        let h = vec![0, 1, 1, 0, 0];
        assert_abs_diff_eq!(d_cluster_id(&g, &h, 0).unwrap(), 2.0 / 3.0, epsilon = 1e-15);
        assert!(d_cluster_id(&g, &h, 9).is_err());
    }

    #[test]
    fn incompatible_atom_is_typed_error() {
        let space = FiniteLabeledSpace::new(vec![vec![0, 1]], 2).unwrap();
        assert!(matches!(
            space.evaluate(&0, &5),
            Err(NdbalError::IncompatibleAtom(_))
        ));
    }

    #[test]
    fn random_instance_is_well_formed() {
        let mut rng = RngStream::new(5, "inst");
        let inst = RandomFiniteInstance::generate(8, 6, 3, &mut rng).unwrap();
        assert_eq!(inst.space.n_structures(), 8);
        assert!(inst.g_star < 8);
        for i in 0..8 {
            assert_eq!(inst.distance.get(i, i), 0.0);
        }
    }
}
