//! Inverse-sampling query selection and the exact average split.

use crate::diameter::avg_diam_exact;
use crate::distance::Distance;
use crate::ensemble::WeightedEnsemble;
use crate::error::{NdbalError, Result};
use crate::posterior::PosteriorHandle;
use crate::rng::RngStream;
use crate::space::{Atom, Response, StructureSpace};

/// `N = 6 (2 + alpha) / alpha^2 * ln((m + |Y|) / delta)`.
pub fn threshold_n(alpha: f64, delta: f64, m: usize, y_count: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(NdbalError::invalid(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(NdbalError::invalid(format!("delta = {delta} must lie in (0, 1)")));
    }
    if m == 0 {
        return Err(NdbalError::invalid("need at least one candidate atom"));
    }
    Ok(6.0 * (2.0 + alpha) / (alpha * alpha) * ((m + y_count) as f64 / delta).ln())
}

/// Upper bound on the pairs SELECT draws when some candidate `rho`-average
/// splits a posterior of average diameter `avg_diam`.
pub fn pair_bound(alpha: f64, delta: f64, m: usize, y_count: usize, rho: f64, avg_diam: f64) -> f64 {
    12.0 / (alpha * alpha * (1.0 - alpha) * rho * avg_diam)
        * ((m + y_count) as f64 / delta).ln()
}

/// Per-(atom, response) accumulators.
#[derive(Debug, Clone)]
pub struct SplitTally {
    cells: Vec<Vec<f64>>,
    rounds: usize,
    threshold: f64,
}

impl SplitTally {
    pub fn new(n_atoms: usize, n_responses: usize, threshold: f64) -> Self {
        SplitTally {
            cells: vec![vec![0.0; n_responses]; n_atoms],
            rounds: 0,
            threshold,
        }
    }

    /// Adds `dist` to every cell of atom `i` except the one where both
    /// structures answered `y`.
    pub fn add(&mut self, i: usize, dist: f64, rg: Response, rh: Response) {
        for (y, cell) in self.cells[i].iter_mut().enumerate() {
            if !(rg.0 == y && rh.0 == y) {
                *cell += dist;
            }
        }
    }

    pub fn finish_round(&mut self) {
        self.rounds += 1;
    }

    pub fn cell(&self, i: usize, y: usize) -> f64 {
        self.cells[i][y]
    }

    pub fn min_over_y(&self, i: usize) -> f64 {
        self.cells[i].iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Lowest atom index whose every cell reached the threshold.
    pub fn qualified(&self) -> Option<usize> {
        (0..self.cells.len()).find(|&i| self.min_over_y(i) >= self.threshold)
    }

    /// Atom with the largest `min_y S`, lowest index on ties.
    pub fn best(&self) -> usize {
        let mut best = 0;
        for i in 1..self.cells.len() {
            if self.min_over_y(i) > self.min_over_y(best) {
                best = i;
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelectOutcome {
    pub index: usize,
    pub pairs_drawn: usize,
}

/// Pairs drawn from the posterior per batch.
const PAIR_BATCH: usize = 64;

/// Returns the index of the first candidate whose tally reaches `N` for every
/// response. `k_max` defaults to `ceil(50 N)`.
#[allow(clippy::too_many_arguments)]
pub fn select<S, P, D>(
    p: &mut P,
    space: &S,
    atoms: &[Atom<S::Payload>],
    alpha: f64,
    delta: f64,
    d: &D,
    k_max: Option<usize>,
    rng: &mut RngStream,
) -> Result<SelectOutcome>
where
    S: StructureSpace,
    P: PosteriorHandle<S> + ?Sized,
    D: Distance<S::Structure> + ?Sized,
{
    if atoms.is_empty() {
        return Err(NdbalError::invalid("select needs at least one candidate atom"));
    }
    let n_y = space.response_set().len();
    let n = threshold_n(alpha, delta, atoms.len(), n_y)?;
    let k_max = k_max.unwrap_or((50.0 * n).ceil() as usize);
    if k_max == 0 {
        return Err(NdbalError::invalid("k_max must be >= 1"));
    }
    let mut tally = SplitTally::new(atoms.len(), n_y, n);
    while tally.rounds() < k_max {
        let batch = PAIR_BATCH.min(k_max - tally.rounds());
        for (g, h) in p.draw_pairs(batch, rng)? {
            let dist = d.distance(&g, &h);
            if dist > 0.0 {
                for (i, a) in atoms.iter().enumerate() {
                    let rg = space.evaluate(&g, a.payload())?;
                    let rh = space.evaluate(&h, a.payload())?;
                    tally.add(i, dist, rg, rh);
                }
            }
            tally.finish_round();
            if let Some(index) = tally.qualified() {
                return Ok(SelectOutcome {
                    index,
                    pairs_drawn: tally.rounds(),
                });
            }
        }
    }
    Err(NdbalError::SelectTimeout {
        best_index: tally.best(),
        rounds: tally.rounds(),
    })
}

/// Largest `rho` such that `a` `rho`-average splits `e`:
/// `1 - max_y pi(G_a^y)^2 avg-diam(pi | G_a^y) / avg-diam(pi)`.
pub fn exact_average_split<S, D>(
    e: &WeightedEnsemble<S::Structure>,
    a: &Atom<S::Payload>,
    d: &D,
    space: &S,
) -> Result<f64>
where
    S: StructureSpace,
    D: Distance<S::Structure> + ?Sized,
{
    let total = avg_diam_exact(e, d);
    if !(total > 0.0) {
        return Err(NdbalError::DegeneratePosterior);
    }
    let mut groups: Vec<Vec<(usize, f64)>> = vec![Vec::new(); space.response_set().len()];
    for (i, g) in e.structures().iter().enumerate() {
        let w = e.weight(i);
        if w > 0.0 {
            groups[space.evaluate(g, a.payload())?.0].push((i, w));
        }
    }
    let mut worst = 0.0f64;
    for grp in &groups {
        // pi(G^y)^2 avg-diam(pi | G^y) = sum over ordered pairs inside G^y
        let mut s = 0.0;
        for (k, &(i, wi)) in grp.iter().enumerate() {
            for &(j, wj) in &grp[k + 1..] {
                s += 2.0 * wi * wj * d.distance(e.structure(i), e.structure(j));
            }
        }
        worst = worst.max(s);
    }
    let rho = 1.0 - worst / total;
    // consensus atoms give exactly 0 rather than rounding noise
    Ok(if rho < 1e-12 { 0.0 } else { rho })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::MatrixDistance;
    use crate::instances::finite::FiniteLabeledSpace;
    use approx::assert_abs_diff_eq;

    fn four_structure() -> (FiniteLabeledSpace, WeightedEnsemble<usize>, MatrixDistance) {
        // atom 0 splits {0,1} | {2,3}; atom 1 is a consensus atom
        let space = FiniteLabeledSpace::new(
            vec![vec![0, 0], vec![0, 0], vec![1, 0], vec![1, 0]],
            2,
        )
        .unwrap();
        let e = WeightedEnsemble::uniform(vec![0, 1, 2, 3]).unwrap();
        let rows: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..4).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
            .collect();
        (space, e, MatrixDistance::from_rows(&rows))
    }

    #[test]
    fn threshold_values() {
        assert_abs_diff_eq!(
            threshold_n(0.5, 0.05, 10, 2).unwrap(),
            60.0 * 240f64.ln(),
            epsilon = 1e-9
        );
        assert!((threshold_n(0.5, 0.05, 10, 2).unwrap() - 328.84).abs() < 0.01);
        let lead = threshold_n(0.999_999, std::f64::consts::E.recip(), 1, 0).unwrap();
        assert!((lead - 18.0).abs() < 1e-3);
        let mut prev = f64::INFINITY;
        for k in 1..100 {
            let v = threshold_n(k as f64 / 100.0, 0.05, 10, 2).unwrap();
            assert!(v < prev);
            prev = v;
        }
        assert!(threshold_n(0.5, 0.05, 20, 2).unwrap() > threshold_n(0.5, 0.05, 10, 2).unwrap());
    }

    #[test]
    fn exact_split_of_four_structure_instance() {
        let (space, e, d) = four_structure();
        let split = exact_average_split(&e, &Atom::new(0, 0), &d, &space).unwrap();
        // avg-diam 12/16; each side holds 2 ordered pairs of weight 1/16
        assert_abs_diff_eq!(split, 1.0 - (2.0 / 16.0) / (12.0 / 16.0), epsilon = 1e-12);
        assert_abs_diff_eq!(split, 5.0 / 6.0, epsilon = 1e-12);
        let consensus = exact_average_split(&e, &Atom::new(1, 1), &d, &space).unwrap();
        assert_abs_diff_eq!(consensus, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn exact_split_of_distinguishing_atom_is_one() {
        let space = FiniteLabeledSpace::new(vec![vec![0], vec![1]], 2).unwrap();
        let e = WeightedEnsemble::uniform(vec![0usize, 1]).unwrap();
        let d = MatrixDistance::from_rows(&[vec![0.0, 0.3], vec![0.3, 0.0]]);
        assert_eq!(exact_average_split(&e, &Atom::new(0, 0), &d, &space).unwrap(), 1.0);
        let single = WeightedEnsemble::point_mass(0usize);
        assert!(matches!(
            exact_average_split(&single, &Atom::new(0, 0), &d, &space),
            Err(NdbalError::DegeneratePosterior)
        ));
    }

    #[test]
    fn select_finds_the_splitting_atom() {
        let (space, mut e, d) = four_structure();
        let atoms = vec![Atom::new(0, 1usize), Atom::new(1, 0usize)];
        let mut hits = 0;
        for trial in 0..100 {
            let mut rng = RngStream::new(trial, "select");
            let out = select(&mut e, &space, &atoms, 0.5, 0.05, &d, None, &mut rng).unwrap();
            let split = exact_average_split(&e, &atoms[out.index], &d, &space).unwrap();
            if split >= 0.5 * 5.0 / 6.0 {
                hits += 1;
            }
        }
        assert!(hits >= 90);
    }

    #[test]
    fn select_times_out_on_consensus() {
        let (space, mut e, d) = four_structure();
        let atoms = vec![Atom::new(0, 1usize)];
        let mut rng = RngStream::new(1, "timeout");
        let err = select(&mut e, &space, &atoms, 0.5, 0.05, &d, Some(500), &mut rng).unwrap_err();
        assert!(matches!(err, NdbalError::SelectTimeout { best_index: 0, rounds: 500 }));
    }

    #[test]
    fn tally_cells_increase_by_at_most_the_distance() {
        let mut t = SplitTally::new(1, 3, 10.0);
        t.add(0, 0.4, Response(1), Response(1));
        assert_eq!([t.cell(0, 0), t.cell(0, 1), t.cell(0, 2)], [0.4, 0.0, 0.4]);
        t.add(0, 0.5, Response(0), Response(2));
        assert_eq!([t.cell(0, 0), t.cell(0, 1), t.cell(0, 2)], [0.9, 0.5, 0.9]);
        assert_eq!(t.qualified(), None);
    }

    proptest::proptest! {
        #[test]
        fn tally_is_monotone(steps in proptest::collection::vec((0.0f64..=1.0, 0usize..3, 0usize..3), 1..50)) {
            let mut t = SplitTally::new(1, 3, 1e9);
            let mut prev = vec![0.0; 3];
            for (dist, a, b) in steps {
                t.add(0, dist, Response(a), Response(b));
                for y in 0..3 {
                    let inc = t.cell(0, y) - prev[y];
                    proptest::prop_assert!((0.0..=1.0 + 1e-12).contains(&inc));
                    prev[y] = t.cell(0, y);
                }
            }
        }
    }
}
