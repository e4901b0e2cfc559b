//! Pairwise choice over a fixed item set, with best-item distances.

use rand::Rng;

use crate::error::{NdbalError, Result};
use crate::instances::linear::sample_unit_sphere;
use crate::rng::RngStream;
use crate::space::{dot, norm, LinearSpace, Response, ResponseSet, StructureSpace};

/// Items `x_1..x_n` on the unit sphere; atoms are ordered pairs `(i, j)`,
/// `i != j`, drawn uniformly. Response `+1` means item `i` is preferred.
#[derive(Debug, Clone)]
pub struct LogitChoiceSpace {
    items: Vec<Vec<f64>>,
    dim: usize,
    responses: ResponseSet,
}

impl LogitChoiceSpace {
    pub fn new(items: Vec<Vec<f64>>) -> Result<Self> {
        if items.len() < 2 {
            return Err(NdbalError::invalid("choice space needs at least two items"));
        }
        let dim = items[0].len();
        if items.iter().any(|x| x.len() != dim || (norm(x) - 1.0).abs() > 1e-9) {
            return Err(NdbalError::invalid("items must be unit vectors of equal dimension"));
        }
        let responses = ResponseSet::new(vec!["second".into(), "first".into()], vec![-1.0, 1.0])?;
        Ok(LogitChoiceSpace {
            items,
            dim,
            responses,
        })
    }

    /// `n` items drawn uniformly from the unit sphere in `dim` dimensions.
    pub fn random(n: usize, dim: usize, rng: &mut RngStream) -> Result<Self> {
        LogitChoiceSpace::new((0..n).map(|_| sample_unit_sphere(dim, rng)).collect())
    }

    pub fn items(&self) -> &[Vec<f64>] {
        &self.items
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    fn check_pair(&self, &(i, j): &(usize, usize)) -> Result<()> {
        if i >= self.items.len() || j >= self.items.len() || i == j {
            return Err(NdbalError::IncompatibleAtom(format!(
                "item pair ({i}, {j}) invalid for {} items",
                self.items.len()
            )));
        }
        Ok(())
    }
}

/// Index of the top item under `w`; ties go to the lowest index.
pub fn top_item(w: &[f64], items: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, x) in items.iter().enumerate() {
        let s = dot(w, x);
        if s > best_score {
            best_score = s;
            best = i;
        }
    }
    best
}

/// `1[i_w != i_v]`.
pub fn d_best_item(w: &[f64], v: &[f64], items: &[Vec<f64>]) -> f64 {
    (top_item(w, items) != top_item(v, items)) as u8 as f64
}

/// `||x_{i_w} - x_{i_v}||`, halved when `normalized` so it lies in `[0, 1]`.
pub fn d_approx_best_item(w: &[f64], v: &[f64], items: &[Vec<f64>], normalized: bool) -> f64 {
    let (a, b) = (&items[top_item(w, items)], &items[top_item(v, items)]);
    let gap = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    if normalized {
        gap / 2.0
    } else {
        gap
    }
}

impl StructureSpace for LogitChoiceSpace {
    type Structure = Vec<f64>;
    type Payload = (usize, usize);

    fn response_set(&self) -> &ResponseSet {
        &self.responses
    }

    fn sample_payload(&self, rng: &mut RngStream) -> (usize, usize) {
        let n = self.items.len();
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        (i, j)
    }

    fn evaluate(&self, w: &Vec<f64>, a: &(usize, usize)) -> Result<Response> {
        let z = self.margin(w, a).expect("choice space has margins")?;
        Ok(if z > 0.0 { Response(1) } else { Response(0) })
    }

    fn margin(&self, w: &Vec<f64>, a: &(usize, usize)) -> Option<Result<f64>> {
        Some(self.check_pair(a).and_then(|_| {
            if w.len() != self.dim {
                return Err(NdbalError::IncompatibleAtom("weight dimension mismatch".into()));
            }
            Ok(dot(w, &self.items[a.0]) - dot(w, &self.items[a.1]))
        }))
    }
}

impl LinearSpace for LogitChoiceSpace {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn features(&self, a: &(usize, usize)) -> Result<Vec<f64>> {
        self.check_pair(a)?;
        Ok(self.items[a.0]
            .iter()
            .zip(&self.items[a.1])
            .map(|(x, y)| x - y)
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{LogisticOracle, Oracle};
    use crate::space::Atom;
    use approx::assert_abs_diff_eq;

    #[test]
    fn prefers_item_with_larger_score() {
        let s = LogitChoiceSpace::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let r = s.evaluate(&vec![1.0, 0.0], &(0, 1)).unwrap();
        assert_eq!(s.response_set().label(r), "first");
        assert!(s.evaluate(&vec![1.0, 0.0], &(0, 0)).is_err());
        assert!(s.evaluate(&vec![1.0, 0.0], &(0, 7)).is_err());
    }

    #[test]
    fn best_item_distances() {
        let items = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0]];
        let w = [1.0, 0.1];
        let v = [-1.0, 0.1];
        assert_eq!(d_best_item(&w, &w, &items), 0.0);
        assert_eq!(d_approx_best_item(&w, &w, &items, false), 0.0);
        assert_eq!(d_best_item(&w, &v, &items), 1.0);
        assert_abs_diff_eq!(d_approx_best_item(&w, &v, &items, false), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d_approx_best_item(&w, &v, &items, true), 1.0, epsilon = 1e-15);
        // different weights, same argmax
        assert_eq!(d_best_item(&w, &[5.0, -0.2], &items), 0.0);
    }

    #[test]
    fn logit_choice_probability_of_log3_gap() {
        // <w*, x_i - x_j> = log 3 picks i with probability 3/4
        let s = LogitChoiceSpace::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let w = vec![3.0f64.ln(), 0.0];
        let o = LogisticOracle::new(w);
        let law = o.law(&s, &Atom::new(0, (0, 1))).unwrap();
        assert_abs_diff_eq!(law[1], 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(law[0], 0.25, epsilon = 1e-15);
    }

    #[test]
    fn sampled_pairs_are_distinct_and_in_range() {
        let mut rng = RngStream::new(2, "pairs");
        let s = LogitChoiceSpace::random(5, 3, &mut rng).unwrap();
        for _ in 0..1000 {
            let (i, j) = s.sample_payload(&mut rng);
            assert!(i != j && i < 5 && j < 5);
        }
    }
}
