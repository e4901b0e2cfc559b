//! Feature-based rankings: `w` ranks `x` over `y` iff `<w, x> > <w, y>`.

use serde::{Deserialize, Serialize};

use crate::error::{NdbalError, Result};
use crate::instances::linear::{sample_gaussian, sample_unit_sphere};
use crate::rng::RngStream;
use crate::space::{dot, norm, LinearSpace, Response, ResponseSet, StructureSpace};

/// Spherically symmetric object measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectMeasure {
    UniformSphere,
    StandardGaussian,
}

impl ObjectMeasure {
    pub fn sample(&self, dim: usize, rng: &mut RngStream) -> Vec<f64> {
        match self {
            ObjectMeasure::UniformSphere => sample_unit_sphere(dim, rng),
            ObjectMeasure::StandardGaussian => sample_gaussian(dim, 1.0, rng),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankDistanceMode {
    /// Angle over pi; exact for spherically symmetric measures.
    ClosedForm,
    /// Monte Carlo estimate of `Pr_{x,y}(w(x,y) != w'(x,y))` with `n` pairs.
    MonteCarlo { n: usize },
}

#[derive(Debug, Clone)]
pub struct RankingSpace {
    dim: usize,
    measure: ObjectMeasure,
    responses: ResponseSet,
}

impl RankingSpace {
    pub fn new(dim: usize, measure: ObjectMeasure) -> Result<Self> {
        if dim < 2 {
            return Err(NdbalError::invalid("ranking space needs dimension >= 2"));
        }
        let responses = ResponseSet::new(vec!["0".into(), "1".into()], vec![-1.0, 1.0])?;
        Ok(RankingSpace {
            dim,
            measure,
            responses,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn measure(&self) -> ObjectMeasure {
        self.measure
    }

    /// Uniform draw of a unit weight vector.
    pub fn sample_structure(&self, rng: &mut RngStream) -> Vec<f64> {
        sample_unit_sphere(self.dim, rng)
    }
}

impl StructureSpace for RankingSpace {
    type Structure = Vec<f64>;
    type Payload = (Vec<f64>, Vec<f64>);

    fn response_set(&self) -> &ResponseSet {
        &self.responses
    }

    fn sample_payload(&self, rng: &mut RngStream) -> (Vec<f64>, Vec<f64>) {
        (
            self.measure.sample(self.dim, rng),
            self.measure.sample(self.dim, rng),
        )
    }

    fn evaluate(&self, w: &Vec<f64>, a: &(Vec<f64>, Vec<f64>)) -> Result<Response> {
        let z = self.margin(w, a).expect("ranking space has margins")?;
        Ok(if z > 0.0 { Response(1) } else { Response(0) })
    }

    fn margin(&self, w: &Vec<f64>, a: &(Vec<f64>, Vec<f64>)) -> Option<Result<f64>> {
        Some(self.features(a).and_then(|z| {
            if w.len() != self.dim {
                return Err(NdbalError::IncompatibleAtom("weight dimension mismatch".into()));
            }
            Ok(dot(w, &z))
        }))
    }
}

impl LinearSpace for RankingSpace {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn features(&self, (x, y): &(Vec<f64>, Vec<f64>)) -> Result<Vec<f64>> {
        if x.len() != self.dim || y.len() != self.dim {
            return Err(NdbalError::IncompatibleAtom(format!(
                "object dimension must be {}",
                self.dim
            )));
        }
        Ok(x.iter().zip(y).map(|(a, b)| a - b).collect())
    }
}

/// Generalized Kendall-tau distance between two rankings.
pub fn d_rank(
    w: &[f64],
    v: &[f64],
    measure: ObjectMeasure,
    mode: RankDistanceMode,
    rng: Option<&mut RngStream>,
) -> Result<f64> {
    match mode {
        RankDistanceMode::ClosedForm => rank_closed_form(w, v),
        RankDistanceMode::MonteCarlo { n } => {
            let rng = rng.ok_or_else(|| NdbalError::invalid("Monte Carlo mode needs an rng"))?;
            if n == 0 {
                return Err(NdbalError::invalid("Monte Carlo mode needs n >= 1"));
            }
            let dim = w.len();
            let mut disagree = 0usize;
            for _ in 0..n {
                let x = measure.sample(dim, rng);
                let y = measure.sample(dim, rng);
                let z: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
                if (dot(w, &z) > 0.0) != (dot(v, &z) > 0.0) {
                    disagree += 1;
                }
            }
            Ok(disagree as f64 / n as f64)
        }
    }
}

fn rank_closed_form(w: &[f64], v: &[f64]) -> Result<f64> {
    let (nw, nv) = (norm(w), norm(v));
    if nw == 0.0 || nv == 0.0 {
        return Err(NdbalError::invalid("ranking distance undefined for a zero vector"));
    }
    let c = (dot(w, v) / (nw * nv)).clamp(-1.0, 1.0);
    Ok(c.acos() / std::f64::consts::PI)
}

/// Closed-form ranking distance as an infallible [`crate::distance::Distance`].
pub fn rank_distance(w: &Vec<f64>, v: &Vec<f64>) -> f64 {
    rank_closed_form(w, v).unwrap_or(0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn closed_form_landmarks() {
        let w = [1.0, 0.0];
        let cf = RankDistanceMode::ClosedForm;
        let m = ObjectMeasure::UniformSphere;
        assert_eq!(d_rank(&w, &w, m, cf, None).unwrap(), 0.0);
        assert_abs_diff_eq!(d_rank(&w, &[0.0, 1.0], m, cf, None).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn monte_carlo_matches_closed_form() {
        let mut rng = RngStream::new(9, "rank");
        for dim in [2usize, 3, 5] {
            let space = RankingSpace::new(dim, ObjectMeasure::UniformSphere).unwrap();
            let w = space.sample_structure(&mut rng);
            let v = space.sample_structure(&mut rng);
            let exact = d_rank(&w, &v, space.measure(), RankDistanceMode::ClosedForm, None).unwrap();
            let n = 100_000;
            let mc = d_rank(
                &w,
                &v,
                space.measure(),
                RankDistanceMode::MonteCarlo { n },
                Some(&mut rng),
            )
            .unwrap();
            let sigma = (exact * (1.0 - exact) / n as f64).sqrt();
            assert!((mc - exact).abs() <= 4.0 * sigma, "dim {dim}: mc {mc} vs {exact}");
        }
    }

    #[test]
    fn evaluate_ranks_by_inner_product() {
        let s = RankingSpace::new(2, ObjectMeasure::StandardGaussian).unwrap();
        let a = (vec![1.0, 0.0], vec![0.0, 1.0]);
        assert_eq!(s.evaluate(&vec![1.0, 0.0], &a).unwrap(), Response(1));
        assert_eq!(s.evaluate(&vec![0.0, 1.0], &a).unwrap(), Response(0));
    }
}
