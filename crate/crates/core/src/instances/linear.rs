//! Homogeneous linear classifiers with data uniform on the unit sphere.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{NdbalError, Result};
use crate::rng::RngStream;
use crate::space::{dot, norm, LinearSpace, Response, ResponseSet, StructureSpace};

pub fn sample_unit_sphere(dim: usize, rng: &mut RngStream) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// `N(0, sigma^2 I_dim)` draw.
pub fn sample_gaussian(dim: usize, sigma: f64, rng: &mut RngStream) -> Vec<f64> {
    (0..dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            sigma * z
        })
        .collect()
}

/// Angle between two weight vectors divided by pi.
pub fn d_classifier(w: &[f64], v: &[f64]) -> Result<f64> {
    let (nw, nv) = (norm(w), norm(v));
    if nw == 0.0 || nv == 0.0 {
        return Err(NdbalError::invalid("classifier distance undefined for a zero vector"));
    }
    let c = (dot(w, v) / (nw * nv)).clamp(-1.0, 1.0);
    Ok(c.acos() / std::f64::consts::PI)
}

/// Infallible form used as a [`crate::distance::Distance`]; zero vectors are
/// at distance 1/2 from everything (the disagreement rate of a coin flip).
pub fn classifier_distance(w: &Vec<f64>, v: &Vec<f64>) -> f64 {
    d_classifier(w, v).unwrap_or(0.5)
}

#[derive(Debug, Clone)]
pub struct LinearClassifierSpace {
    dim: usize,
    responses: ResponseSet,
}

impl LinearClassifierSpace {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(NdbalError::invalid("dimension must be >= 1"));
        }
        Ok(LinearClassifierSpace {
            dim,
            responses: ResponseSet::signs(),
        })
    }

    fn check(&self, x: &[f64], w: &[f64]) -> Result<()> {
        if x.len() != self.dim || w.len() != self.dim {
            return Err(NdbalError::IncompatibleAtom(format!(
                "expected dimension {}, got atom {} / structure {}",
                self.dim,
                x.len(),
                w.len()
            )));
        }
        Ok(())
    }
}

impl StructureSpace for LinearClassifierSpace {
    type Structure = Vec<f64>;
    type Payload = Vec<f64>;

    fn response_set(&self) -> &ResponseSet {
        &self.responses
    }

    fn sample_payload(&self, rng: &mut RngStream) -> Vec<f64> {
        sample_unit_sphere(self.dim, rng)
    }

    fn evaluate(&self, w: &Vec<f64>, x: &Vec<f64>) -> Result<Response> {
        self.check(x, w)?;
        Ok(if dot(w, x) > 0.0 { Response(1) } else { Response(0) })
    }

    fn margin(&self, w: &Vec<f64>, x: &Vec<f64>) -> Option<Result<f64>> {
        Some(self.check(x, w).map(|_| dot(w, x)))
    }
}

impl LinearSpace for LinearClassifierSpace {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn features(&self, x: &Vec<f64>) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(NdbalError::IncompatibleAtom(format!(
                "expected dimension {}, got {}",
                self.dim,
                x.len()
            )));
        }
        Ok(x.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn positive_inner_product_is_plus_one() {
        let s = LinearClassifierSpace::new(2).unwrap();
        let r = s.evaluate(&vec![1.0, 0.0], &vec![0.6, 0.8]).unwrap();
        assert_eq!(s.response_set().value(r), 1.0);
        assert!(matches!(
            s.evaluate(&vec![1.0, 0.0], &vec![1.0]),
            Err(NdbalError::IncompatibleAtom(_))
        ));
    }

    #[test]
    fn classifier_distance_landmarks() {
        let w = [1.0, 0.0];
        assert_eq!(d_classifier(&w, &w).unwrap(), 0.0);
        assert_abs_diff_eq!(d_classifier(&w, &[0.0, 3.0]).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(d_classifier(&w, &[-2.0, 0.0]).unwrap(), 1.0, epsilon = 1e-15);
        assert!(d_classifier(&w, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn sphere_draws_are_unit_norm() {
        let mut rng = RngStream::new(1, "sphere");
        for d in [1, 2, 5, 10] {
            for _ in 0..200 {
                let x = sample_unit_sphere(d, &mut rng);
                assert!((norm(&x) - 1.0).abs() < 1e-12);
            }
        }
    }
}
