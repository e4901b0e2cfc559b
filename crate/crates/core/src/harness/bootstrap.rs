//! Percentile bootstrap for the mean.

use rand::Rng;

use crate::error::{NdbalError, Result};
use crate::rng::RngStream;

/// Percentile bootstrap interval for the sample mean at `level`. The interval
/// is widened, if needed, to contain the sample mean.
pub fn bootstrap_ci(
    samples: &[f64],
    level: f64,
    resamples: usize,
    rng: &mut RngStream,
) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(NdbalError::invalid("bootstrap needs at least one sample"));
    }
    if !(level > 0.0 && level < 1.0) || resamples == 0 {
        return Err(NdbalError::invalid("need level in (0, 1) and resamples >= 1"));
    }
    if samples.iter().all(|x| *x == samples[0]) {
        return Ok((samples[0], samples[0]));
    }
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| samples[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    let pick = |q: f64| means[((q * resamples as f64).floor() as usize).min(resamples - 1)];
    Ok((pick(tail).min(mean), pick(1.0 - tail).max(mean)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(n: usize, rng: &mut RngStream) -> Vec<f64> {
        (0..n).map(|_| StandardNormal.sample(rng)).collect()
    }

    #[test]
    fn constant_samples_are_degenerate() {
        let mut rng = RngStream::new(1, "const");
        assert_eq!(bootstrap_ci(&[0.3; 20], 0.68, 1000, &mut rng).unwrap(), (0.3, 0.3));
        assert!(bootstrap_ci(&[], 0.68, 1000, &mut rng).is_err());
    }

    #[test]
    fn brackets_the_mean() {
        let mut rng = RngStream::new(2, "bracket");
        for _ in 0..20 {
            let xs = normals(50, &mut rng);
            let m = xs.iter().sum::<f64>() / 50.0;
            let (lo, hi) = bootstrap_ci(&xs, 0.68, 1000, &mut rng).unwrap();
            assert!(lo <= m && m <= hi);
        }
    }

    #[test]
    fn width_shrinks_like_inverse_root_n() {
        // standard normal mean: 68% interval half-width ~ 1 / sqrt(n)
        let mut rng = RngStream::new(3, "width");
        let widths: Vec<f64> = [50usize, 200, 800]
            .iter()
            .map(|&n| {
                let avg: f64 = (0..10)
                    .map(|_| {
                        let (lo, hi) = bootstrap_ci(&normals(n, &mut rng), 0.68, 1000, &mut rng).unwrap();
                        hi - lo
                    })
                    .sum::<f64>()
                    / 10.0;
                avg * (n as f64).sqrt()
            })
            .collect();
        for w in &widths {
            assert!((w - 2.0).abs() < 0.3, "{widths:?}");
        }
    }
}
