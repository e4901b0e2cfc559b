//! Structure distances.

/// A symmetric dissimilarity on structures with `d(g, g) = 0` and values in
/// `[0, 1]` for every distance the algorithms consume.
pub trait Distance<G>: Send + Sync {
    fn distance(&self, g: &G, h: &G) -> f64;
}

impl<G, F> Distance<G> for F
where
    F: Fn(&G, &G) -> f64 + Send + Sync,
{
    fn distance(&self, g: &G, h: &G) -> f64 {
        self(g, h)
    }
}

/// Distance over structure indices backed by an explicit symmetric matrix.
#[derive(Debug, Clone)]
pub struct MatrixDistance {
    n: usize,
    values: Vec<f64>,
}

impl MatrixDistance {
    /// Builds from a full `n x n` table. The table is symmetrized from its
    /// upper triangle and the diagonal is forced to zero.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = rows[i][j];
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        MatrixDistance { n, values }
    }

    /// Tabulates an arbitrary distance over a list of structures.
    pub fn tabulate<G>(structures: &[G], d: &dyn Distance<G>) -> Self {
        let n = structures.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = d.distance(&structures[i], &structures[j]);
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        MatrixDistance { n, values }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }
}

impl Distance<usize> for MatrixDistance {
    fn distance(&self, g: &usize, h: &usize) -> f64 {
        self.get(*g, *h)
    }
}

/// Rescales another distance by a constant factor (e.g. `1/2` to bring a
/// Euclidean gap on the unit sphere into `[0, 1]`).
pub struct Scaled<D> {
    pub inner: D,
    pub factor: f64,
}

impl<G, D: Distance<G>> Distance<G> for Scaled<D> {
    fn distance(&self, g: &G, h: &G) -> f64 {
        self.factor * self.inner.distance(g, h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_is_symmetric_with_zero_diagonal() {
        let m = MatrixDistance::from_rows(&[
            vec![0.3, 0.6, 0.1],
            vec![0.9, 0.2, 0.4],
            vec![0.0, 0.0, 0.7],
        ]);
        for i in 0..3 {
            assert_eq!(m.get(i, i), 0.0);
            for j in 0..3 {
                assert_eq!(m.get(i, j), m.get(j, i));
            }
        }
        assert_eq!(m.distance(&0, &1), 0.6);
    }

    #[test]
    fn closures_are_distances() {
        let d = |a: &f64, b: &f64| (a - b).abs();
        assert_eq!(Distance::distance(&d, &0.25, &1.0), 0.75);
        let half = Scaled { inner: d, factor: 0.5 };
        assert_eq!(half.distance(&0.0, &1.0), 0.5);
    }
}
