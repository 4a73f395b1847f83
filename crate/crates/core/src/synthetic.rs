//! Seeded Gaussian blobs with known labels, for tests and demos.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{DataRow, Oracle};
use crate::error::{Error, Result};
use crate::metric::distance;

#[derive(Debug, Clone)]
pub struct Blobs {
    pub rows: Vec<DataRow>,
    pub oracle: Oracle,
    pub centres: Vec<Vec<f64>>,
}

impl Blobs {
    /// Largest distance from any row to its own blob centre.
    pub fn spread(&self) -> f64 {
        self.rows
            .iter()
            .zip(self.oracle.labels())
            .map(|(r, &l)| distance(&r.features, &self.centres[l]).unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max)
    }

    /// Smallest distance between two blob centres.
    pub fn separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.centres.iter().enumerate() {
            for b in &self.centres[i + 1..] {
                best = best.min(distance(a, b).unwrap_or(f64::INFINITY));
            }
        }
        best
    }
}

/// `k` isotropic blobs of `per_blob` rows in `dim` dimensions. Centres sit on
/// the first axis, `separation` apart; each coordinate has standard deviation
/// `sigma`. Rows are interleaved blob by blob so ids do not reveal labels.
pub fn blobs(
    k: usize,
    per_blob: usize,
    dim: usize,
    separation: f64,
    sigma: f64,
    seed: u64,
) -> Result<Blobs> {
    if k == 0 || per_blob == 0 || dim == 0 {
        return Err(Error::EmptyDataset);
    }
    let noise = Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centres: Vec<Vec<f64>> = (0..k)
        .map(|c| {
            let mut v = vec![0.0; dim];
            v[0] = c as f64 * separation;
            v
        })
        .collect();
    let mut rows = Vec::with_capacity(k * per_blob);
    let mut labels = Vec::with_capacity(k * per_blob);
    for _ in 0..per_blob {
        for (c, centre) in centres.iter().enumerate() {
            let features = centre.iter().map(|x| x + noise.sample(&mut rng)).collect();
            rows.push(DataRow {
                id: rows.len(),
                features,
            });
            labels.push(c);
        }
    }
    let names = (0..k).map(|c| format!("blob{c}")).collect();
    Ok(Blobs {
        rows,
        oracle: Oracle::new(labels, names)?,
        centres,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_determinism() {
        let a = blobs(3, 20, 2, 3.0, 0.1, 9).unwrap();
        let b = blobs(3, 20, 2, 3.0, 0.1, 9).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.rows.len(), 60);
        assert_eq!(a.oracle.category_count(), 3);
        assert_eq!(a.separation(), 3.0);
        assert!(a.spread() < 0.6);
    }
}
