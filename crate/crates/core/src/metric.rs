//! Distance and centroid primitives.
//!
//! Every module that compares rows goes through a [`Metric`] value rather than
//! calling a distance function directly, so alternative measures can be added
//! as new variants without touching the clustering code.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Euclidean distance.
    #[default]
    L2,
}

impl Metric {
    /// Unchecked distance for hot loops. Callers guarantee equal dimensions.
    #[inline]
    pub fn eval(self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        match self {
            Metric::L2 => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
        }
    }

    pub fn distance(self, a: &[f64], b: &[f64]) -> Result<f64> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                left: a.len(),
                right: b.len(),
            });
        }
        Ok(self.eval(a, b))
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::L2 => "l2",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l2" => Ok(Metric::L2),
            other => Err(Error::UnknownMetric(other.to_string())),
        }
    }
}

/// Euclidean distance between two vectors of equal length.
pub fn distance(a: &[f64], b: &[f64]) -> Result<f64> {
    Metric::L2.distance(a, b)
}

/// Arithmetic mean of a set of rows, plus the number of rows it was built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Centroid {
    pub values: Vec<f64>,
    pub count: usize,
}

impl Centroid {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// Component-wise mean of `rows`.
pub fn centroid<I, R>(rows: I) -> Result<Centroid>
where
    I: IntoIterator<Item = R>,
    R: AsRef<[f64]>,
{
    let mut iter = rows.into_iter();
    let first = iter.next().ok_or(Error::EmptyCentroid)?;
    let mut sum = first.as_ref().to_vec();
    let mut count = 1usize;
    for row in iter {
        let row = row.as_ref();
        if row.len() != sum.len() {
            return Err(Error::DimensionMismatch {
                left: sum.len(),
                right: row.len(),
            });
        }
        for (s, v) in sum.iter_mut().zip(row) {
            *s += v;
        }
        count += 1;
    }
    let n = count as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    Ok(Centroid { values: sum, count })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pythagorean_distances() {
        assert_eq!(distance(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert_eq!(distance(&[0.0, 0.0, 0.0], &[1.0, 2.0, 2.0]).unwrap(), 3.0);
        let x = [0.3, -1.5, 7.0];
        assert_eq!(distance(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn distance_rejects_mismatched_dimensions() {
        assert!(matches!(
            distance(&[0.0], &[0.0, 1.0]),
            Err(Error::DimensionMismatch { left: 1, right: 2 })
        ));
    }

    #[test]
    fn centroid_examples() {
        let c = centroid([[0.0, 0.0], [2.0, 2.0]]).unwrap();
        assert_eq!(c.values, vec![1.0, 1.0]);
        assert_eq!(c.count, 2);

        let c = centroid([[1.0, 0.0], [0.0, 1.0], [2.0, 2.0]]).unwrap();
        assert_eq!(c.values, vec![1.0, 1.0]);
        assert_eq!(c.count, 3);

        let c = centroid([[0.25, 9.0]]).unwrap();
        assert_eq!(c.values, vec![0.25, 9.0]);
    }

    #[test]
    fn centroid_of_nothing_is_an_error() {
        let empty: Vec<Vec<f64>> = Vec::new();
        assert!(matches!(centroid(empty), Err(Error::EmptyCentroid)));
        assert!(centroid([vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn metric_parses_only_l2() {
        assert_eq!("l2".parse::<Metric>().unwrap(), Metric::L2);
        assert!("cosine".parse::<Metric>().is_err());
    }
}
