//! Box design domains and space-filling sampling.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ParboError, Result};

/// Axis-aligned box domain `[lower, upper]` in d dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(ParboError::InvalidArgument(format!(
                "domain bounds must be nonempty and of equal length (got {} and {})",
                lower.len(),
                upper.len()
            )));
        }
        for i in 0..lower.len() {
            if !(lower[i] < upper[i]) {
                return Err(ParboError::InvalidArgument(format!(
                    "domain bound {} must satisfy lower < upper (got [{}, {}])",
                    i, lower[i], upper[i]
                )));
            }
        }
        Ok(BoxDomain { lower, upper })
    }

    /// Unit cube `[0, 1]^d`.
    pub fn unit(dim: usize) -> Self {
        BoxDomain {
            lower: vec![0.0; dim],
            upper: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    /// Clamp a point into the box, in place.
    pub fn project(&self, x: &mut [f64]) {
        for i in 0..x.len() {
            x[i] = x[i].clamp(self.lower[i], self.upper[i]);
        }
    }

    /// Map a raw point to unit-cube coordinates.
    pub fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, v)| (v - self.lower[i]) / self.width(i))
            .collect()
    }

    /// Map a unit-cube point back to raw coordinates.
    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .enumerate()
            .map(|(i, v)| self.lower[i] + v * self.width(i))
            .collect()
    }

    /// Euclidean distance between two raw points measured in unit-cube
    /// coordinates. Used for batch-spacing safeguards.
    pub fn unit_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        (0..self.dim())
            .map(|i| {
                let d = (a[i] - b[i]) / self.width(i);
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Sub-box over a set of coordinate indices.
    pub fn slice(&self, indices: &[usize]) -> Result<BoxDomain> {
        let mut lower = Vec::with_capacity(indices.len());
        let mut upper = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.dim() {
                return Err(ParboError::InvalidArgument(format!(
                    "coordinate index {} out of range for dimension {}",
                    i,
                    self.dim()
                )));
            }
            lower.push(self.lower[i]);
            upper.push(self.upper[i]);
        }
        BoxDomain::new(lower, upper)
    }

    /// Concatenate `times` copies of this box (batch optimization variable).
    pub fn repeat(&self, times: usize) -> BoxDomain {
        let mut lower = Vec::with_capacity(self.dim() * times);
        let mut upper = Vec::with_capacity(self.dim() * times);
        for _ in 0..times {
            lower.extend_from_slice(&self.lower);
            upper.extend_from_slice(&self.upper);
        }
        BoxDomain {
            lower,
            upper,
        }
    }

    /// Latin-hypercube sample of `n` points in raw coordinates.
    pub fn latin_hypercube(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        unit_latin_hypercube(n, self.dim(), rng)
            .into_iter()
            .map(|u| self.from_unit(&u))
            .collect()
    }
}

/// Latin-hypercube sample on the unit cube. One stratum per point per
/// dimension, stratum order shuffled, uniform jitter within each stratum.
pub fn unit_latin_hypercube(n: usize, dim: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    if n == 0 {
        return Vec::new();
    }
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(dim);
    for _ in 0..dim {
        let mut strata: Vec<usize> = (0..n).collect();
        // Fisher-Yates
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            strata.swap(i, j);
        }
        let col = strata
            .into_iter()
            .map(|s| (s as f64 + rng.random::<f64>()) / n as f64)
            .collect();
        cols.push(col);
    }
    (0..n)
        .map(|i| (0..dim).map(|d| cols[d][i]).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn rejects_degenerate_bounds() {
        assert!(BoxDomain::new(vec![0.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(BoxDomain::new(vec![], vec![]).is_err());
    }

    #[test]
    fn unit_round_trip() {
        let d = BoxDomain::new(vec![303.0, 303.0], vec![423.0, 423.0]).unwrap();
        let x = vec![333.0, 322.0];
        let u = d.to_unit(&x);
        let back = d.from_unit(&u);
        for i in 0..2 {
            assert!((back[i] - x[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn lhs_is_stratified() {
        let mut r = rng::stream(3, &[rng::role::INIT]);
        let pts = unit_latin_hypercube(8, 2, &mut r);
        assert_eq!(pts.len(), 8);
        for d in 0..2 {
            let mut seen = vec![false; 8];
            for p in &pts {
                let s = (p[d] * 8.0).floor() as usize;
                assert!(!seen[s.min(7)], "two points share a stratum");
                seen[s.min(7)] = true;
            }
        }
    }

    #[test]
    fn subspace_slice() {
        let d = BoxDomain::new(vec![0.0, 1.0, 2.0], vec![1.0, 2.0, 3.0]).unwrap();
        let s = d.slice(&[2, 0]).unwrap();
        assert_eq!(s.lower(), &[2.0, 0.0]);
        assert_eq!(s.upper(), &[3.0, 1.0]);
        assert!(d.slice(&[3]).is_err());
    }
}
