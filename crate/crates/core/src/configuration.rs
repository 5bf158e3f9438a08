use serde::{Deserialize, Serialize};

use crate::error::{BmsError, Result};

/// `n` points in `R^d`, stored row-major (row `i` is point `i`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    n: usize,
    d: usize,
    coords: Vec<f64>,
}

impl Configuration {
    pub fn new(n: usize, d: usize, coords: Vec<f64>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(BmsError::Data(format!(
                "configuration needs n >= 1 and d >= 1, got n={n}, d={d}"
            )));
        }
        if coords.len() != n * d {
            return Err(BmsError::Data(format!(
                "expected {} coordinates for n={n}, d={d}, got {}",
                n * d,
                coords.len()
            )));
        }
        if let Some(pos) = coords.iter().position(|c| !c.is_finite()) {
            return Err(BmsError::Data(format!(
                "non-finite coordinate at point {}, axis {}",
                pos / d,
                pos % d
            )));
        }
        Ok(Self { n, d, coords })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let d = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut coords = Vec::with_capacity(rows.len() * d);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != d {
                return Err(BmsError::Data(format!(
                    "row {i} has {} coordinates, expected {d}",
                    row.len()
                )));
            }
            coords.extend_from_slice(row);
        }
        Self::new(rows.len(), d, coords)
    }

    /// Builds a configuration without re-validating; callers guarantee shape and finiteness.
    pub(crate) fn from_parts(n: usize, d: usize, coords: Vec<f64>) -> Self {
        debug_assert_eq!(coords.len(), n * d);
        Self { n, d, coords }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    #[inline]
    pub(crate) fn point_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.coords[i * self.d..(i + 1) * self.d]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.d)
    }

    /// The stacked vector in `R^{nd}`.
    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.coords
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.points().map(<[f64]>::to_vec).collect()
    }

    #[inline]
    pub fn dist_sq(&self, i: usize, j: usize) -> f64 {
        self.point(i)
            .iter()
            .zip(self.point(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn centroid(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.d];
        for p in self.points() {
            for (acc, x) in c.iter_mut().zip(p) {
                *acc += x;
            }
        }
        c.iter_mut().for_each(|x| *x /= self.n as f64);
        c
    }

    /// `u + v (x) 1_n`.
    pub fn translated(&self, v: &[f64]) -> Result<Self> {
        if v.len() != self.d {
            return Err(BmsError::Data(format!(
                "translation has {} components, expected {}",
                v.len(),
                self.d
            )));
        }
        let coords = self
            .coords
            .chunks_exact(self.d)
            .flat_map(|p| p.iter().zip(v).map(|(a, b)| a + b))
            .collect();
        Self::new(self.n, self.d, coords)
    }

    /// Rows reordered so that row `k` of the result is row `perm[k]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.n];
        if perm.len() != self.n || perm.iter().any(|&p| p >= self.n || std::mem::replace(&mut seen[p], true)) {
            return Err(BmsError::Data("not a permutation of the point indices".into()));
        }
        let coords = perm.iter().flat_map(|&p| self.point(p).iter().copied()).collect();
        Ok(Self::from_parts(self.n, self.d, coords))
    }

    /// Euclidean norm of `self - other` in `R^{nd}`.
    pub fn distance_to(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    /// `max_i |self_i - other_i|`.
    pub fn max_point_move(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .points()
            .zip(other.points())
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
            .fold(0.0, f64::max))
    }

    pub fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.n != other.n || self.d != other.d {
            return Err(BmsError::Data(format!(
                "shape mismatch: ({}, {}) vs ({}, {})",
                self.n, self.d, other.n, other.d
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes_and_values() {
        assert!(Configuration::new(0, 2, vec![]).is_err());
        assert!(Configuration::new(2, 2, vec![0.0; 3]).is_err());
        assert!(Configuration::new(1, 2, vec![0.0, f64::NAN]).is_err());
        assert!(Configuration::from_rows(&[vec![0.0, 1.0], vec![2.0]]).is_err());
    }

    #[test]
    fn permutation_and_translation() {
        let c = Configuration::from_rows(&[[0.0, 1.0], [2.0, 3.0], [4.0, 5.0]]).unwrap();
        let p = c.permuted(&[2, 0, 1]).unwrap();
        assert_eq!(p.point(0), &[4.0, 5.0]);
        assert!(c.permuted(&[0, 0, 1]).is_err());
        let t = c.translated(&[1.0, -1.0]).unwrap();
        assert_eq!(t.point(1), &[3.0, 2.0]);
        assert_eq!(c.centroid(), vec![2.0, 3.0]);
        assert_eq!(c.max_point_move(&t).unwrap(), 2f64.sqrt());
    }
}
