//! Cholesky factorization of symmetric positive definite band matrices.

use crate::error::{Error, Result};

/// Lower band of a symmetric matrix with half-bandwidth `w`.
#[derive(Clone, Debug)]
pub(crate) struct BandedSpd {
    n: usize,
    w: usize,
    data: Vec<f64>,
}

impl BandedSpd {
    pub fn zeros(n: usize, w: usize) -> Self {
        BandedSpd {
            n,
            w,
            data: vec![0.0; n * (w + 1)],
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        i * (self.w + 1) + (j + self.w - i)
    }

    /// Adds `v` to entry `(i, j)` (and implicitly `(j, i)`).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        debug_assert!(i - j <= self.w, "entry outside band");
        let k = self.at(i, j);
        self.data[k] += v;
    }

    pub fn factor(mut self) -> Result<BandedCholesky> {
        let (n, w) = (self.n, self.w);
        for i in 0..n {
            let lo_i = i.saturating_sub(w);
            for j in lo_i..=i {
                let lo = lo_i.max(j.saturating_sub(w));
                let mut s = self.data[self.at(i, j)];
                for k in lo..j {
                    s -= self.data[self.at(i, k)] * self.data[self.at(j, k)];
                }
                let idx = self.at(i, j);
                if i == j {
                    if !(s > 0.0) {
                        return Err(Error::Unstable(format!(
                            "band matrix not positive definite at row {i}"
                        )));
                    }
                    self.data[idx] = s.sqrt();
                } else {
                    self.data[idx] = s / self.data[self.at(j, j)];
                }
            }
        }
        Ok(BandedCholesky { l: self })
    }
}

#[derive(Clone, Debug)]
pub(crate) struct BandedCholesky {
    l: BandedSpd,
}

impl BandedCholesky {
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let l = &self.l;
        let (n, w) = (l.n, l.w);
        for i in 0..n {
            let mut s = x[i];
            for k in i.saturating_sub(w)..i {
                s -= l.data[l.at(i, k)] * x[k];
            }
            x[i] = s / l.data[l.at(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..(i + w + 1).min(n) {
                s -= l.data[l.at(k, i)] * x[k];
            }
            x[i] = s / l.data[l.at(i, i)];
        }
    }
}

/// Small cache of factorizations keyed by the bit pattern of a scalar.
pub(crate) struct FactorCache<F> {
    entries: Vec<(u64, F)>,
    capacity: usize,
}

impl<F> FactorCache<F> {
    pub fn new(capacity: usize) -> Self {
        FactorCache {
            entries: Vec::new(),
            capacity,
        }
    }

    pub fn get_or_insert_with(&mut self, key: f64, build: impl FnOnce() -> Result<F>) -> Result<&F> {
        let bits = key.to_bits();
        if let Some(pos) = self.entries.iter().position(|(k, _)| *k == bits) {
            return Ok(&self.entries[pos].1);
        }
        if self.entries.len() == self.capacity {
            self.entries.remove(0);
        }
        self.entries.push((bits, build()?));
        Ok(&self.entries.last().expect("just pushed").1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn matches_dense_solve() {
        let n = 12;
        let w = 3;
        let mut band = BandedSpd::zeros(n, w);
        let mut dense = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(w)..=i {
                let v = if i == j { 4.0 + i as f64 * 0.1 } else { -0.3 / (1 + i - j) as f64 };
                band.add(i, j, v);
                dense[(i, j)] = v;
                dense[(j, i)] = v;
            }
        }
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut x = rhs.clone();
        band.factor().unwrap().solve_in_place(&mut x);
        let expected = dense.lu().solve(&DVector::from_vec(rhs)).unwrap();
        for i in 0..n {
            assert!((x[i] - expected[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn indefinite_rejected() {
        let mut band = BandedSpd::zeros(2, 1);
        band.add(0, 0, 1.0);
        band.add(1, 1, 1.0);
        band.add(1, 0, 2.0);
        assert!(band.factor().is_err());
    }
}
