//! Dense symmetric positive-definite helpers (row-major storage).

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

pub(crate) const JITTER_START: f64 = 1e-10;
pub(crate) const JITTER_MAX: f64 = 1e-4;

/// Lower Cholesky factor `L` with `A + jitter*I = L L^T`.
#[derive(Debug, Clone)]
pub(crate) struct Cholesky {
    n: usize,
    l: Vec<f64>,
    jitter: f64,
}

impl Cholesky {
    /// Plain factorization; `None` when `a` is not numerically positive definite.
    pub(crate) fn factor(a: &[f64], n: usize, jitter: f64) -> Option<Self> {
        debug_assert_eq!(a.len(), n * n);
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = a[i * n + j];
                let (ri, rj) = (&l[i * n..i * n + j], &l[j * n..j * n + j]);
                s -= ri.iter().zip(rj).map(|(x, y)| x * y).sum::<f64>();
                if i == j {
                    let d = s + jitter;
                    if d <= 0.0 || !d.is_finite() {
                        return None;
                    }
                    l[i * n + i] = libm::sqrt(d);
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Some(Self { n, l, jitter })
    }

    /// Factorization with jitter escalated tenfold from 1e-10 up to 1e-4.
    pub(crate) fn factor_with_jitter(a: &[f64], n: usize) -> Result<Self> {
        if let Some(c) = Self::factor(a, n, 0.0) {
            return Ok(c);
        }
        let mut jitter = JITTER_START;
        while jitter <= JITTER_MAX * (1.0 + 1e-9) {
            if let Some(c) = Self::factor(a, n, jitter) {
                return Ok(c);
            }
            jitter *= 10.0;
        }
        Err(Error::NotPositiveDefinite {
            size: n,
            jitter: JITTER_MAX,
        })
    }

    pub(crate) fn jitter(&self) -> f64 {
        self.jitter
    }

    pub(crate) fn lower(&self) -> &[f64] {
        &self.l
    }

    /// Solves `L x = b` in place.
    pub(crate) fn solve_lower_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let s: f64 = row.iter().zip(&b[..i]).map(|(x, y)| x * y).sum();
            b[i] = (b[i] - s) / self.l[i * n + i];
        }
    }

    /// Solves `L^T x = b` in place.
    pub(crate) fn solve_upper_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for i in (0..n).rev() {
            let s = b[i] - (i + 1..n).map(|k| self.l[k * n + i] * b[k]).sum::<f64>();
            b[i] = s / self.l[i * n + i];
        }
    }

    /// Solves `(L L^T) x = b`.
    pub(crate) fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_lower_in_place(&mut x);
        self.solve_upper_in_place(&mut x);
        x
    }

    pub(crate) fn log_det(&self) -> f64 {
        (0..self.n)
            .map(|i| libm::log(self.l[i * self.n + i]))
            .sum::<f64>()
            * 2.0
    }

    /// Full inverse of `L L^T`.
    pub(crate) fn inverse(&self) -> Vec<f64> {
        let n = self.n;
        // Invert L column by column, then form L^-T L^-1.
        let mut linv = vec![0.0; n * n];
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            self.solve_lower_in_place(&mut e);
            for i in j..n {
                linv[i * n + j] = e[i];
            }
        }
        let mut inv = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let start = i.max(j);
                let s: f64 = (start..n).map(|k| linv[k * n + i] * linv[k * n + j]).sum();
                inv[i * n + j] = s;
                inv[j * n + i] = s;
            }
        }
        inv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_and_solve() {
        let a = [4.0, 2.0, 0.4, 2.0, 5.0, 1.0, 0.4, 1.0, 3.0];
        let c = Cholesky::factor(&a, 3, 0.0).unwrap();
        let b = [1.0, -2.0, 0.5];
        let x = c.solve(&b);
        for i in 0..3 {
            let r: f64 = (0..3).map(|j| a[i * 3 + j] * x[j]).sum();
            assert!((r - b[i]).abs() < 1e-12);
        }
        let inv = c.inverse();
        for i in 0..3 {
            for j in 0..3 {
                let r: f64 = (0..3).map(|k| a[i * 3 + k] * inv[k * 3 + j]).sum();
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((r - e).abs() < 1e-12);
            }
        }
        // det = 4*(15-1) - 2*(6-0.4) + 0.4*(2-2) = 44.8
        assert!((c.log_det() - libm::log(44.8)).abs() < 1e-12);
    }

    #[test]
    fn jitter_rescues_semidefinite() {
        let a = [1.0, 1.0, 1.0, 1.0];
        assert!(Cholesky::factor(&a, 2, 0.0).is_none());
        let c = Cholesky::factor_with_jitter(&a, 2).unwrap();
        assert!(c.jitter() > 0.0 && c.jitter() <= JITTER_MAX);
        let bad = [1.0, 2.0, 2.0, 1.0];
        assert!(matches!(
            Cholesky::factor_with_jitter(&bad, 2),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }
}
