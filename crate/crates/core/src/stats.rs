//! Summary statistics and the rank test used to compare benchmark methods.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
pub fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    libm::sqrt(xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64)
}

/// Result of a one-sided Mann-Whitney U test of "x tends to exceed y".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankTest {
    /// Pairs with x > y, ties counted one half.
    pub u: f64,
    pub p_value: f64,
    /// Exact null distribution (no ties) or normal approximation with tie
    /// correction.
    pub exact: bool,
}

pub fn mann_whitney_greater(x: &[f64], y: &[f64]) -> Result<RankTest> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::Empty("rank test sample"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("rank test sample"));
    }
    let (m, n) = (x.len(), y.len());
    let mut u = 0.0;
    let mut ties = false;
    for a in x {
        for b in y {
            if a > b {
                u += 1.0;
            } else if a == b {
                u += 0.5;
                ties = true;
            }
        }
    }
    let mut all: Vec<f64> = x.iter().chain(y).copied().collect();
    all.sort_by(f64::total_cmp);
    ties |= all.windows(2).any(|w| w[0] == w[1]);

    if !ties && m * n <= 10_000 {
        let counts = u_distribution(m, n);
        let total: f64 = counts.iter().sum();
        let k = u as usize;
        let tail: f64 = counts[k..].iter().sum();
        return Ok(RankTest {
            u,
            p_value: tail / total,
            exact: true,
        });
    }

    let (mf, nf) = (m as f64, n as f64);
    let big_n = mf + nf;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j] == all[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let var = mf * nf / 12.0 * ((big_n + 1.0) - tie_term / (big_n * (big_n - 1.0)));
    let p_value = if var <= 0.0 {
        if u > mf * nf / 2.0 {
            0.0
        } else {
            1.0
        }
    } else {
        // Continuity-corrected upper tail.
        let z = (u - mf * nf / 2.0 - 0.5) / libm::sqrt(var);
        0.5 * libm::erfc(z / core::f64::consts::SQRT_2)
    };
    Ok(RankTest {
        u,
        p_value,
        exact: false,
    })
}

/// Number of orderings of `m` x's and `n` y's giving each U value.
fn u_distribution(m: usize, n: usize) -> Vec<f64> {
    // f[a][b] = counts for (a, b) sizes, built up over a.
    let max_u = m * n;
    let mut prev: Vec<Vec<f64>> = (0..=n).map(|_| vec![1.0]).collect(); // a = 0
    for a in 1..=m {
        let mut cur: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        cur.push(vec![1.0]); // b = 0
        for b in 1..=n {
            let len = a * b + 1;
            let mut f = vec![0.0; len];
            // Largest element is an x (contributes b) or a y (contributes 0).
            for (k, v) in prev[b].iter().enumerate() {
                f[k + b] += v;
            }
            for (k, v) in cur[b - 1].iter().enumerate() {
                f[k] += v;
            }
            cur.push(f);
        }
        prev = cur;
    }
    let mut out = prev.swap_remove(n);
    out.resize(max_u + 1, 0.0);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments() {
        assert_eq!(mean(&[1.0, 2.0, 3.0]), 2.0);
        assert!((sample_sd(&[1.0, 2.0, 3.0]) - 1.0).abs() < 1e-15);
        assert_eq!(sample_sd(&[4.0]), 0.0);
    }

    #[test]
    fn exact_distribution_small() {
        // m = n = 2: orderings 6, U in {0,1,2,2,3,4}.
        assert_eq!(u_distribution(2, 2), vec![1.0, 1.0, 2.0, 1.0, 1.0]);
        let total: f64 = u_distribution(10, 10).iter().sum();
        assert_eq!(total, 184_756.0);
    }

    #[test]
    fn separated_samples() {
        let x: Vec<f64> = (0..10).map(|i| 10.0 + i as f64).collect();
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let t = mann_whitney_greater(&x, &y).unwrap();
        assert_eq!(t.u, 100.0);
        assert!(t.exact);
        assert!((t.p_value - 1.0 / 184_756.0).abs() < 1e-15);
        let r = mann_whitney_greater(&y, &x).unwrap();
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn ties_use_normal_approximation() {
        let t = mann_whitney_greater(&[1.0, 1.0, 2.0], &[1.0, 0.0, 0.0]).unwrap();
        assert!(!t.exact);
        assert!(t.p_value > 0.0 && t.p_value < 1.0);
    }
}
