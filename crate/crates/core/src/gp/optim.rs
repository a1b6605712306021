//! Box-constrained quasi-Newton minimization (projected L-BFGS with Armijo
//! backtracking). Small and dependency free; problem sizes here are ~10 params.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

pub(crate) struct Outcome {
    pub x: Vec<f64>,
    pub value: f64,
}

fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, &l), &h) in x.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(l, h);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `f` over the box `[lo, hi]` starting from `x0`.
///
/// `f` returns `None` where the objective is undefined (treated as +inf). The
/// returned value never exceeds `f(x0)` when `x0` is feasible and defined.
pub(crate) fn minimize<F>(
    mut f: F,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    max_iters: usize,
) -> Option<Outcome>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    const MEMORY: usize = 6;
    let mut x = x0.to_vec();
    project(&mut x, lo, hi);
    let (mut fx, mut g) = f(&x)?;
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(MEMORY);
    let mut stalls = 0;

    for _ in 0..max_iters {
        // Components pinned at a bound with the gradient pushing outward are frozen.
        let free: Vec<bool> = (0..x.len())
            .map(|i| !((x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0)))
            .collect();
        let pg: Vec<f64> = g
            .iter()
            .zip(&free)
            .map(|(&v, &fr)| if fr { v } else { 0.0 })
            .collect();
        if libm::sqrt(dot(&pg, &pg)) < 1e-6 {
            break;
        }

        // Two-loop recursion on the free subspace.
        let mut d = pg.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &d);
            for (di, yi) in d.iter_mut().zip(y) {
                *di -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = history.back() {
            let gamma = dot(s, y) / dot(y, y);
            if gamma.is_finite() && gamma > 0.0 {
                d.iter_mut().for_each(|v| *v *= gamma);
            }
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &d);
            for (di, si) in d.iter_mut().zip(s) {
                *di += (a - b) * si;
            }
        }
        for (di, &fr) in d.iter_mut().zip(&free) {
            if !fr {
                *di = 0.0;
            }
            *di = -*di;
        }
        if dot(&d, &pg) >= 0.0 {
            // Not a descent direction; fall back to steepest descent.
            history.clear();
            d = pg.iter().map(|v| -v).collect();
        }

        let try_step = |f: &mut F, step: f64| {
            let mut xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            project(&mut xn, lo, hi);
            let moved: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
            let (fxn, gn) = f(&xn)?;
            (fxn.is_finite() && fxn <= fx + 1e-4 * dot(&g, &moved)).then_some((xn, fxn, gn, moved))
        };
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            if let Some(trial) = try_step(&mut f, step) {
                accepted = Some(trial);
                break;
            }
            step *= 0.5;
        }
        // Expand while the full step is accepted and the slope is still steep.
        if step == 1.0 {
            while let Some((_, fa, ga, sa)) = &accepted {
                if dot(ga, sa) >= 0.9 * dot(&g, sa) || step >= 1024.0 {
                    break;
                }
                step *= 2.0;
                match try_step(&mut f, step) {
                    Some(trial) if trial.1 < *fa => accepted = Some(trial),
                    _ => break,
                }
            }
        }
        let Some((xn, fxn, gn, s)) = accepted else {
            break;
        };
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 {
            if history.len() == MEMORY {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        let improvement = fx - fxn;
        x = xn;
        g = gn;
        fx = fxn;
        if improvement <= 1e-10 * (1.0 + fx.abs()) {
            stalls += 1;
            if stalls >= 3 {
                break;
            }
        } else {
            stalls = 0;
        }
    }
    Some(Outcome { x, value: fx })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn rosenbrock_in_box() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a) * (1.0 - a) + 100.0 * (b - a * a) * (b - a * a);
            let g = vec![
                -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
                200.0 * (b - a * a),
            ];
            Some((v, g))
        };
        let out = minimize(f, &[-1.2, 1.0], &[-2.0, -2.0], &[2.0, 2.0], 500).unwrap();
        assert!((out.x[0] - 1.0).abs() < 1e-3 && (out.x[1] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn respects_bounds() {
        let f = |x: &[f64]| Some(((x[0] - 5.0).powi(2), vec![2.0 * (x[0] - 5.0)]));
        let out = minimize(f, &[0.0], &[-1.0], &[1.0], 100).unwrap();
        assert_eq!(out.x[0], 1.0);
    }
}
