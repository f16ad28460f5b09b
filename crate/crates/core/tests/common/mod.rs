//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use sbc_core::boxqp::BoxQpInstance;

fn obj(b: &BoxQpInstance, x: &DVector<f64>) -> f64 {
    0.5 * x.dot(&(&b.q * x)) + b.f.dot(x)
}

/// Projected gradient descent on `[0, 1]ⁿ` with backtracking.
pub fn polish(b: &BoxQpInstance, mut x: DVector<f64>) -> (f64, DVector<f64>) {
    let lmax = b.q.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
    let mut fx = obj(b, &x);
    for _ in 0..2000 {
        let g = &b.q * &x + &b.f;
        let mut step = 1.0 / lmax;
        let mut moved = false;
        for _ in 0..30 {
            let y = (&x - &g * step).map(|v| v.clamp(0.0, 1.0));
            let fy = obj(b, &y);
            if fy < fx - 1e-15 {
                x = y;
                fx = fy;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    (fx, x)
}

/// Global minimum by KKT enumeration over all (lower, upper, free) patterns,
/// cross-checked by a polished dense grid.
pub fn boxqp_global(b: &BoxQpInstance) -> f64 {
    let n = b.n();
    let mut best = f64::INFINITY;
    let total = 3usize.pow(n as u32);
    for code in 0..total {
        let mut pat = vec![0u8; n];
        let mut c = code;
        for p in pat.iter_mut() {
            *p = (c % 3) as u8;
            c /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&k| pat[k] == 2).collect();
        let mut x = DVector::from_fn(n, |k, _| if pat[k] == 1 { 1.0 } else { 0.0 });
        if !free.is_empty() {
            let m = free.len();
            let a = DMatrix::from_fn(m, m, |r, s| b.q[(free[r], free[s])]);
            let g0 = &b.q * &x + &b.f;
            let rhs = DVector::from_fn(m, |r, _| -g0[free[r]]);
            let Some(sol) = a.lu().solve(&rhs) else { continue };
            if sol.iter().any(|v| !(-1e-12..=1.0 + 1e-12).contains(v)) {
                continue;
            }
            for (r, &k) in free.iter().enumerate() {
                x[k] = sol[r].clamp(0.0, 1.0);
            }
        }
        best = best.min(obj(b, &x));
    }
    let steps = 6;
    let grid = (steps + 1usize).pow(n as u32);
    for code in 0..grid {
        let mut c = code;
        let x = DVector::from_fn(n, |_, _| {
            let v = (c % (steps + 1)) as f64 / steps as f64;
            c /= steps + 1;
            v
        });
        best = best.min(polish(b, x).0);
    }
    best
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}
