//! Gauss-Legendre quadrature on `[0, 1]`.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point rule on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // Newton on P_n from the Chebyshev-like initial guess
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 - x), 0.5 * w));
    }
    out.reverse();
    out
}

/// Composite rule: `panels` equal panels of an `n`-point rule on `[0, 1]`.
pub fn composite(n: usize, panels: usize) -> Vec<(f64, f64)> {
    let base = gauss_legendre(n);
    let h = 1.0 / panels as f64;
    let mut out = Vec::with_capacity(n * panels);
    for p in 0..panels {
        for &(x, w) in &base {
            out.push(((p as f64 + x) * h, w * h));
        }
    }
    out
}
