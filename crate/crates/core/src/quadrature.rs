//! Gauss–Legendre rules and composite integration with a refinement check.

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on [−1, 1], ascending nodes.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1);
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    let mf = m as f64;
    for i in 0..m.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_m.
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_pd(m, t);
            dp = d;
            let dt = p / d;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_pd(m, t);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - t * t) * dp * dp);
        x[i] = -t;
        x[m - 1 - i] = t;
        w[i] = wi;
        w[m - 1 - i] = wi;
    }
    if m % 2 == 1 {
        x[m / 2] = 0.0;
    }
    (x, w)
}

fn legendre_pd(m: usize, t: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = t;
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * t * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (t * p1 - p0) / (t * t - 1.0);
    (p1, d)
}

/// Fixed-order composite Gauss–Legendre rule on `[a, b]` with `panels` equal panels.
pub struct Composite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Composite {
    pub fn new(order: usize) -> Self {
        let (nodes, weights) = gauss_legendre(order);
        Self { nodes, weights }
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, panels: usize, mut f: F) -> f64 {
        if b <= a {
            return 0.0;
        }
        let h = (b - a) / panels as f64;
        let mut total = 0.0;
        for k in 0..panels {
            let lo = a + h * k as f64;
            let mid = lo + 0.5 * h;
            let mut acc = 0.0;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                acc += w * f(mid + 0.5 * h * x);
            }
            total += 0.5 * h * acc;
        }
        total
    }

    /// Vector-valued variant: `f` accumulates `w·f(x)` into the output slice.
    pub fn integrate_vec<F: FnMut(f64, f64, &mut [f64])>(&self, a: f64, b: f64, panels: usize, out: &mut [f64], mut f: F) {
        if b <= a {
            return;
        }
        let h = (b - a) / panels as f64;
        for k in 0..panels {
            let mid = a + h * (k as f64 + 0.5);
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                f(mid + 0.5 * h * x, 0.5 * h * w, out);
            }
        }
    }
}

/// Runs `eval(level)` for increasing levels until two consecutive results agree to
/// `tol` (relative to `scale(result)`), returning the finer value. Fails if they never
/// agree within `max_level` refinements or if the final disagreement exceeds `accept`.
pub fn refine_until<F>(mut eval: F, tol: f64, accept: f64, max_level: usize) -> Result<Vec<f64>>
where
    F: FnMut(usize) -> Vec<f64>,
{
    let mut prev = eval(0);
    let mut last_diff = f64::INFINITY;
    for level in 1..=max_level {
        let cur = eval(level);
        let scale = cur.iter().chain(prev.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
        let diff = cur.iter().zip(&prev).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let rel = if scale > 0.0 { diff / scale } else { diff };
        if rel <= tol {
            return Ok(cur);
        }
        last_diff = rel;
        prev = cur;
    }
    if last_diff <= accept {
        Ok(prev)
    } else {
        Err(Error::QuadratureNotConverged { rel_diff: last_diff })
    }
}

/// Least-squares line through `(x_i, y_i)`: returns (slope, intercept, r²).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, intercept, r2)
}
