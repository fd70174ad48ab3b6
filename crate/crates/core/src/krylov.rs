//! Restarted GMRES with a caller-supplied inner product.

use crate::error::{Error, Result};
use crate::num::Real;

#[derive(Debug, Clone, Copy)]
pub(crate) struct GmresOptions {
    /// Relative residual target ‖b − Ax‖/‖b‖.
    pub tol: f64,
    pub restart: usize,
    pub max_iter: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self { tol: 1e-13, restart: 80, max_iter: 2000 }
    }
}

/// Solves `A x = b`. `dot` must be an inner product (its norm is used for the residual).
pub(crate) fn gmres<T, A, D>(apply: A, b: &[T], dot: D, opts: GmresOptions) -> Result<(Vec<T>, f64, usize)>
where
    T: Real,
    A: Fn(&[T]) -> Vec<T>,
    D: Fn(&[T], &[T]) -> T,
{
    let nrm = |v: &[T]| dot(v, v).max(T::zero()).sqrt().f64();
    let bnorm = nrm(b);
    let mut x = vec![T::zero(); b.len()];
    if bnorm == 0.0 {
        return Ok((x, 0.0, 0));
    }
    let floor = (opts.tol * bnorm).max(64.0 * T::epsilon().f64() * bnorm);
    let mut total = 0usize;
    let mut best = f64::INFINITY;
    loop {
        let ax = apply(&x);
        let r: Vec<T> = b.iter().zip(&ax).map(|(bi, ai)| *bi - *ai).collect();
        let beta = nrm(&r);
        if beta <= floor {
            return Ok((x, beta / bnorm, total));
        }
        if total >= opts.max_iter || beta > 0.5 * best {
            return Err(Error::BorderedSolveStalled { residual: beta / bnorm, iterations: total });
        }
        best = best.min(beta);
        let m = opts.restart;
        let mut v: Vec<Vec<T>> = Vec::with_capacity(m + 1);
        v.push(r.iter().map(|ri| *ri / T::lit(beta)).collect());
        let mut hess = vec![vec![0.0f64; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0f64; m], vec![0.0f64; m]);
        let mut g = vec![0.0f64; m + 1];
        g[0] = beta;
        let mut k = 0;
        while k < m && total < opts.max_iter {
            let mut wv = apply(&v[k]);
            for (i, vi) in v.iter().enumerate() {
                let hij = dot(&wv, vi);
                hess[i][k] = hij.f64();
                for (a, b) in wv.iter_mut().zip(vi) {
                    *a = *a - hij * *b;
                }
            }
            // second Gram–Schmidt pass for stability
            for (i, vi) in v.iter().enumerate() {
                let hij = dot(&wv, vi);
                hess[i][k] += hij.f64();
                for (a, b) in wv.iter_mut().zip(vi) {
                    *a = *a - hij * *b;
                }
            }
            let hn = nrm(&wv);
            hess[k + 1][k] = hn;
            for i in 0..k {
                let t = cs[i] * hess[i][k] + sn[i] * hess[i + 1][k];
                hess[i + 1][k] = -sn[i] * hess[i][k] + cs[i] * hess[i + 1][k];
                hess[i][k] = t;
            }
            let den = hess[k][k].hypot(hess[k + 1][k]);
            cs[k] = hess[k][k] / den;
            sn[k] = hess[k + 1][k] / den;
            hess[k][k] = den;
            hess[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            total += 1;
            k += 1;
            if g[k].abs() <= floor || hn == 0.0 {
                break;
            }
            v.push(wv.iter().map(|a| *a / T::lit(hn)).collect());
        }
        let mut y = vec![0.0f64; k];
        for i in (0..k).rev() {
            let mut acc = g[i];
            for j in i + 1..k {
                acc -= hess[i][j] * y[j];
            }
            y[i] = acc / hess[i][i];
        }
        for (yi, vi) in y.iter().zip(&v) {
            for (a, b) in x.iter_mut().zip(vi) {
                *a = *a + T::lit(*yi) * *b;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_nonsymmetric_system() {
        let n = 40;
        let a = |x: &[f64]| -> Vec<f64> {
            (0..n).map(|i| 3.0 * x[i] + if i > 0 { x[i - 1] } else { 0.0 } - 0.5 * if i + 1 < n { x[i + 1] } else { 0.0 }).collect()
        };
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let b = a(&xs);
        let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        let (x, res, _) = gmres(a, &b, dot, GmresOptions { restart: 10, ..Default::default() }).unwrap();
        assert!(res < 1e-12);
        for (u, v) in x.iter().zip(&xs) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn singular_system_stalls() {
        let a = |x: &[f64]| vec![x[0], 0.0];
        let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        let err = gmres(a, &[1.0, 1.0], dot, GmresOptions::default()).unwrap_err();
        assert!(matches!(err, Error::BorderedSolveStalled { .. }));
    }
}
