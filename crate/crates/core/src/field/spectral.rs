//! Real orthonormal harmonic bases on S¹ and S² sampled on the grid nodes.
//!
//! Both bases are orthonormal for the discrete quadrature of the grid, so
//! `analyze ∘ synthesize` is the identity on coefficients.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::num::{lit, Real};
use crate::quadrature::gauss_legendre;

pub(crate) enum Basis<T: Real> {
    Circle(Circle<T>),
    Sphere(Sphere<T>),
}

impl<T: Real> Basis<T> {
    pub fn num_coeffs(&self) -> usize {
        match self {
            Basis::Circle(c) => c.n,
            Basis::Sphere(s) => s.coeffs.len(),
        }
    }

    /// Harmonic degree of every coefficient.
    pub fn degrees(&self) -> &[usize] {
        match self {
            Basis::Circle(c) => &c.degrees,
            Basis::Sphere(s) => &s.degrees,
        }
    }

    pub fn analyze(&self, f: &[T]) -> Vec<T> {
        match self {
            Basis::Circle(c) => c.analyze(f),
            Basis::Sphere(s) => s.analyze(f),
        }
    }

    pub fn synthesize(&self, c: &[T]) -> Vec<T> {
        match self {
            Basis::Circle(b) => b.synthesize(c),
            Basis::Sphere(s) => s.synthesize(c),
        }
    }

    /// Evaluates the expansion at sphere coordinates: `(θ)` for S¹, `(cos ϑ, φ)` for S².
    pub fn eval(&self, c: &[T], coords: &[T]) -> T {
        match self {
            Basis::Circle(b) => b.eval(c, coords[0]),
            Basis::Sphere(s) => s.eval(c, coords[0], coords[1]),
        }
    }
}

pub(crate) struct Circle<T: Real> {
    n: usize,
    theta0: T,
    fwd: Arc<dyn Fft<T>>,
    inv: Arc<dyn Fft<T>>,
    phase: Vec<Complex<T>>,
    nyq: Vec<T>,
    degrees: Vec<usize>,
}

impl<T: Real> Circle<T> {
    /// Nodes θ_j = −π + (2j+1)π/N.
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::<T>::new();
        let pi = T::PI();
        let nf = T::from_usize_(n);
        let theta0 = -pi + pi / nf;
        let phase = (0..=n / 2)
            .map(|k| {
                let a = T::from_usize_(k) * theta0;
                Complex::new(a.cos(), a.sin())
            })
            .collect();
        let nyq = (0..n)
            .map(|j| (nf / lit(2.0) * Self::node(n, j)).sin())
            .collect();
        let mut degrees = vec![0; n];
        for k in 1..n / 2 {
            degrees[2 * k - 1] = k;
            degrees[2 * k] = k;
        }
        degrees[n - 1] = n / 2;
        Self { n, theta0, fwd: planner.plan_fft_forward(n), inv: planner.plan_fft_inverse(n), phase, nyq, degrees }
    }

    pub fn node(n: usize, j: usize) -> T {
        let pi = T::PI();
        -pi + T::from_usize_(2 * j + 1) * pi / T::from_usize_(n)
    }

    fn analyze(&self, f: &[T]) -> Vec<T> {
        let n = self.n;
        let mut buf: Vec<Complex<T>> = f.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.fwd.process(&mut buf);
        let nf = T::from_usize_(n);
        let sq_pi = T::PI().sqrt();
        let sq_2pi = (lit::<T>(2.0) * T::PI()).sqrt();
        let mut c = vec![T::zero(); n];
        c[0] = sq_2pi / nf * buf[0].re;
        let s = lit::<T>(2.0) * sq_pi / nf;
        for k in 1..n / 2 {
            // F_k = e^{−ikθ₀} X_k
            let fk = buf[k] * self.phase[k].conj();
            c[2 * k - 1] = s * fk.re;
            c[2 * k] = -s * fk.im;
        }
        c[n - 1] = sq_2pi / nf * f.iter().zip(&self.nyq).map(|(a, b)| *a * *b).sum::<T>();
        c
    }

    fn synthesize(&self, c: &[T]) -> Vec<T> {
        let n = self.n;
        let sq_pi = T::PI().sqrt();
        let sq_2pi = (lit::<T>(2.0) * T::PI()).sqrt();
        let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
        buf[0] = Complex::new(c[0] / sq_2pi, T::zero());
        let half = lit::<T>(0.5) / sq_pi;
        for k in 1..n / 2 {
            let z = Complex::new(c[2 * k - 1] * half, -c[2 * k] * half) * self.phase[k];
            buf[k] = z;
            buf[n - k] = z.conj();
        }
        self.inv.process(&mut buf);
        let cn = c[n - 1] / sq_2pi;
        buf.iter().zip(&self.nyq).map(|(z, s)| z.re + cn * *s).collect()
    }

    fn eval(&self, c: &[T], theta: T) -> T {
        let n = self.n;
        let sq_pi = T::PI().sqrt();
        let sq_2pi = (lit::<T>(2.0) * T::PI()).sqrt();
        let mut acc = c[0] / sq_2pi;
        for k in 1..n / 2 {
            let a = T::from_usize_(k) * theta;
            acc = acc + (c[2 * k - 1] * a.cos() + c[2 * k] * a.sin()) / sq_pi;
        }
        acc + c[n - 1] * (T::from_usize_(n) / lit(2.0) * theta).sin() / sq_2pi
    }

    #[allow(dead_code)]
    pub fn theta0(&self) -> T {
        self.theta0
    }
}

/// Band-limited real spherical harmonics on a Gauss–Legendre × uniform-φ grid.
pub(crate) struct Sphere<T: Real> {
    nt: usize,
    np: usize,
    lmax: usize,
    /// Fully normalized P̃_l^m(t_i), laid out `[i][m][l−m]`.
    plm: Vec<Vec<Vec<T>>>,
    /// Quadrature weight of ring i times 2π/N_φ.
    ring_w: Vec<T>,
    coeffs: Vec<(usize, usize, bool)>,
    /// Index of the first coefficient of each m (cos and sin interleaved over l).
    m_offset: Vec<usize>,
    degrees: Vec<usize>,
    fwd: Arc<dyn Fft<T>>,
    inv: Arc<dyn Fft<T>>,
}

impl<T: Real> Sphere<T> {
    /// `nt` Gauss–Legendre rings in t = cos ϑ (ascending), `np = 2·nt` longitudes.
    pub fn new(nt: usize, np: usize) -> (Self, Vec<f64>, Vec<f64>) {
        let (t, w) = gauss_legendre(nt);
        let lmax = nt - 1;
        let mmax = lmax.min(np / 2 - 1);
        let plm = t.iter().map(|&ti| normalized_legendre(lmax, mmax, ti).into_iter().map(|row| row.into_iter().map(T::lit).collect()).collect()).collect();
        let dphi = 2.0 * std::f64::consts::PI / np as f64;
        let ring_w = w.iter().map(|wi| T::lit(wi * dphi)).collect();
        let mut coeffs = Vec::new();
        let mut m_offset = Vec::new();
        for m in 0..=mmax {
            m_offset.push(coeffs.len());
            for l in m..=lmax {
                coeffs.push((l, m, false));
                if m > 0 {
                    coeffs.push((l, m, true));
                }
            }
        }
        let degrees = coeffs.iter().map(|c| c.0).collect();
        let mut planner = FftPlanner::<T>::new();
        let s = Self { nt, np, lmax, plm, ring_w, coeffs, m_offset, degrees, fwd: planner.plan_fft_forward(np), inv: planner.plan_fft_inverse(np) };
        (s, t, w)
    }

    fn mmax(&self) -> usize {
        self.m_offset.len() - 1
    }

    fn analyze(&self, f: &[T]) -> Vec<T> {
        let np = self.np;
        let mut out = vec![T::zero(); self.coeffs.len()];
        let inv_sq_pi = T::one() / T::PI().sqrt();
        let inv_sq_2pi = T::one() / (lit::<T>(2.0) * T::PI()).sqrt();
        let mut buf = vec![Complex::new(T::zero(), T::zero()); np];
        for i in 0..self.nt {
            for (b, v) in buf.iter_mut().zip(&f[i * np..(i + 1) * np]) {
                *b = Complex::new(*v, T::zero());
            }
            self.fwd.process(&mut buf);
            let wi = self.ring_w[i];
            for m in 0..=self.mmax() {
                let p = &self.plm[i][m];
                let off = self.m_offset[m];
                if m == 0 {
                    let a = buf[0].re * wi * inv_sq_2pi;
                    for (j, pl) in p.iter().enumerate() {
                        out[off + j] = out[off + j] + a * *pl;
                    }
                } else {
                    let ac = buf[m].re * wi * inv_sq_pi;
                    let as_ = -buf[m].im * wi * inv_sq_pi;
                    for (j, pl) in p.iter().enumerate() {
                        out[off + 2 * j] = out[off + 2 * j] + ac * *pl;
                        out[off + 2 * j + 1] = out[off + 2 * j + 1] + as_ * *pl;
                    }
                }
            }
        }
        out
    }

    fn synthesize(&self, c: &[T]) -> Vec<T> {
        let np = self.np;
        let inv_sq_pi = T::one() / T::PI().sqrt();
        let inv_sq_2pi = T::one() / (lit::<T>(2.0) * T::PI()).sqrt();
        let half = lit::<T>(0.5);
        let mut out = vec![T::zero(); self.nt * np];
        let mut buf = vec![Complex::new(T::zero(), T::zero()); np];
        for i in 0..self.nt {
            buf.iter_mut().for_each(|b| *b = Complex::new(T::zero(), T::zero()));
            for m in 0..=self.mmax() {
                let p = &self.plm[i][m];
                let off = self.m_offset[m];
                if m == 0 {
                    let b0: T = p.iter().enumerate().map(|(j, pl)| c[off + j] * *pl).sum();
                    buf[0] = Complex::new(b0 * inv_sq_2pi, T::zero());
                } else {
                    let mut bc = T::zero();
                    let mut bs = T::zero();
                    for (j, pl) in p.iter().enumerate() {
                        bc = bc + c[off + 2 * j] * *pl;
                        bs = bs + c[off + 2 * j + 1] * *pl;
                    }
                    let z = Complex::new(bc * half * inv_sq_pi, -bs * half * inv_sq_pi);
                    buf[m] = z;
                    buf[np - m] = z.conj();
                }
            }
            self.inv.process(&mut buf);
            for (o, b) in out[i * np..(i + 1) * np].iter_mut().zip(&buf) {
                *o = b.re;
            }
        }
        out
    }

    fn eval(&self, c: &[T], t: T, phi: T) -> T {
        let p = normalized_legendre(self.lmax, self.mmax(), t.f64());
        let inv_sq_pi = T::one() / T::PI().sqrt();
        let inv_sq_2pi = T::one() / (lit::<T>(2.0) * T::PI()).sqrt();
        let mut acc = T::zero();
        for m in 0..=self.mmax() {
            let off = self.m_offset[m];
            if m == 0 {
                for (j, pl) in p[0].iter().enumerate() {
                    acc = acc + c[off + j] * T::lit(*pl) * inv_sq_2pi;
                }
            } else {
                let a = T::from_usize_(m) * phi;
                let (sn, cs) = a.sin_cos();
                for (j, pl) in p[m].iter().enumerate() {
                    let pl = T::lit(*pl) * inv_sq_pi;
                    acc = acc + (c[off + 2 * j] * cs + c[off + 2 * j + 1] * sn) * pl;
                }
            }
        }
        acc
    }
}

/// P̃_l^m(t) with ∫₋₁¹ P̃² dt = 1, for 0 ≤ m ≤ mmax, m ≤ l ≤ lmax; row m holds l = m..=lmax.
pub(crate) fn normalized_legendre(lmax: usize, mmax: usize, t: f64) -> Vec<Vec<f64>> {
    let st = (1.0 - t * t).max(0.0).sqrt();
    let mut rows = Vec::with_capacity(mmax + 1);
    let mut pmm = std::f64::consts::FRAC_1_SQRT_2;
    for m in 0..=mmax {
        if m > 0 {
            let mf = m as f64;
            pmm *= ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * st;
        }
        let mut row = Vec::with_capacity(lmax + 1 - m);
        row.push(pmm);
        if m < lmax {
            row.push((2.0 * m as f64 + 3.0).sqrt() * t * pmm);
        }
        for l in m + 2..=lmax {
            let lf = l as f64;
            let mf = m as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
            let v = a * (t * row[l - m - 1] - b * row[l - m - 2]);
            row.push(v);
        }
        rows.push(row);
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_orthonormal() {
        let (t, w) = gauss_legendre(40);
        let tabs: Vec<_> = t.iter().map(|&ti| normalized_legendre(12, 12, ti)).collect();
        for m in 0..=12 {
            for l1 in m..=12 {
                for l2 in m..=12 {
                    let s: f64 = (0..t.len()).map(|i| w[i] * tabs[i][m][l1 - m] * tabs[i][m][l2 - m]).sum();
                    let e = if l1 == l2 { 1.0 } else { 0.0 };
                    assert!((s - e).abs() < 1e-12, "m={m} l1={l1} l2={l2} s={s}");
                }
            }
        }
    }

    #[test]
    fn circle_roundtrip_and_orthonormality() {
        let n = 32;
        let b = Circle::<f64>::new(n);
        for k in 0..n {
            let mut c = vec![0.0; n];
            c[k] = 1.0;
            let f = b.synthesize(&c);
            let back = b.analyze(&f);
            for (i, v) in back.iter().enumerate() {
                let e = if i == k { 1.0 } else { 0.0 };
                assert!((v - e).abs() < 1e-13, "k={k} i={i} v={v}");
            }
            let th = Circle::<f64>::node(n, 5);
            assert!((b.eval(&c, th) - f[5]).abs() < 1e-13);
        }
    }

    #[test]
    fn sphere_roundtrip() {
        let (s, _, _) = Sphere::<f64>::new(8, 16);
        let nc = s.coeffs.len();
        assert_eq!(nc, 64);
        for k in 0..nc {
            let mut c = vec![0.0; nc];
            c[k] = 1.0;
            let f = s.synthesize(&c);
            let back = s.analyze(&f);
            for (i, v) in back.iter().enumerate() {
                let e = if i == k { 1.0 } else { 0.0 };
                assert!((v - e).abs() < 1e-12, "k={k} i={i} v={v}");
            }
        }
    }
}
