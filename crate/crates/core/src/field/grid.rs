use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::spectral::{Basis, Circle, Sphere};
use crate::error::{Error, Result};
use crate::num::{lit, ln_gamma, Real};

/// Geometric description of a grid: everything needed to rebuild it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub center: Vec<f64>,
    /// Stereographic scale ℓ: half the points lie in |x − center| < ℓ.
    pub scale: f64,
    /// Points per axis (power of two). In n = 2 there are N/2 latitude rings of N points.
    pub size: usize,
}

/// Stereographic grid for ℝⁿ (n = 1, 2).
///
/// ℝⁿ is mapped conformally onto Sⁿ, `x = c + ℓ·tan(θ/2)` in 1-D, and the sphere is
/// sampled with a spectral quadrature. With conformal factor `J(x) = 2ℓ/(ℓ² + |x−c|²)`
/// the fractional Laplacian is exactly conjugate to the intertwining operator
/// `P_{2s}` on the sphere, `(-Δ)^s (J^a v) = J^b P_{2s} v` with `a = (n−2s)/2`,
/// `b = (n+2s)/2`, and `P_{2s}` acts on degree-l harmonics by
/// `Γ(l + n/2 + s)/Γ(l + n/2 − s)`. No truncation of ℝⁿ is involved.
#[derive(Clone)]
pub struct Grid<T: Real> {
    inner: Arc<GridData<T>>,
}

struct GridData<T: Real> {
    spec: GridSpec,
    center: Vec<T>,
    scale: T,
    points: Vec<T>,
    conf: Vec<T>,
    sphere_w: Vec<T>,
    vol_w: Vec<T>,
    basis: Basis<T>,
}

impl<T: Real> fmt::Debug for Grid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Grid({:?})", self.inner.spec)
    }
}

impl<T: Real> PartialEq for Grid<T> {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner) || self.inner.spec == other.inner.spec
    }
}

impl<T: Real> Grid<T> {
    pub fn new(n: usize, scale: T, size: usize) -> Result<Self> {
        Self::with_center(n, &vec![T::zero(); n], scale, size)
    }

    pub fn from_spec(spec: &GridSpec) -> Result<Self> {
        let c: Vec<T> = spec.center.iter().map(|v| T::lit(*v)).collect();
        Self::with_center(spec.n, &c, T::lit(spec.scale), spec.size)
    }

    pub fn with_center(n: usize, center: &[T], scale: T, size: usize) -> Result<Self> {
        if !(1..=2).contains(&n) {
            return Err(Error::UnsupportedDimension { n, allowed: "1..=2 for grids" });
        }
        if center.len() != n {
            return Err(Error::InvalidGrid(format!("center has {} coordinates, need {n}", center.len())));
        }
        if !(scale > T::zero()) || !scale.is_finite() {
            return Err(Error::InvalidGrid("scale must be positive".into()));
        }
        if size < 16 || !size.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("N = {size} must be a power of two >= 16")));
        }
        let spec = GridSpec { n, center: center.iter().map(|v| v.f64()).collect(), scale: scale.f64(), size };
        let two = lit::<T>(2.0);
        let half = lit::<T>(0.5);
        let data = if n == 1 {
            let basis = Circle::new(size);
            let w = two * T::PI() / T::from_usize_(size);
            let mut points = Vec::with_capacity(size);
            let mut conf = Vec::with_capacity(size);
            for j in 0..size {
                let th = Circle::<T>::node(size, j);
                points.push(center[0] + scale * (half * th).tan());
                conf.push((T::one() + th.cos()) / scale);
            }
            let sphere_w = vec![w; size];
            let vol_w = conf.iter().map(|j| w / *j).collect();
            GridData { spec, center: center.to_vec(), scale, points, conf, sphere_w, vol_w, basis: Basis::Circle(basis) }
        } else {
            let nt = size / 2;
            let np = size;
            let (basis, t, gw) = Sphere::new(nt, np);
            let dphi = 2.0 * std::f64::consts::PI / np as f64;
            let mut points = Vec::with_capacity(2 * nt * np);
            let mut conf = Vec::with_capacity(nt * np);
            let mut sphere_w = Vec::with_capacity(nt * np);
            for i in 0..nt {
                let ti = T::lit(t[i]);
                let r = scale * ((T::one() + ti) / (T::one() - ti)).sqrt();
                let ji = (T::one() - ti) / scale;
                for k in 0..np {
                    let phi = T::lit(dphi * k as f64);
                    points.push(center[0] + r * phi.cos());
                    points.push(center[1] + r * phi.sin());
                    conf.push(ji);
                    sphere_w.push(T::lit(gw[i] * dphi));
                }
            }
            let vol_w = sphere_w.iter().zip(&conf).map(|(w, j)| *w / (*j * *j)).collect();
            GridData { spec, center: center.to_vec(), scale, points, conf, sphere_w, vol_w, basis: Basis::Sphere(basis) }
        };
        Ok(Self { inner: Arc::new(data) })
    }

    /// Grid of the same size recentred/rescaled.
    pub fn adapted(&self, center: &[T], scale: T) -> Result<Self> {
        Self::with_center(self.n(), center, scale, self.size())
    }

    pub fn refined(&self) -> Result<Self> {
        Self::with_center(self.n(), &self.inner.center, self.inner.scale, 2 * self.size())
    }

    pub fn spec(&self) -> &GridSpec {
        &self.inner.spec
    }
    pub fn n(&self) -> usize {
        self.inner.spec.n
    }
    pub fn size(&self) -> usize {
        self.inner.spec.size
    }
    pub fn center(&self) -> &[T] {
        &self.inner.center
    }
    pub fn scale(&self) -> T {
        self.inner.scale
    }
    /// Number of sample points.
    pub fn len(&self) -> usize {
        self.inner.conf.len()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn point(&self, i: usize) -> &[T] {
        let n = self.n();
        &self.inner.points[i * n..(i + 1) * n]
    }
    /// Conformal factor J at every node.
    pub fn conformal(&self) -> &[T] {
        &self.inner.conf
    }
    /// Quadrature weights on the sphere.
    pub fn sphere_weights(&self) -> &[T] {
        &self.inner.sphere_w
    }
    /// Quadrature weights for ∫_{ℝⁿ} · dx.
    pub fn volume_weights(&self) -> &[T] {
        &self.inner.vol_w
    }
    /// Largest distance between neighbouring nodes inside |x − c| ≤ ℓ.
    pub fn core_spacing(&self) -> T {
        let pi = T::PI();
        match self.n() {
            1 => self.scale() * pi / T::from_usize_(self.size()),
            _ => self.scale() * lit::<T>(2.0) * pi / T::from_usize_(self.size()),
        }
    }

    pub(crate) fn basis(&self) -> &Basis<T> {
        &self.inner.basis
    }

    pub fn num_coeffs(&self) -> usize {
        self.inner.basis.num_coeffs()
    }

    /// Symbol of `P_{2s}` (and its powers) on every coefficient: `λ_l^power`.
    pub fn symbol(&self, s: T, power: T) -> Vec<T> {
        let h = self.n() as f64 / 2.0;
        let s = s.f64();
        let pw = power.f64();
        let maxdeg = self.basis().degrees().iter().copied().max().unwrap_or(0);
        let per_deg: Vec<T> = (0..=maxdeg)
            .map(|l| {
                let l = l as f64;
                T::lit((pw * (ln_gamma(l + h + s) - ln_gamma(l + h - s))).exp())
            })
            .collect();
        self.basis().degrees().iter().map(|&l| per_deg[l]).collect()
    }

    pub fn degrees(&self) -> &[usize] {
        self.basis().degrees()
    }

    /// Sphere coordinates of an arbitrary point of ℝⁿ and the conformal factor there.
    pub fn sphere_coords(&self, x: &[T]) -> (Vec<T>, T) {
        let c = &self.inner.center;
        let l = self.inner.scale;
        let two = lit::<T>(2.0);
        let d2: T = x.iter().zip(c).map(|(a, b)| (*a - *b) * (*a - *b)).sum();
        let jc = two * l / (l * l + d2);
        if self.n() == 1 {
            (vec![two * ((x[0] - c[0]) / l).atan()], jc)
        } else {
            let t = (d2 - l * l) / (d2 + l * l);
            let phi = (x[1] - c[1]).atan2(x[0] - c[0]);
            (vec![t, phi], jc)
        }
    }
}
