//! The bubble family z_{μ,ξ}, its tangent fields and the constants attached to it.

use crate::error::{Error, Result};
use crate::field::{Field, FracOps, Grid};
use crate::model::{dist2, ProblemParams};
use crate::num::{lit, ln_gamma, sphere_area, Real};
use crate::quadrature::Composite;

/// Reference grid size used for the normalizing constant.
const ALPHA_GRID: usize = 64;

/// κ in (-Δ)^s (1+|x|²)^{−(n−2s)/2} = κ (1+|x|²)^{−(n+2s)/2}, evaluated spectrally on
/// `grid` at x = 0 and |x| = 1.
pub fn kappa_on<T: Real>(grid: &Grid<T>, s: T) -> (T, T) {
    let two = lit::<T>(2.0);
    let nf = T::from_usize_(grid.n());
    let a = (nf - two * s) / two;
    let b = (nf + two * s) / two;
    let c = grid.center().to_vec();
    let profile = Field::from_fn(grid, |x| (T::one() + x.iter().map(|v| *v * *v).sum::<T>()).powf(-a));
    let lap = crate::field::frac_laplacian(&profile, s);
    let x0 = vec![T::zero(); grid.n()];
    let mut x1 = vec![T::zero(); grid.n()];
    x1[0] = T::one();
    let _ = c;
    let k0 = lap.eval_at(&x0, b);
    let k1 = lap.eval_at(&x1, b) / two.powf(-b);
    (k0, k1)
}

/// α_{n,s} on a given reference grid.
pub fn alpha_ns_on<T: Real>(grid: &Grid<T>, s: T) -> Result<T> {
    let (k0, k1) = kappa_on(grid, s);
    if !((k0 - k1).abs() <= lit::<T>(1e-3) * k0.abs()) || !(k0 > T::zero()) {
        return Err(Error::NormalizationDiverged { kappa0: k0.f64(), kappa1: k1.f64() });
    }
    let nf = T::from_usize_(grid.n());
    let two = lit::<T>(2.0);
    Ok(k0.powf((nf - two * s) / (lit::<T>(4.0) * s)))
}

/// The unique α > 0 with (-Δ)^s z₀ = z₀^p.
///
/// In n = 3 no grid exists; κ is the eigenvalue of the conjugated operator on
/// constants, 2^{2s} Γ(n/2+s)/Γ(n/2−s).
pub fn alpha_ns<T: Real>(params: &ProblemParams<T>) -> Result<T> {
    let n = params.n();
    let s = params.s();
    if n <= 2 {
        let g = Grid::new(n, T::one(), ALPHA_GRID)?;
        alpha_ns_on(&g, s)
    } else {
        let h = n as f64 / 2.0;
        let sf = s.f64();
        let kappa = (2.0 * sf) * std::f64::consts::LN_2 + ln_gamma(h + sf) - ln_gamma(h - sf);
        Ok(T::lit((kappa.exp()).powf((n as f64 - 2.0 * sf) / (4.0 * sf))))
    }
}

/// A point (μ, ξ) of the critical manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct BubblePoint<T> {
    mu: T,
    xi: Vec<T>,
    alpha: T,
    s: T,
    /// (n−2s)/2
    a: T,
}

impl<T: Real> BubblePoint<T> {
    pub fn new(params: &ProblemParams<T>, alpha: T, mu: T, xi: Vec<T>) -> Result<Self> {
        if !(mu > T::zero()) || !mu.is_finite() {
            return Err(Error::ExponentRange { what: format!("mu = {mu} must be positive") });
        }
        if xi.len() != params.n() {
            return Err(Error::InvalidGrid(format!("xi has {} coordinates, need {}", xi.len(), params.n())));
        }
        Ok(Self { mu, xi, alpha, s: params.s(), a: params.profile_exp() })
    }

    pub fn mu(&self) -> T {
        self.mu
    }
    pub fn xi(&self) -> &[T] {
        &self.xi
    }
    pub fn alpha(&self) -> T {
        self.alpha
    }
    pub fn n(&self) -> usize {
        self.xi.len()
    }

    pub fn with_params(&self, mu: T, xi: Vec<T>) -> Self {
        Self { mu, xi, ..self.clone() }
    }

    #[inline]
    fn zbar(&self, r: T) -> T {
        self.alpha * (T::one() + r).powf(-self.a)
    }

    #[inline]
    fn zbar_prime(&self, r: T) -> T {
        -self.a * self.alpha * (T::one() + r).powf(-self.a - T::one())
    }

    /// z_{μ,ξ}(x) = μ^{(2s−n)/2} z₀((x−ξ)/μ).
    pub fn eval(&self, x: &[T]) -> T {
        let r = dist2(x, &self.xi) / (self.mu * self.mu);
        self.mu.powf(-self.a) * self.zbar(r)
    }

    /// Tangent field q_j: j < n is ∂/∂ξ_j, j = n is ∂/∂μ.
    pub fn tangent(&self, j: usize, x: &[T]) -> T {
        let n = self.n();
        assert!(j <= n, "tangent index {j} out of range");
        let mu = self.mu;
        let mu2 = mu * mu;
        let rho2 = dist2(x, &self.xi);
        let r = rho2 / mu2;
        let two = lit::<T>(2.0);
        if j < n {
            mu.powf(-self.a) * self.zbar_prime(r) * two * (self.xi[j] - x[j]) / mu2
        } else {
            -self.a * mu.powf(-self.a - T::one()) * self.zbar(r) - mu.powf(-self.a) * self.zbar_prime(r) * two * rho2 / (mu2 * mu)
        }
    }

    pub fn sample(&self, grid: &Grid<T>) -> Field<T> {
        Field::from_fn(grid, |x| self.eval(x))
    }

    pub fn tangent_field(&self, grid: &Grid<T>, j: usize) -> Field<T> {
        Field::from_fn(grid, |x| self.tangent(j, x))
    }

    pub fn tangent_fields(&self, grid: &Grid<T>) -> Vec<Field<T>> {
        (0..=self.n()).map(|j| self.tangent_field(grid, j)).collect()
    }

    /// Sup-relative residual ‖(-Δ)^s z − z^p‖_∞ / ‖z^p‖_∞ on `grid`.
    pub fn pde_residual(&self, grid: &Grid<T>, p: T) -> T {
        let z = self.sample(grid);
        let lap = FracOps::new(grid, self.s).laplacian(z.values());
        let zp: Vec<T> = z.values().iter().map(|v| v.powf(p)).collect();
        let scale = zp.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let err = lap.iter().zip(&zp).fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()));
        err / scale
    }

    /// max_j ‖(-Δ)^s q_j − p z^{p−1} q_j‖_∞ / ‖(-Δ)^s q_j‖_∞.
    pub fn linearized_residual(&self, grid: &Grid<T>, p: T) -> T {
        let ops = FracOps::new(grid, self.s);
        let z = self.sample(grid);
        let mut worst = T::zero();
        for q in self.tangent_fields(grid) {
            let lap = ops.laplacian(q.values());
            let rhs: Vec<T> = z.values().iter().zip(q.values()).map(|(zv, qv)| p * zv.powf(p - T::one()) * *qv).collect();
            let scale = lap.iter().fold(T::zero(), |m, v| m.max(v.abs()));
            let err = lap.iter().zip(&rhs).fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()));
            worst = worst.max(err / scale);
        }
        worst
    }
}

/// Gram matrix ⟨q_i, q_j⟩ = p ∫ z^{p−1} q_i q_j, row-major (n+1)×(n+1).
#[derive(Debug, Clone, PartialEq)]
pub struct Gram<T> {
    pub dim: usize,
    pub entries: Vec<T>,
}

impl<T: Real> Gram<T> {
    pub fn get(&self, i: usize, j: usize) -> T {
        self.entries[i * self.dim + j]
    }
    pub fn diag(&self) -> Vec<T> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }
    /// max_{i≠j} |G_ij| / max(G_ii, G_jj).
    pub fn max_off_diagonal(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.dim {
            for j in 0..self.dim {
                if i != j {
                    worst = worst.max(self.get(i, j).abs() / self.get(i, i).max(self.get(j, j)));
                }
            }
        }
        worst
    }
}

/// Tangent fields together with their Gram constants.
#[derive(Debug, Clone)]
pub struct TangentFrame<T: Real> {
    pub point: BubblePoint<T>,
    pub fields: Vec<Field<T>>,
    pub gram: Gram<T>,
}

fn gram_on<T: Real>(b: &BubblePoint<T>, grid: &Grid<T>, p: T) -> Gram<T> {
    let z = b.sample(grid);
    let qs = b.tangent_fields(grid);
    let w = grid.volume_weights();
    let k = b.n() + 1;
    let mut entries = vec![T::zero(); k * k];
    let zp1: Vec<T> = z.values().iter().zip(w).map(|(v, wi)| p * v.powf(p - T::one()) * *wi).collect();
    for i in 0..k {
        for j in i..k {
            let v: T = qs[i].values().iter().zip(qs[j].values()).zip(&zp1).map(|((a, b), c)| *a * *b * *c).sum();
            entries[i * k + j] = v;
            entries[j * k + i] = v;
        }
    }
    Gram { dim: k, entries }
}

/// Gram constants by quadrature on `grid`, checked against one refinement of the grid.
pub fn gram_constants<T: Real>(b: &BubblePoint<T>, params: &ProblemParams<T>, grid: &Grid<T>) -> Result<Gram<T>> {
    let g0 = gram_on(b, grid, params.p());
    let g1 = gram_on(b, &grid.refined()?, params.p());
    for (a, c) in g0.diag().iter().zip(g1.diag()) {
        if !((*a - c).abs() <= lit::<T>(0.01) * c.abs()) {
            return Err(Error::GridTooCoarse(format!("Gram diagonal {a} vs refined {c}")));
        }
    }
    Ok(g1)
}

pub fn tangent_frame<T: Real>(b: &BubblePoint<T>, params: &ProblemParams<T>, grid: &Grid<T>) -> Result<TangentFrame<T>> {
    let gram = gram_constants(b, params, grid)?;
    Ok(TangentFrame { point: b.clone(), fields: b.tangent_fields(grid), gram })
}

/// ∫ (1+|x|²)^{−γ} dx over ℝⁿ in closed form: π^{n/2} Γ(γ−n/2)/Γ(γ).
pub fn profile_moment_closed_form(n: usize, gamma: f64) -> f64 {
    let h = n as f64 / 2.0;
    (h * std::f64::consts::PI.ln() + ln_gamma(gamma - h) - ln_gamma(gamma)).exp()
}

/// ∫ (1+|x|²)^{−γ} dx by radial quadrature in t = ln r with series tails.
pub fn profile_moment_quadrature(n: usize, gamma: f64) -> f64 {
    let nf = n as f64;
    let cut = 20.0;
    let rule = Composite::new(20);
    let core = rule.integrate(-cut, cut, 160, |t| (nf * t).exp() * (1.0 + (2.0 * t).exp()).powf(-gamma));
    // t > cut: e^{(n−2γ)t}(1+e^{−2t})^{−γ}; t < −cut: e^{nt}(1+e^{2t})^{−γ}
    let mut right = 0.0;
    let mut left = 0.0;
    let mut binom = 1.0;
    for k in 0..12 {
        let kf = k as f64;
        right += binom * ((nf - 2.0 * gamma - 2.0 * kf) * cut).exp() / (2.0 * gamma + 2.0 * kf - nf);
        left += binom * (-(nf + 2.0 * kf) * cut).exp() / (nf + 2.0 * kf);
        binom *= (-gamma - kf) / (kf + 1.0);
    }
    sphere_area(n) * (core + right + left)
}

/// ∫_{ℝⁿ} z₀^{q+1} dx, finite only when (n−2s)(q+1) > n.
pub fn bubble_moment<T: Real>(params: &ProblemParams<T>, alpha: T) -> Result<T> {
    let e = (params.nf() - lit::<T>(2.0) * params.s()) * (params.q() + T::one());
    if e <= params.nf() {
        return Err(Error::MomentDiverges { exponent: e.f64(), n: params.n() });
    }
    let m = profile_moment_quadrature(params.n(), params.gamma_s().f64());
    Ok(alpha.powf(params.q() + T::one()) * T::lit(m))
}

/// Same integral through the Beta-function closed form.
pub fn bubble_moment_closed_form<T: Real>(params: &ProblemParams<T>, alpha: T) -> Result<T> {
    let e = (params.nf() - lit::<T>(2.0) * params.s()) * (params.q() + T::one());
    if e <= params.nf() {
        return Err(Error::MomentDiverges { exponent: e.f64(), n: params.n() });
    }
    Ok(alpha.powf(params.q() + T::one()) * T::lit(profile_moment_closed_form(params.n(), params.gamma_s().f64())))
}
