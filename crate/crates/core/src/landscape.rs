//! The reduced functional Γ(μ,ξ) = G(z_{μ,ξ}), its asymptotics and critical points.
//!
//! Γ is integrated over the support of `h` only, bump by bump. Around ξ the integral
//! is written in polar coordinates; in n ≥ 2 each bump is axisymmetric about the axis
//! from ξ to its center, so only the polar angle ψ and the radius ρ remain. The radius
//! is substituted ρ = μ sinh t, which resolves the bubble peak for any μ.

use rayon::prelude::*;
use serde::Serialize;

use crate::bubble::{alpha_ns, bubble_moment};
use crate::error::{Error, Result};
use crate::model::{dist2, norm, Bump, CompactWeight, ProblemParams};
use crate::num::{gamma_fn, sphere_area, Real};
use crate::quadrature::{gauss_legendre, linear_fit};

/// Γ and its gradient at one point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaSample<T> {
    pub mu: T,
    pub xi: Vec<T>,
    pub gamma: T,
    /// (∂Γ/∂μ, ∂Γ/∂ξ_1, …, ∂Γ/∂ξ_n)
    pub grad: Vec<T>,
}

impl<T: Real> GammaSample<T> {
    pub fn grad_norm(&self) -> T {
        norm(&self.grad)
    }
}

/// Anything that can play the role of Γ for the critical-point search.
pub trait ReducedFunctional<T: Real>: Sync {
    fn dim(&self) -> usize;
    fn sample(&self, mu: T, xi: &[T]) -> Result<GammaSample<T>>;
    /// Cheaper evaluation for coarse scans (defaults to `sample`).
    fn sample_fast(&self, mu: T, xi: &[T]) -> Result<GammaSample<T>> {
        self.sample(mu, xi)
    }
    /// Preferred ξ seeds for the scan (e.g. bump centers).
    fn seeds(&self) -> Vec<Vec<T>> {
        Vec::new()
    }
}

/// Quadrature controls for Γ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaQuadrature {
    /// Gauss–Legendre order per panel.
    pub order: usize,
    /// Panel width in the sinh variable at level 0.
    pub panel_width: f64,
    /// Angular panels at level 0 (n ≥ 2).
    pub angular_panels: usize,
    /// Agreement required between consecutive levels, relative to ∫|integrand|.
    pub tol: f64,
    /// Largest disagreement accepted after `max_level` refinements.
    pub accept: f64,
    pub max_level: usize,
}

impl Default for GammaQuadrature {
    fn default() -> Self {
        Self { order: 12, panel_width: 0.5, angular_panels: 12, tol: 1e-8, accept: 1e-8, max_level: 4 }
    }
}

/// Γ for a concrete weight.
#[derive(Debug, Clone)]
pub struct Landscape<T: Real> {
    params: ProblemParams<T>,
    weight: CompactWeight<T>,
    alpha: T,
    quad: GammaQuadrature,
    gl: (Vec<f64>, Vec<f64>),
}

/// Γ, ∂_μΓ, axial derivative, and the matching absolute integrals.
#[derive(Debug, Clone, Copy, Default)]
struct Parts {
    val: f64,
    dmu: f64,
    dax: f64,
    abs_val: f64,
    abs_dmu: f64,
    abs_dax: f64,
}

impl Parts {
    fn add(&mut self, w: f64, v: f64, m: f64, a: f64) {
        self.val += w * v;
        self.dmu += w * m;
        self.dax += w * a;
        self.abs_val += (w * v).abs();
        self.abs_dmu += (w * m).abs();
        self.abs_dax += (w * a).abs();
    }
    fn scaled(mut self, c: f64) -> Self {
        self.val *= c;
        self.dmu *= c;
        self.dax *= c;
        self.abs_val *= c.abs();
        self.abs_dmu *= c.abs();
        self.abs_dax *= c.abs();
        self
    }
}

impl<T: Real> Landscape<T> {
    /// Validates the weight against the params (hypotheses on h and on the regime).
    pub fn new(params: &ProblemParams<T>, weight: &CompactWeight<T>) -> Result<Self> {
        params.check_weight(weight)?;
        Self::unchecked(params, weight)
    }

    /// Skips the hypothesis checks on `h` (used for cancellation and sign experiments).
    pub fn unchecked(params: &ProblemParams<T>, weight: &CompactWeight<T>) -> Result<Self> {
        let alpha = alpha_ns(params)?;
        Ok(Self::with_alpha(params, weight, alpha))
    }

    pub fn with_alpha(params: &ProblemParams<T>, weight: &CompactWeight<T>, alpha: T) -> Self {
        let quad = GammaQuadrature::default();
        let gl = gauss_legendre(quad.order);
        Self { params: *params, weight: weight.clone(), alpha, quad, gl }
    }

    pub fn with_quadrature(mut self, quad: GammaQuadrature) -> Self {
        self.gl = gauss_legendre(quad.order);
        self.quad = quad;
        self
    }

    pub fn params(&self) -> &ProblemParams<T> {
        &self.params
    }
    pub fn weight(&self) -> &CompactWeight<T> {
        &self.weight
    }
    pub fn alpha(&self) -> T {
        self.alpha
    }

    /// Γ(μ,ξ) with gradient; two quadrature levels must agree.
    pub fn gamma(&self, mu: T, xi: &[T]) -> Result<GammaSample<T>> {
        self.gamma_impl(mu, xi, true)
    }

    /// Single-level evaluation for scans.
    pub fn gamma_fast(&self, mu: T, xi: &[T]) -> Result<GammaSample<T>> {
        self.gamma_impl(mu, xi, false)
    }

    fn gamma_impl(&self, mu: T, xi: &[T], checked: bool) -> Result<GammaSample<T>> {
        if !(mu > T::zero()) || !mu.is_finite() {
            return Err(Error::ExponentRange { what: format!("mu = {mu} must be positive") });
        }
        let n = self.params.n();
        if xi.len() != n {
            return Err(Error::InvalidGrid(format!("xi has {} coordinates, need {n}", xi.len())));
        }
        let muf = mu.f64();
        let xif: Vec<f64> = xi.iter().map(|v| v.f64()).collect();
        let mut total = vec![0.0; n + 2];
        for b in &self.weight.bumps {
            let (val, dmu, grad) = self.bump_contribution(b, muf, &xif, checked)?;
            total[0] += val;
            total[1] += dmu;
            for i in 0..n {
                total[2 + i] += grad[i];
            }
        }
        Ok(GammaSample {
            mu,
            xi: xi.to_vec(),
            gamma: T::lit(total[0]),
            grad: total[1..].iter().map(|v| T::lit(*v)).collect(),
        })
    }

    /// Contribution of one bump: (Γ_b, ∂_μΓ_b, ∇_ξΓ_b).
    fn bump_contribution(&self, b: &Bump<T>, mu: f64, xi: &[f64], checked: bool) -> Result<(f64, f64, Vec<f64>)> {
        let n = xi.len();
        let c: Vec<f64> = b.center.iter().map(|v| v.f64()).collect();
        let d = dist2(xi, &c).sqrt();
        let axis: Vec<f64> = if d > 0.0 {
            c.iter().zip(xi).map(|(ci, x)| (ci - x) / d).collect()
        } else {
            let mut e = vec![0.0; n];
            e[0] = 1.0;
            e
        };
        let parts = if checked {
            let mut prev = self.bump_level(b, mu, d, 0);
            let mut out = None;
            let mut last = f64::INFINITY;
            for level in 1..=self.quad.max_level {
                let cur = self.bump_level(b, mu, d, level);
                let rel = rel_change(&prev, &cur);
                if rel <= self.quad.tol {
                    out = Some(cur);
                    break;
                }
                last = rel;
                prev = cur;
            }
            match out {
                Some(p) => p,
                None if last <= self.quad.accept => prev,
                None => return Err(Error::QuadratureNotConverged { rel_diff: last }),
            }
        } else {
            self.bump_level(b, mu, d, 0)
        };
        let grad = axis.iter().map(|e| e * parts.dax).collect();
        Ok((parts.val, parts.dmu, grad))
    }

    /// Quadrature of one bump at refinement `level`.
    fn bump_level(&self, b: &Bump<T>, mu: f64, d: f64, level: usize) -> Parts {
        let n = self.params.n();
        let r = b.radius.f64();
        let mut parts = Parts::default();
        if n == 1 {
            for cos_psi in [1.0, -1.0] {
                self.ray(b, mu, d, r, cos_psi, 1.0, level, &mut parts);
            }
        } else {
            let (x, w) = (&self.gl.0, &self.gl.1);
            let panels = self.quad.angular_panels << level;
            let surf = sphere_area(n - 1);
            if d < r {
                // every direction leaves ξ inside the ball
                let h = std::f64::consts::PI / panels as f64;
                for k in 0..panels {
                    let mid = h * (k as f64 + 0.5);
                    for (xi, wi) in x.iter().zip(w) {
                        let psi = mid + 0.5 * h * xi;
                        let wt = surf * 0.5 * h * wi * psi.sin().powi(n as i32 - 2);
                        self.ray(b, mu, d, r, psi.cos(), wt, level, &mut parts);
                    }
                }
            } else {
                // ψ = ψmax(1 − (1−v)²) regularizes the tangency at ψmax
                let psi_max = (r / d).min(1.0).asin();
                let h = 1.0 / panels as f64;
                for k in 0..panels {
                    let mid = h * (k as f64 + 0.5);
                    for (xi, wi) in x.iter().zip(w) {
                        let v = mid + 0.5 * h * xi;
                        let psi = psi_max * (1.0 - (1.0 - v) * (1.0 - v));
                        let jac = 2.0 * psi_max * (1.0 - v);
                        let wt = surf * 0.5 * h * wi * jac * psi.sin().powi(n as i32 - 2);
                        self.ray(b, mu, d, r, psi.cos(), wt, level, &mut parts);
                    }
                }
            }
        }
        parts
    }

    /// Radial integral along one direction making angle ψ with the axis toward the center.
    #[allow(clippy::too_many_arguments)]
    fn ray(&self, b: &Bump<T>, mu: f64, d: f64, r: f64, cos_psi: f64, weight: f64, level: usize, out: &mut Parts) {
        let sin2 = (1.0 - cos_psi * cos_psi).max(0.0);
        let disc = r * r - d * d * sin2;
        if disc <= 0.0 {
            return;
        }
        let sq = disc.sqrt();
        let lo = (d * cos_psi - sq).max(0.0);
        let hi = d * cos_psi + sq;
        if hi <= lo {
            return;
        }
        let n = self.params.n() as i32;
        let q = self.params.q().f64();
        let gam = self.params.gamma_s().f64();
        let a = self.params.profile_exp().f64();
        let amp = b.amplitude.f64();
        let k = b.smoothness as i32;
        let r2 = r * r;
        let t_lo = (lo / mu).asinh();
        let t_hi = (hi / mu).asinh();
        let width = self.quad.panel_width / (1u64 << level) as f64;
        let panels = (((t_hi - t_lo) / width).ceil() as usize).max(1 << level);
        let h = (t_hi - t_lo) / panels as f64;
        let pref = weight * self.alpha.f64().powf(q + 1.0) * mu.powf(n as f64 - gam);
        let mut acc = Parts::default();
        for p in 0..panels {
            let mid = t_lo + h * (p as f64 + 0.5);
            for (x, w) in self.gl.0.iter().zip(&self.gl.1) {
                let t = mid + 0.5 * h * x;
                let (sh, ch) = (t.sinh(), t.cosh());
                let rho = mu * sh;
                let dc2 = rho * rho - 2.0 * rho * d * cos_psi + d * d;
                if dc2 >= r2 {
                    continue;
                }
                let hv = amp * (1.0 - dc2 / r2).powi(k);
                // z^{q+1} dρ ρ^{n−1} = α^{q+1} μ^{n−γ} cosh^{1−2γ} t sinh^{n−1} t dt
                let base = 0.5 * h * w * hv * ch.powf(1.0 - 2.0 * gam) * sh.powi(n - 1);
                let inv_ch2 = 1.0 / (ch * ch);
                acc.add(
                    base,
                    1.0 / (q + 1.0),
                    a * (sh * sh - 1.0) * inv_ch2 / mu,
                    2.0 * a * sh * cos_psi * inv_ch2 / mu,
                );
            }
        }
        let acc = acc.scaled(pref);
        out.val += acc.val;
        out.dmu += acc.dmu;
        out.dax += acc.dax;
        out.abs_val += acc.abs_val;
        out.abs_dmu += acc.abs_dmu;
        out.abs_dax += acc.abs_dax;
    }

    /// max over ξ of Γ_b(μ, ξ) for a nonnegative radial bump is attained at its center,
    /// so Σ_{a_b>0} Γ_b(μ, c_b) bounds Γ(μ, ·) from above everywhere.
    pub fn upper_envelope(&self, mu: T, sign: T) -> Result<T> {
        let mut total = T::zero();
        for b in &self.weight.bumps {
            if b.amplitude * sign > T::zero() {
                let (v, _, _) = self.bump_contribution(b, mu.f64(), &b.center.iter().map(|v| v.f64()).collect::<Vec<_>>(), true)?;
                total = total + T::lit(v.abs());
            }
        }
        Ok(total)
    }

    /// Bound on |Γ_±(μ, ξ)| valid for every μ > 0 when dist(ξ, supp h_±) ≥ D_b > 0 per bump.
    fn lateral_bound(&self, radius: f64, sign: f64) -> f64 {
        let n = self.params.n();
        let q = self.params.q().f64();
        let gam = self.params.gamma_s().f64();
        let alpha = self.alpha.f64();
        let mut total = 0.0;
        for b in &self.weight.bumps {
            let a = b.amplitude.f64() * sign;
            if a <= 0.0 {
                continue;
            }
            let c: Vec<f64> = b.center.iter().map(|v| v.f64()).collect();
            let r = b.radius.f64();
            let dd = radius - norm(&c) - r;
            if dd <= 0.0 {
                return f64::INFINITY;
            }
            let k = b.smoothness as f64;
            let nf = n as f64;
            let mass = a * r.powf(nf) * std::f64::consts::PI.powf(nf / 2.0) * gamma_fn(k + 1.0) / gamma_fn(k + 1.0 + nf / 2.0);
            total += mass * alpha.powf(q + 1.0) * (2.0 * dd).powf(-gam) / (q + 1.0);
        }
        total
    }

    /// The constant A = h(ξ₀)/(q+1)·∫z₀^{q+1} of the small-μ law.
    pub fn limit_constant(&self, xi0: &[T]) -> Result<T> {
        let m = bubble_moment(&self.params, self.alpha)?;
        Ok(self.weight.eval(xi0) / (self.params.q() + T::one()) * m)
    }
}

impl<T: Real> ReducedFunctional<T> for Landscape<T> {
    fn dim(&self) -> usize {
        self.params.n()
    }
    fn sample(&self, mu: T, xi: &[T]) -> Result<GammaSample<T>> {
        self.gamma(mu, xi)
    }
    fn sample_fast(&self, mu: T, xi: &[T]) -> Result<GammaSample<T>> {
        self.gamma_fast(mu, xi)
    }
    fn seeds(&self) -> Vec<Vec<T>> {
        self.weight.bumps.iter().map(|b| b.center.clone()).collect()
    }
}

fn rel_change(a: &Parts, b: &Parts) -> f64 {
    let r = |x: f64, y: f64, s: f64| if s > 0.0 { (x - y).abs() / s } else { (x - y).abs() };
    r(a.val, b.val, b.abs_val).max(r(a.dmu, b.dmu, b.abs_dmu)).max(r(a.dax, b.dax, b.abs_dax))
}

/// Log–log fit of |Γ| against a scale parameter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit<T> {
    /// (scale, |Γ|)
    pub samples: Vec<(T, T)>,
    pub slope: T,
    pub intercept: T,
    pub r2: T,
}

/// Minimum r² before a slope is reported.
pub const MIN_R2: f64 = 0.999;

pub fn fit_loglog<T: Real>(samples: Vec<(T, T)>) -> Result<RateFit<T>> {
    let x: Vec<f64> = samples.iter().map(|(s, _)| s.f64().ln()).collect();
    let y: Vec<f64> = samples.iter().map(|(_, g)| g.f64().abs().ln()).collect();
    let (slope, intercept, r2) = linear_fit(&x, &y);
    if !(r2 >= MIN_R2) || !slope.is_finite() {
        return Err(Error::FitRejected { r2, required: MIN_R2 });
    }
    Ok(RateFit { samples, slope: T::lit(slope), intercept: T::lit(intercept), r2: T::lit(r2) })
}

/// Relative size of the leading correction to the small-μ power law is μ^κ with
/// κ = min(|(n−2s)(q+1) − n|, 2).
pub fn correction_exponent<T: Real>(params: &ProblemParams<T>) -> f64 {
    let d = (2.0 * params.gamma_s().f64() - params.nf().f64()).abs();
    d.min(2.0)
}

/// Dyadic exponents j (μ = 2^{−j}) where the correction is below ~2^{−12}:
/// `j0 = ⌈12/κ⌉ .. j0 + 8`.
pub fn asymptotic_window<T: Real>(params: &ProblemParams<T>) -> Vec<i32> {
    let k = correction_exponent(params);
    let j0 = (12.0 / k).ceil() as i32;
    (j0..=j0 + 8).collect()
}

/// Outcome of the small-μ analysis at ξ₀.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum LimitDiagnostic<T> {
    /// (n−2s)(q+1) > n: Γ/μ^{n−γ_s} → A.
    Finite {
        /// Richardson estimate at the finest μ.
        a_hat: T,
        /// h(ξ₀)/(q+1)·∫z₀^{q+1}.
        a_pred: T,
        /// Γ/μ^{n−γ_s} at the finest μ, unextrapolated.
        raw_ratio: T,
        richardson_exponent: T,
        /// Difference between the last two Richardson estimates.
        richardson_spread: T,
        /// (μ, Γ/μ^{n−γ_s})
        ratios: Vec<(T, T)>,
    },
    /// (n−2s)(q+1) ≤ n: Γ/μ^{n−γ_s} → +∞ (certified only as monotone growth over the sweep).
    Divergent { ratios: Vec<(T, T)>, monotone: bool, growth: T, consistent_with_infinity: bool },
}

/// Small-μ behaviour of Γ(μ, ξ₀)/μ^{n−γ_s} over μ = 2^{−j}, j ∈ `exponents` (increasing).
pub fn small_mu_limit<T: Real>(land: &Landscape<T>, xi0: &[T], exponents: &[i32]) -> Result<LimitDiagnostic<T>> {
    let params = land.params();
    let e = params.small_mu_exp();
    let h0 = land.weight().eval(xi0);
    let amp = land.weight().bumps.iter().fold(T::zero(), |m, b| m.max(b.amplitude.abs()));
    let samples: Vec<Result<GammaSample<T>>> =
        exponents.par_iter().map(|j| land.gamma(T::lit(2f64.powi(-*j)), xi0)).collect();
    let mut ratios = Vec::with_capacity(samples.len());
    for s in samples {
        let s = s?;
        ratios.push((s.mu, s.gamma / s.mu.powf(e)));
    }
    let sign_change = ratios.windows(2).any(|w| w[0].1 * w[1].1 < T::zero());
    if sign_change && h0.abs() <= T::lit(1e-12) * amp {
        return Err(Error::AmbiguousRegime(format!("Gamma changes sign along the sweep while h(xi0) = {h0}")));
    }
    if params.supercritical_q() && 2.0 * params.gamma_s().f64() > params.nf().f64() {
        let kappa = correction_exponent(params);
        let f = 2f64.powf(-kappa);
        let rich = |a: T, b: T| (b - T::lit(f) * a) / T::lit(1.0 - f);
        let m = ratios.len();
        if m < 3 {
            return Err(Error::FitRejected { r2: 0.0, required: MIN_R2 });
        }
        let a_hat = rich(ratios[m - 2].1, ratios[m - 1].1);
        let prev = rich(ratios[m - 3].1, ratios[m - 2].1);
        Ok(LimitDiagnostic::Finite {
            a_hat,
            a_pred: land.limit_constant(xi0)?,
            raw_ratio: ratios[m - 1].1,
            richardson_exponent: T::lit(kappa),
            richardson_spread: (a_hat - prev).abs(),
            ratios,
        })
    } else {
        let monotone = ratios.windows(2).all(|w| w[1].1 > w[0].1);
        let growth = ratios.last().unwrap().1 / ratios[0].1;
        Ok(LimitDiagnostic::Divergent { monotone, growth, consistent_with_infinity: monotone && growth >= T::lit(2.0), ratios })
    }
}

/// Γ(2^{−j}, ξ₀) for each j, as (μ, |Γ|).
pub fn mu_sweep<T: Real>(land: &Landscape<T>, xi0: &[T], exponents: &[i32]) -> Result<Vec<(T, T)>> {
    exponents
        .par_iter()
        .map(|j| {
            let mu = T::lit(2f64.powi(-*j));
            land.gamma(mu, xi0).map(|s| (mu, s.gamma.abs()))
        })
        .collect()
}

/// Γ(μ, ξ₀ + ρ e₁) for each ρ, as (ρ, |Γ|).
pub fn xi_sweep<T: Real>(land: &Landscape<T>, mu: T, xi0: &[T], radii: &[T]) -> Result<Vec<(T, T)>> {
    radii
        .par_iter()
        .map(|rho| {
            let mut xi = xi0.to_vec();
            xi[0] = xi[0] + *rho;
            land.gamma(mu, &xi).map(|s| (*rho, s.gamma.abs()))
        })
        .collect()
}

/// Rate fits for μ → 0 at ξ₀ and for |ξ| → ∞ at μ = 1.
pub fn tail_rates<T: Real>(land: &Landscape<T>, xi0: &[T], mu_exponents: &[i32], xi_radii: &[T]) -> Result<(RateFit<T>, RateFit<T>)> {
    let a = fit_loglog(mu_sweep(land, xi0, mu_exponents)?)?;
    let b = fit_loglog(xi_sweep(land, T::one(), xi0, xi_radii)?)?;
    Ok((a, b))
}

/// Expected μ → 0 slope: n − γ_s in the integrable regime, γ_s otherwise.
pub fn expected_mu_slope<T: Real>(params: &ProblemParams<T>) -> T {
    let g = params.gamma_s();
    (params.nf() - g).min(g)
}

/// Expected |ξ| → ∞ slope −(n−2s)(q+1).
pub fn expected_xi_slope<T: Real>(params: &ProblemParams<T>) -> T {
    -(T::lit(2.0) * params.gamma_s())
}

/// One side (max or min) of the slab certificate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlabSide<T> {
    pub mu0: T,
    pub xi0: Vec<T>,
    /// |A|, or +∞ in the sublinear regime.
    pub a_const: T,
    /// B = μ₀^{n−γ_s}/2 · min{|A|, 1}
    pub b: T,
    pub gamma_at_anchor: T,
    /// Largest |Γ| found by dense sampling of ∂S on this side.
    pub boundary_sampled: T,
    /// Rigorous bounds on the three faces (bottom, top, lateral).
    pub boundary_bounds: [T; 3],
}

/// S = [μ₁, μ₂] × {|ξ| ≤ R} with Γ < B/2 on ∂S and Γ(μ₀, ξ₀) ≥ B inside.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlabSpec<T> {
    pub mu1: T,
    pub mu2: T,
    pub radius: T,
    pub max_side: SlabSide<T>,
    /// Present when h changes sign.
    pub min_side: Option<SlabSide<T>>,
}

impl<T: Real> SlabSpec<T> {
    pub fn b(&self) -> T {
        self.max_side.b
    }

    pub fn contains(&self, mu: T, xi: &[T]) -> bool {
        mu > self.mu1 && mu < self.mu2 && norm(xi) < self.radius
    }

    /// A slab without certificate (for synthetic functionals).
    pub fn manual(mu1: T, mu2: T, radius: T, n: usize) -> Self {
        let side = SlabSide {
            mu0: (mu1 * mu2).sqrt(),
            xi0: vec![T::zero(); n],
            a_const: T::nan(),
            b: T::nan(),
            gamma_at_anchor: T::nan(),
            boundary_sampled: T::nan(),
            boundary_bounds: [T::nan(); 3],
        };
        Self { mu1, mu2, radius, max_side: side, min_side: None }
    }
}

fn anchor_side<T: Real>(land: &Landscape<T>, xi0: Vec<T>, sign: T) -> Result<(T, T, T, T)> {
    let params = land.params();
    let e = params.small_mu_exp();
    let a_const = if params.supercritical_q() && T::lit(2.0) * params.gamma_s() > params.nf() {
        land.limit_constant(&xi0)?.abs()
    } else {
        T::infinity()
    };
    let cap = a_const.min(T::one());
    for j in -4..=80 {
        let mu = T::lit(2f64.powi(-j));
        let g = land.gamma(mu, &xi0)?.gamma * sign;
        let b = mu.powf(e) / T::lit(2.0) * cap;
        if g >= b {
            return Ok((mu, a_const, b, g));
        }
    }
    Err(Error::SlabNotCertified("no mu0 with Gamma(mu0, xi0) >= B along the sweep".into()))
}

/// Builds and certifies the slab.
pub fn build_slab<T: Real>(land: &Landscape<T>) -> Result<SlabSpec<T>> {
    let h = land.weight();
    h.validate_hypotheses()?;
    let n = land.params().n();
    let mut sides = Vec::new();
    let xi_max = h.most_positive_center().ok_or(Error::NoPositivePart)?;
    sides.push((T::one(), xi_max));
    if let Some(c) = h.most_negative_center() {
        sides.push((-T::one(), c));
    }
    let mut anchors = Vec::new();
    for (sign, xi0) in &sides {
        anchors.push(anchor_side(land, xi0.clone(), *sign)?);
    }
    // μ₁: the envelope of each side must drop below its B/2
    let mut mu1 = anchors.iter().map(|a| a.0).fold(T::infinity(), T::min) / T::lit(2.0);
    let mut ok = false;
    for _ in 0..400 {
        let mut good = true;
        for ((sign, _), a) in sides.iter().zip(&anchors) {
            if land.upper_envelope(mu1, *sign)? >= a.2 / T::lit(2.0) {
                good = false;
            }
        }
        if good {
            ok = true;
            break;
        }
        mu1 = mu1 / T::lit(2.0);
    }
    if !ok {
        return Err(Error::SlabNotCertified("mu1 could not be lowered below B/2".into()));
    }
    // μ₂ = R: top face and lateral face bounds
    let rmax = h.support_radius().f64();
    let mut radius = (2.0 * rmax).max(2.0 * anchors.iter().map(|a| a.0.f64()).fold(0.0, f64::max)).max(1.0);
    let mut ok = false;
    for _ in 0..200 {
        let mut good = true;
        for ((sign, _), a) in sides.iter().zip(&anchors) {
            let top = land.upper_envelope(T::lit(radius), *sign)?;
            let lat = land.lateral_bound(radius, sign.f64());
            if !(top < a.2 / T::lit(2.0)) || !(lat < a.2.f64() / 2.0) {
                good = false;
            }
        }
        if good {
            ok = true;
            break;
        }
        radius *= 2.0;
    }
    if !ok {
        return Err(Error::SlabNotCertified("R could not be grown until the outer faces drop below B/2".into()));
    }
    let radius_t = T::lit(radius);
    let mut built = Vec::new();
    for ((sign, xi0), a) in sides.iter().zip(&anchors) {
        let bounds = [
            land.upper_envelope(mu1, *sign)?,
            land.upper_envelope(radius_t, *sign)?,
            T::lit(land.lateral_bound(radius, sign.f64())),
        ];
        let sampled = sample_boundary(land, mu1, radius_t, *sign)?;
        if !(sampled < a.2 / T::lit(2.0)) {
            return Err(Error::SlabNotCertified(format!("sampled boundary value {sampled} >= B/2 = {}", a.2 / T::lit(2.0))));
        }
        if !(a.0 > mu1 && a.0 < radius_t && norm(xi0) < radius_t) {
            return Err(Error::SlabNotCertified("anchor not interior".into()));
        }
        built.push(SlabSide {
            mu0: a.0,
            xi0: xi0.clone(),
            a_const: a.1,
            b: a.2,
            gamma_at_anchor: a.3 * *sign,
            boundary_sampled: sampled,
            boundary_bounds: bounds,
        });
    }
    let mut it = built.into_iter();
    let max_side = it.next().expect("max side");
    let _ = n;
    Ok(SlabSpec { mu1, mu2: radius_t, radius: radius_t, max_side, min_side: it.next() })
}

/// Largest sign·Γ over a dense sample of ∂S.
fn sample_boundary<T: Real>(land: &Landscape<T>, mu1: T, radius: T, sign: T) -> Result<T> {
    let n = land.params().n();
    let mut pts: Vec<(T, Vec<T>)> = Vec::new();
    let (lo, hi) = land.weight().support_box()?;
    // bottom/top faces: ξ over the support neighbourhood (Γ is negligible elsewhere)
    let per_axis = if n == 1 { 2001 } else if n == 2 { 61 } else { 17 };
    for &mu in &[mu1, radius] {
        let pad = T::lit(4.0) * mu.min(radius);
        let axes: Vec<Vec<T>> = (0..n)
            .map(|i| {
                let a = (lo[i] - pad).max(-radius);
                let b = (hi[i] + pad).min(radius);
                (0..per_axis).map(|k| a + (b - a) * T::from_usize_(k) / T::from_usize_(per_axis - 1)).collect()
            })
            .collect();
        for_each_tuple(&axes, &mut |xi| {
            if norm(xi) <= radius {
                pts.push((mu, xi.to_vec()));
            }
        });
    }
    // lateral face |ξ| = R
    let dirs: Vec<Vec<T>> = match n {
        1 => vec![vec![T::one()], vec![-T::one()]],
        2 => (0..32).map(|k| {
            let a = 2.0 * std::f64::consts::PI * k as f64 / 32.0;
            vec![T::lit(a.cos()), T::lit(a.sin())]
        }).collect(),
        _ => {
            let mut v = Vec::new();
            for i in 0..3 {
                for s in [1.0, -1.0] {
                    let mut e = vec![T::zero(); 3];
                    e[i] = T::lit(s);
                    v.push(e);
                }
            }
            v
        }
    };
    let steps = 24;
    for k in 0..=steps {
        let mu = (mu1.ln() + (radius.ln() - mu1.ln()) * T::from_usize_(k) / T::from_usize_(steps)).exp();
        for d in &dirs {
            pts.push((mu, d.iter().map(|v| *v * radius).collect()));
        }
    }
    let vals: Vec<Result<T>> = pts.par_iter().map(|(mu, xi)| land.gamma_fast(*mu, xi).map(|s| s.gamma * sign)).collect();
    let mut best = T::neg_infinity();
    for v in vals {
        best = best.max(v?);
    }
    Ok(best)
}

fn for_each_tuple<T: Real>(axes: &[Vec<T>], f: &mut dyn FnMut(&[T])) {
    let mut idx = vec![0usize; axes.len()];
    let mut cur: Vec<T> = axes.iter().map(|a| a[0]).collect();
    loop {
        f(&cur);
        let mut d = 0;
        loop {
            if d == axes.len() {
                return;
            }
            idx[d] += 1;
            if idx[d] < axes[d].len() {
                cur[d] = axes[d][idx[d]];
                break;
            }
            idx[d] = 0;
            cur[d] = axes[d][0];
            d += 1;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalKind {
    Max,
    Min,
}

impl std::fmt::Display for CriticalKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CriticalKind::Max => "max",
            CriticalKind::Min => "min",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalPoint<T> {
    pub mu: T,
    pub xi: Vec<T>,
    pub kind: CriticalKind,
    pub gamma: T,
    pub grad_norm: T,
    pub iterations: usize,
}

/// Controls for the critical-point search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub grad_tol: f64,
    pub max_iter: usize,
    /// μ-levels of the coarse scan.
    pub mu_levels: usize,
    /// ξ points per axis of the coarse scan.
    pub xi_points: usize,
    /// Also look for minima (set automatically for sign-changing weights).
    pub want_min: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { grad_tol: 1e-10, max_iter: 500, mu_levels: 24, xi_points: 41, want_min: false }
    }
}

/// Coarse scan over the slab followed by preconditioned gradient ascent (descent for
/// minima) with backtracking.
pub fn find_critical_points<T: Real, F: ReducedFunctional<T>>(f: &F, slab: &SlabSpec<T>, opts: &SearchOptions) -> Result<Vec<CriticalPoint<T>>> {
    let n = f.dim();
    let want_min = opts.want_min || slab.min_side.is_some();
    // scan
    let (mu1, mu2, radius) = (slab.mu1.f64(), slab.mu2.f64(), slab.radius.f64());
    let mus: Vec<f64> = (0..opts.mu_levels)
        .map(|k| (mu1.ln() + (mu2.ln() - mu1.ln()) * (k as f64 + 0.5) / opts.mu_levels as f64).exp())
        .collect();
    let mut xis: Vec<Vec<T>> = Vec::new();
    // a tensor scan in n ≥ 2 is quadratic in the axis count; halve it there
    let per = if n == 1 { opts.xi_points } else { opts.xi_points / 2 }.max(3);
    let axis: Vec<T> = (0..per).map(|k| T::lit(-radius + 2.0 * radius * (k as f64 + 0.5) / per as f64)).collect();
    for_each_tuple(&vec![axis; n], &mut |x| {
        if norm(x) < slab.radius {
            xis.push(x.to_vec());
        }
    });
    let seeds = f.seeds();
    xis.extend(seeds.iter().filter(|s| norm(s) < slab.radius).cloned());
    let mut pts = Vec::new();
    for mu in &mus {
        for xi in &xis {
            pts.push((T::lit(*mu), xi.clone()));
        }
    }
    let vals: Vec<Result<GammaSample<T>>> = pts.par_iter().map(|(mu, xi)| f.sample_fast(*mu, xi)).collect();
    let vals: Vec<GammaSample<T>> = vals.into_iter().collect::<Result<_>>()?;
    let mut kinds = vec![CriticalKind::Max];
    if want_min {
        kinds.push(CriticalKind::Min);
    }
    let mut found: Vec<CriticalPoint<T>> = Vec::new();
    for kind in kinds {
        let sign = if kind == CriticalKind::Max { 1.0 } else { -1.0 };
        // starts: global best, and the best μ above each seed
        let mut starts: Vec<&GammaSample<T>> = Vec::new();
        if let Some(best) = best_of(vals.iter(), sign) {
            starts.push(best);
        }
        for s in &seeds {
            if let Some(b) = best_of(vals.iter().filter(|v| v.xi == *s), sign) {
                if b.gamma.f64() * sign > 0.0 {
                    starts.push(b);
                }
            }
        }
        let refined: Vec<Option<CriticalPoint<T>>> = starts
            .par_iter()
            .map(|s| ascend(f, slab, s, sign, kind, opts).ok().flatten())
            .collect();
        let mut got = Vec::new();
        for cp in refined.into_iter().flatten() {
            let dup = found.iter().chain(got.iter()).any(|o: &CriticalPoint<T>| {
                o.kind == cp.kind && (o.mu - cp.mu).abs().f64() <= 1e-6 * cp.mu.f64() && dist2(&o.xi, &cp.xi).f64().sqrt() <= 1e-6 * cp.mu.f64().max(1e-3)
            });
            if !dup {
                got.push(cp);
            }
        }
        if got.is_empty() {
            return Err(Error::NoInteriorCriticalPoint { kind: kind.to_string() });
        }
        got.sort_by(|a, b| {
            let ga = a.gamma.f64() * sign;
            let gb = b.gamma.f64() * sign;
            let tie = (ga - gb).abs() <= 1e-12 * ga.abs().max(gb.abs());
            if !tie {
                gb.partial_cmp(&ga).unwrap()
            } else {
                a.mu.partial_cmp(&b.mu).unwrap().then_with(|| {
                    a.xi.iter().zip(&b.xi).map(|(x, y)| x.partial_cmp(y).unwrap()).find(|o| *o != std::cmp::Ordering::Equal).unwrap_or(std::cmp::Ordering::Equal)
                })
            }
        });
        found.extend(got);
    }
    Ok(found)
}

fn best_of<'a, T: Real>(it: impl Iterator<Item = &'a GammaSample<T>>, sign: f64) -> Option<&'a GammaSample<T>> {
    let mut best: Option<&GammaSample<T>> = None;
    for v in it {
        if best.is_none_or(|b| v.gamma.f64() * sign > b.gamma.f64() * sign) {
            best = Some(v);
        }
    }
    best
}

/// Gradient ascent on sign·Γ in the metric μ⁻²(dμ² + dξ²). Returns `None` when the
/// iterate settles on the slab boundary.
fn ascend<T: Real, F: ReducedFunctional<T>>(
    f: &F,
    slab: &SlabSpec<T>,
    start: &GammaSample<T>,
    sign: f64,
    kind: CriticalKind,
    opts: &SearchOptions,
) -> Result<Option<CriticalPoint<T>>> {
    let n = f.dim();
    let to_vec = |s: &GammaSample<T>| -> Vec<f64> { std::iter::once(s.mu.f64()).chain(s.xi.iter().map(|v| v.f64())).collect() };
    let mut cur = f.sample(start.mu, &start.xi)?;
    let mut x = to_vec(&cur);
    let mut step = 0.1;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    for it in 0..opts.max_iter {
        let g: Vec<f64> = cur.grad.iter().map(|v| v.f64() * sign).collect();
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm <= opts.grad_tol {
            if !slab.contains(cur.mu, &cur.xi) {
                return Ok(None);
            }
            return Ok(Some(CriticalPoint { mu: cur.mu, xi: cur.xi.clone(), kind, gamma: cur.gamma, grad_norm: T::lit(gnorm), iterations: it }));
        }
        let mu = x[0];
        let scale = cur.gamma.f64().abs().max(1e-300);
        let d: Vec<f64> = g.iter().map(|v| v * mu * mu / scale).collect();
        // Barzilai–Borwein guess from the last step
        if let Some((px, pg)) = &prev {
            let sx: Vec<f64> = x.iter().zip(px).map(|(a, b)| a - b).collect();
            let sg: Vec<f64> = g.iter().zip(pg).map(|(a, b)| -(a - b) * mu * mu / scale).collect();
            let num: f64 = sx.iter().map(|v| v * v / (mu * mu)).sum();
            let den: f64 = sx.iter().zip(&sg).map(|(a, b)| a * b / (mu * mu)).sum();
            if den > 0.0 && num > 0.0 {
                step = (num / den).clamp(1e-6, 10.0);
            }
        }
        let f0 = cur.gamma.f64() * sign;
        let slope: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        let mut t = step;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            let mu_t = T::lit(trial[0]);
            let xi_t: Vec<T> = trial[1..].iter().map(|v| T::lit(*v)).collect();
            // keep inside the closed slab, and never halve μ in one step
            if trial[0] <= 0.5 * mu || trial[0] < slab.mu1.f64() || trial[0] > slab.mu2.f64() || norm(&xi_t) > slab.radius {
                t *= 0.5;
                continue;
            }
            let s = f.sample(mu_t, &xi_t)?;
            let f1 = s.gamma.f64() * sign;
            let gain = f1 - f0;
            let roundoff = 64.0 * f64::EPSILON * f0.abs().max(f1.abs());
            let armijo = gain >= 1e-4 * t * slope;
            let flat = gain.abs() <= roundoff && s.grad_norm().f64() < gnorm;
            if armijo || flat {
                accepted = Some((trial, s));
                break;
            }
            t *= 0.5;
        }
        let Some((nx, ns)) = accepted else {
            // no admissible step: stuck on the boundary or at roundoff
            if slab.contains(cur.mu, &cur.xi) && gnorm <= 1e3 * opts.grad_tol {
                return Ok(Some(CriticalPoint { mu: cur.mu, xi: cur.xi.clone(), kind, gamma: cur.gamma, grad_norm: T::lit(gnorm), iterations: it }));
            }
            return Ok(None);
        };
        prev = Some((x.clone(), g));
        x = nx;
        cur = ns;
        let _ = n;
    }
    Ok(None)
}

/// Closure-backed functional, e.g. for injecting a synthetic Γ̃ in tests.
pub struct FnFunctional<F> {
    pub dim: usize,
    pub f: F,
}

impl<T: Real, F> ReducedFunctional<T> for FnFunctional<F>
where
    F: Fn(T, &[T]) -> (T, Vec<T>) + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn sample(&self, mu: T, xi: &[T]) -> Result<GammaSample<T>> {
        let (gamma, grad) = (self.f)(mu, xi);
        Ok(GammaSample { mu, xi: xi.to_vec(), gamma, grad })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn land(q: f64) -> Landscape<f64> {
        let p = ProblemParams::validate(1, 0.2, q, 0.0).unwrap();
        let h = CompactWeight::single(vec![0.0], 1.0, 1.0, 2).unwrap();
        Landscape::new(&p, &h).unwrap()
    }

    #[test]
    fn centered_gradient_vanishes() {
        let l = land(1.5);
        let s = l.gamma(0.3, &[0.0]).unwrap();
        assert!(s.gamma > 0.0);
        assert!(s.grad[1].abs() < 1e-14);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let l = land(1.5);
        for &(mu, xi) in &[(0.3, 0.2), (0.05, 0.9), (2.0, -1.5), (0.7, 3.0)] {
            let s = l.gamma(mu, &[xi]).unwrap();
            let hstep = 1e-5;
            let dmu = (l.gamma(mu + hstep, &[xi]).unwrap().gamma - l.gamma(mu - hstep, &[xi]).unwrap().gamma) / (2.0 * hstep);
            let dxi = (l.gamma(mu, &[xi + hstep]).unwrap().gamma - l.gamma(mu, &[xi - hstep]).unwrap().gamma) / (2.0 * hstep);
            assert!((dmu - s.grad[0]).abs() < 1e-6, "{dmu} {}", s.grad[0]);
            assert!((dxi - s.grad[1]).abs() < 1e-6, "{dxi} {}", s.grad[1]);
        }
    }

    #[test]
    fn synthetic_quadratic_is_recovered() {
        let f = FnFunctional {
            dim: 1,
            f: |mu: f64, xi: &[f64]| (-(mu - 1.0).powi(2) - xi[0] * xi[0], vec![-2.0 * (mu - 1.0), -2.0 * xi[0]]),
        };
        let slab = SlabSpec::manual(0.1, 3.0, 2.0, 1);
        let cps = find_critical_points(&f, &slab, &SearchOptions::default()).unwrap();
        assert_eq!(cps[0].kind, CriticalKind::Max);
        assert!((cps[0].mu - 1.0).abs() < 1e-8 && cps[0].xi[0].abs() < 1e-8, "{:?}", cps[0]);
    }
}
