//! Stampacchia–De Giorgi level-truncation iteration on discrete data.
//!
//! For growth terms `|g(x,u)| ≤ Σ h_i |u|^{γ_i}` the parameters below make the
//! truncation energies `U_k = ‖(φ − A_k)₊‖_{2*}^{2*}` obey `U_{k+1} ≤ C^k U_k^ϑ` with ϑ > 1.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::model::{CompactWeight, ProblemParams};
use crate::num::Real;

/// Coefficient of a growth term.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Coefficient<T> {
    Weight(CompactWeight<T>),
    Constant(T),
}

/// Raw data of one growth term; `m = None` means m = ∞.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RawTerm<T> {
    pub gamma: T,
    pub m: Option<T>,
    pub coefficient: Coefficient<T>,
    /// Override for a_i (must lie in its admissible interval).
    pub a: Option<T>,
}

impl<T: Real> RawTerm<T> {
    pub fn new(gamma: T, m: Option<T>) -> Self {
        Self { gamma, m, coefficient: Coefficient::Constant(T::one()), a: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthTerm<T> {
    pub gamma: T,
    pub m: Option<T>,
    pub coefficient: Coefficient<T>,
    pub m_under: T,
    pub theta_cap: T,
    pub a: T,
    /// Admissible interval (lo, hi] for a.
    pub a_range: (T, T),
    pub xi_h: T,
    pub tau: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthSpec<T> {
    pub crit_exp: T,
    pub terms: Vec<GrowthTerm<T>>,
    pub tau: T,
    pub theta: T,
}

/// A named inequality and its two sides (`lhs < rhs` or `lhs <= rhs`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Inequality {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub strict: bool,
    pub holds: bool,
}

impl Inequality {
    fn new(name: impl Into<String>, lhs: f64, rhs: f64, strict: bool) -> Self {
        let holds = if strict { lhs < rhs } else { lhs <= rhs };
        Self { name: name.into(), lhs, rhs, strict, holds }
    }
}

fn inv_m<T: Real>(m: Option<T>) -> T {
    m.map_or(T::zero(), |m| T::one() / m)
}

/// Derives m̲_i, Θ_i, a_i, ξ_i, τ_i and ϑ, rejecting inadmissible data.
pub fn derive_growth<T: Real>(params: &ProblemParams<T>, raw: &[RawTerm<T>]) -> Result<GrowthSpec<T>> {
    let cs = params.crit_exp();
    let one = T::one();
    let two = T::lit(2.0);
    if raw.is_empty() {
        return Err(Error::HypothesisViolated("at least one growth term is required".into()));
    }
    let mut terms = Vec::with_capacity(raw.len());
    for (i, t) in raw.iter().enumerate() {
        let g = t.gamma;
        if !(g >= T::zero() && g < cs - one) {
            return Err(Error::HypothesisViolated(format!("term {i}: gamma = {g} must lie in [0, 2*_s - 1) = [0, {})", cs - one)));
        }
        let m_under = if g <= one { cs / (cs - two) } else { cs / (cs - one - g) };
        if let Some(m) = t.m {
            if !(m > m_under) {
                return Err(Error::HypothesisViolated(format!("term {i}: m = {m} must exceed m_under = {m_under}")));
            }
        }
        let theta_cap = inv_m(t.m) + (two - cs + g) / cs;
        let cap = g.min(one) / cs;
        if !(theta_cap < cap) {
            return Err(Error::HypothesisViolated(format!("term {i}: Theta = {theta_cap} must be < (gamma/2*_s)min(1,1/gamma) = {cap}")));
        }
        let hi = if g > one { one / g } else { one };
        let lo = if g > T::zero() { (cs / g * theta_cap).max(T::zero()) } else { T::zero() };
        let a = t.a.unwrap_or(hi);
        if !(a > lo && a <= hi) {
            return Err(Error::HypothesisViolated(format!("term {i}: a = {a} must lie in ({lo}, {hi}]")));
        }
        let xi_h = one - (one + g) / cs - inv_m(t.m);
        if !(xi_h > T::zero() && xi_h < one) {
            return Err(Error::HypothesisViolated(format!("term {i}: xi = {xi_h} must lie in (0, 1)")));
        }
        let tau = (one + a * g) / cs + xi_h;
        if !(tau > two / cs) {
            return Err(Error::HypothesisViolated(format!("term {i}: tau = {tau} must exceed 2/2*_s = {}", two / cs)));
        }
        terms.push(GrowthTerm {
            gamma: g,
            m: t.m,
            coefficient: t.coefficient.clone(),
            m_under,
            theta_cap,
            a,
            a_range: (lo, hi),
            xi_h,
            tau,
        });
    }
    let tau = terms.iter().fold(T::infinity(), |m, t| m.min(t.tau));
    let theta = cs * tau / two;
    if !(theta > one) {
        return Err(Error::HypothesisViolated(format!("theta = {theta} must exceed 1")));
    }
    Ok(GrowthSpec { crit_exp: cs, terms, tau, theta })
}

impl<T: Real> GrowthSpec<T> {
    /// Every inequality the derivation relies on, re-evaluated.
    pub fn inequalities(&self) -> Vec<Inequality> {
        let cs = self.crit_exp.f64();
        let mut out = Vec::new();
        for (i, t) in self.terms.iter().enumerate() {
            let g = t.gamma.f64();
            let m = t.m.map_or(f64::INFINITY, |m| m.f64());
            out.push(Inequality::new(format!("term{i}: gamma < 2*_s - 1"), g, cs - 1.0, true));
            out.push(Inequality::new(format!("term{i}: m_under < m"), t.m_under.f64(), m, true));
            out.push(Inequality::new(format!("term{i}: Theta < (gamma/2*_s)min(1,1/gamma)"), t.theta_cap.f64(), g.min(1.0) / cs, true));
            out.push(Inequality::new(format!("term{i}: a_lo < a"), t.a_range.0.f64(), t.a.f64(), true));
            out.push(Inequality::new(format!("term{i}: a <= min(1,1/gamma)"), t.a.f64(), t.a_range.1.f64(), false));
            out.push(Inequality::new(format!("term{i}: 0 < xi"), 0.0, t.xi_h.f64(), true));
            out.push(Inequality::new(format!("term{i}: xi < 1"), t.xi_h.f64(), 1.0, true));
            out.push(Inequality::new(format!("term{i}: 2/2*_s < tau"), 2.0 / cs, t.tau.f64(), true));
        }
        out.push(Inequality::new("1 < theta", 1.0, self.theta.f64(), true));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Level<T> {
    pub k: usize,
    pub a_k: T,
    pub u_k: T,
    /// |{w_k > 0}|
    pub measure: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationTrace<T> {
    pub delta: T,
    pub theta: T,
    pub levels: Vec<Level<T>>,
    /// U_40 ≤ 1e−12.
    pub converged: bool,
    /// Least C with U_{k+1} ≤ C^k U_k^ϑ for k ≥ 1 along the trace.
    pub fitted_c: Option<T>,
    pub u0_bound: bool,
    pub monotone: bool,
    pub pointwise_monotone: bool,
    pub subset_chain: bool,
    pub phi_bound: bool,
}

pub const LEVELS: usize = 40;

/// Truncation energies of φ = δu/‖u‖_{2*} at the levels A_k = 1 − 2^{−k}, k = 0..40.
pub fn run_iteration<T: Real>(u: &Field<T>, spec: &GrowthSpec<T>, delta: T) -> Result<IterationTrace<T>> {
    let cs = spec.crit_exp;
    let nrm = u.lp_norm(cs);
    if !(nrm > T::zero()) || !nrm.is_finite() {
        return Err(Error::HypothesisViolated("u must have positive finite L^{2*_s} norm".into()));
    }
    let phi: Vec<T> = u.values().iter().map(|v| delta * *v / nrm).collect();
    let vol = u.grid().volume_weights();
    let mut levels = Vec::with_capacity(LEVELS + 1);
    let (mut pointwise, mut chain, mut bound) = (true, true, true);
    let a_of = |k: usize| T::one() - T::lit(2f64.powi(-(k as i32)));
    for k in 0..=LEVELS {
        let ak = a_of(k);
        let ak1 = a_of(k + 1);
        let gap = T::lit(2f64.powi(-(k as i32 + 1)));
        let (mut uk, mut meas) = (T::zero(), T::zero());
        for (f, w) in phi.iter().zip(vol) {
            let wk = (*f - ak).max(T::zero());
            if wk > T::zero() {
                uk = uk + wk.powf(cs) * *w;
                meas = meas + *w;
            }
            let wk1 = (*f - ak1).max(T::zero());
            if wk1 > wk {
                pointwise = false;
            }
            if wk1 > T::zero() {
                if !(wk > gap) {
                    chain = false;
                }
                if !(*f > T::zero() && *f < T::lit(2f64.powi(k as i32 + 1)) * wk) {
                    bound = false;
                }
            }
        }
        levels.push(Level { k, a_k: ak, u_k: uk, measure: meas });
    }
    let u0 = levels[0].u_k;
    let u0_bound = u0 <= delta.powf(cs) * (T::one() + T::lit(1e-12));
    let monotone = levels.windows(2).all(|w| w[1].u_k <= w[0].u_k);
    let converged = levels[LEVELS].u_k <= T::lit(1e-12);
    let theta = spec.theta;
    let mut fitted: Option<T> = None;
    for k in 1..LEVELS {
        let (a, b) = (levels[k].u_k, levels[k + 1].u_k);
        if a > T::zero() && b > T::zero() {
            let c = (b.ln() - theta * a.ln()) / T::from_usize_(k);
            fitted = Some(fitted.map_or(c, |f: T| f.max(c)));
        }
    }
    Ok(IterationTrace {
        delta,
        theta,
        levels,
        converged,
        fitted_c: fitted.map(|c| c.exp()),
        u0_bound,
        monotone,
        pointwise_monotone: pointwise,
        subset_chain: chain,
        phi_bound: bound,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport<T> {
    pub theta: T,
    pub fitted_c: T,
    /// (k, log U_{k+1} − ϑ log U_k − k log C)
    pub residuals: Vec<(usize, T)>,
    pub max_residual: T,
    pub max_abs_residual: T,
    /// min_k (log U_{k+1} − k log C)/log U_k
    pub theta_hat: T,
    pub nonzero_levels: usize,
    pub pass: bool,
}

pub const MIN_LEVELS: usize = 5;
pub const AUDIT_TOL: f64 = 0.1;

/// Fits log U_{k+1} − ϑ log U_k = k log C through the origin. The recursion is an
/// upper bound, so only positive residuals (violations) count against it.
pub fn audit_sequence<T: Real>(u: &[T], theta: T) -> Result<AuditReport<T>> {
    let nonzero = u.iter().filter(|v| **v > T::zero()).count();
    let pairs: Vec<(usize, T, T)> = u
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] > T::zero() && w[1] > T::zero())
        .map(|(k, w)| (k, w[0].ln(), w[1].ln()))
        .collect();
    if nonzero < MIN_LEVELS || pairs.is_empty() {
        return Err(Error::InsufficientLevels { found: nonzero, needed: MIN_LEVELS });
    }
    let (mut num, mut den) = (T::zero(), T::zero());
    for (k, a, b) in &pairs {
        let kf = T::from_usize_(*k);
        num = num + kf * (*b - theta * *a);
        den = den + kf * kf;
    }
    let log_c = if den > T::zero() { num / den } else { T::zero() };
    let residuals: Vec<(usize, T)> = pairs.iter().map(|(k, a, b)| (*k, *b - theta * *a - T::from_usize_(*k) * log_c)).collect();
    let max_residual = residuals.iter().fold(T::neg_infinity(), |m, (_, r)| m.max(*r));
    let max_abs = residuals.iter().fold(T::zero(), |m, (_, r)| m.max(r.abs()));
    let theta_hat = pairs
        .iter()
        .filter(|(_, a, _)| *a != T::zero())
        .fold(T::infinity(), |m, (k, a, b)| m.min((*b - T::from_usize_(*k) * log_c) / *a));
    Ok(AuditReport {
        theta,
        fitted_c: log_c.exp(),
        residuals,
        max_residual,
        max_abs_residual: max_abs,
        theta_hat,
        nonzero_levels: nonzero,
        pass: max_residual <= T::lit(AUDIT_TOL),
    })
}

pub fn recursion_audit<T: Real>(trace: &IterationTrace<T>, spec: &GrowthSpec<T>) -> Result<AuditReport<T>> {
    let u: Vec<T> = trace.levels.iter().map(|l| l.u_k).collect();
    audit_sequence(&u, spec.theta)
}
