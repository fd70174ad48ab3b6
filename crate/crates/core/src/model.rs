//! Problem parameters, derived exponents and the compactly supported weight `h`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{lit, Real};

/// Validated exponents of `(-Δ)^s u = ε h u₊^q + u₊^p` on ℝⁿ.
///
/// Every derived exponent is computed once here; other modules read it
/// instead of recomputing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemParams<T> {
    n: usize,
    s: T,
    q: T,
    eps: T,
    p: T,
    crit_exp: T,
    dual_exp: T,
    gamma_s: T,
    supercritical_q: bool,
}

impl<T: Real> ProblemParams<T> {
    pub fn validate(n: usize, s: T, q: T, eps: T) -> Result<Self> {
        if !(1..=3).contains(&n) {
            return Err(Error::UnsupportedDimension { n, allowed: "1..=3" });
        }
        if !(s > T::zero() && s < T::one()) {
            return Err(Error::ExponentRange { what: format!("s = {s} not in (0,1)") });
        }
        let nf = T::from_usize_(n);
        let two = lit::<T>(2.0);
        if nf <= lit::<T>(4.0) * s {
            return Err(Error::DimensionOrderViolation { n, s: s.f64() });
        }
        let p = (nf + two * s) / (nf - two * s);
        if !(q > T::zero() && q < p) {
            return Err(Error::ExponentRange { what: format!("q = {q} not in (0, p = {p})") });
        }
        if !(eps >= T::zero()) || !eps.is_finite() {
            return Err(Error::ExponentRange { what: format!("eps = {eps} must be finite and >= 0") });
        }
        let crit_exp = two * nf / (nf - two * s);
        let dual_exp = two * nf / (nf + two * s);
        let gamma_s = (nf - two * s) * (q + T::one()) / two;
        let supercritical_q = q > two * s / (nf - two * s);
        Ok(Self { n, s, q, eps, p, crit_exp, dual_exp, gamma_s, supercritical_q })
    }

    /// Same exponents, different ε.
    pub fn with_eps(&self, eps: T) -> Result<Self> {
        Self::validate(self.n, self.s, self.q, eps)
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn nf(&self) -> T {
        T::from_usize_(self.n)
    }
    pub fn s(&self) -> T {
        self.s
    }
    pub fn q(&self) -> T {
        self.q
    }
    pub fn eps(&self) -> T {
        self.eps
    }
    /// Critical exponent p = (n+2s)/(n−2s).
    pub fn p(&self) -> T {
        self.p
    }
    /// Sobolev exponent 2*_s = 2n/(n−2s).
    pub fn crit_exp(&self) -> T {
        self.crit_exp
    }
    /// Dual exponent β = 2n/(n+2s).
    pub fn dual_exp(&self) -> T {
        self.dual_exp
    }
    /// γ_s = (n−2s)(q+1)/2.
    pub fn gamma_s(&self) -> T {
        self.gamma_s
    }
    /// q > 2s/(n−2s).
    pub fn supercritical_q(&self) -> bool {
        self.supercritical_q
    }
    /// 2s/(n−2s), the threshold separating the two regimes.
    pub fn sublinear_threshold(&self) -> T {
        let two = lit::<T>(2.0);
        two * self.s / (self.nf() - two * self.s)
    }
    /// Decay exponent (n−2s)/2 of the bubble profile.
    pub fn profile_exp(&self) -> T {
        (self.nf() - lit::<T>(2.0) * self.s) / lit::<T>(2.0)
    }
    /// Exponent n − γ_s of the small-μ law in the integrable regime.
    pub fn small_mu_exp(&self) -> T {
        self.nf() - self.gamma_s
    }

    /// Checks the weight against the standing hypotheses for these exponents.
    pub fn check_weight(&self, h: &CompactWeight<T>) -> Result<()> {
        h.validate_hypotheses()?;
        if h.dim() != self.n {
            return Err(Error::InvalidWeight(format!(
                "weight lives in dimension {}, problem in {}",
                h.dim(),
                self.n
            )));
        }
        if !self.supercritical_q && h.sign_changing() {
            return Err(Error::SublinearNeedsPositiveWeight {
                q: self.q.f64(),
                threshold: self.sublinear_threshold().f64(),
            });
        }
        Ok(())
    }
}

/// One bump `a·(1 − |x−c|²/r²)^k` on `|x−c| ≤ r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bump<T> {
    #[serde(rename = "c")]
    pub center: Vec<T>,
    #[serde(rename = "r")]
    pub radius: T,
    #[serde(rename = "a")]
    pub amplitude: T,
    #[serde(rename = "k")]
    pub smoothness: u32,
}

impl<T: Real> Bump<T> {
    pub fn new(center: Vec<T>, radius: T, amplitude: T, smoothness: u32) -> Self {
        Self { center, radius, amplitude, smoothness }
    }

    pub fn eval(&self, x: &[T]) -> T {
        let d2 = dist2(x, &self.center);
        let r2 = self.radius * self.radius;
        if d2 >= r2 {
            return T::zero();
        }
        self.amplitude * (T::one() - d2 / r2).powi(self.smoothness as i32)
    }

    /// Profile as a function of the squared distance to the center.
    #[inline]
    pub fn eval_d2(&self, d2: T) -> T {
        let r2 = self.radius * self.radius;
        if d2 >= r2 {
            T::zero()
        } else {
            self.amplitude * (T::one() - d2 / r2).powi(self.smoothness as i32)
        }
    }
}

/// The weight `h` as a finite sum of compactly supported bumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactWeight<T> {
    pub bumps: Vec<Bump<T>>,
}

impl<T: Real> CompactWeight<T> {
    /// Checks each bump individually (radius, smoothness, dimensions).
    pub fn new(bumps: Vec<Bump<T>>) -> Result<Self> {
        let w = Self { bumps };
        w.check_bumps()?;
        Ok(w)
    }

    pub fn single(center: Vec<T>, radius: T, amplitude: T, smoothness: u32) -> Result<Self> {
        Self::new(vec![Bump::new(center, radius, amplitude, smoothness)])
    }

    fn check_bumps(&self) -> Result<()> {
        let dim = self.bumps.first().map(|b| b.center.len());
        for (i, b) in self.bumps.iter().enumerate() {
            if !(b.radius > T::zero()) || !b.radius.is_finite() {
                return Err(Error::InvalidWeight(format!("bump {i}: radius must be positive")));
            }
            if b.smoothness < 1 {
                return Err(Error::InvalidWeight(format!("bump {i}: smoothness k must be >= 1")));
            }
            if !b.amplitude.is_finite() || b.center.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidWeight(format!("bump {i}: non-finite data")));
            }
            if b.center.is_empty() || Some(b.center.len()) != dim {
                return Err(Error::InvalidWeight(format!("bump {i}: inconsistent dimension")));
            }
        }
        Ok(())
    }

    /// Non-empty and `h₊ ≢ 0`.
    pub fn validate_hypotheses(&self) -> Result<()> {
        self.check_bumps()?;
        if self.bumps.is_empty() {
            return Err(Error::EmptyWeight);
        }
        if !self.bumps.iter().any(|b| b.amplitude > T::zero()) {
            return Err(Error::NoPositivePart);
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.bumps.first().map_or(0, |b| b.center.len())
    }

    pub fn eval(&self, x: &[T]) -> T {
        self.bumps.iter().map(|b| b.eval(x)).sum()
    }

    pub fn sign_changing(&self) -> bool {
        self.bumps.iter().any(|b| b.amplitude < T::zero())
    }

    pub fn scaled(&self, factor: T) -> Self {
        let mut w = self.clone();
        for b in &mut w.bumps {
            b.amplitude = b.amplitude * factor;
        }
        w
    }

    pub fn translated(&self, v: &[T]) -> Self {
        let mut w = self.clone();
        for b in &mut w.bumps {
            for (c, vi) in b.center.iter_mut().zip(v) {
                *c = *c + *vi;
            }
        }
        w
    }

    /// Smallest axis-aligned box containing every bump ball.
    pub fn support_box(&self) -> Result<(Vec<T>, Vec<T>)> {
        if self.bumps.is_empty() {
            return Err(Error::EmptyWeight);
        }
        let d = self.dim();
        let mut lo = vec![T::infinity(); d];
        let mut hi = vec![T::neg_infinity(); d];
        for b in &self.bumps {
            for i in 0..d {
                lo[i] = lo[i].min(b.center[i] - b.radius);
                hi[i] = hi[i].max(b.center[i] + b.radius);
            }
        }
        Ok((lo, hi))
    }

    /// Radius of the smallest origin-centered ball containing the support.
    pub fn support_radius(&self) -> T {
        self.bumps
            .iter()
            .map(|b| norm(&b.center) + b.radius)
            .fold(T::zero(), T::max)
    }

    /// `true` when `x` lies in the closed support ω.
    pub fn in_support(&self, x: &[T]) -> bool {
        self.bumps.iter().any(|b| dist2(x, &b.center) <= b.radius * b.radius)
    }

    /// Center of the bump with the largest amplitude (ties: first listed).
    pub fn most_positive_center(&self) -> Option<Vec<T>> {
        extreme_center(&self.bumps, |a, b| a > b).filter(|(_, a)| *a > T::zero()).map(|(c, _)| c)
    }

    /// Center of the bump with the most negative amplitude.
    pub fn most_negative_center(&self) -> Option<Vec<T>> {
        extreme_center(&self.bumps, |a, b| a < b).filter(|(_, a)| *a < T::zero()).map(|(c, _)| c)
    }
}

fn extreme_center<T: Real>(bumps: &[Bump<T>], better: impl Fn(T, T) -> bool) -> Option<(Vec<T>, T)> {
    let mut best: Option<&Bump<T>> = None;
    for b in bumps {
        if best.is_none_or(|c| better(b.amplitude, c.amplitude)) {
            best = Some(b);
        }
    }
    best.map(|b| (b.center.clone(), b.amplitude))
}

#[inline]
pub(crate) fn dist2<T: Real>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).map(|(a, b)| (*a - *b) * (*a - *b)).sum()
}

#[inline]
pub(crate) fn norm<T: Real>(x: &[T]) -> T {
    x.iter().map(|a| *a * *a).sum::<T>().sqrt()
}
