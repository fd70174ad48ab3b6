//! Lyapunov–Schmidt reduction on the stereographic grid.
//!
//! All unknowns live in harmonic-coefficient space of the sphere densities
//! (`w̃ = w/J^a`). There the linearized operator reads `T̃ = I − Λ⁻¹ A M S`
//! (`S` synthesis, `A` analysis, `M` a pointwise multiplier, `Λ` the symbol of P_{2s}),
//! which is self-adjoint for ⟨c, d⟩_Λ = Σ λ c d — the discrete Ḣ^s inner product.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::bubble::{alpha_ns, BubblePoint};
use crate::error::{Error, Result};
use crate::field::{energy, Field, FracOps, Grid};
use crate::krylov::{gmres, GmresOptions};
use crate::landscape::{CriticalKind, CriticalPoint};
use crate::model::{CompactWeight, ProblemParams};
use crate::num::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// ‖H‖ relative to ‖z‖_{Ḣ^s}.
    pub tol: f64,
    pub max_iter: usize,
    /// Relative residual of each bordered solve.
    pub linear_tol: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 50, linear_tol: 1e-13 }
    }
}

impl NewtonOptions {
    fn effective<T: Real>(&self) -> (f64, f64) {
        let e = T::epsilon().f64();
        (self.tol.max(1e3 * e), self.linear_tol.max(10.0 * e))
    }
}

/// Discretization of the reduction around bubbles on one grid.
#[derive(Debug, Clone)]
pub struct Reduction<T: Real> {
    params: ProblemParams<T>,
    weight: CompactWeight<T>,
    ops: FracOps<T>,
    alpha: T,
    h: Vec<T>,
    /// J^{aq−b} on the support of h (zero elsewhere).
    jq: Vec<T>,
    omega: Vec<usize>,
}

/// Bubble data in coefficient space.
#[derive(Debug, Clone)]
struct Frame<T: Real> {
    point: BubblePoint<T>,
    zd: Vec<T>,
    zdp: Vec<T>,
    /// Tangent coefficients normalized in ⟨·,·⟩_Λ.
    q: Vec<Vec<T>>,
    qnorm: Vec<T>,
    gram: DMatrix<f64>,
    znorm: T,
}

/// One Newton iterate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NewtonRecord<T> {
    pub iter: usize,
    pub residual: T,
    pub sup_w: T,
    pub alpha: Vec<T>,
}

/// Solution (w, α) of H₁ = 0 = H₂ at one bubble.
#[derive(Debug, Clone)]
pub struct ReductionState<T: Real> {
    pub point: BubblePoint<T>,
    pub eps: T,
    pub w: Field<T>,
    /// Harmonic coefficients of w/J^a.
    pub w_coeffs: Vec<T>,
    /// Multipliers of q₁..q_{n+1} (unnormalized tangent fields).
    pub alpha: Vec<T>,
    pub residual_norm: T,
    pub newton_iters: usize,
    pub trace: Vec<NewtonRecord<T>>,
    /// max over iterates and i of |⟨w,q_i⟩| / (‖w‖‖q_i‖).
    pub orthogonality: T,
    hs: T,
}

impl<T: Real> ReductionState<T> {
    /// ‖w‖_{Ḣ^s}.
    pub fn w_hs(&self) -> T {
        self.hs
    }
}

impl<T: Real> Reduction<T> {
    pub fn new(params: &ProblemParams<T>, weight: &CompactWeight<T>, grid: &Grid<T>) -> Result<Self> {
        let alpha = alpha_ns(params)?;
        Self::with_alpha(params, weight, grid, alpha)
    }

    pub fn with_alpha(params: &ProblemParams<T>, weight: &CompactWeight<T>, grid: &Grid<T>, alpha: T) -> Result<Self> {
        if grid.n() != params.n() || weight.dim() != params.n() {
            return Err(Error::UnsupportedDimension { n: grid.n(), allowed: "grid, weight and params must share n" });
        }
        let ops = FracOps::new(grid, params.s());
        let e = params.q() * ops.weight_a() - ops.weight_b();
        let mut h = Vec::with_capacity(grid.len());
        let mut jq = Vec::with_capacity(grid.len());
        let mut omega = Vec::new();
        for (i, j) in grid.conformal().iter().enumerate() {
            let hv = weight.eval(grid.point(i));
            if hv != T::zero() {
                omega.push(i);
                jq.push(j.powf(e));
            } else {
                jq.push(T::zero());
            }
            h.push(hv);
        }
        Ok(Self { params: *params, weight: weight.clone(), ops, alpha, h, jq, omega })
    }

    pub fn grid(&self) -> &Grid<T> {
        self.ops.grid()
    }
    pub fn params(&self) -> &ProblemParams<T> {
        &self.params
    }
    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn bubble(&self, mu: T, xi: Vec<T>) -> Result<BubblePoint<T>> {
        BubblePoint::new(&self.params, self.alpha, mu, xi)
    }

    fn dot(&self, a: &[T], b: &[T]) -> T {
        self.ops.hs_inner_coeffs(a, b)
    }

    fn frame(&self, b: &BubblePoint<T>) -> Frame<T> {
        let grid = self.grid();
        let p = self.params.p();
        let zd = self.ops.to_density(b.sample(grid).values());
        let zdp = zd.iter().map(|v| v.powf(p)).collect();
        let mut q = Vec::new();
        let mut qnorm = Vec::new();
        for f in b.tangent_fields(grid) {
            let c = self.ops.coeffs(&self.ops.to_density(f.values()));
            let nrm = self.dot(&c, &c).sqrt();
            q.push(c.iter().map(|v| *v / nrm).collect::<Vec<T>>());
            qnorm.push(nrm);
        }
        let k = q.len();
        let gram = DMatrix::from_fn(k, k, |i, j| self.dot(&q[i], &q[j]).f64());
        let zc = self.ops.coeffs(&zd);
        let znorm = self.dot(&zc, &zc).sqrt();
        Frame { point: b.clone(), zd, zdp, q, qnorm, gram, znorm }
    }

    /// c ↦ c − Λ⁻¹ A(m · S c).
    fn apply_t(&self, m: &[T], c: &[T]) -> Vec<T> {
        let mut d = self.ops.from_coeffs(c);
        for (di, mi) in d.iter_mut().zip(m) {
            *di = *di * *mi;
        }
        let fc = self.ops.coeffs(&d);
        c.iter().zip(&fc).zip(self.ops.symbol()).map(|((ci, fi), l)| *ci - *fi / *l).collect()
    }

    /// (c, β) ↦ (T̃c − Σβ_i Q_i, ⟨c, Q_i⟩_Λ), packed as one vector.
    fn apply_bordered(&self, m: &[T], fr: &Frame<T>, x: &[T]) -> Vec<T> {
        let k = self.ops.symbol().len();
        let (c, beta) = x.split_at(k);
        let mut out = self.apply_t(m, c);
        for (bi, qi) in beta.iter().zip(&fr.q) {
            for (o, v) in out.iter_mut().zip(qi) {
                *o = *o - *bi * *v;
            }
        }
        for qi in &fr.q {
            out.push(self.dot(c, qi));
        }
        out
    }

    fn packed_dot(&self, a: &[T], b: &[T]) -> T {
        let k = self.ops.symbol().len();
        self.dot(&a[..k], &b[..k]) + a[k..].iter().zip(&b[k..]).map(|(x, y)| *x * *y).sum::<T>()
    }

    fn solve_packed(&self, m: &[T], fr: &Frame<T>, rhs: &[T], tol: f64) -> Result<Vec<T>> {
        let (x, _, _) = gmres(
            |v| self.apply_bordered(m, fr, v),
            rhs,
            |a, b| self.packed_dot(a, b),
            GmresOptions { tol, ..Default::default() },
        )?;
        Ok(x)
    }

    /// Removes the components of c along the tangent space (exactly, via the Gram matrix).
    fn project(&self, fr: &Frame<T>, c: &mut [T]) {
        let r = nalgebra::DVector::from_iterator(fr.q.len(), fr.q.iter().map(|qi| self.dot(c, qi).f64()));
        if let Some(y) = fr.gram.clone().lu().solve(&r) {
            for (yi, qi) in y.iter().zip(&fr.q) {
                for (a, b) in c.iter_mut().zip(qi) {
                    *a = *a - T::lit(*yi) * *b;
                }
            }
        }
    }

    fn orthogonality(&self, fr: &Frame<T>, c: &[T]) -> T {
        let nrm = self.dot(c, c).sqrt();
        if nrm == T::zero() {
            return T::zero();
        }
        fr.q.iter().fold(T::zero(), |m, qi| m.max(self.dot(c, qi).abs() / nrm))
    }

    /// Source density of A_ε(z+w) − z^p and the Jacobian multiplier.
    fn nonlinear(&self, fr: &Frame<T>, eps: T, ud: &[T]) -> (Vec<T>, Vec<T>) {
        let p = self.params.p();
        let q = self.params.q();
        let mut src = Vec::with_capacity(ud.len());
        let mut mult = Vec::with_capacity(ud.len());
        for (i, u) in ud.iter().enumerate() {
            let up = u.max(T::zero());
            let mut s = up.powf(p) - fr.zdp[i];
            let mut m = if up > T::zero() { p * up.powf(p - T::one()) } else { T::zero() };
            let h = self.h[i];
            if h != T::zero() && eps != T::zero() && up > T::zero() {
                s = s + eps * h * up.powf(q) * self.jq[i];
                m = m + q * eps * h * up.powf(q - T::one()) * self.jq[i];
            }
            src.push(s);
            mult.push(m);
        }
        (src, mult)
    }

    /// Packed (H₁, H₂) in the normalized tangent basis.
    fn residual(&self, fr: &Frame<T>, eps: T, x: &[T]) -> (Vec<T>, Vec<T>) {
        let k = self.ops.symbol().len();
        let (c, beta) = x.split_at(k);
        let wd = self.ops.from_coeffs(c);
        let ud: Vec<T> = fr.zd.iter().zip(&wd).map(|(a, b)| *a + *b).collect();
        let (src, mult) = self.nonlinear(fr, eps, &ud);
        let fc = self.ops.coeffs(&src);
        let mut r: Vec<T> = c.iter().zip(&fc).zip(self.ops.symbol()).map(|((ci, fi), l)| *ci - *fi / *l).collect();
        for (bi, qi) in beta.iter().zip(&fr.q) {
            for (o, v) in r.iter_mut().zip(qi) {
                *o = *o - *bi * *v;
            }
        }
        for qi in &fr.q {
            r.push(self.dot(c, qi));
        }
        (r, mult)
    }

    fn check_positivity(&self, fr: &Frame<T>, x: &[T]) -> Result<()> {
        if self.params.q() >= T::one() || self.omega.is_empty() {
            return Ok(());
        }
        let k = self.ops.symbol().len();
        let wd = self.ops.from_coeffs(&x[..k]);
        let ja = self.ops.ja();
        let a = self.omega.iter().fold(T::infinity(), |m, &i| m.min(fr.zd[i] * ja[i]));
        let u_min = self.omega.iter().fold(T::infinity(), |m, &i| m.min((fr.zd[i] + wd[i]) * ja[i]));
        if !(u_min > a / T::lit(2.0)) {
            return Err(Error::PositivityLost { min_value: u_min.f64(), threshold: (a / T::lit(2.0)).f64() });
        }
        Ok(())
    }

    /// Newton iteration for H(μ,ξ,w,ε,α) = 0 with w ⊥ span{q_i}.
    pub fn solve_auxiliary(&self, b: &BubblePoint<T>, eps: T, opts: &NewtonOptions) -> Result<ReductionState<T>> {
        let fr = self.frame(b);
        self.solve_frame(&fr, eps, opts)
    }

    fn solve_frame(&self, fr: &Frame<T>, eps: T, opts: &NewtonOptions) -> Result<ReductionState<T>> {
        if !(eps >= T::zero()) || !eps.is_finite() {
            return Err(Error::ExponentRange { what: format!("eps = {eps} must be finite and >= 0") });
        }
        let (tol, ltol) = opts.effective::<T>();
        let k = self.ops.symbol().len();
        let dim = fr.q.len();
        let mut x = vec![T::zero(); k + dim];
        let (mut r, mut mult) = self.residual(fr, eps, &x);
        let norm = |v: &[T]| self.packed_dot(v, v).sqrt() / fr.znorm;
        let mut rn = norm(&r);
        let mut trace = Vec::new();
        let mut orth = T::zero();
        let mut iters = 0;
        let mut converged_at: Option<usize> = None;
        loop {
            trace.push(NewtonRecord {
                iter: iters,
                residual: rn,
                sup_w: self.sup_of(&x[..k]),
                alpha: self.unscale_alpha(fr, &x[k..]),
            });
            if rn.f64() <= tol && converged_at.is_none() {
                converged_at = Some(iters);
            }
            // after convergence, keep polishing only while it still pays off
            if let Some(c) = converged_at {
                if rn == T::zero() || iters >= c + 3 {
                    break;
                }
            }
            if iters >= opts.max_iter {
                return Err(Error::NewtonDiverged { residual: rn.f64(), iterations: iters });
            }
            let neg: Vec<T> = r.iter().map(|v| -*v).collect();
            let step = self.solve_packed(&mult, fr, &neg, ltol)?;
            let mut t = T::one();
            let mut accepted = false;
            for _ in 0..20 {
                let mut trial: Vec<T> = x.iter().zip(&step).map(|(a, b)| *a + t * *b).collect();
                self.project(fr, &mut trial[..k]);
                if self.check_positivity(fr, &trial).is_ok() {
                    let (r2, m2) = self.residual(fr, eps, &trial);
                    let n2 = norm(&r2);
                    if n2 < rn {
                        x = trial;
                        r = r2;
                        mult = m2;
                        rn = n2;
                        accepted = true;
                        break;
                    }
                }
                t = t / T::lit(2.0);
            }
            iters += 1;
            orth = orth.max(self.orthogonality(fr, &x[..k]));
            if !accepted {
                if converged_at.is_some() {
                    break;
                }
                self.check_positivity(fr, &x.iter().zip(&step).map(|(a, b)| *a + *b).collect::<Vec<_>>())?;
                return Err(Error::NewtonDiverged { residual: rn.f64(), iterations: iters });
            }
        }
        let c = x[..k].to_vec();
        let wd = self.ops.from_coeffs(&c);
        let w = Field::new(self.grid(), self.ops.from_potential_density(&wd))?;
        let hs = self.dot(&c, &c).sqrt();
        Ok(ReductionState {
            point: fr.point.clone(),
            eps,
            w,
            alpha: self.unscale_alpha(fr, &x[k..]),
            w_coeffs: c,
            residual_norm: rn,
            newton_iters: converged_at.unwrap_or(iters),
            trace,
            orthogonality: orth,
            hs,
        })
    }

    fn sup_of(&self, c: &[T]) -> T {
        let wd = self.ops.from_coeffs(c);
        wd.iter().zip(self.ops.ja()).fold(T::zero(), |m, (a, j)| m.max((*a * *j).abs()))
    }

    fn unscale_alpha(&self, fr: &Frame<T>, beta: &[T]) -> Vec<T> {
        beta.iter().zip(&fr.qnorm).map(|(b, n)| *b / *n).collect()
    }

    /// T at the bubble `b` (w = 0, ε = 0).
    pub fn linearized(&self, b: &BubblePoint<T>) -> LinearizedOp<T> {
        let fr = self.frame(b);
        let p = self.params.p();
        let mult = fr.zd.iter().map(|z| p * z.powf(p - T::one())).collect();
        LinearizedOp { red: self.clone(), frame: fr, mult }
    }

    /// Multiplier system λ·Id + B^ε with b_ij = ⟨q_i, ∂w/∂(parameter j)⟩ by central differences.
    pub fn multiplier_matrix(&self, b: &BubblePoint<T>, eps: T, opts: &NewtonOptions) -> Result<MultiplierMatrix<T>> {
        let fr = self.frame(b);
        let dim = fr.q.len();
        let n = dim - 1;
        let lambda: Vec<T> = fr.qnorm.iter().map(|v| *v * *v).collect();
        let step = b.mu() * T::lit(1e-4);
        let shifted: Vec<(usize, T)> = (0..dim).flat_map(|j| [(j, step), (j, -step)]).collect();
        let solves: Vec<Result<Vec<T>>> = shifted
            .par_iter()
            .map(|(j, d)| {
                let mut xi = b.xi().to_vec();
                let mut mu = b.mu();
                if *j < n {
                    xi[*j] = xi[*j] + *d;
                } else {
                    mu = mu + *d;
                }
                let fb = self.frame(&b.with_params(mu, xi));
                self.solve_frame(&fb, eps, opts).map(|s| s.w_coeffs)
            })
            .collect();
        let solves: Vec<Vec<T>> = solves.into_iter().collect::<Result<_>>()?;
        let mut bmat = vec![T::zero(); dim * dim];
        let mut dw_norms = Vec::with_capacity(dim);
        for j in 0..dim {
            let dc: Vec<T> = solves[2 * j].iter().zip(&solves[2 * j + 1]).map(|(a, b)| (*a - *b) / (T::lit(2.0) * step)).collect();
            dw_norms.push(self.dot(&dc, &dc).sqrt());
            for i in 0..dim {
                bmat[i * dim + j] = fr.qnorm[i] * self.dot(&fr.q[i], &dc);
            }
        }
        let rel = DMatrix::from_fn(dim, dim, |i, j| {
            (if i == j { 1.0 } else { 0.0 }) + bmat[i * dim + j].f64() / lambda[i].f64()
        });
        let det_ratio = rel.determinant();
        let det0: f64 = lambda.iter().map(|l| l.f64()).product();
        let b_norm = bmat.iter().zip(0..).map(|(v, idx)| (v.f64() / lambda[idx / dim].f64()).powi(2)).sum::<f64>().sqrt();
        Ok(MultiplierMatrix {
            eps,
            lambda,
            b: bmat,
            det: T::lit(det0 * det_ratio),
            det0: T::lit(det0),
            det_ratio: T::lit(det_ratio),
            b_norm: T::lit(b_norm),
            dw_norms,
        })
    }

    /// Largest ε in (0, eps_max] with det(λ+B^ε) ≥ ½ det(λ), by bisection in log ε.
    pub fn epsilon_one(&self, b: &BubblePoint<T>, eps_max: T, opts: &NewtonOptions) -> Result<T> {
        let ok = |e: T| -> Result<bool> { Ok(self.multiplier_matrix(b, e, opts)?.det_ratio >= T::lit(0.5)) };
        if ok(eps_max)? {
            return Ok(eps_max);
        }
        let (mut lo, mut hi) = (eps_max.ln() - T::lit(20.0 * std::f64::consts::LN_10), eps_max.ln());
        if !ok(lo.exp())? {
            return Ok(T::zero());
        }
        for _ in 0..30 {
            let mid = (lo + hi) / T::lit(2.0);
            if ok(mid.exp()).unwrap_or(false) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo.exp())
    }
}

impl<T: Real> ReductionState<T> {
    /// Discrete X^s norm: Ḣ^s seminorm + sup norm.
    pub fn w_xs(&self) -> T {
        self.hs + self.w.sup_norm()
    }
}

/// T = I − p J(z^{p−1} ·) at a bubble.
#[derive(Debug, Clone)]
pub struct LinearizedOp<T: Real> {
    red: Reduction<T>,
    frame: Frame<T>,
    mult: Vec<T>,
}

impl<T: Real> LinearizedOp<T> {
    pub fn base(&self) -> &BubblePoint<T> {
        &self.frame.point
    }

    fn to_coeffs(&self, v: &Field<T>) -> Result<Vec<T>> {
        if v.grid() != self.red.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(self.red.ops.coeffs(&self.red.ops.to_density(v.values())))
    }

    fn to_field(&self, c: &[T]) -> Field<T> {
        let d = self.red.ops.from_coeffs(c);
        Field::new(self.red.grid(), self.red.ops.from_potential_density(&d)).expect("grid length")
    }

    pub fn apply(&self, v: &Field<T>) -> Result<Field<T>> {
        let c = self.to_coeffs(v)?;
        Ok(self.to_field(&self.red.apply_t(&self.mult, &c)))
    }

    /// The tangent fields q₁..q_{n+1}.
    pub fn tangents(&self) -> Vec<Field<T>> {
        self.frame.point.tangent_fields(self.red.grid())
    }

    /// The bordered operator built on this T.
    pub fn bordered(&self) -> BorderedOp<T> {
        BorderedOp { lin: self.clone() }
    }

    /// ⟨u, v⟩ in Ḣ^s on the grid's harmonic coefficients.
    pub fn hs_inner(&self, u: &Field<T>, v: &Field<T>) -> Result<T> {
        Ok(self.red.dot(&self.to_coeffs(u)?, &self.to_coeffs(v)?))
    }
}

/// (v, β) ↦ (Tv − Σβ_i q_i, ⟨v,q₁⟩, …, ⟨v,q_{n+1}⟩).
#[derive(Debug, Clone)]
pub struct BorderedOp<T: Real> {
    lin: LinearizedOp<T>,
}

impl<T: Real> BorderedOp<T> {
    pub fn apply(&self, v: &Field<T>, beta: &[T]) -> Result<(Field<T>, Vec<T>)> {
        let fr = &self.lin.frame;
        let mut x = self.lin.to_coeffs(v)?;
        x.extend(beta.iter().zip(&fr.qnorm).map(|(b, n)| *b * *n));
        let out = self.lin.red.apply_bordered(&self.lin.mult, fr, &x);
        let k = x.len() - beta.len();
        let top = self.lin.to_field(&out[..k]);
        let bottom = out[k..].iter().zip(&fr.qnorm).map(|(v, n)| *v * *n).collect();
        Ok((top, bottom))
    }

    /// Solves 𝒯(v, β) = (f, g) by GMRES; the residual is ≤ `tol`·‖rhs‖.
    pub fn solve(&self, f: &Field<T>, g: &[T], tol: f64) -> Result<(Field<T>, Vec<T>)> {
        let fr = &self.lin.frame;
        let mut rhs = self.lin.to_coeffs(f)?;
        let k = rhs.len();
        rhs.extend(g.iter().zip(&fr.qnorm).map(|(v, n)| *v / *n));
        let x = self.lin.red.solve_packed(&self.lin.mult, fr, &rhs, tol.max(10.0 * T::epsilon().f64()))?;
        let v = self.lin.to_field(&x[..k]);
        let beta = x[k..].iter().zip(&fr.qnorm).map(|(b, n)| *b / *n).collect();
        Ok((v, beta))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiplierMatrix<T> {
    pub eps: T,
    /// λ_i = ⟨q_i, q_i⟩
    pub lambda: Vec<T>,
    /// B^ε row-major, rows i (tangent q_i), columns j (parameter ξ₁..ξ_n, μ).
    pub b: Vec<T>,
    pub det: T,
    pub det0: T,
    /// det(λ+B^ε)/det(λ)
    pub det_ratio: T,
    /// Frobenius norm of λ⁻¹B^ε.
    pub b_norm: T,
    /// ‖∂w/∂(parameter j)‖_{Ḣ^s}
    pub dw_norms: Vec<T>,
}

/// Spectrum of the symmetrized discrete T.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelCertificate {
    pub kernel_dim: usize,
    /// Smallest singular values, ascending.
    pub smallest: Vec<f64>,
    /// σ_{n+2}/σ_{n+1}
    pub gap_ratio: f64,
    pub symmetry_defect: f64,
    pub pass: bool,
}

/// Dense singular values of Λ^{1/2} T̃ Λ^{−1/2} on a small grid adapted to `b`.
pub fn kernel_certificate<T: Real>(params: &ProblemParams<T>, b: &BubblePoint<T>, size: usize) -> Result<KernelCertificate> {
    let grid = Grid::with_center(b.n(), b.xi(), b.mu(), size)?;
    let red = Reduction::with_alpha(params, &CompactWeight::single(vec![T::zero(); b.n()], T::one(), T::one(), 1)?, &grid, b.alpha())?;
    let lin = red.linearized(b);
    let lam: Vec<f64> = red.ops.symbol().iter().map(|v| v.f64()).collect();
    let k = lam.len();
    let mut mat = DMatrix::<f64>::zeros(k, k);
    for j in 0..k {
        let mut c = vec![T::zero(); k];
        c[j] = T::lit(1.0 / lam[j].sqrt());
        let col = red.apply_t(&lin.mult, &c);
        for i in 0..k {
            mat[(i, j)] = col[i].f64() * lam[i].sqrt();
        }
    }
    let defect = (&mat - mat.transpose()).abs().max();
    let sym = (&mat + mat.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(sym);
    let mut sv: Vec<f64> = eig.eigenvalues.iter().map(|v| v.abs()).collect();
    sv.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let kd = b.n() + 1;
    let gap_ratio = sv[kd] / sv[kd - 1].max(f64::MIN_POSITIVE);
    Ok(KernelCertificate {
        kernel_dim: kd,
        smallest: sv.iter().take(kd + 3).copied().collect(),
        gap_ratio,
        symmetry_defect: defect,
        pass: gap_ratio >= 1e3,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    /// (μ, cond₂ of the bordered system)
    pub points: Vec<(f64, f64)>,
    /// max cond / min cond over the sweep.
    pub spread: f64,
}

/// Condition numbers of the bordered system at bubbles z_{μ,0} on the fixed grid `grid`.
pub fn condition_estimate<T: Real>(params: &ProblemParams<T>, alpha: T, grid: &Grid<T>, mus: &[T]) -> Result<ConditionReport> {
    let n = params.n();
    let red = Reduction::with_alpha(params, &CompactWeight::single(vec![T::zero(); n], T::one(), T::one(), 1)?, grid, alpha)?;
    let lam: Vec<f64> = red.ops.symbol().iter().map(|v| v.f64()).collect();
    let k = lam.len();
    let mut points = Vec::new();
    for mu in mus {
        let b = red.bubble(*mu, vec![T::zero(); n])?;
        let lin = red.linearized(&b);
        let fr = &lin.frame;
        let dim = k + n + 1;
        let mut mat = DMatrix::<f64>::zeros(dim, dim);
        for j in 0..dim {
            let mut x = vec![T::zero(); dim];
            x[j] = if j < k { T::lit(1.0 / lam[j].sqrt()) } else { T::one() };
            let col = red.apply_bordered(&lin.mult, fr, &x);
            for i in 0..dim {
                mat[(i, j)] = if i < k { col[i].f64() * lam[i].sqrt() } else { col[i].f64() };
            }
        }
        let sv = mat.singular_values();
        let (mx, mn) = sv.iter().fold((0.0f64, f64::INFINITY), |(a, b), v| (a.max(*v), b.min(*v)));
        points.push((mu.f64(), mx / mn));
    }
    let (mx, mn) = points.iter().fold((0.0f64, f64::INFINITY), |(a, b), (_, c)| (a.max(*c), b.min(*c)));
    Ok(ConditionReport { points, spread: mx / mn })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub newton: NewtonOptions,
    /// Move (μ,ξ) so that the multipliers α vanish (an exact critical point of the reduced map).
    pub refine: bool,
    pub max_outer: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { newton: NewtonOptions::default(), refine: true, max_outer: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionReport<T> {
    pub kind: CriticalKind,
    pub eps: T,
    pub mu_star: T,
    pub xi_star: Vec<T>,
    /// Bubble parameters of the final solution (after refinement).
    pub mu: T,
    pub xi: Vec<T>,
    pub gamma_star: T,
    /// ‖(-Δ)^s u − εh u₊^q − u₊^p‖_∞ / ‖u₊^p‖_∞
    pub residual_sup: T,
    /// Same in L^β, β = 2n/(n+2s), relative to ‖u₊^p‖_β.
    pub residual_dual: T,
    /// Residuals of the bare bubble on the same grid.
    pub floor_sup: T,
    pub floor_dual: T,
    pub min_u: T,
    pub positive: bool,
    /// |f_ε(z+w) − f₀(z) + εΓ(μ*,ξ*)|
    pub energy_error: T,
    pub f_eps: T,
    pub f0: T,
    pub w_hs: T,
    pub w_sup: T,
    pub alpha: Vec<T>,
    pub newton_iters: usize,
    pub outer_iters: usize,
    pub orthogonality: T,
}

#[derive(Debug, Clone)]
pub struct Solution<T: Real> {
    pub u: Field<T>,
    pub state: ReductionState<T>,
    pub report: SolutionReport<T>,
}

/// u_ε = z_{μ,ξ} + w near the first critical point of the requested kind, on a grid
/// adapted to it (center ξ*, scale μ*).
pub fn construct_solution<T: Real>(
    params: &ProblemParams<T>,
    weight: &CompactWeight<T>,
    points: &[CriticalPoint<T>],
    kind: CriticalKind,
    eps: T,
    grid_size: usize,
    opts: &SolveOptions,
) -> Result<Solution<T>> {
    let cp = points.iter().find(|c| c.kind == kind).ok_or(Error::NotRequestedKind { kind: kind.to_string() })?;
    let grid = Grid::with_center(params.n(), &cp.xi, cp.mu, grid_size)?;
    let red = Reduction::new(params, weight, &grid)?;
    let mut b = red.bubble(cp.mu, cp.xi.clone())?;
    let mut state = red.solve_auxiliary(&b, eps, &opts.newton)?;
    let mut outer = 0;
    if opts.refine && eps > T::zero() {
        let n = params.n();
        let dim = n + 1;
        let size = |s: &ReductionState<T>, fr: &Frame<T>| -> f64 {
            s.alpha.iter().zip(&fr.qnorm).map(|(a, q)| (a.f64() * q.f64()).powi(2)).sum::<f64>().sqrt()
        };
        let mut fr = red.frame(&b);
        let mut best = size(&state, &fr);
        while outer < opts.max_outer && best > 64.0 * T::epsilon().f64() * fr.znorm.f64() {
            // Jacobian of the scaled multipliers with respect to (ξ, μ)
            let h = b.mu() * T::lit(1e-4);
            let cols: Vec<Result<Vec<f64>>> = (0..dim)
                .into_par_iter()
                .map(|j| {
                    let mut out = Vec::with_capacity(dim);
                    let mut pm = Vec::new();
                    for sgn in [T::one(), -T::one()] {
                        let mut xi = b.xi().to_vec();
                        let mut mu = b.mu();
                        if j < n {
                            xi[j] = xi[j] + sgn * h;
                        } else {
                            mu = mu + sgn * h;
                        }
                        pm.push(red.solve_auxiliary(&b.with_params(mu, xi), eps, &opts.newton)?.alpha);
                    }
                    #[allow(clippy::needless_range_loop)]
                    for i in 0..dim {
                        out.push((pm[0][i] - pm[1][i]).f64() * fr.qnorm[i].f64() / (2.0 * h.f64()));
                    }
                    Ok(out)
                })
                .collect();
            let cols: Vec<Vec<f64>> = cols.into_iter().collect::<Result<_>>()?;
            let jac = DMatrix::from_fn(dim, dim, |i, j| cols[j][i]);
            let rhs = nalgebra::DVector::from_iterator(dim, state.alpha.iter().zip(&fr.qnorm).map(|(a, q)| -(a.f64() * q.f64())));
            let Some(delta) = jac.lu().solve(&rhs) else { break };
            let mut xi = b.xi().to_vec();
            for i in 0..n {
                xi[i] = xi[i] + T::lit(delta[i]);
            }
            let mu = b.mu() + T::lit(delta[n]);
            if !(mu > T::zero()) {
                break;
            }
            let nb = b.with_params(mu, xi);
            let ns = red.solve_auxiliary(&nb, eps, &opts.newton)?;
            let nfr = red.frame(&nb);
            let nsz = size(&ns, &nfr);
            outer += 1;
            if !(nsz < best) {
                break;
            }
            best = nsz;
            b = nb;
            state = ns;
            fr = nfr;
        }
    }
    let report_data = assemble(&red, &b, &state, cp, eps)?;
    let mut report = report_data.1;
    report.outer_iters = outer;
    Ok(Solution { u: report_data.0, state, report })
}

fn assemble<T: Real>(
    red: &Reduction<T>,
    b: &BubblePoint<T>,
    state: &ReductionState<T>,
    cp: &CriticalPoint<T>,
    eps: T,
) -> Result<(Field<T>, SolutionReport<T>)> {
    let grid = red.grid();
    let params = red.params();
    let z = b.sample(grid);
    let u = z.add(&state.w)?;
    let (res_sup, res_dual) = pde_residual(red, &u, eps);
    let (floor_sup, floor_dual) = pde_residual(red, &z, T::zero());
    let mut weight_eps = *params;
    weight_eps = weight_eps.with_eps(eps)?;
    let e = energy(&u, &weight_eps, &red.weight);
    let e0 = energy(&z, &weight_eps, &red.weight);
    let energy_error = (e.feps - e0.f0 + eps * cp.gamma).abs();
    let min_u = u.min_value();
    Ok((
        u,
        SolutionReport {
            kind: cp.kind,
            eps,
            mu_star: cp.mu,
            xi_star: cp.xi.clone(),
            mu: b.mu(),
            xi: b.xi().to_vec(),
            gamma_star: cp.gamma,
            residual_sup: res_sup,
            residual_dual: res_dual,
            floor_sup,
            floor_dual,
            min_u,
            positive: min_u > T::zero(),
            energy_error,
            f_eps: e.feps,
            f0: e0.f0,
            w_hs: state.w_hs(),
            w_sup: state.w.sup_norm(),
            alpha: state.alpha.clone(),
            newton_iters: state.newton_iters,
            outer_iters: 0,
            orthogonality: state.orthogonality,
        },
    ))
}

/// Sup-relative and L^β-relative residual of (-Δ)^s u = εh u₊^q + u₊^p.
pub fn pde_residual<T: Real>(red: &Reduction<T>, u: &Field<T>, eps: T) -> (T, T) {
    let ops = &red.ops;
    let p = red.params.p();
    let q = red.params.q();
    let ud = ops.to_density(u.values());
    let pu = ops.p_density(&ud);
    let sw = ops.grid().sphere_weights();
    let beta = red.params.dual_exp();
    let crit = red.params.crit_exp();
    let (mut err_sup, mut scale_sup, mut err_b, mut scale_b) = (T::zero(), T::zero(), T::zero(), T::zero());
    for i in 0..ud.len() {
        let up = ud[i].max(T::zero());
        let mut rhs = up.powf(p);
        if red.h[i] != T::zero() && up > T::zero() {
            rhs = rhs + eps * red.h[i] * up.powf(q) * red.jq[i];
        }
        let r = pu[i] - rhs;
        let jb = ops.jb()[i];
        err_sup = err_sup.max((r * jb).abs());
        scale_sup = scale_sup.max(up.powf(p) * jb);
        // r/J^b integrates conformally: ∫|r|^β dx = ∫|r̃|^β dΩ
        err_b = err_b + r.abs().powf(beta) * sw[i];
        scale_b = scale_b + up.powf(crit) * sw[i];
    }
    (err_sup / scale_sup, (err_b / scale_b).powf(T::one() / beta))
}

/// One point of an ε-sweep at fixed (μ, ξ).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint<T> {
    pub eps: T,
    pub w_hs: T,
    pub w_sup: T,
    pub w_xs: T,
    pub alpha_norm: T,
    pub orthogonality: T,
    pub energy_error: T,
    pub b_norm: T,
    pub det_ratio: T,
    pub dw_norm: T,
    pub newton_iters: usize,
}

/// w, α, B^ε and the energy expansion error at fixed (μ, ξ) for each ε (in parallel).
pub fn epsilon_sweep<T: Real>(red: &Reduction<T>, b: &BubblePoint<T>, gamma: T, eps_list: &[T], opts: &NewtonOptions) -> Result<Vec<SweepPoint<T>>> {
    let z = b.sample(red.grid());
    let e0 = energy(&z, red.params(), &red.weight);
    eps_list
        .par_iter()
        .map(|eps| {
            let s = red.solve_auxiliary(b, *eps, opts)?;
            let m = red.multiplier_matrix(b, *eps, opts)?;
            let u = z.add(&s.w)?;
            let e = energy(&u, &red.params.with_eps(*eps)?, &red.weight);
            Ok(SweepPoint {
                eps: *eps,
                w_hs: s.w_hs(),
                w_sup: s.w.sup_norm(),
                w_xs: s.w_xs(),
                alpha_norm: s.alpha.iter().fold(T::zero(), |a, v| a + *v * *v).sqrt(),
                orthogonality: s.orthogonality,
                energy_error: (e.feps - e0.f0 + *eps * gamma).abs(),
                b_norm: m.b_norm,
                det_ratio: m.det_ratio,
                dw_norm: m.dw_norms.iter().fold(T::zero(), |a, v| a.max(*v)),
                newton_iters: s.newton_iters,
            })
        })
        .collect()
}
