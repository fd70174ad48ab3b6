//! Grid-sampled functions on ℝⁿ, the fractional Laplacian, the Riesz potential,
//! norms and the energy functionals.

mod grid;
pub mod io;
mod spectral;

pub use grid::{Grid, GridSpec};

use crate::error::{Error, Result};
use crate::model::{CompactWeight, ProblemParams};
use crate::num::{lit, Real};

/// Samples of a function on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T: Real> {
    grid: Grid<T>,
    values: Vec<T>,
}

impl<T: Real> Field<T> {
    pub fn new(grid: &Grid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        Ok(Self { grid: grid.clone(), values })
    }

    pub fn zeros(grid: &Grid<T>) -> Self {
        Self { grid: grid.clone(), values: vec![T::zero(); grid.len()] }
    }

    pub fn from_fn(grid: &Grid<T>, f: impl Fn(&[T]) -> T) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.point(i))).collect();
        Self { grid: grid.clone(), values }
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }
    pub fn values(&self) -> &[T] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|v| f(*v)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.same_grid(other)?;
        Ok(Self { grid: self.grid.clone(), values: self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect() })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }
    pub fn scale(&self, c: T) -> Self {
        self.map(|v| v * c)
    }
    pub fn positive_part(&self) -> Self {
        self.map(|v| v.max(T::zero()))
    }

    pub fn same_grid(&self, other: &Self) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// ∫ u dx by the grid quadrature.
    pub fn integral(&self) -> T {
        self.values.iter().zip(self.grid.volume_weights()).map(|(v, w)| *v * *w).sum()
    }

    pub fn sup_norm(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> T {
        self.values.iter().fold(T::infinity(), |m, v| m.min(*v))
    }

    /// ‖u‖_{L^r}. Conformally natural exponents (r = 2*_s for potentials, r = β for
    /// sources) integrate a smooth function on the sphere; other exponents may converge slowly.
    pub fn lp_norm(&self, r: T) -> T {
        let s: T = self.values.iter().zip(self.grid.volume_weights()).map(|(v, w)| v.abs().powf(r) * *w).sum();
        s.powf(T::one() / r)
    }

    /// `u / J^weight` at the nodes.
    pub fn density(&self, weight: T) -> Vec<T> {
        self.values.iter().zip(self.grid.conformal()).map(|(v, j)| *v / j.powf(weight)).collect()
    }

    pub fn from_density(grid: &Grid<T>, dens: &[T], weight: T) -> Self {
        let values = dens.iter().zip(grid.conformal()).map(|(d, j)| *d * j.powf(weight)).collect();
        Self { grid: grid.clone(), values }
    }

    /// Spectral interpolation at an arbitrary point, expanding `u/J^weight` in harmonics.
    pub fn eval_at(&self, x: &[T], weight: T) -> T {
        let c = self.grid.basis().analyze(&self.density(weight));
        let (coords, jc) = self.grid.sphere_coords(x);
        self.grid.basis().eval(&c, &coords) * jc.powf(weight)
    }
}

/// Fractional operators on one grid for a fixed `s`, with cached symbols.
///
/// Potentials (solutions, bubbles, tangent fields) carry conformal weight
/// `a = (n−2s)/2`, sources (right-hand sides) weight `b = (n+2s)/2`.
#[derive(Clone)]
pub struct FracOps<T: Real> {
    grid: Grid<T>,
    s: T,
    a: T,
    b: T,
    lam: Vec<T>,
    inv_lam: Vec<T>,
    ja: Vec<T>,
    jb: Vec<T>,
}

impl<T: Real> std::fmt::Debug for FracOps<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "FracOps({:?}, s = {})", self.grid, self.s)
    }
}

impl<T: Real> FracOps<T> {
    pub fn new(grid: &Grid<T>, s: T) -> Self {
        let nf = T::from_usize_(grid.n());
        let two = lit::<T>(2.0);
        let a = (nf - two * s) / two;
        let b = (nf + two * s) / two;
        let lam = grid.symbol(s, T::one());
        let inv_lam = lam.iter().map(|l| T::one() / *l).collect();
        let ja = grid.conformal().iter().map(|j| j.powf(a)).collect();
        let jb = grid.conformal().iter().map(|j| j.powf(b)).collect();
        Self { grid: grid.clone(), s, a, b, lam, inv_lam, ja, jb }
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }
    pub fn s(&self) -> T {
        self.s
    }
    /// Potential weight (n−2s)/2.
    pub fn weight_a(&self) -> T {
        self.a
    }
    /// Source weight (n+2s)/2.
    pub fn weight_b(&self) -> T {
        self.b
    }
    pub fn ja(&self) -> &[T] {
        &self.ja
    }
    pub fn jb(&self) -> &[T] {
        &self.jb
    }
    /// Eigenvalue of P_{2s} on each coefficient.
    pub fn symbol(&self) -> &[T] {
        &self.lam
    }

    fn apply_symbol(&self, dens: &[T], sym: &[T]) -> Vec<T> {
        let basis = self.grid.basis();
        let mut c = basis.analyze(dens);
        for (ci, l) in c.iter_mut().zip(sym) {
            *ci = *ci * *l;
        }
        basis.synthesize(&c)
    }

    pub fn coeffs(&self, dens: &[T]) -> Vec<T> {
        self.grid.basis().analyze(dens)
    }

    pub fn from_coeffs(&self, c: &[T]) -> Vec<T> {
        self.grid.basis().synthesize(c)
    }

    /// P_{2s} on sphere densities.
    pub fn p_density(&self, dens: &[T]) -> Vec<T> {
        self.apply_symbol(dens, &self.lam)
    }

    /// P_{2s}^{-1} on sphere densities.
    pub fn pinv_density(&self, dens: &[T]) -> Vec<T> {
        self.apply_symbol(dens, &self.inv_lam)
    }

    /// Σ λ_l û v̂ for two potential densities.
    pub fn hs_inner_density(&self, u: &[T], v: &[T]) -> T {
        let cu = self.coeffs(u);
        let cv = self.coeffs(v);
        self.hs_inner_coeffs(&cu, &cv)
    }

    pub fn hs_inner_coeffs(&self, cu: &[T], cv: &[T]) -> T {
        cu.iter().zip(cv).zip(&self.lam).map(|((a, b), l)| *l * (*a * *b)).sum()
    }

    /// Potential values → density.
    pub fn to_density(&self, u: &[T]) -> Vec<T> {
        u.iter().zip(&self.ja).map(|(v, j)| *v / *j).collect()
    }

    pub fn from_potential_density(&self, d: &[T]) -> Vec<T> {
        d.iter().zip(&self.ja).map(|(v, j)| *v * *j).collect()
    }

    pub fn laplacian(&self, u: &[T]) -> Vec<T> {
        let g = self.p_density(&self.to_density(u));
        g.iter().zip(&self.jb).map(|(v, j)| *v * *j).collect()
    }

    pub fn riesz(&self, f: &[T]) -> Vec<T> {
        let d: Vec<T> = f.iter().zip(&self.jb).map(|(v, j)| *v / *j).collect();
        let g = self.pinv_density(&d);
        g.iter().zip(&self.ja).map(|(v, j)| *v * *j).collect()
    }
}

/// (-Δ)^s u.
pub fn frac_laplacian<T: Real>(u: &Field<T>, s: T) -> Field<T> {
    let ops = FracOps::new(u.grid(), s);
    Field { grid: u.grid.clone(), values: ops.laplacian(&u.values) }
}

/// Riesz potential J, normalized so that (-Δ)^s (J f) = f.
pub fn riesz_potential<T: Real>(f: &Field<T>, s: T) -> Field<T> {
    let ops = FracOps::new(f.grid(), s);
    Field { grid: f.grid.clone(), values: ops.riesz(&f.values) }
}

/// ⟨u, v⟩ = ∫ ((-Δ)^s u) v dx, computed on the harmonic coefficients (exactly symmetric).
pub fn hs_inner<T: Real>(u: &Field<T>, v: &Field<T>, s: T) -> Result<T> {
    u.same_grid(v)?;
    let ops = FracOps::new(u.grid(), s);
    Ok(ops.hs_inner_density(&ops.to_density(&u.values), &ops.to_density(&v.values)))
}

/// ∫ u v dx.
pub fn l2_inner<T: Real>(u: &Field<T>, v: &Field<T>) -> Result<T> {
    u.same_grid(v)?;
    Ok(u.values.iter().zip(&v.values).zip(u.grid.volume_weights()).map(|((a, b), w)| *a * *b * *w).sum())
}

pub fn hs_seminorm<T: Real>(u: &Field<T>, s: T) -> T {
    hs_inner(u, u, s).expect("same grid").max(T::zero()).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Norms<T> {
    pub sup: T,
    pub hs: T,
    /// (r, ‖u‖_{L^r}) for each requested r.
    pub lp: Vec<(T, T)>,
}

pub fn norms<T: Real>(u: &Field<T>, s: T, rs: &[T]) -> Norms<T> {
    Norms { sup: u.sup_norm(), hs: hs_seminorm(u, s), lp: rs.iter().map(|r| (*r, u.lp_norm(*r))).collect() }
}

/// Discrete X^s norm: Ḣ^s seminorm plus sup norm.
pub fn xs_norm<T: Real>(u: &Field<T>, s: T) -> T {
    hs_seminorm(u, s) + u.sup_norm()
}

fn exponents<T: Real>(n: usize, s: T) -> (T, T) {
    let nf = T::from_usize_(n);
    let two = lit::<T>(2.0);
    (two * nf / (nf - two * s), two * nf / (nf + two * s))
}

/// ‖Jψ‖_{2*_s} / ‖ψ‖_β (Hardy–Littlewood–Sobolev).
pub fn hls_ratio<T: Real>(psi: &Field<T>, s: T) -> T {
    let (crit, dual) = exponents(psi.grid().n(), s);
    riesz_potential(psi, s).lp_norm(crit) / psi.lp_norm(dual)
}

/// ‖u‖_{2*_s} / [u]_{Ḣ^s} (fractional Sobolev).
pub fn sobolev_ratio<T: Real>(u: &Field<T>, s: T) -> T {
    let (crit, _) = exponents(u.grid().n(), s);
    u.lp_norm(crit) / hs_seminorm(u, s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport<T> {
    pub f0: T,
    pub feps: T,
    pub g: T,
}

/// f₀(u) = ½⟨u,u⟩ − ∫u₊^{p+1}/(p+1), G(u) = ∫h u₊^{q+1}/(q+1), f_ε = f₀ − εG.
///
/// The quadratic term is normalized so that its derivative is the weak form
/// ∫((-Δ)^s u)φ.
pub fn energy<T: Real>(u: &Field<T>, params: &ProblemParams<T>, h: &CompactWeight<T>) -> EnergyReport<T> {
    let p = params.p();
    let q = params.q();
    let quad = lit::<T>(0.5) * hs_inner(u, u, params.s()).expect("same grid");
    let w = u.grid().volume_weights();
    let mut pot = T::zero();
    let mut g = T::zero();
    for (i, (v, wi)) in u.values.iter().zip(w).enumerate() {
        let vp = v.max(T::zero());
        if vp > T::zero() {
            pot = pot + vp.powf(p + T::one()) * *wi;
            let hx = h.eval(u.grid().point(i));
            if hx != T::zero() {
                g = g + hx * vp.powf(q + T::one()) * *wi;
            }
        }
    }
    let f0 = quad - pot / (p + T::one());
    let g = g / (q + T::one());
    EnergyReport { f0, feps: f0 - params.eps() * g, g }
}
