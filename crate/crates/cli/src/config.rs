//! Run configuration: JSON in, validated problem data out.

use std::path::{Path, PathBuf};

use fracbubble_core::field::GridSpec;
use fracbubble_core::model::{Bump, CompactWeight};
use fracbubble_core::regularity::RawTerm;
use fracbubble_core::{Params64, Weight64};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n: usize,
    pub s: f64,
    pub q: f64,
    #[serde(default)]
    pub eps: f64,
    pub weight: Weight64,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub sweeps: Sweeps,
    /// Output directory; `--out` takes precedence. Not part of the digest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Stereographic scale ℓ (half the nodes lie within ℓ of the center).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sweeps {
    pub landscape: LandscapeSweep,
    pub asymptotics: AsymptoticsSweep,
    pub solve: SolveSweep,
    pub regularity: RegularitySweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LandscapeSweep {
    pub mu_min: f64,
    pub mu_max: f64,
    pub mu_points: usize,
    /// ξ-range per axis; defaults to the support box of h widened by its largest radius.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi_range: Option<[f64; 2]>,
    pub xi_points: usize,
    /// Coarse scan density of the critical-point search.
    pub search_mu_levels: usize,
    pub search_xi_points: usize,
}

impl Default for LandscapeSweep {
    fn default() -> Self {
        Self {
            mu_min: 2f64.powi(-10),
            mu_max: 4.0,
            mu_points: 25,
            xi_range: None,
            xi_points: 41,
            search_mu_levels: 24,
            search_xi_points: 41,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AsymptoticsSweep {
    /// Anchor point; defaults to the center of the most positive bump.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi0: Option<Vec<f64>>,
    /// μ = 2^{−j} for the rate fits; defaults to the asymptotic window of the exponents.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_exponents: Option<Vec<i32>>,
    /// μ = 2^{−j} for the small-μ limit and the divergence certificate.
    pub limit_exponents: Vec<i32>,
    /// |ξ − ξ₀| values of the far-field fit (at μ = 1).
    pub xi_radii: Vec<f64>,
    /// ξ samples per axis for the uniform-in-ξ maximum.
    pub uniform_xi_points: usize,
    /// Relative tolerance on fitted slopes.
    pub slope_tol: f64,
    /// Relative tolerance on the limit constant.
    pub limit_tol: f64,
}

impl Default for AsymptoticsSweep {
    fn default() -> Self {
        Self {
            xi0: None,
            mu_exponents: None,
            limit_exponents: (4..=12).collect(),
            xi_radii: (3..=9).map(|k| 2f64.powi(k)).collect(),
            uniform_xi_points: 41,
            slope_tol: 0.02,
            limit_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveSweep {
    /// ε values for which solutions are constructed.
    pub eps_list: Vec<f64>,
    /// ε values of the reduction-law sweep at the critical point.
    pub law_eps: Vec<f64>,
}

impl Default for SolveSweep {
    fn default() -> Self {
        Self {
            eps_list: vec![1e-3, 1e-2],
            law_eps: vec![1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegularitySweep {
    pub delta: f64,
    pub input: FieldInput,
    pub terms: Vec<TermConfig>,
}

impl Default for RegularitySweep {
    fn default() -> Self {
        Self { delta: 0.1, input: FieldInput::Z0, terms: vec![TermConfig { gamma: 0.0, m: None, a: None }] }
    }
}

/// Field fed to the level-truncation iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldInput {
    /// The standard bubble on the configured grid.
    Z0,
    /// z_{μ,0} on a grid of scale μ.
    Bubble { mu: f64 },
    /// u_ε at the maximum of Γ, ε from the config.
    Solution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub gamma: f64,
    /// Integrability exponent; absent means ∞.
    #[serde(default)]
    pub m: Option<f64>,
    /// Override of the truncation exponent a (default: upper endpoint).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: 1,
            s: 0.2,
            q: 1.5,
            eps: 0.01,
            weight: CompactWeight { bumps: vec![Bump::new(vec![0.0], 1.0, 1.0, 2)] },
            grid: GridConfig::default(),
            sweeps: Sweeps::default(),
            output: None,
        }
    }
}

/// Everything a subcommand needs, validated.
#[derive(Debug, Clone)]
pub struct Setup {
    pub config: RunConfig,
    pub params: Params64,
    pub weight: Weight64,
    /// Absent in n = 3 (no grids there).
    pub grid: Option<GridSpec>,
    pub digest: String,
}

pub fn default_grid_size(n: usize) -> usize {
    if n == 1 {
        4096
    } else {
        128
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("malformed config: {e}")))
    }

    /// SHA-256 of the canonical JSON form, output directory excluded.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.output = None;
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        format!("{:x}", Sha256::digest(&bytes))
    }

    pub fn validate(&self) -> Result<Setup, CliError> {
        let cfg = |e: fracbubble_core::Error| CliError::Config(e.to_string());
        let params = Params64::validate(self.n, self.s, self.q, self.eps).map_err(cfg)?;
        let weight = CompactWeight::new(self.weight.bumps.clone()).map_err(cfg)?;
        params.check_weight(&weight).map_err(cfg)?;
        let grid = if self.n <= 2 {
            let spec = GridSpec {
                n: self.n,
                center: self.grid.center.clone().unwrap_or_else(|| vec![0.0; self.n]),
                scale: self.grid.scale.unwrap_or(1.0),
                size: self.grid.size.unwrap_or_else(|| default_grid_size(self.n)),
            };
            fracbubble_core::Grid64::from_spec(&spec).map_err(cfg)?;
            Some(spec)
        } else {
            None
        };
        let sw = &self.sweeps;
        let l = &sw.landscape;
        if !(l.mu_min > 0.0 && l.mu_max > l.mu_min && l.mu_points >= 2 && l.xi_points >= 1) {
            return Err(CliError::Config("landscape sweep: need 0 < mu_min < mu_max, mu_points >= 2".into()));
        }
        if let Some([a, b]) = l.xi_range {
            if !(b > a) {
                return Err(CliError::Config("landscape sweep: empty xi_range".into()));
            }
        }
        let a = &sw.asymptotics;
        if let Some(x) = &a.xi0 {
            if x.len() != self.n {
                return Err(CliError::Config(format!("asymptotics.xi0 has {} coordinates, need {}", x.len(), self.n)));
            }
        }
        if a.limit_exponents.len() < 3 || a.xi_radii.len() < 3 {
            return Err(CliError::Config("asymptotics sweep: need at least 3 limit exponents and 3 radii".into()));
        }
        let s = &sw.solve;
        if s.eps_list.iter().chain(&s.law_eps).any(|e| !(*e >= 0.0) || !e.is_finite()) {
            return Err(CliError::Config("solve sweep: eps values must be finite and >= 0".into()));
        }
        let r = &sw.regularity;
        if !(r.delta > 0.0) || r.terms.is_empty() {
            return Err(CliError::Config("regularity sweep: need delta > 0 and at least one term".into()));
        }
        if let FieldInput::Bubble { mu } = r.input {
            if !(mu > 0.0) {
                return Err(CliError::Config("regularity input: bubble mu must be positive".into()));
            }
        }
        Ok(Setup { config: self.clone(), params, weight, grid, digest: self.digest() })
    }
}

impl Setup {
    pub fn grid_spec(&self) -> Result<&GridSpec, CliError> {
        self.grid
            .as_ref()
            .ok_or_else(|| CliError::Config(format!("n = {} has no PDE grid (supported: 1, 2)", self.params.n())))
    }

    pub fn raw_terms(&self) -> Vec<RawTerm<f64>> {
        self.config
            .sweeps
            .regularity
            .terms
            .iter()
            .map(|t| {
                let mut r = RawTerm::new(t.gamma, t.m);
                r.a = t.a;
                r
            })
            .collect()
    }
}
