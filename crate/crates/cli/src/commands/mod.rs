//! One module per subcommand.

use fracbubble_core::landscape::{build_slab, find_critical_points, CriticalPoint, Landscape, SearchOptions, SlabSpec};
use serde::Serialize;

use crate::config::Setup;
use crate::CliError;

pub mod asymptotics;
pub mod landscape;
pub mod regularity;
pub mod solve;
pub mod verify;

/// Γ for the configured problem, its certified slab and critical points.
pub struct Selection {
    pub land: Landscape<f64>,
    pub slab: SlabSpec<f64>,
    pub points: Vec<CriticalPoint<f64>>,
}

pub fn select(setup: &Setup) -> Result<Selection, CliError> {
    let land = Landscape::new(&setup.params, &setup.weight).map_err(|e| CliError::Config(e.to_string()))?;
    let slab = build_slab(&land)?;
    let l = &setup.config.sweeps.landscape;
    let opts = SearchOptions {
        mu_levels: l.search_mu_levels,
        xi_points: l.search_xi_points,
        want_min: setup.weight.sign_changing(),
        ..SearchOptions::default()
    };
    let points = find_critical_points(&land, &slab, &opts)?;
    Ok(Selection { land, slab, points })
}

/// Problem parameters as echoed into summaries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamsSummary {
    pub n: usize,
    pub s: f64,
    pub q: f64,
    pub eps: f64,
    pub p: f64,
    pub crit_exp: f64,
    pub dual_exp: f64,
    pub gamma_s: f64,
    pub supercritical_q: bool,
}

impl ParamsSummary {
    pub fn of(setup: &Setup) -> Self {
        let p = &setup.params;
        Self {
            n: p.n(),
            s: p.s(),
            q: p.q(),
            eps: p.eps(),
            p: p.p(),
            crit_exp: p.crit_exp(),
            dual_exp: p.dual_exp(),
            gamma_s: p.gamma_s(),
            supercritical_q: p.supercritical_q(),
        }
    }
}
