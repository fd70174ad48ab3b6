use fracbubble_core::field::io::{raw_bytes, sidecar, Sidecar};
use fracbubble_core::landscape::{CriticalKind, CriticalPoint};
use fracbubble_core::quadrature::linear_fit;
use fracbubble_core::reduction::{construct_solution, epsilon_sweep, Reduction, SolutionReport, SolveOptions, SweepPoint};
use fracbubble_core::Grid64;
use rayon::prelude::*;
use serde::Serialize;

use super::{select, ParamsSummary};
use crate::config::Setup;
use crate::output::{Output, Table};
use crate::CliError;

/// Sidecar of one solution snapshot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnapshotMeta {
    pub kind: CriticalKind,
    pub eps: f64,
    pub mu: f64,
    pub xi: Vec<f64>,
    pub grid: Sidecar,
}

/// Reduction law along an ε-sweep at one critical point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LawSummary {
    pub kind: CriticalKind,
    pub mu: f64,
    pub xi: Vec<f64>,
    /// Slope of log‖w‖_{X^s} against log ε (expected 1).
    pub w_slope: f64,
    pub w_r2: f64,
    /// Slope of log|f_ε(z+w) − f₀(z) + εΓ| against log ε (expected ≥ 1.5).
    pub energy_slope: f64,
    pub energy_r2: f64,
    pub max_orthogonality: f64,
    pub b_norm_monotone: bool,
    pub points: Vec<SweepPoint<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveSummary {
    pub params: ParamsSummary,
    pub critical_points: Vec<CriticalPoint<f64>>,
    pub solutions: Vec<SolutionReport<f64>>,
    pub laws: Vec<LawSummary>,
}

fn fit(points: &[SweepPoint<f64>], y: impl Fn(&SweepPoint<f64>) -> f64) -> (f64, f64) {
    let pts: Vec<&SweepPoint<f64>> = points.iter().filter(|p| p.eps > 0.0 && y(p) > 0.0).collect();
    let x: Vec<f64> = pts.iter().map(|p| p.eps.ln()).collect();
    let v: Vec<f64> = pts.iter().map(|p| y(p).ln()).collect();
    if x.len() < 2 {
        return (f64::NAN, f64::NAN);
    }
    let (s, _, r2) = linear_fit(&x, &v);
    (s, r2)
}

pub fn law(setup: &Setup, cp: &CriticalPoint<f64>, size: usize) -> Result<LawSummary, CliError> {
    let grid = Grid64::with_center(setup.params.n(), &cp.xi, cp.mu, size)?;
    let red = Reduction::new(&setup.params, &setup.weight, &grid)?;
    let b = red.bubble(cp.mu, cp.xi.clone())?;
    let eps = &setup.config.sweeps.solve.law_eps;
    let points = epsilon_sweep(&red, &b, cp.gamma, eps, &SolveOptions::default().newton)?;
    let (w_slope, w_r2) = fit(&points, |p| p.w_xs);
    let (energy_slope, energy_r2) = fit(&points, |p| p.energy_error);
    let mut sorted: Vec<&SweepPoint<f64>> = points.iter().collect();
    sorted.sort_by(|a, b| a.eps.total_cmp(&b.eps));
    Ok(LawSummary {
        kind: cp.kind,
        mu: cp.mu,
        xi: cp.xi.clone(),
        w_slope,
        w_r2,
        energy_slope,
        energy_r2,
        max_orthogonality: points.iter().fold(0.0, |m, p| m.max(p.orthogonality)),
        b_norm_monotone: sorted.windows(2).all(|w| w[1].b_norm > w[0].b_norm),
        points,
    })
}

pub fn run(setup: &Setup, out: &mut Output) -> Result<(), CliError> {
    let size = setup.grid_spec()?.size;
    let sel = out.time("select", || select(setup))?;
    let mut kinds = vec![CriticalKind::Max];
    if setup.weight.sign_changing() && setup.params.supercritical_q() {
        kinds.push(CriticalKind::Min);
    }
    let eps_list = &setup.config.sweeps.solve.eps_list;
    let jobs: Vec<(CriticalKind, usize, f64)> =
        kinds.iter().flat_map(|k| eps_list.iter().enumerate().map(move |(i, e)| (*k, i, *e))).collect();
    let opts = SolveOptions::default();
    let sols = out.time("solve", || {
        jobs.par_iter()
            .map(|(k, _, e)| construct_solution(&setup.params, &setup.weight, &sel.points, *k, *e, size, &opts))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let laws = out.time("law", || {
        kinds
            .iter()
            .filter_map(|k| sel.points.iter().find(|p| p.kind == *k))
            .map(|cp| law(setup, cp, size))
            .collect::<Result<Vec<_>, _>>()
    })?;

    for ((kind, i, eps), sol) in jobs.iter().zip(&sols) {
        let stem = format!("solution_{kind}_{i}");
        out.write(&format!("{stem}.f64"), &raw_bytes(&sol.u))?;
        let meta = SnapshotMeta { kind: *kind, eps: *eps, mu: sol.report.mu, xi: sol.report.xi.clone(), grid: sidecar(&sol.u) };
        out.json(&format!("{stem}.json"), &meta)?;
        let n = setup.params.n();
        let header: Vec<String> = ["iter", "residual", "sup_w"]
            .into_iter()
            .map(String::from)
            .chain(std::iter::once("alpha_mu".to_string()))
            .chain((1..=n).map(|j| format!("alpha_xi_{j}")))
            .collect();
        let mut t = Table::new(header);
        for r in &sol.state.trace {
            // α is stored as (ξ₁..ξₙ, μ)
            let mut row = vec![r.iter as f64, r.residual, r.sup_w, r.alpha[n]];
            row.extend(&r.alpha[..n]);
            t.push(row);
        }
        out.csv(&format!("newton_{kind}_{i}.csv"), &t)?;
        let pos = sol.report.positive;
        out.check(format!("solution.{kind}.{i}.positive"), pos);
        // residual at the level of the bare bubble on the same grid
        let floor = sol.report.floor_sup.max(1e3 * f64::EPSILON);
        out.check(format!("solution.{kind}.{i}.residual"), sol.report.residual_sup <= 10.0 * floor);
    }
    for l in &laws {
        let mut t = Table::new([
            "eps", "w_hs", "w_sup", "w_xs", "alpha_norm", "orthogonality", "energy_error", "b_norm", "det_ratio", "dw_norm", "newton_iters",
        ]);
        for p in &l.points {
            t.push(vec![
                p.eps,
                p.w_hs,
                p.w_sup,
                p.w_xs,
                p.alpha_norm,
                p.orthogonality,
                p.energy_error,
                p.b_norm,
                p.det_ratio,
                p.dw_norm,
                p.newton_iters as f64,
            ]);
        }
        out.csv(&format!("law_{}.csv", l.kind), &t)?;
    }
    if kinds.len() == 2 && !eps_list.is_empty() {
        let (a, b) = (&sols[0].report, &sols[eps_list.len()].report);
        let sep = a.xi.iter().zip(&b.xi).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        out.check("solution.families_distinct", sep > 1e-6 || (a.mu - b.mu).abs() > 1e-6 * a.mu);
    }
    let summary = SolveSummary {
        params: ParamsSummary::of(setup),
        critical_points: sel.points.clone(),
        solutions: sols.into_iter().map(|s| s.report).collect(),
        laws,
    };
    out.json("solve.json", &summary)?;
    Ok(())
}
