use rayon::prelude::*;
use serde::Serialize;

use super::{select, ParamsSummary};
use crate::config::Setup;
use crate::output::{Output, Table};
use crate::CliError;

#[derive(Serialize)]
struct CriticalSummary<'a> {
    params: ParamsSummary,
    points: &'a [fracbubble_core::landscape::CriticalPoint<f64>],
}

pub fn run(setup: &Setup, out: &mut Output) -> Result<(), CliError> {
    let n = setup.params.n();
    let sel = out.time("select", || select(setup))?;
    let l = &setup.config.sweeps.landscape;

    let mus: Vec<f64> = (0..l.mu_points)
        .map(|k| (l.mu_min.ln() + (l.mu_max.ln() - l.mu_min.ln()) * k as f64 / (l.mu_points - 1) as f64).exp())
        .collect();
    let [lo, hi] = l.xi_range.unwrap_or_else(|| {
        let (a, b) = setup.weight.support_box().expect("validated weight");
        let pad = setup.weight.bumps.iter().fold(0.0f64, |m, b| m.max(b.radius));
        let lo = a.iter().fold(f64::INFINITY, |m, v| m.min(*v)) - pad;
        let hi = b.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v)) + pad;
        [lo, hi]
    });
    let per = l.xi_points;
    let axis: Vec<f64> =
        (0..per).map(|k| if per == 1 { 0.5 * (lo + hi) } else { lo + (hi - lo) * k as f64 / (per - 1) as f64 }).collect();
    let mut pts: Vec<(f64, Vec<f64>)> = Vec::new();
    for mu in &mus {
        let mut idx = vec![0usize; n];
        loop {
            pts.push((*mu, idx.iter().map(|i| axis[*i]).collect()));
            let mut d = 0;
            while d < n {
                idx[d] += 1;
                if idx[d] < per {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
            if d == n {
                break;
            }
        }
    }
    let samples = out.time("scan", || {
        pts.par_iter().map(|(mu, xi)| sel.land.gamma(*mu, xi)).collect::<Result<Vec<_>, _>>()
    })?;

    let header: Vec<String> = std::iter::once("mu".to_string())
        .chain((1..=n).map(|i| format!("xi_{i}")))
        .chain(["gamma".to_string(), "dgamma_dmu".to_string()])
        .chain((1..=n).map(|i| format!("dgamma_dxi_{i}")))
        .collect();
    let mut table = Table::new(header);
    for s in &samples {
        let mut row = vec![s.mu];
        row.extend(&s.xi);
        row.push(s.gamma);
        row.extend(&s.grad);
        table.push(row);
    }
    out.csv("landscape.csv", &table)?;
    out.json("slab.json", &sel.slab)?;
    out.json("critical_points.json", &CriticalSummary { params: ParamsSummary::of(setup), points: &sel.points })?;

    let certified = |side: &fracbubble_core::landscape::SlabSide<f64>| side.boundary_sampled < 0.5 * side.b && side.gamma_at_anchor.abs() >= side.b;
    out.check("slab.max_side_certified", certified(&sel.slab.max_side));
    if let Some(m) = &sel.slab.min_side {
        out.check("slab.min_side_certified", certified(m));
    }
    let has = |k| sel.points.iter().any(|p| p.kind == k);
    out.check("critical_points.max_found", has(fracbubble_core::landscape::CriticalKind::Max));
    if setup.weight.sign_changing() {
        out.check("critical_points.min_found", has(fracbubble_core::landscape::CriticalKind::Min));
    }
    Ok(())
}
