use fracbubble_core::bubble::{alpha_ns, BubblePoint};
use fracbubble_core::landscape::CriticalKind;
use fracbubble_core::reduction::{construct_solution, SolveOptions};
use fracbubble_core::regularity::{derive_growth, recursion_audit, run_iteration, AuditReport, GrowthSpec, Inequality, IterationTrace};
use fracbubble_core::{Error, Field64, Grid64};
use serde::Serialize;

use super::{select, ParamsSummary};
use crate::config::{FieldInput, Setup};
use crate::output::{Output, Table};
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum AuditOutcome {
    Audited { report: AuditReport<f64> },
    InsufficientLevels { found: usize, needed: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceSummary {
    pub delta: f64,
    pub theta: f64,
    pub converged: bool,
    pub fitted_c: Option<f64>,
    pub u0_bound: bool,
    pub monotone: bool,
    pub pointwise_monotone: bool,
    pub subset_chain: bool,
    pub phi_bound: bool,
    pub last_u: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityReport {
    pub params: ParamsSummary,
    pub input: FieldInput,
    pub growth: GrowthSpec<f64>,
    pub inequalities: Vec<Inequality>,
    pub trace: TraceSummary,
    pub audit: AuditOutcome,
}

/// The field named by the config.
pub fn input_field(setup: &Setup) -> Result<Field64, CliError> {
    let params = &setup.params;
    let n = params.n();
    let alpha = alpha_ns(params)?;
    match setup.config.sweeps.regularity.input {
        FieldInput::Z0 => {
            let grid = Grid64::from_spec(setup.grid_spec()?)?;
            Ok(BubblePoint::new(params, alpha, 1.0, vec![0.0; n])?.sample(&grid))
        }
        FieldInput::Bubble { mu } => {
            let spec = setup.grid_spec()?;
            let grid = Grid64::with_center(n, &vec![0.0; n], mu, spec.size)?;
            Ok(BubblePoint::new(params, alpha, mu, vec![0.0; n])?.sample(&grid))
        }
        FieldInput::Solution => {
            let size = setup.grid_spec()?.size;
            let sel = select(setup)?;
            let sol = construct_solution(params, &setup.weight, &sel.points, CriticalKind::Max, params.eps(), size, &SolveOptions::default())?;
            Ok(sol.u)
        }
    }
}

pub fn audit(trace: &IterationTrace<f64>, spec: &GrowthSpec<f64>) -> Result<AuditOutcome, CliError> {
    match recursion_audit(trace, spec) {
        Ok(report) => Ok(AuditOutcome::Audited { report }),
        Err(Error::InsufficientLevels { found, needed }) => Ok(AuditOutcome::InsufficientLevels { found, needed }),
        Err(e) => Err(e.into()),
    }
}

pub fn run(setup: &Setup, out: &mut Output) -> Result<(), CliError> {
    let sw = &setup.config.sweeps.regularity;
    let spec = derive_growth(&setup.params, &setup.raw_terms()).map_err(|e| CliError::Config(e.to_string()))?;
    let u = out.time("input", || input_field(setup))?;
    let trace = out.time("iteration", || run_iteration(&u, &spec, sw.delta))?;
    let outcome = audit(&trace, &spec)?;

    let mut t = Table::new(["k", "A_k", "U_k", "measure"]);
    for l in &trace.levels {
        t.push(vec![l.k as f64, l.a_k, l.u_k, l.measure]);
    }
    out.csv("trace.csv", &t)?;
    let inequalities = spec.inequalities();
    for i in &inequalities {
        out.check(format!("growth.{}", i.name), i.holds);
    }
    out.check("trace.monotone", trace.monotone && trace.pointwise_monotone);
    out.check("trace.subset_chain", trace.subset_chain);
    out.check("trace.phi_bound", trace.phi_bound);
    if sw.delta < 1.0 {
        out.check("trace.u0_bound", trace.u0_bound);
    }
    let report = RegularityReport {
        params: ParamsSummary::of(setup),
        input: sw.input.clone(),
        trace: TraceSummary {
            delta: trace.delta,
            theta: trace.theta,
            converged: trace.converged,
            fitted_c: trace.fitted_c,
            u0_bound: trace.u0_bound,
            monotone: trace.monotone,
            pointwise_monotone: trace.pointwise_monotone,
            subset_chain: trace.subset_chain,
            phi_bound: trace.phi_bound,
            last_u: trace.levels.last().map_or(f64::NAN, |l| l.u_k),
        },
        growth: spec,
        inequalities,
        audit: outcome,
    };
    out.json("regularity.json", &report)?;
    Ok(())
}
