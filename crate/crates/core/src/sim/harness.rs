use rayon::prelude::*;

use super::config::SimConfig;
use super::generate::{gen_replicate, load_user_design, Replicate};
use crate::dispatch::Problem;
use crate::error::Result;
use crate::linalg::DesignMatrix;
use crate::linear::Method;
use crate::report::{summarize, ReportRow, SummaryRow, Truth};

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub truth: Truth,
    /// One row per (replicate, estimator), sorted.
    pub rows: Vec<ReportRow>,
    pub summary: Vec<SummaryRow>,
}

impl SimOutput {
    pub fn rows_for(&self, method: Method) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(move |r| r.method == method)
    }

    pub fn summary_for(&self, method: Method, quantity: crate::report::Quantity) -> Option<&SummaryRow> {
        self.summary.iter().find(|s| s.method == method && s.quantity == quantity)
    }
}

fn estimate_all(cfg: &SimConfig, rep: &Replicate, methods: &[Method]) -> Vec<ReportRow> {
    let seed = Some(rep.seed);
    let index = Some(rep.index);
    let problem = Problem::new(rep.x.clone(), rep.y.clone(), rep.seed)
        .and_then(|p| if cfg.m > 0 { p.with_fixed(rep.xf.clone()) } else { Ok(p) })
        .and_then(|p| p.with_model(cfg.response.model()))
        .map(|p| p.with_settings(cfg.settings));
    methods
        .iter()
        .map(|&m| {
            let mut row = match problem.as_ref().map_err(clone_err).and_then(|p| p.run(m)) {
                Ok(report) => ReportRow::from_report(&report, seed, index),
                Err(e) => ReportRow::failure(m, &e, seed, index),
            };
            if !cfg.record_timing {
                row.wall_time_s = 0.0;
            }
            if rep.resampled {
                row.note = Some(match row.note.take() {
                    Some(n) => format!("resampled;{n}"),
                    None => "resampled".into(),
                });
            }
            row
        })
        .collect()
}

fn clone_err(e: &crate::Error) -> crate::Error {
    crate::Error::Input(e.to_string())
}

/// Rows for replicate `r` alone.
pub fn run_replicate(cfg: &SimConfig, r: usize, user: Option<&DesignMatrix>, methods: &[Method]) -> Vec<ReportRow> {
    match gen_replicate(cfg, r, user) {
        Ok(rep) => estimate_all(cfg, &rep, methods),
        Err(e) => {
            let seed = cfg.base_seed.wrapping_add(r as u64);
            methods.iter().map(|&m| ReportRow::failure(m, &e, Some(seed), Some(r))).collect()
        }
    }
}

/// Runs every replicate on the current rayon pool; output does not depend on the pool size.
pub fn run_comparison(cfg: &SimConfig) -> Result<SimOutput> {
    cfg.validate()?;
    let methods = cfg.methods()?;
    let user = load_user_design(cfg)?;
    let mut rows: Vec<ReportRow> = (0..cfg.replicates)
        .into_par_iter()
        .flat_map_iter(|r| run_replicate(cfg, r, user.as_ref(), &methods))
        .collect();
    rows.sort_by_key(ReportRow::sort_key);
    let truth = cfg.truth();
    let summary = summarize(&rows, &truth);
    Ok(SimOutput { truth, rows, summary })
}
