use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{SweepGrid, SweepRow};
use crate::bounds::{compute_bound, BoundRequest, Constants, Instance, Theorem};
use crate::error::{Error, Result};
use crate::{exact, mc};

pub const CSV_HEADER: [&str; 11] = [
    "label", "n", "b_n", "delta", "delta_err", "bound_A", "bound_1", "bound_2", "bound_3", "ratio_min",
    "status",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRowResult {
    pub label: String,
    pub n: Option<usize>,
    pub b_n: Option<f64>,
    /// `"exact"` or `"monte_carlo"`.
    pub method: Option<&'static str>,
    pub delta: Option<f64>,
    pub delta_err: Option<f64>,
    pub bound_a: Option<f64>,
    pub bound_1: Option<f64>,
    pub bound_2: Option<f64>,
    pub bound_3: Option<f64>,
    pub ratio_min: Option<f64>,
    /// `ok`, `violation`, or the names of the errors met in this row.
    pub status: String,
}

impl SweepRowResult {
    fn failed(label: &str, e: &Error) -> Self {
        SweepRowResult {
            label: label.into(),
            n: None,
            b_n: None,
            method: None,
            delta: None,
            delta_err: None,
            bound_a: None,
            bound_1: None,
            bound_2: None,
            bound_3: None,
            ratio_min: None,
            status: e.kind().into(),
        }
    }

    pub fn is_violation(&self) -> bool {
        self.status.split(';').any(|s| s == "violation")
    }
}

fn delta_for(inst: &Instance, m: usize, seed: u64, confidence: f64) -> Result<(f64, f64, &'static str)> {
    if inst.y().all_discrete(inst.n()) {
        match exact::exact_delta_n(inst) {
            Ok(d) => return Ok((d, 0.0, "exact")),
            Err(Error::BudgetExceeded { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    let est = mc::estimate_delta(inst, m, seed, confidence)?;
    Ok((est.delta_hat, est.epsilon, "monte_carlo"))
}

fn run_row(row: &SweepRow, grid: &SweepGrid, k: Constants, base: &Path, seed: u64) -> SweepRowResult {
    let inst = match row.instance.build(base) {
        Ok(i) => i,
        Err(e) => return SweepRowResult::failed(&row.label, &e),
    };
    let mut errors: Vec<&'static str> = Vec::new();
    let mut bound = |t: Theorem| -> Option<f64> {
        if !grid.theorems.contains(&t) {
            return None;
        }
        let req = BoundRequest {
            theorem: t,
            g: grid.g,
            delta: grid.delta,
            ..BoundRequest::default()
        };
        match compute_bound(&inst, &req, k) {
            Ok(r) => Some(r.total),
            Err(e) => {
                errors.push(e.kind());
                None
            }
        }
    };
    let (bound_a, bound_1, bound_2, bound_3) = (
        bound(Theorem::A),
        bound(Theorem::One),
        bound(Theorem::Two),
        bound(Theorem::Three),
    );
    let mut out = SweepRowResult {
        label: row.label.clone(),
        n: Some(inst.n()),
        b_n: Some(inst.b_n()),
        method: None,
        delta: None,
        delta_err: None,
        bound_a,
        bound_1,
        bound_2,
        bound_3,
        ratio_min: None,
        status: String::new(),
    };
    match delta_for(&inst, grid.m, row.seed.unwrap_or(seed), grid.confidence) {
        Ok((d, err, method)) => {
            out.delta = Some(d);
            out.delta_err = Some(err);
            out.method = Some(method);
            let min_bound = [bound_a, bound_1, bound_2, bound_3]
                .into_iter()
                .flatten()
                .fold(f64::INFINITY, f64::min);
            if min_bound.is_finite() {
                out.ratio_min = Some(min_bound / d);
                if d - err > min_bound {
                    errors.insert(0, "violation");
                }
            }
        }
        Err(e) => errors.push(e.kind()),
    }
    out.status = if errors.is_empty() { "ok".into() } else { errors.join(";") };
    out
}

/// Evaluate every row in parallel; results keep grid order.
pub fn sweep(grid: &SweepGrid, base: &Path, seed: u64) -> Result<Vec<SweepRowResult>> {
    let k = grid.constants.unwrap_or_default();
    Constants::new(k.a0, k.a)?;
    if !(grid.confidence > 0.0 && grid.confidence < 1.0) || grid.m == 0 {
        return Err(Error::InvalidParameter("sweep needs m >= 1 and confidence in (0, 1)".into()));
    }
    Ok(grid.rows.par_iter().map(|row| run_row(row, grid, k, base, seed)).collect())
}

fn num(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.16e}")).unwrap_or_default()
}

pub fn write_csv<W: Write>(rows: &[SweepRowResult], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    wr.write_record(CSV_HEADER).map_err(io)?;
    for r in rows {
        wr.write_record([
            r.label.clone(),
            r.n.map(|n| n.to_string()).unwrap_or_default(),
            num(r.b_n),
            num(r.delta),
            num(r.delta_err),
            num(r.bound_a),
            num(r.bound_1),
            num(r.bound_2),
            num(r.bound_3),
            num(r.ratio_min),
            r.status.clone(),
        ])
        .map_err(io)?;
    }
    wr.flush()?;
    Ok(())
}
