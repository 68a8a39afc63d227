//! Absolute and relative increments between two metric reports.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use super::MetricsReport;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct IncrementRow {
    pub metric: &'static str,
    pub k: usize,
    pub base: f64,
    pub fused: f64,
    pub absolute: f64,
    /// Percent change; `None` when `base` is zero.
    pub relative: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Increments {
    pub base_name: String,
    pub fused_name: String,
    pub rows: Vec<IncrementRow>,
}

pub fn increments(base_name: &str, base: &MetricsReport, fused_name: &str, fused: &MetricsReport) -> Result<Increments> {
    if base.task_digest != fused.task_digest || base.n_tasks != fused.n_tasks || base.cutoffs != fused.cutoffs {
        return Err(Error::MismatchedTasks);
    }
    let mut rows = Vec::new();
    for (metric, b, f) in [("HR", &base.hr, &fused.hr), ("NDCG", &base.ndcg, &fused.ndcg)] {
        for (c, &k) in base.cutoffs.iter().enumerate() {
            let absolute = f[c] - b[c];
            rows.push(IncrementRow {
                metric,
                k,
                base: b[c],
                fused: f[c],
                absolute,
                relative: (b[c] != 0.0).then(|| absolute / b[c] * 100.0),
            });
        }
    }
    Ok(Increments {
        base_name: base_name.into(),
        fused_name: fused_name.into(),
        rows,
    })
}

impl Increments {
    /// `base,fused,metric,K,base_value,fused_value,absolute,relative`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("base,fused,metric,K,base_value,fused_value,absolute,relative\n");
        for row in &self.rows {
            let relative = row.relative.map_or_else(|| String::from("n/a"), |r| format!("{r:+.1}%"));
            let _ = writeln!(
                out,
                "{},{},{},{},{:.4},{:.4},{:+.4},{}",
                self.base_name, self.fused_name, row.metric, row.k, row.base, row.fused, row.absolute, relative
            );
        }
        out
    }
}
