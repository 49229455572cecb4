//! Scoring link sets against known links, and the exact-match baseline.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::ingest::{Code, RecordTable};
use crate::io::write_csv;

/// Every cross-file pair whose registered vectors are identical, missing codes included.
/// No one-to-one pruning.
pub fn simplistic_link(a: &RecordTable, b: &RecordTable) -> Vec<(usize, usize)> {
    let mut index: HashMap<&[Code], Vec<usize>> = HashMap::new();
    for (j, row) in b.rows().enumerate() {
        index.entry(row).or_default().push(j);
    }
    let mut out = Vec::new();
    for (i, row) in a.rows().enumerate() {
        if let Some(js) = index.get(row) {
            out.extend(js.iter().map(|&j| (i, j)));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

pub fn confusion(est: &[(usize, usize)], truth: &[(usize, usize)]) -> ConfusionCounts {
    let truth: HashSet<(usize, usize)> = truth.iter().copied().collect();
    let est: HashSet<(usize, usize)> = est.iter().copied().collect();
    let tp = est.intersection(&truth).count();
    ConfusionCounts {
        tp,
        fp: est.len() - tp,
        fn_: truth.len() - tp,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub fdr: f64,
    pub sensitivity: f64,
    pub f1: f64,
    /// Set when all counts are zero and F1 is reported as 0.
    pub degenerate: bool,
}

/// FDR `fp/(tp+fp)`, sensitivity `tp/(tp+fn)`, F1 `2tp/(2tp+fp+fn)`; zero on empty
/// denominators.
pub fn metrics(c: &ConfusionCounts) -> Metrics {
    let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
    Metrics {
        fdr: ratio(c.fp, c.tp + c.fp),
        sensitivity: ratio(c.tp, c.tp + c.fn_),
        f1: ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_),
        degenerate: c.tp + c.fp + c.fn_ == 0,
    }
}

pub fn write_report(c: &ConfusionCounts, m: &Metrics, path: &Path) -> Result<()> {
    write_csv(
        path,
        &["tp", "fp", "fn", "fdr", "sensitivity", "f1"],
        [[
            c.tp.to_string(),
            c.fp.to_string(),
            c.fn_.to_string(),
            m.fdr.to_string(),
            m.sensitivity.to_string(),
            m.f1.to_string(),
        ]],
    )
}

/// Aligned plain-text summary.
pub fn format_report(c: &ConfusionCounts, m: &Metrics) -> String {
    let mut s = String::new();
    for (k, v) in [
        ("TP", c.tp.to_string()),
        ("FP", c.fp.to_string()),
        ("FN", c.fn_.to_string()),
        ("FDR", format!("{:.4}", m.fdr)),
        ("sensitivity", format!("{:.4}", m.sensitivity)),
        ("F1", format!("{:.4}", m.f1)),
    ] {
        let _ = writeln!(s, "{k:<12} {v:>10}");
    }
    s
}
