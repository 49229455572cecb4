use std::collections::BTreeMap;

use crate::data::LinkageData;
use crate::gibbs::LatentState;
use crate::ingest::MISSING;
use crate::scalar::Scalar;

/// Registration-error counts of one PIV in one kept sample.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MistakeCount {
    /// Non-missing registered values that differ from their true value (both files).
    pub disagreements: usize,
    /// Non-missing registered values (both files).
    pub observed: usize,
}

/// How often a pair was linked across kept samples, and how often its true values of an
/// unstable PIV agreed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftCount<F> {
    pub elapsed: F,
    pub agree: usize,
    pub disagree: usize,
}

/// Counts accumulated over the kept sweeps of a chain; everything the M-step needs.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats<F> {
    pub n_a: usize,
    /// `mistakes[k][z]` for PIV `k` and kept sample `z`.
    pub mistakes: Vec<Vec<MistakeCount>>,
    /// `linked_values[k][h - 1]`: occurrences of true value `h` at the A side of a link,
    /// summed over samples.
    pub linked_values: Vec<Vec<u64>>,
    /// Occurrences of true value `h` among non-linked records of either file.
    pub unlinked_values: Vec<Vec<u64>>,
    /// For unstable PIVs, link occurrences keyed by `(row, column)`; empty for stable PIVs.
    pub drift: Vec<BTreeMap<(usize, usize), DriftCount<F>>>,
    /// Number of links in each kept sample.
    pub links_per_sample: Vec<usize>,
}

impl<F: Scalar> SufficientStats<F> {
    pub fn new(data: &LinkageData) -> Self {
        let k = data.n_pivs();
        SufficientStats {
            n_a: data.n_a(),
            mistakes: vec![Vec::new(); k],
            linked_values: data.specs.iter().map(|s| vec![0; s.support_size]).collect(),
            unlinked_values: data.specs.iter().map(|s| vec![0; s.support_size]).collect(),
            drift: vec![BTreeMap::new(); k],
            links_per_sample: Vec::new(),
        }
    }

    pub fn n_samples(&self) -> usize {
        self.links_per_sample.len()
    }

    /// Adds the counts of one kept state.
    pub fn record(&mut self, data: &LinkageData, state: &LatentState) {
        let n_pivs = data.n_pivs();
        for k in 0..n_pivs {
            let mut mc = MistakeCount::default();
            for (table, side_a) in [(&data.a, true), (&data.b, false)] {
                for r in 0..table.n_records() {
                    let g = table.get(r, k);
                    if g == MISSING {
                        continue;
                    }
                    mc.observed += 1;
                    let h = if side_a { state.h_a(r)[k] } else { state.h_b(r)[k] };
                    if g != h {
                        mc.disagreements += 1;
                    }
                }
            }
            self.mistakes[k].push(mc);
        }

        for i in 0..state.n_a() {
            let h = state.h_a(i);
            let target = if state.link_of_row(i).is_some() {
                &mut self.linked_values
            } else {
                &mut self.unlinked_values
            };
            for k in 0..n_pivs {
                target[k][h[k] as usize - 1] += 1;
            }
        }
        for j in 0..state.n_b() {
            if state.link_of_col(j).is_some() {
                continue;
            }
            let h = state.h_b(j);
            for k in 0..n_pivs {
                self.unlinked_values[k][h[k] as usize - 1] += 1;
            }
        }

        for (k, spec) in data.specs.iter().enumerate() {
            if spec.stable {
                continue;
            }
            for (i, j) in state.links() {
                let elapsed = data.time_gap::<F>(i, j).unwrap_or_else(F::zero);
                let entry = self.drift[k].entry((i, j)).or_insert(DriftCount {
                    elapsed,
                    agree: 0,
                    disagree: 0,
                });
                if state.h_a(i)[k] == state.h_b(j)[k] {
                    entry.agree += 1;
                } else {
                    entry.disagree += 1;
                }
            }
        }
        self.links_per_sample.push(state.n_links());
    }
}
