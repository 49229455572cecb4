use crate::error::{Error, Result};
use crate::ingest::{PivSpec, RecordTable};
use crate::scalar::Scalar;

/// Two encoded files and the PIV metadata they share, validated for use by the sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkageData {
    pub a: RecordTable,
    pub b: RecordTable,
    pub specs: Vec<PivSpec>,
}

impl LinkageData {
    pub fn new(a: RecordTable, b: RecordTable, specs: Vec<PivSpec>) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::Config("no PIV declared".into()));
        }
        for s in &specs {
            s.validate()?;
        }
        a.check_codes(&specs)?;
        b.check_codes(&specs)?;
        if let Some(s) = specs.iter().find(|s| !s.stable) {
            if a.times().is_none() || b.times().is_none() {
                return Err(Error::Config(format!(
                    "PIV '{}' is unstable but registration times are not available",
                    s.name
                )));
            }
        }
        if a.n_records() == 0 || b.n_records() == 0 {
            return Err(Error::Data("both files need at least one record".into()));
        }
        Ok(LinkageData { a, b, specs })
    }

    pub fn n_a(&self) -> usize {
        self.a.n_records()
    }

    pub fn n_b(&self) -> usize {
        self.b.n_records()
    }

    pub fn n_pivs(&self) -> usize {
        self.specs.len()
    }

    pub fn has_unstable(&self) -> bool {
        self.specs.iter().any(|s| !s.stable)
    }

    /// The same data with the files exchanged.
    pub fn swapped(&self) -> Self {
        LinkageData {
            a: self.b.clone(),
            b: self.a.clone(),
            specs: self.specs.clone(),
        }
    }

    /// Registration time difference `|t_b[j] - t_a[i]|`, when both files carry times.
    #[inline]
    pub fn time_gap<F: Scalar>(&self, i: usize, j: usize) -> Option<F> {
        match (self.a.times(), self.b.times()) {
            (Some(ta), Some(tb)) => Some(F::lit((tb[j] - ta[i]).abs())),
            _ => None,
        }
    }

    /// Mean of `|t_b[j] - t_a[i]|` over all cross-file pairs, computed exactly in
    /// `O(n log n)` with sorted prefix sums.
    pub fn mean_time_gap(&self) -> Option<f64> {
        let (ta, tb) = (self.a.times()?, self.b.times()?);
        let mut sorted_b = tb.to_vec();
        sorted_b.sort_by(f64::total_cmp);
        let mut prefix = Vec::with_capacity(sorted_b.len() + 1);
        prefix.push(0.0);
        for &x in &sorted_b {
            prefix.push(prefix.last().unwrap() + x);
        }
        let total_b = *prefix.last().unwrap();
        let n_b = sorted_b.len();
        let sum: f64 = ta
            .iter()
            .map(|&x| {
                let below = sorted_b.partition_point(|&y| y < x);
                let lo = x * below as f64 - prefix[below];
                let hi = (total_b - prefix[below]) - x * (n_b - below) as f64;
                lo + hi
            })
            .sum();
        Some(sum / (ta.len() * n_b) as f64)
    }
}
