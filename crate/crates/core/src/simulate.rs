//! Synthetic overlapping files with known links, and controlled extra distortion.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Code, PivSpec, RecordTable, DEFAULT_MISTAKE_BOUND, MISSING};
use crate::rng::{self, purpose, StreamRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_a: usize,
    pub n_b: usize,
    pub n_links: usize,
    pub supports: Vec<usize>,
    pub mistake_rates: Vec<f64>,
    pub missing_rates: Vec<f64>,
    /// PIV whose true value may change between the two registrations.
    pub unstable: Option<usize>,
    pub hazard: f64,
    pub time_range_a: (f64, f64),
    pub time_range_b: (f64, f64),
    /// Latent values are drawn with weight `exp(value_slope * h)`.
    pub value_slope: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            n_a: 800,
            n_b: 1000,
            n_links: 500,
            supports: vec![6, 7, 8, 9, 15],
            mistake_rates: vec![0.02, 0.02, 0.02, 0.02, 0.0],
            missing_rates: vec![0.007; 5],
            unstable: Some(4),
            hazard: 0.28,
            time_range_a: (0.0, 3.0),
            time_range_b: (3.0, 6.0),
            value_slope: 0.25,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let k = self.supports.len();
        let bad = |m: String| Err(Error::Config(m));
        if k == 0 {
            return bad("no PIV supports given".into());
        }
        if self.mistake_rates.len() != k || self.missing_rates.len() != k {
            return bad(format!("rate vectors must have {k} entries"));
        }
        if self.n_links > self.n_a.min(self.n_b) {
            return bad(format!("{} links exceed the smaller file", self.n_links));
        }
        if self.supports.contains(&0) {
            return bad("support sizes must be positive".into());
        }
        if self
            .mistake_rates
            .iter()
            .chain(&self.missing_rates)
            .any(|r| !(0.0..=1.0).contains(r))
        {
            return bad("rates must lie in [0,1]".into());
        }
        if self.unstable.is_some_and(|u| u >= k) {
            return bad("unstable PIV index out of range".into());
        }
        if !(self.hazard >= 0.0) {
            return bad("hazard must be nonnegative".into());
        }
        for (lo, hi) in [self.time_range_a, self.time_range_b] {
            if !(lo <= hi) {
                return bad(format!("empty time range [{lo}, {hi}]"));
            }
        }
        Ok(())
    }

    pub fn piv_names(&self) -> Vec<String> {
        (1..=self.supports.len()).map(|k| format!("piv{k}")).collect()
    }

    /// PIV declarations for fitting this scenario. With `model_instability` the unstable
    /// PIV is declared unstable and mistake-free; otherwise every PIV is stable, the
    /// formerly unstable one with `stable_bound` as its mistake bound.
    pub fn model_specs(&self, model_instability: bool, stable_bound: f64) -> Vec<PivSpec> {
        self.piv_names()
            .into_iter()
            .zip(&self.supports)
            .enumerate()
            .map(|(k, (name, &n))| {
                if self.unstable == Some(k) {
                    if model_instability {
                        PivSpec::unstable(name, n).with_mistake_bound(0.0)
                    } else {
                        PivSpec::stable(name, n).with_mistake_bound(stable_bound)
                    }
                } else {
                    PivSpec::stable(name, n).with_mistake_bound(DEFAULT_MISTAKE_BOUND)
                }
            })
            .collect()
    }
}

/// True links as `(row in A, row in B)`, sorted by row.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GroundTruth {
    pub pairs: Vec<(usize, usize)>,
}

impl GroundTruth {
    pub fn is_partial_bijection(&self) -> bool {
        let mut r = HashSet::new();
        let mut c = HashSet::new();
        self.pairs.iter().all(|&(i, j)| r.insert(i) && c.insert(j))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub a: RecordTable,
    pub b: RecordTable,
    pub truth: GroundTruth,
}

fn draw_value(rng: &mut StreamRng, cdf: &[f64]) -> Code {
    let u: f64 = rng.gen::<f64>() * cdf[cdf.len() - 1];
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1) as Code + 1
}

/// Uniform draw among the `n - 1` codes other than `h`.
fn other_value(rng: &mut StreamRng, n: usize, h: Code) -> Code {
    let x = rng.gen_range(1..n as Code);
    if x >= h {
        x + 1
    } else {
        x
    }
}

fn uniform(rng: &mut StreamRng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

/// Draws two files sharing `n_links` individuals. Latent values follow
/// `P(h) ∝ exp(value_slope * h)`; a linked B record copies its A partner and its unstable
/// value moves to a uniformly chosen other value with probability `1 - exp(-hazard * t)`;
/// each registered value is then blanked at the missing rate or, if kept, replaced by a
/// uniform other value at the mistake rate.
pub fn generate_scenario(cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    let k = cfg.supports.len();
    let cdfs: Vec<Vec<f64>> = cfg
        .supports
        .iter()
        .map(|&n| {
            let mut acc = 0.0;
            (1..=n)
                .map(|h| {
                    acc += (cfg.value_slope * h as f64).exp();
                    acc
                })
                .collect()
        })
        .collect();

    let mut perm = rng::stream(cfg.seed, &[purpose::SIMULATE, 0]);
    let mut rows_a: Vec<usize> = (0..cfg.n_a).collect();
    let mut rows_b: Vec<usize> = (0..cfg.n_b).collect();
    rows_a.shuffle(&mut perm);
    rows_b.shuffle(&mut perm);
    let mut pairs: Vec<(usize, usize)> = rows_a[..cfg.n_links]
        .iter()
        .copied()
        .zip(rows_b[..cfg.n_links].iter().copied())
        .collect();
    pairs.sort_unstable();
    let mut partner_of_b = vec![None; cfg.n_b];
    for &(i, j) in &pairs {
        partner_of_b[j] = Some(i);
    }

    let mut h_a = Vec::with_capacity(cfg.n_a * k);
    let mut t_a = Vec::with_capacity(cfg.n_a);
    for i in 0..cfg.n_a {
        let mut r = rng::stream(cfg.seed, &[purpose::SIMULATE, 1, i as u64]);
        t_a.push(uniform(&mut r, cfg.time_range_a));
        h_a.extend(cdfs.iter().map(|c| draw_value(&mut r, c)));
    }
    let mut h_b = Vec::with_capacity(cfg.n_b * k);
    let mut t_b = Vec::with_capacity(cfg.n_b);
    for (j, partner) in partner_of_b.iter().enumerate() {
        let mut r = rng::stream(cfg.seed, &[purpose::SIMULATE, 2, j as u64]);
        let t = uniform(&mut r, cfg.time_range_b);
        t_b.push(t);
        match *partner {
            None => h_b.extend(cdfs.iter().map(|c| draw_value(&mut r, c))),
            Some(i) => {
                let start = h_b.len();
                h_b.extend_from_slice(&h_a[i * k..(i + 1) * k]);
                if let Some(u) = cfg.unstable {
                    let survive = (-cfg.hazard * (t - t_a[i]).abs()).exp();
                    let n = cfg.supports[u];
                    if n > 1 && r.gen::<f64>() >= survive {
                        h_b[start + u] = other_value(&mut r, n, h_b[start + u]);
                    }
                }
            }
        }
    }

    let register = |h: &[Code], file: u64| -> Vec<Code> {
        h.chunks(k)
            .enumerate()
            .flat_map(|(rec, row)| {
                let mut r = rng::stream(cfg.seed, &[purpose::SIMULATE, 3 + file, rec as u64]);
                row.iter()
                    .enumerate()
                    .map(|(piv, &v)| {
                        let n = cfg.supports[piv];
                        if r.gen::<f64>() < cfg.missing_rates[piv] {
                            MISSING
                        } else if n > 1 && r.gen::<f64>() < cfg.mistake_rates[piv] {
                            other_value(&mut r, n, v)
                        } else {
                            v
                        }
                    })
                    .collect::<Vec<_>>()
            })
            .collect()
    };
    let a = RecordTable::from_flat(cfg.n_a, k, register(&h_a, 0), Some(t_a))?;
    let b = RecordTable::from_flat(cfg.n_b, k, register(&h_b, 1), Some(t_b))?;
    Ok(Scenario {
        a,
        b,
        truth: GroundTruth { pairs },
    })
}

/// Extra distortion applied to file B: each value is blanked with probability
/// `level * (1 - substitution_share)`, and a kept value is replaced by a uniform other
/// value with the probability that makes substitutions a `substitution_share` of `level`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Distortion {
    pub level: f64,
    pub substitution_share: f64,
    pub seed: u64,
}

impl Distortion {
    pub fn new(level: f64, seed: u64) -> Self {
        Distortion {
            level,
            substitution_share: 0.5,
            seed,
        }
    }
}

/// Distorts file B so that, on clean links, [`distortion_level`] rises by about `level`.
/// File A is returned unchanged.
pub fn inject_distortion(
    a: &RecordTable,
    b: &RecordTable,
    supports: &[usize],
    d: &Distortion,
) -> Result<(RecordTable, RecordTable)> {
    if !(0.0..=0.5).contains(&d.level) || !(0.0..=1.0).contains(&d.substitution_share) {
        return Err(Error::Argument(format!("distortion level {} outside [0, 0.5]", d.level)));
    }
    if supports.len() != b.n_pivs() {
        return Err(Error::Argument("one support size per PIV required".into()));
    }
    let blank = d.level * (1.0 - d.substitution_share);
    let substitute = d.level * d.substitution_share / (1.0 - blank);
    let mut out = b.clone();
    if d.level == 0.0 {
        return Ok((a.clone(), out));
    }
    for rec in 0..b.n_records() {
        let mut r = rng::stream(d.seed, &[purpose::DISTORT, rec as u64]);
        for (piv, &n) in supports.iter().enumerate() {
            let g = b.get(rec, piv);
            let (u_blank, u_sub) = (r.gen::<f64>(), r.gen::<f64>());
            if u_blank < blank {
                out.set(rec, piv, MISSING);
            } else if g != MISSING && n > 1 && u_sub < substitute {
                out.set(rec, piv, other_value(&mut r, n, g));
            }
        }
    }
    Ok((a.clone(), out))
}

/// Per-PIV rates over true links: both values present and equal, both present and
/// different, at least one missing.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkAgreement {
    pub agreement: Vec<f64>,
    pub disagreement: Vec<f64>,
    pub missing: Vec<f64>,
}

pub fn link_agreement(a: &RecordTable, b: &RecordTable, truth: &GroundTruth) -> Result<LinkAgreement> {
    if truth.pairs.is_empty() {
        return Err(Error::Argument("no true links".into()));
    }
    let k = a.n_pivs();
    let n = truth.pairs.len() as f64;
    let mut out = LinkAgreement {
        agreement: vec![0.0; k],
        disagreement: vec![0.0; k],
        missing: vec![0.0; k],
    };
    for &(i, j) in &truth.pairs {
        for piv in 0..k {
            let (x, y) = (a.get(i, piv), b.get(j, piv));
            let slot = if x == MISSING || y == MISSING {
                &mut out.missing
            } else if x == y {
                &mut out.agreement
            } else {
                &mut out.disagreement
            };
            slot[piv] += 1.0 / n;
        }
    }
    Ok(out)
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.is_empty() {
        f64::NAN
    } else if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

/// Median disagreement rate plus median missing rate over the PIVs of true links.
pub fn distortion_level(a: &RecordTable, b: &RecordTable, truth: &GroundTruth) -> Result<f64> {
    let r = link_agreement(a, b, truth)?;
    Ok(median(&r.disagreement) + median(&r.missing))
}
