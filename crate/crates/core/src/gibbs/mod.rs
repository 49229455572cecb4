//! Gibbs sampler over the true values of both files and the linkage between them, at fixed
//! parameters.

mod categorical;
mod state;
mod stats;

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;

use crate::data::LinkageData;
use crate::error::{Error, Result};
use crate::ingest::{Code, PivSpec, MISSING};
use crate::kernels::{change_weight, linked_truth_joint, obs_weight, ModelParams};
use crate::rng::{self, purpose};
use crate::scalar::{ln_expm1, Scalar};

use categorical::{draw_tilted, prefix_sums, Factor, Measure};
pub use state::LatentState;
pub use stats::{DriftCount, MistakeCount, SufficientStats};

/// Floor applied to `1 - gamma` in the link odds.
pub const ONE_MINUS_GAMMA_FLOOR: f64 = 1e-12;

/// Which file a record belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum File {
    A,
    B,
}

/// Sweep counts and the stream key of one chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainConfig {
    pub burn_in: usize,
    pub kept: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy)]
struct ObsConst<F> {
    missing: F,
    matched: F,
    mismatched: F,
}

impl<F: Scalar> ObsConst<F> {
    fn new(support_size: usize, phi_missing: F, phi_mistake: F) -> Self {
        ObsConst {
            missing: phi_missing,
            matched: obs_weight(support_size, 1, 1, phi_missing, phi_mistake),
            mismatched: obs_weight(support_size, 1, 2, phi_missing, phi_mistake),
        }
    }

    fn factor(&self, g: Code) -> Factor<F> {
        if g == MISSING {
            Factor::constant(self.missing)
        } else {
            Factor {
                at: g,
                special: self.matched,
                generic: self.mismatched,
            }
        }
    }
}

struct PivTables<F> {
    n: usize,
    stable: bool,
    eta_prefix: Vec<F>,
    log_eta: Vec<F>,
    obs_a: ObsConst<F>,
    obs_b: ObsConst<F>,
    /// `exp(alpha)` for unstable PIVs.
    hazard: Option<F>,
    log_n_minus_1: F,
}

/// Parameter-dependent lookup tables shared by all updates of a chain.
pub struct Sampler<'d, F> {
    data: &'d LinkageData,
    pivs: Vec<PivTables<F>>,
    stable_idx: Vec<usize>,
    log_prior_odds: F,
}

impl<'d, F: Scalar> Sampler<'d, F> {
    pub fn new(data: &'d LinkageData, params: &ModelParams<F>) -> Result<Self> {
        params.validate(&data.specs)?;
        let pivs = data
            .specs
            .iter()
            .enumerate()
            .map(|(k, s)| PivTables {
                n: s.support_size,
                stable: s.stable,
                eta_prefix: prefix_sums(&params.eta[k]),
                log_eta: params.eta[k].iter().map(|e| e.ln()).collect(),
                obs_a: ObsConst::new(s.support_size, params.phi_missing_a[k], params.phi_mistake[k]),
                obs_b: ObsConst::new(s.support_size, params.phi_missing_b[k], params.phi_mistake[k]),
                hazard: params.alpha[k].map(|a| a.exp()),
                log_n_minus_1: F::from_count(s.support_size.saturating_sub(1).max(1)).ln(),
            })
            .collect();
        let floor = F::lit(ONE_MINUS_GAMMA_FLOOR);
        Ok(Sampler {
            data,
            pivs,
            stable_idx: (0..data.n_pivs()).filter(|&k| data.specs[k].stable).collect(),
            log_prior_odds: params.gamma.ln() - (F::one() - params.gamma).max(floor).ln(),
        })
    }

    fn obs(&self, k: usize, file: File) -> &ObsConst<F> {
        match file {
            File::A => &self.pivs[k].obs_a,
            File::B => &self.pivs[k].obs_b,
        }
    }

    fn exhausted(&self, k: usize, what: &str) -> Error {
        Error::Numeric(format!(
            "all weights vanish when sampling {what} of PIV '{}'",
            self.data.specs[k].name
        ))
    }

    /// Draws the true value of a non-linked record for PIV `k` given registered value `g`.
    pub fn draw_nonlinked<R: Rng + ?Sized>(
        &self,
        k: usize,
        g: Code,
        file: File,
        rng: &mut R,
    ) -> Result<Code> {
        let t = &self.pivs[k];
        draw_tilted(&Measure::Eta(&t.eta_prefix), &[self.obs(k, file).factor(g)], rng)
            .ok_or_else(|| self.exhausted(k, "a true value"))
    }

    /// Draws `(h_a, h_b)` of a linked pair for PIV `k`. `t` is required for unstable PIVs.
    pub fn draw_linked<R: Rng + ?Sized>(
        &self,
        k: usize,
        g_a: Code,
        g_b: Code,
        t: Option<F>,
        rng: &mut R,
    ) -> Result<(Code, Code)> {
        let p = &self.pivs[k];
        let fa = p.obs_a.factor(g_a);
        let fb = p.obs_b.factor(g_b);
        let eta = Measure::Eta(&p.eta_prefix);
        let Some(hazard) = p.hazard else {
            let h = draw_tilted(&eta, &[fa, fb], rng)
                .ok_or_else(|| self.exhausted(k, "linked true values"))?;
            return Ok((h, h));
        };
        let t = t.ok_or_else(|| {
            Error::Config(format!(
                "unstable PIV '{}' needs registration times",
                self.data.specs[k].name
            ))
        })?;
        let s = (-(hazard * t)).exp();
        let c = change_weight(p.n, false, s);
        // h_a from its marginal, summing the change kernel against obs_b over h_b
        let total_b = fb.special + F::from_count(p.n - 1) * fb.generic;
        let (total_b, fb_at) = if g_b == MISSING {
            (F::from_count(p.n) * fb.generic, MISSING)
        } else {
            (total_b, g_b)
        };
        let bracket = Factor {
            at: fb_at,
            special: c * total_b + (s - c) * fb.special,
            generic: c * total_b + (s - c) * fb.generic,
        };
        let h_a = draw_tilted(&eta, &[fa, bracket], rng)
            .ok_or_else(|| self.exhausted(k, "linked true values"))?;
        let stay = Factor {
            at: h_a,
            special: s,
            generic: c,
        };
        let h_b = draw_tilted(&Measure::Uniform(p.n), &[fb, stay], rng)
            .ok_or_else(|| self.exhausted(k, "linked true values"))?;
        Ok((h_a, h_b))
    }

    /// Log odds of `Delta_ij = 1` against 0 given true values of the two records, the time
    /// gap, and `m`, the number of links other than `(i, j)`. Stable agreement and the
    /// one-to-one constraint are the caller's responsibility.
    fn log_odds(&self, h_a: &[Code], h_b: &[Code], t: Option<F>, m: usize) -> F {
        let mut lo = self.log_prior_odds - F::from_count(self.data.n_b() - m).ln();
        for (k, p) in self.pivs.iter().enumerate() {
            let (a, b) = (h_a[k], h_b[k]);
            let log_eta_b = p.log_eta[b as usize - 1];
            if p.stable {
                lo = lo - log_eta_b;
                continue;
            }
            let lt = p.hazard.unwrap_or_else(F::zero) * t.unwrap_or_else(F::zero);
            lo = lo - log_eta_b
                + if a == b {
                    -lt
                } else {
                    ln_expm1(lt) - lt - p.log_n_minus_1
                };
        }
        lo
    }

    fn stable_match(&self, h_a: &[Code], h_b: &[Code]) -> bool {
        self.stable_idx.iter().all(|&k| h_a[k] == h_b[k])
    }

    /// Current conditional probability that `Delta_ij = 1`.
    pub fn link_probability(&self, state: &LatentState, i: usize, j: usize) -> F {
        let row = state.link_of_row(i);
        let col = state.link_of_col(j);
        if row.is_some_and(|x| x != j) || col.is_some_and(|x| x != i) {
            return F::zero();
        }
        let (h_a, h_b) = (state.h_a(i), state.h_b(j));
        if !self.stable_match(h_a, h_b) {
            return F::zero();
        }
        let m = state.n_links() - usize::from(row == Some(j));
        sigmoid(self.log_odds(h_a, h_b, self.data.time_gap(i, j), m))
    }

    /// Resamples `Delta_ij`; returns whether the pair is linked afterwards.
    pub fn resample_cell<R: Rng + ?Sized>(
        &self,
        state: &mut LatentState,
        i: usize,
        j: usize,
        rng: &mut R,
    ) -> bool {
        let p = self.link_probability(state, i, j);
        if p <= F::zero() {
            return false;
        }
        let linked = state.link_of_row(i) == Some(j);
        let draw = F::lit(rng.gen::<f64>()) < p;
        match (linked, draw) {
            (false, true) => state.link(i, j),
            (true, false) => state.unlink_row(i),
            _ => {}
        }
        draw
    }

    /// Initial state: registered values where present, missing values drawn from `eta`,
    /// no links.
    pub fn init_state(&self, seed: u64) -> LatentState {
        let k = self.data.n_pivs();
        let fill = |table: &crate::ingest::RecordTable, file: u64| -> Vec<Code> {
            let mut h = Vec::with_capacity(table.n_records() * k);
            for (r, row) in table.rows().enumerate() {
                let mut stream: Option<rng::StreamRng> = None;
                for (piv, &g) in row.iter().enumerate() {
                    if g != MISSING {
                        h.push(g);
                        continue;
                    }
                    let s = stream
                        .get_or_insert_with(|| rng::stream(seed, &[purpose::INIT, file, r as u64]));
                    let p = &self.pivs[piv];
                    // uniform over the support when eta has no mass
                    let code = draw_tilted(&Measure::Eta(&p.eta_prefix), &[Factor::constant(F::one())], s)
                        .unwrap_or_else(|| s.gen_range(1..=p.n as Code));
                    h.push(code);
                }
            }
            h
        };
        LatentState::unlinked(k, fill(&self.data.a, 0), fill(&self.data.b, 1))
    }

    fn resample_nonlinked_file(&self, state: &mut LatentState, file: File, key: u64) -> Result<()> {
        let k = self.data.n_pivs();
        let (table, tag, file_a) = match file {
            File::A => (&self.data.a, purpose::TRUTH_A, true),
            File::B => (&self.data.b, purpose::TRUTH_B, false),
        };
        let (truths, links) = state.truths_with_links_mut(file_a);
        truths
            .par_chunks_mut(k)
            .zip(links.par_iter())
            .enumerate()
            .with_min_len(64)
            .try_for_each(|(r, (h, link))| -> Result<()> {
                if link.is_some() {
                    return Ok(());
                }
                let mut s = rng::stream(key, &[tag, r as u64]);
                for (piv, (slot, &g)) in h.iter_mut().zip(table.row(r)).enumerate() {
                    *slot = self.draw_nonlinked(piv, g, file, &mut s)?;
                }
                Ok(())
            })
    }

    fn resample_linked_pairs(&self, state: &mut LatentState, key: u64) -> Result<()> {
        let pairs: Vec<(usize, usize)> = state.links().collect();
        for (i, j) in pairs {
            let mut s = rng::stream(key, &[purpose::TRUTH_LINKED, i as u64]);
            let t = self.data.time_gap::<F>(i, j);
            let (ga, gb) = (self.data.a.row(i), self.data.b.row(j));
            let (ha, hb) = state.split_truths_mut(i, j);
            for piv in 0..ga.len() {
                let (x, y) = self.draw_linked(piv, ga[piv], gb[piv], t, &mut s)?;
                ha[piv] = x;
                hb[piv] = y;
            }
        }
        Ok(())
    }

    fn resample_linkage(&self, state: &mut LatentState, key: u64) {
        let n_b = state.n_b();
        let sig_len = self.stable_idx.len();
        let mut signatures = Vec::with_capacity(n_b * sig_len);
        for j in 0..n_b {
            let h = state.h_b(j);
            signatures.extend(self.stable_idx.iter().map(|&k| h[k]));
        }
        let mut blocks: HashMap<&[Code], Vec<usize>> = HashMap::new();
        for j in 0..n_b {
            blocks
                .entry(&signatures[j * sig_len..(j + 1) * sig_len])
                .or_default()
                .push(j);
        }
        let mut sig_a = Vec::with_capacity(sig_len);
        for i in 0..state.n_a() {
            sig_a.clear();
            let h = state.h_a(i);
            sig_a.extend(self.stable_idx.iter().map(|&k| h[k]));
            let Some(block) = blocks.get(sig_a.as_slice()) else {
                continue;
            };
            let mut s = rng::stream(key, &[purpose::LINKAGE, i as u64]);
            for &j in block {
                self.resample_cell(state, i, j, &mut s);
            }
        }
    }

    /// One full sweep: non-linked truths of both files, linked-pair truths, then every
    /// candidate linkage cell in row-major order.
    pub fn sweep(&self, state: &mut LatentState, seed: u64, sweep: usize) -> Result<()> {
        let key = rng::derive(seed, &[sweep as u64]);
        self.resample_nonlinked_file(state, File::A, key)?;
        self.resample_nonlinked_file(state, File::B, key)?;
        self.resample_linked_pairs(state, key)?;
        self.resample_linkage(state, key);
        Ok(())
    }
}

#[inline]
fn sigmoid<F: Scalar>(x: F) -> F {
    if x.is_nan() {
        F::zero()
    } else if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

/// Initial latent state for a chain.
pub fn init_state<F: Scalar>(
    data: &LinkageData,
    params: &ModelParams<F>,
    seed: u64,
) -> Result<LatentState> {
    Ok(Sampler::new(data, params)?.init_state(seed))
}

/// Normalised conditional distribution of a non-linked record's true value for one PIV.
pub fn nonlinked_truth_distribution<F: Scalar>(
    spec: &PivSpec,
    g: Code,
    eta_k: &[F],
    phi_missing: F,
    phi_mistake: F,
) -> Result<Vec<F>> {
    let w: Vec<F> = (1..=spec.support_size as Code)
        .map(|h| obs_weight(spec.support_size, g, h, phi_missing, phi_mistake) * eta_k[h as usize - 1])
        .collect();
    normalise(w, &spec.name)
}

/// Normalised joint distribution `[h_a - 1][h_b - 1]` of a linked pair's true values for
/// PIV `k`.
pub fn linked_truth_distribution<F: Scalar>(
    spec: &PivSpec,
    k: usize,
    params: &ModelParams<F>,
    g_a: Code,
    g_b: Code,
    t: Option<F>,
) -> Result<Vec<Vec<F>>> {
    let n = spec.support_size;
    let mut w = Vec::with_capacity(n * n);
    for ha in 1..=n as Code {
        for hb in 1..=n as Code {
            let joint = linked_truth_joint(spec, k, params, ha, hb, t)?;
            w.push(
                joint
                    * obs_weight(n, g_a, ha, params.phi_missing_a[k], params.phi_mistake[k])
                    * obs_weight(n, g_b, hb, params.phi_missing_b[k], params.phi_mistake[k]),
            );
        }
    }
    Ok(normalise(w, &spec.name)?.chunks(n).map(<[F]>::to_vec).collect())
}

fn normalise<F: Scalar>(mut w: Vec<F>, name: &str) -> Result<Vec<F>> {
    let total: F = w.iter().copied().sum();
    if !(total > F::zero()) || !total.is_finite() {
        return Err(Error::Numeric(format!("all weights vanish for PIV '{name}'")));
    }
    w.iter_mut().for_each(|x| *x = *x / total);
    Ok(w)
}

/// Draws new true values for a non-linked record with registered values `g`.
pub fn resample_truth_nonlinked<F: Scalar, R: Rng + ?Sized>(
    data: &LinkageData,
    params: &ModelParams<F>,
    g: &[Code],
    file: File,
    rng: &mut R,
) -> Result<Vec<Code>> {
    let s = Sampler::new(data, params)?;
    g.iter()
        .enumerate()
        .map(|(k, &x)| s.draw_nonlinked(k, x, file, rng))
        .collect()
}

/// Draws new true values `(h_a, h_b)` for a linked pair.
pub fn resample_truth_linked<F: Scalar, R: Rng + ?Sized>(
    data: &LinkageData,
    params: &ModelParams<F>,
    g_a: &[Code],
    g_b: &[Code],
    t: Option<F>,
    rng: &mut R,
) -> Result<(Vec<Code>, Vec<Code>)> {
    let s = Sampler::new(data, params)?;
    let mut out = (Vec::with_capacity(g_a.len()), Vec::with_capacity(g_a.len()));
    for k in 0..g_a.len() {
        let (x, y) = s.draw_linked(k, g_a[k], g_b[k], t, rng)?;
        out.0.push(x);
        out.1.push(y);
    }
    Ok(out)
}

/// Conditional probability that `Delta_ij = 1` in `state`.
pub fn link_probability<F: Scalar>(
    data: &LinkageData,
    params: &ModelParams<F>,
    state: &LatentState,
    i: usize,
    j: usize,
) -> Result<F> {
    Ok(Sampler::new(data, params)?.link_probability(state, i, j))
}

/// Resamples a single linkage cell in place.
pub fn resample_linkage_cell<F: Scalar, R: Rng + ?Sized>(
    data: &LinkageData,
    params: &ModelParams<F>,
    state: &mut LatentState,
    i: usize,
    j: usize,
    rng: &mut R,
) -> Result<bool> {
    Ok(Sampler::new(data, params)?.resample_cell(state, i, j, rng))
}

/// Runs `burn_in + kept` sweeps from a fresh initial state, handing each kept state to
/// `observer`. Returns the final state.
pub fn run_chain<F: Scalar>(
    data: &LinkageData,
    params: &ModelParams<F>,
    cfg: &ChainConfig,
    mut observer: impl FnMut(&LatentState) -> Result<()>,
) -> Result<LatentState> {
    if cfg.kept == 0 {
        return Err(Error::Argument("a chain needs at least one kept sweep".into()));
    }
    let sampler = Sampler::new(data, params)?;
    let mut state = sampler.init_state(cfg.seed);
    for sweep in 0..cfg.burn_in + cfg.kept {
        sampler.sweep(&mut state, cfg.seed, sweep)?;
        if cfg!(debug_assertions) {
            state.check_invariants(&data.specs)?;
        }
        if sweep >= cfg.burn_in {
            observer(&state)?;
        }
    }
    state.check_invariants(&data.specs)?;
    Ok(state)
}

/// Runs a chain and accumulates the M-step counts over its kept sweeps.
pub fn collect_stats<F: Scalar>(
    data: &LinkageData,
    params: &ModelParams<F>,
    cfg: &ChainConfig,
) -> Result<SufficientStats<F>> {
    let mut stats = SufficientStats::new(data);
    run_chain(data, params, cfg, |s| {
        stats.record(data, s);
        Ok(())
    })?;
    Ok(stats)
}
