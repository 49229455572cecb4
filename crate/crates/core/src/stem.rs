//! Stochastic EM driver.

use std::path::Path;

use log::{debug, info, warn};

use crate::data::LinkageData;
use crate::error::{Error, Result};
use crate::gibbs::{collect_stats, ChainConfig};
use crate::ingest::missing_rates;
use crate::io::write_csv;
use crate::kernels::ModelParams;
use crate::mstep::{m_step, MStepConfig};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct StemConfig {
    /// Burn-in iterations.
    pub v0: usize,
    /// Iterations averaged into the estimate.
    pub v1: usize,
    /// Gibbs burn-in sweeps per iteration.
    pub z0: usize,
    /// Gibbs sweeps kept per iteration.
    pub z1: usize,
    pub seed: u64,
    pub phi0: f64,
    pub gamma0: f64,
    /// Initial probability that an unstable value changes over the mean time gap.
    pub change0: f64,
    pub alpha_interval: (f64, f64),
    pub alpha_tolerance: f64,
}

impl Default for StemConfig {
    fn default() -> Self {
        StemConfig {
            v0: 75,
            v1: 25,
            z0: 100,
            z1: 100,
            seed: 0,
            phi0: 0.05,
            gamma0: 0.05,
            change0: 0.05,
            alpha_interval: (-10.0, 5.0),
            alpha_tolerance: 1e-6,
        }
    }
}

impl StemConfig {
    pub fn validate(&self) -> Result<()> {
        if self.v1 == 0 || self.z1 == 0 {
            return Err(Error::Config("v1 and z1 must be at least 1".into()));
        }
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.phi0) || !unit(self.gamma0) || !(self.change0 > 0.0 && self.change0 < 1.0) {
            return Err(Error::Config("initial values must be probabilities".into()));
        }
        Ok(())
    }
}

/// Parameter iterates and mean link counts of a run, one entry per iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterTrace<F> {
    pub params: Vec<ModelParams<F>>,
    pub mean_links: Vec<F>,
}

impl<F> ParameterTrace<F> {
    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult<F> {
    /// Average of the last `v1` iterates, in the caller's file orientation.
    pub theta_hat: ModelParams<F>,
    pub trace: ParameterTrace<F>,
    /// Whether the files were exchanged internally because A was the larger one.
    pub swapped: bool,
}

/// Starting parameters: uniform value distributions, low mistake and link rates, and a
/// hazard giving `change0` probability of change at the mean time gap.
pub fn initial_params<F: Scalar>(data: &LinkageData, cfg: &StemConfig) -> ModelParams<F> {
    let mean_gap = data.mean_time_gap();
    let alpha0 = match mean_gap {
        Some(t) if t > 0.0 => {
            let a = (-(1.0 - cfg.change0).ln() / t).ln();
            a.clamp(cfg.alpha_interval.0, cfg.alpha_interval.1)
        }
        _ => {
            if data.has_unstable() {
                warn!("all registration time gaps are zero; starting the hazard at 0");
            }
            0.0
        }
    };
    ModelParams {
        gamma: F::lit(cfg.gamma0),
        eta: data
            .specs
            .iter()
            .map(|s| vec![F::one() / F::from_count(s.support_size); s.support_size])
            .collect(),
        alpha: data
            .specs
            .iter()
            .map(|s| (!s.stable).then(|| F::lit(alpha0)))
            .collect(),
        phi_mistake: data
            .specs
            .iter()
            .map(|s| F::lit(cfg.phi0.min(s.mistake_bound)))
            .collect(),
        phi_missing_a: missing_rates(&data.a),
        phi_missing_b: missing_rates(&data.b),
    }
}

/// Runs `v0 + v1` Stochastic EM iterations and averages the last `v1` iterates.
pub fn fit<F: Scalar>(data: &LinkageData, cfg: &StemConfig) -> Result<FitResult<F>> {
    cfg.validate()?;
    let swapped = data.n_a() > data.n_b();
    let owned;
    let work = if swapped {
        info!("file A is larger than file B; exchanging them for estimation");
        owned = data.swapped();
        &owned
    } else {
        data
    };
    let mut mcfg = MStepConfig::new(&work.specs);
    mcfg.alpha_interval = cfg.alpha_interval;
    mcfg.alpha_tolerance = cfg.alpha_tolerance;
    mcfg.validate()?;

    let mut theta: ModelParams<F> = initial_params(work, cfg);
    for (k, s) in work.specs.iter().enumerate() {
        if theta.phi_missing_a[k] >= F::one() || theta.phi_missing_b[k] >= F::one() {
            warn!("PIV '{}' is missing everywhere in one file", s.name);
        }
    }
    let total = cfg.v0 + cfg.v1;
    let mut trace = ParameterTrace {
        params: Vec::with_capacity(total),
        mean_links: Vec::with_capacity(total),
    };
    for v in 0..total {
        let chain = ChainConfig {
            burn_in: cfg.z0,
            kept: cfg.z1,
            seed: crate::rng::derive(cfg.seed, &[v as u64]),
        };
        let stats = collect_stats(work, &theta, &chain)?;
        theta = m_step(&stats, &work.specs, &mcfg, &theta)?;
        let links = stats.links_per_sample.iter().map(|&l| F::from_count(l)).sum::<F>()
            / F::from_count(stats.n_samples());
        debug!("iteration {v}: gamma {} mean links {}", theta.gamma, links);
        trace.params.push(theta.clone());
        trace.mean_links.push(links);
    }

    let mut theta_hat = average(&trace.params[cfg.v0..]);
    if swapped {
        theta_hat.swap_files();
        for p in &mut trace.params {
            p.swap_files();
        }
    }
    Ok(FitResult {
        theta_hat,
        trace,
        swapped,
    })
}

/// Coordinate-wise mean of parameter iterates.
pub fn average<F: Scalar>(iterates: &[ModelParams<F>]) -> ModelParams<F> {
    let n = F::from_count(iterates.len());
    let first = &iterates[0];
    let mean = |get: &dyn Fn(&ModelParams<F>) -> F| iterates.iter().map(get).sum::<F>() / n;
    ModelParams {
        gamma: mean(&|p| p.gamma),
        eta: (0..first.eta.len())
            .map(|k| {
                (0..first.eta[k].len())
                    .map(|h| mean(&|p| p.eta[k][h]))
                    .collect()
            })
            .collect(),
        alpha: (0..first.alpha.len())
            .map(|k| first.alpha[k].map(|_| mean(&|p| p.alpha[k].unwrap_or_else(F::zero))))
            .collect(),
        phi_mistake: (0..first.phi_mistake.len())
            .map(|k| mean(&|p| p.phi_mistake[k]))
            .collect(),
        phi_missing_a: first.phi_missing_a.clone(),
        phi_missing_b: first.phi_missing_b.clone(),
    }
}

/// Writes one CSV row per iteration: index, gamma, mistake rates, log hazards, mean links.
pub fn export_trace<F: Scalar>(trace: &ParameterTrace<F>, names: &[String], path: &Path) -> Result<()> {
    let Some(first) = trace.params.first() else {
        return Err(Error::Argument("empty parameter trace".into()));
    };
    let mut header = vec!["iteration".to_string(), "gamma".to_string()];
    header.extend(names.iter().map(|n| format!("phi_{n}")));
    let unstable: Vec<usize> = (0..first.alpha.len()).filter(|&k| first.alpha[k].is_some()).collect();
    header.extend(unstable.iter().map(|&k| format!("alpha_{}", names[k])));
    header.push("mean_links".to_string());
    let header_ref: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = trace.params.iter().zip(&trace.mean_links).enumerate().map(|(v, (p, l))| {
        let mut row = vec![v.to_string(), p.gamma.to_string()];
        row.extend(p.phi_mistake.iter().map(|x| x.to_string()));
        row.extend(unstable.iter().map(|&k| p.alpha[k].unwrap_or_else(F::zero).to_string()));
        row.push(l.to_string());
        row
    });
    write_csv(path, &header_ref, rows)
}
