//! Posterior link probabilities at fixed parameters and link-set selection.

use std::collections::BTreeMap;
use std::path::Path;

use log::warn;
use rayon::prelude::*;

use crate::data::LinkageData;
use crate::error::{Error, Result};
use crate::gibbs::{run_chain, ChainConfig};
use crate::io::write_csv;
use crate::kernels::ModelParams;
use crate::rng::{self, purpose};
use crate::scalar::Scalar;

pub const HISTOGRAM_BINS: usize = 50;

/// Marginal link probability of every pair linked in at least one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkagePosterior<F> {
    pub probs: BTreeMap<(usize, usize), F>,
    pub n_sim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PosteriorConfig {
    pub n_sim: usize,
    pub z0: usize,
    pub seed: u64,
    /// Independent chains sharing the `n_sim` kept sweeps.
    pub chains: usize,
}

impl Default for PosteriorConfig {
    fn default() -> Self {
        PosteriorConfig {
            n_sim: 1000,
            z0: 100,
            seed: 0,
            chains: 1,
        }
    }
}

/// Selected links with the threshold that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkSet<F> {
    pub pairs: Vec<(usize, usize, F)>,
    pub threshold: F,
    pub estimated_fdr: F,
}

impl<F: Scalar> LinkSet<F> {
    pub fn is_partial_bijection(&self) -> bool {
        let mut rows = std::collections::HashSet::new();
        let mut cols = std::collections::HashSet::new();
        self.pairs.iter().all(|&(i, j, _)| rows.insert(i) && cols.insert(j))
    }
}

/// Runs Gibbs chains at `theta` and averages link indicators over `n_sim` kept sweeps.
/// Files are exchanged internally when A is larger; pair indices always refer to the
/// caller's orientation.
pub fn sample_posterior<F: Scalar>(
    data: &LinkageData,
    theta: &ModelParams<F>,
    cfg: &PosteriorConfig,
) -> Result<LinkagePosterior<F>> {
    if cfg.n_sim == 0 || cfg.chains == 0 {
        return Err(Error::Argument("n_sim and chains must be at least 1".into()));
    }
    let chains = cfg.chains.min(cfg.n_sim);
    let swapped = data.n_a() > data.n_b();
    let (work, params);
    let (work, params) = if swapped {
        work = data.swapped();
        let mut p = theta.clone();
        p.swap_files();
        params = p;
        (&work, &params)
    } else {
        (data, theta)
    };

    let per_chain: Vec<BTreeMap<(usize, usize), usize>> = (0..chains)
        .into_par_iter()
        .map(|c| -> Result<_> {
            let kept = cfg.n_sim / chains + usize::from(c < cfg.n_sim % chains);
            let chain = ChainConfig {
                burn_in: cfg.z0,
                kept,
                seed: rng::derive(cfg.seed, &[purpose::POSTERIOR, c as u64]),
            };
            let mut counts = BTreeMap::new();
            run_chain(work, params, &chain, |s| {
                for pair in s.links() {
                    *counts.entry(pair).or_insert(0usize) += 1;
                }
                Ok(())
            })?;
            Ok(counts)
        })
        .collect::<Result<_>>()?;

    let mut total: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for counts in per_chain {
        for (pair, c) in counts {
            *total.entry(pair).or_insert(0) += c;
        }
    }
    let n = F::from_count(cfg.n_sim);
    let probs = total
        .into_iter()
        .map(|((i, j), c)| {
            let key = if swapped { (j, i) } else { (i, j) };
            (key, F::from_count(c) / n)
        })
        .collect();
    Ok(LinkagePosterior {
        probs,
        n_sim: cfg.n_sim,
    })
}

/// Pairs with probability strictly above `xi`.
pub fn select_by_threshold<F: Scalar>(post: &LinkagePosterior<F>, xi: F) -> LinkSet<F> {
    let pairs: Vec<(usize, usize, F)> = post
        .probs
        .iter()
        .filter(|(_, &p)| p > xi)
        .map(|(&(i, j), &p)| (i, j, p))
        .collect();
    let estimated_fdr = fdr_of(&pairs);
    LinkSet {
        pairs,
        threshold: xi,
        estimated_fdr,
    }
}

fn fdr_of<F: Scalar>(pairs: &[(usize, usize, F)]) -> F {
    if pairs.is_empty() {
        return F::zero();
    }
    let sum: F = pairs.iter().map(|p| p.2).sum();
    (F::one() - sum / F::from_count(pairs.len())).max(F::zero())
}

/// One minus the mean probability of the pairs above `xi`; zero when none are.
pub fn estimated_fdr<F: Scalar>(post: &LinkagePosterior<F>, xi: F) -> F {
    select_by_threshold(post, xi).estimated_fdr
}

/// Smallest threshold of at least one half, among one half and the observed probabilities,
/// whose estimated FDR is below `fdr_max`. Returns an empty set when none qualifies.
pub fn select_by_fdr<F: Scalar>(post: &LinkagePosterior<F>, fdr_max: F) -> Result<LinkSet<F>> {
    if !(fdr_max > F::zero() && fdr_max < F::one()) {
        return Err(Error::Argument(format!("FDR bound {fdr_max} not in (0,1)")));
    }
    let half = F::lit(0.5);
    let mut grid: Vec<F> = std::iter::once(half)
        .chain(post.probs.values().copied().filter(|&p| p >= half))
        .collect();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    grid.dedup();
    for xi in grid {
        let set = select_by_threshold(post, xi);
        if set.pairs.is_empty() {
            break;
        }
        if set.estimated_fdr < fdr_max {
            return Ok(set);
        }
    }
    warn!("no threshold of at least 0.5 keeps the estimated FDR below {fdr_max}");
    Ok(LinkSet {
        pairs: Vec::new(),
        threshold: F::one(),
        estimated_fdr: F::zero(),
    })
}

/// Counts of stored probabilities in equal-width bins on `[0, 1]`; the last bin is closed.
pub fn histogram<F: Scalar>(post: &LinkagePosterior<F>, bins: usize) -> Vec<(f64, f64, usize)> {
    let mut counts = vec![0usize; bins];
    for &p in post.probs.values() {
        let x = p.to_f64_lossy().clamp(0.0, 1.0);
        let b = ((x * bins as f64) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(b, c)| (b as f64 / bins as f64, (b + 1) as f64 / bins as f64, c))
        .collect()
}

pub fn write_histogram<F: Scalar>(post: &LinkagePosterior<F>, path: &Path) -> Result<()> {
    let rows = histogram(post, HISTOGRAM_BINS)
        .into_iter()
        .map(|(l, r, c)| [l.to_string(), r.to_string(), c.to_string()]);
    write_csv(path, &["bin_left", "bin_right", "count"], rows)
}

pub fn write_links<F: Scalar>(set: &LinkSet<F>, path: &Path) -> Result<()> {
    let rows = set
        .pairs
        .iter()
        .map(|(i, j, p)| [i.to_string(), j.to_string(), p.to_string()]);
    write_csv(path, &["row_index_a", "row_index_b", "probability"], rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn post(entries: &[((usize, usize), f64)]) -> LinkagePosterior<f64> {
        LinkagePosterior {
            probs: entries.iter().copied().collect(),
            n_sim: 1000,
        }
    }

    #[test]
    fn threshold_is_strict() {
        let p = post(&[((1, 1), 0.9), ((1, 2), 0.3)]);
        let s = select_by_threshold(&p, 0.5);
        assert_eq!(s.pairs, vec![(1, 1, 0.9)]);
        assert!(select_by_threshold(&p, 1.0).pairs.is_empty());
        assert!(select_by_threshold(&p, 0.9).pairs.is_empty());
    }

    #[test]
    fn fdr_examples() {
        let p = post(&[((0, 0), 0.9), ((1, 1), 0.8), ((2, 2), 0.4)]);
        assert_relative_eq!(estimated_fdr(&p, 0.5), 0.15, epsilon = 1e-12);
        let q = post(&[((0, 0), 1.0), ((1, 1), 1.0)]);
        assert_eq!(estimated_fdr(&q, 0.5), 0.0);
        let r = post(&[((0, 0), 0.7)]);
        assert_relative_eq!(estimated_fdr(&r, 0.5), 0.3, epsilon = 1e-12);
        assert_eq!(estimated_fdr(&r, 0.8), 0.0);
    }

    #[test]
    fn fdr_selection_examples() {
        let p = post(&[((0, 0), 0.95), ((1, 1), 0.9), ((2, 2), 0.55)]);
        // everything above 0.5: 1 - 2.4/3 = 0.2
        let s = select_by_fdr(&p, 0.25).unwrap();
        assert_eq!(s.pairs.len(), 3);
        assert_eq!(s.threshold, 0.5);
        assert_relative_eq!(s.estimated_fdr, 0.2, epsilon = 1e-12);
        assert_eq!(s, select_by_threshold(&p, 0.5));
        let s = select_by_fdr(&p, 0.10).unwrap();
        assert_eq!(s.pairs.len(), 2);
        assert_eq!(s.threshold, 0.55);
        assert_relative_eq!(s.estimated_fdr, 0.075, epsilon = 1e-12);
        let s = select_by_fdr(&p, 0.07).unwrap();
        assert_eq!(s.pairs, vec![(0, 0, 0.95)]);
        assert_eq!(s.threshold, 0.9);
        let s = select_by_fdr(&post(&[((0, 0), 0.6)]), 0.1).unwrap();
        assert!(s.pairs.is_empty());
    }

    #[test]
    fn histogram_bins() {
        let p = post(&[((0, 0), 1.0), ((1, 1), 0.0101), ((2, 2), 0.5)]);
        let h = histogram(&p, 50);
        assert_eq!(h.len(), 50);
        assert_eq!(h[49].2, 1);
        assert_eq!(h[0].2, 1);
        assert_eq!(h[25].2, 1);
        assert_eq!(h.iter().map(|x| x.2).sum::<usize>(), 3);
    }
}
