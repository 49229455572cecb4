//! Parameter updates maximising the Monte-Carlo complete-data log-likelihood, one block at a
//! time.

use log::warn;

use crate::error::{Error, Result};
use crate::gibbs::SufficientStats;
use crate::ingest::PivSpec;
use crate::kernels::ModelParams;
use crate::scalar::{ln_expm1, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct MStepConfig {
    /// Search interval for the log baseline hazard.
    pub alpha_interval: (f64, f64),
    pub alpha_tolerance: f64,
    /// Upper bound of each PIV's mistake probability.
    pub mistake_bounds: Vec<f64>,
}

impl MStepConfig {
    pub fn new(specs: &[PivSpec]) -> Self {
        MStepConfig {
            alpha_interval: (-10.0, 5.0),
            alpha_tolerance: 1e-6,
            mistake_bounds: specs.iter().map(|s| s.mistake_bound).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.alpha_interval;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Config(format!("alpha interval [{lo}, {hi}] is not a finite nonempty range")));
        }
        if !(self.alpha_tolerance > 0.0) {
            return Err(Error::Config("alpha tolerance must be positive".into()));
        }
        if self.mistake_bounds.iter().any(|b| !(0.0..=1.0).contains(b)) {
            return Err(Error::Config("mistake bounds must lie in [0,1]".into()));
        }
        Ok(())
    }
}

/// Mean over samples of the proportion of non-missing registered values that differ from
/// their true value, clamped to `[0, bound]`. Keeps `previous` when nothing was observed.
pub fn update_phi_mistake<F: Scalar>(stats: &SufficientStats<F>, k: usize, bound: f64, previous: F) -> F {
    let props: Vec<F> = stats.mistakes[k]
        .iter()
        .filter(|m| m.observed > 0)
        .map(|m| F::from_count(m.disagreements) / F::from_count(m.observed))
        .collect();
    if props.is_empty() {
        warn!("PIV {k} has no observed values; keeping mistake rate {previous}");
        return previous;
    }
    let mean = props.iter().copied().sum::<F>() / F::from_count(props.len());
    mean.max(F::zero()).min(F::lit(bound))
}

/// Mistake part of the complete-data log-likelihood at `phi`, up to terms free of `phi`.
pub fn phi_objective<F: Scalar>(stats: &SufficientStats<F>, k: usize, phi: F) -> F {
    stats.mistakes[k]
        .iter()
        .map(|m| {
            let d = F::from_count(m.disagreements);
            let agree = F::from_count(m.observed - m.disagreements);
            let term = |n: F, p: F| if n > F::zero() { n * p.ln() } else { F::zero() };
            term(d, phi) + term(agree, F::one() - phi)
        })
        .sum()
}

/// Drift part of the complete-data log-likelihood at log hazard `alpha`:
/// `sum over linked pairs of [disagree * ln(exp(lambda t) - 1) - linked * lambda t]`.
pub fn alpha_objective<F: Scalar>(stats: &SufficientStats<F>, k: usize, alpha: F) -> F {
    let lambda = alpha.exp();
    stats.drift[k]
        .values()
        .map(|d| {
            let lt = lambda * d.elapsed;
            let n = F::from_count(d.agree + d.disagree);
            let dis = if d.disagree > 0 {
                F::from_count(d.disagree) * ln_expm1(lt)
            } else {
                F::zero()
            };
            dis - n * lt
        })
        .sum()
}

/// Maximiser of [`alpha_objective`] over the configured interval by golden-section search.
/// Keeps `previous` when no pair was linked.
pub fn update_alpha<F: Scalar>(
    stats: &SufficientStats<F>,
    k: usize,
    cfg: &MStepConfig,
    previous: F,
    name: &str,
) -> Result<F> {
    let drift = &stats.drift[k];
    if drift.is_empty() {
        warn!("no links for unstable PIV '{name}'; keeping alpha {previous}");
        return Ok(previous);
    }
    if drift.values().any(|d| d.disagree > 0 && !(d.elapsed > F::zero())) {
        return Err(Error::Numeric(format!(
            "hazard of PIV '{name}' is not identifiable: linked pairs with no elapsed time disagree"
        )));
    }
    let f = |a: F| alpha_objective(stats, k, a);
    let (lo, hi) = cfg.alpha_interval;
    Ok(golden_section_max(f, F::lit(lo), F::lit(hi), F::lit(cfg.alpha_tolerance)))
}

fn golden_section_max<F: Scalar>(f: impl Fn(F) -> F, mut lo: F, mut hi: F, tol: F) -> F {
    let inv_phi = F::lit((5f64.sqrt() - 1.0) / 2.0);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    let mid = (lo + hi) / F::lit(2.0);
    // the objective is monotone when the optimum sits on a bound
    [lo, mid, hi]
        .into_iter()
        .fold((mid, f(mid)), |best, x| {
            let v = f(x);
            if v > best.1 { (x, v) } else { best }
        })
        .0
}

/// Pooled latent-value frequencies: the A side of each link and every non-linked record of
/// both files.
/// Lower bound applied to values never counted.
pub const ETA_FLOOR: f64 = 1e-9;

pub fn update_eta<F: Scalar>(stats: &SufficientStats<F>, k: usize, name: &str) -> Result<Vec<F>> {
    let counts: Vec<u64> = stats.linked_values[k]
        .iter()
        .zip(&stats.unlinked_values[k])
        .map(|(a, b)| a + b)
        .collect();
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::Config(format!("no latent values counted for PIV '{name}'")));
    }
    let total = F::lit(total as f64);
    let mut eta: Vec<F> = counts.iter().map(|&c| F::lit(c as f64) / total).collect();
    if counts.contains(&0) {
        // a zero mass makes registered values that need it impossible in the next E-step
        let floor = F::lit(ETA_FLOOR);
        eta.iter_mut().for_each(|e| *e = e.max(floor));
        let sum: F = eta.iter().copied().sum();
        eta.iter_mut().for_each(|e| *e = *e / sum);
    }
    Ok(eta)
}

/// Value-distribution part of the complete-data log-likelihood at `eta`.
pub fn eta_objective<F: Scalar>(stats: &SufficientStats<F>, k: usize, eta: &[F]) -> F {
    stats.linked_values[k]
        .iter()
        .zip(&stats.unlinked_values[k])
        .zip(eta)
        .filter(|((a, b), _)| **a + **b > 0)
        .map(|((a, b), &e)| F::lit((a + b) as f64) * e.ln())
        .sum()
}

/// Mean share of file-A records that are linked.
pub fn update_gamma<F: Scalar>(stats: &SufficientStats<F>) -> F {
    let n = stats.links_per_sample.len();
    if n == 0 || stats.n_a == 0 {
        return F::zero();
    }
    let n_a = F::from_count(stats.n_a);
    stats
        .links_per_sample
        .iter()
        .map(|&l| F::from_count(l) / n_a)
        .sum::<F>()
        / F::from_count(n)
}

/// Linkage-prior part of the complete-data log-likelihood at `gamma`.
pub fn gamma_objective<F: Scalar>(stats: &SufficientStats<F>, gamma: F) -> F {
    stats
        .links_per_sample
        .iter()
        .map(|&l| {
            let linked = F::from_count(l);
            let free = F::from_count(stats.n_a - l);
            let term = |n: F, p: F| if n > F::zero() { n * p.ln() } else { F::zero() };
            term(linked, gamma) + term(free, F::one() - gamma)
        })
        .sum()
}

/// Full M-step. Missing-value rates are carried over from `previous`.
pub fn m_step<F: Scalar>(
    stats: &SufficientStats<F>,
    specs: &[PivSpec],
    cfg: &MStepConfig,
    previous: &ModelParams<F>,
) -> Result<ModelParams<F>> {
    let mut next = previous.clone();
    next.gamma = update_gamma(stats);
    for (k, spec) in specs.iter().enumerate() {
        next.phi_mistake[k] = update_phi_mistake(stats, k, cfg.mistake_bounds[k], previous.phi_mistake[k]);
        next.eta[k] = update_eta(stats, k, &spec.name)?;
        if let Some(prev) = previous.alpha[k] {
            next.alpha[k] = Some(update_alpha(stats, k, cfg, prev, &spec.name)?);
        }
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::{DriftCount, MistakeCount};
    use approx::assert_relative_eq;
    use std::collections::BTreeMap;

    fn empty(n_a: usize, k: usize, n: usize) -> SufficientStats<f64> {
        SufficientStats {
            n_a,
            mistakes: vec![Vec::new(); k],
            linked_values: vec![vec![0; n]; k],
            unlinked_values: vec![vec![0; n]; k],
            drift: vec![BTreeMap::new(); k],
            links_per_sample: Vec::new(),
        }
    }

    fn mc(d: usize, o: usize) -> MistakeCount {
        MistakeCount { disagreements: d, observed: o }
    }

    #[test]
    fn phi_examples() {
        let mut s = empty(2, 1, 2);
        // A: g=(1,0) h=(2,1); B: g=(1) h=(1)
        s.mistakes[0].push(mc(1, 2));
        assert_relative_eq!(update_phi_mistake(&s, 0, 1.0, 0.05), 0.5);
        assert_relative_eq!(update_phi_mistake(&s, 0, 0.1, 0.05), 0.1);
        s.mistakes[0] = vec![mc(0, 4)];
        assert_eq!(update_phi_mistake(&s, 0, 0.1, 0.05), 0.0);
        s.mistakes[0] = vec![mc(2, 10), mc(4, 10)];
        assert_relative_eq!(update_phi_mistake(&s, 0, 1.0, 0.05), 0.3, epsilon = 1e-12);
        s.mistakes[0] = vec![mc(0, 0)];
        assert_eq!(update_phi_mistake(&s, 0, 1.0, 0.07), 0.07);
    }

    #[test]
    fn alpha_closed_form_half_disagreeing() {
        let mut s = empty(10, 1, 2);
        for p in 0..10 {
            s.drift[0].insert((p, p), DriftCount { elapsed: 1.0, agree: 5, disagree: 5 });
        }
        let a = update_alpha(&s, 0, &MStepConfig::new(&[PivSpec::unstable("u", 2)]), 0.0, "u").unwrap();
        assert_relative_eq!(a.exp(), 2f64.ln(), epsilon = 1e-5);
    }

    #[test]
    fn alpha_without_disagreement_hits_lower_bound() {
        let mut s = empty(3, 1, 2);
        s.drift[0].insert((0, 0), DriftCount { elapsed: 2.0, agree: 4, disagree: 0 });
        let cfg = MStepConfig::new(&[PivSpec::unstable("u", 2)]);
        let a = update_alpha(&s, 0, &cfg, 0.0, "u").unwrap();
        assert!((a - cfg.alpha_interval.0).abs() < 1e-5, "{a}");
    }

    #[test]
    fn alpha_zero_gap_disagreement_is_an_error() {
        let mut s = empty(3, 1, 2);
        s.drift[0].insert((0, 0), DriftCount { elapsed: 0.0, agree: 0, disagree: 2 });
        let cfg = MStepConfig::new(&[PivSpec::unstable("u", 2)]);
        let e = update_alpha(&s, 0, &cfg, 0.0, "dyn").unwrap_err();
        assert!(e.to_string().contains("dyn"));
    }

    #[test]
    fn alpha_objective_scale_invariance() {
        let mut s = empty(3, 1, 2);
        s.drift[0].insert((0, 0), DriftCount { elapsed: 1.5, agree: 3, disagree: 1 });
        s.drift[0].insert((1, 2), DriftCount { elapsed: 4.0, agree: 1, disagree: 2 });
        let cfg = MStepConfig::new(&[PivSpec::unstable("u", 2)]);
        let a = update_alpha(&s, 0, &cfg, 0.0, "u").unwrap();
        let mut doubled = s.clone();
        for d in doubled.drift[0].values_mut() {
            d.agree *= 7;
            d.disagree *= 7;
        }
        let b = update_alpha(&doubled, 0, &cfg, 0.0, "u").unwrap();
        assert!((a - b).abs() < 1e-5);
    }

    #[test]
    fn eta_example() {
        let mut s = empty(2, 1, 2);
        // non-linked A (1,2), non-linked B (1), link with h_a = h_b = 1
        s.unlinked_values[0] = vec![2, 1];
        s.linked_values[0] = vec![1, 0];
        assert_eq!(update_eta(&s, 0, "v").unwrap(), vec![0.75, 0.25]);
        s.unlinked_values[0] = vec![0, 4];
        s.linked_values[0] = vec![0, 0];
        let eta = update_eta(&s, 0, "v").unwrap();
        assert_relative_eq!(eta[0], ETA_FLOOR / (1.0 + ETA_FLOOR), epsilon = 1e-20);
        assert_relative_eq!(eta[0] + eta[1], 1.0, epsilon = 1e-15);
        s.unlinked_values[0] = vec![0, 0];
        assert!(matches!(update_eta(&s, 0, "v"), Err(Error::Config(_))));
    }

    #[test]
    fn gamma_examples() {
        let mut s = empty(10, 1, 2);
        assert_eq!(update_gamma(&s), 0.0);
        s.links_per_sample = vec![3, 5];
        assert_relative_eq!(update_gamma(&s), 0.4, epsilon = 1e-12);
        s.links_per_sample = vec![10, 10];
        assert_eq!(update_gamma(&s), 1.0);
    }

    #[test]
    fn golden_section_finds_interior_max() {
        let x = golden_section_max(|x: f64| -(x - 1.234).powi(2), -10.0, 5.0, 1e-8);
        assert!((x - 1.234).abs() < 1e-6);
    }
}
