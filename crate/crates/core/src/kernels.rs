//! Probability kernels of the latent-variable model.
//!
//! Values are returned in linear space. The sampler combines them in log space, where
//! products over many PIVs would otherwise underflow.

use crate::error::{Error, Result};
use crate::ingest::{Code, PivSpec, MISSING};
use crate::scalar::Scalar;

/// Model parameters: link proportion, per-PIV value distributions, log baseline hazards of
/// unstable PIVs, and registration-error rates.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<F> {
    /// Probability that a record of the smaller file has a link.
    pub gamma: F,
    /// `eta[k][h - 1]` is the probability of true value `h` for PIV `k`.
    pub eta: Vec<Vec<F>>,
    /// Log baseline hazard, present exactly for unstable PIVs.
    pub alpha: Vec<Option<F>>,
    /// Mistake probability per PIV, shared by both files.
    pub phi_mistake: Vec<F>,
    /// Missing-value rate per PIV in file A; fixed by the data.
    pub phi_missing_a: Vec<F>,
    /// Missing-value rate per PIV in file B; fixed by the data.
    pub phi_missing_b: Vec<F>,
}

impl<F: Scalar> ModelParams<F> {
    pub fn n_pivs(&self) -> usize {
        self.eta.len()
    }

    /// Checks the parameter invariants against `specs`.
    pub fn validate(&self, specs: &[PivSpec]) -> Result<()> {
        let k = specs.len();
        if [
            self.eta.len(),
            self.alpha.len(),
            self.phi_mistake.len(),
            self.phi_missing_a.len(),
            self.phi_missing_b.len(),
        ]
        .iter()
        .any(|&n| n != k)
        {
            return Err(Error::Argument(format!(
                "parameter vectors do not match {k} PIVs"
            )));
        }
        let unit = |x: F| x >= F::zero() && x <= F::one();
        if !unit(self.gamma) {
            return Err(Error::Argument(format!("gamma {} not in [0,1]", self.gamma)));
        }
        let tol = F::lit(1e-6).max(F::epsilon() * F::lit(64.0));
        for (k, spec) in specs.iter().enumerate() {
            let eta = &self.eta[k];
            if eta.len() != spec.support_size {
                return Err(Error::Argument(format!(
                    "eta for '{}' has {} entries, support is {}",
                    spec.name,
                    eta.len(),
                    spec.support_size
                )));
            }
            let total: F = eta.iter().copied().sum();
            if eta.iter().any(|&p| p < F::zero()) || (total - F::one()).abs() > tol {
                return Err(Error::Argument(format!(
                    "eta for '{}' is not a probability vector",
                    spec.name
                )));
            }
            if self.alpha[k].is_some() == spec.stable {
                return Err(Error::Argument(format!(
                    "alpha must be present exactly for unstable PIVs ('{}')",
                    spec.name
                )));
            }
            let bound = F::lit(spec.mistake_bound);
            if !unit(self.phi_mistake[k]) || self.phi_mistake[k] > bound + tol {
                return Err(Error::Argument(format!(
                    "phi_mistake {} for '{}' outside [0, {}]",
                    self.phi_mistake[k], spec.name, spec.mistake_bound
                )));
            }
            if !unit(self.phi_missing_a[k]) || !unit(self.phi_missing_b[k]) {
                return Err(Error::Argument(format!(
                    "missing rates for '{}' outside [0,1]",
                    spec.name
                )));
            }
        }
        Ok(())
    }

    /// Exchanges the roles of the two files.
    pub fn swap_files(&mut self) {
        std::mem::swap(&mut self.phi_missing_a, &mut self.phi_missing_b);
    }

    /// Converts to another scalar type.
    pub fn cast<G: Scalar>(&self) -> ModelParams<G> {
        let c = |x: F| G::lit(x.to_f64_lossy());
        ModelParams {
            gamma: c(self.gamma),
            eta: self.eta.iter().map(|e| e.iter().map(|&x| c(x)).collect()).collect(),
            alpha: self.alpha.iter().map(|a| a.map(c)).collect(),
            phi_mistake: self.phi_mistake.iter().map(|&x| c(x)).collect(),
            phi_missing_a: self.phi_missing_a.iter().map(|&x| c(x)).collect(),
            phi_missing_b: self.phi_missing_b.iter().map(|&x| c(x)).collect(),
        }
    }
}

/// Probability that an unstable value is unchanged after elapsed time `t`:
/// `exp(-exp(alpha) * t)`.
pub fn survival_prob<F: Scalar>(alpha: F, t: F) -> Result<F> {
    if t < F::zero() || t.is_nan() {
        return Err(Error::Argument(format!("negative elapsed time {t}")));
    }
    Ok(survival(alpha, t))
}

#[inline]
pub(crate) fn survival<F: Scalar>(alpha: F, t: F) -> F {
    (-(alpha.exp() * t)).exp()
}

/// Probability of registering `g` (0 = missing) when the true value is `h`.
pub fn obs_given_truth<F: Scalar>(
    support_size: usize,
    g: Code,
    h: Code,
    phi_missing: F,
    phi_mistake: F,
) -> Result<F> {
    if h == MISSING || h as usize > support_size {
        return Err(Error::Argument(format!(
            "true value {h} outside 1..={support_size}"
        )));
    }
    if g as usize > support_size {
        return Err(Error::Argument(format!(
            "registered value {g} outside 0..={support_size}"
        )));
    }
    if support_size == 1 && g != MISSING && g != h {
        return Err(Error::Argument(
            "a mistake is impossible with a single-value support".into(),
        ));
    }
    Ok(obs_weight(support_size, g, h, phi_missing, phi_mistake))
}

#[inline]
pub(crate) fn obs_weight<F: Scalar>(
    support_size: usize,
    g: Code,
    h: Code,
    phi_missing: F,
    phi_mistake: F,
) -> F {
    if g == MISSING {
        phi_missing
    } else if g == h {
        (F::one() - phi_missing) * (F::one() - phi_mistake)
    } else if support_size <= 1 {
        F::zero()
    } else {
        (F::one() - phi_missing) * phi_mistake / F::from_count(support_size - 1)
    }
}

/// Prior probability of true value `h` under `eta_k`.
pub fn truth_prior<F: Scalar>(eta_k: &[F], h: Code) -> Result<F> {
    if h == MISSING || h as usize > eta_k.len() {
        return Err(Error::Argument(format!(
            "true value {h} outside 1..={}",
            eta_k.len()
        )));
    }
    Ok(eta_k[h as usize - 1])
}

/// Joint probability of the true values `(h_a, h_b)` of a linked pair for PIV `k`.
///
/// Stable PIVs put all mass on the diagonal. Unstable PIVs keep the value with probability
/// `S(t)` and otherwise move to one of the other `n_k - 1` values uniformly.
pub fn linked_truth_joint<F: Scalar>(
    spec: &PivSpec,
    k: usize,
    params: &ModelParams<F>,
    h_a: Code,
    h_b: Code,
    t: Option<F>,
) -> Result<F> {
    let eta = &params.eta[k];
    let prior_a = truth_prior(eta, h_a)?;
    truth_prior(eta, h_b)?;
    if spec.stable {
        return Ok(if h_a == h_b { prior_a } else { F::zero() });
    }
    let t = t.ok_or_else(|| {
        Error::Config(format!(
            "unstable PIV '{}' needs a registration time difference",
            spec.name
        ))
    })?;
    let alpha = params.alpha[k].ok_or_else(|| {
        Error::Argument(format!("no hazard parameter for unstable PIV '{}'", spec.name))
    })?;
    let s = survival_prob(alpha, t)?;
    Ok(prior_a * change_weight(spec.support_size, h_a == h_b, s))
}

/// `P(h_b | h_a)` for an unstable PIV given the survival probability `s`.
#[inline]
pub(crate) fn change_weight<F: Scalar>(support_size: usize, same: bool, s: F) -> F {
    if same {
        s
    } else if support_size <= 1 {
        F::zero()
    } else {
        (F::one() - s) / F::from_count(support_size - 1)
    }
}
