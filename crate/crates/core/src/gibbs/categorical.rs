//! Inverse-CDF draws from categorical distributions that are a base measure tilted at a
//! few points: `w(l) = base_measure(l) * f(l)` where `f` is constant except at up to a
//! handful of codes. Every conditional of the sampler has this shape, which keeps a draw at
//! `O(log n_k)` instead of materialising `n_k` (or `n_k^2`) weights.

use rand::Rng;

use crate::ingest::{Code, MISSING};
use crate::scalar::Scalar;

/// A factor that equals `generic` everywhere except at code `at` (when `at != 0`).
#[derive(Debug, Clone, Copy)]
pub(crate) struct Factor<F> {
    pub at: Code,
    pub special: F,
    pub generic: F,
}

impl<F: Scalar> Factor<F> {
    pub fn constant(value: F) -> Self {
        Factor {
            at: MISSING,
            special: value,
            generic: value,
        }
    }

    #[inline]
    pub fn eval(&self, l: Code) -> F {
        if self.at != MISSING && l == self.at {
            self.special
        } else {
            self.generic
        }
    }
}

/// Base measure over codes `1..=n`.
pub(crate) enum Measure<'a, F> {
    /// `prefix[l] = eta_1 + .. + eta_l`, `prefix[0] = 0`.
    Eta(&'a [F]),
    Uniform(usize),
}

impl<F: Scalar> Measure<'_, F> {
    #[inline]
    fn n(&self) -> usize {
        match self {
            Measure::Eta(p) => p.len() - 1,
            Measure::Uniform(n) => *n,
        }
    }

    #[inline]
    fn cumulative(&self, l: usize) -> F {
        match self {
            Measure::Eta(p) => p[l],
            Measure::Uniform(_) => F::from_count(l),
        }
    }

    #[inline]
    fn point(&self, l: usize) -> F {
        match self {
            Measure::Eta(p) => p[l] - p[l - 1],
            Measure::Uniform(_) => F::one(),
        }
    }
}

/// Draws a code from `measure(l) * prod(factors(l))`. `None` when the total weight is zero
/// or not finite.
pub(crate) fn draw_tilted<F: Scalar, R: Rng + ?Sized>(
    measure: &Measure<'_, F>,
    factors: &[Factor<F>],
    rng: &mut R,
) -> Option<Code> {
    let n = measure.n();
    let base: F = factors.iter().fold(F::one(), |acc, f| acc * f.generic);

    // distinct special codes in ascending order, with their excess over the base weight
    let mut specials: [(usize, F); 4] = [(0, F::zero()); 4];
    let mut n_special = 0;
    for f in factors {
        let s = f.at as usize;
        if s == 0 || s > n || specials[..n_special].iter().any(|&(x, _)| x == s) {
            continue;
        }
        specials[n_special] = (s, F::zero());
        n_special += 1;
    }
    let specials = &mut specials[..n_special];
    specials.sort_unstable_by_key(|&(s, _)| s);
    for sp in specials.iter_mut() {
        let mult = factors
            .iter()
            .fold(F::one(), |acc, f| acc * f.eval(sp.0 as Code));
        sp.1 = (mult - base) * measure.point(sp.0);
    }

    let cum = |l: usize| -> F {
        let mut c = base * measure.cumulative(l);
        for &(s, excess) in specials.iter() {
            if s > l {
                break;
            }
            c = c + excess;
        }
        c
    };

    let total = cum(n);
    if !(total > F::zero()) || !total.is_finite() {
        return None;
    }
    let x = F::lit(rng.gen::<f64>()) * total;
    // smallest l with cum(l) > x
    let (mut lo, mut hi) = (1usize, n);
    if !(cum(hi) > x) {
        // rounding pushed x onto the total: take the last code with positive weight
        return (1..=n).rev().find(|&l| cum(l) > cum(l - 1)).map(|l| l as Code);
    }
    while lo < hi {
        let mid = (lo + hi) / 2;
        if cum(mid) > x {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Some(lo as Code)
}

/// Prefix sums of a probability vector, for [`Measure::Eta`].
pub(crate) fn prefix_sums<F: Scalar>(p: &[F]) -> Vec<F> {
    let mut out = Vec::with_capacity(p.len() + 1);
    out.push(F::zero());
    let mut acc = F::zero();
    for &x in p {
        acc = acc + x;
        out.push(acc);
    }
    out
}
