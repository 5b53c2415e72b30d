//! Ewens sampling formula and the Poisson–Dirichlet predictive rule.

use crate::partition::{Partition, PsiValue, SpeciesCounts, SpeciesId};
use crate::scalar::{CompensatedSum, Scalar};
use crate::special::{ln_factorial, ln_gamma};

/// Outcome of the next draw: a specific species or one not yet observed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Species(SpeciesId),
    New,
}

/// `ln Σ_{j=0}^{n−1} ln(ψ + j)`, the log rising factorial `ψ^(n)`.
pub(crate) fn ln_rising_factorial<T: Scalar>(psi: T, n: usize) -> T {
    (0..n)
        .map(|j| (psi + T::of_usize(j)).ln())
        .collect::<CompensatedSum<T>>()
        .value()
}

/// Log-probability of the abundance partition `rho` under the Ewens sampling
/// formula with dispersal `psi`:
///
/// `p(ρ | ψ) = n! / ψ^(n) · Π_t (ψ/t)^{ρ_t} / ρ_t!`
///
/// Computed entirely in log space.
pub fn esf_log_pmf<T: Scalar>(rho: &Partition, psi: PsiValue<T>) -> T {
    let psi = psi.get();
    let ln_psi = psi.ln();
    let mut acc = CompensatedSum::new();
    acc.add(ln_factorial::<T>(rho.n()));
    acc.add(-ln_rising_factorial(psi, rho.n()));
    for (t, count) in rho.iter() {
        let count_t = T::of_usize(count);
        acc.add(count_t * (ln_psi - T::of_usize(t).ln()));
        acc.add(-ln_gamma(count_t + T::one()));
    }
    acc.value()
}

/// Predictive probability of the next draw given `counts`: `n_j/(n+ψ)` for an
/// observed species, `ψ/(n+ψ)` for a new or unobserved one.
pub fn predictive_prob<T: Scalar>(counts: &SpeciesCounts, psi: PsiValue<T>, outcome: Outcome) -> T {
    let psi = psi.get();
    let denom = T::of_usize(counts.n()) + psi;
    match observed_count(counts, outcome) {
        0 => psi / denom,
        c => T::of_usize(c) / denom,
    }
}

/// Natural log of [`predictive_prob`].
pub fn log_predictive_prob<T: Scalar>(counts: &SpeciesCounts, psi: PsiValue<T>, outcome: Outcome) -> T {
    let psi = psi.get();
    let ln_denom = (T::of_usize(counts.n()) + psi).ln();
    match observed_count(counts, outcome) {
        0 => psi.ln() - ln_denom,
        c => T::of_usize(c).ln() - ln_denom,
    }
}

fn observed_count(counts: &SpeciesCounts, outcome: Outcome) -> usize {
    match outcome {
        Outcome::Species(id) => counts.get(id),
        Outcome::New => 0,
    }
}
