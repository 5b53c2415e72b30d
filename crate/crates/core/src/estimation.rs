//! Maximum-likelihood estimation of the dispersal parameter.
//!
//! The MLE solves `Σ_{j=1}^{n} ψ/(ψ+j−1) = k_obs`: the expected number of
//! distinct species equals the observed one. The left side is strictly
//! increasing in `ψ`, so the root is bracketed in `[PSI_MIN, PSI_MAX]` and
//! found by bisection on `ln ψ`. Several samples sharing one `ψ` add their
//! left and right sides.

use std::fmt;

use crate::error::{Error, Result};
use crate::partition::{Partition, PsiValue};
use crate::scalar::{CompensatedSum, Scalar};

/// Lower end of the search bracket, reported for `k_obs = 1` samples.
pub const PSI_MIN: f64 = 1e-10;
/// Upper end of the search bracket, reported for all-distinct samples.
pub const PSI_MAX: f64 = 1e10;
/// Bisection iteration cap.
pub const MAX_ITERATIONS: u32 = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FitStatus {
    Converged,
    /// One species only: the likelihood is maximised as `ψ → 0`.
    DegenerateLow,
    /// Every observation distinct: the likelihood keeps increasing in `ψ`.
    DegenerateHigh,
}

impl FitStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            FitStatus::Converged => "converged",
            FitStatus::DegenerateLow => "degenerate_low",
            FitStatus::DegenerateHigh => "degenerate_high",
        }
    }

    pub fn is_degenerate(self) -> bool {
        self != FitStatus::Converged
    }
}

impl fmt::Display for FitStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Result of a dispersal fit. Degenerate fits carry the bracket end as
/// `psi_hat` so that callers can keep going with a clamped value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiEstimate<T> {
    pub psi_hat: T,
    pub k_obs: usize,
    pub n: usize,
    pub iterations: u32,
    /// `|expected_distinct(psi_hat) − k_obs|`.
    pub residual: T,
    pub status: FitStatus,
}

impl<T: Scalar> PsiEstimate<T> {
    /// The estimate as a usable parameter (boundary value when degenerate).
    pub fn psi(&self) -> PsiValue<T> {
        PsiValue::new(self.psi_hat).expect("estimates stay inside the positive bracket")
    }

    pub fn is_converged(&self) -> bool {
        self.status == FitStatus::Converged
    }
}

/// Expected number of distinct species in a sample of size `n`:
/// `Σ_{j=1}^{n} ψ/(ψ+j−1)`.
pub fn expected_distinct<T: Scalar>(psi: PsiValue<T>, n: usize) -> T {
    expected_distinct_raw(psi.get(), n)
}

fn expected_distinct_raw<T: Scalar>(psi: T, n: usize) -> T {
    if n == 0 {
        return T::zero();
    }
    // first term is exactly one
    let mut acc = CompensatedSum::new();
    acc.add(T::one());
    for j in 1..n {
        acc.add(psi / (psi + T::of_usize(j)));
    }
    acc.value()
}

/// MLE of `ψ` for one sample.
pub fn fit_psi<T: Scalar>(rho: &Partition) -> PsiEstimate<T> {
    solve(&[rho.n()], rho.k_obs())
}

/// MLE of a `ψ` shared by several independent samples.
pub fn fit_psi_pooled<T: Scalar>(samples: &[Partition]) -> Result<PsiEstimate<T>> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let sizes: Vec<usize> = samples.iter().map(Partition::n).collect();
    let k_total = samples.iter().map(Partition::k_obs).sum();
    Ok(solve(&sizes, k_total))
}

fn pooled_expected<T: Scalar>(psi: T, sizes: &[usize]) -> T {
    sizes.iter().fold(T::zero(), |acc, &n| acc + expected_distinct_raw(psi, n))
}

fn solve<T: Scalar>(sizes: &[usize], k_total: usize) -> PsiEstimate<T> {
    let n_total: usize = sizes.iter().sum();
    let k = T::of_usize(k_total);
    let lo_bound = T::of(PSI_MIN);
    let hi_bound = T::of(PSI_MAX);
    let estimate = |psi_hat: T, iterations: u32, status: FitStatus| PsiEstimate {
        psi_hat,
        k_obs: k_total,
        n: n_total,
        iterations,
        residual: (pooled_expected(psi_hat, sizes) - k).abs(),
        status,
    };

    // k = number of samples means one species per sample; k = n means all
    // distinct. Neither has an interior root.
    if k_total <= sizes.len() {
        return estimate(lo_bound, 0, FitStatus::DegenerateLow);
    }
    if k_total >= n_total {
        return estimate(hi_bound, 0, FitStatus::DegenerateHigh);
    }

    // gap(ψ) = E(ψ) − k is strictly increasing; the root needs a sign change.
    let gap = |psi: T| pooled_expected(psi, sizes) - k;
    if gap(lo_bound) >= T::zero() {
        return estimate(lo_bound, 0, FitStatus::DegenerateLow);
    }
    if gap(hi_bound) <= T::zero() {
        // root lies beyond the bracket (near-all-distinct very large samples)
        return estimate(hi_bound, 0, FitStatus::DegenerateHigh);
    }

    let mut lo = lo_bound;
    let mut hi = hi_bound;
    let mut lo_gap = gap(lo);
    let mut hi_gap = gap(hi);
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mid = (lo * hi).sqrt();
        if !(mid > lo && mid < hi) {
            break;
        }
        let g = gap(mid);
        if g == T::zero() {
            return estimate(mid, iterations, FitStatus::Converged);
        }
        if g < T::zero() {
            lo = mid;
            lo_gap = g;
        } else {
            hi = mid;
            hi_gap = g;
        }
    }
    let psi_hat = if lo_gap.abs() <= hi_gap.abs() { lo } else { hi };
    estimate(psi_hat, iterations, FitStatus::Converged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypothesis::score_u;

    fn psi(x: f64) -> PsiValue<f64> {
        PsiValue::new(x).unwrap()
    }

    #[test]
    fn expected_distinct_hand_values() {
        for &p in &[1e-6, 0.3, 1.0, 1e6] {
            assert_eq!(expected_distinct(psi(p), 1), 1.0);
        }
        assert!((expected_distinct(psi(1.0), 3) - 11.0 / 6.0).abs() < 1e-15);
        assert!((expected_distinct(psi(2f64.sqrt()), 3) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn expected_distinct_urn_scale() {
        // ψ = 10, n = 10⁴ gives about 69.6 distinct species
        let e = expected_distinct(psi(10.0), 10_000);
        assert!((e - 69.6).abs() < 0.1, "{e}");
    }

    #[test]
    fn hand_algebra_root() {
        let rho = Partition::from_dense(&[1, 1, 0]).unwrap();
        let est: PsiEstimate<f64> = fit_psi(&rho);
        assert_eq!(est.status, FitStatus::Converged);
        assert!((est.psi_hat - 2f64.sqrt()).abs() < 1e-6);
        assert!(est.residual <= 1e-8);
        assert_eq!((est.k_obs, est.n), (2, 3));
        assert!(est.iterations <= MAX_ITERATIONS);
    }

    #[test]
    fn hand_algebra_root_single_precision() {
        let rho = Partition::from_dense(&[1, 1, 0]).unwrap();
        let est: PsiEstimate<f32> = fit_psi(&rho);
        assert!(est.is_converged());
        assert!((est.psi_hat - 2f32.sqrt()).abs() < 1e-4);
    }

    #[test]
    fn degenerate_samples() {
        let one_species = Partition::from_dense(&[0, 0, 0, 0, 1]).unwrap();
        let est: PsiEstimate<f64> = fit_psi(&one_species);
        assert_eq!(est.status, FitStatus::DegenerateLow);
        assert_eq!(est.psi_hat, PSI_MIN);

        let all_distinct = Partition::from_dense(&[5, 0, 0, 0, 0]).unwrap();
        let est: PsiEstimate<f64> = fit_psi(&all_distinct);
        assert_eq!(est.status, FitStatus::DegenerateHigh);
        assert_eq!(est.psi_hat, PSI_MAX);

        let single = Partition::from_dense(&[1]).unwrap();
        assert!(fit_psi::<f64>(&single).status.is_degenerate());
    }

    #[test]
    fn pooled_reduces_to_single() {
        let rho = Partition::from_dense(&[2, 1, 1, 0, 0, 0, 0]).unwrap();
        let single: PsiEstimate<f64> = fit_psi(&rho);
        let pooled: PsiEstimate<f64> = fit_psi_pooled(std::slice::from_ref(&rho)).unwrap();
        assert_eq!(single, pooled);
    }

    #[test]
    fn pooled_copies_share_the_root() {
        let rho = Partition::from_dense(&[1, 1, 0]).unwrap();
        let single: PsiEstimate<f64> = fit_psi(&rho);
        let pooled: PsiEstimate<f64> = fit_psi_pooled(&[rho.clone(), rho]).unwrap();
        assert!((pooled.psi_hat - 2f64.sqrt()).abs() < 1e-6);
        assert_eq!(pooled.psi_hat, single.psi_hat);
        assert_eq!((pooled.k_obs, pooled.n), (4, 6));
    }

    #[test]
    fn pooled_degeneracy() {
        let singletons = Partition::from_dense(&[3, 0, 0]).unwrap();
        let est: PsiEstimate<f64> = fit_psi_pooled(&[singletons.clone(), singletons]).unwrap();
        assert_eq!(est.status, FitStatus::DegenerateHigh);

        let mono = Partition::from_dense(&[0, 1]).unwrap();
        let est: PsiEstimate<f64> = fit_psi_pooled(&[mono.clone(), mono]).unwrap();
        assert_eq!(est.status, FitStatus::DegenerateLow);

        assert!(fit_psi_pooled::<f64>(&[]).is_err());
    }

    #[test]
    fn bracket_brackets_the_root() {
        // the score changes sign across the initial bracket for every
        // non-degenerate k_obs of a moderately sized sample
        let n = 400;
        for k in 2..n {
            let mut dense = vec![0usize; n];
            dense[0] = k - 1;
            dense[n - k] += 1;
            let rho = Partition::from_dense(&dense).unwrap();
            assert_eq!(rho.k_obs(), k);
            let at_lo = score_u(&rho, psi(PSI_MIN));
            let at_hi = score_u(&rho, psi(PSI_MAX));
            assert!(at_lo > 0.0 && at_hi < 0.0, "k={k}");
            let est: PsiEstimate<f64> = fit_psi(&rho);
            assert!(est.is_converged());
            assert!(est.residual <= 1e-8, "k={k} residual={}", est.residual);
        }
    }

    #[test]
    fn root_is_beyond_bracket_for_huge_nearly_distinct_samples() {
        // n = 10⁶ with a single repeat: the root exceeds PSI_MAX
        let n = 1_000_000;
        let rho = Partition::from_multiplicities([(1, n - 2), (2, 1)]).unwrap();
        let est: PsiEstimate<f64> = fit_psi(&rho);
        assert_eq!(est.status, FitStatus::DegenerateHigh);
    }

    #[test]
    fn status_strings() {
        assert_eq!(FitStatus::Converged.to_string(), "converged");
        assert_eq!(FitStatus::DegenerateLow.to_string(), "degenerate_low");
        assert_eq!(FitStatus::DegenerateHigh.to_string(), "degenerate_high");
    }
}
