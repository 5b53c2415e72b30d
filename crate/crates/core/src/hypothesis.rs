//! Score (Lagrange multiplier) test for a hypothesised `ψ₀` and likelihood
//! ratio test for a common `ψ` across samples.

use std::fmt;

use crate::error::{Error, Result};
use crate::esf::esf_log_pmf;
use crate::estimation::{fit_psi, fit_psi_pooled, PsiEstimate};
use crate::partition::{Partition, PsiValue};
use crate::scalar::{CompensatedSum, Scalar};
pub use crate::special::chi_square_sf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TestMethod {
    LagrangeMultiplier,
    LikelihoodRatio,
}

impl TestMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            TestMethod::LagrangeMultiplier => "lagrange_multiplier",
            TestMethod::LikelihoodRatio => "likelihood_ratio",
        }
    }
}

impl fmt::Display for TestMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestReport<T> {
    pub statistic: T,
    pub df: usize,
    pub p_value: T,
    pub method: TestMethod,
    /// Per-sample unrestricted estimates (likelihood ratio only).
    pub per_sample_psi: Option<Vec<PsiEstimate<T>>>,
    /// Shared estimate under the null (likelihood ratio only).
    pub pooled_psi: Option<PsiEstimate<T>>,
}

impl<T: Scalar> TestReport<T> {
    pub fn rejects_at(&self, alpha: T) -> bool {
        self.p_value < alpha
    }
}

/// Score `U(ψ₀) = Σ_{i=1}^{n} (ρ_i/ψ₀ − 1/(ψ₀+i−1))`.
pub fn score_u<T: Scalar>(rho: &Partition, psi0: PsiValue<T>) -> T {
    let psi = psi0.get();
    let mut acc = CompensatedSum::new();
    acc.add(T::of_usize(rho.k_obs()) / psi);
    for i in 0..rho.n() {
        acc.add(-(psi + T::of_usize(i)).recip());
    }
    acc.value()
}

/// Fisher information `I(ψ₀) = Σ_{i=1}^{n} (i−1) / (ψ₀ (ψ₀+i−1)²)`.
///
/// Every term is non-negative; the sum is zero only for `n = 1`, which is
/// rejected.
pub fn fisher_information<T: Scalar>(psi0: PsiValue<T>, n: usize) -> Result<T> {
    if n < 2 {
        return Err(Error::ZeroInformation);
    }
    let psi = psi0.get();
    let total = (1..n)
        .map(|j| {
            let shifted = psi + T::of_usize(j);
            T::of_usize(j) / (psi * shifted * shifted)
        })
        .collect::<CompensatedSum<T>>()
        .value();
    Ok(total)
}

/// Lagrange multiplier test of `H₀: ψ = ψ₀`, `S = U²/I ~ χ²₁`.
pub fn lm_test<T: Scalar>(rho: &Partition, psi0: PsiValue<T>) -> Result<TestReport<T>> {
    let info = fisher_information(psi0, rho.n())?;
    let u = score_u(rho, psi0);
    let statistic = u * u / info;
    Ok(TestReport {
        statistic,
        df: 1,
        p_value: chi_square_sf(statistic, 1)?,
        method: TestMethod::LagrangeMultiplier,
        per_sample_psi: None,
        pooled_psi: None,
    })
}

/// Likelihood ratio test of `H₀: ψ₁ = … = ψ_s`,
/// `Λ = −2 (Σ_j ln L(ρ_j|ψ̂_pooled) − Σ_j ln L(ρ_j|ψ̂_j)) ~ χ²_{s−1}`.
pub fn lr_test<T: Scalar>(samples: &[Partition]) -> Result<TestReport<T>> {
    if samples.len() < 2 {
        return Err(Error::Domain(format!(
            "likelihood ratio test needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    let per_sample: Vec<PsiEstimate<T>> = samples.iter().map(fit_psi).collect();
    if let Some(index) = per_sample.iter().position(|e| e.status.is_degenerate()) {
        return Err(Error::DegenerateSample { index: Some(index) });
    }
    let pooled = fit_psi_pooled::<T>(samples)?;
    if pooled.status.is_degenerate() {
        return Err(Error::DegenerateSample { index: None });
    }

    let pooled_psi = pooled.psi();
    let mut restricted = CompensatedSum::new();
    let mut unrestricted = CompensatedSum::new();
    for (rho, est) in samples.iter().zip(&per_sample) {
        restricted.add(esf_log_pmf(rho, pooled_psi));
        unrestricted.add(esf_log_pmf(rho, est.psi()));
    }
    let two = T::of(2.0);
    // the restricted optimum can't beat the unrestricted one; clamp rounding
    let statistic = (two * (unrestricted.value() - restricted.value())).max(T::zero());
    let df = samples.len() - 1;
    Ok(TestReport {
        statistic,
        df,
        p_value: chi_square_sf(statistic, df)?,
        method: TestMethod::LikelihoodRatio,
        per_sample_psi: Some(per_sample),
        pooled_psi: Some(pooled),
    })
}
