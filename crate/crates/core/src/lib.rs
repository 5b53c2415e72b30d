//! Inference under partition exchangeability.
//!
//! * [`esf`]: Ewens sampling formula and predictive probabilities.
//! * [`estimation`]: maximum-likelihood fits of the dispersal parameter `ψ`.
//! * [`hypothesis`]: score and likelihood ratio tests.
//! * [`sampling`]: urn-scheme generation of partition-exchangeable data.
//! * [`classify`]: marginal and simultaneous predictive classifiers.
//! * [`experiment`]: classifier convergence study.
//!
//! Numeric code is generic over [`Scalar`] (`f64` or `f32`). The aliases at
//! the crate root fix the common `f64` instantiations.

pub mod classify;
pub mod dataset;
pub mod error;
pub mod esf;
pub mod estimation;
pub mod experiment;
pub mod hypothesis;
pub mod partition;
pub mod sampling;
pub mod scalar;
pub mod special;

pub use classify::{
    classify_marginal, classify_simultaneous, classify_simultaneous_with, marginal_log_score, simultaneous_log_score,
    train, ClassModel, ClassificationResult, Labeling, ScoreRule, SimultaneousOptions, SweepOrder, TrainingModel,
};
pub use dataset::{read_dataset, write_dataset, Dataset, DatasetKind};
pub use error::{Error, Result};
pub use esf::{esf_log_pmf, log_predictive_prob, predictive_prob, Outcome};
pub use estimation::{expected_distinct, fit_psi, fit_psi_pooled, FitStatus, PsiEstimate};
pub use experiment::{run_convergence_experiment, ExperimentReport, ExperimentRow, ExperimentSpec};
pub use hypothesis::{fisher_information, lm_test, lr_test, score_u, TestMethod, TestReport};
pub use partition::{partition_of, Partition, PsiValue, SpeciesCounts, SpeciesId};
pub use sampling::{derive_seed, sample_labeled_dataset, sample_sequence, GeneratedSequence, LabeledRecord, Urn, UrnConfig};
pub use scalar::{CompensatedSum, Scalar};
pub use special::chi_square_sf;

pub type Psi = PsiValue<f64>;
pub type Estimate = PsiEstimate<f64>;
pub type Report = TestReport<f64>;
pub type Model = TrainingModel<f64>;
pub type Classification = ClassificationResult<f64>;

pub type Psi32 = PsiValue<f32>;
pub type Estimate32 = PsiEstimate<f32>;
pub type Report32 = TestReport<f32>;
pub type Model32 = TrainingModel<f32>;
pub type Classification32 = ClassificationResult<f32>;
