//! Convergence study of the marginal and simultaneous classifiers as the
//! training set grows.
//!
//! Replicate `r` draws its seed as `derive_seed(master_seed, r)`. Within a
//! replicate, class `c` owns a training pool from an urn seeded with
//! `derive_seed(rep_seed, 2c)` and a fixed test set from an independent urn
//! seeded with `derive_seed(rep_seed, 2c + 1)`. Every training size uses a
//! prefix of the same pools, so larger sizes extend smaller ones.
//!
//! Training and test sizes are totals, split evenly across classes with any
//! remainder going to the lowest class ids.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::classify::{classify_marginal, classify_simultaneous_with, ClassModel, SimultaneousOptions, TrainingModel};
use crate::error::{Error, Result};
use crate::partition::{PsiValue, SpeciesCounts, SpeciesId};
use crate::sampling::{derive_seed, Urn};

pub const DEFAULT_POOL_SIZE: usize = 200_000;
pub const DEFAULT_MEMORY_CAP: u64 = 4 << 30;

// rough per-draw footprint: pool value, test value, count-table entry
const BYTES_PER_DRAW: u64 = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub psis: Vec<f64>,
    /// Total training sizes, strictly increasing.
    pub training_sizes: Vec<usize>,
    /// Total test size.
    pub test_size: usize,
    pub replicates: usize,
    pub master_seed: u64,
    /// Total size of the training pool each replicate draws.
    pub pool_size: usize,
    pub memory_cap: u64,
    pub options: SimultaneousOptions,
}

impl ExperimentSpec {
    pub fn new(psis: Vec<f64>, training_sizes: Vec<usize>, test_size: usize, replicates: usize, master_seed: u64) -> Self {
        Self {
            psis,
            training_sizes,
            test_size,
            replicates,
            master_seed,
            pool_size: DEFAULT_POOL_SIZE,
            memory_cap: DEFAULT_MEMORY_CAP,
            options: SimultaneousOptions::default(),
        }
    }

    pub fn k(&self) -> usize {
        self.psis.len()
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidExperiment(msg));
        if self.k() < 2 {
            return invalid(format!("at least 2 classes are required, got {}", self.k()));
        }
        for &p in &self.psis {
            PsiValue::new(p)?;
        }
        if self.training_sizes.is_empty() {
            return invalid("no training sizes given".into());
        }
        if self.training_sizes.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("training sizes must be strictly increasing".into());
        }
        if self.training_sizes[0] < self.k() {
            return invalid(format!("training size {} leaves a class empty", self.training_sizes[0]));
        }
        let largest = *self.training_sizes.last().unwrap_or(&0);
        if largest > self.pool_size {
            return invalid(format!(
                "training size {largest} exceeds the pool size {}; raise the pool size",
                self.pool_size
            ));
        }
        if self.test_size == 0 {
            return invalid("test size must be at least 1".into());
        }
        if self.replicates == 0 {
            return invalid("replicates must be at least 1".into());
        }
        let needed = self.estimated_memory();
        if needed > self.memory_cap {
            return Err(Error::ResourceLimit {
                needed,
                cap: self.memory_cap,
            });
        }
        Ok(())
    }

    /// Upper estimate of peak memory with every worker thread busy.
    pub fn estimated_memory(&self) -> u64 {
        let concurrent = self.replicates.min(rayon::current_num_threads()).max(1) as u64;
        let per_replicate = (self.pool_size as u64 + self.test_size as u64).saturating_mul(BYTES_PER_DRAW);
        concurrent.saturating_mul(per_replicate)
    }
}

/// Splits `total` into `k` near-equal parts, larger parts first.
pub fn split_evenly(total: usize, k: usize) -> Vec<usize> {
    (0..k).map(|c| total / k + usize::from(c < total % k)).collect()
}

/// Outcome of one replicate at one training size.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRow {
    pub replicate: usize,
    pub seed: u64,
    pub m: usize,
    pub err_marginal: f64,
    pub err_simultaneous: f64,
    pub disagreement: f64,
    pub sweeps: usize,
    pub converged: bool,
    pub degenerate_classes: usize,
}

/// Replicate means and sample standard deviations at one training size.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub m: usize,
    pub err_marginal: f64,
    pub err_simultaneous: f64,
    pub disagreement: f64,
    pub sd_marginal: f64,
    pub sd_simultaneous: f64,
    pub sd_disagreement: f64,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub spec: ExperimentSpec,
    pub rows: Vec<ExperimentRow>,
    pub raw: Vec<ReplicateRow>,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn run_replicate(spec: &ExperimentSpec, replicate: usize) -> Result<Vec<ReplicateRow>> {
    let k = spec.k();
    let seed = derive_seed(spec.master_seed, replicate as u64);
    let pool_split = split_evenly(spec.pool_size, k);
    let test_split = split_evenly(spec.test_size, k);

    let mut pools = Vec::with_capacity(k);
    let mut test_values: Vec<SpeciesId> = Vec::with_capacity(spec.test_size);
    let mut truth = Vec::with_capacity(spec.test_size);
    for c in 0..k {
        let psi = PsiValue::new(spec.psis[c])?;
        let mut pool = Urn::with_capacity(psi, derive_seed(seed, 2 * c as u64), pool_split[c]);
        pool.fill_to(pool_split[c]);
        pools.push(pool.into_values());
        let mut test = Urn::with_capacity(psi, derive_seed(seed, 2 * c as u64 + 1), test_split[c]);
        test_values.extend_from_slice(test.fill_to(test_split[c]));
        truth.extend(std::iter::repeat_n(c, test_split[c]));
    }

    let mut tables = vec![SpeciesCounts::new(); k];
    let mut used = vec![0usize; k];
    let mut rows = Vec::with_capacity(spec.training_sizes.len());
    for &m in &spec.training_sizes {
        let split = split_evenly(m, k);
        for c in 0..k {
            tables[c].extend(pools[c][used[c]..split[c]].iter().copied());
            used[c] = split[c];
        }
        let model: TrainingModel<f64> = TrainingModel::from_class_counts(tables.clone())?;
        let degenerate_classes = model
            .classes()
            .iter()
            .filter(|c: &&ClassModel<f64>| c.psi_hat.status.is_degenerate())
            .count();
        let marginal = classify_marginal(&model, &test_values)?;
        let simultaneous = classify_simultaneous_with(&model, &test_values, &spec.options)?;
        rows.push(ReplicateRow {
            replicate,
            seed,
            m,
            err_marginal: marginal.labeling.error_rate(&truth),
            err_simultaneous: simultaneous.labeling.error_rate(&truth),
            disagreement: marginal.labeling.disagreement(&simultaneous.labeling),
            sweeps: simultaneous.sweeps,
            converged: simultaneous.converged,
            degenerate_classes,
        });
    }
    Ok(rows)
}

/// Runs every replicate (in parallel) and aggregates one row per training
/// size. Output is identical for identical specs.
pub fn run_convergence_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let per_replicate = (0..spec.replicates)
        .into_par_iter()
        .map(|r| run_replicate(spec, r))
        .collect::<Result<Vec<_>>>()?;

    let rows = spec
        .training_sizes
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let column = |f: fn(&ReplicateRow) -> f64| -> Vec<f64> { per_replicate.iter().map(|rows| f(&rows[i])).collect() };
            let (err_marginal, sd_marginal) = mean_sd(&column(|r| r.err_marginal));
            let (err_simultaneous, sd_simultaneous) = mean_sd(&column(|r| r.err_simultaneous));
            let (disagreement, sd_disagreement) = mean_sd(&column(|r| r.disagreement));
            ExperimentRow {
                m,
                err_marginal,
                err_simultaneous,
                disagreement,
                sd_marginal,
                sd_simultaneous,
                sd_disagreement,
                replicates: spec.replicates,
            }
        })
        .collect();
    Ok(ExperimentReport {
        spec: spec.clone(),
        rows,
        raw: per_replicate.into_iter().flatten().collect(),
    })
}

impl ExperimentReport {
    /// Writes `summary.tsv`, `replicates.tsv` and one series file per curve
    /// into `dir`. Every file starts with the `#` lines in `header`.
    pub fn write_to(&self, dir: &Path, header: &[String]) -> Result<()> {
        fs::create_dir_all(dir)?;
        let open = |name: &str| -> Result<BufWriter<fs::File>> {
            let mut out = BufWriter::new(fs::File::create(dir.join(name))?);
            for line in header {
                writeln!(out, "# {line}")?;
            }
            Ok(out)
        };

        let mut out = open("summary.tsv")?;
        writeln!(
            out,
            "m\terr_marginal\tsd_marginal\terr_simultaneous\tsd_simultaneous\tdisagreement\tsd_disagreement\treplicates"
        )?;
        for r in &self.rows {
            writeln!(
                out,
                "{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{}",
                r.m, r.err_marginal, r.sd_marginal, r.err_simultaneous, r.sd_simultaneous, r.disagreement, r.sd_disagreement, r.replicates
            )?;
        }
        out.flush()?;

        let mut out = open("replicates.tsv")?;
        writeln!(
            out,
            "replicate\tseed\tm\terr_marginal\terr_simultaneous\tdisagreement\tsweeps\tconverged\tdegenerate_classes"
        )?;
        for r in &self.raw {
            writeln!(
                out,
                "{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{}\t{}\t{}",
                r.replicate, r.seed, r.m, r.err_marginal, r.err_simultaneous, r.disagreement, r.sweeps, r.converged, r.degenerate_classes
            )?;
        }
        out.flush()?;

        type Pick = fn(&ExperimentRow) -> (f64, f64);
        let series: [(&str, Pick); 3] = [
            ("series_err_marginal.tsv", |r| (r.err_marginal, r.sd_marginal)),
            ("series_err_simultaneous.tsv", |r| (r.err_simultaneous, r.sd_simultaneous)),
            ("series_disagreement.tsv", |r| (r.disagreement, r.sd_disagreement)),
        ];
        for (name, pick) in series {
            let mut out = open(name)?;
            writeln!(out, "m\tmean\tsd")?;
            for r in &self.rows {
                let (mean, sd) = pick(r);
                writeln!(out, "{}\t{mean:.6}\t{sd:.6}", r.m)?;
            }
            out.flush()?;
        }
        Ok(())
    }
}
