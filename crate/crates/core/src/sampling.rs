//! Partition-exchangeable sequences from the sequential urn scheme.
//!
//! After `m` draws the next value is a new species with probability
//! `ψ/(m+ψ)` and species `j` with probability `n_j/(m+ψ)`. The latter is the
//! same as copying the value at a uniformly chosen earlier position, so one
//! uniform variate decides each draw in constant time.
//!
//! Species ids are 0-based in order of first appearance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::partition::{PsiValue, SpeciesCounts, SpeciesId};
use crate::scalar::Scalar;

/// Derives the seed for stream `index` of a run with seed `master`.
///
/// `splitmix64(master ^ splitmix64(index + φ))` with `φ = 0x9E3779B97F4A7C15`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index.wrapping_add(0x9E37_79B9_7F4A_7C15)))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UrnConfig<T> {
    pub psi: PsiValue<T>,
    pub length: usize,
    pub seed: u64,
}

impl<T: Scalar> UrnConfig<T> {
    pub fn new(psi: PsiValue<T>, length: usize, seed: u64) -> Result<Self> {
        if length == 0 {
            return Err(Error::Domain("sequence length must be at least 1".into()));
        }
        Ok(Self { psi, length, seed })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedSequence {
    pub values: Vec<SpeciesId>,
    pub counts: SpeciesCounts,
    pub seed_used: u64,
}

/// Incremental urn. Values drawn so far stay available as a prefix, so a
/// longer run extends a shorter one with the same seed.
#[derive(Debug, Clone)]
pub struct Urn {
    psi: f64,
    values: Vec<SpeciesId>,
    next_new: SpeciesId,
    rng: ChaCha8Rng,
}

impl Urn {
    pub fn new<T: Scalar>(psi: PsiValue<T>, seed: u64) -> Self {
        Self {
            psi: psi.get().as_f64(),
            values: Vec::new(),
            next_new: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn with_capacity<T: Scalar>(psi: PsiValue<T>, seed: u64, capacity: usize) -> Self {
        let mut urn = Self::new(psi, seed);
        urn.values.reserve(capacity);
        urn
    }

    pub fn draw(&mut self) -> SpeciesId {
        let m = self.values.len();
        let u = self.rng.random::<f64>() * (m as f64 + self.psi);
        let value = if u < m as f64 {
            self.values[u as usize]
        } else {
            let id = self.next_new;
            self.next_new += 1;
            id
        };
        self.values.push(value);
        value
    }

    /// Draws until `len` values exist.
    pub fn fill_to(&mut self, len: usize) -> &[SpeciesId] {
        self.values.reserve(len.saturating_sub(self.values.len()));
        while self.values.len() < len {
            self.draw();
        }
        &self.values
    }

    pub fn values(&self) -> &[SpeciesId] {
        &self.values
    }

    /// Number of distinct species drawn so far.
    pub fn distinct(&self) -> usize {
        self.next_new as usize
    }

    pub fn into_values(self) -> Vec<SpeciesId> {
        self.values
    }
}

pub fn sample_sequence<T: Scalar>(config: &UrnConfig<T>) -> GeneratedSequence {
    let mut urn = Urn::with_capacity(config.psi, config.seed, config.length);
    urn.fill_to(config.length);
    let values = urn.into_values();
    let counts = values.iter().copied().collect();
    GeneratedSequence {
        values,
        counts,
        seed_used: config.seed,
    }
}

/// One training or test item: its class and feature value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LabeledRecord {
    pub class: usize,
    pub species: SpeciesId,
}

/// Class `c` draws `per_class_size` values from an urn with `psis[c]`, seeded
/// with `derive_seed(seed, c)`. Species ids are shared across classes by
/// convention. Records are grouped by class in increasing class order.
pub fn sample_labeled_dataset<T: Scalar>(
    psis: &[PsiValue<T>],
    per_class_size: usize,
    seed: u64,
) -> Result<Vec<LabeledRecord>> {
    if psis.is_empty() {
        return Err(Error::Domain("at least one class is required".into()));
    }
    if per_class_size == 0 {
        return Err(Error::Domain("per-class size must be at least 1".into()));
    }
    let mut records = Vec::with_capacity(psis.len() * per_class_size);
    for (class, &psi) in psis.iter().enumerate() {
        let config = UrnConfig::new(psi, per_class_size, derive_seed(seed, class as u64))?;
        let seq = sample_sequence(&config);
        records.extend(seq.values.into_iter().map(|species| LabeledRecord { class, species }));
    }
    Ok(records)
}
