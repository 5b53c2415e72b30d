//! Species frequency tables, abundance partitions and the dispersal parameter.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Opaque species label. Only equality matters; no result depends on the
/// numeric value.
pub type SpeciesId = u64;

/// Frequency table `n_j` over observed species.
///
/// Species with zero count are never stored, so `distinct()` is the number
/// of observed species and `n()` the sample size.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SpeciesCounts {
    counts: BTreeMap<SpeciesId, usize>,
    n: usize,
}

impl SpeciesCounts {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a table from `(species, frequency)` pairs. Zero frequencies are
    /// dropped and repeated species are merged.
    pub fn from_frequencies<I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (SpeciesId, usize)>,
    {
        let mut out = Self::new();
        for (id, count) in pairs {
            out.observe_many(id, count);
        }
        out
    }

    #[inline]
    pub fn observe(&mut self, id: SpeciesId) {
        self.observe_many(id, 1);
    }

    pub fn observe_many(&mut self, id: SpeciesId, count: usize) {
        if count == 0 {
            return;
        }
        *self.counts.entry(id).or_insert(0) += count;
        self.n += count;
    }

    /// Frequency of `id`, zero when unobserved.
    #[inline]
    pub fn get(&self, id: SpeciesId) -> usize {
        self.counts.get(&id).copied().unwrap_or(0)
    }

    #[inline]
    pub fn contains(&self, id: SpeciesId) -> bool {
        self.counts.contains_key(&id)
    }

    /// Total sample size.
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of distinct observed species.
    #[inline]
    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = (SpeciesId, usize)> + '_ {
        self.counts.iter().map(|(&id, &c)| (id, c))
    }

    pub fn frequencies(&self) -> impl Iterator<Item = usize> + '_ {
        self.counts.values().copied()
    }

    /// Abundance partition of this table. Fails on an empty table.
    pub fn partition(&self) -> Result<Partition> {
        partition_of(self)
    }
}

impl FromIterator<SpeciesId> for SpeciesCounts {
    fn from_iter<I: IntoIterator<Item = SpeciesId>>(iter: I) -> Self {
        let mut out = Self::new();
        out.extend(iter);
        out
    }
}

impl Extend<SpeciesId> for SpeciesCounts {
    fn extend<I: IntoIterator<Item = SpeciesId>>(&mut self, iter: I) {
        for id in iter {
            self.observe(id);
        }
    }
}

/// Abundance partition `ρ` of a sample of size `n`: `ρ_t` is the number of
/// species observed exactly `t` times.
///
/// Stored sparsely as `(t, ρ_t)` pairs with `ρ_t > 0`, sorted by `t`. Every
/// constructor enforces `Σ t·ρ_t = n` with `n ≥ 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    n: usize,
    parts: Vec<(usize, usize)>,
}

impl Partition {
    /// Builds a partition from `(t, ρ_t)` pairs; `n` is implied by the pairs.
    pub fn from_multiplicities<I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut merged: BTreeMap<usize, usize> = BTreeMap::new();
        for (t, rho) in pairs {
            if rho == 0 {
                continue;
            }
            if t == 0 {
                return Err(Error::InvalidPartition("abundance 0 with positive multiplicity".into()));
            }
            *merged.entry(t).or_insert(0) += rho;
        }
        let n = merged
            .iter()
            .try_fold(0usize, |acc, (&t, &rho)| t.checked_mul(rho).and_then(|x| acc.checked_add(x)))
            .ok_or_else(|| Error::InvalidPartition("sample size overflows".into()))?;
        if n == 0 {
            return Err(Error::EmptySample);
        }
        Ok(Self {
            n,
            parts: merged.into_iter().collect(),
        })
    }

    /// Builds a partition from the dense vector `(ρ_1, …, ρ_n)`. The vector
    /// length is the sample size and must satisfy `Σ t·ρ_t = n`.
    pub fn from_dense(rho: &[usize]) -> Result<Self> {
        let p = Self::from_multiplicities(rho.iter().enumerate().map(|(i, &r)| (i + 1, r)))?;
        if p.n != rho.len() {
            return Err(Error::InvalidPartition(format!(
                "Σ t·ρ_t = {} but the vector has length {}",
                p.n,
                rho.len()
            )));
        }
        Ok(p)
    }

    /// Builds a partition from species frequencies `n_j` (any order).
    pub fn from_abundances<I>(freqs: I) -> Result<Self>
    where
        I: IntoIterator<Item = usize>,
    {
        Self::from_multiplicities(freqs.into_iter().map(|t| (t, 1)))
    }

    /// Sample size `n`.
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of distinct species, `Σ ρ_t`.
    pub fn k_obs(&self) -> usize {
        self.parts.iter().map(|&(_, rho)| rho).sum()
    }

    /// `ρ_t` (zero for absent abundances).
    pub fn multiplicity(&self, t: usize) -> usize {
        self.parts
            .binary_search_by_key(&t, |&(tt, _)| tt)
            .map(|i| self.parts[i].1)
            .unwrap_or(0)
    }

    /// Non-zero `(t, ρ_t)` pairs in increasing `t`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.parts.iter().copied()
    }

    /// Dense `(ρ_1, …, ρ_n)`.
    pub fn to_dense(&self) -> Vec<usize> {
        let mut out = vec![0; self.n];
        for &(t, rho) in &self.parts {
            out[t - 1] = rho;
        }
        out
    }

    /// All partitions of `n`, in reverse lexicographic order of their parts.
    pub fn enumerate(n: usize) -> IntegerPartitions {
        IntegerPartitions::new(n)
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n={} rho=[", self.n)?;
        for (i, (t, rho)) in self.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{t}:{rho}")?;
        }
        write!(f, "]")
    }
}

/// Abundance partition of a frequency table.
pub fn partition_of(counts: &SpeciesCounts) -> Result<Partition> {
    if counts.is_empty() {
        return Err(Error::EmptySample);
    }
    Partition::from_abundances(counts.frequencies())
}

/// Iterator over the integer partitions of `n`.
#[derive(Debug, Clone)]
pub struct IntegerPartitions {
    // non-increasing parts of the next partition to yield
    parts: Vec<usize>,
    done: bool,
}

impl IntegerPartitions {
    fn new(n: usize) -> Self {
        Self {
            parts: vec![n],
            done: n == 0,
        }
    }
}

impl Iterator for IntegerPartitions {
    type Item = Partition;

    fn next(&mut self) -> Option<Partition> {
        if self.done {
            return None;
        }
        let current = Partition::from_abundances(self.parts.iter().copied())
            .expect("non-empty partition of positive n");

        let mut ones = 0;
        while self.parts.last() == Some(&1) {
            self.parts.pop();
            ones += 1;
        }
        match self.parts.pop() {
            None => self.done = true,
            Some(last) => {
                let part = last - 1;
                let mut rest = ones + 1;
                self.parts.push(part);
                while rest > part {
                    self.parts.push(part);
                    rest -= part;
                }
                if rest > 0 {
                    self.parts.push(rest);
                }
            }
        }
        Some(current)
    }
}

/// Dispersal parameter `ψ`, guaranteed positive and finite.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct PsiValue<T>(T);

impl<T: Scalar> PsiValue<T> {
    pub fn new(value: T) -> Result<Self> {
        if value > T::zero() && value.is_finite() {
            Ok(Self(value))
        } else {
            Err(Error::InvalidPsi(value.as_f64()))
        }
    }

    #[inline]
    pub fn get(self) -> T {
        self.0
    }
}

impl<T: Scalar> fmt::Display for PsiValue<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}
