//! Marginal and simultaneous Bayesian predictive classifiers under partition
//! exchangeability.
//!
//! Each class `c` keeps its training frequencies `m_{cl}`, size `m_c` and a
//! fitted dispersal `ψ̂_c`. A test value `l` has marginal predictive factor
//! `m_{cl}/(m_c+ψ̂_c)` when seen in the class and `ψ̂_c/(m_c+ψ̂_c)` otherwise.
//!
//! The simultaneous classifier scores a whole labeling. The factor of item
//! `i` assigned to `c` also counts `n_{i;cl}`, the other test items with the
//! same value currently assigned to `c`:
//! `(m_{cl}+n_{i;cl})/(m_c+n_{i;cl}+ψ̂_c)` when `m_{cl} > 0`, otherwise
//! `ψ̂_c/(m_c+n_{i;cl}+ψ̂_c)`. The seen/unseen switch looks at training
//! counts only. Starting from the marginal labeling, items are swept and
//! moved to the class with the best joint score until a sweep changes
//! nothing.

use std::collections::HashMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimation::{fit_psi, PsiEstimate};
use crate::partition::{partition_of, SpeciesCounts, SpeciesId};
use crate::sampling::{derive_seed, LabeledRecord};
use crate::scalar::Scalar;

/// Safety cap on simultaneous sweeps.
pub const DEFAULT_MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassModel<T> {
    pub class_id: usize,
    pub value_counts: SpeciesCounts,
    pub m_c: usize,
    pub psi_hat: PsiEstimate<T>,
}

impl<T: Scalar> ClassModel<T> {
    pub fn fit(class_id: usize, value_counts: SpeciesCounts) -> Result<Self> {
        let rho = partition_of(&value_counts).map_err(|_| Error::EmptyClass(class_id))?;
        Ok(Self {
            class_id,
            m_c: value_counts.n(),
            psi_hat: fit_psi(&rho),
            value_counts,
        })
    }

    /// `ψ̂_c` used for prediction; boundary value for degenerate fits.
    #[inline]
    pub fn psi(&self) -> T {
        self.psi_hat.psi_hat
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingModel<T> {
    classes: Vec<ClassModel<T>>,
}

impl<T: Scalar> TrainingModel<T> {
    /// Fits one class per frequency table; table `c` becomes class `c`.
    pub fn from_class_counts(counts: Vec<SpeciesCounts>) -> Result<Self> {
        if counts.len() < 2 {
            return Err(Error::TooFewClasses(counts.len()));
        }
        let classes = counts
            .into_par_iter()
            .enumerate()
            .map(|(c, table)| ClassModel::fit(c, table))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { classes })
    }

    pub fn classes(&self) -> &[ClassModel<T>] {
        &self.classes
    }

    pub fn k(&self) -> usize {
        self.classes.len()
    }

    /// Classes whose dispersal fit hit a bracket boundary.
    pub fn degenerate_classes(&self) -> Vec<usize> {
        self.classes
            .iter()
            .filter(|c| c.psi_hat.status.is_degenerate())
            .map(|c| c.class_id)
            .collect()
    }

    pub fn warnings(&self) -> Vec<String> {
        self.classes
            .iter()
            .filter(|c| c.psi_hat.status.is_degenerate())
            .map(|c| {
                format!(
                    "class {}: {} dispersal fit (k_obs={}, n={}); predicting with psi={:e}",
                    c.class_id, c.psi_hat.status, c.psi_hat.k_obs, c.psi_hat.n, c.psi_hat.psi_hat.as_f64()
                )
            })
            .collect()
    }
}

/// Groups labeled records by class and fits every class.
///
/// Class ids must cover `0..k` with `k ≥ 2`.
pub fn train<T: Scalar>(data: &[LabeledRecord]) -> Result<TrainingModel<T>> {
    if data.is_empty() {
        return Err(Error::EmptySample);
    }
    let k = data.iter().map(|r| r.class).max().unwrap_or(0) + 1;
    if k < 2 {
        return Err(Error::TooFewClasses(k));
    }
    let mut counts = vec![SpeciesCounts::new(); k];
    for r in data {
        counts[r.class].observe(r.species);
    }
    if let Some(empty) = counts.iter().position(SpeciesCounts::is_empty) {
        return Err(Error::EmptyClass(empty));
    }
    TrainingModel::from_class_counts(counts)
}

/// Class assignment of every test item.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Labeling(Vec<usize>);

impl Labeling {
    pub fn new(assignments: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(bad) = assignments.iter().find(|&&c| c >= k) {
            return Err(Error::InvalidLabeling(format!("class {bad} is outside 0..{k}")));
        }
        Ok(Self(assignments))
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }

    /// Fraction of positions where the two labelings differ.
    pub fn disagreement(&self, other: &Labeling) -> f64 {
        zero_one_rate(&self.0, &other.0)
    }

    /// Item-wise 0-1 error against true classes.
    pub fn error_rate(&self, truth: &[usize]) -> f64 {
        zero_one_rate(&self.0, truth)
    }
}

fn zero_one_rate(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings of different length");
    if a.is_empty() {
        return 0.0;
    }
    a.iter().zip(b).filter(|(x, y)| x != y).count() as f64 / a.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationResult<T> {
    pub labeling: Labeling,
    /// Total log predictive score of `labeling`.
    pub log_score: T,
    /// Score of the starting labeling (equal to `log_score` for marginal).
    pub initial_log_score: T,
    /// Per-item log factors; they sum to `log_score`.
    pub per_item_log: Vec<T>,
    pub sweeps: usize,
    pub converged: bool,
}

/// Denominator used by the simultaneous factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ScoreRule {
    /// `m_c + n_{i;cl} + ψ̂_c`: only same-valued co-assigned test items.
    #[default]
    AsPrinted,
    /// `m_c + n_{i;c} + ψ̂_c` with `n_{i;c}` all other test items in `c`.
    /// Experimental.
    ClassTotal,
}

impl fmt::Display for ScoreRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoreRule::AsPrinted => "as-printed",
            ScoreRule::ClassTotal => "class-total",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SweepOrder {
    #[default]
    Input,
    /// Fresh permutation every sweep.
    Shuffled { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimultaneousOptions {
    pub order: SweepOrder,
    pub max_sweeps: usize,
    /// Extra runs with shuffled sweep order; the best final score wins.
    pub restarts: usize,
    pub restart_seed: u64,
    pub rule: ScoreRule,
}

impl Default for SimultaneousOptions {
    fn default() -> Self {
        Self {
            order: SweepOrder::Input,
            max_sweeps: DEFAULT_MAX_SWEEPS,
            restarts: 0,
            restart_seed: 0,
            rule: ScoreRule::AsPrinted,
        }
    }
}

#[inline]
fn ln_count<T: Scalar>(x: usize) -> T {
    T::of_usize(x).ln()
}

/// `ln` of the marginal predictive factor of `value` under class `class`.
pub fn marginal_log_score<T: Scalar>(model: &TrainingModel<T>, value: SpeciesId, class: usize) -> T {
    let cm = &model.classes[class];
    let psi = cm.psi();
    let den = (T::of_usize(cm.m_c) + psi).ln();
    match cm.value_counts.get(value) {
        0 => psi.ln() - den,
        m => ln_count::<T>(m) - den,
    }
}

fn argmax_lowest<T: Scalar>(scores: impl Iterator<Item = T>) -> (usize, T) {
    let mut best = (0, T::neg_infinity());
    for (c, s) in scores.enumerate() {
        if s > best.1 {
            best = (c, s);
        }
    }
    best
}

/// Assigns every item independently to its maximum a posteriori class.
/// Ties go to the lowest class id.
pub fn classify_marginal<T: Scalar>(
    model: &TrainingModel<T>,
    test_values: &[SpeciesId],
) -> Result<ClassificationResult<T>> {
    if test_values.is_empty() {
        return Err(Error::EmptySample);
    }
    let k = model.k();
    let (labels, per_item_log): (Vec<usize>, Vec<T>) = test_values
        .par_iter()
        .map(|&v| argmax_lowest((0..k).map(|c| marginal_log_score(model, v, c))))
        .unzip();
    let log_score = per_item_log.iter().copied().sum();
    Ok(ClassificationResult {
        labeling: Labeling(labels),
        log_score,
        initial_log_score: log_score,
        per_item_log,
        sweeps: 0,
        converged: true,
    })
}

/// `ln` of item `item`'s simultaneous factor if it were assigned to `class`,
/// with every other item labeled as in `labeling`.
pub fn simultaneous_log_score<T: Scalar>(
    model: &TrainingModel<T>,
    test_values: &[SpeciesId],
    labeling: &Labeling,
    item: usize,
    class: usize,
) -> T {
    simultaneous_log_score_with(model, test_values, labeling, item, class, ScoreRule::AsPrinted)
}

pub fn simultaneous_log_score_with<T: Scalar>(
    model: &TrainingModel<T>,
    test_values: &[SpeciesId],
    labeling: &Labeling,
    item: usize,
    class: usize,
    rule: ScoreRule,
) -> T {
    let value = test_values[item];
    let others = labeling
        .as_slice()
        .iter()
        .enumerate()
        .filter(|&(j, &c)| j != item && c == class);
    let (same_value, in_class) = others.fold((0usize, 0usize), |(sv, ic), (j, _)| {
        (sv + usize::from(test_values[j] == value), ic + 1)
    });
    let cm = &model.classes[class];
    let psi = cm.psi();
    let m_cl = cm.value_counts.get(value);
    let num = if m_cl > 0 { ln_count::<T>(m_cl + same_value) } else { psi.ln() };
    let extra = match rule {
        ScoreRule::AsPrinted => same_value,
        ScoreRule::ClassTotal => in_class,
    };
    num - (T::of_usize(cm.m_c + extra) + psi).ln()
}

/// Greedy simultaneous classifier with default options.
pub fn classify_simultaneous<T: Scalar>(
    model: &TrainingModel<T>,
    test_values: &[SpeciesId],
) -> Result<ClassificationResult<T>> {
    classify_simultaneous_with(model, test_values, &SimultaneousOptions::default())
}

pub fn classify_simultaneous_with<T: Scalar>(
    model: &TrainingModel<T>,
    test_values: &[SpeciesId],
    options: &SimultaneousOptions,
) -> Result<ClassificationResult<T>> {
    let initial = classify_marginal(model, test_values)?;
    classify_simultaneous_from(model, test_values, initial.labeling, options)
}

/// Runs the greedy sweeps from an explicit starting labeling.
pub fn classify_simultaneous_from<T: Scalar>(
    model: &TrainingModel<T>,
    test_values: &[SpeciesId],
    start: Labeling,
    options: &SimultaneousOptions,
) -> Result<ClassificationResult<T>> {
    if test_values.is_empty() {
        return Err(Error::EmptySample);
    }
    if start.len() != test_values.len() {
        return Err(Error::InvalidLabeling(format!(
            "{} labels for {} test items",
            start.len(),
            test_values.len()
        )));
    }
    let start = Labeling::new(start.into_inner(), model.k())?;
    let mut best = Sweeper::new(model, test_values, &start, options.rule).run(options.order, options.max_sweeps);
    for r in 0..options.restarts {
        let order = SweepOrder::Shuffled {
            seed: derive_seed(options.restart_seed, r as u64),
        };
        let candidate = Sweeper::new(model, test_values, &start, options.rule).run(order, options.max_sweeps);
        if candidate.log_score > best.log_score {
            best = candidate;
        }
    }
    Ok(best)
}

/// Incremental state of the simultaneous score. Test values are mapped to
/// dense indices so that the co-assignment counts live in flat `v·k + c`
/// tables.
struct Sweeper<T> {
    k: usize,
    rule: ScoreRule,
    items: Vec<usize>,
    train_counts: Vec<usize>,
    m: Vec<usize>,
    psi: Vec<T>,
    ln_psi: Vec<T>,
    groups: Vec<usize>,
    class_sizes: Vec<usize>,
    labels: Vec<usize>,
    tol: T,
}

impl<T: Scalar> Sweeper<T> {
    fn new(model: &TrainingModel<T>, test_values: &[SpeciesId], start: &Labeling, rule: ScoreRule) -> Self {
        let k = model.k();
        let mut index: HashMap<SpeciesId, usize> = HashMap::new();
        let mut distinct = Vec::new();
        let items: Vec<usize> = test_values
            .iter()
            .map(|&v| {
                *index.entry(v).or_insert_with(|| {
                    distinct.push(v);
                    distinct.len() - 1
                })
            })
            .collect();
        let mut train_counts = vec![0; distinct.len() * k];
        for (vi, &v) in distinct.iter().enumerate() {
            for (c, cm) in model.classes.iter().enumerate() {
                train_counts[vi * k + c] = cm.value_counts.get(v);
            }
        }
        let labels = start.as_slice().to_vec();
        let mut groups = vec![0; distinct.len() * k];
        let mut class_sizes = vec![0; k];
        for (&vi, &c) in items.iter().zip(&labels) {
            groups[vi * k + c] += 1;
            class_sizes[c] += 1;
        }
        let psi: Vec<T> = model.classes.iter().map(ClassModel::psi).collect();
        Self {
            k,
            rule,
            items,
            train_counts,
            m: model.classes.iter().map(|c| c.m_c).collect(),
            ln_psi: psi.iter().map(|p| p.ln()).collect(),
            psi,
            groups,
            class_sizes,
            labels,
            tol: T::of(T::IMPROVEMENT_TOL),
        }
    }

    #[inline]
    fn numerator(&self, v: usize, c: usize, others: usize) -> T {
        match self.train_counts[v * self.k + c] {
            0 => self.ln_psi[c],
            m_cl => ln_count::<T>(m_cl + others),
        }
    }

    #[inline]
    fn denominator(&self, c: usize, others: usize) -> T {
        (T::of_usize(self.m[c] + others) + self.psi[c]).ln()
    }

    /// Joint contribution of `g` items of value `v` in class `c`, without the
    /// class-level denominators of `ClassTotal`.
    fn group_term(&self, v: usize, c: usize, g: usize) -> T {
        if g == 0 {
            return T::zero();
        }
        let g_t = T::of_usize(g);
        let num = self.numerator(v, c, g - 1);
        match self.rule {
            ScoreRule::AsPrinted => g_t * (num - self.denominator(c, g - 1)),
            ScoreRule::ClassTotal => g_t * num,
        }
    }

    fn class_term(&self, c: usize, size: usize) -> T {
        match self.rule {
            ScoreRule::ClassTotal if size > 0 => -T::of_usize(size) * self.denominator(c, size - 1),
            _ => T::zero(),
        }
    }

    fn item_log(&self, i: usize) -> T {
        let v = self.items[i];
        let c = self.labels[i];
        let same = self.groups[v * self.k + c] - 1;
        let extra = match self.rule {
            ScoreRule::AsPrinted => same,
            ScoreRule::ClassTotal => self.class_sizes[c] - 1,
        };
        self.numerator(v, c, same) - self.denominator(c, extra)
    }

    fn joint(&self) -> T {
        let mut total = T::zero();
        for (idx, &g) in self.groups.iter().enumerate() {
            total = total + self.group_term(idx / self.k, idx % self.k, g);
        }
        for c in 0..self.k {
            total = total + self.class_term(c, self.class_sizes[c]);
        }
        total
    }

    /// Change of the joint score when item `i` moves from its class to `b`.
    fn gain(&self, i: usize, b: usize) -> T {
        let v = self.items[i];
        let a = self.labels[i];
        let ga = self.groups[v * self.k + a];
        let gb = self.groups[v * self.k + b];
        let na = self.class_sizes[a];
        let nb = self.class_sizes[b];
        (self.group_term(v, a, ga - 1) - self.group_term(v, a, ga))
            + (self.group_term(v, b, gb + 1) - self.group_term(v, b, gb))
            + (self.class_term(a, na - 1) - self.class_term(a, na))
            + (self.class_term(b, nb + 1) - self.class_term(b, nb))
    }

    fn reassign(&mut self, i: usize, b: usize) {
        let v = self.items[i];
        let a = self.labels[i];
        self.groups[v * self.k + a] -= 1;
        self.groups[v * self.k + b] += 1;
        self.class_sizes[a] -= 1;
        self.class_sizes[b] += 1;
        self.labels[i] = b;
    }

    fn sweep(&mut self, order: &[usize]) -> usize {
        let mut changes = 0;
        for &i in order {
            let a = self.labels[i];
            let mut best = a;
            let mut best_gain = self.tol;
            for b in (0..self.k).filter(|&b| b != a) {
                let g = self.gain(i, b);
                if g > best_gain {
                    best_gain = g;
                    best = b;
                }
            }
            if best != a {
                self.reassign(i, best);
                changes += 1;
            }
        }
        changes
    }

    fn run(mut self, order: SweepOrder, max_sweeps: usize) -> ClassificationResult<T> {
        let initial_log_score = self.joint();
        let mut sequence: Vec<usize> = (0..self.items.len()).collect();
        let mut rng = match order {
            SweepOrder::Input => None,
            SweepOrder::Shuffled { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        };
        let mut sweeps = 0;
        let mut converged = false;
        while sweeps < max_sweeps {
            if let Some(rng) = rng.as_mut() {
                sequence.shuffle(rng);
            }
            sweeps += 1;
            if self.sweep(&sequence) == 0 {
                converged = true;
                break;
            }
        }
        let per_item_log: Vec<T> = (0..self.items.len()).map(|i| self.item_log(i)).collect();
        ClassificationResult {
            log_score: self.joint(),
            initial_log_score,
            per_item_log,
            sweeps,
            converged,
            labeling: Labeling(self.labels),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::FitStatus;
    use crate::partition::PsiValue;
    use crate::sampling::sample_labeled_dataset;

    fn counts(pairs: &[(SpeciesId, usize)]) -> SpeciesCounts {
        SpeciesCounts::from_frequencies(pairs.iter().copied())
    }

    fn records(pairs: &[(usize, SpeciesId)]) -> Vec<LabeledRecord> {
        pairs.iter().map(|&(class, species)| LabeledRecord { class, species }).collect()
    }

    /// Model with hand-set dispersal values, bypassing the fit.
    fn model_with_psi(tables: &[(&[(SpeciesId, usize)], f64)]) -> TrainingModel<f64> {
        let counts_vec = tables.iter().map(|(t, _)| counts(t)).collect();
        let mut model = TrainingModel::from_class_counts(counts_vec).unwrap();
        for (cm, &(_, psi)) in model.classes.iter_mut().zip(tables) {
            cm.psi_hat.psi_hat = psi;
        }
        model
    }

    #[test]
    fn train_fits_each_class() {
        let data = records(&[(0, 0), (0, 0), (0, 1), (1, 5), (1, 5), (1, 5), (1, 5)]);
        let model: TrainingModel<f64> = train(&data).unwrap();
        assert_eq!(model.k(), 2);
        let c0 = &model.classes()[0];
        assert_eq!(c0.m_c, 3);
        assert!((c0.psi() - 2f64.sqrt()).abs() < 1e-6);
        assert_eq!(model.classes()[1].psi_hat.status, FitStatus::DegenerateLow);
        assert_eq!(model.degenerate_classes(), vec![1]);
        assert_eq!(model.warnings().len(), 1);
    }

    #[test]
    fn train_accepts_all_degenerate_classes() {
        let data = records(&[(0, 0), (0, 0), (1, 3), (1, 3)]);
        let model: TrainingModel<f64> = train(&data).unwrap();
        assert_eq!(model.degenerate_classes(), vec![0, 1]);
        assert!(classify_marginal(&model, &[0, 3, 9]).is_ok());
        assert!(classify_simultaneous(&model, &[0, 3, 9, 9]).is_ok());
    }

    #[test]
    fn train_errors() {
        assert!(matches!(train::<f64>(&[]), Err(Error::EmptySample)));
        assert!(matches!(train::<f64>(&records(&[(0, 1), (0, 2)])), Err(Error::TooFewClasses(1))));
        assert!(matches!(train::<f64>(&records(&[(0, 1), (2, 2)])), Err(Error::EmptyClass(1))));
    }

    #[test]
    fn marginal_hand_values() {
        let model = model_with_psi(&[(&[(0, 3), (1, 1)], 1.0), (&[(0, 1)], 1.0)]);
        assert!((marginal_log_score(&model, 0, 0) - 0.6f64.ln()).abs() < 1e-15);
        assert!((marginal_log_score(&model, 7, 0) - 0.2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn unseen_value_goes_to_largest_psi() {
        let model = model_with_psi(&[(&[(0, 5), (1, 5)], 2.0), (&[(2, 5), (3, 5)], 9.0), (&[(4, 10)], 4.0)]);
        let result = classify_marginal(&model, &[99]).unwrap();
        assert_eq!(result.labeling.as_slice(), &[1]);
    }

    #[test]
    fn seen_only_in_one_class() {
        let model = model_with_psi(&[(&[(0, 6), (1, 4)], 2.0), (&[(0, 5), (2, 5)], 2.0), (&[(3, 7), (4, 3)], 2.0)]);
        let result = classify_marginal(&model, &[4]).unwrap();
        assert_eq!(result.labeling.as_slice(), &[2]);
    }

    #[test]
    fn ties_go_to_lowest_class() {
        let model = model_with_psi(&[(&[(0, 4)], 1.0), (&[(1, 4)], 1.0)]);
        let result = classify_marginal(&model, &[7]).unwrap();
        assert_eq!(result.labeling.as_slice(), &[0]);
    }

    #[test]
    fn marginal_is_itemwise() {
        let model = model_with_psi(&[(&[(0, 5), (1, 2)], 1.5), (&[(1, 4), (2, 4)], 3.0)]);
        let values = [0, 1, 2, 3, 1, 0];
        let forward = classify_marginal(&model, &values).unwrap();
        let mut reversed = values;
        reversed.reverse();
        let backward = classify_marginal(&model, &reversed).unwrap();
        let mut relabeled = backward.labeling.into_inner();
        relabeled.reverse();
        assert_eq!(forward.labeling.as_slice(), relabeled.as_slice());
        let sum: f64 = forward.per_item_log.iter().sum();
        assert!((forward.log_score - sum).abs() < 1e-12);
    }

    #[test]
    fn simultaneous_factor_hand_values() {
        let model = model_with_psi(&[(&[(0, 3), (1, 1)], 1.0), (&[(5, 2)], 1.0)]);
        // two other test items with value 0 in class 0
        let values = [0, 0, 0, 1];
        let labeling = Labeling::new(vec![0, 0, 0, 1], 2).unwrap();
        let got = simultaneous_log_score(&model, &values, &labeling, 0, 0);
        assert!((got - (5.0f64 / 7.0).ln()).abs() < 1e-15);

        // unseen in training, one co-labeled twin
        let values = [9, 9];
        let labeling = Labeling::new(vec![0, 0], 2).unwrap();
        let got = simultaneous_log_score(&model, &values, &labeling, 0, 0);
        assert!((got - (1.0f64 / 6.0).ln()).abs() < 1e-15);

        // no twins: identical to the marginal factor
        let values = [0, 1];
        let labeling = Labeling::new(vec![0, 0], 2).unwrap();
        let got = simultaneous_log_score(&model, &values, &labeling, 0, 0);
        assert!((got - marginal_log_score(&model, 0, 0)).abs() < 1e-15);
    }

    #[test]
    fn class_total_rule_counts_all_coassigned() {
        let model = model_with_psi(&[(&[(0, 3), (1, 1)], 1.0), (&[(5, 2)], 1.0)]);
        let values = [0, 0, 1, 7];
        let labeling = Labeling::new(vec![0, 0, 0, 0], 2).unwrap();
        let got = simultaneous_log_score_with(&model, &values, &labeling, 0, 0, ScoreRule::ClassTotal);
        // (3 + 1) / (4 + 3 + 1)
        assert!((got - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn single_item_reduction() {
        let model = model_with_psi(&[(&[(0, 3), (1, 1)], 1.0), (&[(0, 1), (2, 8)], 4.0), (&[(3, 2)], 0.5)]);
        for v in 0..6 {
            let m = classify_marginal(&model, &[v]).unwrap();
            let s = classify_simultaneous(&model, &[v]).unwrap();
            assert_eq!(m.labeling, s.labeling);
            assert!(s.converged);
            assert_eq!(s.sweeps, 1);
        }
    }

    #[test]
    fn per_item_logs_sum_to_joint() {
        let psis: Vec<PsiValue<f64>> = [1.0, 10.0, 50.0].iter().map(|&p| PsiValue::new(p).unwrap()).collect();
        let train_data = sample_labeled_dataset(&psis, 300, 5).unwrap();
        let test: Vec<SpeciesId> = sample_labeled_dataset(&psis, 100, 6).unwrap().iter().map(|r| r.species).collect();
        let model: TrainingModel<f64> = train(&train_data).unwrap();
        for rule in [ScoreRule::AsPrinted, ScoreRule::ClassTotal] {
            let opts = SimultaneousOptions { rule, ..Default::default() };
            let result = classify_simultaneous_with(&model, &test, &opts).unwrap();
            let sum: f64 = result.per_item_log.iter().sum();
            assert!((sum - result.log_score).abs() < 1e-8, "{rule}");
            assert!(result.log_score >= result.initial_log_score);
            assert!(result.log_score <= 0.0);
            assert!(result.converged);
            // every item's factor agrees with the direct evaluation
            for i in (0..test.len()).step_by(17) {
                let direct = simultaneous_log_score_with(&model, &test, &result.labeling, i, result.labeling.as_slice()[i], rule);
                assert!((direct - result.per_item_log[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gains_match_full_rescoring() {
        let model = model_with_psi(&[(&[(0, 3), (1, 1), (2, 2)], 1.0), (&[(0, 1), (3, 8)], 4.0), (&[(3, 2), (4, 4)], 0.5)]);
        let values = [0, 0, 3, 3, 3, 9, 9, 4, 1];
        let start = Labeling::new(vec![0, 1, 1, 2, 2, 0, 1, 2, 0], 3).unwrap();
        for rule in [ScoreRule::AsPrinted, ScoreRule::ClassTotal] {
            let sw = Sweeper::new(&model, &values, &start, rule);
            let base = sw.joint();
            let direct: f64 = (0..values.len())
                .map(|i| simultaneous_log_score_with(&model, &values, &start, i, start.as_slice()[i], rule))
                .sum();
            assert!((base - direct).abs() < 1e-12);
            for i in 0..values.len() {
                for b in 0..3 {
                    if b == start.as_slice()[i] {
                        continue;
                    }
                    let mut moved = start.as_slice().to_vec();
                    moved[i] = b;
                    let moved = Labeling::new(moved, 3).unwrap();
                    let after = Sweeper::new(&model, &values, &moved, rule).joint();
                    assert!((sw.gain(i, b) - (after - base)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn restarts_never_lower_the_score() {
        let psis: Vec<PsiValue<f64>> = [1.0, 10.0, 50.0].iter().map(|&p| PsiValue::new(p).unwrap()).collect();
        let model: TrainingModel<f64> = train(&sample_labeled_dataset(&psis, 200, 1).unwrap()).unwrap();
        let test: Vec<SpeciesId> = sample_labeled_dataset(&psis, 80, 2).unwrap().iter().map(|r| r.species).collect();
        let plain = classify_simultaneous(&model, &test).unwrap();
        let opts = SimultaneousOptions { restarts: 4, restart_seed: 3, ..Default::default() };
        let restarted = classify_simultaneous_with(&model, &test, &opts).unwrap();
        assert!(restarted.log_score >= plain.log_score);
        let shuffled = SimultaneousOptions { order: SweepOrder::Shuffled { seed: 8 }, ..Default::default() };
        let a = classify_simultaneous_with(&model, &test, &shuffled).unwrap();
        let b = classify_simultaneous_with(&model, &test, &shuffled).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn start_labeling_validation() {
        let model = model_with_psi(&[(&[(0, 3)], 1.0), (&[(1, 3)], 1.0)]);
        let opts = SimultaneousOptions::default();
        let bad_len = Labeling::new(vec![0], 2).unwrap();
        assert!(classify_simultaneous_from(&model, &[0, 1], bad_len, &opts).is_err());
        assert!(Labeling::new(vec![0, 2], 2).is_err());
        assert!(classify_marginal(&model, &[]).is_err());
    }

    #[test]
    fn error_and_disagreement_rates() {
        let a = Labeling::new(vec![0, 1, 1, 0], 2).unwrap();
        let b = Labeling::new(vec![0, 1, 0, 1], 2).unwrap();
        assert_eq!(a.disagreement(&b), 0.5);
        assert_eq!(a.error_rate(&[0, 1, 1, 1]), 0.25);
    }
}
