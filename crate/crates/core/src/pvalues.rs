//! Domain types shared by every procedure: raw and ordered p-values,
//! critical-constant schedules, rejection sets and confusion counts.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ground-truth status of a hypothesis in a simulated dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Truth {
    TrueNull,
    FalseNull,
}

/// Raw p-values together with stable hypothesis ids and optional truth labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PValueVector {
    values: Vec<f64>,
    ids: Vec<usize>,
    truth: Option<Vec<Truth>>,
}

impl PValueVector {
    /// Builds a vector whose ids are the positions `0..m`.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let ids = (0..values.len()).collect();
        Self::with_ids(values, ids)
    }

    /// Builds a vector with explicit ids, which must be a permutation of `0..m`.
    pub fn with_ids(values: Vec<f64>, ids: Vec<usize>) -> Result<Self> {
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() || !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidPValue { index, value });
            }
        }
        let m = values.len();
        if ids.len() != m {
            return Err(Error::InvalidIds { m });
        }
        let mut seen = vec![false; m];
        for &id in &ids {
            if id >= m || std::mem::replace(&mut seen[id], true) {
                return Err(Error::InvalidIds { m });
            }
        }
        Ok(Self {
            values,
            ids,
            truth: None,
        })
    }

    /// Attaches truth labels, indexed by position like `values`.
    pub fn with_truth(mut self, truth: Vec<Truth>) -> Result<Self> {
        if truth.len() != self.values.len() {
            return Err(Error::TruthLength {
                expected: self.values.len(),
                found: truth.len(),
            });
        }
        self.truth = Some(truth);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn truth(&self) -> Option<&[Truth]> {
        self.truth.as_deref()
    }

    /// Truth label of the hypothesis with the given id.
    pub fn truth_of(&self, id: usize) -> Option<Truth> {
        let truth = self.truth.as_ref()?;
        self.ids.iter().position(|&x| x == id).map(|pos| truth[pos])
    }

    /// Number of true nulls, when truth labels are attached.
    pub fn m0(&self) -> Option<usize> {
        self.truth
            .as_ref()
            .map(|t| t.iter().filter(|&&x| x == Truth::TrueNull).count())
    }

    /// p-value of the hypothesis with the given id.
    pub fn value_of(&self, id: usize) -> Option<f64> {
        self.ids
            .iter()
            .position(|&x| x == id)
            .map(|pos| self.values[pos])
    }
}

/// p-values sorted ascending, with the id of the hypothesis at each rank.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedPValues {
    sorted_values: Vec<f64>,
    rank_to_id: Vec<usize>,
}

impl OrderedPValues {
    pub fn len(&self) -> usize {
        self.sorted_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted_values.is_empty()
    }

    pub fn sorted_values(&self) -> &[f64] {
        &self.sorted_values
    }

    /// `rank_to_id()[r]` is the id at zero-based rank `r`.
    pub fn rank_to_id(&self) -> &[usize] {
        &self.rank_to_id
    }

    /// Rejection set for the hypotheses at ranks `1..=k`.
    pub fn reject_first(&self, k: usize) -> RejectionSet {
        let k = k.min(self.len());
        RejectionSet {
            rejected_ids: self.rank_to_id[..k].to_vec(),
            k,
            threshold: if k == 0 { 0.0 } else { self.sorted_values[k - 1] },
        }
    }
}

/// Sorts p-values ascending; ties are broken by ascending id.
pub fn sort_pvalues(pv: &PValueVector) -> OrderedPValues {
    let mut pairs: Vec<(f64, usize)> = pv
        .values
        .iter()
        .copied()
        .zip(pv.ids.iter().copied())
        .collect();
    pairs.sort_unstable_by(|a, b| cmp_pair(*a, *b));
    let (sorted_values, rank_to_id) = pairs.into_iter().unzip();
    OrderedPValues {
        sorted_values,
        rank_to_id,
    }
}

#[inline]
pub(crate) fn cmp_pair(a: (f64, usize), b: (f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Which closed form produced a constants schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstantsFamily {
    Ms,
    Bh,
    Prds,
    Custom,
}

impl fmt::Display for ConstantsFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConstantsFamily::Ms => "ms",
            ConstantsFamily::Bh => "bh",
            ConstantsFamily::Prds => "prds",
            ConstantsFamily::Custom => "custom",
        })
    }
}

/// Critical constants `alpha_1 <= ... <= alpha_m` with their provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalConstants {
    pub alphas: Vec<f64>,
    pub family: ConstantsFamily,
    pub q: f64,
    pub beta: Option<f64>,
}

impl CriticalConstants {
    /// A user-supplied schedule. Nothing is checked here; see [`validate_constants`].
    pub fn custom(alphas: Vec<f64>, q: f64) -> Self {
        Self {
            alphas,
            family: ConstantsFamily::Custom,
            q,
            beta: None,
        }
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }
}

/// One problem found by [`validate_constants`]. Indices are 1-based.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    OutOfRange { index: usize, value: f64 },
    Decreasing { index: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::OutOfRange { index, value } => {
                write!(f, "α_{index} not in (0,1) (value {value})")
            }
            Violation::Decreasing { index } => write!(f, "not nondecreasing at index {index}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that constants are nondecreasing and lie in the open unit interval.
#[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail
pub fn validate_constants(c: &CriticalConstants) -> ValidationReport {
    let mut violations = Vec::new();
    for (i, &a) in c.alphas.iter().enumerate() {
        // NaN fails this test as well.
        if !(a > 0.0 && a < 1.0) {
            violations.push(Violation::OutOfRange {
                index: i + 1,
                value: a,
            });
        }
        if i > 0 && !(c.alphas[i - 1] <= a) {
            violations.push(Violation::Decreasing { index: i + 1 });
        }
    }
    ValidationReport { violations }
}

/// Hypotheses rejected by a procedure.
#[derive(Debug, Clone, PartialEq)]
pub struct RejectionSet {
    /// Rejected ids in rank order.
    pub rejected_ids: Vec<usize>,
    pub k: usize,
    /// Largest rejected p-value, or 0 when nothing is rejected.
    pub threshold: f64,
}

impl RejectionSet {
    pub fn contains(&self, id: usize) -> bool {
        self.rejected_ids.contains(&id)
    }

    /// Rejected ids in ascending order.
    pub fn sorted_ids(&self) -> Vec<usize> {
        let mut ids = self.rejected_ids.clone();
        ids.sort_unstable();
        ids
    }
}

/// Outcome of one procedure on one labelled dataset.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    /// True nulls rejected.
    pub v: usize,
    /// False nulls rejected.
    pub s: usize,
    pub r: usize,
    pub m0: usize,
    pub m1: usize,
}

impl ConfusionCounts {
    /// Counts for rejecting ranks `1..=k`, given truth labels indexed by id.
    pub fn from_ranks(rank_to_id: &[usize], k: usize, truth_by_id: &[Truth]) -> Self {
        let m0 = truth_by_id
            .iter()
            .filter(|&&t| t == Truth::TrueNull)
            .count();
        let v = rank_to_id[..k]
            .iter()
            .filter(|&&id| truth_by_id[id] == Truth::TrueNull)
            .count();
        Self {
            v,
            s: k - v,
            r: k,
            m0,
            m1: truth_by_id.len() - m0,
        }
    }

    /// Counts for a rejection set against a labelled p-value vector.
    pub fn from_rejections(rejections: &RejectionSet, pv: &PValueVector) -> Option<Self> {
        let truth = pv.truth()?;
        let mut by_id = vec![Truth::TrueNull; pv.len()];
        for (&id, &t) in pv.ids().iter().zip(truth) {
            by_id[id] = t;
        }
        Some(Self::from_ranks(&rejections.rejected_ids, rejections.k, &by_id))
    }

    /// The false discovery proportion `V / max(R, 1)`.
    pub fn fdp(&self) -> f64 {
        self.v as f64 / self.r.max(1) as f64
    }

    /// `S / m1`, undefined when there are no false nulls.
    pub fn power(&self) -> Option<f64> {
        (self.m1 > 0).then(|| self.s as f64 / self.m1 as f64)
    }
}
