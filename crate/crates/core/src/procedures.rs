//! Critical-constant generators, the step-down and step-up engines, and the
//! named procedures built on them.
//!
//! Every procedure reduces to "pick a schedule of constants, then run one of
//! the two engines". The adaptive procedures (two-stage, Storey-type, oracle)
//! derive their schedule from the data or from the true null count first.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::pvalues::{
    sort_pvalues, ConstantsFamily, CriticalConstants, OrderedPValues, PValueVector, RejectionSet,
};

/// Default Storey λ.
pub const DEFAULT_LAMBDA: f64 = 0.5;

/// Constants of the oracle are capped here so they stay inside (0, 1).
pub const ORACLE_CAP: f64 = 1.0 - 1e-12;

/// Relative slack used when checking the step-down control condition.
pub const CONDITION_SLACK: f64 = 1e-12;

pub(crate) fn check_level(q: f64) -> Result<()> {
    if q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("q = {q} must lie in (0, 1)")))
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("lambda = {lambda} must lie in (0, 1)")))
    }
}

/// `alpha_i = i q / (m + beta - i (1 - q))`; `beta = 1` gives the
/// multiple-stage constants, larger `beta` gives a more conservative schedule.
pub fn ms_constants(m: usize, q: f64, beta: f64) -> Result<CriticalConstants> {
    check_level(q)?;
    if !(beta >= 1.0 && beta.is_finite()) {
        return Err(domain(format!("beta = {beta} must be finite and >= 1")));
    }
    Ok(CriticalConstants {
        alphas: beta_schedule(m, q, beta),
        family: ConstantsFamily::Ms,
        q,
        beta: Some(beta),
    })
}

fn beta_schedule(m: usize, q: f64, beta: f64) -> Vec<f64> {
    let mf = m as f64;
    (1..=m)
        .map(|i| {
            let i = i as f64;
            i * q / (mf + beta - i * (1.0 - q))
        })
        .collect()
}

/// Linear schedule `alpha_i = i q / m`.
pub fn bh_constants(m: usize, q: f64) -> Result<CriticalConstants> {
    check_level(q)?;
    Ok(CriticalConstants {
        alphas: linear_schedule(m, q),
        family: ConstantsFamily::Bh,
        q,
        beta: None,
    })
}

fn linear_schedule(m: usize, q: f64) -> Vec<f64> {
    let mf = m as f64;
    (1..=m).map(|i| i as f64 * q / mf).collect()
}

/// Step-down constants that control the FDR under positive regression
/// dependence: the beta family with `beta = m (1 - q)`, so that `alpha_m = q`.
pub fn prds_constants(m: usize, q: f64) -> Result<CriticalConstants> {
    check_level(q)?;
    let beta = m as f64 * (1.0 - q);
    Ok(CriticalConstants {
        alphas: beta_schedule(m, q, beta),
        family: ConstantsFamily::Prds,
        q,
        beta: Some(beta),
    })
}

/// Right-hand side `i q / (m + 1 - i)` of the step-down control condition.
pub fn theorem1_bound(i: usize, m: usize, q: f64) -> f64 {
    i as f64 * q / (m + 1 - i) as f64
}

/// True iff `alpha_i / (1 - alpha_i) <= i q / (m + 1 - i)` for every `i`,
/// up to a relative slack of [`CONDITION_SLACK`].
#[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail
pub fn check_theorem1_condition(c: &CriticalConstants, q: f64) -> bool {
    let m = c.len();
    c.alphas.iter().enumerate().all(|(idx, &a)| {
        if !(a < 1.0) {
            return false;
        }
        let bound = theorem1_bound(idx + 1, m, q);
        a / (1.0 - a) <= bound * (1.0 + CONDITION_SLACK)
    })
}

/// Length of the longest prefix with `p_(j) <= alpha_j`.
pub(crate) fn step_down_count(sorted: &[f64], alphas: &[f64]) -> usize {
    sorted
        .iter()
        .zip(alphas)
        .take_while(|(p, a)| p <= a)
        .count()
}

/// Largest `i` with `p_(i) <= alpha_i`, or 0.
pub(crate) fn step_up_count(sorted: &[f64], alphas: &[f64]) -> usize {
    sorted
        .iter()
        .zip(alphas)
        .rposition(|(p, a)| p <= a)
        .map_or(0, |i| i + 1)
}

fn check_lengths(pv: &PValueVector, c: &CriticalConstants) -> Result<()> {
    if pv.len() == c.len() {
        Ok(())
    } else {
        Err(Error::LengthMismatch {
            expected: pv.len(),
            found: c.len(),
        })
    }
}

/// Rejects the longest prefix of ordered p-values that stays under the constants.
pub fn step_down(pv: &PValueVector, c: &CriticalConstants) -> Result<RejectionSet> {
    check_lengths(pv, c)?;
    let ordered = sort_pvalues(pv);
    Ok(ordered.reject_first(step_down_count(ordered.sorted_values(), &c.alphas)))
}

/// Rejects ranks `1..=k` where `k` is the largest rank under its constant.
pub fn step_up(pv: &PValueVector, c: &CriticalConstants) -> Result<RejectionSet> {
    check_lengths(pv, c)?;
    let ordered = sort_pvalues(pv);
    Ok(ordered.reject_first(step_up_count(ordered.sorted_values(), &c.alphas)))
}

/// The two engines every procedure is built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    StepDown,
    StepUp,
}

impl Engine {
    pub fn count(self, sorted: &[f64], alphas: &[f64]) -> usize {
        match self {
            Engine::StepDown => step_down_count(sorted, alphas),
            Engine::StepUp => step_up_count(sorted, alphas),
        }
    }
}

/// The procedures compared in the simulation study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Procedure {
    /// Linear step-up at level q.
    #[serde(rename = "BH")]
    Bh,
    /// Two-stage adaptive linear step-up.
    #[serde(rename = "TS")]
    Ts,
    /// Multiple-stage adaptive step-down.
    #[serde(rename = "MS")]
    Ms,
    /// Modified Storey procedure with selection capped at λ.
    #[serde(rename = "STS")]
    Sts,
    /// Linear step-up at level q·m/m0 with the true m0.
    #[serde(rename = "ORC")]
    Orc,
    /// Step-down with the positive-dependence constants.
    #[serde(rename = "PRDS")]
    Prds,
}

impl Procedure {
    pub const ALL: [Procedure; 6] = [
        Procedure::Bh,
        Procedure::Ts,
        Procedure::Ms,
        Procedure::Sts,
        Procedure::Orc,
        Procedure::Prds,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Procedure::Bh => "BH",
            Procedure::Ts => "TS",
            Procedure::Ms => "MS",
            Procedure::Sts => "STS",
            Procedure::Orc => "ORC",
            Procedure::Prds => "PRDS",
        }
    }

    pub fn engine(self) -> Engine {
        match self {
            Procedure::Ms | Procedure::Prds => Engine::StepDown,
            _ => Engine::StepUp,
        }
    }

    /// Family of the final-stage schedule.
    pub fn family(self) -> ConstantsFamily {
        match self {
            Procedure::Bh => ConstantsFamily::Bh,
            Procedure::Ms => ConstantsFamily::Ms,
            Procedure::Prds => ConstantsFamily::Prds,
            _ => ConstantsFamily::Custom,
        }
    }
}

impl fmt::Display for Procedure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Procedure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "BH" => Ok(Procedure::Bh),
            "TS" | "BKY" => Ok(Procedure::Ts),
            "MS" => Ok(Procedure::Ms),
            "STS" | "STOREY" => Ok(Procedure::Sts),
            "ORC" | "ORACLE" => Ok(Procedure::Orc),
            "PRDS" => Ok(Procedure::Prds),
            _ => Err(domain(format!("unknown procedure '{s}'"))),
        }
    }
}

/// Fixed-`m`, fixed-`q` evaluation context. The data-independent schedules
/// are computed once so that repeated evaluation (as in the simulation)
/// only pays for the adaptive ones.
#[derive(Debug, Clone)]
pub struct ProcedureContext {
    m: usize,
    q: f64,
    lambda: f64,
    bh: Vec<f64>,
    ms: Vec<f64>,
    prds: Vec<f64>,
}

impl ProcedureContext {
    pub fn new(m: usize, q: f64, lambda: f64) -> Result<Self> {
        check_level(q)?;
        check_lambda(lambda)?;
        Ok(Self {
            m,
            q,
            lambda,
            bh: linear_schedule(m, q),
            ms: beta_schedule(m, q, 1.0),
            prds: beta_schedule(m, q, m as f64 * (1.0 - q)),
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// The schedule the procedure compares `sorted` against in its final pass.
    /// `m0` is required by the oracle and ignored otherwise.
    pub fn constants(&self, proc: Procedure, sorted: &[f64], m0: Option<usize>) -> Result<Vec<f64>> {
        if sorted.len() != self.m {
            return Err(Error::LengthMismatch {
                expected: sorted.len(),
                found: self.m,
            });
        }
        let m = self.m;
        let alphas = match proc {
            Procedure::Bh => self.bh.clone(),
            Procedure::Ms => self.ms.clone(),
            Procedure::Prds => self.prds.clone(),
            Procedure::Ts => {
                let q1 = self.q / (1.0 + self.q);
                let stage1 = linear_schedule(m, q1);
                let r1 = step_up_count(sorted, &stage1);
                if r1 == 0 || r1 == m {
                    stage1
                } else {
                    // Second stage at q* = q' m / (m - r1); constants above 1
                    // are clamped since every p-value passes them anyway.
                    let m0_hat = (m - r1) as f64;
                    (1..=m)
                        .map(|i| (i as f64 * q1 / m0_hat).min(1.0))
                        .collect()
                }
            }
            Procedure::Sts => {
                let r = sorted.partition_point(|&p| p <= self.lambda);
                let m0_hat = (m + 1 - r) as f64 / (1.0 - self.lambda);
                let level = self.q / m0_hat;
                (1..=m)
                    .map(|i| (i as f64 * level).min(self.lambda))
                    .collect()
            }
            Procedure::Orc => {
                let m0 = m0.ok_or_else(|| domain("the oracle procedure requires m0"))?;
                if m0 > m {
                    return Err(domain(format!("m0 = {m0} exceeds m = {m}")));
                }
                if m0 == 0 {
                    // No true nulls: reject every p-value below 1.
                    vec![1.0f64.next_down(); m]
                } else {
                    let level = self.q / m0 as f64;
                    (1..=m)
                        .map(|i| (i as f64 * level).min(ORACLE_CAP))
                        .collect()
                }
            }
        };
        Ok(alphas)
    }

    /// Number of rejections on already-sorted p-values.
    pub fn count(&self, proc: Procedure, sorted: &[f64], m0: Option<usize>) -> Result<usize> {
        let k = match proc {
            Procedure::Bh => step_up_count(sorted, &self.bh),
            Procedure::Ms => step_down_count(sorted, &self.ms),
            Procedure::Prds => step_down_count(sorted, &self.prds),
            _ => proc.engine().count(sorted, &self.constants(proc, sorted, m0)?),
        };
        Ok(k)
    }
}

/// A procedure's decision together with the schedule it used.
#[derive(Debug, Clone, PartialEq)]
pub struct Adjustment {
    pub procedure: Procedure,
    pub rejections: RejectionSet,
    pub ordered: OrderedPValues,
    /// Final-stage constants, indexed by zero-based rank.
    pub constants: Vec<f64>,
}

/// Settings beyond `q` that some procedures need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcedureOptions {
    pub lambda: f64,
    pub m0: Option<usize>,
}

impl Default for ProcedureOptions {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            m0: None,
        }
    }
}

/// Runs `proc` on `pv` and reports both the rejections and the constants used.
pub fn apply(
    proc: Procedure,
    pv: &PValueVector,
    q: f64,
    opts: ProcedureOptions,
) -> Result<Adjustment> {
    let ctx = ProcedureContext::new(pv.len(), q, opts.lambda)?;
    let ordered = sort_pvalues(pv);
    let constants = ctx.constants(proc, ordered.sorted_values(), opts.m0)?;
    let k = proc.engine().count(ordered.sorted_values(), &constants);
    Ok(Adjustment {
        procedure: proc,
        rejections: ordered.reject_first(k),
        ordered,
        constants,
    })
}

fn run(proc: Procedure, pv: &PValueVector, q: f64, opts: ProcedureOptions) -> Result<RejectionSet> {
    apply(proc, pv, q, opts).map(|a| a.rejections)
}

/// Multiple-stage adaptive step-down procedure.
pub fn ms_procedure(pv: &PValueVector, q: f64) -> Result<RejectionSet> {
    run(Procedure::Ms, pv, q, ProcedureOptions::default())
}

/// Linear step-up (Benjamini–Hochberg) procedure.
pub fn bh_procedure(pv: &PValueVector, q: f64) -> Result<RejectionSet> {
    run(Procedure::Bh, pv, q, ProcedureOptions::default())
}

/// Two-stage adaptive linear step-up: a first pass at `q / (1 + q)` estimates
/// `m0` as the number of non-rejections, and the second pass reruns the
/// linear step-up on all hypotheses at `q' m / m0_hat`.
pub fn two_stage_bky(pv: &PValueVector, q: f64) -> Result<RejectionSet> {
    run(Procedure::Ts, pv, q, ProcedureOptions::default())
}

/// Storey-type adaptive step-up with `m0_hat = (m + 1 - r(λ)) / (1 - λ)`;
/// hypotheses with `p > λ` are never rejected.
pub fn sts_procedure(pv: &PValueVector, q: f64, lambda: f64) -> Result<RejectionSet> {
    run(
        Procedure::Sts,
        pv,
        q,
        ProcedureOptions { lambda, m0: None },
    )
}

/// Linear step-up at level `q m / m0` using the true number of nulls.
pub fn oracle_bh(pv: &PValueVector, q: f64, m0: usize) -> Result<RejectionSet> {
    run(
        Procedure::Orc,
        pv,
        q,
        ProcedureOptions {
            m0: Some(m0),
            ..Default::default()
        },
    )
}

/// Step-down with [`prds_constants`].
pub fn prds_procedure(pv: &PValueVector, q: f64) -> Result<RejectionSet> {
    run(Procedure::Prds, pv, q, ProcedureOptions::default())
}
