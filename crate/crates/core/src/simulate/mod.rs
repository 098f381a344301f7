//! Monte Carlo study of FDR and power under an equicorrelated Gaussian model.
//!
//! Each replication draws `Z_1, ..., Z_{m+1}` i.i.d. standard normal, forms
//! `Y_i = sqrt(rho) Z_{m+1} + sqrt(1 - rho) Z_i + mu_i` and tests with the
//! one-sided p-value `p_i = 1 - Φ(Y_i)`. True nulls have `mu_i = 0` and occupy
//! ids `0..m0`; false nulls cycle through `mu_pattern`.
//!
//! Every replication owns an RNG stream seeded from
//! `(master_seed, scenario hash, rep_index)`, and per-replication results are
//! reduced in ascending `rep_index` order, so results do not depend on how
//! many workers run the replications.

mod config;
mod report;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::normal;
use crate::procedures::{check_level, Procedure, ProcedureContext, DEFAULT_LAMBDA};
use crate::pvalues::{ConfusionCounts, PValueVector, Truth};

pub use config::{ConfigError, ExperimentConfig};
pub use report::{format_tables, write_csv, write_curves, write_json, ResultRow, CSV_COLUMNS};

pub const DEFAULT_REPS: usize = 5000;
pub const DEFAULT_MU_PATTERN: [f64; 4] = [1.0, 2.0, 3.0, 4.0];

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// 64-bit avalanche mixer (the SplitMix64 finaliser).
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn absorb(state: u64, word: u64) -> u64 {
    mix64(state.wrapping_add(GOLDEN_GAMMA) ^ word)
}

/// One simulation cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub m: usize,
    pub pi0: f64,
    pub rho: f64,
    pub q: f64,
    pub reps: usize,
    pub master_seed: u64,
    pub mu_pattern: Vec<f64>,
}

impl Scenario {
    pub fn new(m: usize, pi0: f64, rho: f64, q: f64, reps: usize, master_seed: u64) -> Self {
        Self {
            m,
            pi0,
            rho,
            q,
            reps,
            master_seed,
            mu_pattern: DEFAULT_MU_PATTERN.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_level(self.q)?;
        if !(0.0..=1.0).contains(&self.pi0) {
            return Err(domain(format!("pi0 = {} must lie in [0, 1]", self.pi0)));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(domain(format!("rho = {} must lie in [0, 1)", self.rho)));
        }
        if self.reps == 0 {
            return Err(domain("reps must be at least 1"));
        }
        if self.m1() > 0 && self.mu_pattern.is_empty() {
            return Err(domain("mu_pattern must not be empty when there are false nulls"));
        }
        if self.mu_pattern.iter().any(|mu| !mu.is_finite()) {
            return Err(domain("mu_pattern values must be finite"));
        }
        Ok(())
    }

    /// Number of true nulls, `round(m * pi0)`.
    pub fn m0(&self) -> usize {
        ((self.m as f64 * self.pi0).round() as usize).min(self.m)
    }

    pub fn m1(&self) -> usize {
        self.m - self.m0()
    }

    /// Mean shift of every hypothesis, indexed by id.
    pub fn shifts(&self) -> Vec<f64> {
        let m0 = self.m0();
        (0..self.m)
            .map(|id| {
                if id < m0 {
                    0.0
                } else {
                    self.mu_pattern[(id - m0) % self.mu_pattern.len()]
                }
            })
            .collect()
    }

    pub fn truth_by_id(&self) -> Vec<Truth> {
        let m0 = self.m0();
        (0..self.m)
            .map(|id| if id < m0 { Truth::TrueNull } else { Truth::FalseNull })
            .collect()
    }

    /// Hash of the fields that define the data-generating model. The
    /// replication count and master seed are excluded.
    pub fn scenario_hash(&self) -> u64 {
        let mut h = absorb(0, self.m as u64);
        h = absorb(h, self.pi0.to_bits());
        h = absorb(h, self.rho.to_bits());
        h = absorb(h, self.q.to_bits());
        for mu in &self.mu_pattern {
            h = absorb(h, mu.to_bits());
        }
        h
    }

    /// Seed of the RNG stream for one replication.
    pub fn stream_seed(&self, rep_index: usize) -> u64 {
        let base = absorb(mix64(self.master_seed), self.scenario_hash());
        absorb(base, rep_index as u64)
    }

    fn check_rep(&self, rep_index: usize) -> Result<()> {
        if rep_index < self.reps {
            Ok(())
        } else {
            Err(domain(format!(
                "rep_index {rep_index} out of range for {} replications",
                self.reps
            )))
        }
    }
}

fn fill_statistics(s: &Scenario, shifts: &[f64], rep_index: usize, out: &mut Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(s.stream_seed(rep_index));
    let shared: f64 = rng.sample(StandardNormal);
    let common = s.rho.sqrt() * shared;
    let own = (1.0 - s.rho).sqrt();
    out.clear();
    out.extend(shifts.iter().map(|&mu| {
        let z: f64 = rng.sample(StandardNormal);
        common + own * z + mu
    }));
}

/// The test statistics `Y_1..Y_m` of one replication.
pub fn generate_statistics(s: &Scenario, rep_index: usize) -> Result<Vec<f64>> {
    s.validate()?;
    s.check_rep(rep_index)?;
    let mut y = Vec::with_capacity(s.m);
    fill_statistics(s, &s.shifts(), rep_index, &mut y);
    Ok(y)
}

/// The labelled p-values of one replication.
pub fn generate_dataset(s: &Scenario, rep_index: usize) -> Result<PValueVector> {
    let p = generate_statistics(s, rep_index)?
        .into_iter()
        .map(normal::upper_tail)
        .collect();
    PValueVector::new(p)?.with_truth(s.truth_by_id())
}

/// Per-scenario state reused across replications.
struct Replicator<'a> {
    scenario: &'a Scenario,
    ctx: ProcedureContext,
    shifts: Vec<f64>,
    m0: usize,
}

#[derive(Default)]
struct Scratch {
    y: Vec<f64>,
    pairs: Vec<(f64, u32)>,
    sorted: Vec<f64>,
    nulls_before: Vec<u32>,
}

impl<'a> Replicator<'a> {
    fn new(scenario: &'a Scenario) -> Result<Self> {
        scenario.validate()?;
        Ok(Self {
            scenario,
            ctx: ProcedureContext::new(scenario.m, scenario.q, DEFAULT_LAMBDA)?,
            shifts: scenario.shifts(),
            m0: scenario.m0(),
        })
    }

    fn run(&self, procs: &[Procedure], rep_index: usize, scratch: &mut Scratch) -> Result<Vec<ConfusionCounts>> {
        let m = self.scenario.m;
        fill_statistics(self.scenario, &self.shifts, rep_index, &mut scratch.y);

        scratch.pairs.clear();
        scratch.pairs.extend(
            scratch
                .y
                .iter()
                .enumerate()
                .map(|(id, &y)| (normal::upper_tail(y), id as u32)),
        );
        scratch
            .pairs
            .sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        scratch.sorted.clear();
        scratch.sorted.extend(scratch.pairs.iter().map(|&(p, _)| p));
        scratch.nulls_before.clear();
        scratch.nulls_before.push(0);
        let mut nulls = 0;
        for &(_, id) in &scratch.pairs {
            nulls += u32::from((id as usize) < self.m0);
            scratch.nulls_before.push(nulls);
        }

        procs
            .iter()
            .map(|&proc| {
                let k = self.ctx.count(proc, &scratch.sorted, Some(self.m0))?;
                let v = scratch.nulls_before[k] as usize;
                Ok(ConfusionCounts {
                    v,
                    s: k - v,
                    r: k,
                    m0: self.m0,
                    m1: m - self.m0,
                })
            })
            .collect()
    }
}

/// Generates one dataset and evaluates every procedure on it. The oracle is
/// given the true `m0`.
pub fn run_replication(
    s: &Scenario,
    procs: &[Procedure],
    rep_index: usize,
) -> Result<BTreeMap<Procedure, ConfusionCounts>> {
    s.check_rep(rep_index)?;
    let rep = Replicator::new(s)?;
    let counts = rep.run(procs, rep_index, &mut Scratch::default())?;
    Ok(procs.iter().copied().zip(counts).collect())
}

/// Aggregated estimates for one procedure in one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultCell {
    pub procedure: Procedure,
    pub scenario: Scenario,
    /// Mean of `V / max(R, 1)`.
    pub fdr_hat: f64,
    /// Standard error of `fdr_hat`; `None` with a single replication.
    pub fdr_se: Option<f64>,
    /// Mean of `S / m1`; `None` when `m1 = 0`.
    pub power_hat: Option<f64>,
    pub power_se: Option<f64>,
    /// `power_hat` over the oracle's `power_hat` on the same replications.
    pub rel_power: Option<f64>,
}

/// Running mean and variance, updated in a fixed order.
#[derive(Debug, Clone, Copy, Default)]
struct Welford {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn se(&self) -> Option<f64> {
        (self.n > 1).then(|| (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt())
    }
}

/// Runs every scenario and aggregates one [`ResultCell`] per
/// (scenario, procedure), in grid order then `procs` order.
///
/// `workers = None` uses the available parallelism. The output is identical
/// for any worker count.
pub fn run_experiment(grid: &[Scenario], procs: &[Procedure], workers: Option<usize>) -> Result<Vec<ResultCell>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| domain(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        let mut cells = Vec::with_capacity(grid.len() * procs.len());
        for scenario in grid {
            cells.extend(run_scenario(scenario, procs)?);
        }
        Ok(cells)
    })
}

fn run_scenario(scenario: &Scenario, procs: &[Procedure]) -> Result<Vec<ResultCell>> {
    let rep = Replicator::new(scenario)?;

    // The oracle always runs so relative power can be reported.
    let mut evaluated: Vec<Procedure> = procs.to_vec();
    let oracle_slot = match evaluated.iter().position(|&p| p == Procedure::Orc) {
        Some(i) => i,
        None => {
            evaluated.push(Procedure::Orc);
            evaluated.len() - 1
        }
    };

    let per_rep: Vec<Vec<ConfusionCounts>> = (0..scenario.reps)
        .into_par_iter()
        .map_init(Scratch::default, |scratch, i| rep.run(&evaluated, i, scratch))
        .collect::<Result<_>>()?;

    let mut fdr = vec![Welford::default(); evaluated.len()];
    let mut power = vec![Welford::default(); evaluated.len()];
    for counts in &per_rep {
        for (slot, c) in counts.iter().enumerate() {
            fdr[slot].push(c.fdp());
            if let Some(pw) = c.power() {
                power[slot].push(pw);
            }
        }
    }

    let power_hat = |slot: usize| (power[slot].n > 0).then_some(power[slot].mean);
    let oracle_power = power_hat(oracle_slot);
    Ok(procs
        .iter()
        .enumerate()
        .map(|(slot, &procedure)| {
            let ph = power_hat(slot);
            ResultCell {
                procedure,
                scenario: scenario.clone(),
                fdr_hat: fdr[slot].mean,
                fdr_se: fdr[slot].se(),
                power_hat: ph,
                power_se: ph.and(power[slot].se()),
                rel_power: match (ph, oracle_power) {
                    (Some(p), Some(o)) if o > 0.0 => Some(p / o),
                    _ => None,
                },
            }
        })
        .collect())
}
