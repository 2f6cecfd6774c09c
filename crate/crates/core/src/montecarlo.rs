//! Seeded simulation of pre/post-selected runs and of paired
//! actual/counterfactual worlds.
//!
//! Every uniform draw comes from a ChaCha8 keystream addressed by
//! `(seed, system_id, stream, stage)`, so a record depends only on its own
//! key and not on iteration order or thread count.
//!
//! Quantum mechanics assigns no joint distribution to runs in different
//! worlds, so paired runs are always produced under an explicit
//! [`Coupling`]:
//!
//! - `Independent`: each world uses its own stream of draws.
//! - `CommonRandomNumbers`: both worlds consume the same draws. Paired
//!   worlds sample the post-selection outcome first from its marginal and
//!   the intervening outcome from its conditional (ABL) distribution given
//!   that post outcome; this yields the same joint law as sequential
//!   collapse, and makes the shared post draw decide post-selection in both
//!   worlds.
//!
//! Outcomes are chosen by inverse CDF over the measurement's declared
//! outcome order.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensembles::{born_probability, mixture_m, mixture_m_prime};
use crate::error::{Error, Result};
use crate::hilbert::{SpectralMeasurement, StateVector};
use crate::tsvf::conditional_distribution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum World {
    Actual,
    Counterfactual,
}

impl fmt::Display for World {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            World::Actual => "actual",
            World::Counterfactual => "counterfactual",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coupling {
    Independent,
    CommonRandomNumbers,
    /// Hand-entered records (e.g. an illustrative distribution), not sampled.
    Prescribed,
}

impl fmt::Display for Coupling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Coupling::Independent => "independent",
            Coupling::CommonRandomNumbers => "common-random-numbers",
            Coupling::Prescribed => "prescribed",
        })
    }
}

impl FromStr for Coupling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "independent" => Ok(Coupling::Independent),
            "crn" | "common-random-numbers" => Ok(Coupling::CommonRandomNumbers),
            _ => Err(Error::parse(
                s,
                "expected `independent` or `common-random-numbers`",
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stream {
    Shared,
    Actual,
    Counterfactual,
}

impl Stream {
    fn code(self) -> u128 {
        match self {
            Stream::Shared => 0,
            Stream::Actual => 1,
            Stream::Counterfactual => 2,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Stream::Shared => "shared",
            Stream::Actual => "actual",
            Stream::Counterfactual => "counterfactual",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    Mid,
    Post,
}

/// Uniform draw in `[0, 1)` for one key. Each `(stream, stage)` lane reads
/// its own 64-byte ChaCha block of the system's stream.
fn keyed_uniform(seed: u64, system_id: u64, stream: Stream, stage: Stage) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(system_id);
    let lane = stream.code() * 2 + stage as u128;
    rng.set_word_pos(lane * 16);
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn seed_path(seed: u64, system_id: u64, stream: Stream) -> String {
    format!("seed={seed}/system={system_id}/stream={}", stream.name())
}

/// Index chosen by inverse CDF; outcomes with zero probability are never
/// returned.
fn inverse_cdf(probs: &[f64], u: f64) -> usize {
    let mut cum = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        last_positive = i;
        cum += p;
        if u < cum {
            return i;
        }
    }
    last_positive
}

/// One preparation / optional intervening measurement / post-selection
/// protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct Protocol {
    pub pre_label: String,
    pub pre: StateVector,
    pub mid: Option<SpectralMeasurement>,
    pub post: SpectralMeasurement,
}

impl Protocol {
    pub fn new(
        pre_label: impl Into<String>,
        pre: StateVector,
        mid: Option<SpectralMeasurement>,
        post: SpectralMeasurement,
    ) -> Result<Self> {
        if let Some(m) = &mid {
            m.ensure_dim(pre.dim())?;
        }
        post.ensure_dim(pre.dim())?;
        Ok(Self {
            pre_label: pre_label.into(),
            pre,
            mid,
            post,
        })
    }

    /// Joint probabilities `⟨a|P_j Q_k P_j|a⟩`, mid-major; a single row
    /// when there is no intervening measurement.
    fn joint(&self) -> Vec<Vec<f64>> {
        let a = self.pre.vector();
        let arrivals: Vec<_> = match &self.mid {
            Some(m) => m.outcomes().iter().map(|o| o.projector.apply(a)).collect(),
            None => vec![a.clone()],
        };
        arrivals
            .iter()
            .map(|v| {
                self.post
                    .outcomes()
                    .iter()
                    .map(|q| q.projector.apply(v).norm_squared())
                    .collect()
            })
            .collect()
    }

    fn mid_label(&self, j: usize) -> Option<String> {
        self.mid.as_ref().map(|m| m.outcomes()[j].label.clone())
    }

    fn post_label(&self, k: usize) -> String {
        self.post.outcomes()[k].label.clone()
    }
}

/// Precomputed sampling tables for one protocol.
struct Sampler<'a> {
    protocol: &'a Protocol,
    mid_marginal: Vec<f64>,
    post_given_mid: Vec<Vec<f64>>,
    post_marginal: Vec<f64>,
    mid_given_post: Vec<Vec<f64>>,
}

fn normalized_row(row: &[f64]) -> Vec<f64> {
    let total: f64 = row.iter().sum();
    if total > 0.0 {
        row.iter().map(|p| p / total).collect()
    } else {
        vec![0.0; row.len()]
    }
}

impl<'a> Sampler<'a> {
    fn new(protocol: &'a Protocol) -> Self {
        let joint = protocol.joint();
        let n_post = protocol.post.len();
        let mid_marginal = joint.iter().map(|row| row.iter().sum()).collect();
        let post_given_mid = joint.iter().map(|row| normalized_row(row)).collect();
        let post_marginal: Vec<f64> = (0..n_post)
            .map(|k| joint.iter().map(|row| row[k]).sum())
            .collect();
        let mid_given_post = (0..n_post)
            .map(|k| normalized_row(&joint.iter().map(|row| row[k]).collect::<Vec<_>>()))
            .collect();
        Self {
            protocol,
            mid_marginal,
            post_given_mid,
            post_marginal,
            mid_given_post,
        }
    }

    /// Collapse through the intervening measurement, then post-select.
    fn forward(&self, seed: u64, system_id: u64, stream: Stream, world: World) -> RunRecord {
        let j = inverse_cdf(
            &self.mid_marginal,
            keyed_uniform(seed, system_id, stream, Stage::Mid),
        );
        let k = inverse_cdf(
            &self.post_given_mid[j],
            keyed_uniform(seed, system_id, stream, Stage::Post),
        );
        self.record(system_id, world, j, k, seed_path(seed, system_id, stream))
    }

    /// Post-selection outcome from its marginal, then the intervening outcome
    /// from its conditional distribution given that post outcome.
    fn retrodictive(&self, seed: u64, system_id: u64, stream: Stream, world: World) -> RunRecord {
        let k = inverse_cdf(
            &self.post_marginal,
            keyed_uniform(seed, system_id, stream, Stage::Post),
        );
        let j = inverse_cdf(
            &self.mid_given_post[k],
            keyed_uniform(seed, system_id, stream, Stage::Mid),
        );
        self.record(system_id, world, j, k, seed_path(seed, system_id, stream))
    }

    fn record(
        &self,
        system_id: u64,
        world: World,
        j: usize,
        k: usize,
        seed_path: String,
    ) -> RunRecord {
        RunRecord {
            system_id,
            world,
            pre: self.protocol.pre_label.clone(),
            mid: self.protocol.mid_label(j),
            post: self.protocol.post_label(k),
            seed_path,
        }
    }
}

/// One simulated system.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRecord {
    pub system_id: u64,
    pub world: World,
    pub pre: String,
    pub mid: Option<String>,
    pub post: String,
    pub seed_path: String,
}

/// Whether to fan work out over the rayon pool. Output is identical either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

fn run_ids<F>(n: u64, execution: Execution, f: F) -> Vec<RunRecord>
where
    F: Fn(u64) -> RunRecord + Sync + Send,
{
    match execution {
        Execution::Sequential => (1..=n).map(f).collect(),
        Execution::Parallel => (1..=n).into_par_iter().map(f).collect(),
    }
}

/// `n` systems (ids `1..=n`) sampled by sequential collapse.
pub fn simulate_runs(protocol: &Protocol, n: u64, seed: u64) -> Result<Vec<RunRecord>> {
    simulate_runs_with(protocol, n, seed, Execution::default())
}

pub fn simulate_runs_with(
    protocol: &Protocol,
    n: u64,
    seed: u64,
    execution: Execution,
) -> Result<Vec<RunRecord>> {
    if n == 0 {
        return Err(Error::EmptyRun);
    }
    let sampler = Sampler::new(protocol);
    Ok(run_ids(n, execution, |id| {
        sampler.forward(seed, id, Stream::Actual, World::Actual)
    }))
}

/// Actual and counterfactual protocols sharing pre-selection and the
/// post-selection measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedExperiment {
    pub pre_label: String,
    pub pre: StateVector,
    pub mid_actual: Option<SpectralMeasurement>,
    pub mid_counterfactual: SpectralMeasurement,
    pub post: SpectralMeasurement,
}

impl PairedExperiment {
    pub fn actual(&self) -> Result<Protocol> {
        Protocol::new(
            self.pre_label.clone(),
            self.pre.clone(),
            self.mid_actual.clone(),
            self.post.clone(),
        )
    }

    pub fn counterfactual(&self) -> Result<Protocol> {
        Protocol::new(
            self.pre_label.clone(),
            self.pre.clone(),
            Some(self.mid_counterfactual.clone()),
            self.post.clone(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairedRunSet {
    pub coupling: Coupling,
    pub actual: Vec<RunRecord>,
    pub counterfactual: Vec<RunRecord>,
}

impl PairedRunSet {
    /// Validates that both worlds cover the same systems in the same order
    /// with the same pre-selection outcome.
    pub fn new(
        coupling: Coupling,
        actual: Vec<RunRecord>,
        counterfactual: Vec<RunRecord>,
    ) -> Result<Self> {
        if actual.len() != counterfactual.len() {
            return Err(Error::MalformedPairing(format!(
                "{} actual records vs {} counterfactual",
                actual.len(),
                counterfactual.len()
            )));
        }
        for (a, c) in actual.iter().zip(&counterfactual) {
            if a.world != World::Actual || c.world != World::Counterfactual {
                return Err(Error::MalformedPairing(format!(
                    "system {} has wrong world tags",
                    a.system_id
                )));
            }
            if a.system_id != c.system_id {
                return Err(Error::MalformedPairing(format!(
                    "system ids {} and {} are not aligned",
                    a.system_id, c.system_id
                )));
            }
            if a.pre != c.pre {
                return Err(Error::MalformedPairing(format!(
                    "system {} has different pre-selection outcomes",
                    a.system_id
                )));
            }
        }
        Ok(Self {
            coupling,
            actual,
            counterfactual,
        })
    }

    pub fn records(&self) -> impl Iterator<Item = &RunRecord> {
        self.actual.iter().chain(&self.counterfactual)
    }
}

/// Runs both worlds of `exp` over systems `1..=n` under `coupling`.
pub fn paired_worlds(
    exp: &PairedExperiment,
    n: u64,
    seed: u64,
    coupling: Coupling,
) -> Result<PairedRunSet> {
    paired_worlds_with(exp, n, seed, coupling, Execution::default())
}

pub fn paired_worlds_with(
    exp: &PairedExperiment,
    n: u64,
    seed: u64,
    coupling: Coupling,
    execution: Execution,
) -> Result<PairedRunSet> {
    if n == 0 {
        return Err(Error::EmptyRun);
    }
    let (actual_stream, cf_stream) = match coupling {
        Coupling::Independent => (Stream::Actual, Stream::Counterfactual),
        Coupling::CommonRandomNumbers => (Stream::Shared, Stream::Shared),
        Coupling::Prescribed => {
            return Err(Error::param(
                "coupling",
                "prescribed records cannot be simulated",
            ));
        }
    };
    let actual_protocol = exp.actual()?;
    let cf_protocol = exp.counterfactual()?;
    let actual_sampler = Sampler::new(&actual_protocol);
    let cf_sampler = Sampler::new(&cf_protocol);
    let actual = run_ids(n, execution, |id| {
        actual_sampler.retrodictive(seed, id, actual_stream, World::Actual)
    });
    let counterfactual = run_ids(n, execution, |id| {
        cf_sampler.retrodictive(seed, id, cf_stream, World::Counterfactual)
    });
    PairedRunSet::new(coupling, actual, counterfactual)
}

/// Systems post-selected in `target_post` in both worlds.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedSystems {
    pub target_post: String,
    pub system_ids: Vec<u64>,
    /// Actual-world systems with post outcome `target_post`.
    pub actual_selected: usize,
    /// `system_ids.len() / actual_selected`.
    pub fraction: f64,
}

pub fn fixed_systems(pairs: &PairedRunSet, target_post: &str) -> Result<FixedSystems> {
    let mut actual_selected = 0;
    let mut system_ids = Vec::new();
    for (a, c) in pairs.actual.iter().zip(&pairs.counterfactual) {
        if a.post == target_post {
            actual_selected += 1;
            if c.post == target_post {
                system_ids.push(a.system_id);
            }
        }
    }
    if actual_selected == 0 {
        return Err(Error::EmptySelection(target_post.to_string()));
    }
    Ok(FixedSystems {
        target_post: target_post.to_string(),
        fraction: system_ids.len() as f64 / actual_selected as f64,
        system_ids,
        actual_selected,
    })
}

/// Probability, under `coupling`, that a system post-selected in
/// `target_post` in the actual world is post-selected the same way in the
/// counterfactual world.
pub fn expected_fixed_fraction(
    exp: &PairedExperiment,
    target_post: &str,
    coupling: Coupling,
) -> Result<f64> {
    let k = exp.post.index_of(target_post)?;
    let actual = exp.actual()?;
    let cf = exp.counterfactual()?;
    let a = Sampler::new(&actual).post_marginal;
    let c = Sampler::new(&cf).post_marginal;
    if a[k] <= 0.0 {
        return Err(Error::EmptySelection(target_post.to_string()));
    }
    match coupling {
        Coupling::Independent => Ok(c[k]),
        Coupling::CommonRandomNumbers => {
            let (a_lo, c_lo) = (a[..k].iter().sum::<f64>(), c[..k].iter().sum::<f64>());
            let overlap = ((a_lo + a[k]).min(c_lo + c[k]) - a_lo.max(c_lo)).max(0.0);
            Ok(overlap / a[k])
        }
        Coupling::Prescribed => Err(Error::param("coupling", "no model for prescribed records")),
    }
}

/// Expected number of systems (out of `n`) in each `(mid, post)` cell.
pub fn expected_counts(protocol: &Protocol, n: f64) -> Vec<(Option<String>, String, f64)> {
    protocol
        .joint()
        .iter()
        .enumerate()
        .flat_map(|(j, row)| {
            row.iter()
                .enumerate()
                .map(move |(k, p)| (protocol.mid_label(j), protocol.post_label(k), n * p))
        })
        .collect()
}

/// How records are grouped in a [`FrequencyReport`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GroupBy {
    /// Post-selection outcome; theory is the M or `η` weight.
    Post,
    /// Intervening outcome; theory is the Born probability.
    Mid,
    /// `(mid, post)` cell; theory is the `E'_jk` weight.
    MidPost,
    /// Intervening outcome among systems post-selected in the given outcome;
    /// theory is the ABL probability.
    MidGivenPost(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyRow {
    pub group: String,
    pub count: u64,
    pub total: u64,
    pub empirical: f64,
    pub theory: f64,
    /// `(empirical − theory) / sqrt(theory (1 − theory) / total)`; `None`
    /// when the theoretical variance is zero and the frequencies differ.
    pub z: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyReport {
    pub group_by: GroupBy,
    pub rows: Vec<FrequencyRow>,
}

impl FrequencyReport {
    pub fn max_abs_z(&self) -> Option<f64> {
        self.rows
            .iter()
            .try_fold(0.0_f64, |acc, r| r.z.map(|z| acc.max(z.abs())))
    }

    pub fn row(&self, group: &str) -> Option<&FrequencyRow> {
        self.rows.iter().find(|r| r.group == group)
    }
}

fn frequency_row(group: String, count: u64, total: u64, theory: f64) -> FrequencyRow {
    let empirical = count as f64 / total as f64;
    let var = theory * (1.0 - theory) / total as f64;
    let z = if var > 0.0 {
        Some((empirical - theory) / var.sqrt())
    } else if (empirical - theory).abs() < 1e-12 {
        Some(0.0)
    } else {
        None
    };
    FrequencyRow {
        group,
        count,
        total,
        empirical,
        theory,
        z,
    }
}

/// Empirical frequencies of `records` against the weights the ensembles
/// module predicts for `protocol`.
pub fn frequency_report(
    records: &[RunRecord],
    protocol: &Protocol,
    group_by: GroupBy,
) -> Result<FrequencyReport> {
    if records.is_empty() {
        return Err(Error::EmptyRun);
    }
    let total = records.len() as u64;
    let count =
        |pred: &dyn Fn(&RunRecord) -> bool| records.iter().filter(|r| pred(r)).count() as u64;
    let no_mid = || Error::param("group_by", "protocol has no intervening measurement");
    let rows = match &group_by {
        GroupBy::Post => {
            let weights: Vec<(String, f64)> = match &protocol.mid {
                None => mixture_m(&protocol.pre, &protocol.post)?
                    .subensembles
                    .into_iter()
                    .map(|s| (s.post_outcome, s.weight))
                    .collect(),
                Some(mid) => {
                    let mp = mixture_m_prime(&protocol.pre, mid, &protocol.post)?;
                    protocol
                        .post
                        .labels()
                        .map(|l| Ok((l.to_string(), mp.eta_weight(l)?)))
                        .collect::<Result<_>>()?
                }
            };
            weights
                .into_iter()
                .map(|(label, w)| {
                    let c = count(&|r| r.post == label);
                    frequency_row(label, c, total, w)
                })
                .collect()
        }
        GroupBy::Mid => {
            let mid = protocol.mid.as_ref().ok_or_else(no_mid)?;
            mid.labels()
                .map(|l| {
                    let c = count(&|r| r.mid.as_deref() == Some(l));
                    Ok(frequency_row(
                        l.to_string(),
                        c,
                        total,
                        born_probability(&protocol.pre, mid, l)?,
                    ))
                })
                .collect::<Result<_>>()?
        }
        GroupBy::MidPost => {
            let mid = protocol.mid.as_ref().ok_or_else(no_mid)?;
            mixture_m_prime(&protocol.pre, mid, &protocol.post)?
                .subensembles
                .into_iter()
                .map(|s| {
                    let j = s.mid_outcome.clone();
                    let c = count(&|r| r.mid == j && r.post == s.post_outcome);
                    frequency_row(s.label, c, total, s.weight)
                })
                .collect()
        }
        GroupBy::MidGivenPost(post) => {
            let mid = protocol.mid.as_ref().ok_or_else(no_mid)?;
            let q = &protocol.post.outcome(post)?.projector;
            let selected: Vec<_> = records.iter().filter(|r| &r.post == post).collect();
            if selected.is_empty() {
                return Err(Error::EmptySelection(post.clone()));
            }
            let abl = conditional_distribution(&protocol.pre, q, mid)?;
            abl.iter()
                .map(|(l, p)| {
                    let c = selected
                        .iter()
                        .filter(|r| r.mid.as_deref() == Some(l))
                        .count() as u64;
                    frequency_row(l.to_string(), c, selected.len() as u64, p)
                })
                .collect()
        }
    };
    Ok(FrequencyReport { group_by, rows })
}

/// Writes records as CSV with columns `system_id,world,pre,mid,post,seed_path`.
pub fn write_run_records_csv<W: Write>(records: &[RunRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_run_records_csv<R: Read>(reader: R) -> Result<Vec<RunRecord>> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

/// A hand-drawn per-system assignment for two
/// worlds: 16 systems pre-selected spin-up along z, an intervening
/// `σ_θ` (θ = π/2) in the actual world and `σ_φ` (φ = π/3) in the
/// counterfactual one, both post-selected by `σ_z`. Mid labels are
/// `theta1/theta2` and `phi1/phi2`, post labels `z1/z2`.
pub fn paired_world_illustration() -> PairedRunSet {
    const ACTUAL: [(&str, &str, &[u64]); 4] = [
        ("theta1", "z1", &[2, 7, 10, 12]),
        ("theta1", "z2", &[1, 4, 6, 8]),
        ("theta2", "z1", &[3, 5, 15, 16]),
        ("theta2", "z2", &[9, 11, 13, 14]),
    ];
    const COUNTERFACTUAL: [(&str, &str, &[u64]); 4] = [
        ("phi1", "z1", &[1, 3, 4, 6, 7, 10, 11, 13, 14]),
        ("phi1", "z2", &[2, 5, 9]),
        ("phi2", "z1", &[8]),
        ("phi2", "z2", &[12, 15, 16]),
    ];
    let build = |world: World, table: &[(&str, &str, &[u64])]| {
        let mut records: Vec<RunRecord> = table
            .iter()
            .flat_map(|(mid, post, ids)| {
                ids.iter().map(move |&id| RunRecord {
                    system_id: id,
                    world,
                    pre: "z1".into(),
                    mid: Some(mid.to_string()),
                    post: post.to_string(),
                    seed_path: "prescribed".into(),
                })
            })
            .collect();
        records.sort_by_key(|r| r.system_id);
        records
    };
    PairedRunSet {
        coupling: Coupling::Prescribed,
        actual: build(World::Actual, &ACTUAL),
        counterfactual: build(World::Counterfactual, &COUNTERFACTUAL),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{spin_measurement, spin_state, BlochDirection, Spin};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3};

    fn z_up() -> StateVector {
        spin_state(&BlochDirection::z_axis(), Spin::Up)
    }

    fn sigma(theta: f64, name: &str, labels: [&str; 2]) -> SpectralMeasurement {
        spin_measurement(&BlochDirection::from_angles(theta, 0.0))
            .relabeled(name, &labels)
            .unwrap()
    }

    fn paired_setup() -> PairedExperiment {
        PairedExperiment {
            pre_label: "z1".into(),
            pre: z_up(),
            mid_actual: Some(sigma(FRAC_PI_2, "sigma_theta", ["theta1", "theta2"])),
            mid_counterfactual: sigma(FRAC_PI_3, "sigma_phi", ["phi1", "phi2"]),
            post: sigma(0.0, "sigma_z", ["z1", "z2"]),
        }
    }

    #[test]
    fn keyed_draws_are_stable_and_distinct() {
        let a = keyed_uniform(42, 7, Stream::Shared, Stage::Mid);
        assert_eq!(a, keyed_uniform(42, 7, Stream::Shared, Stage::Mid));
        assert_ne!(a, keyed_uniform(42, 7, Stream::Shared, Stage::Post));
        assert_ne!(a, keyed_uniform(42, 8, Stream::Shared, Stage::Mid));
        assert_ne!(a, keyed_uniform(43, 7, Stream::Shared, Stage::Mid));
        assert_ne!(a, keyed_uniform(42, 7, Stream::Actual, Stage::Mid));
        assert!((0.0..1.0).contains(&a));
    }

    #[test]
    fn inverse_cdf_skips_impossible_outcomes() {
        assert_eq!(inverse_cdf(&[0.0, 1.0], 0.0), 1);
        assert_eq!(inverse_cdf(&[0.5, 0.5], 0.4999), 0);
        assert_eq!(inverse_cdf(&[0.5, 0.5], 0.5), 1);
        // Rounding leaves the cumulative sum just under 1.
        assert_eq!(
            inverse_cdf(&[0.3, 0.7 - 1e-16, 0.0], 0.999_999_999_999_999_9),
            1
        );
    }

    #[test]
    fn eigenstate_always_passes_post_selection() {
        let p = Protocol::new("z1", z_up(), None, sigma(0.0, "sigma_z", ["z1", "z2"])).unwrap();
        let runs = simulate_runs(&p, 200, 3).unwrap();
        assert!(runs.iter().all(|r| r.post == "z1" && r.mid.is_none()));
    }

    #[test]
    fn simulate_runs_is_deterministic_and_order_insensitive() {
        let exp = paired_setup();
        let p = exp.actual().unwrap();
        let a = simulate_runs_with(&p, 500, 11, Execution::Sequential).unwrap();
        let b = simulate_runs_with(&p, 500, 11, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, simulate_runs(&p, 500, 12).unwrap());
        assert_eq!(a[0].seed_path, "seed=11/system=1/stream=actual");
        assert!(matches!(simulate_runs(&p, 0, 1), Err(Error::EmptyRun)));
    }

    #[test]
    fn paired_setup_expected_counts() {
        let exp = paired_setup();
        let counts: Vec<f64> = expected_counts(&exp.actual().unwrap(), 16.0)
            .iter()
            .map(|c| c.2)
            .collect();
        for (c, e) in counts.iter().zip([4.0, 4.0, 4.0, 4.0]) {
            assert!((c - e).abs() < 1e-12);
        }
        let counts: Vec<f64> = expected_counts(&exp.counterfactual().unwrap(), 16.0)
            .iter()
            .map(|c| c.2)
            .collect();
        for (c, e) in counts.iter().zip([9.0, 3.0, 1.0, 3.0]) {
            assert!((c - e).abs() < 1e-12);
        }
    }

    #[test]
    fn illustration_fixed_systems() {
        let pairs = paired_world_illustration();
        let f = fixed_systems(&pairs, "z1").unwrap();
        assert_eq!(f.system_ids, vec![3, 7, 10]);
        assert_eq!(f.actual_selected, 8);
        assert_eq!(f.fraction, 3.0 / 8.0);
    }

    #[test]
    fn identical_protocols_give_identical_worlds_under_crn() {
        let mut exp = paired_setup();
        exp.mid_actual = Some(exp.mid_counterfactual.clone());
        let pairs = paired_worlds(&exp, 300, 5, Coupling::CommonRandomNumbers).unwrap();
        for (a, c) in pairs.actual.iter().zip(&pairs.counterfactual) {
            assert_eq!(
                (a.system_id, &a.mid, &a.post),
                (c.system_id, &c.mid, &c.post)
            );
        }
        assert_eq!(fixed_systems(&pairs, "z1").unwrap().fraction, 1.0);
    }

    #[test]
    fn commuting_counterfactual_fixes_every_post_selected_system() {
        let b = sigma(1.0, "sigma_b", ["b1", "b2"]);
        let exp = PairedExperiment {
            pre_label: "a1".into(),
            pre: z_up(),
            mid_actual: None,
            mid_counterfactual: b.clone(),
            post: b,
        };
        let pairs = paired_worlds(&exp, 2000, 9, Coupling::CommonRandomNumbers).unwrap();
        for target in ["b1", "b2"] {
            assert_eq!(fixed_systems(&pairs, target).unwrap().fraction, 1.0);
            assert!(
                (expected_fixed_fraction(&exp, target, Coupling::CommonRandomNumbers).unwrap()
                    - 1.0)
                    .abs()
                    < 1e-12
            );
        }
    }

    #[test]
    fn impossible_counterfactual_post_selection_gives_zero_fraction() {
        // Counterfactual world measures σ_z and post-selects with σ_z: from z-up
        // the `z2` branch is unreachable there but reachable in the actual world.
        let exp = PairedExperiment {
            pre_label: "z1".into(),
            pre: z_up(),
            mid_actual: Some(sigma(FRAC_PI_2, "sigma_x", ["x1", "x2"])),
            mid_counterfactual: sigma(0.0, "sigma_z_mid", ["m1", "m2"]),
            post: sigma(0.0, "sigma_z", ["z1", "z2"]),
        };
        let pairs = paired_worlds(&exp, 400, 1, Coupling::Independent).unwrap();
        assert_eq!(fixed_systems(&pairs, "z2").unwrap().fraction, 0.0);
    }

    #[test]
    fn empty_selection_is_reported() {
        let pairs = paired_world_illustration();
        assert_eq!(
            fixed_systems(&pairs, "z3").unwrap_err(),
            Error::EmptySelection("z3".into())
        );
    }

    #[test]
    fn malformed_pairing_rejected() {
        let mut pairs = paired_world_illustration();
        pairs.counterfactual[0].pre = "other".into();
        assert!(matches!(
            PairedRunSet::new(Coupling::Prescribed, pairs.actual, pairs.counterfactual),
            Err(Error::MalformedPairing(_))
        ));
        assert!(matches!(
            paired_worlds(&paired_setup(), 10, 1, Coupling::Prescribed),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let pairs = paired_world_illustration();
        let records: Vec<RunRecord> = pairs.records().cloned().collect();
        let mut buf = Vec::new();
        write_run_records_csv(&records, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("system_id,world,pre,mid,post,seed_path\n"));
        assert_eq!(text.lines().count(), 33);
        assert_eq!(read_run_records_csv(buf.as_slice()).unwrap(), records);
    }

    #[test]
    fn frequency_report_with_identity_mid_matches_mixture_m() {
        let post = sigma(1.2, "sigma_b", ["b1", "b2"]);
        let with_i = Protocol::new(
            "a1",
            z_up(),
            Some(SpectralMeasurement::identity(2)),
            post.clone(),
        )
        .unwrap();
        let runs = simulate_runs(&with_i, 1000, 2).unwrap();
        let report = frequency_report(&runs, &with_i, GroupBy::Post).unwrap();
        let m = mixture_m(&z_up(), &post).unwrap();
        for row in &report.rows {
            assert!((row.theory - m.post_marginal(&row.group).unwrap()).abs() < 1e-12);
        }
        assert!(matches!(
            frequency_report(
                &runs,
                &Protocol::new("a1", z_up(), None, post).unwrap(),
                GroupBy::Mid
            ),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn z_score_edge_cases() {
        assert_eq!(frequency_row("g".into(), 10, 10, 1.0).z, Some(0.0));
        assert_eq!(frequency_row("g".into(), 9, 10, 1.0).z, None);
        let r = frequency_row("g".into(), 60, 100, 0.5);
        assert!((r.z.unwrap() - 2.0).abs() < 1e-12);
    }
}
