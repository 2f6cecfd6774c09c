//! Checks that decide when an ABL probability may be read as the
//! probability an unperformed measurement *would* have had.
//!
//! Three checks are provided:
//!
//! - [`weight_condition`]: the weight of each no-intervention subensemble
//!   `E_k` must equal the weight of its with-intervention counterpart `η_k`.
//!   Necessary, not sufficient.
//! - [`consistency_condition`]: `Re{⟨ψ₂|P_α|ψ₁⟩⟨ψ₁|P_β|ψ₂⟩} = 0` for every
//!   pair of distinct intervening outcomes. This is the condition the
//!   verdict rests on.
//! - [`special_case_detector`]: the intervening observable commutes with the
//!   pre- or post-selection observable, in which case both checks pass.

use crate::ensembles::{composition_terms, mixture_m, mixture_m_prime};
use crate::error::Result;
use crate::hilbert::{Projector, SpectralMeasurement, StateVector, TOLERANCE};
use crate::tsvf::{conditional_distribution, AblDistribution};

/// Default tolerance for the weight and consistency conditions.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightEntry {
    pub post_outcome: String,
    pub weight_m: f64,
    pub weight_eta: f64,
    /// `weight_m − weight_eta`.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightConditionReport {
    pub entries: Vec<WeightEntry>,
    pub tolerance: f64,
    pub satisfied: bool,
}

impl WeightConditionReport {
    pub fn max_abs_delta(&self) -> f64 {
        self.entries
            .iter()
            .fold(0.0, |acc, e| acc.max(e.delta.abs()))
    }

    pub fn entry(&self, post_outcome: &str) -> Option<&WeightEntry> {
        self.entries.iter().find(|e| e.post_outcome == post_outcome)
    }
}

/// Compares mixture M and mixture M' outcome by outcome: `weight(E_k)`
/// against `weight(η_k)`.
pub fn weight_condition(
    pre: &StateVector,
    mid: &SpectralMeasurement,
    post_meas: &SpectralMeasurement,
    tolerance: f64,
) -> Result<WeightConditionReport> {
    let m = mixture_m(pre, post_meas)?;
    let m_prime = mixture_m_prime(pre, mid, post_meas)?;
    let entries = post_meas
        .labels()
        .map(|label| {
            let weight_m = m.post_marginal(label)?;
            let weight_eta = m_prime.eta_weight(label)?;
            Ok(WeightEntry {
                post_outcome: label.to_string(),
                weight_m,
                weight_eta,
                delta: weight_m - weight_eta,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let satisfied = entries.iter().all(|e| e.delta.abs() <= tolerance);
    Ok(WeightConditionReport {
        entries,
        tolerance,
        satisfied,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairValue {
    pub alpha: String,
    pub beta: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    /// One entry per unordered pair of distinct outcomes, in declared order
    /// (`α` before `β`).
    pub pairs: Vec<PairValue>,
    pub tolerance: f64,
    pub satisfied: bool,
}

impl ConsistencyReport {
    pub fn max_abs(&self) -> f64 {
        self.pairs.iter().fold(0.0, |acc, p| acc.max(p.value.abs()))
    }

    pub fn pair(&self, alpha: &str, beta: &str) -> Option<&PairValue> {
        self.pairs
            .iter()
            .find(|p| (p.alpha == alpha && p.beta == beta) || (p.alpha == beta && p.beta == alpha))
    }
}

fn consistency_from_amplitudes(
    mid: &SpectralMeasurement,
    pair_value: impl Fn(usize, usize) -> f64,
    tolerance: f64,
) -> ConsistencyReport {
    let outcomes = mid.outcomes();
    let mut pairs = Vec::new();
    for a in 0..outcomes.len() {
        for b in a + 1..outcomes.len() {
            pairs.push(PairValue {
                alpha: outcomes[a].label.clone(),
                beta: outcomes[b].label.clone(),
                value: pair_value(a, b),
            });
        }
    }
    let satisfied = pairs.iter().all(|p| p.value.abs() <= tolerance);
    ConsistencyReport {
        pairs,
        tolerance,
        satisfied,
    }
}

/// Evaluates `Re{⟨post|P_α|pre⟩⟨pre|P_β|post⟩}` for every unordered pair of
/// distinct outcomes of `mid`. The expression is symmetric in `α ↔ β`, and
/// `α = β` terms are strictly positive whenever the pair overlaps, so only
/// distinct pairs are checked.
pub fn consistency_condition(
    pre: &StateVector,
    mid: &SpectralMeasurement,
    post: &StateVector,
    tolerance: f64,
) -> Result<ConsistencyReport> {
    mid.ensure_dim(pre.dim())?;
    post.ensure_dim(pre.dim())?;
    let amps = mid
        .outcomes()
        .iter()
        .map(|o| o.projector.sandwich(post, pre))
        .collect::<Result<Vec<_>>>()?;
    Ok(consistency_from_amplitudes(
        mid,
        |a, b| (amps[a] * amps[b].conj()).re,
        tolerance,
    ))
}

/// [`consistency_condition`] for post-selection onto a subspace `Q`:
/// pair values are `Re{⟨pre|P_β Q P_α|pre⟩}`, which reduces to the state
/// form when `Q = |post⟩⟨post|`.
pub fn consistency_condition_subspace(
    pre: &StateVector,
    mid: &SpectralMeasurement,
    post: &Projector,
    tolerance: f64,
) -> Result<ConsistencyReport> {
    mid.ensure_dim(pre.dim())?;
    pre.ensure_dim(post.dim())?;
    let branches: Vec<_> = mid
        .outcomes()
        .iter()
        .map(|o| post.apply(&o.projector.apply(pre.vector())))
        .collect();
    Ok(consistency_from_amplitudes(
        mid,
        |a, b| branches[b].dotc(&branches[a]).re,
        tolerance,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpecialCase {
    CommutesWithPre,
    CommutesWithPost,
    CommutesWithBoth,
}

impl SpecialCase {
    pub fn reason(&self) -> &'static str {
        match self {
            SpecialCase::CommutesWithPre => "commutes with pre-selection observable",
            SpecialCase::CommutesWithPost => "commutes with post-selection observable",
            SpecialCase::CommutesWithBoth => "commutes with pre- and post-selection observables",
        }
    }
}

/// `Some(_)` when every projector of `mid` commutes (within 1e-12) with every
/// projector of `pre_meas` or of `post_meas`.
pub fn special_case_detector(
    pre_meas: &SpectralMeasurement,
    mid: &SpectralMeasurement,
    post_meas: &SpectralMeasurement,
) -> Option<SpecialCase> {
    let with_pre = mid.commutes_with(pre_meas, TOLERANCE);
    let with_post = mid.commutes_with(post_meas, TOLERANCE);
    match (with_pre, with_post) {
        (true, true) => Some(SpecialCase::CommutesWithBoth),
        (true, false) => Some(SpecialCase::CommutesWithPre),
        (false, true) => Some(SpecialCase::CommutesWithPost),
        (false, false) => None,
    }
}

/// Everything needed to decide whether the ABL values for one
/// post-selection branch may be read counterfactually.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub post_outcome: String,
    /// ABL distribution over `mid` for this branch.
    pub abl: AblDistribution,
    pub weight_condition: WeightConditionReport,
    pub consistency: ConsistencyReport,
    pub special_case: Option<SpecialCase>,
    /// Counterfactual total minus Born probability, per `mid` outcome.
    pub discrepancies: Vec<(String, f64)>,
    /// True iff the consistency condition holds.
    pub licensed: bool,
}

impl Verdict {
    pub fn discrepancy(&self, mid_outcome: &str) -> Option<f64> {
        self.discrepancies
            .iter()
            .find(|(l, _)| l == mid_outcome)
            .map(|(_, d)| *d)
    }
}

/// Bundles the weight condition, the consistency condition for the
/// `post_outcome` branch, the special-case detector (with the pre-selection
/// observable taken as the test `{|pre⟩⟨pre|, I − |pre⟩⟨pre|}`) and the
/// signed discrepancies. The reading is licensed iff consistency holds.
pub fn counterfactual_verdict(
    pre: &StateVector,
    mid: &SpectralMeasurement,
    post_meas: &SpectralMeasurement,
    post_outcome: &str,
    tolerance: f64,
) -> Result<Verdict> {
    let q = &post_meas.outcome(post_outcome)?.projector;
    let abl = conditional_distribution(pre, q, mid)?;
    let weight_condition = weight_condition(pre, mid, post_meas, tolerance)?;
    let consistency = consistency_condition_subspace(pre, mid, q, tolerance)?;
    let pre_meas = SpectralMeasurement::projective_test("pre", pre, "pre", "not-pre")?;
    let special_case = special_case_detector(&pre_meas, mid, post_meas);
    let born: Vec<f64> = mid
        .outcomes()
        .iter()
        .map(|o| o.projector.expectation(pre))
        .collect::<Result<_>>()?;
    let discrepancies = mid
        .outcomes()
        .iter()
        .zip(born)
        .map(|(o, born)| {
            let cf: f64 = composition_terms(pre, mid, post_meas, &o.label)?
                .iter()
                .map(|t| t.abl * t.weight_m)
                .sum();
            Ok((o.label.clone(), cf - born))
        })
        .collect::<Result<Vec<_>>>()?;
    let licensed = consistency.satisfied;
    Ok(Verdict {
        post_outcome: post_outcome.to_string(),
        abl,
        weight_condition,
        consistency,
        special_case,
        discrepancies,
        licensed,
    })
}
