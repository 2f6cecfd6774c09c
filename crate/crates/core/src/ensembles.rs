//! Post-selected mixtures with and without an intervening measurement, and
//! the total-probability compositions built from them.
//!
//! Without an intervening measurement a pre-selected ensemble splits at
//! post-selection into subensembles `E_k` with weights `⟨a|Q_k|a⟩`
//! (mixture M). With an intervening measurement `{P_j}` it splits into
//! `E'_jk` with weights `⟨a|P_j Q_k P_j|a⟩` (mixture M'); `η_k` collects
//! the `E'_jk` that share the final outcome `k`.
//!
//! Composing ABL probabilities with the M weights gives the counterfactual
//! total, which in general differs from the Born probability `⟨a|P_c|a⟩`.
//! Composing them with the `η` weights reproduces the Born probability
//! exactly.
//!
//! Weights are projector sandwiches throughout, so degenerate outcomes need
//! no special handling.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{Outcome, SpectralMeasurement, StateVector};
use crate::tsvf::{TwoStateVector, DENOMINATOR_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MixtureKind {
    NoIntermediate,
    WithIntermediate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subensemble {
    pub label: String,
    pub tsv: TwoStateVector,
    pub weight: f64,
    pub mid_outcome: Option<String>,
    pub post_outcome: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleMixture {
    pub kind: MixtureKind,
    pub subensembles: Vec<Subensemble>,
}

impl EnsembleMixture {
    pub fn total_weight(&self) -> f64 {
        self.subensembles.iter().map(|s| s.weight).sum()
    }

    pub fn get(&self, label: &str) -> Option<&Subensemble> {
        self.subensembles.iter().find(|s| s.label == label)
    }

    /// Total weight of the subensembles ending in post-selection outcome
    /// `post`. For mixture M' this is the weight of `η_k`; for M it is the
    /// weight of `E_k`.
    pub fn post_marginal(&self, post: &str) -> Result<f64> {
        let mut found = false;
        let total = self
            .subensembles
            .iter()
            .filter(|s| s.post_outcome == post)
            .inspect(|_| found = true)
            .map(|s| s.weight)
            .sum();
        if found {
            Ok(total)
        } else {
            Err(Error::UnknownOutcome(post.to_string()))
        }
    }

    /// Weight of `η_k`.
    pub fn eta_weight(&self, post: &str) -> Result<f64> {
        self.post_marginal(post)
    }
}

fn subensemble_label(mid: Option<usize>, post: usize) -> String {
    match mid {
        None => format!("E{}", post + 1),
        Some(j) if j < 9 && post < 9 => format!("E'_{}{}", j + 1, post + 1),
        Some(j) => format!("E'_{},{}", j + 1, post + 1),
    }
}

/// Label of the aggregate `η_k` for the `index`-th post outcome.
pub fn eta_label(index: usize) -> String {
    format!("eta_{}", index + 1)
}

/// Post-selected state representing outcome `q` for a system arriving in
/// (unnormalized) state `arriving`. Rank-1 outcomes built from a state use
/// that state; degenerate ones use the normalized projection of the arriving
/// state, or the largest column of the projector when that projection
/// vanishes.
fn post_representative(q: &Outcome, arriving: &DVector<Complex64>) -> Result<StateVector> {
    if let Some(s) = &q.state {
        return Ok(s.clone());
    }
    let projected = q.projector.apply(arriving);
    if projected.norm() > 1e-12 {
        return StateVector::from_vector(projected);
    }
    let m = q.projector.matrix();
    let best = (0..m.ncols())
        .max_by(|&i, &j| m.column(i).norm().total_cmp(&m.column(j).norm()))
        .unwrap_or(0);
    StateVector::from_vector(m.column(best).into_owned())
}

/// Mixture M: post-selection with no intervening measurement.
pub fn mixture_m(pre: &StateVector, post_meas: &SpectralMeasurement) -> Result<EnsembleMixture> {
    post_meas.ensure_dim(pre.dim())?;
    let subensembles = post_meas
        .outcomes()
        .iter()
        .enumerate()
        .map(|(k, q)| {
            let post = post_representative(q, pre.vector())?;
            Ok(Subensemble {
                label: subensemble_label(None, k),
                tsv: TwoStateVector::new(pre.clone(), post)?.measured_with("I"),
                weight: q.projector.expectation(pre)?,
                mid_outcome: None,
                post_outcome: q.label.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsembleMixture {
        kind: MixtureKind::NoIntermediate,
        subensembles,
    })
}

/// Mixture M': intervening measurement `mid`, then post-selection.
/// Subensembles are ordered mid-major.
pub fn mixture_m_prime(
    pre: &StateVector,
    mid: &SpectralMeasurement,
    post_meas: &SpectralMeasurement,
) -> Result<EnsembleMixture> {
    mid.ensure_dim(pre.dim())?;
    post_meas.ensure_dim(pre.dim())?;
    let mut subensembles = Vec::with_capacity(mid.len() * post_meas.len());
    for (j, p) in mid.outcomes().iter().enumerate() {
        let collapsed = p.projector.apply(pre.vector());
        for (k, q) in post_meas.outcomes().iter().enumerate() {
            let weight = q.projector.apply(&collapsed).norm_squared();
            let post = post_representative(q, &collapsed)?;
            subensembles.push(Subensemble {
                label: subensemble_label(Some(j), k),
                tsv: TwoStateVector::new(pre.clone(), post)?.measured_with(mid.name()),
                weight,
                mid_outcome: Some(p.label.clone()),
                post_outcome: q.label.clone(),
            });
        }
    }
    Ok(EnsembleMixture {
        kind: MixtureKind::WithIntermediate,
        subensembles,
    })
}

/// Born probability `⟨a|P_c|a⟩` of intervening outcome `outcome` with no
/// post-selection.
pub fn born_probability(
    pre: &StateVector,
    mid: &SpectralMeasurement,
    outcome: &str,
) -> Result<f64> {
    mid.ensure_dim(pre.dim())?;
    mid.outcome(outcome)?.projector.expectation(pre)
}

/// One post-selection branch of the total-probability compositions.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositionTerm {
    pub post_outcome: String,
    /// ABL probability of the intervening outcome given pre-selection and
    /// this post-selection branch.
    pub abl: f64,
    /// Weight of `E_k` in mixture M.
    pub weight_m: f64,
    /// Weight of `η_k` in mixture M'.
    pub weight_eta: f64,
}

/// Per-branch terms shared by [`ss_counterfactual_total`] and
/// [`ss_corrected_total`].
pub fn composition_terms(
    pre: &StateVector,
    mid: &SpectralMeasurement,
    post_meas: &SpectralMeasurement,
    outcome: &str,
) -> Result<Vec<CompositionTerm>> {
    mid.ensure_dim(pre.dim())?;
    post_meas.ensure_dim(pre.dim())?;
    let c = mid.index_of(outcome)?;
    let a = pre.vector();
    let branches: Vec<_> = mid
        .outcomes()
        .iter()
        .map(|o| o.projector.apply(a))
        .collect();
    post_meas
        .outcomes()
        .iter()
        .map(|q| {
            // Same sums as `conditional_distribution` and the M' weights.
            let joint: Vec<f64> = branches
                .iter()
                .map(|v| q.projector.apply(v).norm_squared())
                .collect();
            let eta: f64 = joint.iter().sum();
            if eta <= DENOMINATOR_FLOOR {
                return Err(Error::VanishingDenominator {
                    measurement: mid.name().to_string(),
                    denominator: eta,
                });
            }
            Ok(CompositionTerm {
                post_outcome: q.label.clone(),
                abl: joint[c] / eta,
                weight_m: q.projector.apply(a).norm_squared(),
                weight_eta: eta,
            })
        })
        .collect()
}

/// `Σ_k P_ABL(c | a, b_k) · P(b_k | a)` with the weights of mixture M: the
/// prediction of the counterfactual reading over the ensemble in which no
/// intervening measurement took place.
pub fn ss_counterfactual_total(
    pre: &StateVector,
    mid: &SpectralMeasurement,
    post_meas: &SpectralMeasurement,
    outcome: &str,
) -> Result<f64> {
    Ok(composition_terms(pre, mid, post_meas, outcome)?
        .iter()
        .map(|t| t.abl * t.weight_m)
        .sum())
}

/// `Σ_k P_ABL(c | a, b_k) · P_C(b_k | a)` with the `η` weights of mixture M'.
/// Equals [`born_probability`] identically.
pub fn ss_corrected_total(
    pre: &StateVector,
    mid: &SpectralMeasurement,
    post_meas: &SpectralMeasurement,
    outcome: &str,
) -> Result<f64> {
    Ok(composition_terms(pre, mid, post_meas, outcome)?
        .iter()
        .map(|t| t.abl * t.weight_eta)
        .sum())
}

/// Counterfactual total minus Born probability (signed).
pub fn ss_discrepancy(
    pre: &StateVector,
    mid: &SpectralMeasurement,
    post_meas: &SpectralMeasurement,
    outcome: &str,
) -> Result<f64> {
    Ok(ss_counterfactual_total(pre, mid, post_meas, outcome)?
        - born_probability(pre, mid, outcome)?)
}
