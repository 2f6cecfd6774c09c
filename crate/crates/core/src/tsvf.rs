//! Two-state vectors and the ABL rule.
//!
//! For a system pre-selected in `|a⟩` and post-selected in `|b⟩`, the
//! probability of outcome `j` of an intervening measurement with projectors
//! `P_i` is
//!
//! ```text
//! P(j | a, b) = |⟨b|P_j|a⟩|² / Σ_i |⟨b|P_i|a⟩|²
//! ```
//!
//! which for rank-1 projectors `P_i = |c_i⟩⟨c_i|` is the familiar
//! `|⟨b|c_j⟩|²|⟨c_j|a⟩|² / Σ_i |⟨b|c_i⟩|²|⟨c_i|a⟩|²`. The expression is
//! symmetric under exchanging `a` and `b`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::{Projector, SpectralMeasurement, StateVector, TOLERANCE};

/// Denominators at or below this value are reported as
/// [`Error::VanishingDenominator`].
pub const DENOMINATOR_FLOOR: f64 = 1e-15;

/// A pre-selected state evolving forward paired with a post-selected state
/// evolving backward, optionally tagged with the observable that was
/// actually measured between the two selections.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoStateVector {
    pre: StateVector,
    post: StateVector,
    measured: Option<String>,
}

impl TwoStateVector {
    pub fn new(pre: StateVector, post: StateVector) -> Result<Self> {
        post.ensure_dim(pre.dim())?;
        Ok(Self {
            pre,
            post,
            measured: None,
        })
    }

    /// Tags the vector with the label of the observable measured in between.
    pub fn measured_with(mut self, observable: impl Into<String>) -> Self {
        self.measured = Some(observable.into());
        self
    }

    pub fn pre(&self) -> &StateVector {
        &self.pre
    }

    pub fn post(&self) -> &StateVector {
        &self.post
    }

    pub fn measured_observable(&self) -> Option<&str> {
        self.measured.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.pre.dim()
    }

    /// The time-reversed vector `⟨a‖b⟩` obtained by exchanging the roles of
    /// pre- and post-selection.
    pub fn time_reversed(&self) -> Self {
        Self {
            pre: self.post.clone(),
            post: self.pre.clone(),
            measured: self.measured.clone(),
        }
    }
}

/// ABL probabilities over every outcome of one measurement, in the
/// measurement's declared order.
#[derive(Debug, Clone, PartialEq)]
pub struct AblDistribution {
    pub measurement: String,
    pub entries: Vec<(String, f64)>,
}

impl AblDistribution {
    pub fn get(&self, label: &str) -> Result<f64> {
        self.entries
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, p)| *p)
            .ok_or_else(|| Error::UnknownOutcome(label.to_string()))
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.entries.iter().map(|(l, p)| (l.as_str(), *p))
    }
}

fn normalize(meas: &SpectralMeasurement, weights: Vec<f64>) -> Result<AblDistribution> {
    let denominator: f64 = weights.iter().sum();
    if denominator <= DENOMINATOR_FLOOR {
        return Err(Error::VanishingDenominator {
            measurement: meas.name().to_string(),
            denominator,
        });
    }
    Ok(AblDistribution {
        measurement: meas.name().to_string(),
        entries: meas
            .labels()
            .zip(weights)
            .map(|(l, w)| (l.to_string(), w / denominator))
            .collect(),
    })
}

/// ABL distribution for the two-state vector `tsv` over all outcomes of `meas`.
pub fn abl_distribution(
    tsv: &TwoStateVector,
    meas: &SpectralMeasurement,
) -> Result<AblDistribution> {
    meas.ensure_dim(tsv.dim())?;
    let weights = meas
        .outcomes()
        .iter()
        .map(|o| Ok(o.projector.sandwich(&tsv.post, &tsv.pre)?.norm_sqr()))
        .collect::<Result<Vec<_>>>()?;
    normalize(meas, weights)
}

/// ABL probability of `outcome` for `tsv`.
pub fn abl_probability(
    tsv: &TwoStateVector,
    meas: &SpectralMeasurement,
    outcome: &str,
) -> Result<f64> {
    meas.index_of(outcome)?;
    abl_distribution(tsv, meas)?.get(outcome)
}

/// ABL distribution when post-selection is onto a possibly degenerate
/// subspace `post` rather than a single state: the outcome weights become
/// `⟨a|P_j Q P_j|a⟩ = ‖Q P_j a‖²`. With `Q = |b⟩⟨b|` this equals
/// [`abl_distribution`] for `⟨b‖a⟩`.
pub fn conditional_distribution(
    pre: &StateVector,
    post: &Projector,
    meas: &SpectralMeasurement,
) -> Result<AblDistribution> {
    meas.ensure_dim(pre.dim())?;
    pre.ensure_dim(post.dim())?;
    let weights = meas
        .outcomes()
        .iter()
        .map(|o| post.apply(&o.projector.apply(pre.vector())).norm_squared())
        .collect();
    normalize(meas, weights)
}

/// A validated unitary matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Unitary(DMatrix<Complex64>);

impl Unitary {
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self> {
        let (rows, cols) = matrix.shape();
        if rows != cols {
            return Err(Error::NotSquare { rows, cols });
        }
        let dev = (matrix.adjoint() * &matrix - DMatrix::identity(rows, rows))
            .iter()
            .fold(0.0_f64, |acc, z| acc.max(z.norm()));
        if !dev.is_finite() || dev > TOLERANCE {
            return Err(Error::NotUnitary(dev));
        }
        Ok(Self(matrix))
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn inverse(&self) -> Self {
        Self(self.0.adjoint())
    }
}

/// Optional unitary dynamics between the boundary selections. The default
/// is the zero-Hamiltonian case.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvolutionSpec {
    pub forward: Option<Unitary>,
}

impl EvolutionSpec {
    pub fn zero_hamiltonian() -> Self {
        Self::default()
    }

    pub fn with_unitary(unitary: Unitary) -> Self {
        Self {
            forward: Some(unitary),
        }
    }
}

/// Carries `tsv` through `evo`: the pre-selected ket becomes `U|a⟩` and the
/// post-selected bra becomes `⟨b|U†`. ABL values at the evolved time equal
/// those of the original vector with every projector replaced by `U† P U`.
pub fn evolve(tsv: &TwoStateVector, evo: &EvolutionSpec) -> Result<TwoStateVector> {
    let Some(u) = &evo.forward else {
        return Ok(tsv.clone());
    };
    tsv.pre.ensure_dim(u.dim())?;
    let pre = StateVector::from_vector(u.matrix() * tsv.pre.vector())?;
    let post = StateVector::from_vector(u.matrix() * tsv.post.vector())?;
    Ok(TwoStateVector {
        pre,
        post,
        measured: tsv.measured.clone(),
    })
}
