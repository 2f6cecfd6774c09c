//! Dense complex linear algebra for small Hilbert spaces.
//!
//! States are normalized amplitude vectors, observables are supplied as
//! spectral data (labeled orthogonal projectors that resolve the identity)
//! rather than as raw Hermitian matrices. Constructors cover the spin-1/2
//! and "search box k" measurements used throughout the crate.
//!
//! Every algebraic invariant is checked against [`TOLERANCE`] (absolute,
//! elementwise).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexAmplitude = Complex64;

/// Absolute tolerance for normalization, hermiticity, idempotence,
/// orthogonality and completeness checks.
pub const TOLERANCE: f64 = 1e-12;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// A normalized pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: DVector<Complex64>,
}

impl StateVector {
    /// Builds a state from amplitudes that must already be normalized.
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        let v = Self::checked_vector(amplitudes)?;
        let norm_sqr = v.norm_squared();
        if (norm_sqr - 1.0).abs() > TOLERANCE {
            return Err(Error::NotNormalized(norm_sqr));
        }
        Ok(Self { amplitudes: v })
    }

    /// Builds a state by rescaling arbitrary (non-zero) amplitudes.
    pub fn normalized(amplitudes: Vec<Complex64>) -> Result<Self> {
        let v = Self::checked_vector(amplitudes)?;
        let norm = v.norm();
        if norm == 0.0 {
            return Err(Error::ZeroVector);
        }
        Ok(Self {
            amplitudes: v.unscale(norm),
        })
    }

    /// Real-amplitude convenience wrapper around [`StateVector::normalized`].
    pub fn from_real(amplitudes: &[f64]) -> Result<Self> {
        Self::normalized(amplitudes.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    /// Computational basis vector `e_index`.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        if index >= dim {
            return Err(Error::IndexOutOfRange { index, dim });
        }
        let mut v = DVector::from_element(dim, ZERO);
        v[index] = ONE;
        Ok(Self { amplitudes: v })
    }

    fn checked_vector(amplitudes: Vec<Complex64>) -> Result<DVector<Complex64>> {
        if amplitudes.is_empty() {
            return Err(Error::ZeroDimension);
        }
        if amplitudes
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::NonFinite);
        }
        Ok(DVector::from_vec(amplitudes))
    }

    /// Wraps a vector that is normalized by construction, renormalizing to
    /// remove accumulated rounding.
    pub(crate) fn from_vector(v: DVector<Complex64>) -> Result<Self> {
        let norm = v.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroVector);
        }
        Ok(Self {
            amplitudes: v.unscale(norm),
        })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        self.amplitudes.as_slice()
    }

    pub(crate) fn vector(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        inner_product(self, other)
    }

    /// The same ray with every amplitude multiplied by `e^{i phase}`.
    pub fn with_global_phase(&self, phase: f64) -> Self {
        let factor = Complex64::from_polar(1.0, phase);
        Self {
            amplitudes: self.amplitudes.map(|z| z * factor),
        }
    }

    pub(crate) fn ensure_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: self.dim(),
            });
        }
        Ok(())
    }
}

/// `⟨x|y⟩`, antilinear in `x`.
pub fn inner_product(x: &StateVector, y: &StateVector) -> Result<Complex64> {
    y.ensure_dim(x.dim())?;
    Ok(x.amplitudes.dotc(&y.amplitudes))
}

/// An orthogonal projector (Hermitian and idempotent).
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    matrix: DMatrix<Complex64>,
}

impl Projector {
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self> {
        let (rows, cols) = matrix.shape();
        if rows != cols {
            return Err(Error::NotSquare { rows, cols });
        }
        if rows == 0 {
            return Err(Error::ZeroDimension);
        }
        if matrix
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::NonFinite);
        }
        let herm = max_abs(&(&matrix - matrix.adjoint()));
        if herm > TOLERANCE {
            return Err(Error::NotHermitian(herm));
        }
        let idem = max_abs(&(&matrix * &matrix - &matrix));
        if idem > TOLERANCE {
            return Err(Error::NotIdempotent(idem));
        }
        Ok(Self { matrix })
    }

    /// Rank-1 projector `|ψ⟩⟨ψ|`.
    pub fn onto(state: &StateVector) -> Self {
        let v = state.vector();
        Self {
            matrix: v * v.adjoint(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: DMatrix::identity(dim, dim),
        }
    }

    /// `I − P`.
    pub fn complement(&self) -> Self {
        let n = self.dim();
        Self {
            matrix: DMatrix::identity(n, n) - &self.matrix,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    /// Trace of the projector, rounded to the nearest integer.
    pub fn rank(&self) -> usize {
        self.matrix.trace().re.round().max(0.0) as usize
    }

    /// `⟨bra|P|ket⟩`.
    pub fn sandwich(&self, bra: &StateVector, ket: &StateVector) -> Result<Complex64> {
        bra.ensure_dim(self.dim())?;
        ket.ensure_dim(self.dim())?;
        Ok(bra.vector().dotc(&(&self.matrix * ket.vector())))
    }

    /// `⟨ψ|P|ψ⟩`, the Born probability of this projector in `state`.
    pub fn expectation(&self, state: &StateVector) -> Result<f64> {
        Ok(self.sandwich(state, state)?.re)
    }

    /// `P|ψ⟩`, unnormalized.
    pub(crate) fn apply(&self, v: &DVector<Complex64>) -> DVector<Complex64> {
        &self.matrix * v
    }

    /// True when `[P, Q] = 0` within `tol` (elementwise).
    pub fn commutes_with(&self, other: &Projector, tol: f64) -> bool {
        if self.dim() != other.dim() {
            return false;
        }
        let comm = &self.matrix * &other.matrix - &other.matrix * &self.matrix;
        max_abs(&comm) <= tol
    }

    /// `U† P U`.
    pub fn conjugated_by(&self, unitary: &DMatrix<Complex64>) -> Self {
        Self {
            matrix: unitary.adjoint() * &self.matrix * unitary,
        }
    }
}

/// One labeled outcome of a spectral measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub label: String,
    pub eigenvalue: f64,
    pub projector: Projector,
    /// Eigenvector with its phase, for rank-1 outcomes built from a state.
    pub state: Option<StateVector>,
}

impl Outcome {
    pub fn new(label: impl Into<String>, eigenvalue: f64, projector: Projector) -> Self {
        Self {
            label: label.into(),
            eigenvalue,
            projector,
            state: None,
        }
    }

    /// Rank-1 outcome `|ψ⟩⟨ψ|` that remembers `ψ`.
    pub fn rank_one(label: impl Into<String>, eigenvalue: f64, state: StateVector) -> Self {
        Self {
            label: label.into(),
            eigenvalue,
            projector: Projector::onto(&state),
            state: Some(state),
        }
    }
}

/// An observable given by its spectral decomposition.
///
/// Outcomes keep their declared order; Monte Carlo collapse sampling and
/// report tables both follow it.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMeasurement {
    name: String,
    dim: usize,
    outcomes: Vec<Outcome>,
}

impl SpectralMeasurement {
    pub fn new(name: impl Into<String>, outcomes: Vec<Outcome>) -> Result<Self> {
        let first = outcomes.first().ok_or(Error::EmptyMeasurement)?;
        let dim = first.projector.dim();
        for o in &outcomes {
            if o.projector.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: o.projector.dim(),
                });
            }
        }
        for (i, a) in outcomes.iter().enumerate() {
            for b in &outcomes[i + 1..] {
                if a.label == b.label {
                    return Err(Error::DuplicateLabel(a.label.clone()));
                }
                let dev = max_abs(&(a.projector.matrix() * b.projector.matrix()));
                if dev > TOLERANCE {
                    return Err(Error::NotOrthogonal {
                        first: a.label.clone(),
                        second: b.label.clone(),
                        deviation: dev,
                    });
                }
            }
        }
        let sum = outcomes
            .iter()
            .fold(DMatrix::from_element(dim, dim, ZERO), |acc, o| {
                acc + o.projector.matrix()
            });
        let dev = max_abs(&(sum - DMatrix::identity(dim, dim)));
        if dev > TOLERANCE {
            return Err(Error::Incomplete(dev));
        }
        Ok(Self {
            name: name.into(),
            dim,
            outcomes,
        })
    }

    /// The trivial measurement `{I}`, standing in for "no measurement".
    pub fn identity(dim: usize) -> Self {
        Self {
            name: "I".into(),
            dim,
            outcomes: vec![Outcome::new("identity", 1.0, Projector::identity(dim))],
        }
    }

    /// Nondegenerate measurement in the computational basis, labels `e0`, `e1`, ...
    pub fn computational_basis(dim: usize) -> Result<Self> {
        let outcomes = (0..dim)
            .map(|i| {
                let e = StateVector::basis(dim, i)?;
                Ok(Outcome::rank_one(format!("e{i}"), i as f64, e))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new("basis", outcomes)
    }

    /// Nondegenerate measurement whose eigenvectors are the given states.
    pub fn from_basis(name: impl Into<String>, states: &[(String, StateVector)]) -> Result<Self> {
        let outcomes = states
            .iter()
            .enumerate()
            .map(|(i, (label, s))| Outcome::rank_one(label.clone(), i as f64, s.clone()))
            .collect();
        Self::new(name, outcomes)
    }

    /// Two-outcome test `{|ψ⟩⟨ψ|, I − |ψ⟩⟨ψ|}` with eigenvalues 1 and 0.
    pub fn projective_test(
        name: impl Into<String>,
        state: &StateVector,
        pass_label: impl Into<String>,
        fail_label: impl Into<String>,
    ) -> Result<Self> {
        let q = Projector::onto(state).complement();
        Self::new(
            name,
            vec![
                Outcome::rank_one(pass_label, 1.0, state.clone()),
                Outcome::new(fail_label, 0.0, q),
            ],
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.outcomes.iter().map(|o| o.label.as_str())
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.outcomes
            .iter()
            .position(|o| o.label == label)
            .ok_or_else(|| Error::UnknownOutcome(label.to_string()))
    }

    pub fn outcome(&self, label: &str) -> Result<&Outcome> {
        Ok(&self.outcomes[self.index_of(label)?])
    }

    /// Same projectors under a new name and new outcome labels (in order).
    pub fn relabeled<S: AsRef<str>>(&self, name: impl Into<String>, labels: &[S]) -> Result<Self> {
        if labels.len() != self.outcomes.len() {
            return Err(Error::DimensionMismatch {
                expected: self.outcomes.len(),
                found: labels.len(),
            });
        }
        let outcomes = self
            .outcomes
            .iter()
            .zip(labels)
            .map(|(o, l)| Outcome {
                label: l.as_ref().to_string(),
                ..o.clone()
            })
            .collect();
        Self::new(name, outcomes)
    }

    /// Renames the measurement, keeping outcome labels.
    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Measurement with every projector replaced by `U† P U`.
    pub fn conjugated_by(&self, unitary: &DMatrix<Complex64>) -> Self {
        Self {
            name: self.name.clone(),
            dim: self.dim,
            outcomes: self
                .outcomes
                .iter()
                .map(|o| Outcome {
                    label: o.label.clone(),
                    eigenvalue: o.eigenvalue,
                    projector: o.projector.conjugated_by(unitary),
                    state: o.state.as_ref().map(|s| StateVector {
                        amplitudes: unitary.adjoint() * &s.amplitudes,
                    }),
                })
                .collect(),
        }
    }

    /// True when every projector of `self` commutes with every projector
    /// of `other`, i.e. the two observables share an eigenbasis.
    pub fn commutes_with(&self, other: &SpectralMeasurement, tol: f64) -> bool {
        self.dim == other.dim
            && self.outcomes.iter().all(|a| {
                other
                    .outcomes
                    .iter()
                    .all(|b| a.projector.commutes_with(&b.projector, tol))
            })
    }

    pub(crate) fn ensure_dim(&self, dim: usize) -> Result<()> {
        if self.dim != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: self.dim,
            });
        }
        Ok(())
    }
}

/// A unit vector on the Bloch sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochDirection {
    x: f64,
    y: f64,
    z: f64,
}

impl BlochDirection {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (x * x + y * y + z * z).sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > TOLERANCE {
            return Err(Error::NonUnitDirection(norm));
        }
        Ok(Self { x, y, z })
    }

    /// Direction at polar angle `polar` from +z and azimuth `azimuth` from +x.
    pub fn from_angles(polar: f64, azimuth: f64) -> Self {
        Self {
            x: polar.sin() * azimuth.cos(),
            y: polar.sin() * azimuth.sin(),
            z: polar.cos(),
        }
    }

    pub fn x_axis() -> Self {
        Self {
            x: 1.0,
            y: 0.0,
            z: 0.0,
        }
    }

    pub fn y_axis() -> Self {
        Self {
            x: 0.0,
            y: 1.0,
            z: 0.0,
        }
    }

    pub fn z_axis() -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            z: 1.0,
        }
    }

    pub fn components(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn polar(&self) -> f64 {
        self.z.clamp(-1.0, 1.0).acos()
    }

    pub fn azimuth(&self) -> f64 {
        self.y.atan2(self.x)
    }

    /// Angle between two directions, in `[0, π]`.
    pub fn angle_to(&self, other: &BlochDirection) -> f64 {
        let dot = self.x * other.x + self.y * other.y + self.z * other.z;
        dot.clamp(-1.0, 1.0).acos()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spin {
    Up,
    Down,
}

/// Eigenvector of `n·σ` with eigenvalue +1 (`Up`) or −1 (`Down`).
///
/// Phase convention: `Up = (cos θ/2, e^{iφ} sin θ/2)` and
/// `Down = (−e^{−iφ} sin θ/2, cos θ/2)`, so the z-axis gives the
/// computational basis.
pub fn spin_state(n: &BlochDirection, spin: Spin) -> StateVector {
    let (theta, phi) = (n.polar(), n.azimuth());
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let amps = match spin {
        Spin::Up => vec![Complex64::new(c, 0.0), Complex64::from_polar(s, phi)],
        Spin::Down => vec![-Complex64::from_polar(s, -phi), Complex64::new(c, 0.0)],
    };
    StateVector {
        amplitudes: DVector::from_vec(amps),
    }
}

/// `σ_n` with outcomes `up` (+1) and `down` (−1).
pub fn spin_measurement(n: &BlochDirection) -> SpectralMeasurement {
    SpectralMeasurement {
        name: format!("sigma[{:.6},{:.6}]", n.polar(), n.azimuth()),
        dim: 2,
        outcomes: vec![
            Outcome::rank_one("up", 1.0, spin_state(n, Spin::Up)),
            Outcome::rank_one("down", -1.0, spin_state(n, Spin::Down)),
        ],
    }
}

/// The search "is the particle in box `index`?" over `dim` boxes: outcome
/// `in` projects onto the box, `out` onto the (degenerate) complement.
pub fn box_measurement(dim: usize, index: usize) -> Result<SpectralMeasurement> {
    let e = StateVector::basis(dim, index)?;
    let p_out = Projector::onto(&e).complement();
    SpectralMeasurement::new(
        format!("box{index}"),
        vec![
            Outcome::rank_one("in", 1.0, e),
            Outcome::new("out", 0.0, p_out),
        ],
    )
}
