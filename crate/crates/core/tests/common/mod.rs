//! Random states, unitaries and measurements for property tests.

#![allow(dead_code)]

use ablkit::hilbert::{Outcome, Projector, SpectralMeasurement, StateVector};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

fn gaussian(rng: &mut StdRng) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn random_state(rng: &mut StdRng, dim: usize) -> StateVector {
    let amps = (0..dim).map(|_| gaussian(rng)).collect();
    StateVector::normalized(amps).expect("gaussian vector is nonzero")
}

/// Haar-distributed unitary via QR of a complex Ginibre matrix.
pub fn random_unitary(rng: &mut StdRng, dim: usize) -> DMatrix<Complex64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| gaussian(rng));
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let phases = DMatrix::from_diagonal(&DVector::from_fn(dim, |i, _| {
        let d = r[(i, i)];
        d / d.norm()
    }));
    q * phases
}

/// Columns `cols` of `basis` spanned as one projector.
fn block_projector(basis: &DMatrix<Complex64>, cols: &[usize]) -> Projector {
    let dim = basis.nrows();
    let mut m = DMatrix::zeros(dim, dim);
    for &c in cols {
        let v = basis.column(c);
        m += v * v.adjoint();
    }
    Projector::new(m).expect("sum of orthonormal rank-one projectors")
}

/// Random partition of `0..dim` into at most `max_blocks` nonempty blocks.
pub fn random_partition(rng: &mut StdRng, dim: usize, max_blocks: usize) -> Vec<Vec<usize>> {
    let blocks = rng.random_range(1..=max_blocks.min(dim).max(1));
    let mut parts = vec![Vec::new(); blocks];
    // Seed each block with one index so none is empty.
    for (b, part) in parts.iter_mut().enumerate() {
        part.push(b);
    }
    for i in blocks..dim {
        let b = rng.random_range(0..blocks);
        parts[b].push(i);
    }
    parts
}

/// Measurement diagonal in the columns of `basis`, grouped by `partition`.
pub fn measurement_in_basis(
    name: &str,
    basis: &DMatrix<Complex64>,
    partition: &[Vec<usize>],
) -> SpectralMeasurement {
    let outcomes = partition
        .iter()
        .enumerate()
        .map(|(k, cols)| Outcome::new(format!("{name}{k}"), k as f64, block_projector(basis, cols)))
        .collect();
    SpectralMeasurement::new(name, outcomes).expect("blocks of an orthonormal basis")
}

/// Measurement in a Haar-random basis with random degeneracies.
pub fn random_measurement(
    rng: &mut StdRng,
    name: &str,
    dim: usize,
    max_outcomes: usize,
) -> SpectralMeasurement {
    let basis = random_unitary(rng, dim);
    let partition = random_partition(rng, dim, max_outcomes);
    measurement_in_basis(name, &basis, &partition)
}

/// Non-degenerate measurement in a Haar-random basis.
pub fn random_nondegenerate(rng: &mut StdRng, name: &str, dim: usize) -> SpectralMeasurement {
    let basis = random_unitary(rng, dim);
    let partition: Vec<Vec<usize>> = (0..dim).map(|i| vec![i]).collect();
    measurement_in_basis(name, &basis, &partition)
}
