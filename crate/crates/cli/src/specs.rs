//! Text forms for states and measurements on the command line.
//!
//! States:
//! - `spin:<x|y|z|theta,phi>[:down]` spin-1/2 eigenstate along a direction
//! - `vec:<a0,a1,...>` amplitudes such as `1`, `-0.5`, `1+2i`, normalized on input
//! - `basis:<d>:<i>` computational basis vector
//!
//! Measurements:
//! - `spin:<x|y|z|theta,phi>` outcomes `up`, `down`
//! - `box:<d>:<i>` outcomes `in`, `out`
//! - `basis:<d>` outcomes `e0`, `e1`, ...
//! - `identity:<d>` single outcome `identity`
//! - `test:<state>` outcomes `pass`, `fail`

use ablkit::hilbert::{
    box_measurement, spin_measurement, spin_state, BlochDirection, ComplexAmplitude,
    SpectralMeasurement, Spin, StateVector,
};
use ablkit::scenarios::parse_angle;
use ablkit::{Error, Result};

fn bad(input: &str, reason: &str) -> Error {
    Error::Parse {
        input: input.to_string(),
        reason: reason.to_string(),
    }
}

fn direction(s: &str, degrees: bool) -> Result<BlochDirection> {
    match s.trim() {
        "x" => Ok(BlochDirection::x_axis()),
        "y" => Ok(BlochDirection::y_axis()),
        "z" => Ok(BlochDirection::z_axis()),
        other => {
            let (theta, phi) = other
                .split_once(',')
                .ok_or_else(|| bad(s, "expected x, y, z or theta,phi"))?;
            Ok(BlochDirection::from_angles(
                parse_angle(theta, degrees)?,
                parse_angle(phi, degrees)?,
            ))
        }
    }
}

fn usize_field(s: &str, input: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| bad(input, "expected a non-negative integer"))
}

pub fn parse_state(input: &str, degrees: bool) -> Result<StateVector> {
    let (kind, rest) = input
        .split_once(':')
        .ok_or_else(|| bad(input, "expected kind:value"))?;
    match kind {
        "spin" => {
            let (dir, spin) = match rest.rsplit_once(':') {
                Some((d, "down")) => (d, Spin::Down),
                Some((d, "up")) => (d, Spin::Up),
                Some(_) => return Err(bad(input, "spin suffix must be up or down")),
                None => (rest, Spin::Up),
            };
            Ok(spin_state(&direction(dir, degrees)?, spin))
        }
        "vec" => {
            let amps = rest
                .split(',')
                .map(|a| {
                    a.trim()
                        .parse::<ComplexAmplitude>()
                        .map_err(|_| bad(a, "not a complex number"))
                })
                .collect::<Result<Vec<_>>>()?;
            StateVector::normalized(amps)
        }
        "basis" => {
            let (d, i) = rest
                .split_once(':')
                .ok_or_else(|| bad(input, "expected basis:<d>:<i>"))?;
            StateVector::basis(usize_field(d, input)?, usize_field(i, input)?)
        }
        _ => Err(bad(input, "unknown state kind (spin, vec, basis)")),
    }
}

pub fn parse_measurement(input: &str, degrees: bool) -> Result<SpectralMeasurement> {
    let (kind, rest) = input
        .split_once(':')
        .ok_or_else(|| bad(input, "expected kind:value"))?;
    match kind {
        "spin" => Ok(spin_measurement(&direction(rest, degrees)?)),
        "box" => {
            let (d, i) = rest
                .split_once(':')
                .ok_or_else(|| bad(input, "expected box:<d>:<i>"))?;
            box_measurement(usize_field(d, input)?, usize_field(i, input)?)
        }
        "basis" => SpectralMeasurement::computational_basis(usize_field(rest, input)?),
        "identity" => {
            let d = usize_field(rest, input)?;
            if d == 0 {
                return Err(Error::ZeroDimension);
            }
            Ok(SpectralMeasurement::identity(d))
        }
        "test" => {
            let state = parse_state(rest, degrees)?;
            SpectralMeasurement::projective_test("test", &state, "pass", "fail")
        }
        _ => Err(bad(
            input,
            "unknown measurement kind (spin, box, basis, identity, test)",
        )),
    }
}
