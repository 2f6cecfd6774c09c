//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Run with `cargo test -p ablkit-cli --test acceptance`.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, FRAC_PI_8, PI};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use ablkit::counterfactual::{consistency_condition_subspace, counterfactual_verdict};
use ablkit::ensembles::{
    born_probability, mixture_m, mixture_m_prime, ss_corrected_total, ss_counterfactual_total,
    ss_discrepancy,
};
use ablkit::hilbert::{box_measurement, SpectralMeasurement, StateVector};
use ablkit::montecarlo::{
    expected_counts, fixed_systems, frequency_report, paired_world_illustration, paired_worlds,
    Coupling, GroupBy, PairedExperiment,
};
use ablkit::scenarios::{coplanar_spins, run_scenario, ScenarioSpec};
use ablkit::tsvf::{abl_distribution, TwoStateVector};
use ablkit::{Error, Result};
use common::*;
use num_complex::Complex64;
use rand::Rng;

/// Values computed before the build by a standalone script doing plain
/// spinor arithmetic (θ_ac = θ_cb = π/4, outcome c1).
mod frozen {
    pub const COUNTERFACTUAL_TOTAL: f64 = 0.735_702_260_395_515_8;
    pub const BORN: f64 = 0.853_553_390_593_273_7;
    pub const ETA_1: f64 = 0.75;
}

/// Printed reference values for the θ_ac = θ_cb = π/4 mixtures.
mod printed {
    pub const WEIGHT_M_B1: f64 = 0.5;
    pub const ETA_1: f64 = 0.749;
}

type Outcome = std::result::Result<String, String>;
type Criterion = (&'static str, fn() -> Result<Outcome>);

fn check(cond: bool, ok: String, fail: String) -> Outcome {
    if cond {
        Ok(ok)
    } else {
        Err(fail)
    }
}

/// Median wall time of `reps` calls.
fn median_time<T>(reps: usize, mut f: impl FnMut() -> T) -> Duration {
    let mut times: Vec<Duration> = (0..reps)
        .map(|_| {
            let t = Instant::now();
            std::hint::black_box(f());
            t.elapsed()
        })
        .collect();
    times.sort();
    times[reps / 2]
}

fn skip_vanishing<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::VanishingDenominator { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn c1_mixture_weights() -> Result<(f64, f64)> {
    let (pre, mid, post) = coplanar_spins(FRAC_PI_4, FRAC_PI_4);
    let w = mixture_m(&pre, &post)?.post_marginal("b1")?;
    let eta = mixture_m_prime(&pre, &mid, &post)?.eta_weight("b1")?;
    Ok((w, eta))
}

fn criterion_1() -> Result<Outcome> {
    let (w, eta) = c1_mixture_weights()?;
    let analytic_eta = FRAC_PI_8.cos().powi(4) + FRAC_PI_8.sin().powi(4);
    // The printed .749 truncates 0.7499..., so it sits exactly 1e-3 below the
    // true value; allow float slack on that boundary.
    let printed_ok =
        (w - printed::WEIGHT_M_B1).abs() <= 1e-3 && (eta - printed::ETA_1).abs() <= 1e-3 + 1e-12;
    let analytic_ok = (w - 0.5).abs() <= 1e-12
        && (eta - analytic_eta).abs() <= 1e-12
        && (eta - frozen::ETA_1).abs() <= 1e-12;
    let t = median_time(201, c1_mixture_weights);
    Ok(check(
        printed_ok && analytic_ok && t < Duration::from_millis(1),
        format!("weight_M(b1) = {w:.6}, eta_1 = {eta:.12}, median {t:?}"),
        format!("weight_M(b1) = {w}, eta_1 = {eta} (analytic {analytic_eta}), median {t:?}"),
    ))
}

fn criterion_2() -> Result<Outcome> {
    let (pre, mid, post) = coplanar_spins(FRAC_PI_4, FRAC_PI_4);
    let cf = ss_counterfactual_total(&pre, &mid, &post, "c1")?;
    let born = born_probability(&pre, &mid, "c1")?;
    let d = ss_discrepancy(&pre, &mid, &post, "c1")?;
    let ok = (cf - 0.73570).abs() <= 1e-4
        && (cf - frozen::COUNTERFACTUAL_TOTAL).abs() <= 1e-12
        && (born - FRAC_PI_8.cos().powi(2)).abs() <= 1e-9
        && (born - frozen::BORN).abs() <= 1e-12
        && d.abs() > 1e-3;
    Ok(check(
        ok,
        format!("counterfactual {cf:.5}, born {born:.9}, discrepancy {d:.5}"),
        format!("counterfactual {cf}, born {born}, discrepancy {d}"),
    ))
}

fn criterion_3() -> Result<Outcome> {
    let start = Instant::now();
    let mut r = rng(3);
    let (mut checked, mut degenerate, mut worst) = (0usize, 0usize, 0.0_f64);
    let mut seen = 0;
    while checked < 1000 {
        seen += 1;
        let dim = r.random_range(2..=6);
        let a = random_state(&mut r, dim);
        let mid = random_measurement(&mut r, "c", dim, dim);
        let post = random_measurement(&mut r, "b", dim, dim);
        if mid.outcomes().iter().any(|o| o.projector.rank() > 1) {
            degenerate += 1;
        }
        for c in mid.labels() {
            if let Some(total) = skip_vanishing(ss_corrected_total(&a, &mid, &post, c))? {
                worst = worst.max((total - born_probability(&a, &mid, c)?).abs());
            }
        }
        checked += 1;
    }
    let elapsed = start.elapsed();
    Ok(check(
        worst <= 1e-12 && degenerate > 0 && elapsed < Duration::from_secs(1),
        format!("{checked} configurations ({degenerate} with degenerate mids), max |corrected - born| = {worst:.1e}, {elapsed:?}"),
        format!("max deviation {worst:e} over {seen} draws ({degenerate} degenerate), {elapsed:?}"),
    ))
}

fn criterion_4() -> Result<Outcome> {
    let pre = StateVector::from_real(&[1.0, 1.0, 1.0])?;
    let post_state = StateVector::from_real(&[1.0, 1.0, -1.0])?;
    let post = SpectralMeasurement::projective_test("post", &post_state, "b", "not-b")?;
    let mut details = Vec::new();
    let mut ok = true;
    for (i, name) in [(0, "A"), (1, "B")] {
        let boxm = box_measurement(3, i)?;
        let abl = abl_distribution(
            &TwoStateVector::new(pre.clone(), post_state.clone())?,
            &boxm,
        )?
        .get("in")?;
        let v = counterfactual_verdict(&pre, &boxm, &post, "b", 1e-12)?;
        ok &= (abl - 1.0).abs() <= 1e-12 && v.consistency.satisfied;
        details.push(format!(
            "P(in {name}) = {abl}, consistency {}",
            v.consistency.satisfied
        ));
    }
    let text = details.join("; ");
    Ok(check(ok, text.clone(), text))
}

fn criterion_5() -> Result<Outcome> {
    let mut r = rng(5);
    let (mut worst_pair, mut worst_disc) = (0.0_f64, 0.0_f64);
    let mut all_consistent = true;
    for i in 0..1000 {
        let dim = r.random_range(2..=5);
        let basis = random_unitary(&mut r, dim);
        let mid = measurement_in_basis("c", &basis, &random_partition(&mut r, dim, dim));
        let (a, post) = if i % 2 == 0 {
            // Intervening observable commutes with the pre-selection.
            let a = StateVector::normalized(
                basis
                    .column(r.random_range(0..dim))
                    .iter()
                    .copied()
                    .collect(),
            )?;
            (a, random_measurement(&mut r, "b", dim, dim))
        } else {
            // ... or with the post-selection observable.
            let post = measurement_in_basis("b", &basis, &random_partition(&mut r, dim, dim));
            (random_state(&mut r, dim), post)
        };
        for q in post.outcomes() {
            let c = consistency_condition_subspace(&a, &mid, &q.projector, 1e-10)?;
            all_consistent &= c.satisfied;
            worst_pair = worst_pair.max(c.max_abs());
        }
        for c in mid.labels() {
            if let Some(d) = skip_vanishing(ss_discrepancy(&a, &mid, &post, c))? {
                worst_disc = worst_disc.max(d.abs());
            }
        }
    }
    Ok(check(
        all_consistent && worst_pair <= 1e-10 && worst_disc <= 1e-10,
        format!("1000 configurations, max |pair| = {worst_pair:.1e}, max |discrepancy| = {worst_disc:.1e}"),
        format!("consistent {all_consistent}, max |pair| = {worst_pair:e}, max |discrepancy| = {worst_disc:e}"),
    ))
}

fn paired_world_experiment() -> PairedExperiment {
    let sigma = |angle: f64, name: &str, labels: [&str; 2]| {
        ablkit::hilbert::spin_measurement(&ablkit::hilbert::BlochDirection::from_angles(angle, 0.0))
            .relabeled(name, &labels)
            .unwrap()
    };
    PairedExperiment {
        pre_label: "z1".into(),
        pre: ablkit::hilbert::spin_state(
            &ablkit::hilbert::BlochDirection::z_axis(),
            ablkit::hilbert::Spin::Up,
        ),
        mid_actual: Some(sigma(FRAC_PI_2, "sigma_theta", ["theta1", "theta2"])),
        mid_counterfactual: sigma(FRAC_PI_3, "sigma_phi", ["phi1", "phi2"]),
        post: sigma(0.0, "sigma_z", ["z1", "z2"]),
    }
}

fn criterion_6() -> Result<Outcome> {
    let exp = paired_world_experiment();
    let counts = |p: &ablkit::montecarlo::Protocol| -> Vec<f64> {
        expected_counts(p, 16.0).iter().map(|c| c.2).collect()
    };
    let (a, c) = (counts(&exp.actual()?), counts(&exp.counterfactual()?));
    let exact =
        |got: &[f64], want: [f64; 4]| got.iter().zip(want).all(|(g, w)| (g - w).abs() <= 1e-12);
    let counts_ok = exact(&a, [4.0, 4.0, 4.0, 4.0]) && exact(&c, [9.0, 3.0, 1.0, 3.0]);
    let illus = fixed_systems(&paired_world_illustration(), "z1")?;
    let illus_ok = illus.system_ids == [3, 7, 10] && illus.fraction == 0.375;
    let mut worst_z = 0.0_f64;
    for coupling in [Coupling::Independent, Coupling::CommonRandomNumbers] {
        let pairs = paired_worlds(&exp, 100_000, 2024, coupling)?;
        for (records, protocol) in [
            (&pairs.actual, exp.actual()?),
            (&pairs.counterfactual, exp.counterfactual()?),
        ] {
            for g in [GroupBy::Post, GroupBy::Mid, GroupBy::MidPost] {
                let z = frequency_report(records, &protocol, g)?
                    .max_abs_z()
                    .unwrap_or(f64::INFINITY);
                worst_z = worst_z.max(z);
            }
        }
    }
    Ok(check(
        counts_ok && illus_ok && worst_z < 4.0,
        format!(
            "counts {a:?} / {c:?}, illustration S{:?} = {}, Monte Carlo max |z| = {worst_z:.2}",
            illus.system_ids, illus.fraction
        ),
        format!(
            "counts {a:?} / {c:?}, illustration {:?} {}, max |z| = {worst_z}",
            illus.system_ids, illus.fraction
        ),
    ))
}

fn criterion_7() -> Result<Outcome> {
    let mut r = rng(7);
    let (mut worst, mut compared) = (0.0_f64, 0usize);
    for _ in 0..1000 {
        let dim = r.random_range(2..=5);
        let tsv = TwoStateVector::new(random_state(&mut r, dim), random_state(&mut r, dim))?;
        let m = random_measurement(&mut r, "m", dim, dim);
        let fwd = skip_vanishing(abl_distribution(&tsv, &m))?;
        let rev = skip_vanishing(abl_distribution(&tsv.time_reversed(), &m))?;
        if let (Some(f), Some(b)) = (fwd, rev) {
            compared += 1;
            for ((_, p), (_, q)) in f.iter().zip(b.iter()) {
                worst = worst.max((p - q).abs());
            }
        }
    }
    Ok(check(
        worst <= 1e-12 && compared >= 990,
        format!("{compared} inputs, max |P(a,b) - P(b,a)| = {worst:.1e}"),
        format!("{compared} inputs compared, max deviation {worst:e}"),
    ))
}

fn criterion_8() -> Result<Outcome> {
    let bin = env!("CARGO_BIN_EXE_ablkit");
    let run = || {
        Command::new(bin)
            .args([
                "scenario",
                "sharp-shanks",
                "--seed",
                "42",
                "--format",
                "json",
            ])
            .output()
            .map_err(|e| Error::Io(e.to_string()))
    };
    let (first, second) = (run()?, run()?);
    let cli_ok = first.status.success()
        && second.status.success()
        && first.stdout == second.stdout
        && !first.stdout.is_empty();

    let mut exp = paired_world_experiment();
    exp.mid_actual = Some(exp.mid_counterfactual.clone());
    let pairs = paired_worlds(&exp, 10_000, 42, Coupling::CommonRandomNumbers)?;
    let paired_ok = pairs
        .actual
        .iter()
        .zip(&pairs.counterfactual)
        .all(|(a, c)| {
            a.system_id == c.system_id && a.pre == c.pre && a.mid == c.mid && a.post == c.post
        });
    Ok(check(
        cli_ok && paired_ok,
        format!(
            "two CLI runs byte-identical ({} bytes); 10000 paired systems record-identical",
            first.stdout.len()
        ),
        format!(
            "CLI identical {}, statuses {:?}/{:?}; paired identical {paired_ok}",
            first.stdout == second.stdout,
            first.status,
            second.status
        ),
    ))
}

/// Spin-1/2 eigenvectors along a Bloch direction, computed from the 2x2
/// matrix n·σ directly rather than through the toolkit.
fn oracle_spinors(theta: f64, phi: f64) -> [[Complex64; 2]; 2] {
    let (nx, ny, nz) = (
        theta.sin() * phi.cos(),
        theta.sin() * phi.sin(),
        theta.cos(),
    );
    // Both candidates solve (n·σ - s) u = 0 for s = ±1; take the larger one.
    let vec_for = |s: f64| {
        let v1 = [Complex64::new(nx, -ny), Complex64::new(s - nz, 0.0)];
        let v2 = [Complex64::new(s + nz, 0.0), Complex64::new(nx, ny)];
        let norm = |v: &[Complex64; 2]| (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
        let v = if norm(&v1) >= norm(&v2) { v1 } else { v2 };
        let n = norm(&v);
        [v[0] / n, v[1] / n]
    };
    [vec_for(1.0), vec_for(-1.0)]
}

fn braket(x: &[Complex64; 2], y: &[Complex64; 2]) -> Complex64 {
    x[0].conj() * y[0] + x[1].conj() * y[1]
}

fn criterion_9() -> Result<Outcome> {
    let steps = 37;
    let report =
        run_scenario(&ScenarioSpec::new("orthogonal-c").param("steps", steps.to_string()))?;
    let table = report
        .section("sweep")
        .and_then(|s| s.table.clone())
        .ok_or_else(|| Error::Io("sweep table missing".into()))?;
    let col = |name: &str| -> Vec<f64> {
        table
            .column(name)
            .map(|c| c.iter().filter_map(|x| x.as_f64()).collect())
            .unwrap_or_default()
    };
    let (thetas, deltas1, deltas2, pairs1, pairs2) = (
        col("theta_ab"),
        col("delta_b1"),
        col("delta_b2"),
        col("pair_b1"),
        col("pair_b2"),
    );
    if thetas.len() != steps {
        return Ok(Err(format!("expected {steps} rows, got {}", thetas.len())));
    }
    let a = oracle_spinors(0.0, 0.0)[0];
    let c = oracle_spinors(FRAC_PI_2, FRAC_PI_2);
    let mut worst = 0.0_f64;
    for (i, &theta) in thetas.iter().enumerate() {
        // Reported angles carry 12 significant digits, so the grid check is
        // relative; the computed curves below are held to 1e-12 absolute.
        let grid = PI * i as f64 / (steps - 1) as f64;
        if (theta - grid).abs() > 1e-11 * grid.max(1.0) {
            return Ok(Err(format!(
                "row {i}: theta_ab {theta} is not grid point {grid}"
            )));
        }
        let b = oracle_spinors(PI * i as f64 / (steps - 1) as f64, 0.0);
        for (k, (delta, pair)) in [(deltas1[i], pairs1[i]), (deltas2[i], pairs2[i])]
            .into_iter()
            .enumerate()
        {
            let amp: Vec<Complex64> = c
                .iter()
                .map(|cj| braket(&b[k], cj) * braket(cj, &a))
                .collect();
            let weight_m = braket(&b[k], &a).norm_sqr();
            let eta: f64 = amp.iter().map(|x| x.norm_sqr()).sum();
            let pair_oracle = (amp[0] * amp[1].conj()).re;
            worst = worst
                .max((delta - (weight_m - eta)).abs())
                .max((pair - pair_oracle).abs());
        }
    }
    let flagged = report.notes.iter().any(|n| n.contains("flagged"));
    Ok(check(
        worst <= 1e-12 && flagged,
        format!(
            "{steps}-point sweep, max |report - oracle| = {worst:.1e}; tension recorded in notes"
        ),
        format!("max deviation {worst:e}, notes flagged {flagged}"),
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("mixture weights at pi/4, pi/4", criterion_1),
        ("counterfactual total vs Born probability", criterion_2),
        ("corrected total equals Born probability", criterion_3),
        ("three-box ABL values and consistency", criterion_4),
        ("commuting intervening observables", criterion_5),
        ("paired-world expected counts and Monte Carlo", criterion_6),
        ("ABL time-reversal symmetry", criterion_7),
        ("determinism", criterion_8),
        ("c orthogonal to the a-b plane sweep", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = f().unwrap_or_else(|e| Err(format!("error: {e}")));
        match outcome {
            Ok(detail) => println!("PASS [{}] {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{}] {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
