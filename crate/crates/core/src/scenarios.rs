//! Named end-to-end constructions and their parameter schemas.
//!
//! A [`ScenarioSpec`] carries raw `key=value` strings; [`run_scenario`]
//! validates them against the scenario's schema, runs the computation and
//! returns a [`ScenarioReport`]. Angles are radians unless the spec sets
//! `degrees`; they may be written as plain numbers or as multiples of `pi`
//! (`pi/4`, `3pi/4`, `-2*pi/3`).

use std::f64::consts::PI;

use indexmap::IndexMap;

use crate::counterfactual::{
    consistency_condition, counterfactual_verdict, weight_condition, ConsistencyReport, Verdict,
    DEFAULT_TOLERANCE,
};
use crate::ensembles::{
    born_probability, eta_label, mixture_m, mixture_m_prime, ss_corrected_total,
    ss_counterfactual_total,
};
use crate::error::{Error, Result};
use crate::hilbert::{
    box_measurement, spin_measurement, spin_state, BlochDirection, SpectralMeasurement, Spin,
    StateVector,
};
use crate::montecarlo::{
    expected_counts, expected_fixed_fraction, fixed_systems, frequency_report,
    paired_world_illustration, paired_worlds, simulate_runs, Coupling, FrequencyReport, GroupBy,
    PairedExperiment, Protocol, RunRecord,
};
use crate::report::{Cell, ScenarioReport, Section, Table};
use crate::tsvf::conditional_distribution;

/// Largest Monte Carlo sample accepted from a parameter.
pub const MAX_RUNS: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Angle,
    /// Non-negative integer.
    Count,
    Flag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamInfo {
    pub name: &'static str,
    pub kind: ParamKind,
    pub default: &'static str,
    pub help: &'static str,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScenarioInfo {
    pub name: &'static str,
    pub description: &'static str,
    pub params: &'static [ParamInfo],
}

const fn param(
    name: &'static str,
    kind: ParamKind,
    default: &'static str,
    help: &'static str,
) -> ParamInfo {
    ParamInfo {
        name,
        kind,
        default,
        help,
    }
}

const N_HELP: &str = "Monte Carlo systems (0 skips sampling)";

/// Every built-in scenario.
pub const SCENARIOS: &[ScenarioInfo] = &[
    ScenarioInfo {
        name: "sharp-shanks",
        description: "Spin-1/2 in a plane: a = z, c at theta_ac, b at theta_ac + theta_cb. Counterfactual vs corrected \
                      totals for outcome c1, Born probability, weight and consistency conditions.",
        params: &[
            param("theta_ac", ParamKind::Angle, "pi/4", "angle between a and c"),
            param("theta_cb", ParamKind::Angle, "pi/4", "angle between c and b"),
            param("n", ParamKind::Count, "10000", N_HELP),
        ],
    },
    ScenarioInfo {
        name: "three-box",
        description: "Particle in three boxes, pre (1,1,1)/sqrt3, post (1,1,-1)/sqrt3; one box opened at a time.",
        params: &[param("n", ParamKind::Count, "0", N_HELP)],
    },
    ScenarioInfo {
        name: "paired-worlds",
        description: "Paired actual/counterfactual worlds: pre z-up, sigma_theta actually measured, sigma_phi \
                      counterfactually, post-selection by sigma_z.",
        params: &[
            param("theta", ParamKind::Angle, "pi/2", "actual intervening spin direction"),
            param("phi", ParamKind::Angle, "pi/3", "counterfactual intervening spin direction"),
            param("n", ParamKind::Count, "0", N_HELP),
            param("emit_runs", ParamKind::Flag, "false", "include per-system run tables"),
        ],
    },
    ScenarioInfo {
        name: "orthogonal-c",
        description: "c along y, orthogonal to the a-b plane; weight-condition deltas and consistency pair values \
                      over theta_ab in [0, pi].",
        params: &[param("steps", ParamKind::Count, "13", "sweep points (>= 2)")],
    },
    ScenarioInfo {
        name: "special-case",
        description: "Intervening spin commuting with pre-selection (theta_ac = 0) or post-selection (theta_cb = 0).",
        params: &[
            param("theta_ac", ParamKind::Angle, "0", "angle between a and c"),
            param("theta_cb", ParamKind::Angle, "pi/3", "angle between c and b"),
            param("steps", ParamKind::Count, "13", "interior sweep points per branch (>= 1)"),
        ],
    },
];

pub fn scenario_info(name: &str) -> Result<&'static ScenarioInfo> {
    SCENARIOS
        .iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::UnknownScenario(name.to_string()))
}

/// A scenario invocation before validation.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    pub parameters: IndexMap<String, String>,
    pub seed: u64,
    pub degrees: bool,
    pub tolerance: f64,
}

impl ScenarioSpec {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            parameters: IndexMap::new(),
            seed: 0,
            degrees: false,
            tolerance: DEFAULT_TOLERANCE,
        }
    }

    pub fn param(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.parameters.insert(key.into(), value.into());
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn degrees(mut self, degrees: bool) -> Self {
        self.degrees = degrees;
        self
    }

    pub fn tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    /// Splits `key=value`.
    pub fn parse_assignment(s: &str) -> Result<(String, String)> {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Error::parse(s, "expected key=value"))?;
        Ok((k.trim().to_string(), v.trim().to_string()))
    }
}

/// Parses an angle: a number, or `[k][*]pi[/d]` with optional sign. The
/// `degrees` flag applies to plain numbers only; `pi` forms are radians.
pub fn parse_angle(s: &str, degrees: bool) -> Result<f64> {
    let t = s.trim();
    let bad = |reason: &str| Error::parse(s, reason);
    let value = if let Some(pos) = t.find("pi") {
        let (head, tail) = (&t[..pos], &t[pos + 2..]);
        let head = head.trim().trim_end_matches('*').trim();
        let k = match head {
            "" | "+" => 1.0,
            "-" => -1.0,
            h => h
                .parse::<f64>()
                .map_err(|_| bad("bad multiplier before pi"))?,
        };
        let tail = tail.trim();
        let d = if tail.is_empty() {
            1.0
        } else {
            let d = tail
                .strip_prefix('/')
                .ok_or_else(|| bad("expected /divisor after pi"))?
                .trim()
                .parse::<f64>()
                .map_err(|_| bad("bad divisor"))?;
            if d == 0.0 {
                return Err(bad("division by zero"));
            }
            d
        };
        k * PI / d
    } else {
        let x: f64 = t.parse().map_err(|_| bad("not a number"))?;
        if degrees {
            x.to_radians()
        } else {
            x
        }
    };
    if !value.is_finite() {
        return Err(bad("angle must be finite"));
    }
    Ok(value)
}

/// Inclusive grid `start:end:steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleGrid {
    pub start: f64,
    pub end: f64,
    pub steps: usize,
}

impl AngleGrid {
    pub fn parse(s: &str, degrees: bool) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [a] => {
                let x = parse_angle(a, degrees)?;
                Ok(Self {
                    start: x,
                    end: x,
                    steps: 1,
                })
            }
            [a, b, n] => {
                let steps: usize = n
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(s, "bad step count"))?;
                if steps == 0 {
                    return Err(Error::parse(s, "step count must be positive"));
                }
                Ok(Self {
                    start: parse_angle(a, degrees)?,
                    end: parse_angle(b, degrees)?,
                    steps,
                })
            }
            _ => Err(Error::parse(s, "expected angle or start:end:steps")),
        }
    }

    pub fn points(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.start];
        }
        (0..self.steps)
            .map(|i| self.start + (self.end - self.start) * i as f64 / (self.steps - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Value {
    Angle(f64),
    Count(u64),
    Flag(bool),
}

struct Params(IndexMap<&'static str, Value>);

impl Params {
    fn angle(&self, name: &str) -> f64 {
        match self.0[name] {
            Value::Angle(x) => x,
            _ => unreachable!("schema declares {name} as an angle"),
        }
    }

    fn count(&self, name: &str) -> u64 {
        match self.0[name] {
            Value::Count(n) => n,
            _ => unreachable!("schema declares {name} as a count"),
        }
    }

    fn flag(&self, name: &str) -> bool {
        match self.0[name] {
            Value::Flag(b) => b,
            _ => unreachable!("schema declares {name} as a flag"),
        }
    }

    fn echo(&self) -> IndexMap<String, Cell> {
        self.0
            .iter()
            .map(|(k, v)| {
                let cell = match *v {
                    Value::Angle(x) => Cell::num(x),
                    Value::Count(n) => Cell::from(n),
                    Value::Flag(b) => Cell::from(b),
                };
                (k.to_string(), cell)
            })
            .collect()
    }
}

fn parse_value(info: &ParamInfo, raw: &str, degrees: bool) -> Result<Value> {
    let invalid = |reason: String| Error::param(info.name, reason);
    match info.kind {
        ParamKind::Angle => parse_angle(raw, degrees)
            .map(Value::Angle)
            .map_err(|e| invalid(e.to_string())),
        ParamKind::Count => raw
            .trim()
            .parse::<u64>()
            .map(Value::Count)
            .map_err(|_| invalid(format!("`{raw}` is not a non-negative integer"))),
        ParamKind::Flag => match raw.trim() {
            "true" | "1" | "yes" => Ok(Value::Flag(true)),
            "false" | "0" | "no" => Ok(Value::Flag(false)),
            _ => Err(invalid(format!("`{raw}` is not a boolean"))),
        },
    }
}

fn validate(info: &ScenarioInfo, spec: &ScenarioSpec) -> Result<Params> {
    if !(spec.tolerance.is_finite() && spec.tolerance > 0.0) {
        return Err(Error::param(
            "tolerance",
            "must be a positive finite number",
        ));
    }
    for key in spec.parameters.keys() {
        if !info.params.iter().any(|p| p.name == key) {
            return Err(Error::param(
                key.clone(),
                format!("unknown parameter for scenario `{}`", info.name),
            ));
        }
    }
    let mut values = IndexMap::new();
    for p in info.params {
        let value = match spec.parameters.get(p.name) {
            Some(raw) => parse_value(p, raw, spec.degrees)?,
            // Defaults are written in radians.
            None => parse_value(p, p.default, false)?,
        };
        values.insert(p.name, value);
    }
    let params = Params(values);
    if info.params.iter().any(|p| p.name == "n") && params.count("n") > MAX_RUNS {
        return Err(Error::param("n", format!("at most {MAX_RUNS}")));
    }
    Ok(params)
}

/// Validates `spec` and runs it. Identical specs give identical reports.
pub fn run_scenario(spec: &ScenarioSpec) -> Result<ScenarioReport> {
    let info = scenario_info(&spec.name)?;
    let params = validate(info, spec)?;
    let mut report = ScenarioReport::new(info.name, info.description, spec.seed);
    report.parameters = params.echo();
    report
        .parameters
        .insert("tolerance".into(), Cell::num(spec.tolerance));
    match info.name {
        "sharp-shanks" => sharp_shanks(&params, spec, &mut report)?,
        "three-box" => three_box(&params, spec, &mut report)?,
        "paired-worlds" => paired_worlds_scenario(&params, spec, &mut report)?,
        "orthogonal-c" => orthogonal_c(&params, spec, &mut report)?,
        "special-case" => special_case(&params, spec, &mut report)?,
        other => return Err(Error::UnknownScenario(other.to_string())),
    }
    Ok(report)
}

/// Pre-selection z-up (`a1`), intervening `σ_c` (`c1`/`c2`) at polar angle
/// `theta_ac`, post-selection `σ_b` (`b1`/`b2`) at `theta_ac + theta_cb`, all
/// in the xz plane.
pub fn coplanar_spins(
    theta_ac: f64,
    theta_cb: f64,
) -> (StateVector, SpectralMeasurement, SpectralMeasurement) {
    let pre = spin_state(&BlochDirection::z_axis(), Spin::Up);
    let mid = spin_measurement(&BlochDirection::from_angles(theta_ac, 0.0))
        .relabeled("sigma_c", &["c1", "c2"])
        .expect("two labels for a two-outcome measurement");
    let post = spin_measurement(&BlochDirection::from_angles(theta_ac + theta_cb, 0.0))
        .relabeled("sigma_b", &["b1", "b2"])
        .expect("two labels for a two-outcome measurement");
    (pre, mid, post)
}

/// Pre-selection z-up, intervening `σ_y`, post-selection `σ_b` with `b` at
/// polar angle `theta_ab` in the xz plane.
pub fn orthogonal_c_spins(
    theta_ab: f64,
) -> (StateVector, SpectralMeasurement, SpectralMeasurement) {
    let pre = spin_state(&BlochDirection::z_axis(), Spin::Up);
    let mid = spin_measurement(&BlochDirection::y_axis())
        .relabeled("sigma_c", &["c1", "c2"])
        .expect("two labels");
    let post = spin_measurement(&BlochDirection::from_angles(theta_ab, 0.0))
        .relabeled("sigma_b", &["b1", "b2"])
        .expect("two labels");
    (pre, mid, post)
}

fn frequency_table() -> Table {
    Table::new([
        "source",
        "group",
        "count",
        "total",
        "empirical",
        "theory",
        "z",
    ])
}

fn push_frequencies(table: &mut Table, source: &str, f: &FrequencyReport) {
    for r in &f.rows {
        table.push(vec![
            source.into(),
            r.group.clone().into(),
            r.count.into(),
            r.total.into(),
            r.empirical.into(),
            r.theory.into(),
            r.z.into(),
        ]);
    }
}

/// `|z| < 4` for every row with a defined z, and no undefined z.
fn within_four_sigma(reports: &[FrequencyReport]) -> bool {
    reports
        .iter()
        .all(|f| f.max_abs_z().is_some_and(|z| z < 4.0))
}

fn max_abs_z(reports: &[FrequencyReport]) -> Option<f64> {
    reports
        .iter()
        .map(FrequencyReport::max_abs_z)
        .try_fold(0.0_f64, |acc, z| z.map(|z| acc.max(z)))
}

fn pair_rows(table: &mut Table, post: &str, c: &ConsistencyReport) {
    for p in &c.pairs {
        table.push(vec![
            post.into(),
            p.alpha.clone().into(),
            p.beta.clone().into(),
            p.value.into(),
        ]);
    }
}

fn sharp_shanks(p: &Params, spec: &ScenarioSpec, report: &mut ScenarioReport) -> Result<()> {
    let (ac, cb, n) = (p.angle("theta_ac"), p.angle("theta_cb"), p.count("n"));
    let tol = spec.tolerance;
    let (pre, mid, post) = coplanar_spins(ac, cb);

    let mut abl = Table::new(["post", "c1", "c2"]);
    for q in post.outcomes() {
        let d = conditional_distribution(&pre, &q.projector, &mid)?;
        abl.push(vec![
            q.label.clone().into(),
            d.get("c1")?.into(),
            d.get("c2")?.into(),
        ]);
    }
    report.sections.push(Section::new("abl").with_table(abl));

    let m = mixture_m(&pre, &post)?;
    let mut t = Table::new(["label", "post", "weight"]);
    for s in &m.subensembles {
        t.push(vec![
            s.label.clone().into(),
            s.post_outcome.clone().into(),
            s.weight.into(),
        ]);
    }
    report
        .sections
        .push(Section::new("mixture_m").with_table(t));

    let mp = mixture_m_prime(&pre, &mid, &post)?;
    let mut t = Table::new(["label", "mid", "post", "weight"]);
    for s in &mp.subensembles {
        t.push(vec![
            s.label.clone().into(),
            s.mid_outcome.clone().into(),
            s.post_outcome.clone().into(),
            s.weight.into(),
        ]);
    }
    let mut section = Section::new("mixture_m_prime");
    for (i, label) in post.labels().enumerate() {
        section = section.value(eta_label(i), mp.eta_weight(label)?);
    }
    report.sections.push(section.with_table(t));

    let counterfactual = ss_counterfactual_total(&pre, &mid, &post, "c1")?;
    let corrected = ss_corrected_total(&pre, &mid, &post, "c1")?;
    let born = born_probability(&pre, &mid, "c1")?;
    report.sections.push(
        Section::new("totals")
            .value("outcome", "c1")
            .value("counterfactual_total", counterfactual)
            .value("corrected_total", corrected)
            .value("born", born)
            .value("discrepancy", counterfactual - born),
    );

    let wc = weight_condition(&pre, &mid, &post, tol)?;
    let mut t = Table::new(["post", "weight_m", "weight_eta", "delta"]);
    for e in &wc.entries {
        t.push(vec![
            e.post_outcome.clone().into(),
            e.weight_m.into(),
            e.weight_eta.into(),
            e.delta.into(),
        ]);
    }
    report.sections.push(
        Section::new("weight_condition")
            .value("satisfied", wc.satisfied)
            .value("max_abs_delta", wc.max_abs_delta())
            .with_table(t),
    );

    let verdicts: Vec<Verdict> = post
        .labels()
        .map(|b| counterfactual_verdict(&pre, &mid, &post, b, tol))
        .collect::<Result<_>>()?;
    let mut t = Table::new(["post", "alpha", "beta", "value"]);
    let mut section = Section::new("consistency");
    for v in &verdicts {
        pair_rows(&mut t, &v.post_outcome, &v.consistency);
        section = section.value(
            format!("satisfied_{}", v.post_outcome),
            v.consistency.satisfied,
        );
    }
    section = section.value("special_case", verdicts[0].special_case.map(|s| s.reason()));
    report.sections.push(section.with_table(t));

    report
        .verdicts
        .insert("weight_condition".into(), wc.satisfied);
    for v in &verdicts {
        report.verdicts.insert(
            format!("consistency_{}", v.post_outcome),
            v.consistency.satisfied,
        );
    }
    report.verdicts.insert(
        "corrected_equals_born".into(),
        (corrected - born).abs() <= tol,
    );
    report.verdicts.insert(
        "discrepancy_zero".into(),
        (counterfactual - born).abs() <= tol,
    );

    if n > 0 {
        let without = Protocol::new("a1", pre.clone(), None, post.clone())?;
        let with = Protocol::new("a1", pre.clone(), Some(mid.clone()), post.clone())?;
        let runs_m = simulate_runs(&without, n, spec.seed)?;
        let runs_mp = simulate_runs(&with, n, spec.seed)?;
        let mut reports = vec![
            (
                "mixture_m",
                frequency_report(&runs_m, &without, GroupBy::Post)?,
            ),
            (
                "mixture_m_prime:eta",
                frequency_report(&runs_mp, &with, GroupBy::Post)?,
            ),
            (
                "mixture_m_prime",
                frequency_report(&runs_mp, &with, GroupBy::MidPost)?,
            ),
        ];
        for b in ["b1", "b2"] {
            match frequency_report(&runs_mp, &with, GroupBy::MidGivenPost(b.into())) {
                Ok(f) => reports.push((if b == "b1" { "abl|b1" } else { "abl|b2" }, f)),
                Err(Error::EmptySelection(_)) => {}
                Err(e) => return Err(e),
            }
        }
        let mut t = frequency_table();
        for (source, f) in &reports {
            push_frequencies(&mut t, source, f);
        }
        let fs: Vec<FrequencyReport> = reports.into_iter().map(|(_, f)| f).collect();
        report.sections.push(
            Section::new("monte_carlo")
                .value("n", n)
                .value("max_abs_z", max_abs_z(&fs))
                .with_table(t),
        );
        report
            .verdicts
            .insert("monte_carlo_within_4_sigma".into(), within_four_sigma(&fs));
    }
    Ok(())
}

fn three_box(p: &Params, spec: &ScenarioSpec, report: &mut ScenarioReport) -> Result<()> {
    let n = p.count("n");
    let pre = StateVector::from_real(&[1.0, 1.0, 1.0])?;
    let post_state = StateVector::from_real(&[1.0, 1.0, -1.0])?;
    let post = SpectralMeasurement::projective_test("post", &post_state, "b", "not-b")?;
    for (i, name) in ["a", "b", "c"].into_iter().enumerate() {
        let boxm = box_measurement(3, i)?;
        let v = counterfactual_verdict(&pre, &boxm, &post, "b", spec.tolerance)?;
        let mut section = Section::new(format!("box_{name}"))
            .value("abl_in", v.abl.get("in")?)
            .value("abl_out", v.abl.get("out")?)
            .value("pair_in_out", v.consistency.pairs[0].value)
            .value("consistency_satisfied", v.consistency.satisfied)
            .value("weight_condition_satisfied", v.weight_condition.satisfied)
            .value("discrepancy_in", v.discrepancy("in"))
            .value("licensed", v.licensed);
        if n > 0 {
            let protocol = Protocol::new("a", pre.clone(), Some(boxm.clone()), post.clone())?;
            let runs = simulate_runs(&protocol, n, spec.seed)?;
            let f = frequency_report(&runs, &protocol, GroupBy::MidGivenPost("b".into()))?;
            let row = f.row("in").expect("box measurement has an `in` outcome");
            section = section
                .value("mc_post_selected", row.total)
                .value("mc_frequency_in", row.empirical)
                .value("mc_z_in", row.z);
        }
        report.sections.push(section);
        report
            .verdicts
            .insert(format!("licensed_box_{name}"), v.licensed);
    }
    Ok(())
}

fn paired_world_experiment(theta: f64, phi: f64) -> PairedExperiment {
    let sigma = |angle: f64, name: &str, labels: [&str; 2]| {
        spin_measurement(&BlochDirection::from_angles(angle, 0.0))
            .relabeled(name, &labels)
            .expect("two labels")
    };
    PairedExperiment {
        pre_label: "z1".into(),
        pre: spin_state(&BlochDirection::z_axis(), Spin::Up),
        mid_actual: Some(sigma(theta, "sigma_theta", ["theta1", "theta2"])),
        mid_counterfactual: sigma(phi, "sigma_phi", ["phi1", "phi2"]),
        post: sigma(0.0, "sigma_z", ["z1", "z2"]),
    }
}

fn run_table(records: &[RunRecord]) -> Table {
    let mut t = Table::new(["system_id", "world", "pre", "mid", "post", "seed_path"]);
    for r in records {
        t.push(vec![
            r.system_id.into(),
            r.world.to_string().into(),
            r.pre.clone().into(),
            r.mid.clone().into(),
            r.post.clone().into(),
            r.seed_path.clone().into(),
        ]);
    }
    t
}

fn paired_worlds_scenario(
    p: &Params,
    spec: &ScenarioSpec,
    report: &mut ScenarioReport,
) -> Result<()> {
    let (theta, phi, n) = (p.angle("theta"), p.angle("phi"), p.count("n"));
    let exp = paired_world_experiment(theta, phi);
    let actual = exp.actual()?;
    let counterfactual = exp.counterfactual()?;

    let mut t = Table::new(["world", "mid", "post", "probability", "count_of_16"]);
    for (world, protocol) in [("actual", &actual), ("counterfactual", &counterfactual)] {
        for (mid, post, prob) in expected_counts(protocol, 1.0) {
            t.push(vec![
                world.into(),
                mid.into(),
                post.into(),
                prob.into(),
                (16.0 * prob).into(),
            ]);
        }
    }
    report
        .sections
        .push(Section::new("expected_counts").with_table(t));

    let illustration = paired_world_illustration();
    let fixed = fixed_systems(&illustration, "z1")?;
    let ids: Vec<String> = fixed.system_ids.iter().map(|id| format!("S{id}")).collect();
    report.sections.push(
        Section::new("illustration")
            .value("coupling", illustration.coupling.to_string())
            .value("target_post", "z1")
            .value("fixed_systems", ids.join(","))
            .value("actual_selected", fixed.actual_selected)
            .value("fraction", fixed.fraction),
    );

    let mut section = Section::new("expected_fixed_fraction").value("target_post", "z1");
    for coupling in [Coupling::Independent, Coupling::CommonRandomNumbers] {
        section = section.value(
            coupling.to_string(),
            expected_fixed_fraction(&exp, "z1", coupling)?,
        );
    }
    report.sections.push(section);

    if n == 0 {
        return Ok(());
    }
    for coupling in [Coupling::Independent, Coupling::CommonRandomNumbers] {
        let pairs = paired_worlds(&exp, n, spec.seed, coupling)?;
        let fixed = fixed_systems(&pairs, "z1")?;
        let fa = frequency_report(&pairs.actual, &actual, GroupBy::MidPost)?;
        let fc = frequency_report(&pairs.counterfactual, &counterfactual, GroupBy::MidPost)?;
        let mut t = frequency_table();
        push_frequencies(&mut t, "actual", &fa);
        push_frequencies(&mut t, "counterfactual", &fc);
        let fs = [fa, fc];
        report.sections.push(
            Section::new(format!("paired_worlds[{coupling}]"))
                .value("coupling", coupling.to_string())
                .value("n", n)
                .value("target_post", "z1")
                .value("actual_selected", fixed.actual_selected)
                .value("fixed", fixed.system_ids.len())
                .value("fraction", fixed.fraction)
                .value(
                    "expected_fraction",
                    expected_fixed_fraction(&exp, "z1", coupling)?,
                )
                .value("max_abs_z", max_abs_z(&fs))
                .with_table(t),
        );
        report.verdicts.insert(
            format!("marginals_within_4_sigma[{coupling}]"),
            within_four_sigma(&fs),
        );
        if p.flag("emit_runs") {
            let records: Vec<RunRecord> = pairs.records().cloned().collect();
            report
                .sections
                .push(Section::new(format!("runs[{coupling}]")).with_table(run_table(&records)));
        }
    }
    report.notes.push(
        "Fixed fractions depend on the coupling model: quantum mechanics assigns no joint distribution to \
         runs in different worlds."
            .into(),
    );
    Ok(())
}

/// The three-level case where the weight condition holds but consistency
/// fails: pre `(1,1,1)/√3`, post `(2,2,−1)/3`, computational-basis mid.
pub fn weight_only_example() -> Result<(StateVector, SpectralMeasurement, SpectralMeasurement)> {
    let pre = StateVector::from_real(&[1.0, 1.0, 1.0])?;
    let post_state = StateVector::from_real(&[2.0, 2.0, -1.0])?;
    let post = SpectralMeasurement::projective_test("post", &post_state, "b", "not-b")?;
    Ok((pre, SpectralMeasurement::computational_basis(3)?, post))
}

fn orthogonal_c(p: &Params, spec: &ScenarioSpec, report: &mut ScenarioReport) -> Result<()> {
    let steps = p.count("steps");
    if steps < 2 {
        return Err(Error::param("steps", "need at least 2 sweep points"));
    }
    let tol = spec.tolerance;
    let mut t = Table::new([
        "theta_ab",
        "weight_m_b1",
        "eta_b1",
        "delta_b1",
        "delta_b2",
        "pair_b1",
        "pair_b2",
        "weight_condition",
        "consistency_b1",
        "consistency_b2",
    ]);
    let (mut coincide, mut weight_only) = (true, false);
    for i in 0..steps {
        let theta = PI * i as f64 / (steps - 1) as f64;
        let (pre, mid, post) = orthogonal_c_spins(theta);
        let wc = weight_condition(&pre, &mid, &post, tol)?;
        let cons: Vec<ConsistencyReport> = post
            .outcomes()
            .iter()
            .map(|q| {
                consistency_condition(
                    &pre,
                    &mid,
                    q.state.as_ref().expect("spin outcomes carry states"),
                    tol,
                )
            })
            .collect::<Result<_>>()?;
        let consistent = cons.iter().all(|c| c.satisfied);
        coincide &= wc.satisfied == consistent;
        weight_only |= wc.satisfied && !consistent;
        let e1 = &wc.entries[0];
        t.push(vec![
            theta.into(),
            e1.weight_m.into(),
            e1.weight_eta.into(),
            e1.delta.into(),
            wc.entries[1].delta.into(),
            cons[0].pairs[0].value.into(),
            cons[1].pairs[0].value.into(),
            wc.satisfied.into(),
            cons[0].satisfied.into(),
            cons[1].satisfied.into(),
        ]);
    }
    report
        .sections
        .push(Section::new("sweep").value("steps", steps).with_table(t));

    let (pre, mid, post) = weight_only_example()?;
    let v = counterfactual_verdict(&pre, &mid, &post, "b", tol)?;
    let entry = v
        .weight_condition
        .entry("b")
        .expect("post outcome `b` exists");
    let mut pairs = Table::new(["post", "alpha", "beta", "value"]);
    pair_rows(&mut pairs, "b", &v.consistency);
    report.sections.push(
        Section::new("three_level_example")
            .value("pre", "(1,1,1)/sqrt3")
            .value("post", "(2,2,-1)/3")
            .value("mid", "computational basis")
            .value("weight_m", entry.weight_m)
            .value("weight_eta", entry.weight_eta)
            .value("delta", entry.delta)
            .value("weight_condition_satisfied", v.weight_condition.satisfied)
            .value("consistency_satisfied", v.consistency.satisfied)
            .with_table(pairs),
    );

    report
        .verdicts
        .insert("conditions_coincide_on_sweep".into(), coincide);
    report.verdicts.insert(
        "weight_condition_without_consistency_on_sweep".into(),
        weight_only,
    );
    report.verdicts.insert(
        "weight_condition_without_consistency_three_level".into(),
        v.weight_condition.satisfied && !v.consistency.satisfied,
    );
    report.notes.push(
        "With c orthogonal to both a and b the pair value is cos(theta_ab)/4 and the weight-condition delta is \
         cos(theta_ab)/2, so both conditions hold only at theta_ab = pi/2. This geometry does not produce a case \
         where the weight condition holds while consistency fails; the claim that it does is flagged, not asserted."
            .into(),
    );
    report.notes.push(
        "For a two-outcome intervening measurement the two conditions are equivalent; the three_level_example \
         section shows the weight condition holding while consistency fails."
            .into(),
    );
    Ok(())
}

fn special_case_table() -> Table {
    Table::new([
        "theta_ac",
        "theta_cb",
        "weight_m_b1",
        "eta_b1",
        "cos2_half_theta_ab",
        "max_abs_delta",
        "max_abs_pair",
        "discrepancy_c1",
        "discrepancy_c2",
        "special_case",
    ])
}

struct SpecialRow {
    weight_ok: bool,
    consistent: bool,
    discrepancy_ok: bool,
}

fn special_case_row(t: &mut Table, ac: f64, cb: f64, tol: f64) -> Result<SpecialRow> {
    let (pre, mid, post) = coplanar_spins(ac, cb);
    let verdicts: Vec<Verdict> = post
        .labels()
        .map(|b| counterfactual_verdict(&pre, &mid, &post, b, tol))
        .collect::<Result<_>>()?;
    let wc = &verdicts[0].weight_condition;
    let max_pair = verdicts
        .iter()
        .map(|v| v.consistency.max_abs())
        .fold(0.0, f64::max);
    let d1 = verdicts[0].discrepancy("c1").expect("c1 exists");
    let d2 = verdicts[0].discrepancy("c2").expect("c2 exists");
    let half = (ac + cb) / 2.0;
    t.push(vec![
        ac.into(),
        cb.into(),
        wc.entries[0].weight_m.into(),
        wc.entries[0].weight_eta.into(),
        (half.cos() * half.cos()).into(),
        wc.max_abs_delta().into(),
        max_pair.into(),
        d1.into(),
        d2.into(),
        verdicts[0].special_case.map(|s| s.reason()).into(),
    ]);
    Ok(SpecialRow {
        weight_ok: wc.satisfied,
        consistent: verdicts.iter().all(|v| v.consistency.satisfied),
        discrepancy_ok: d1.abs() <= tol && d2.abs() <= tol,
    })
}

fn special_case(p: &Params, spec: &ScenarioSpec, report: &mut ScenarioReport) -> Result<()> {
    let (ac, cb, steps) = (p.angle("theta_ac"), p.angle("theta_cb"), p.count("steps"));
    let tol = spec.tolerance;
    if ac.abs() > 1e-12 && cb.abs() > 1e-12 {
        return Err(Error::param(
            "theta_ac",
            "one of theta_ac, theta_cb must be 0",
        ));
    }
    if steps == 0 {
        return Err(Error::param("steps", "need at least 1 sweep point"));
    }
    let mut t = special_case_table();
    let point = special_case_row(&mut t, ac, cb, tol)?;
    let (other, other_name) = if ac.abs() <= 1e-12 {
        (cb, "theta_cb")
    } else {
        (ac, "theta_ac")
    };
    report.sections.push(
        Section::new("point")
            .value("theta_ab", ac + cb)
            .value(
                format!("cos2_half_{other_name}"),
                (other / 2.0).cos().powi(2),
            )
            .with_table(t),
    );
    report
        .verdicts
        .insert("point_weight_condition".into(), point.weight_ok);
    report
        .verdicts
        .insert("point_consistency".into(), point.consistent);
    report
        .verdicts
        .insert("point_discrepancy_zero".into(), point.discrepancy_ok);

    // Open interval (0, pi): at the endpoints one post-selection branch has
    // zero weight and its ABL value is undefined.
    let angles: Vec<f64> = (1..=steps)
        .map(|i| PI * i as f64 / (steps + 1) as f64)
        .collect();
    let (mut weight_ok, mut consistent, mut discrepancy_ok) = (true, true, true);
    for (name, zero_ac) in [
        ("sweep[commutes-with-pre]", true),
        ("sweep[commutes-with-post]", false),
    ] {
        let mut t = special_case_table();
        for &x in &angles {
            let (a, c) = if zero_ac { (0.0, x) } else { (x, 0.0) };
            let row = special_case_row(&mut t, a, c, tol)?;
            weight_ok &= row.weight_ok;
            consistent &= row.consistent;
            discrepancy_ok &= row.discrepancy_ok;
        }
        report
            .sections
            .push(Section::new(name).value("steps", steps).with_table(t));
    }
    report
        .verdicts
        .insert("sweep_weight_condition".into(), weight_ok);
    report
        .verdicts
        .insert("sweep_consistency".into(), consistent);
    report
        .verdicts
        .insert("sweep_discrepancy_zero".into(), discrepancy_ok);
    Ok(())
}

/// Coplanar-spin quantities over a `theta_ac × theta_cb` grid. Points where a
/// quantity is undefined (a post-selection branch of zero weight) get nulls.
pub fn sharp_shanks_sweep(
    theta_ac: &AngleGrid,
    theta_cb: &AngleGrid,
    tolerance: f64,
) -> Result<ScenarioReport> {
    if !(tolerance.is_finite() && tolerance > 0.0) {
        return Err(Error::param(
            "tolerance",
            "must be a positive finite number",
        ));
    }
    let mut report = ScenarioReport::new(
        "sweep",
        "Coplanar spin-1/2 totals and conditions for outcome c1 over a grid of angles.",
        0,
    );
    for (name, g) in [("theta_ac", theta_ac), ("theta_cb", theta_cb)] {
        report.parameters.insert(
            name.into(),
            format!("{}:{}:{}", g.start, g.end, g.steps).into(),
        );
    }
    report
        .parameters
        .insert("tolerance".into(), Cell::num(tolerance));
    let mut t = Table::new([
        "theta_ac",
        "theta_cb",
        "counterfactual_total",
        "corrected_total",
        "born",
        "discrepancy",
        "weight_m_b1",
        "eta_b1",
        "weight_condition",
        "consistency_b1",
        "consistency_b2",
    ]);
    let mut undefined = 0usize;
    let numeric = |r: Result<f64>| -> Result<Option<f64>> {
        match r {
            Ok(x) => Ok(Some(x)),
            Err(e) if e.is_numerical() => Ok(None),
            Err(e) => Err(e),
        }
    };
    for &ac in &theta_ac.points() {
        for &cb in &theta_cb.points() {
            let (pre, mid, post) = coplanar_spins(ac, cb);
            let cf = numeric(ss_counterfactual_total(&pre, &mid, &post, "c1"))?;
            let corrected = numeric(ss_corrected_total(&pre, &mid, &post, "c1"))?;
            let born = born_probability(&pre, &mid, "c1")?;
            let wc = weight_condition(&pre, &mid, &post, tolerance)?;
            let cons: Vec<bool> = post
                .outcomes()
                .iter()
                .map(|q| {
                    consistency_condition(
                        &pre,
                        &mid,
                        q.state.as_ref().expect("spin outcomes carry states"),
                        tolerance,
                    )
                    .map(|c| c.satisfied)
                })
                .collect::<Result<_>>()?;
            if cf.is_none() {
                undefined += 1;
            }
            t.push(vec![
                ac.into(),
                cb.into(),
                cf.into(),
                corrected.into(),
                born.into(),
                cf.map(|c| c - born).into(),
                wc.entries[0].weight_m.into(),
                wc.entries[0].weight_eta.into(),
                wc.satisfied.into(),
                cons[0].into(),
                cons[1].into(),
            ]);
        }
    }
    report.sections.push(
        Section::new("sweep")
            .value("undefined_points", undefined)
            .with_table(t),
    );
    Ok(report)
}
