//! `ablkit` command-line interface.
//!
//! Exit status: 0 on success, 2 on invalid input, 1 when a requested
//! quantity does not exist (for example a vanishing ABL denominator).

mod specs;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ablkit::counterfactual::{consistency_condition, DEFAULT_TOLERANCE};
use ablkit::montecarlo::{
    expected_fixed_fraction, fixed_systems, frequency_report, paired_worlds, simulate_runs,
    write_run_records_csv, Coupling, FrequencyReport, GroupBy, PairedExperiment, Protocol,
    RunRecord,
};
use ablkit::report::{emit_report, Cell, Format, ScenarioReport, Section, Table};
use ablkit::scenarios::{run_scenario, sharp_shanks_sweep, AngleGrid, ScenarioSpec, SCENARIOS};
use ablkit::tsvf::{abl_distribution, TwoStateVector};
use ablkit::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "ablkit",
    version,
    about = "ABL probabilities, post-selected ensembles and counterfactual checks"
)]
struct Cli {
    /// Output format (default: csv for `sweep`, text for `list`, json otherwise).
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,

    /// Write output to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Tolerance for the weight and consistency conditions.
    #[arg(long, global = true, default_value_t = DEFAULT_TOLERANCE)]
    tolerance: f64,

    /// Read plain numeric angles as degrees.
    #[arg(long, global = true)]
    degrees: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
    Text,
}

impl From<OutputFormat> for Format {
    fn from(f: OutputFormat) -> Self {
        match f {
            OutputFormat::Json => Format::Json,
            OutputFormat::Csv => Format::Csv,
            OutputFormat::Text => Format::Text,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CouplingArg {
    Independent,
    #[value(alias = "crn")]
    CommonRandomNumbers,
}

impl From<CouplingArg> for Coupling {
    fn from(c: CouplingArg) -> Self {
        match c {
            CouplingArg::Independent => Coupling::Independent,
            CouplingArg::CommonRandomNumbers => Coupling::CommonRandomNumbers,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// ABL distribution for one pre/post pair and measurement.
    Abl {
        /// Pre-selected state, e.g. `spin:z` or `vec:1,1,1`.
        #[arg(long, allow_hyphen_values = true)]
        pre: String,
        /// Post-selected state.
        #[arg(long, allow_hyphen_values = true)]
        post: String,
        /// Intervening measurement, e.g. `spin:pi/4,0` or `box:3:0`.
        #[arg(long, allow_hyphen_values = true)]
        meas: String,
        /// Report only this outcome's probability as well.
        #[arg(long)]
        outcome: Option<String>,
    },
    /// Run a named scenario.
    Scenario {
        name: String,
        /// Scenario parameter as key=value (repeatable).
        #[arg(long = "param", value_name = "KEY=VALUE", allow_hyphen_values = true)]
        params: Vec<String>,
        /// Root seed for sampling.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// List scenarios and their parameters.
    List,
    /// Coplanar spin totals over a grid of angles.
    Sweep {
        /// `start:end:steps` or a single angle.
        #[arg(long, default_value = "0:pi:9", allow_hyphen_values = true)]
        theta_ac: String,
        /// Same form as `--theta-ac`.
        #[arg(long, default_value = "pi/4", allow_hyphen_values = true)]
        theta_cb: String,
    },
    /// Monte Carlo runs, optionally paired with a counterfactual world.
    Simulate {
        /// Pre-selected state.
        #[arg(long, allow_hyphen_values = true)]
        pre: String,
        /// Intervening measurement in the actual world (omit for none).
        #[arg(long, allow_hyphen_values = true)]
        mid: Option<String>,
        /// Post-selection measurement.
        #[arg(long, allow_hyphen_values = true)]
        post: String,
        /// Intervening measurement in the counterfactual world.
        #[arg(long, allow_hyphen_values = true)]
        counterfactual_mid: Option<String>,
        /// Number of systems.
        #[arg(long, default_value_t = 10_000)]
        n: u64,
        /// Root seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// How the two worlds share randomness.
        #[arg(long, value_enum, default_value = "common-random-numbers")]
        coupling: CouplingArg,
        /// Also write every run record to this CSV file.
        #[arg(long)]
        records: Option<PathBuf>,
    },
}

fn abl_report(
    pre: &str,
    post: &str,
    meas: &str,
    outcome: Option<&str>,
    cli: &Cli,
) -> Result<ScenarioReport> {
    let pre_state = specs::parse_state(pre, cli.degrees)?;
    let post_state = specs::parse_state(post, cli.degrees)?;
    let m = specs::parse_measurement(meas, cli.degrees)?;
    let tsv = TwoStateVector::new(pre_state.clone(), post_state.clone())?;
    let dist = abl_distribution(&tsv, &m)?;
    let cons = consistency_condition(&pre_state, &m, &post_state, cli.tolerance)?;

    let mut report = ScenarioReport::new("abl", "ABL distribution for an ad-hoc pre/post pair.", 0);
    report.parameters.insert("pre".into(), pre.into());
    report.parameters.insert("post".into(), post.into());
    report.parameters.insert("meas".into(), meas.into());
    report
        .parameters
        .insert("tolerance".into(), Cell::num(cli.tolerance));
    let mut t = Table::new(["outcome", "probability"]);
    for (label, p) in dist.iter() {
        t.push(vec![label.into(), p.into()]);
    }
    let mut section = Section::new("abl").value("measurement", dist.measurement.clone());
    if let Some(o) = outcome {
        report.parameters.insert("outcome".into(), o.into());
        section = section.value("probability", dist.get(o)?);
    }
    report.sections.push(section.with_table(t));
    let mut t = Table::new(["alpha", "beta", "value"]);
    for p in &cons.pairs {
        t.push(vec![
            p.alpha.clone().into(),
            p.beta.clone().into(),
            p.value.into(),
        ]);
    }
    report.sections.push(
        Section::new("consistency")
            .value("satisfied", cons.satisfied)
            .value("max_abs", cons.max_abs())
            .with_table(t),
    );
    report.verdicts.insert("licensed".into(), cons.satisfied);
    Ok(report)
}

fn list_report() -> ScenarioReport {
    let mut report = ScenarioReport::new("list", "Built-in scenarios and their parameters.", 0);
    let mut t = Table::new(["scenario", "parameter", "kind", "default", "help"]);
    for s in SCENARIOS {
        for p in s.params {
            t.push(vec![
                s.name.into(),
                p.name.into(),
                format!("{:?}", p.kind).to_lowercase().into(),
                p.default.into(),
                p.help.into(),
            ]);
        }
    }
    let mut section = Section::new("scenarios");
    for s in SCENARIOS {
        section = section.value(s.name, s.description);
    }
    report.sections.push(section.with_table(t));
    report
}

fn push_frequencies(t: &mut Table, source: &str, f: &FrequencyReport) {
    for r in &f.rows {
        t.push(vec![
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

fn world_frequencies(
    t: &mut Table,
    world: &str,
    records: &[RunRecord],
    protocol: &Protocol,
) -> Result<()> {
    push_frequencies(
        t,
        &format!("{world}:post"),
        &frequency_report(records, protocol, GroupBy::Post)?,
    );
    if protocol.mid.is_some() {
        push_frequencies(
            t,
            &format!("{world}:mid,post"),
            &frequency_report(records, protocol, GroupBy::MidPost)?,
        );
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn simulate_report(
    pre: &str,
    mid: Option<&str>,
    post: &str,
    counterfactual_mid: Option<&str>,
    n: u64,
    seed: u64,
    coupling: Coupling,
    records: Option<&PathBuf>,
    cli: &Cli,
) -> Result<ScenarioReport> {
    let pre_state = specs::parse_state(pre, cli.degrees)?;
    let mid_meas = mid
        .map(|m| specs::parse_measurement(m, cli.degrees))
        .transpose()?;
    let post_meas = specs::parse_measurement(post, cli.degrees)?;

    let mut report = ScenarioReport::new(
        "simulate",
        "Monte Carlo runs against ensemble weights.",
        seed,
    );
    report.parameters.insert("pre".into(), pre.into());
    report.parameters.insert("mid".into(), mid.into());
    report.parameters.insert("post".into(), post.into());
    report
        .parameters
        .insert("counterfactual_mid".into(), counterfactual_mid.into());
    report.parameters.insert("n".into(), n.into());

    let mut t = Table::new([
        "source",
        "group",
        "count",
        "total",
        "empirical",
        "theory",
        "z",
    ]);
    let all_records: Vec<RunRecord> = match counterfactual_mid {
        None => {
            let protocol = Protocol::new("pre", pre_state, mid_meas, post_meas)?;
            let runs = simulate_runs(&protocol, n, seed)?;
            world_frequencies(&mut t, "actual", &runs, &protocol)?;
            report
                .sections
                .push(Section::new("frequencies").value("n", n).with_table(t));
            runs
        }
        Some(cf) => {
            report
                .parameters
                .insert("coupling".into(), coupling.to_string().into());
            let exp = PairedExperiment {
                pre_label: "pre".into(),
                pre: pre_state,
                mid_actual: mid_meas,
                mid_counterfactual: specs::parse_measurement(cf, cli.degrees)?,
                post: post_meas,
            };
            let pairs = paired_worlds(&exp, n, seed, coupling)?;
            world_frequencies(&mut t, "actual", &pairs.actual, &exp.actual()?)?;
            world_frequencies(
                &mut t,
                "counterfactual",
                &pairs.counterfactual,
                &exp.counterfactual()?,
            )?;
            report
                .sections
                .push(Section::new("frequencies").value("n", n).with_table(t));

            let mut fixed = Table::new([
                "target_post",
                "actual_selected",
                "fixed",
                "fraction",
                "expected_fraction",
            ]);
            for label in exp.post.labels() {
                match fixed_systems(&pairs, label) {
                    Ok(f) => fixed.push(vec![
                        label.into(),
                        f.actual_selected.into(),
                        f.system_ids.len().into(),
                        f.fraction.into(),
                        expected_fixed_fraction(&exp, label, coupling)?.into(),
                    ]),
                    Err(Error::EmptySelection(_)) => fixed.push(vec![
                        label.into(),
                        0usize.into(),
                        0usize.into(),
                        Cell::Null,
                        Cell::Null,
                    ]),
                    Err(e) => return Err(e),
                }
            }
            report.sections.push(
                Section::new("fixed_systems")
                    .value("coupling", coupling.to_string())
                    .with_table(fixed),
            );
            pairs.records().cloned().collect()
        }
    };
    if let Some(path) = records {
        write_run_records_csv(&all_records, BufWriter::new(File::create(path)?))?;
    }
    Ok(report)
}

fn run(cli: &Cli) -> Result<()> {
    let (report, default_format) = match &cli.command {
        Command::Abl {
            pre,
            post,
            meas,
            outcome,
        } => (
            abl_report(pre, post, meas, outcome.as_deref(), cli)?,
            Format::Json,
        ),
        Command::Scenario { name, params, seed } => {
            let mut spec = ScenarioSpec::new(name.clone())
                .seed(*seed)
                .degrees(cli.degrees)
                .tolerance(cli.tolerance);
            for p in params {
                let (k, v) = ScenarioSpec::parse_assignment(p)?;
                spec = spec.param(k, v);
            }
            (run_scenario(&spec)?, Format::Json)
        }
        Command::List => (list_report(), Format::Text),
        Command::Sweep { theta_ac, theta_cb } => {
            let ac = AngleGrid::parse(theta_ac, cli.degrees)?;
            let cb = AngleGrid::parse(theta_cb, cli.degrees)?;
            (sharp_shanks_sweep(&ac, &cb, cli.tolerance)?, Format::Csv)
        }
        Command::Simulate {
            pre,
            mid,
            post,
            counterfactual_mid,
            n,
            seed,
            coupling,
            records,
        } => (
            simulate_report(
                pre,
                mid.as_deref(),
                post,
                counterfactual_mid.as_deref(),
                *n,
                *seed,
                (*coupling).into(),
                records.as_ref(),
                cli,
            )?,
            Format::Json,
        ),
    };
    let format = cli.format.map(Format::from).unwrap_or(default_format);
    // Render fully before touching the destination so a failed render
    // leaves no partial file.
    let mut buf = Vec::new();
    emit_report(&report, format, &mut buf)?;
    match &cli.out {
        Some(path) => std::fs::write(path, &buf)?,
        None => io::stdout().lock().write_all(&buf)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 1 } else { 2 })
        }
    }
}
