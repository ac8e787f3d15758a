//! Command-line front end. [`run`] returns the exit code and rendered output
//! so commands can be driven in-process.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::format::{displayed, fmt_rounded};
use crate::importance::{filter_alternative, filter_overall, ImportanceReport};
use crate::ingest::{read_model, read_object_model, read_scenarios};
use crate::model::{validate_model, ObjectModel, UcmModel};
use crate::scenario::{
    enumerate_scenarios, resolve_scenario_bounded, scenario_chain, ScenarioDefinition, ScenarioPath,
    DEFAULT_LOOP_BOUND,
};
use crate::simulate::estimate;
use crate::usage::{check_stochastic, convert, flatten, FlatChain, UsageModel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ISSUES: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "ucm-usage", version, about = "Usage-model importance analysis of Use Case Maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the model (and object model) for structural issues.
    Validate(RunConfig),
    /// Scenario, object and container importance with optional thresholds.
    Analyze(RunConfig),
    /// Graphviz rendering of the usage model, the flat chain, or one scenario.
    ExportDot(RunConfig),
    /// Monte Carlo estimates of scenario frequencies and object visits.
    Simulate(RunConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub scenarios: Option<PathBuf>,
    #[arg(long)]
    pub objects: Option<PathBuf>,
    /// Generate every resolvable scenario instead of reading --scenarios.
    #[arg(long)]
    pub enumerate: bool,
    #[arg(long, value_name = "R")]
    pub overall_threshold: Option<f64>,
    #[arg(long, value_name = "R")]
    pub alt_threshold: Option<f64>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    pub format: OutputFormat,
    #[arg(long)]
    pub flat: bool,
    #[arg(long, value_name = "NAME")]
    pub scenario: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 100_000)]
    pub walks: usize,
    #[arg(long, default_value_t = DEFAULT_LOOP_BOUND)]
    pub loop_bound: usize,
    /// Round displayed numbers to D decimals.
    #[arg(long, value_name = "D")]
    pub round: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Outcome {
            code: EXIT_OK,
            stdout,
            stderr: String::new(),
        }
    }

    fn fail(code: i32, stderr: impl Into<String>) -> Self {
        let mut stderr = stderr.into();
        if !stderr.ends_with('\n') {
            stderr.push('\n');
        }
        Outcome {
            code,
            stdout: String::new(),
            stderr,
        }
    }
}

pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            return if code == EXIT_OK {
                Outcome::ok(text)
            } else {
                Outcome::fail(code, text)
            };
        }
    };
    let result = match &cli.command {
        Command::Validate(c) => cmd_validate(c),
        Command::Analyze(c) => cmd_analyze(c),
        Command::ExportDot(c) => cmd_export_dot(c),
        Command::Simulate(c) => cmd_simulate(c),
    };
    result.unwrap_or_else(|o| o)
}

type CmdResult = Result<Outcome, Outcome>;

struct Loaded {
    model: UcmModel,
    objects: ObjectModel,
    usage: UsageModel,
    chain: FlatChain,
}

fn load_inputs(config: &RunConfig) -> Result<(UcmModel, ObjectModel), Outcome> {
    let usage = |e: crate::ingest::IngestError| Outcome::fail(EXIT_USAGE, e.to_string());
    let model = read_model(&config.model).map_err(usage)?;
    let objects = match &config.objects {
        Some(path) => read_object_model(path, &model).map_err(usage)?,
        None => ObjectModel::from_model(&model),
    };
    Ok((model, objects))
}

fn load(config: &RunConfig) -> Result<Loaded, Outcome> {
    for (flag, value) in [
        ("--overall-threshold", config.overall_threshold),
        ("--alt-threshold", config.alt_threshold),
    ] {
        if let Some(v) = value {
            if !(0.0..=1.0).contains(&v) {
                return Err(Outcome::fail(EXIT_USAGE, format!("{flag} must lie in [0, 1]")));
            }
        }
    }
    let (model, objects) = load_inputs(config)?;
    let report = validate_model(&model, &objects);
    if !report.is_empty() {
        return Err(Outcome::fail(EXIT_ISSUES, render_issues(&report.issues)));
    }
    let runtime = |e: crate::usage::UsageError| Outcome::fail(EXIT_RUNTIME, e.to_string());
    let usage = convert(&model).map_err(runtime)?;
    let chain = flatten(&usage).map_err(runtime)?;
    let stochastic = check_stochastic(&chain);
    if !stochastic.is_empty() {
        return Err(Outcome::fail(EXIT_ISSUES, render_issues(&stochastic.issues)));
    }
    Ok(Loaded {
        model,
        objects,
        usage,
        chain,
    })
}

fn render_issues(issues: &[crate::model::Issue]) -> String {
    issues.iter().map(|i| format!("{i}\n")).collect()
}

fn definitions(config: &RunConfig, loaded: &Loaded) -> Result<Vec<ScenarioDefinition>, Outcome> {
    if config.enumerate {
        return Ok(enumerate_scenarios(&loaded.chain));
    }
    match &config.scenarios {
        Some(path) => read_scenarios(path, &loaded.model)
            .map_err(|e| Outcome::fail(EXIT_USAGE, e.to_string())),
        None => Err(Outcome::fail(EXIT_USAGE, "either --scenarios or --enumerate is required")),
    }
}

fn resolve_all(
    config: &RunConfig,
    defs: &[ScenarioDefinition],
    chain: &FlatChain,
) -> Result<Vec<ScenarioPath>, Outcome> {
    defs.iter()
        .map(|d| {
            resolve_scenario_bounded(d, chain, config.loop_bound)
                .map_err(|e| Outcome::fail(EXIT_RUNTIME, format!("scenario {}: {e}", d.name)))
        })
        .collect()
}

/// `validate`: exit 0 iff no issues; issues go to stdout one per line.
pub fn cmd_validate(config: &RunConfig) -> CmdResult {
    let (model, objects) = load_inputs(config)?;
    let mut issues = validate_model(&model, &objects).issues;
    if issues.is_empty() {
        if let Ok(chain) = convert(&model).and_then(|u| flatten(&u)) {
            issues = check_stochastic(&chain).issues;
        }
    }
    let code = if issues.is_empty() { EXIT_OK } else { EXIT_ISSUES };
    let stdout = match config.format {
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(&serde_json::json!({ "issues": issues }))
                .expect("issues serialize");
            s.push('\n');
            s
        }
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["location", "message"]).expect("in-memory write");
            for i in &issues {
                w.write_record([&i.location, &i.message]).expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
        }
        OutputFormat::Text if issues.is_empty() => "ok: 0 issues\n".to_string(),
        OutputFormat::Text => render_issues(&issues),
    };
    Ok(Outcome {
        code,
        stdout,
        stderr: String::new(),
    })
}

#[derive(Debug, Serialize)]
struct Row {
    name: String,
    #[serde(rename = "type", skip_serializing_if = "Option::is_none")]
    object_type: Option<String>,
    value: f64,
}

#[derive(Debug, Serialize)]
struct Section {
    title: String,
    rows: Vec<Row>,
}

fn render_sections(sections: &[Section], format: OutputFormat, round: Option<usize>) -> String {
    match format {
        OutputFormat::Text => {
            let mut out = String::new();
            for (i, s) in sections.iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                }
                let _ = writeln!(out, "[{}]", s.title);
                for r in &s.rows {
                    let _ = writeln!(out, "{} {}", r.name, fmt_rounded(r.value, round));
                }
            }
            out
        }
        OutputFormat::Json => {
            let shown: Vec<Section> = sections
                .iter()
                .map(|s| Section {
                    title: s.title.clone(),
                    rows: s
                        .rows
                        .iter()
                        .map(|r| Row {
                            name: r.name.clone(),
                            object_type: r.object_type.clone(),
                            value: displayed(r.value, round),
                        })
                        .collect(),
                })
                .collect();
            let mut s = serde_json::to_string_pretty(&shown).expect("sections serialize");
            s.push('\n');
            s
        }
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["section", "name", "type", "value"]).expect("in-memory write");
            for s in sections {
                for r in &s.rows {
                    let t = r.object_type.clone().unwrap_or_default();
                    let v = fmt_rounded(r.value, round);
                    w.write_record([s.title.as_str(), &r.name, &t, &v]).expect("in-memory write");
                }
            }
            String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
        }
    }
}

fn scenario_rows(names: &[String], report: &ImportanceReport) -> Vec<Row> {
    names
        .iter()
        .map(|n| Row {
            name: n.clone(),
            object_type: None,
            value: report.scenario(n).unwrap_or(0.0),
        })
        .collect()
}

/// `analyze`: scenario table, threshold tables, per-type object tables and
/// percentages.
pub fn cmd_analyze(config: &RunConfig) -> CmdResult {
    let loaded = load(config)?;
    let defs = definitions(config, &loaded)?;
    let paths = resolve_all(config, &defs, &loaded.chain)?;
    let report = ImportanceReport::compute(&paths, &loaded.objects);

    let mut sections = vec![Section {
        title: "scenarios".into(),
        rows: scenario_rows(&paths.iter().map(|p| p.name.clone()).collect::<Vec<_>>(), &report),
    }];
    if let Some(t) = config.overall_threshold {
        sections.push(Section {
            title: format!("overall threshold {}", fmt_rounded(t, None)),
            rows: scenario_rows(&filter_overall(&report, t), &report),
        });
    }
    if let Some(t) = config.alt_threshold {
        sections.push(Section {
            title: format!("alternative threshold {}", fmt_rounded(t, None)),
            rows: scenario_rows(&filter_alternative(&paths, t), &report),
        });
    }
    for group in ["responsibility", "plugin", "stub", "component"] {
        let Some(ranked) = report.rankings.get(group) else { continue };
        sections.push(Section {
            title: format!("importance {group}"),
            rows: ranked
                .iter()
                .map(|r| Row {
                    name: r.object.clone(),
                    object_type: report.object_type.get(&r.object).map(|t| t.to_string()),
                    value: r.importance,
                })
                .collect(),
        });
    }
    for group in ["responsibility", "plugin", "stub", "component"] {
        let (Some(ranked), Some(percents)) = (report.rankings.get(group), report.percents.get(group))
        else {
            continue;
        };
        sections.push(Section {
            title: format!("percent {group}"),
            rows: ranked
                .iter()
                .map(|r| Row {
                    name: r.object.clone(),
                    object_type: report.object_type.get(&r.object).map(|t| t.to_string()),
                    value: percents[&r.object],
                })
                .collect(),
        });
    }
    Ok(Outcome::ok(render_sections(&sections, config.format, config.round)))
}

/// `export-dot`: the hierarchy (one digraph per chain), the flat chain with
/// `--flat`, or one scenario chain with `--scenario`.
pub fn cmd_export_dot(config: &RunConfig) -> CmdResult {
    let loaded = load(config)?;
    if let Some(name) = &config.scenario {
        let defs = definitions(config, &loaded)?;
        let def = defs
            .iter()
            .find(|d| &d.name == name)
            .ok_or_else(|| Outcome::fail(EXIT_USAGE, format!("unknown scenario {name}")))?;
        let path = resolve_all(config, std::slice::from_ref(def), &loaded.chain)?.remove(0);
        return Ok(Outcome::ok(scenario_chain(&path, &loaded.chain).to_dot()));
    }
    if config.flat {
        return Ok(Outcome::ok(loaded.chain.to_dot()));
    }
    Ok(Outcome::ok(loaded.usage.chains().map(|c| c.to_dot()).collect()))
}

/// `simulate`: signature frequencies and mean visits, labelled by scenario
/// name when scenarios are available.
pub fn cmd_simulate(config: &RunConfig) -> CmdResult {
    if config.walks == 0 {
        return Err(Outcome::fail(EXIT_USAGE, "--walks must be at least 1"));
    }
    let loaded = load(config)?;
    let mut labels = BTreeMap::new();
    let mut order = Vec::new();
    if config.enumerate || config.scenarios.is_some() {
        let defs = definitions(config, &loaded)?;
        for path in resolve_all(config, &defs, &loaded.chain)? {
            labels.insert(path.signature(), path.name.clone());
            order.push(path.signature());
        }
    }
    let est = estimate(&loaded.chain, config.walks, config.seed, config.loop_bound)
        .map_err(|e| Outcome::fail(EXIT_RUNTIME, e.to_string()))?;

    let mut freq_rows: Vec<Row> = order
        .iter()
        .map(|sig| Row {
            name: labels[sig].clone(),
            object_type: None,
            value: est.frequencies.get(sig).copied().unwrap_or(0.0),
        })
        .collect();
    freq_rows.extend(
        est.frequencies
            .iter()
            .filter(|(sig, _)| !labels.contains_key(*sig))
            .map(|(sig, f)| Row {
                name: sig.to_string(),
                object_type: None,
                value: *f,
            }),
    );
    let visit_rows = est
        .mean_visits
        .iter()
        .map(|(obj, v)| Row {
            name: obj.clone(),
            object_type: None,
            value: *v,
        })
        .collect();
    let header = vec![
        Row { name: "seed".into(), object_type: None, value: est.seed as f64 },
        Row { name: "walks".into(), object_type: None, value: est.walks as f64 },
    ];
    let sections = [
        Section { title: format!("simulation {}", est.generator), rows: header },
        Section { title: "frequencies".into(), rows: freq_rows },
        Section { title: "mean visits".into(), rows: visit_rows },
    ];
    Ok(Outcome::ok(render_sections(&sections, config.format, config.round)))
}
