//! Command-line interface: `area`, `predict`, `simulate`, `verify`, `transport`.
//!
//! Exit codes: 0 success, 1 verification failure, 2 invalid input or
//! infeasible instance, 3 combinatorial limit, 4 resource guard.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{self, FlowDocument};
use crate::graph::{resolve_trace, GraphDocument, Marginal};
use crate::marking::{self, DEFAULT_COMBINATION_LIMIT};
use crate::sim::{self, BuildOptions, ExperimentConfig, Guards, MCReport};
use crate::spectral::{predict_entropy, CaseLabel, EntropyPrediction};
use crate::transport::{self, Certificate, InstanceDocument, RoutingPlan, Scenarios, TransportInstance};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_SLACK: f64 = 0.03;

#[derive(Debug, Parser)]
#[command(name = "arealaw", version, about = "Boundary areas and entanglement entropies of random graph states")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Max flow, min cut and (optionally) brute-force area of a marginal.
    Area(AreaArgs),
    /// Asymptotic entropy prediction.
    Predict(PredictArgs),
    /// Monte Carlo estimate of the mean entropy.
    Simulate(SimulateArgs),
    /// Compare the Monte Carlo mean with the prediction.
    Verify(VerifyArgs),
    /// Scenario values, routing plan and rank certificate of a transport instance.
    Transport(TransportArgs),
}

#[derive(Debug, Args)]
pub struct AreaArgs {
    /// Graph document with a trace section.
    #[arg(short, long)]
    pub graph: PathBuf,
    /// Also enumerate all compatible markings.
    #[arg(long)]
    pub bruteforce: bool,
    /// Report the flow alone when the marking space is too large to enumerate.
    #[arg(long)]
    pub flow_only: bool,
    /// Largest marking space to enumerate.
    #[arg(long, default_value_t = DEFAULT_COMBINATION_LIMIT)]
    pub limit: u128,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(short, long)]
    pub graph: PathBuf,
    /// Local dimension N.
    #[arg(short = 'N', long = "local-dim")]
    pub n: usize,
    /// Show entropies in bits.
    #[arg(long)]
    pub bits: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(short, long)]
    pub graph: PathBuf,
    /// Local dimension N.
    #[arg(short = 'N', long = "local-dim")]
    pub n: usize,
    /// Number of samples.
    #[arg(short = 'n', long)]
    pub samples: usize,
    /// RNG seed; drawn at random and recorded when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Write per-sample spectra as CSV.
    #[arg(long)]
    pub spectra: Option<PathBuf>,
    /// Apply unitaries on fully traced and fully surviving vertices too.
    #[arg(long)]
    pub no_skip: bool,
    /// Sample single-loop marginals through Haar unitaries instead of Ginibre matrices.
    #[arg(long)]
    pub no_wishart: bool,
    #[arg(long)]
    pub bits: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub sim: SimulateArgs,
    /// Finite-size allowance in nats.
    #[arg(long, default_value_t = DEFAULT_SLACK)]
    pub slack: f64,
    /// Compare against this value (nats) instead of the prediction.
    #[arg(long, allow_hyphen_values = true)]
    pub expect: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TransportArgs {
    /// Instance document.
    #[arg(short, long)]
    pub instance: PathBuf,
    /// Build the permutation state and check its rank.
    #[arg(long)]
    pub certify: bool,
    /// Local dimension for the certificate (defaults to the instance's N).
    #[arg(short = 'N', long = "local-dim")]
    pub n: Option<usize>,
    /// Seed for the Haar comparison samples.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ReportInput {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphDocument>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instance: Option<InstanceDocument>,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skip_unitaries: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wishart: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slack: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expect: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BruteForce {
    pub area: Option<usize>,
    pub witness: Option<Vec<usize>>,
    pub equal: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Prediction {
    #[serde(flatten)]
    pub prediction: EntropyPrediction,
    /// Full predicted value; the leading term alone for generic marginals.
    pub value_nats: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    /// `two_sided` or `upper_bound` (generic marginals).
    pub check: String,
    pub target_nats: f64,
    #[serde(rename = "mean_H")]
    pub mean: f64,
    #[serde(rename = "stderr_H")]
    pub stderr: f64,
    pub tolerance: f64,
    pub deviation: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TransportReport {
    pub scenarios: Scenarios,
    pub plan: RoutingPlan,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Certificate>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub input: ReportInput,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowDocument>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_cuts: Option<Vec<Vec<String>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub marking: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bruteforce: Option<BruteForce>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prediction: Option<Prediction>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc: Option<MCReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transport: Option<TransportReport>,
}

impl Report {
    fn new(command: &str, input: ReportInput) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            input,
            flow: None,
            min_cuts: None,
            marking: None,
            bruteforce: None,
            prediction: None,
            mc: None,
            verdict: None,
            transport: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parse(_) | Error::Validation(_) | Error::Infeasible(_) | Error::Unsupported(_) | Error::Io(_) => 2,
        Error::CombinatorialLimit { .. } => 3,
        Error::Guard(_) => 4,
        Error::Inconsistent(_) | Error::Numeric(_) | Error::Certificate(_) => 1,
    }
}

/// Parses `args` (program name first) and runs the command. Returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli.command, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            if let Error::CombinatorialLimit { .. } = e {
                let _ = writeln!(stderr, "hint: pass --flow-only to report the flow value alone, or raise --limit");
            }
            exit_code(&e)
        }
    }
}

pub fn execute(command: &Command, out: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Area(a) => cmd_area(a, out),
        Command::Predict(a) => cmd_predict(a, out),
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Verify(a) => cmd_verify(a, out),
        Command::Transport(a) => cmd_transport(a, out),
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn load_marginal(path: &Path) -> Result<(GraphDocument, Marginal)> {
    let doc = GraphDocument::parse(&read(path)?)?;
    let graph = doc.graph()?;
    let spec = doc
        .trace_spec(&graph)?
        .ok_or_else(|| Error::Validation(format!("{}: graph document has no 'trace' section", path.display())))?;
    let marginal = resolve_trace(&graph, &spec)?;
    Ok((doc, marginal))
}

fn write_report(report: &Report, path: Option<&PathBuf>) -> Result<()> {
    if let Some(p) = path {
        std::fs::write(p, report.to_json())?;
    }
    Ok(())
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Validation(format!("N must be at least 2, got {n}")));
    }
    Ok(())
}

struct Units {
    bits: bool,
}

impl Units {
    fn show(&self, nats: f64) -> String {
        let bits = nats / std::f64::consts::LN_2;
        if self.bits {
            format!("{bits:.6} bits ({nats:.6} nats)")
        } else {
            format!("{nats:.6} nats ({bits:.6} bits)")
        }
    }
}

fn flow_section(m: &Marginal, report: &mut Report, out: &mut dyn Write) -> Result<flow::FlowResult> {
    let network = flow::build_network(m);
    let result = flow::max_flow(&network);
    let doc = result.document(&network);
    writeln!(out, "X = {}", result.value)?;
    writeln!(out, "min cut (source side): {{{}}}{}", doc.cut.join(", "), if result.cut_tied { " [tied]" } else { "" })?;
    if let Ok(cuts) = flow::enumerate_min_cuts(&network) {
        let labelled: Vec<Vec<String>> =
            cuts.iter().map(|c| c.iter().map(|&i| network.label(i).to_string()).collect()).collect();
        report.min_cuts = Some(labelled);
    }
    report.flow = Some(doc);
    Ok(result)
}

fn cmd_area(a: &AreaArgs, out: &mut dyn Write) -> Result<i32> {
    let (doc, m) = load_marginal(&a.graph)?;
    let mut report = Report::new("area", ReportInput { graph: Some(doc), ..Default::default() });
    let result = flow_section(&m, &mut report, out)?;
    let witness = marking::marking_from_flow(&m, &result)?;
    writeln!(out, "marking from flow: {:?}", witness.legs())?;
    report.marking = Some(witness.legs());

    let mut code = 0;
    if a.bruteforce {
        match marking::area_bruteforce(&m, a.limit) {
            Ok((area, best)) => {
                let equal = area as u64 == result.value;
                writeln!(out, "area (enumerated) = {area}, witness {:?}", best.legs())?;
                writeln!(out, "flow = area: {}", if equal { "OK" } else { "MISMATCH" })?;
                if !equal {
                    code = 1;
                }
                report.bruteforce =
                    Some(BruteForce { area: Some(area), witness: Some(best.legs()), equal: Some(equal), skipped: None });
            }
            Err(e @ Error::CombinatorialLimit { .. }) if a.flow_only => {
                writeln!(out, "enumeration skipped: {e}")?;
                report.bruteforce = Some(BruteForce { area: None, witness: None, equal: None, skipped: Some(e.to_string()) });
            }
            Err(e) => return Err(e),
        }
    }
    write_report(&report, a.out.as_ref())?;
    Ok(code)
}

fn prediction_section(m: &Marginal, n: usize, units: &Units, out: &mut dyn Write) -> Result<Prediction> {
    let p = predict_entropy(m, n);
    let value = p.value(n);
    writeln!(out, "case: {}", p.case.as_str())?;
    writeln!(out, "leading: {} ln N + {:.6} = {}", p.leading_area, p.leading_offset_nats, units.show(p.leading_area as f64 * (n as f64).ln() + p.leading_offset_nats))?;
    match p.correction_nats {
        Some(c) => writeln!(out, "correction: {} ({})", units.show(c), if p.exact { "exact" } else { "asymptotic" })?,
        None => writeln!(out, "correction: unknown")?,
    }
    if let Some(env) = p.literal_environment {
        writeln!(out, "|T'| + |G| = {env}")?;
    }
    writeln!(out, "predicted E H = {}", units.show(value))?;
    Ok(Prediction { prediction: p, value_nats: value })
}

fn cmd_predict(a: &PredictArgs, out: &mut dyn Write) -> Result<i32> {
    check_n(a.n)?;
    let (doc, m) = load_marginal(&a.graph)?;
    let mut report = Report::new("predict", ReportInput { graph: Some(doc), n: Some(a.n), ..Default::default() });
    report.prediction = Some(prediction_section(&m, a.n, &Units { bits: a.bits }, out)?);
    write_report(&report, a.out.as_ref())?;
    Ok(0)
}

fn simulate(a: &SimulateArgs, command: &str, out: &mut dyn Write) -> Result<(Report, Marginal)> {
    check_n(a.n)?;
    let (doc, m) = load_marginal(&a.graph)?;
    let guards = Guards::from_env()?;
    let seed = a.seed.unwrap_or_else(rand::random);
    let config = ExperimentConfig {
        build: if a.no_skip { BuildOptions { skip_traced: false, skip_surviving: false } } else { BuildOptions::default() },
        guards,
        jobs: a.jobs,
        keep_spectra: a.spectra.is_some(),
        wishart: !a.no_wishart,
        ..ExperimentConfig::default()
    };
    let input = ReportInput {
        graph: Some(doc),
        n: Some(a.n),
        samples: Some(a.samples),
        seed: Some(seed),
        skip_unitaries: Some(!a.no_skip),
        wishart: Some(!a.no_wishart),
        ..Default::default()
    };
    let mut report = Report::new(command, input);
    let units = Units { bits: a.bits };
    let result = flow_section(&m, &mut report, out)?;
    report.marking = Some(marking::marking_from_flow(&m, &result)?.legs());
    report.prediction = Some(prediction_section(&m, a.n, &units, out)?);

    let mc = sim::run_experiment(&m, a.n, a.samples, seed, &config)?;
    writeln!(out, "seed: {seed}")?;
    let method = match mc.method {
        sim::SamplingMethod::Wishart => "Wishart",
        sim::SamplingMethod::Graph => "graph state",
    };
    writeln!(out, "samples: {} ({method})", mc.samples)?;
    writeln!(out, "mean H = {} ± {}", units.show(mc.mean_entropy), units.show(mc.stderr_entropy))?;
    for r in &mc.renyi {
        writeln!(out, "mean H_{} = {}", r.q, units.show(r.mean))?;
    }
    if let Some(path) = &a.spectra {
        let file = std::fs::File::create(path)?;
        sim::write_spectra_csv(&mc, std::io::BufWriter::new(file))?;
    }
    report.mc = Some(mc);
    Ok((report, m))
}

fn cmd_simulate(a: &SimulateArgs, out: &mut dyn Write) -> Result<i32> {
    let (report, _) = simulate(a, "simulate", out)?;
    write_report(&report, a.out.as_ref())?;
    Ok(0)
}

fn cmd_verify(a: &VerifyArgs, out: &mut dyn Write) -> Result<i32> {
    if !(a.slack.is_finite() && a.slack >= 0.0) {
        return Err(Error::Validation(format!("--slack must be non-negative, got {}", a.slack)));
    }
    let (mut report, m) = simulate(&a.sim, "verify", out)?;
    report.input.slack = Some(a.slack);
    report.input.expect = a.expect;
    let pred = &report.prediction.as_ref().expect("prediction computed").prediction;
    let mc = report.mc.as_ref().expect("simulation ran");
    let n = a.sim.n as f64;
    let tolerance = (3.0 * mc.stderr_entropy).max(a.slack);

    let verdict = if a.expect.is_none() && pred.case == CaseLabel::Generic {
        // only the leading order is known: ln rank ≤ X ln(d_max N)
        let d_max = m.graph().edges().iter().map(|e| e.ratio).max().unwrap_or(1) as f64;
        let bound = pred.leading_area as f64 * (d_max * n).ln();
        let excess = mc.mean_entropy - bound;
        Verdict {
            check: "upper_bound".into(),
            target_nats: bound,
            mean: mc.mean_entropy,
            stderr: mc.stderr_entropy,
            tolerance,
            deviation: excess.max(0.0),
            passed: excess <= tolerance,
        }
    } else {
        let target = a.expect.unwrap_or_else(|| pred.value(a.sim.n));
        let deviation = (mc.mean_entropy - target).abs();
        Verdict {
            check: "two_sided".into(),
            target_nats: target,
            mean: mc.mean_entropy,
            stderr: mc.stderr_entropy,
            tolerance,
            deviation,
            passed: deviation <= tolerance,
        }
    };
    let status = if verdict.passed { "PASS" } else { "FAIL" };
    if verdict.check == "upper_bound" {
        writeln!(
            out,
            "{status}: mean {:.6} nats against leading-order bound {:.6} nats, tolerance {:.6} (correction unknown)",
            verdict.mean, verdict.target_nats, verdict.tolerance
        )?;
    } else {
        writeln!(
            out,
            "{status}: |mean - target| = {:.6} nats, tolerance {:.6} nats",
            verdict.deviation, verdict.tolerance
        )?;
    }
    let code = if verdict.passed { 0 } else { 1 };
    report.verdict = Some(verdict);
    write_report(&report, a.sim.out.as_ref())?;
    Ok(code)
}

fn cmd_transport(a: &TransportArgs, out: &mut dyn Write) -> Result<i32> {
    let instance = TransportInstance::parse(&read(&a.instance)?)?;
    let scenarios = transport::scenarios(&instance)?;
    let plan = transport::routing(&instance)?;
    writeln!(out, "Y1 = {}, Y2 = {}, Y3 = {}", scenarios.y1, scenarios.y2, scenarios.y3)?;
    for site in &plan.sites {
        let route: Vec<String> = site.legs.iter().map(|l| format!("{}:{:?}", l.leg, l.to)).collect();
        writeln!(out, "{}: {}", site.site, route.join(" "))?;
    }
    let n = a.n.or(instance.n);
    let certificate = if a.certify {
        let n = n.ok_or_else(|| Error::Validation("--certify needs -N or an N field in the instance".into()))?;
        let c = transport::certify(&instance, n, a.seed, &Guards::from_env()?)?;
        writeln!(
            out,
            "certificate: rank {} = N^Y3, eigenvalues uniform within {:.1e}, Haar max rank {} (PASS)",
            c.rank, c.max_eigenvalue_deviation, c.haar_max_rank
        )?;
        Some(c)
    } else {
        None
    };
    let input = ReportInput { instance: Some(instance.to_document()), n, seed: a.certify.then_some(a.seed), ..Default::default() };
    let mut report = Report::new("transport", input);
    report.transport = Some(TransportReport { scenarios, plan, certificate });
    write_report(&report, a.out.as_ref())?;
    Ok(0)
}
