//! The `dpfdr` command-line tool.
//!
//! Exit codes: 0 success, 1 a verification check failed, 2 malformed input
//! or usage, 3 parameter out of range, 4 zero-noise mode refused, 5 every
//! verification check inconclusive.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use dpfdr_core::private_fdr::{private_bhq, PrivateFdrConfig, SelectionBackend};
use dpfdr_core::procedures::{step_down_bhq, step_up_bhq};
use dpfdr_core::pvalues::{empirical_sensitivity_audit, multiplicative_sensitivity};
use dpfdr_core::{bhq_critical_values, NoiseStream, PrivacyParams};
use serde_json::{json, Value};

use crate::exec::Parallel;
use crate::format::{num, to_json_string};
use crate::io::{
    read_dataset, read_pvalues, write_pvalues, write_rejections, FormatError, ModelSpec,
};
use crate::suites::{
    run_accuracy, run_audit, run_exhaustive, run_fdr_bounds, run_submartingale, AccuracyParams,
    AuditParams, ExhaustiveParams, FdrBoundsParams, Status, SubmartingaleParams, Suite,
    SuiteReport,
};

pub const EXIT_FAIL: i32 = 1;
pub const EXIT_MALFORMED: i32 = 2;
pub const EXIT_RANGE: i32 = 3;
pub const EXIT_ZERO_NOISE: i32 = 4;
pub const EXIT_INCONCLUSIVE: i32 = 5;

#[derive(Debug, Parser)]
#[command(
    name = "dpfdr",
    version,
    about = "Classical and differentially private FDR control"
)]
pub struct Cli {
    /// JSON object whose keys supply flags of the subcommand; flags given on
    /// the command line take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a rejection procedure on a p-value file.
    Reject(RejectArgs),
    /// Compute per-column p-values from a dataset and its null model.
    Pvalues(PvaluesArgs),
    /// Run a verification suite and print a JSON report.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    StepUp,
    StepDown,
    Private,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Backend {
    Peeling,
    Oneshot,
}

impl From<Backend> for SelectionBackend {
    fn from(b: Backend) -> Self {
        match b {
            Backend::Peeling => SelectionBackend::Peeling,
            Backend::Oneshot => SelectionBackend::OneShot,
        }
    }
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct RejectArgs {
    /// P-value CSV (`index,p_value[,label]`); `-` reads stdin.
    #[arg(long, short)]
    pub input: PathBuf,
    /// Rejection CSV destination; stdout when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Target FDR level in (0, 1).
    #[arg(long)]
    pub q: f64,
    /// Rejection procedure.
    #[arg(long, value_enum, default_value_t = Mode::StepUp)]
    pub mode: Mode,
    /// Privacy budget ε (private mode).
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Privacy parameter δ (private mode).
    #[arg(long)]
    pub delta: Option<f64>,
    /// Per-individual sensitivity η of ln p (private mode).
    #[arg(long)]
    pub eta: Option<f64>,
    /// Floor ν applied before taking ln p (private mode).
    #[arg(long)]
    pub nu: Option<f64>,
    /// Maximum number of private rejections (private mode).
    #[arg(long)]
    pub k: Option<usize>,
    /// Selection backend (private mode).
    #[arg(long, value_enum, default_value_t = Backend::Peeling)]
    pub backend: Backend,
    /// Noise seed; required in private mode.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Use the literal per-round noise scales.
    #[arg(long)]
    pub paper_exact: bool,
    /// Constant `C` of the one-shot selection scale.
    #[arg(long)]
    pub one_shot_c: Option<f64>,
    /// Where to write the metadata JSON; stderr when absent.
    #[arg(long)]
    pub metadata: Option<PathBuf>,
    #[arg(long, hide = true)]
    pub zero_noise: bool,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct PvaluesArgs {
    /// Dataset CSV with a header row and one row per individual.
    #[arg(long)]
    pub data: PathBuf,
    /// Null-model JSON `{n, m, B, mu, sigma}`.
    #[arg(long)]
    pub model: PathBuf,
    /// Floor ν applied to the released p-values.
    #[arg(long, default_value_t = 1e-6)]
    pub nu: f64,
    /// Also replace every row by the ±B extremes and report the observed η.
    #[arg(long)]
    pub audit: bool,
    /// P-value CSV destination; stdout when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Sensitivity report destination; stderr when absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct VerifyArgs {
    /// Suite to run.
    #[arg(long, value_enum)]
    pub suite: Suite,
    /// Master seed; required.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Main repetition count: oracle trials, Monte-Carlo trials, random
    /// pairs (privacy-exhaustive) or samples per input (privacy-audit).
    #[arg(long)]
    pub trials: Option<u64>,
    /// Number of hypotheses.
    #[arg(long)]
    pub m: Option<usize>,
    /// Target FDR level.
    #[arg(long)]
    pub q: Option<f64>,
    /// Selection size; a comma-separated list for fdr-bounds.
    #[arg(long, value_delimiter = ',')]
    pub k: Option<Vec<usize>>,
    /// Privacy budget ε.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Privacy parameter δ.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Closeness constant (privacy-exhaustive) or one-shot constant `C`.
    #[arg(long)]
    pub c: Option<f64>,
    /// Envelope factor for oneshot-accuracy.
    #[arg(long)]
    pub factor: Option<f64>,
    /// Peeling in oneshot-accuracy uses the composition-derived scale.
    #[arg(long)]
    pub certified_scale: bool,
    /// Trials of the classical step-up check in fdr-bounds.
    #[arg(long)]
    pub classical_trials: Option<u64>,
    /// Compare each random vector with itself (privacy-exhaustive).
    #[arg(long)]
    pub identical: bool,
    /// JSON report destination; stdout when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// One-row-per-check CSV table.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Where to write the metadata JSON.
    #[arg(long)]
    pub metadata: Option<PathBuf>,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        CliError::new(EXIT_MALFORMED, e.to_string())
    }
}

impl From<dpfdr_core::Error> for CliError {
    fn from(e: dpfdr_core::Error) -> Self {
        use dpfdr_core::Error as E;
        let code = match e {
            E::Domain { .. } | E::KTooLarge { .. } | E::TooLarge { .. } => EXIT_RANGE,
            _ => EXIT_MALFORMED,
        };
        CliError::new(code, e.to_string())
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::new(EXIT_MALFORMED, e.to_string())
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => return report_error(e),
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_MALFORMED } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Reject(a) => cmd_reject(&a),
        Command::Pvalues(a) => cmd_pvalues(&a),
        Command::Verify(a) => cmd_verify(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => report_error(e),
    }
}

fn report_error(e: CliError) -> i32 {
    eprintln!("error: {}", e.message);
    e.code
}

/// Removes `--config FILE` from `args` and splices the file's flags in right
/// after the subcommand name, so later command-line flags override them.
fn expand_config(mut args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let mut path = None;
    let mut i = 1;
    while i < args.len() {
        let a = args[i].to_string_lossy().into_owned();
        if a == "--" {
            break;
        }
        if a == "--config" {
            if i + 1 >= args.len() {
                return Err(CliError::new(EXIT_MALFORMED, "--config needs a file"));
            }
            path = Some(PathBuf::from(args.remove(i + 1)));
            args.remove(i);
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
            args.remove(i);
        } else {
            i += 1;
        }
    }
    let Some(path) = path else { return Ok(args) };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::new(EXIT_MALFORMED, format!("{}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::new(EXIT_MALFORMED, format!("{}: {e}", path.display())))?;
    let Value::Object(map) = value else {
        return Err(CliError::new(
            EXIT_MALFORMED,
            "config file must hold a JSON object",
        ));
    };
    let mut extra = Vec::new();
    for (key, v) in map {
        let flag = format!("--{}", key.replace('_', "-"));
        match v {
            Value::Bool(true) => extra.push(OsString::from(flag)),
            Value::Bool(false) | Value::Null => {}
            Value::Array(items) => {
                let joined: Vec<String> =
                    items.iter().map(scalar_text).collect::<Result<_, _>>()?;
                extra.push(flag.into());
                extra.push(joined.join(",").into());
            }
            other => {
                extra.push(flag.into());
                extra.push(scalar_text(&other)?.into());
            }
        }
    }
    let sub = args
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map(|p| p + 2)
        .ok_or_else(|| CliError::new(EXIT_MALFORMED, "a subcommand is required"))?;
    args.splice(sub..sub, extra);
    Ok(args)
}

fn scalar_text(v: &Value) -> Result<String, CliError> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        _ => Err(CliError::new(
            EXIT_MALFORMED,
            format!("unsupported config value {v}"),
        )),
    }
}

fn open_input(path: &Path) -> Result<Box<dyn Read>, CliError> {
    if path.as_os_str() == "-" {
        return Ok(Box::new(io::stdin().lock()));
    }
    let f = File::open(path)
        .map_err(|e| CliError::new(EXIT_MALFORMED, format!("{}: {e}", path.display())))?;
    Ok(Box::new(BufReader::new(f)))
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, bytes)
            .map_err(|e| CliError::new(EXIT_MALFORMED, format!("{}: {e}", p.display()))),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

fn write_side(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, bytes)
            .map_err(|e| CliError::new(EXIT_MALFORMED, format!("{}: {e}", p.display()))),
        None => {
            io::stderr().lock().write_all(bytes)?;
            Ok(())
        }
    }
}

fn unix_seconds() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

fn require_seed(seed: Option<u64>) -> Result<u64, CliError> {
    seed.ok_or_else(|| CliError::new(EXIT_MALFORMED, "--seed is required for stochastic commands"))
}

fn cmd_reject(a: &RejectArgs) -> Result<i32, CliError> {
    if a.mode == Mode::Private && a.zero_noise {
        return Err(CliError::new(
            EXIT_ZERO_NOISE,
            "zero-noise mode is a test fixture and is refused in private mode",
        ));
    }
    bhq_critical_values(a.q, 1)?;
    let private = if a.mode == Mode::Private {
        let missing: Vec<&str> = [
            ("--epsilon", a.epsilon.is_none()),
            ("--delta", a.delta.is_none()),
            ("--eta", a.eta.is_none()),
            ("--nu", a.nu.is_none()),
            ("--k", a.k.is_none()),
        ]
        .into_iter()
        .filter_map(|(f, m)| m.then_some(f))
        .collect();
        if !missing.is_empty() {
            return Err(CliError::new(
                EXIT_MALFORMED,
                format!("private mode requires {}", missing.join(", ")),
            ));
        }
        let seed = require_seed(a.seed)?;
        let privacy = PrivacyParams::new(
            a.epsilon.unwrap_or_default(),
            a.delta.unwrap_or_default(),
            a.eta.unwrap_or_default(),
            a.nu.unwrap_or_default(),
            a.k.unwrap_or_default(),
        )?;
        let mut config = PrivateFdrConfig::new(privacy, a.q, a.backend.into())?
            .with_paper_exact_scales(a.paper_exact);
        if let Some(c) = a.one_shot_c {
            if !(c > 0.0 && c.is_finite()) {
                return Err(CliError::new(
                    EXIT_RANGE,
                    format!("one-shot-c = {c} is outside the range (0, inf)"),
                ));
            }
            config.one_shot_c = c;
        }
        Some((config, seed))
    } else {
        None
    };

    let table = read_pvalues(open_input(&a.input)?)?;
    let report = match (a.mode, &private) {
        (Mode::StepUp, _) => step_up_bhq(&table.pvalues, a.q)?,
        (Mode::StepDown, _) => step_down_bhq(&table.pvalues, a.q)?,
        (Mode::Private, Some((config, seed))) => {
            config.privacy.check_against(table.len())?;
            private_bhq(&table.pvalues, config, &mut NoiseStream::from_seed(*seed))?
        }
        (Mode::Private, None) => unreachable!("private configuration is built above"),
    };
    let mut out = Vec::new();
    write_rejections(&mut out, &table, &report, private.is_some())?;
    write_output(a.output.as_deref(), &out)?;

    if let Some((config, seed)) = &private {
        let p = &config.privacy;
        let meta = json!({
            "command": "reject",
            "mode": "private",
            "backend": if config.backend == SelectionBackend::Peeling { "peeling" } else { "oneshot" },
            "epsilon": num(p.epsilon),
            "delta": num(p.delta),
            "eta": num(p.eta),
            "nu": num(p.nu),
            "k": p.k,
            "q": num(config.q),
            "m": table.len(),
            "delta_k": num(config.delta_k(table.len())),
            "paper_exact": config.paper_exact_scales,
            "seed": seed,
            "rejections": report.r(),
            "created_unix": unix_seconds(),
        });
        write_side(a.metadata.as_deref(), to_json_string(&meta).as_bytes())?;
    }
    Ok(0)
}

fn cmd_pvalues(a: &PvaluesArgs) -> Result<i32, CliError> {
    let spec = ModelSpec::from_json(open_input(&a.model)?)?;
    let model = spec.null_model()?;
    let eta_formula = multiplicative_sensitivity(spec.bound, spec.sigma, spec.n, a.nu)?;
    let data = read_dataset(open_input(&a.data)?, &spec, model)?;
    let p = data.pvalues()?;
    let mut report = serde_json::Map::new();
    report.insert("eta_formula".into(), num(eta_formula));
    if a.audit {
        let audit = empirical_sensitivity_audit(&data, a.nu)?;
        report.insert("eta_audit".into(), num(audit.eta_hat));
        report.insert("within_formula".into(), json!(audit.within_formula));
    }
    report.insert("nu".into(), num(a.nu));
    let mut out = Vec::new();
    write_pvalues(&mut out, &p)?;
    write_output(a.output.as_deref(), &out)?;
    write_side(
        a.report.as_deref(),
        to_json_string(&Value::Object(report)).as_bytes(),
    )?;
    Ok(0)
}

fn single_k(a: &VerifyArgs) -> Result<Option<usize>, CliError> {
    match a.k.as_deref() {
        None => Ok(None),
        Some([k]) => Ok(Some(*k)),
        Some(_) => Err(CliError::new(
            EXIT_MALFORMED,
            "--k takes a single value for this suite",
        )),
    }
}

fn cmd_verify(a: &VerifyArgs) -> Result<i32, CliError> {
    let seed = require_seed(a.seed)?;
    let exec = Parallel::from_env();
    let report: SuiteReport = match a.suite {
        Suite::FdrBounds => {
            let mut p = FdrBoundsParams::default();
            set(&mut p.m, a.m);
            set(&mut p.q, a.q);
            set(&mut p.k_list, a.k.clone());
            set(&mut p.trials, a.trials);
            set(&mut p.classical_trials, a.classical_trials);
            run_fdr_bounds(&p, seed, &exec)?
        }
        Suite::Submartingale => {
            let mut p = SubmartingaleParams::default();
            set(&mut p.m, a.m);
            set(&mut p.q, a.q);
            set(&mut p.trials, a.trials);
            run_submartingale(&p, seed, &exec)?
        }
        Suite::OneshotAccuracy => {
            let mut p = AccuracyParams::default();
            set(&mut p.m, a.m);
            set(&mut p.k, single_k(a)?);
            set(&mut p.epsilon, a.epsilon);
            set(&mut p.delta, a.delta);
            set(&mut p.c, a.c);
            set(&mut p.factor, a.factor);
            p.paper_exact = !a.certified_scale;
            set(&mut p.trials, a.trials);
            run_accuracy(&p, seed, &exec)?
        }
        Suite::PrivacyExhaustive => {
            let mut p = ExhaustiveParams::default();
            set(&mut p.m, a.m);
            set(&mut p.k, single_k(a)?);
            set(&mut p.epsilon, a.epsilon);
            set(&mut p.delta, a.delta);
            p.c = a.c.or(p.c);
            set(&mut p.pairs, a.trials);
            p.identical = a.identical;
            run_exhaustive(&p, seed, &exec)?
        }
        Suite::PrivacyAudit => {
            let mut p = AuditParams::default();
            set(&mut p.m, a.m);
            set(&mut p.k, single_k(a)?);
            set(&mut p.epsilon, a.epsilon);
            set(&mut p.delta, a.delta);
            set(&mut p.c, a.c);
            set(&mut p.samples, a.trials);
            run_audit(&p, seed, &exec)?
        }
    };
    write_output(
        a.output.as_deref(),
        to_json_string(&report.to_json()).as_bytes(),
    )?;
    if let Some(path) = &a.csv {
        write_output(Some(path), report.to_csv().as_bytes())?;
    }
    if let Some(path) = &a.metadata {
        let meta = json!({
            "command": "verify",
            "suite": a.suite.name(),
            "seed": seed,
            "threads": exec.threads(),
            "created_unix": unix_seconds(),
        });
        write_output(Some(path), to_json_string(&meta).as_bytes())?;
    }
    Ok(match report.status() {
        Status::Pass => 0,
        Status::Fail => EXIT_FAIL,
        Status::Inconclusive => EXIT_INCONCLUSIVE,
    })
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}
