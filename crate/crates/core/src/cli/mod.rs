//! The `gkb` command line.
//!
//! Exit codes: 0 success, 1 usage, 2 domain, 3 I/O, 4 failed verification.

pub mod output;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

use crate::bounds::{lower_bound, BoundResult, OptimizerOptions};
use crate::channels::ChannelSpec;
use crate::error::Error;
use crate::sweep::{run_sweep, threads_from_env, Axis, ChannelFamily, Spacing, SweepGrid};
use crate::thresholds::{security_threshold, threshold_of_info, ThresholdFamily, ThresholdQuery};
use crate::verify::{run_all, VerifyConfig};
use output::{sweep_csv, threshold_csv, write_with_manifest, Document, RunManifest, ThresholdRow};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DOMAIN: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(String),
    Io(String),
    Verify(usize),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Domain(_) => EXIT_DOMAIN,
            CliError::Io(_) => EXIT_IO,
            CliError::Verify(_) => EXIT_VERIFY,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Domain(m) => write!(f, "domain error: {m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
            CliError::Verify(n) => write!(f, "{n} verification check(s) failed"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidOptions(_) => CliError::Usage(e.to_string()),
            _ => CliError::Domain(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "gkb",
    version,
    about = "Gaussian-measurement key-rate bounds for bosonic channels"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the bound at a single channel.
    Bound(BoundArgs),
    /// Evaluate the bound over a parameter grid.
    Sweep(SweepArgs),
    /// Security thresholds in ω over a scan of η or g.
    Threshold(ThresholdArgs),
    /// Run the self-verification suites.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Args)]
#[group(id = "channel", required = true, multiple = false)]
pub struct ChannelFlags {
    #[arg(long)]
    pub thermal_loss: bool,
    #[arg(long)]
    pub thermal_amp: bool,
    #[arg(long)]
    pub added_noise: bool,
}

impl ChannelFlags {
    fn family(&self) -> ChannelFamily {
        if self.thermal_loss {
            ChannelFamily::ThermalLoss
        } else if self.thermal_amp {
            ChannelFamily::ThermalAmp
        } else {
            ChannelFamily::AddedNoise
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ParamFlags {
    /// Transmissivity of the thermal-loss channel.
    #[arg(long, allow_negative_numbers = true)]
    pub eta: Option<f64>,
    /// Gain of the amplifier.
    #[arg(long, allow_negative_numbers = true)]
    pub g: Option<f64>,
    /// Thermal noise variance ω.
    #[arg(long, allow_negative_numbers = true, conflicts_with = "nbar")]
    pub omega: Option<f64>,
    /// Mean thermal photon number, ω = 2·nbar + 1.
    #[arg(long, allow_negative_numbers = true)]
    pub nbar: Option<f64>,
    /// Added noise variance.
    #[arg(long, allow_negative_numbers = true)]
    pub zeta: Option<f64>,
}

impl ParamFlags {
    fn given(&self) -> Vec<(&'static str, f64)> {
        [
            ("eta", self.eta),
            ("g", self.g),
            ("omega", self.omega),
            ("nbar", self.nbar),
            ("zeta", self.zeta),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.map(|v| (k, v)))
        .collect()
    }
}

#[derive(Debug, Clone, Args)]
pub struct OptimizerFlags {
    #[arg(long, default_value_t = OptimizerOptions::default().gamma_max)]
    pub gamma_max: f64,
    #[arg(long, default_value_t = OptimizerOptions::default().coarse_points)]
    pub coarse_points: usize,
    #[arg(long, default_value_t = OptimizerOptions::default().refine_tol)]
    pub refine_tol: f64,
    #[arg(long, default_value_t = OptimizerOptions::default().value_tol)]
    pub value_tol: f64,
}

impl OptimizerFlags {
    fn options(&self) -> CliResult<OptimizerOptions> {
        let o = OptimizerOptions {
            gamma_max: self.gamma_max,
            coarse_points: self.coarse_points,
            refine_tol: self.refine_tol,
            value_tol: self.value_tol,
        };
        o.validate()?;
        Ok(o)
    }
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[command(flatten)]
    pub channel: ChannelFlags,
    #[command(flatten)]
    pub params: ParamFlags,
    #[command(flatten)]
    pub optimizer: OptimizerFlags,
    /// Also write the result as JSON to this file.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub channel: ChannelFlags,
    /// Fixed parameters; any parameter not swept must be given.
    #[command(flatten)]
    pub params: ParamFlags,
    /// Swept axis as `name:min:max:points[:linear|log]`; repeat for a
    /// product grid, first axis outermost. The name `gamma` profiles δ(γ).
    #[arg(long = "axis", required = true, value_parser = parse_axis)]
    pub axes: Vec<Axis>,
    #[command(flatten)]
    pub optimizer: OptimizerFlags,
    /// Output file; the table goes to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
#[group(id = "family", required = true, multiple = false)]
pub struct FamilyFlags {
    /// Thermal loss, scanning η.
    #[arg(long)]
    pub loss_vs_eta: bool,
    /// Thermal amplifier, scanning g.
    #[arg(long)]
    pub amp_vs_g: bool,
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    #[command(flatten)]
    pub family: FamilyFlags,
    /// Scan of η or g as `min:max:points[:linear|log]`.
    #[arg(long, value_parser = parse_scan)]
    pub scan: Axis,
    /// Bisection bracket in ω as `low:high`.
    #[arg(long, default_value = "1:200", value_parser = parse_bracket)]
    pub omega_bracket: (f64, f64),
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[command(flatten)]
    pub optimizer: OptimizerFlags,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Squeezing μ of the input state used by the finite-μ oracle.
    #[arg(long, default_value_t = 1e6)]
    pub mu: f64,
    /// Closed-form versus oracle agreement tolerance, in bits.
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
}

fn parse_spacing(s: Option<&str>) -> Result<Spacing, String> {
    match s {
        None | Some("linear") | Some("lin") => Ok(Spacing::Linear),
        Some("log") => Ok(Spacing::Log),
        Some(other) => Err(format!("unknown spacing {other:?}, expected linear or log")),
    }
}

fn parse_num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T, String> {
    s.parse()
        .map_err(|_| format!("cannot parse {what} from {s:?}"))
}

fn parse_axis(s: &str) -> Result<Axis, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if !(4..=5).contains(&parts.len()) {
        return Err("expected name:min:max:points[:linear|log]".into());
    }
    Ok(Axis::new(
        parts[0],
        parse_num(parts[1], "min")?,
        parse_num(parts[2], "max")?,
        parse_num(parts[3], "points")?,
        parse_spacing(parts.get(4).copied())?,
    ))
}

fn parse_scan(s: &str) -> Result<Axis, String> {
    parse_axis(&format!("scan:{s}"))
}

fn parse_bracket(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or("expected low:high")?;
    Ok((parse_num(a, "low")?, parse_num(b, "high")?))
}

fn channel_spec(family: ChannelFamily, params: &ParamFlags) -> CliResult<ChannelSpec> {
    let omega = match (params.omega, params.nbar) {
        (Some(w), None) => Some(w),
        (None, Some(n)) => Some(2.0 * n + 1.0),
        (None, None) => None,
        (Some(_), Some(_)) => {
            return Err(CliError::Usage("--omega and --nbar are exclusive".into()))
        }
    };
    let need = |v: Option<f64>, flag: &str| {
        v.ok_or_else(|| CliError::Usage(format!("--{flag} is required for {family}")))
    };
    let allowed = family.param_names();
    for (name, _) in params.given() {
        let key = if name == "nbar" { "omega" } else { name };
        if !allowed.contains(&key) {
            return Err(CliError::Usage(format!(
                "--{name} does not apply to {family}"
            )));
        }
    }
    Ok(match family {
        ChannelFamily::ThermalLoss => {
            ChannelSpec::thermal_loss(need(params.eta, "eta")?, need(omega, "omega")?)?
        }
        ChannelFamily::ThermalAmp => {
            ChannelSpec::thermal_amp(need(params.g, "g")?, need(omega, "omega")?)?
        }
        ChannelFamily::AddedNoise => ChannelSpec::added_noise(need(params.zeta, "zeta")?)?,
    })
}

fn info_label(r: &BoundResult) -> &'static str {
    match r.direction {
        crate::bounds::Direction::Direct => "I^C",
        crate::bounds::Direction::Reverse => "I^RC",
    }
}

fn cmd_bound(args: &BoundArgs, argv: &[String], out: &mut dyn Write) -> CliResult<()> {
    let opts = args.optimizer.options()?;
    let spec = channel_spec(args.channel.family(), &args.params)?;
    let r = lower_bound(&spec, &opts)?;
    let diag = r
        .diagnostics
        .iter()
        .map(|d| d.code())
        .collect::<Vec<_>>()
        .join(";");
    writeln!(out, "channel     {spec}")?;
    writeln!(out, "direction   {}", r.direction)?;
    writeln!(out, "{:<11} {:?}", info_label(&r), r.info_term)?;
    writeln!(out, "Delta_G     {:?}", r.delta_g)?;
    writeln!(out, "L_G         {:?}", r.lower_bound)?;
    writeln!(out, "U           {:?}", r.upper_bound)?;
    writeln!(out, "gamma_star  {:?}", r.gamma_star)?;
    if !diag.is_empty() {
        writeln!(out, "diag        {diag}")?;
    }
    if let Some(path) = &args.json {
        let mut manifest =
            RunManifest::new(argv.to_vec(), json!({ "channel": spec, "optimizer": opts }));
        manifest.record([diag.as_str()]);
        let doc = json!({ "manifest": manifest, "result": r });
        let mut bytes = serde_json::to_vec_pretty(&doc)?;
        bytes.push(b'\n');
        write_with_manifest(path, &bytes, &manifest)?;
    }
    Ok(())
}

fn cmd_sweep(args: &SweepArgs, argv: &[String], out: &mut dyn Write) -> CliResult<()> {
    let opts = args.optimizer.options()?;
    let family = args.channel.family();
    let fixed: BTreeMap<String, f64> = args
        .params
        .given()
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    let grid = SweepGrid {
        family,
        axes: args.axes.clone(),
        fixed,
    };
    grid.validate()?;
    let table = run_sweep(&grid, &opts)?;

    let mut manifest = RunManifest::new(argv.to_vec(), json!({ "grid": grid, "optimizer": opts }));
    manifest.record(table.rows.iter().map(|r| r.diag.as_str()));
    let bytes = match args.format {
        Format::Csv => sweep_csv(&table.rows)?,
        Format::Json => {
            let mut b = serde_json::to_vec_pretty(&Document {
                manifest: &manifest,
                rows: &table.rows,
            })?;
            b.push(b'\n');
            b
        }
    };
    emit(args.out.as_ref(), &bytes, &manifest, out)
}

fn emit(
    path: Option<&PathBuf>,
    bytes: &[u8],
    manifest: &RunManifest,
    out: &mut dyn Write,
) -> CliResult<()> {
    match path {
        Some(p) => {
            write_with_manifest(p, bytes, manifest)
                .map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            writeln!(out, "wrote {} rows to {}", manifest.rows, p.display())?;
        }
        None => out.write_all(bytes)?,
    }
    Ok(())
}

fn cmd_threshold(args: &ThresholdArgs, argv: &[String], out: &mut dyn Write) -> CliResult<()> {
    let opts = args.optimizer.options()?;
    let family = if args.family.loss_vs_eta {
        ThresholdFamily::LossVsEta
    } else {
        ThresholdFamily::AmpVsG
    };
    args.scan.validate()?;
    let mut template = ThresholdQuery::new(family, args.scan.min);
    template.omega_bracket = args.omega_bracket;
    template.tol = args.tol;
    template.validate()?;

    let values = args.scan.values();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads_from_env())
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let rows: Vec<ThresholdRow> = pool.install(|| {
        values
            .par_iter()
            .map(|&p| {
                threshold_row(
                    &ThresholdQuery {
                        scan_param: p,
                        ..template
                    },
                    &opts,
                )
            })
            .collect()
    });

    let params = json!({
        "family": family,
        "scan": args.scan,
        "omega_bracket": args.omega_bracket,
        "tol": args.tol,
        "optimizer": opts,
    });
    let mut manifest = RunManifest::new(argv.to_vec(), params);
    manifest.record(rows.iter().map(|r| r.diag.as_str()));
    let bytes = match args.format {
        Format::Csv => threshold_csv(&rows)?,
        Format::Json => {
            let mut b = serde_json::to_vec_pretty(&Document {
                manifest: &manifest,
                rows: &rows,
            })?;
            b.push(b'\n');
            b
        }
    };
    emit(args.out.as_ref(), &bytes, &manifest, out)
}

fn threshold_row(q: &ThresholdQuery, opts: &OptimizerOptions) -> ThresholdRow {
    let mut row = ThresholdRow {
        scan_param: q.scan_param,
        omega_th_lower_bound: None,
        omega_th_info_term: None,
        diag: String::new(),
    };
    match (
        security_threshold(q, opts),
        threshold_of_info(q.family, q.scan_param),
    ) {
        (Ok(t), Ok(i)) => {
            row.omega_th_lower_bound = Some(t.omega_th);
            row.omega_th_info_term = Some(i);
            row.diag = t.diagnostic.map(|d| d.to_string()).unwrap_or_default();
        }
        (Err(e), _) | (_, Err(e)) => row.diag = format!("error: {e}"),
    }
    row
}

fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> CliResult<()> {
    if !(args.mu >= 1.0) || !(args.tolerance > 0.0) {
        return Err(CliError::Usage(
            "--mu must be >= 1 and --tolerance > 0".into(),
        ));
    }
    let cfg = VerifyConfig {
        mu: args.mu,
        tolerance: args.tolerance,
        ..VerifyConfig::default()
    };
    writeln!(out, "verify: mu = {:e}", cfg.mu)?;
    let results = run_all(&cfg);
    for r in &results {
        writeln!(out, "{r}")?;
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        return Err(CliError::Verify(failed));
    }
    Ok(())
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let argv: Vec<String> = args
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{e}");
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Bound(a) => cmd_bound(a, &argv, out),
        Command::Sweep(a) => cmd_sweep(a, &argv, out),
        Command::Threshold(a) => cmd_threshold(a, &argv, out),
        Command::Verify(a) => cmd_verify(a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            e.code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(args.iter().copied(), &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn parses_axes() {
        let a = parse_axis("eta:0.05:0.95:19").unwrap();
        assert_eq!(a.points, 19);
        assert_eq!(a.spacing, Spacing::Linear);
        assert_eq!(
            parse_axis("gamma:1:50:30:log").unwrap().spacing,
            Spacing::Log
        );
        assert!(parse_axis("eta:0.1:0.9").is_err());
        assert!(parse_axis("eta:0.1:0.9:5:cubic").is_err());
        assert_eq!(parse_bracket("1:200").unwrap(), (1.0, 200.0));
    }

    #[test]
    fn bound_reports_reverse_coherent_information() {
        let (code, out, _) = run_capture(&[
            "gkb",
            "bound",
            "--thermal-loss",
            "--eta",
            "0.5",
            "--omega",
            "1",
        ]);
        assert_eq!(code, 0);
        assert!(out.contains("I^RC        1.0\n"), "{out}");
    }

    #[test]
    fn exit_codes() {
        let (code, _, err) = run_capture(&[
            "gkb",
            "bound",
            "--thermal-loss",
            "--eta",
            "1.2",
            "--omega",
            "3",
        ]);
        assert_eq!(code, EXIT_DOMAIN);
        assert!(err.contains("eta"));
        let (code, _, _) = run_capture(&[
            "gkb",
            "bound",
            "--thermal-loss",
            "--eta",
            "0.5",
            "--omega",
            "3",
            "--nbar",
            "1",
        ]);
        assert_eq!(code, EXIT_USAGE);
        let (code, _, _) = run_capture(&[
            "gkb",
            "bound",
            "--thermal-loss",
            "--added-noise",
            "--zeta",
            "1",
        ]);
        assert_eq!(code, EXIT_USAGE);
        let (code, _, _) = run_capture(&["gkb", "bound", "--thermal-loss", "--eta", "0.5"]);
        assert_eq!(code, EXIT_USAGE);
        let (code, _, _) = run_capture(&[
            "gkb",
            "bound",
            "--added-noise",
            "--zeta",
            "1",
            "--eta",
            "0.5",
        ]);
        assert_eq!(code, EXIT_USAGE);
        let (code, _, _) = run_capture(&["gkb", "--help"]);
        assert_eq!(code, EXIT_OK);
    }

    #[test]
    fn nbar_is_converted() {
        let (code, out, _) =
            run_capture(&["gkb", "bound", "--thermal-amp", "--g", "2", "--nbar", "1"]);
        assert_eq!(code, 0);
        assert!(out.contains("omega=3"), "{out}");
    }
}
