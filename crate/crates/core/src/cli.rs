//! Command-line front end.
//!
//! Exit codes: 0 success, 1 I/O failure or failed kernel verification,
//! 2 validation error, 3 calibration error, 64 usage error.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::blueprints::{self, Architecture, BlueprintId};
use crate::error::{BlueprintError, CalibrationError, FormatError, ModelError, PlanError};
use crate::kernels::verify::{run_suite, DEFAULT_SEED};
use crate::measurements::{bundled, read_measurements};
use crate::model::{network_cost, validate, CostBreakdown, Diagnostic, NetworkSpec};
use crate::netjson;
use crate::planner::{
    calibrate, constant_group_size_derivation, energy_proxy, plan, suggest_group_size,
    EnergyModelParams, GroupingStrategy,
};
use crate::report::{fmt_float, write_csv, write_report_csv, write_report_json, ReportRow, TOTAL};
use crate::sweep::sweep_group_sizes;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_CALIBRATION: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

const COUNTING_NOTE: &str =
    "note: params include batch-norm (2 per channel) and bias where declared; \
     TOTAL energy_proxy is the sum of per-layer proxies";

#[derive(Parser, Debug)]
#[command(
    name = "e2gc",
    version,
    about = "Cost analysis and group-size planning for grouped convolution"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Per-layer and total cost table for a network and strategy
    Analyze(AnalyzeArgs),
    /// Emit the rewritten network
    Transform(TransformArgs),
    /// Balanced group count per substitution site
    Optimize(OptimizeArgs),
    /// Normalized MACs / AI / memory traffic over group sizes of one layer
    Sweep(SweepArgs),
    /// Fit beta and the proxy scale to measured energy per frame
    Calibrate(CalibrateArgs),
    /// Run the randomized reference-kernel oracle suite
    VerifyKernels(VerifyArgs),
    /// Params/MACs of the eleven E2GC/FgGC variants per architecture
    Tables(TablesArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct Output {
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write to this file instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct NetArgs {
    /// Blueprint name (mobilenet_v1, resnext50_32x4d) or path to a network JSON file
    #[arg(long)]
    net: String,
    #[arg(long, default_value_t = 224)]
    resolution: u64,
    #[arg(long, default_value_t = 1.0)]
    width_multiplier: f64,
}

fn parse_strategy(s: &str) -> Result<GroupingStrategy, String> {
    s.parse().map_err(|e: PlanError| e.to_string())
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[command(flatten)]
    net: NetArgs,
    /// e2gc:G=<int>, fggc:g=<int>, sconv or dwconv
    #[arg(long, value_parser = parse_strategy)]
    strategy: Option<GroupingStrategy>,
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    scale_k: f64,
    /// Only emit the TOTAL row
    #[arg(long)]
    totals_only: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct TransformArgs {
    #[command(flatten)]
    net: NetArgs,
    #[arg(long, value_parser = parse_strategy)]
    strategy: GroupingStrategy,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    #[command(flatten)]
    net: NetArgs,
    /// Balance level gamma
    #[arg(long)]
    gamma: f64,
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long, default_value_t = 512)]
    n: u64,
    #[arg(long, default_value_t = 512)]
    m: u64,
    #[arg(long, default_value_t = 3)]
    dk: u64,
    #[arg(long, default_value_t = 14)]
    h: u64,
    #[arg(long, default_value_t = 14)]
    w: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    /// Measurement CSV; the bundled published measurements when omitted
    #[arg(long)]
    measurements: Option<PathBuf>,
    /// Only use records from this device
    #[arg(long)]
    device: Option<String>,
    /// Only use records with this batch size
    #[arg(long)]
    batch_size: Option<u32>,
    /// Only use records of this architecture
    #[arg(long)]
    net: Option<String>,
    /// Only use records of this strategy family (e2gc, fggc, sconv, dwconv)
    #[arg(long)]
    family: Option<String>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, default_value_t = 100)]
    configs: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct TablesArgs {
    /// mobilenet_v1, resnext50_32x4d or all
    #[arg(long, default_value = "all")]
    net: String,
    /// Emit computed values next to the published cells with relative errors
    #[arg(long)]
    compare: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Validation(String, Vec<Diagnostic>),
    Calibration(CalibrationError),
    Failure(String),
    /// The reader of stdout went away; not reported.
    BrokenPipe,
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Validation(..) => EXIT_VALIDATION,
            CliError::Calibration(_) => EXIT_CALIBRATION,
            CliError::Failure(_) => EXIT_FAILURE,
            CliError::BrokenPipe => EXIT_OK,
        }
    }

    fn report(&self, err: &mut dyn Write) {
        let _ = match self {
            CliError::BrokenPipe => Ok(()),
            CliError::Usage(m) | CliError::Failure(m) => writeln!(err, "error: {m}"),
            CliError::Calibration(e) => writeln!(err, "calibration error: {e}"),
            CliError::Validation(m, diags) => {
                let _ = writeln!(err, "validation error: {m}");
                for d in diags {
                    let _ = writeln!(err, "  {d}");
                }
                Ok(())
            }
        };
    }
}

impl From<PlanError> for CliError {
    fn from(e: PlanError) -> Self {
        let diags = e.diagnostics().to_vec();
        CliError::Validation(e.to_string(), diags)
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Invalid(d) => CliError::Validation("invalid layer".into(), vec![d]),
            other => CliError::Validation(other.to_string(), Vec::new()),
        }
    }
}

impl From<BlueprintError> for CliError {
    fn from(e: BlueprintError) -> Self {
        match e {
            BlueprintError::Plan(p) => p.into(),
            other => CliError::Validation(other.to_string(), Vec::new()),
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        match e {
            FormatError::Io(io) => io.into(),
            FormatError::Csv(c) if c.is_io_error() => match c.into_kind() {
                csv::ErrorKind::Io(io) => io.into(),
                other => CliError::Failure(format!("{other:?}")),
            },
            other => CliError::Validation(other.to_string(), Vec::new()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::BrokenPipe {
            return CliError::BrokenPipe;
        }
        CliError::Failure(e.to_string())
    }
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    run_with(argv, &mut io::stdout().lock(), &mut io::stderr().lock())
}

/// Like [`run`] with explicit stdout/stderr sinks.
pub fn run_with<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{}", e.render());
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{}", e.render());
                    EXIT_USAGE
                }
            };
        }
    };
    match dispatch(cli.command, stdout, stderr) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            e.report(stderr);
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        Command::Analyze(a) => analyze(a, stdout, stderr),
        Command::Transform(a) => transform(a, stdout),
        Command::Optimize(a) => optimize(a, stdout, stderr),
        Command::Sweep(a) => sweep(a, stdout),
        Command::Calibrate(a) => calibrate_cmd(a, stdout, stderr),
        Command::VerifyKernels(a) => verify(a, stdout),
        Command::Tables(a) => tables(a, stdout),
    }
}

fn with_output<F>(output: &Output, stdout: &mut dyn Write, f: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> Result<(), FormatError>,
{
    match &output.out {
        Some(path) => {
            let mut file = BufWriter::new(File::create(path)?);
            f(&mut file)?;
            file.flush()?;
        }
        None => f(stdout)?,
    }
    Ok(())
}

fn write_json<T: Serialize>(value: &T, out: &mut dyn Write) -> Result<(), FormatError> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(io::Error::from)?;
    writeln!(out)?;
    Ok(())
}

fn load_network(args: &NetArgs) -> Result<NetworkSpec, CliError> {
    match args.net.parse::<Architecture>() {
        Ok(arch) => Ok(blueprints::generate(BlueprintId {
            arch,
            input_resolution: args.resolution,
            width_multiplier: args.width_multiplier,
        })?),
        Err(_) if Path::new(&args.net).exists() => Ok(netjson::parse_network_json(&args.net)?),
        Err(_) => Err(CliError::Usage(format!(
            "`{}` is neither a blueprint name nor an existing file",
            args.net
        ))),
    }
}

fn require_valid(net: &NetworkSpec) -> Result<(), CliError> {
    let diags = validate(net);
    if diags.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(
            format!("network `{}` is invalid", net.name),
            diags,
        ))
    }
}

fn params_for(beta: f64, scale_k: f64) -> Result<EnergyModelParams, CliError> {
    let p = EnergyModelParams::default()
        .with_beta(beta)
        .with_scale(scale_k);
    p.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(p)
}

fn analyze(
    args: AnalyzeArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    let params = params_for(args.beta, args.scale_k)?;
    let base = load_network(&args.net)?;
    require_valid(&base)?;
    let (net, strategy_label, config_id) = match args.strategy {
        Some(s) => {
            let planned = plan(&base, s)?;
            (
                planned,
                s.to_string(),
                format!("{}/{}", base.name, s.config_segment()),
            )
        }
        None => (base.clone(), String::new(), base.name.clone()),
    };
    let cost = network_cost(&net)?;
    let mut rows = Vec::new();
    if !args.totals_only {
        for (id, c) in &cost.layers {
            rows.push(report_row(
                &config_id,
                &strategy_label,
                id,
                c,
                Some(energy_proxy(c, &params)),
                None,
            ));
        }
    }
    let total_energy = crate::planner::network_energy(&cost, &params);
    rows.push(report_row(
        &config_id,
        &strategy_label,
        TOTAL,
        &cost.total,
        Some(total_energy),
        None,
    ));
    let _ = writeln!(stderr, "{COUNTING_NOTE}");
    let format = args.output.format.unwrap_or(Format::Csv);
    with_output(&args.output, stdout, |out| match format {
        Format::Csv => write_report_csv(&rows, out),
        Format::Json => write_report_json(&rows, out),
    })
}

fn report_row(
    config_id: &str,
    strategy: &str,
    layer_id: &str,
    c: &CostBreakdown,
    energy: Option<f64>,
    epf: Option<f64>,
) -> ReportRow {
    ReportRow {
        config_id: config_id.to_string(),
        strategy: strategy.to_string(),
        layer_id: layer_id.to_string(),
        mc: c.mc,
        params: c.params,
        activations: c.activations,
        ai: c.ai,
        energy_proxy: energy,
        epf_measured_mj: epf,
    }
}

const LAYER_COLUMNS: [&str; 13] = [
    "id",
    "kind",
    "in_channels",
    "out_channels",
    "kernel_h",
    "kernel_w",
    "stride",
    "padding",
    "ofmap_h",
    "ofmap_w",
    "groups",
    "bias",
    "batchnorm",
];

fn transform(args: TransformArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let base = load_network(&args.net)?;
    require_valid(&base)?;
    let net = plan(&base, args.strategy)?;
    let format = args.output.format.unwrap_or(Format::Json);
    with_output(&args.output, stdout, |out| match format {
        Format::Json => Ok(out.write_all(netjson::to_json_string(&net).as_bytes())?),
        Format::Csv => write_csv(
            &LAYER_COLUMNS,
            net.layers.iter().map(|l| {
                [
                    l.id.clone(),
                    l.kind.to_string(),
                    l.m.to_string(),
                    l.n.to_string(),
                    l.dk_h.to_string(),
                    l.dk_w.to_string(),
                    l.stride.to_string(),
                    l.padding.to_string(),
                    l.h.to_string(),
                    l.w.to_string(),
                    l.g.to_string(),
                    l.has_bias.to_string(),
                    l.has_batchnorm.to_string(),
                ]
            }),
            out,
        ),
    })
}

#[derive(Serialize)]
struct OptimizeReport {
    network: String,
    beta: f64,
    gamma: f64,
    sites: Vec<crate::planner::SiteBalance>,
    suggested_group_size: Option<u64>,
}

fn optimize(
    args: OptimizeArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    let params = EnergyModelParams::default()
        .with_beta(args.beta)
        .with_gamma(args.gamma);
    params
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let net = load_network(&args.net)?;
    require_valid(&net)?;
    let sites = constant_group_size_derivation(&net, &params)?;
    let suggested = suggest_group_size(&sites);
    if let Some(g) = suggested {
        let _ = writeln!(stderr, "suggested constant group size: G = {g}");
    }
    let format = args.output.format.unwrap_or(Format::Csv);
    with_output(&args.output, stdout, |out| match format {
        Format::Json => write_json(
            &OptimizeReport {
                network: net.name.clone(),
                beta: args.beta,
                gamma: args.gamma,
                sites: sites.clone(),
                suggested_group_size: suggested,
            },
            out,
        ),
        Format::Csv => write_csv(
            &[
                "layer_id",
                "m",
                "n",
                "ofmap",
                "g_star",
                "group_size_star",
                "g_rounded",
            ],
            sites.iter().map(|s| {
                [
                    s.layer_id.clone(),
                    s.m.to_string(),
                    s.n.to_string(),
                    s.ofmap.to_string(),
                    fmt_float(s.g_star),
                    fmt_float(s.group_size_star),
                    s.g_rounded.to_string(),
                ]
            }),
            out,
        ),
    })
}

fn sweep(args: SweepArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    if [args.n, args.m, args.dk, args.h, args.w].contains(&0) {
        return Err(CliError::Usage(
            "sweep dimensions must be at least 1".into(),
        ));
    }
    let rows = sweep_group_sizes(args.n, args.m, args.dk, args.h, args.w);
    let format = args.output.format.unwrap_or(Format::Csv);
    with_output(&args.output, stdout, |out| match format {
        Format::Json => write_json(&rows, out),
        Format::Csv => write_csv(
            &[
                "group_size",
                "groups",
                "mc_norm",
                "ai_norm",
                "mem_access_norm",
            ],
            rows.iter().map(|r| {
                [
                    r.group_size.to_string(),
                    r.groups.to_string(),
                    fmt_float(r.mc_norm),
                    fmt_float(r.ai_norm),
                    fmt_float(r.mem_access_norm),
                ]
            }),
            out,
        ),
    })
}

fn strategy_family(s: &GroupingStrategy) -> &'static str {
    match s {
        GroupingStrategy::E2gc { .. } => "e2gc",
        GroupingStrategy::Fggc { .. } => "fggc",
        GroupingStrategy::Sconv => "sconv",
        GroupingStrategy::Dwconv => "dwconv",
    }
}

fn calibrate_cmd(
    args: CalibrateArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    let records = match &args.measurements {
        Some(path) => read_measurements(File::open(path)?)?,
        None => bundled(),
    };
    let arch_filter = match &args.net {
        Some(n) => Some(n.parse::<Architecture>()?),
        None => None,
    };
    let records: Vec<_> = records
        .into_iter()
        .filter(|r| args.device.as_ref().is_none_or(|d| &r.device == d))
        .filter(|r| args.batch_size.is_none_or(|b| r.batch_size == b))
        .filter(|r| {
            if arch_filter.is_none() && args.family.is_none() {
                return true;
            }
            match blueprints::parse_config_id(&r.config_id) {
                Ok((arch, s)) => {
                    arch_filter.is_none_or(|a| a == arch)
                        && args
                            .family
                            .as_deref()
                            .is_none_or(|f| f == strategy_family(&s))
                }
                Err(_) => false,
            }
        })
        .collect();

    let ids: BTreeSet<&str> = records.iter().map(|r| r.config_id.as_str()).collect();
    let mut costs: HashMap<String, CostBreakdown> = HashMap::new();
    let mut strategies: HashMap<String, String> = HashMap::new();
    for id in ids {
        match blueprints::config_cost(id) {
            Ok(c) => {
                costs.insert(id.to_string(), c);
                if let Ok((_, s)) = blueprints::parse_config_id(id) {
                    strategies.insert(id.to_string(), s.to_string());
                }
            }
            Err(e) => {
                let _ = writeln!(stderr, "warning: {id}: {e}");
            }
        }
    }

    let cal = calibrate(&records, &costs).map_err(CliError::Calibration)?;
    let r = &cal.report;
    let _ = writeln!(
        stderr,
        "fit: beta = {}{}, scale_k = {}, R^2 = {}, spearman = {}, records used = {}/{}",
        fmt_float(r.beta),
        if r.beta_clamped { " (clamped)" } else { "" },
        fmt_float(r.scale_k),
        fmt_float(r.r_squared),
        r.spearman_rho
            .map(fmt_float)
            .unwrap_or_else(|| "n/a".into()),
        r.records_used,
        r.records_total
    );
    for note in &r.notes {
        let _ = writeln!(stderr, "note: {note}");
    }

    let format = args.output.format.unwrap_or(Format::Csv);
    with_output(&args.output, stdout, |out| match format {
        Format::Json => write_json(r, out),
        Format::Csv => {
            let rows: Vec<ReportRow> = r
                .residuals
                .iter()
                .map(|res| {
                    let c = &costs[&res.config_id];
                    report_row(
                        &res.config_id,
                        strategies
                            .get(&res.config_id)
                            .map(String::as_str)
                            .unwrap_or(""),
                        TOTAL,
                        c,
                        Some(res.epf_predicted_mj),
                        Some(res.epf_measured_mj),
                    )
                })
                .collect();
            write_report_csv(&rows, out)
        }
    })
}

fn verify(args: VerifyArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    if args.configs == 0 {
        return Err(CliError::Usage("--configs must be at least 1".into()));
    }
    let report = run_suite(args.configs, args.seed);
    let format = args.output.format.unwrap_or(Format::Csv);
    with_output(&args.output, stdout, |out| match format {
        Format::Json => write_json(&report, out),
        Format::Csv => write_csv(
            &["check", "value"],
            [
                ("seed", report.seed.to_string()),
                ("configs", report.configs.to_string()),
                (
                    "oracle_max_abs_diff",
                    format!("{:e}", report.oracle_max_abs_diff),
                ),
                ("oracle_failures", report.oracle_failures.to_string()),
                ("counter_mismatches", report.counter_mismatches.to_string()),
                (
                    "linearity_max_abs_err",
                    format!("{:e}", report.linearity_max_abs_err),
                ),
                ("linearity_failures", report.linearity_failures.to_string()),
                (
                    "locality_violations",
                    report.locality_violations.to_string(),
                ),
                (
                    "determinism_failures",
                    report.determinism_failures.to_string(),
                ),
                ("passed", report.passed().to_string()),
            ]
            .into_iter()
            .map(|(k, v)| [k.to_string(), v]),
            out,
        ),
    })?;
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Failure(
            "reference kernel verification failed".into(),
        ))
    }
}

#[derive(Serialize)]
struct CompareRow {
    config_id: String,
    params: u64,
    params_reference: f64,
    params_rel_err: f64,
    mc: u64,
    mc_reference: f64,
    mc_rel_err: f64,
}

fn tables(args: TablesArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let archs: Vec<Architecture> = if args.net == "all" {
        Architecture::ALL.to_vec()
    } else {
        vec![args.net.parse()?]
    };
    let mut rows = Vec::new();
    let mut compare = Vec::new();
    for arch in archs {
        let variants = blueprints::variant_table(arch.into())?;
        for ((strategy, cost), reference) in variants.iter().zip(blueprints::reference_rows(arch)) {
            let config_id = blueprints::config_id(arch, *strategy);
            compare.push(CompareRow {
                config_id: config_id.clone(),
                params: cost.params,
                params_reference: reference.params,
                params_rel_err: cost.params as f64 / reference.params - 1.0,
                mc: cost.mc,
                mc_reference: reference.macs,
                mc_rel_err: cost.mc as f64 / reference.macs - 1.0,
            });
            rows.push(report_row(
                &config_id,
                &strategy.to_string(),
                TOTAL,
                cost,
                None,
                None,
            ));
        }
    }
    let format = args.output.format.unwrap_or(Format::Csv);
    with_output(&args.output, stdout, |out| match (format, args.compare) {
        (Format::Csv, false) => write_report_csv(&rows, out),
        (Format::Json, false) => write_report_json(&rows, out),
        (Format::Json, true) => write_json(&compare, out),
        (Format::Csv, true) => write_csv(
            &[
                "config_id",
                "params",
                "params_reference",
                "params_rel_err",
                "mc",
                "mc_reference",
                "mc_rel_err",
            ],
            compare.iter().map(|c| {
                [
                    c.config_id.clone(),
                    c.params.to_string(),
                    fmt_float(c.params_reference),
                    fmt_float(c.params_rel_err),
                    c.mc.to_string(),
                    fmt_float(c.mc_reference),
                    fmt_float(c.mc_rel_err),
                ]
            }),
            out,
        ),
    })
}
