//! The `parteetor` command line.
//!
//! Exit codes: 0 on success, 2 for usage, configuration and parse errors,
//! 3 when a simulation had a sweep point in which every circuit failed
//! (all other points are still written).
//!
//! `simulate` also reads a flat `key=value` configuration file (`--config`).
//! Keys mirror the long flags (`network`, `metric`, `scenario`, `p`, `we`,
//! `wm`, `wx`, `policy`, `trials`, `circuits`, `seed`, `out-dir`, `svg`).
//! Grid keys may be repeated with a `sweep.` prefix (`sweep.p=0.1`,
//! `sweep.p=0.2:0.5:0.1`) and the values accumulate. Flags override the file.
//! Lines starting with `#` are comments.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::consensus::{
    generate_synthetic, load_network, parse_consensus, save_network, BandwidthDistribution, SyntheticNetworkSpec,
    NATIVE_HEADER,
};
use crate::experiment::{run_sweep_on, ExperimentConfig, Metric, NetworkSource, ScenarioGrid, ScenarioKind};
use crate::metrics::{privacy_report, uniform_capability_deployment};
use crate::model::NetworkModel;
use crate::report;
use crate::selection::SecurityPolicy;

pub const SEED_ENV: &str = "PARTEETOR_SEED";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PARTIAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "parteetor",
    version,
    about = "Simulate partial deployments of TEE-based Tor relays"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a network-status consensus into the native network format.
    Parse(ParseArgs),
    /// Generate a synthetic network with exact capability counts.
    Generate(GenerateArgs),
    /// Run a security or performance sweep.
    Simulate(SimulateArgs),
    /// Count unique policy-compliant circuits under uniform deployments.
    Privacy(PrivacyArgs),
    /// Render a chart from a summary CSV written by `simulate`.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct ParseArgs {
    #[arg(long)]
    pub consensus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub relays: usize,
    #[arg(long)]
    pub entry: usize,
    #[arg(long)]
    pub exit: usize,
    #[arg(long)]
    pub dual: usize,
    /// `constant:V`, `uniform:LO:HI` or `pareto:SCALE:SHAPE` (KB/s).
    #[arg(long, default_value = "constant:1000")]
    pub bw: String,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Default)]
pub struct SimulateArgs {
    /// key=value configuration file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Native network file or consensus document.
    #[arg(long)]
    pub network: Option<PathBuf>,
    /// security, performance or privacy.
    #[arg(long)]
    pub metric: Option<String>,
    /// random, bandwidth, inverse-bandwidth or position:<entry|exit|entry-exit|entry-middle-exit>.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Comma-separated values and/or START:END:STEP ranges.
    #[arg(long)]
    pub p: Option<String>,
    #[arg(long)]
    pub we: Option<String>,
    #[arg(long)]
    pub wm: Option<String>,
    #[arg(long)]
    pub wx: Option<String>,
    /// A policy name or `all`.
    #[arg(long)]
    pub policy: Option<String>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub circuits: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Also write a line chart of the means.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Args)]
pub struct PrivacyArgs {
    #[arg(long)]
    pub network: PathBuf,
    #[arg(long, default_value = "0.01,0.05,0.1,0.25,0.5,0.75")]
    pub p: String,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub summary: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "")]
    pub title: String,
}

/// A command failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

/// Parses `0.1,0.2` and `START:END:STEP` items (inclusive ranges).
/// Values are rounded to 9 decimals to absorb step accumulation.
pub fn parse_value_list(s: &str) -> Result<Vec<f64>, String> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("{t:?} is not a number"));
    let round = |v: f64| (v * 1e9).round() / 1e9;
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        match parts[..] {
            [v] => out.push(num(v)?),
            [a, b, step] => {
                let (a, b, step) = (num(a)?, num(b)?, num(step)?);
                if step.is_nan() || step <= 0.0 || b < a {
                    return Err(format!("range {item:?} needs START <= END and a positive STEP"));
                }
                let n = ((b - a) / step + 1e-9).floor() as usize;
                out.extend((0..=n).map(|i| round(a + i as f64 * step)));
            }
            _ => return Err(format!("cannot parse {item:?} as a value or START:END:STEP range")),
        }
    }
    Ok(out)
}

pub fn parse_bandwidth(s: &str) -> Result<BandwidthDistribution, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |t: &str| t.parse::<f64>().map_err(|_| format!("{t:?} is not a number"));
    match parts[..] {
        ["constant", v] => v
            .parse()
            .map(BandwidthDistribution::Constant)
            .map_err(|_| format!("{v:?} is not a non-negative integer")),
        ["uniform", lo, hi] => Ok(BandwidthDistribution::Uniform {
            lo: num(lo)?,
            hi: num(hi)?,
        }),
        ["pareto", scale, shape] => Ok(BandwidthDistribution::Pareto {
            scale: num(scale)?,
            shape: num(shape)?,
        }),
        _ => Err(format!("unknown bandwidth distribution {s:?}")),
    }
}

pub fn parse_policies(s: &str) -> Result<Vec<SecurityPolicy>, String> {
    if s == "all" {
        return Ok(SecurityPolicy::ALL.to_vec());
    }
    s.split(',')
        .map(|t| t.trim().parse::<SecurityPolicy>().map_err(|e| e.to_string()))
        .collect()
}

/// Reads either format, chosen by the native header.
pub fn read_network(path: &Path) -> Result<NetworkModel, Failure> {
    let bytes = fs::read(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    if bytes.is_empty() || bytes.starts_with(NATIVE_HEADER.as_bytes()) {
        load_network(&bytes).map_err(|e| usage(format!("{}: {e}", path.display())))
    } else {
        parse_consensus(&String::from_utf8_lossy(&bytes)).map_err(|e| usage(format!("{}: {e}", path.display())))
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// Parsed `key=value` configuration; repeated keys keep every value.
#[derive(Debug, Default)]
pub struct ConfigFile {
    values: HashMap<String, Vec<String>>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut values: HashMap<String, Vec<String>> = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key=value", i + 1))?;
            let key = k.trim().replace('_', "-");
            let key = key.strip_prefix("sweep.").unwrap_or(&key).to_owned();
            const KNOWN: [&str; 13] = [
                "network", "metric", "scenario", "p", "we", "wm", "wx", "policy", "trials", "circuits", "seed",
                "out-dir", "svg",
            ];
            if !KNOWN.contains(&key.as_str()) {
                return Err(format!("line {}: unknown key {k:?}", i + 1));
            }
            values.entry(key).or_default().push(v.trim().to_owned());
        }
        Ok(ConfigFile { values })
    }

    fn last(&self, key: &str) -> Option<&str> {
        self.values.get(key).and_then(|v| v.last()).map(String::as_str)
    }

    fn joined(&self, key: &str) -> Option<String> {
        self.values.get(key).map(|v| v.join(","))
    }
}

/// Merges flags over the configuration file and the seed environment variable.
pub fn resolve_simulate(
    args: &SimulateArgs,
    file: &ConfigFile,
    env_seed: Option<&str>,
) -> Result<(ExperimentConfig, PathBuf, bool), String> {
    let pick = |flag: &Option<String>, key: &str| flag.clone().or_else(|| file.last(key).map(str::to_owned));
    let list = |flag: &Option<String>, key: &str| -> Result<Vec<f64>, String> {
        match flag.clone().or_else(|| file.joined(key)) {
            Some(s) => parse_value_list(&s),
            None => Ok(vec![]),
        }
    };
    let int = |flag: Option<usize>, key: &str, default: usize| -> Result<usize, String> {
        match (flag, file.last(key)) {
            (Some(v), _) => Ok(v),
            (None, Some(v)) => v
                .parse()
                .map_err(|_| format!("{key}: {v:?} is not a non-negative integer")),
            (None, None) => Ok(default),
        }
    };

    let network = args
        .network
        .clone()
        .or_else(|| file.last("network").map(PathBuf::from))
        .ok_or("no network given (--network)")?;
    let metric: Metric = pick(&args.metric, "metric")
        .ok_or("no metric given (--metric)")?
        .parse()
        .map_err(|e: crate::experiment::ExperimentError| e.to_string())?;
    let kind: ScenarioKind = pick(&args.scenario, "scenario")
        .ok_or("no scenario given (--scenario)")?
        .parse()
        .map_err(|e: crate::experiment::ExperimentError| e.to_string())?;
    let grid = ScenarioGrid {
        kind,
        p: list(&args.p, "p")?,
        w_e: list(&args.we, "we")?,
        w_m: list(&args.wm, "wm")?,
        w_x: list(&args.wx, "wx")?,
    };
    let policies = parse_policies(&pick(&args.policy, "policy").unwrap_or_else(|| "all".into()))?;
    let seed = match (args.seed, file.last("seed"), env_seed) {
        (Some(s), _, _) => s,
        (None, Some(s), _) | (None, None, Some(s)) => s.parse().map_err(|_| format!("seed {s:?} is not a u64"))?,
        (None, None, None) => 0,
    };
    let out_dir = args
        .out_dir
        .clone()
        .or_else(|| file.last("out-dir").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let svg = args.svg
        || match file.last("svg") {
            None | Some("false") | Some("0") => false,
            Some("true") | Some("1") => true,
            Some(v) => return Err(format!("svg: {v:?} is not a boolean")),
        };

    let config = ExperimentConfig {
        network: NetworkSource::Native(network),
        grid,
        policies,
        trials: int(args.trials, "trials", ExperimentConfig::DEFAULT_TRIALS)?,
        circuits_per_trial: int(args.circuits, "circuits", ExperimentConfig::DEFAULT_CIRCUITS)?,
        seed,
        metric,
    };
    config.validate().map_err(|e| e.to_string())?;
    Ok((config, out_dir, svg))
}

fn cmd_parse(args: &ParseArgs) -> Result<i32, Failure> {
    let text = fs::read(&args.consensus).map_err(|e| usage(format!("{}: {e}", args.consensus.display())))?;
    let network = parse_consensus(&String::from_utf8_lossy(&text))
        .map_err(|e| usage(format!("{}: {e}", args.consensus.display())))?;
    write_file(&args.out, &save_network(&network))?;
    println!("{}", network.counts());
    Ok(EXIT_OK)
}

fn cmd_generate(args: &GenerateArgs) -> Result<i32, Failure> {
    let seed = match args.seed {
        Some(s) => s,
        None => std::env::var(SEED_ENV)
            .ok()
            .map(|s| s.parse().map_err(|_| usage(format!("{SEED_ENV}={s:?} is not a u64"))))
            .transpose()?
            .unwrap_or(0),
    };
    let spec = SyntheticNetworkSpec {
        total_relays: args.relays,
        entry_capable_count: args.entry,
        exit_capable_count: args.exit,
        dual_capable_count: args.dual,
        bandwidth: parse_bandwidth(&args.bw).map_err(usage)?,
        seed,
    };
    let network = generate_synthetic(&spec).map_err(|e| usage(e.to_string()))?;
    write_file(&args.out, &save_network(&network))?;
    println!("{}", network.counts());
    Ok(EXIT_OK)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<i32, Failure> {
    let file = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            ConfigFile::parse(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?
        }
        None => ConfigFile::default(),
    };
    let env_seed = std::env::var(SEED_ENV).ok();
    let (config, out_dir, svg) = resolve_simulate(args, &file, env_seed.as_deref()).map_err(usage)?;
    let NetworkSource::Native(path) = &config.network else {
        unreachable!()
    };
    let network = read_network(path)?;
    let result = run_sweep_on(&network, &config).map_err(|e| usage(e.to_string()))?;

    fs::create_dir_all(&out_dir).map_err(|e| usage(format!("{}: {e}", out_dir.display())))?;
    let name = config.metric.name();
    let mut trials = Vec::new();
    report::write_trials_csv(&result, &mut trials).map_err(|e| usage(e.to_string()))?;
    write_file(&out_dir.join(format!("{name}.csv")), &trials)?;
    let mut summary = Vec::new();
    report::write_summary_csv(&result, &mut summary).map_err(|e| usage(e.to_string()))?;
    write_file(&out_dir.join(format!("{name}_summary.csv")), &summary)?;
    if svg {
        let kind = config.grid.points().map_err(|e| usage(e.to_string()))?[0].kind();
        let chart = report::render_svg(
            &report::chart_points(&result),
            &format!("{kind} deployment: {name}"),
            config.metric.value_name(),
        );
        write_file(&out_dir.join(format!("{name}.svg")), chart.as_bytes())?;
    }

    let failed: Vec<_> = result.fully_failed_rows().collect();
    for row in &failed {
        eprintln!(
            "warning: every circuit failed for {} with policy {}",
            row.scenario, row.policy
        );
    }
    println!("wrote {} rows to {}", result.rows.len(), out_dir.display());
    Ok(if failed.is_empty() { EXIT_OK } else { EXIT_PARTIAL })
}

fn cmd_privacy(args: &PrivacyArgs) -> Result<i32, Failure> {
    let network = read_network(&args.network)?;
    let ps = parse_value_list(&args.p).map_err(usage)?;
    if let Some(p) = ps.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(usage(format!("p = {p} is not in [0, 1]")));
    }
    let table: Vec<_> = ps
        .iter()
        .map(|&p| (p, privacy_report(&uniform_capability_deployment(&network, p))))
        .collect();
    let mut out = Vec::new();
    report::write_privacy_csv(&table, &mut out).map_err(|e| usage(e.to_string()))?;
    match &args.out {
        Some(path) => write_file(path, &out)?,
        None => print!("{}", String::from_utf8_lossy(&out)),
    }
    Ok(EXIT_OK)
}

fn cmd_report(args: &ReportArgs) -> Result<i32, Failure> {
    let file = fs::File::open(&args.summary).map_err(|e| usage(format!("{}: {e}", args.summary.display())))?;
    let points = report::read_summary_csv(file).map_err(|e| usage(format!("{}: {e}", args.summary.display())))?;
    let svg = report::render_svg(&points, &args.title, "mean");
    write_file(&args.out, svg.as_bytes())?;
    Ok(EXIT_OK)
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let outcome = match &cli.command {
        Command::Parse(a) => cmd_parse(a),
        Command::Generate(a) => cmd_generate(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Privacy(a) => cmd_privacy(a),
        Command::Report(a) => cmd_report(a),
    };
    outcome.unwrap_or_else(|f| {
        eprintln!("error: {}", f.message);
        f.code
    })
}
