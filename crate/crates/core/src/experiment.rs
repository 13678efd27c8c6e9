//! Seeded Monte Carlo sweeps over deployment scenarios.
//!
//! # Random streams
//!
//! Every random decision comes from a ChaCha8 generator keyed by the
//! experiment seed (`ChaCha8Rng::seed_from_u64(seed)`) and switched to a
//! stream chosen by [`stream_id`]:
//!
//! ```text
//! point_key = FNV-1a-64(scenario.to_string())        e.g. "random p=0.25"
//! phase     = 0 for TEE assignment, 1 + policy ordinal for circuit batches
//! stream    = mix64(point_key ^ mix64((trial << 8) | phase))
//! ```
//!
//! `mix64` is the SplitMix64 finalizer. Streams depend on the sweep point's
//! parameters rather than its position in the grid, so adding, removing or
//! reordering grid points never changes another point's results.
//!
//! TEE assignment is redrawn for every trial. Within a trial all policies
//! share the same assignment.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::consensus::{
    generate_synthetic, load_network, parse_consensus, ConsensusError, DecodeError, SyntheticError,
    SyntheticNetworkSpec,
};
use crate::deployment::{assign_tees, DeploymentError, DeploymentScenario, PositionDistribution};
use crate::metrics::{
    count_unique_circuits, performance_report, security_compliance, PerformanceReport, PrivacyReport, SecurityReport,
};
use crate::model::{Circuit, NetworkModel};
use crate::selection::{CircuitBuilder, SecurityPolicy};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Deployment(#[from] DeploymentError),
    #[error(transparent)]
    Consensus(#[from] ConsensusError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Synthetic(#[from] SyntheticError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Security,
    Performance,
    Privacy,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Security => "security",
            Metric::Performance => "performance",
            Metric::Privacy => "privacy",
        }
    }

    /// What a row's value measures.
    pub fn value_name(self) -> &'static str {
        match self {
            Metric::Security => "compliance_fraction",
            Metric::Performance => "median_expected_bandwidth_kbps",
            Metric::Privacy => "unique_circuits",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "security" => Ok(Metric::Security),
            "performance" => Ok(Metric::Performance),
            "privacy" => Ok(Metric::Privacy),
            _ => Err(ExperimentError::InvalidConfig(format!("unknown metric {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NetworkSource {
    Consensus(PathBuf),
    Native(PathBuf),
    Synthetic(SyntheticNetworkSpec),
}

fn read(path: &PathBuf) -> Result<Vec<u8>, ExperimentError> {
    std::fs::read(path).map_err(|source| ExperimentError::Io {
        path: path.clone(),
        source,
    })
}

impl NetworkSource {
    pub fn load(&self) -> Result<NetworkModel, ExperimentError> {
        Ok(match self {
            NetworkSource::Consensus(path) => {
                let bytes = read(path)?;
                parse_consensus(&String::from_utf8_lossy(&bytes))?
            }
            NetworkSource::Native(path) => load_network(&read(path)?)?,
            NetworkSource::Synthetic(spec) => generate_synthetic(spec)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    Random,
    BandwidthWeighted,
    InverseBandwidthWeighted,
    CircuitPosition(PositionDistribution),
}

impl std::str::FromStr for ScenarioKind {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(ScenarioKind::Random),
            "bandwidth" => Ok(ScenarioKind::BandwidthWeighted),
            "inverse-bandwidth" => Ok(ScenarioKind::InverseBandwidthWeighted),
            _ => match s.strip_prefix("position:") {
                Some(d) => Ok(ScenarioKind::CircuitPosition(d.parse()?)),
                None => Err(ExperimentError::InvalidConfig(format!("unknown scenario {s:?}"))),
            },
        }
    }
}

/// A scenario family with the parameter values to sweep. For circuit-position
/// scenarios the grid is the Cartesian product of the used weight lists.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioGrid {
    pub kind: ScenarioKind,
    pub p: Vec<f64>,
    pub w_e: Vec<f64>,
    pub w_m: Vec<f64>,
    pub w_x: Vec<f64>,
}

impl ScenarioGrid {
    pub fn fractions(kind: ScenarioKind, p: Vec<f64>) -> Self {
        ScenarioGrid {
            kind,
            p,
            w_e: vec![],
            w_m: vec![],
            w_x: vec![],
        }
    }

    pub fn points(&self) -> Result<Vec<DeploymentScenario>, ExperimentError> {
        let invalid = |m: String| Err(ExperimentError::InvalidConfig(m));
        let points: Vec<DeploymentScenario> = match self.kind {
            ScenarioKind::Random => self.p.iter().map(|&p| DeploymentScenario::Random { p }).collect(),
            ScenarioKind::BandwidthWeighted => self
                .p
                .iter()
                .map(|&p| DeploymentScenario::BandwidthWeighted { p })
                .collect(),
            ScenarioKind::InverseBandwidthWeighted => self
                .p
                .iter()
                .map(|&p| DeploymentScenario::InverseBandwidthWeighted { p })
                .collect(),
            ScenarioKind::CircuitPosition(distribution) => {
                let (ue, um, ux) = distribution.uses();
                let pick = |used: bool, list: &Vec<f64>, name: &str| -> Result<Vec<f64>, ExperimentError> {
                    match (used, list.is_empty()) {
                        (true, true) => Err(ExperimentError::InvalidConfig(format!(
                            "the {} distribution needs {name} values",
                            distribution.name()
                        ))),
                        (true, false) => Ok(list.clone()),
                        (false, _) if list.iter().any(|&w| w != 0.0) => Err(ExperimentError::InvalidConfig(format!(
                            "{name} is not used by the {} distribution",
                            distribution.name()
                        ))),
                        (false, _) => Ok(vec![0.0]),
                    }
                };
                let (we, wm, wx) = (
                    pick(ue, &self.w_e, "we")?,
                    pick(um, &self.w_m, "wm")?,
                    pick(ux, &self.w_x, "wx")?,
                );
                let mut out = Vec::new();
                for &w_e in &we {
                    for &w_m in &wm {
                        for &w_x in &wx {
                            out.push(DeploymentScenario::CircuitPositionWeighted {
                                distribution,
                                w_e,
                                w_m,
                                w_x,
                            });
                        }
                    }
                }
                out
            }
        };
        if points.is_empty() {
            return invalid("the scenario grid is empty".into());
        }
        for p in &points {
            p.validate()?;
        }
        Ok(points)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub network: NetworkSource,
    pub grid: ScenarioGrid,
    /// Policies to report. Performance sweeps always add the no-policy baseline.
    pub policies: Vec<SecurityPolicy>,
    pub trials: usize,
    pub circuits_per_trial: usize,
    pub seed: u64,
    pub metric: Metric,
}

impl ExperimentConfig {
    pub const DEFAULT_TRIALS: usize = 10;
    pub const DEFAULT_CIRCUITS: usize = 1000;

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.trials == 0 || self.circuits_per_trial == 0 {
            return Err(ExperimentError::InvalidConfig(
                "trials and circuits per trial must be at least 1".into(),
            ));
        }
        if self.policies.is_empty() {
            return Err(ExperimentError::InvalidConfig("no policies selected".into()));
        }
        self.grid.points().map(|_| ())
    }

    /// Policies evaluated for each sweep point, in report order.
    pub fn row_policies(&self) -> Vec<SecurityPolicy> {
        let mut ps: Vec<SecurityPolicy> = SecurityPolicy::ALL
            .into_iter()
            .filter(|p| {
                self.policies.contains(p) || (self.metric == Metric::Performance && *p == SecurityPolicy::NoPolicy)
            })
            .collect();
        ps.dedup();
        ps
    }
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Deploy,
    Circuits(SecurityPolicy),
}

impl Phase {
    fn tag(self) -> u64 {
        match self {
            Phase::Deploy => 0,
            Phase::Circuits(p) => 1 + p.ordinal(),
        }
    }
}

pub fn stream_id(scenario: &DeploymentScenario, trial: usize, phase: Phase) -> u64 {
    mix64(fnv1a(&scenario.to_string()) ^ mix64(((trial as u64) << 8) | phase.tag()))
}

pub fn substream(seed: u64, scenario: &DeploymentScenario, trial: usize, phase: Phase) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(scenario, trial, phase));
    rng
}

/// Circuits built for one policy, plus the number of aborted attempts.
pub struct Batch<'a> {
    pub circuits: Vec<Circuit<'a>>,
    pub failures: usize,
}

pub fn build_batch<'a, R: Rng + ?Sized>(
    builder: &CircuitBuilder<'a>,
    policy: SecurityPolicy,
    count: usize,
    rng: &mut R,
) -> Batch<'a> {
    let mut circuits = Vec::with_capacity(count);
    let mut failures = 0;
    for _ in 0..count {
        match builder.build(policy, rng) {
            Ok(c) => circuits.push(c),
            Err(_) => failures += 1,
        }
    }
    Batch { circuits, failures }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrialReport {
    Security(SecurityReport),
    /// `None` when every circuit failed.
    Performance(Option<PerformanceReport>),
    Privacy(PrivacyReport),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub failures: usize,
    pub report: TrialReport,
}

/// Assigns TEEs, then builds `circuits` circuits under `policy` and reports
/// `metric` over them. Aborted circuits are counted, not retried.
pub fn run_trial<R: Rng + ?Sized>(
    network: &NetworkModel,
    scenario: &DeploymentScenario,
    policy: SecurityPolicy,
    circuits: usize,
    metric: Metric,
    rng: &mut R,
) -> Result<TrialOutcome, ExperimentError> {
    let deployed = assign_tees(network, scenario, rng)?;
    if metric == Metric::Privacy {
        return Ok(TrialOutcome {
            failures: 0,
            report: TrialReport::Privacy(crate::metrics::privacy_report(&deployed)),
        });
    }
    let builder = CircuitBuilder::new(&deployed);
    let batch = build_batch(&builder, policy, circuits, rng);
    let report = match metric {
        Metric::Security => TrialReport::Security(security_compliance(&batch.circuits)),
        _ => TrialReport::Performance(performance_report(&batch.circuits).ok()),
    };
    Ok(TrialOutcome {
        failures: batch.failures,
        report,
    })
}

/// One (sweep point, policy) result.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub scenario: DeploymentScenario,
    pub policy: SecurityPolicy,
    /// Per-trial values; `None` where a trial produced no circuits.
    pub values: Vec<Option<f64>>,
    pub failures: usize,
    pub attempts: usize,
}

impl SweepRow {
    /// Arithmetic mean over trials that produced a value.
    pub fn mean(&self) -> Option<f64> {
        let vals: Vec<f64> = self.values.iter().flatten().copied().collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }

    pub fn fully_failed(&self) -> bool {
        self.attempts > 0 && self.failures == self.attempts
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub metric: Metric,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn fully_failed_rows(&self) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(|r| r.fully_failed())
    }
}

/// (policy, value, failures, attempts) for one trial of one point.
type TrialCells = Vec<(SecurityPolicy, Option<f64>, usize, usize)>;

fn sweep_trial(
    network: &NetworkModel,
    config: &ExperimentConfig,
    policies: &[SecurityPolicy],
    scenario: &DeploymentScenario,
    trial: usize,
) -> Result<TrialCells, ExperimentError> {
    let seed = config.seed;
    let n = config.circuits_per_trial;
    let deployed = assign_tees(network, scenario, &mut substream(seed, scenario, trial, Phase::Deploy))?;
    let builder = CircuitBuilder::new(&deployed);
    Ok(match config.metric {
        Metric::Security => {
            let mut rng = substream(seed, scenario, trial, Phase::Circuits(SecurityPolicy::NoPolicy));
            let batch = build_batch(&builder, SecurityPolicy::NoPolicy, n, &mut rng);
            let report = security_compliance(&batch.circuits);
            policies
                .iter()
                .map(|&p| (p, report.fraction(p), batch.failures, n))
                .collect()
        }
        Metric::Performance => policies
            .iter()
            .map(|&p| {
                let mut rng = substream(seed, scenario, trial, Phase::Circuits(p));
                let batch = build_batch(&builder, p, n, &mut rng);
                let median = performance_report(&batch.circuits).ok().map(|r| r.median_kbps);
                (p, median, batch.failures, n)
            })
            .collect(),
        Metric::Privacy => policies
            .iter()
            .map(|&p| (p, Some(count_unique_circuits(&deployed, p) as f64), 0, 0))
            .collect(),
    })
}

/// Runs every (point, trial) pair, in parallel, and reduces in grid order.
pub fn run_sweep_on(network: &NetworkModel, config: &ExperimentConfig) -> Result<SweepResult, ExperimentError> {
    config.validate()?;
    let points = config.grid.points()?;
    let policies = config.row_policies();
    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|s| (0..config.trials).map(move |t| (s, t)))
        .collect();
    let cells = jobs
        .par_iter()
        .map(|&(s, t)| sweep_trial(network, config, &policies, &points[s], t))
        .collect::<Result<Vec<_>, _>>()?;

    let mut rows = Vec::with_capacity(points.len() * policies.len());
    for (s, scenario) in points.iter().enumerate() {
        let trials = &cells[s * config.trials..(s + 1) * config.trials];
        for (k, &policy) in policies.iter().enumerate() {
            let mut row = SweepRow {
                scenario: *scenario,
                policy,
                values: Vec::with_capacity(config.trials),
                failures: 0,
                attempts: 0,
            };
            for trial in trials {
                let (p, value, failures, attempts) = trial[k];
                debug_assert_eq!(p, policy);
                row.values.push(value);
                row.failures += failures;
                row.attempts += attempts;
            }
            rows.push(row);
        }
    }
    Ok(SweepResult {
        metric: config.metric,
        rows,
    })
}

pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResult, ExperimentError> {
    config.validate()?;
    let network = config.network.load()?;
    run_sweep_on(&network, config)
}
