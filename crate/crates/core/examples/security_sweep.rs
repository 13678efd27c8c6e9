//! Runs a security sweep over deployment fractions and prints the summary CSV.

use parteetor::consensus::{BandwidthDistribution, SyntheticNetworkSpec};
use parteetor::experiment::{run_sweep, ExperimentConfig, Metric, NetworkSource, ScenarioGrid, ScenarioKind};
use parteetor::report::write_summary_csv;
use parteetor::selection::SecurityPolicy;

fn main() {
    let config = ExperimentConfig {
        network: NetworkSource::Synthetic(SyntheticNetworkSpec {
            total_relays: 1000,
            entry_capable_count: 500,
            exit_capable_count: 260,
            dual_capable_count: 130,
            bandwidth: BandwidthDistribution::Pareto {
                scale: 300.0,
                shape: 1.3,
            },
            seed: 3,
        }),
        grid: ScenarioGrid::fractions(ScenarioKind::BandwidthWeighted, vec![0.05, 0.1, 0.25, 0.5]),
        policies: SecurityPolicy::ALL.to_vec(),
        trials: 5,
        circuits_per_trial: 500,
        seed: 9,
        metric: Metric::Security,
    };
    let result = run_sweep(&config).expect("sweep runs");
    write_summary_csv(&result, std::io::stdout().lock()).unwrap();
    for row in result.fully_failed_rows() {
        eprintln!("every circuit failed at {} under {}", row.scenario, row.policy);
    }
}
