//! Compares median expected circuit bandwidth across policies and renders an SVG chart.

use parteetor::consensus::{BandwidthDistribution, SyntheticNetworkSpec};
use parteetor::experiment::{run_sweep, ExperimentConfig, Metric, NetworkSource, ScenarioGrid, ScenarioKind};
use parteetor::report::{chart_points, render_svg, write_summary_csv};
use parteetor::selection::SecurityPolicy;

fn main() {
    let config = ExperimentConfig {
        network: NetworkSource::Synthetic(SyntheticNetworkSpec {
            total_relays: 1500,
            entry_capable_count: 750,
            exit_capable_count: 400,
            dual_capable_count: 200,
            bandwidth: BandwidthDistribution::Pareto {
                scale: 800.0,
                shape: 1.2,
            },
            seed: 21,
        }),
        grid: ScenarioGrid::fractions(ScenarioKind::InverseBandwidthWeighted, vec![0.1, 0.3, 0.5]),
        policies: vec![
            SecurityPolicy::Entry,
            SecurityPolicy::EntryExit,
            SecurityPolicy::EntryMiddleExit,
        ],
        trials: 4,
        circuits_per_trial: 800,
        seed: 5,
        metric: Metric::Performance,
    };
    let result = run_sweep(&config).expect("sweep runs");
    write_summary_csv(&result, std::io::stdout().lock()).unwrap();

    let svg = render_svg(&chart_points(&result), "Inverse-bandwidth deployment", "median kB/s");
    let path = std::env::temp_dir().join("parteetor_performance.svg");
    std::fs::write(&path, svg).unwrap();
    println!("chart written to {}", path.display());
}
