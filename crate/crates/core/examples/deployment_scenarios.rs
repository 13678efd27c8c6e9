//! Deploys TEEs under each scenario and shows which relays end up covered.

use parteetor::consensus::{generate_synthetic, BandwidthDistribution, SyntheticNetworkSpec};
use parteetor::deployment::{assign_tees, DeploymentScenario, PositionDistribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let network = generate_synthetic(&SyntheticNetworkSpec {
        total_relays: 2000,
        entry_capable_count: 1000,
        exit_capable_count: 520,
        dual_capable_count: 260,
        bandwidth: BandwidthDistribution::Pareto {
            scale: 300.0,
            shape: 1.3,
        },
        seed: 7,
    })
    .unwrap();
    let total_bw: u64 = network.relays().iter().map(|r| r.bandwidth_kbps).sum();

    let scenarios = [
        DeploymentScenario::Random { p: 0.1 },
        DeploymentScenario::BandwidthWeighted { p: 0.1 },
        DeploymentScenario::InverseBandwidthWeighted { p: 0.1 },
        DeploymentScenario::CircuitPositionWeighted {
            distribution: PositionDistribution::EntryExit,
            w_e: 0.2,
            w_m: 0.0,
            w_x: 0.3,
        },
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    println!(
        "{:<32} {:>5} {:>9} {:>9} {:>8}",
        "scenario", "tees", "entry_tee", "exit_tee", "bw_share"
    );
    for scenario in &scenarios {
        let deployed = assign_tees(&network, scenario, &mut rng).unwrap();
        let c = deployed.counts();
        let tee_bw: u64 = deployed
            .relays()
            .iter()
            .filter(|r| r.tee)
            .map(|r| r.bandwidth_kbps)
            .sum();
        println!(
            "{:<32} {:>5} {:>9} {:>9} {:>8.3}",
            scenario.to_string(),
            c.tee,
            c.entry_tee,
            c.exit_tee,
            tee_bw as f64 / total_bw as f64
        );
    }

    let bad = DeploymentScenario::Random { p: 1.5 };
    println!(
        "invalid scenario: {}",
        assign_tees(&network, &bad, &mut rng).unwrap_err()
    );
}
