//! Checks the closed-form circuit count against exhaustive enumeration on a small network.

use parteetor::consensus::{generate_synthetic, BandwidthDistribution, SyntheticNetworkSpec};
use parteetor::deployment::{assign_tees, DeploymentScenario};
use parteetor::metrics::{count_unique_circuits, enumerate_circuits, ENUMERATION_LIMIT};
use parteetor::selection::{complies, SecurityPolicy};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let network = generate_synthetic(&SyntheticNetworkSpec {
        total_relays: 24,
        entry_capable_count: 12,
        exit_capable_count: 8,
        dual_capable_count: 4,
        bandwidth: BandwidthDistribution::Constant(100),
        seed: 8,
    })
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let deployed = assign_tees(&network, &DeploymentScenario::Random { p: 0.5 }, &mut rng).unwrap();
    println!("{} tee={}", deployed.counts(), deployed.counts().tee);

    for policy in SecurityPolicy::ALL {
        let closed = count_unique_circuits(&deployed, policy);
        let all = enumerate_circuits(&deployed, policy).unwrap();
        assert!(all.iter().all(|c| c.is_valid() && complies(c, policy)));
        println!(
            "{:<18} closed form {closed:>6}  enumerated {:>6}",
            policy.name(),
            all.len()
        );
        assert_eq!(closed, all.len() as u128);
    }

    let big = generate_synthetic(&SyntheticNetworkSpec {
        total_relays: ENUMERATION_LIMIT + 1,
        entry_capable_count: 10,
        exit_capable_count: 10,
        dual_capable_count: 5,
        bandwidth: BandwidthDistribution::Constant(100),
        seed: 1,
    })
    .unwrap();
    println!(
        "\nlarger network: {}",
        enumerate_circuits(&big, SecurityPolicy::NoPolicy).unwrap_err()
    );
}
