//! Builds circuits under every security policy and lists the attacks each one mitigates.

use parteetor::consensus::{generate_synthetic, BandwidthDistribution, SyntheticNetworkSpec};
use parteetor::deployment::{assign_tees, DeploymentScenario};
use parteetor::selection::{complies, mitigated_attacks, CircuitBuilder, SecurityPolicy};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let network = generate_synthetic(&SyntheticNetworkSpec {
        total_relays: 300,
        entry_capable_count: 150,
        exit_capable_count: 80,
        dual_capable_count: 40,
        bandwidth: BandwidthDistribution::Uniform { lo: 100.0, hi: 5000.0 },
        seed: 11,
    })
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let deployed = assign_tees(&network, &DeploymentScenario::Random { p: 0.25 }, &mut rng).unwrap();
    let builder = CircuitBuilder::new(&deployed);

    for policy in SecurityPolicy::ALL {
        let attacks: Vec<String> = mitigated_attacks(policy).iter().map(|a| format!("{a:?}")).collect();
        println!("{policy}: mitigates [{}]", attacks.join(", "));
        match builder.build(policy, &mut rng) {
            Ok(circuit) => {
                let tees: Vec<bool> = circuit.hops().iter().map(|r| r.tee).collect();
                println!(
                    "  circuit {circuit} tee={tees:?} complies={}",
                    complies(&circuit, policy)
                );
            }
            Err(e) => println!("  no circuit: {e}"),
        }
    }

    let without = network.with_tee_flags(&vec![false; network.len()]);
    let err = CircuitBuilder::new(&without)
        .build(SecurityPolicy::Entry, &mut rng)
        .unwrap_err();
    println!("\nwithout any TEE relay: {err}");
}
