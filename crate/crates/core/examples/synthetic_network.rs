//! Generates a synthetic network and round-trips it through the native format.

use parteetor::consensus::{
    generate_synthetic, load_network, save_network, BandwidthDistribution, SyntheticNetworkSpec,
};

fn main() {
    let spec = SyntheticNetworkSpec {
        total_relays: 500,
        entry_capable_count: 250,
        exit_capable_count: 130,
        dual_capable_count: 65,
        bandwidth: BandwidthDistribution::Pareto {
            scale: 500.0,
            shape: 1.5,
        },
        seed: 42,
    };
    let network = generate_synthetic(&spec).expect("consistent spec");
    println!("{}", network.counts());

    let mut bws: Vec<u64> = network.relays().iter().map(|r| r.bandwidth_kbps).collect();
    bws.sort_unstable();
    println!(
        "bandwidth min={} median={} max={} total={}",
        bws[0],
        bws[bws.len() / 2],
        bws[bws.len() - 1],
        bws.iter().sum::<u64>()
    );

    let bytes = save_network(&network);
    let text = String::from_utf8_lossy(&bytes);
    println!("native encoding: {} bytes, first lines:", bytes.len());
    for line in text.lines().take(3) {
        println!("  {line}");
    }
    let back = load_network(&bytes).expect("own output decodes");
    assert_eq!(back, network);
    assert_eq!(save_network(&back), bytes);
    println!("round trip is bit-exact");

    let same = generate_synthetic(&spec).unwrap();
    assert_eq!(same, network);
    println!("same seed gives the same network");
}
