//! Counts the distinct circuits available under each policy as TEE coverage grows.

use parteetor::metrics::{privacy_report, uniform_capability_deployment};
use parteetor::model::{NetworkModel, Relay};
use parteetor::report::write_privacy_csv;
use parteetor::selection::SecurityPolicy;

fn network(entry_exit: usize, entry_only: usize, exit_only: usize, middle_only: usize) -> NetworkModel {
    let classes = [
        (entry_exit, true, true),
        (entry_only, true, false),
        (exit_only, false, true),
        (middle_only, false, false),
    ];
    let relays = classes
        .iter()
        .enumerate()
        .flat_map(|(k, &(n, entry, exit))| {
            (0..n).map(move |i| {
                Relay::new(format!("{k}{i:05}"), format!("c{k}r{i}"), 1000)
                    .with_entry(entry)
                    .with_exit(exit)
            })
        })
        .collect();
    NetworkModel::new(relays).unwrap()
}

fn main() {
    // 6356 relays: 3179 entry-capable, 1668 exit-capable, 849 both
    let net = network(849, 2330, 819, 2358);
    println!("{}", net.counts());

    let mut table = Vec::new();
    for p in [0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 1.0] {
        let report = privacy_report(&uniform_capability_deployment(&net, p));
        assert!(report.is_monotone());
        table.push((p, report));
    }
    println!("{:>5} {:>16} {:>16} {:>16}", "p", "none", "entry", "entry-exit");
    for (p, r) in &table {
        println!(
            "{p:>5} {:>16} {:>16} {:>16}",
            r.counts[&SecurityPolicy::NoPolicy],
            r.counts[&SecurityPolicy::Entry],
            r.counts[&SecurityPolicy::EntryExit]
        );
    }
    println!();
    write_privacy_csv(&table, std::io::stdout().lock()).unwrap();
}
