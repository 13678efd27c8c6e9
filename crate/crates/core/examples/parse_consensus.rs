//! Parses a small consensus document and prints each relay's capabilities.

use parteetor::consensus::{parse_consensus, parse_router_entries};

const DOCUMENT: &str = "\
network-status-version 3
valid-after 2023-02-26 00:00:00
r moria BAAAAAAAAAAAAAAAAAAAAAAAAAAA CAAAAAAAAAAAAAAAAAAAAAAAAAA 2023-02-25 12:00:00 128.31.0.34 9101 9131
s Fast Guard Running Stable Valid
w Bandwidth=9300
r tortoise DAAAAAAAAAAAAAAAAAAAAAAAAAAA EAAAAAAAAAAAAAAAAAAAAAAAAAA 2023-02-25 13:10:00 10.0.0.2 443 0
s Exit Fast Guard Running Valid
w Bandwidth=21000
r shadyexit FAAAAAAAAAAAAAAAAAAAAAAAAAAA GAAAAAAAAAAAAAAAAAAAAAAAAAA 2023-02-25 14:20:00 10.0.0.3 443 0
s BadExit Exit Running Valid
w Bandwidth=4000
r quiet HAAAAAAAAAAAAAAAAAAAAAAAAAAA IAAAAAAAAAAAAAAAAAAAAAAAAAA 2023-02-25 15:30:00 10.0.0.4 9001 0
s Running Valid
w Bandwidth=650 Unmeasured=1
directory-footer
";

fn main() {
    let entries = parse_router_entries(DOCUMENT).expect("valid document");
    for e in &entries {
        let flags: Vec<&str> = e.flags.iter().map(String::as_str).collect();
        println!("{:<10} {:>6} kB/s  {}", e.nickname, e.bandwidth_kbps, flags.join(","));
    }

    let network = parse_consensus(DOCUMENT).expect("valid document");
    println!();
    for r in network.relays() {
        println!(
            "{:<10} entry={:<5} exit={:<5} dual={}",
            r.nickname,
            r.entry_capable,
            r.exit_capable,
            r.is_dual()
        );
    }
    println!("{}", network.counts());

    let broken = DOCUMENT.replace("w Bandwidth=4000", "w Bandwidth=lots");
    println!("malformed input: {}", parse_consensus(&broken).unwrap_err());
}
