//! Building a [`NetworkModel`] from a network-status consensus, from a
//! synthetic description, or from the native line format.
//!
//! Only the `r`, `s` and `w` lines of a consensus are consumed. Relay
//! capabilities follow Tor's flags: `Guard` makes a relay entry-capable,
//! `Exit` without `BadExit` makes it exit-capable.
//!
//! The native format is a header line followed by one tab-separated record
//! per relay, every line terminated by `\n`:
//!
//! ```text
//! parteetor-network v1
//! <fingerprint>\t<nickname>\t<bandwidth_kbps>\tentry:<0|1>\texit:<0|1>\ttee:<0|1>
//! ```

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Pareto};
use thiserror::Error;

use crate::model::{ModelError, NetworkModel, Relay};

pub const NATIVE_HEADER: &str = "parteetor-network v1";

#[derive(Debug, Error, PartialEq)]
pub enum ConsensusError {
    #[error("line {line}: malformed entry: {reason}")]
    MalformedEntry { line: usize, reason: String },
    #[error("line {line}: {source}")]
    Duplicate {
        line: usize,
        #[source]
        source: ModelError,
    },
}

#[derive(Debug, Error, PartialEq)]
pub enum SyntheticError {
    #[error("invalid synthetic network spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum DecodeError {
    #[error("payload is not valid UTF-8")]
    NotUtf8,
    #[error("missing or unknown header")]
    BadHeader,
    #[error("line {line}: {reason}")]
    BadRecord { line: usize, reason: String },
    #[error("truncated payload: last line has no terminating newline")]
    Truncated,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// The consensus fields of one router block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRouterEntry {
    pub nickname: String,
    pub identity: String,
    pub published: String,
    pub address: String,
    pub or_port: u16,
    pub dir_port: u16,
    pub flags: BTreeSet<String>,
    pub bandwidth_kbps: u64,
}

impl RawRouterEntry {
    pub fn to_relay(&self) -> Relay {
        let has = |f: &str| self.flags.contains(f);
        Relay::new(self.identity.clone(), self.nickname.clone(), self.bandwidth_kbps)
            .with_entry(has("Guard"))
            .with_exit(has("Exit") && !has("BadExit"))
    }
}

fn malformed(line: usize, reason: impl Into<String>) -> ConsensusError {
    ConsensusError::MalformedEntry {
        line,
        reason: reason.into(),
    }
}

fn parse_port(tok: &str, line: usize, what: &str) -> Result<u16, ConsensusError> {
    tok.parse()
        .map_err(|_| malformed(line, format!("{what} {tok:?} is not a port number")))
}

/// Parses the router blocks of a consensus. Line numbers in errors are 1-based.
pub fn parse_router_entries(document: &str) -> Result<Vec<RawRouterEntry>, ConsensusError> {
    let mut entries: Vec<RawRouterEntry> = Vec::new();
    for (i, line) in document.lines().enumerate() {
        let lineno = i + 1;
        let mut toks = line.split_ascii_whitespace();
        match toks.next() {
            Some("r") => {
                let f: Vec<&str> = toks.collect();
                if f.len() < 8 {
                    return Err(malformed(
                        lineno,
                        format!("router line has {} fields, expected 8", f.len()),
                    ));
                }
                entries.push(RawRouterEntry {
                    nickname: f[0].to_owned(),
                    identity: f[1].to_owned(),
                    published: format!("{} {}", f[3], f[4]),
                    address: f[5].to_owned(),
                    or_port: parse_port(f[6], lineno, "ORPort")?,
                    dir_port: parse_port(f[7], lineno, "DirPort")?,
                    flags: BTreeSet::new(),
                    bandwidth_kbps: 0,
                });
            }
            Some("s") => {
                if let Some(entry) = entries.last_mut() {
                    entry.flags = toks.map(str::to_owned).collect();
                }
            }
            Some("w") => {
                let Some(entry) = entries.last_mut() else { continue };
                for tok in toks {
                    if let Some(v) = tok.strip_prefix("Bandwidth=") {
                        entry.bandwidth_kbps = v.parse().map_err(|_| {
                            malformed(lineno, format!("Bandwidth value {v:?} is not a non-negative integer"))
                        })?;
                    }
                }
            }
            _ => {}
        }
    }
    Ok(entries)
}

/// Parses a consensus into a network model. All relays start without TEE.
pub fn parse_consensus(document: &str) -> Result<NetworkModel, ConsensusError> {
    let entries = parse_router_entries(document)?;
    let relays = entries.iter().map(RawRouterEntry::to_relay).collect();
    NetworkModel::new(relays).map_err(|source| {
        let ModelError::DuplicateFingerprint(ref fp) = source;
        // report the second occurrence
        let line = document
            .lines()
            .enumerate()
            .filter(|(_, l)| {
                let mut t = l.split_ascii_whitespace();
                t.next() == Some("r") && t.nth(1) == Some(fp.as_str())
            })
            .nth(1)
            .map(|(i, _)| i + 1)
            .unwrap_or(0);
        ConsensusError::Duplicate { line, source }
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthDistribution {
    Constant(u64),
    Uniform { lo: f64, hi: f64 },
    Pareto { scale: f64, shape: f64 },
}

impl BandwidthDistribution {
    fn validate(&self) -> Result<(), SyntheticError> {
        let bad = |m: &str| Err(SyntheticError::InvalidSpec(m.to_owned()));
        match *self {
            BandwidthDistribution::Constant(_) => Ok(()),
            BandwidthDistribution::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
                    return bad("uniform bandwidth needs 0 <= lo <= hi");
                }
                Ok(())
            }
            BandwidthDistribution::Pareto { scale, shape } => {
                if !(scale > 0.0 && shape > 0.0 && scale.is_finite() && shape.is_finite()) {
                    return bad("pareto bandwidth needs positive scale and shape");
                }
                Ok(())
            }
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let x = match *self {
            BandwidthDistribution::Constant(v) => return v,
            BandwidthDistribution::Uniform { lo, hi } => {
                if lo == hi {
                    lo
                } else {
                    rng.random_range(lo..=hi)
                }
            }
            BandwidthDistribution::Pareto { scale, shape } => Pareto::new(scale, shape).expect("validated").sample(rng),
        };
        // `as` saturates for out-of-range floats
        x.max(0.0).round() as u64
    }
}

/// Describes a synthetic relay population by capability counts.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticNetworkSpec {
    pub total_relays: usize,
    pub entry_capable_count: usize,
    pub exit_capable_count: usize,
    pub dual_capable_count: usize,
    pub bandwidth: BandwidthDistribution,
    pub seed: u64,
}

impl SyntheticNetworkSpec {
    pub fn validate(&self) -> Result<(), SyntheticError> {
        let invalid = |m: String| Err(SyntheticError::InvalidSpec(m));
        if self.total_relays == 0 {
            return invalid("total_relays must be positive".into());
        }
        if self.dual_capable_count > self.entry_capable_count.min(self.exit_capable_count) {
            return invalid(format!(
                "dual count {} exceeds min(entry {}, exit {})",
                self.dual_capable_count, self.entry_capable_count, self.exit_capable_count
            ));
        }
        let union = self.entry_capable_count + self.exit_capable_count - self.dual_capable_count;
        if union > self.total_relays {
            return invalid(format!(
                "entry + exit - dual = {union} exceeds total {}",
                self.total_relays
            ));
        }
        self.bandwidth.validate()
    }
}

/// Generates a network with exactly the requested capability counts.
/// Capability classes are shuffled across relay positions with a generator
/// seeded from `spec.seed`, so equal specs yield equal networks.
pub fn generate_synthetic(spec: &SyntheticNetworkSpec) -> Result<NetworkModel, SyntheticError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.total_relays;
    let dual = spec.dual_capable_count;
    let entry_only = spec.entry_capable_count - dual;
    let exit_only = spec.exit_capable_count - dual;

    let mut caps: Vec<(bool, bool)> = Vec::with_capacity(n);
    caps.extend(std::iter::repeat_n((true, true), dual));
    caps.extend(std::iter::repeat_n((true, false), entry_only));
    caps.extend(std::iter::repeat_n((false, true), exit_only));
    caps.resize(n, (false, false));
    caps.shuffle(&mut rng);

    let relays = caps
        .into_iter()
        .enumerate()
        .map(|(i, (entry, exit))| {
            Relay::new(
                format!("{:016X}", i),
                format!("relay{i}"),
                spec.bandwidth.sample(&mut rng),
            )
            .with_entry(entry)
            .with_exit(exit)
        })
        .collect();
    Ok(NetworkModel::new(relays).expect("synthetic fingerprints are unique"))
}

fn flag(b: bool) -> u8 {
    b as u8
}

/// Serializes a network to the native format.
pub fn save_network(network: &NetworkModel) -> Vec<u8> {
    let mut out = String::with_capacity(32 + network.len() * 48);
    out.push_str(NATIVE_HEADER);
    out.push('\n');
    for r in network.relays() {
        out.push_str(&format!(
            "{}\t{}\t{}\tentry:{}\texit:{}\ttee:{}\n",
            r.fingerprint,
            r.nickname,
            r.bandwidth_kbps,
            flag(r.entry_capable),
            flag(r.exit_capable),
            flag(r.tee)
        ));
    }
    out.into_bytes()
}

fn parse_flag(field: &str, key: &str, line: usize) -> Result<bool, DecodeError> {
    match field.strip_prefix(key).and_then(|v| v.strip_prefix(':')) {
        Some("0") => Ok(false),
        Some("1") => Ok(true),
        _ => Err(DecodeError::BadRecord {
            line,
            reason: format!("expected {key}:0 or {key}:1, found {field:?}"),
        }),
    }
}

/// Decodes the native format. An empty payload is an empty network.
pub fn load_network(bytes: &[u8]) -> Result<NetworkModel, DecodeError> {
    if bytes.is_empty() {
        return Ok(NetworkModel::default());
    }
    let text = std::str::from_utf8(bytes).map_err(|_| DecodeError::NotUtf8)?;
    let Some(body) = text.strip_suffix('\n') else {
        return Err(DecodeError::Truncated);
    };
    let mut lines = body.split('\n');
    if lines.next() != Some(NATIVE_HEADER) {
        return Err(DecodeError::BadHeader);
    }
    let mut relays = Vec::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 6 {
            return Err(DecodeError::BadRecord {
                line: lineno,
                reason: format!("expected 6 fields, found {}", f.len()),
            });
        }
        let bandwidth_kbps = f[2].parse().map_err(|_| DecodeError::BadRecord {
            line: lineno,
            reason: format!("bandwidth {:?} is not a non-negative integer", f[2]),
        })?;
        relays.push(
            Relay::new(f[0], f[1], bandwidth_kbps)
                .with_entry(parse_flag(f[3], "entry", lineno)?)
                .with_exit(parse_flag(f[4], "exit", lineno)?)
                .with_tee(parse_flag(f[5], "tee", lineno)?),
        );
    }
    Ok(NetworkModel::new(relays)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const ALPHA: &str = "r alpha AAAA BBBB 2023-02-25 12:00:00 1.2.3.4 9001 0\ns Guard Running\nw Bandwidth=5000\n";

    #[test]
    fn single_guard_block() {
        let net = parse_consensus(ALPHA).unwrap();
        assert_eq!(net.len(), 1);
        let r = &net.relays()[0];
        assert_eq!(r.nickname, "alpha");
        assert!(r.entry_capable);
        assert!(!r.exit_capable);
        assert_eq!(r.bandwidth_kbps, 5000);
        assert!(!r.tee);
    }

    #[test]
    fn raw_entry_fields() {
        let e = &parse_router_entries(ALPHA).unwrap()[0];
        assert_eq!(e.identity, "AAAA");
        assert_eq!(e.published, "2023-02-25 12:00:00");
        assert_eq!(e.address, "1.2.3.4");
        assert_eq!((e.or_port, e.dir_port), (9001, 0));
        assert!(e.flags.contains("Running"));
    }

    #[test]
    fn empty_document() {
        assert!(parse_consensus("").unwrap().is_empty());
    }

    #[test]
    fn bad_exit_and_missing_bandwidth() {
        let doc = "network-status-version 3\n\
                   r a I1 D 2023-02-25 12:00:00 1.1.1.1 9001 0\ns Exit Guard BadExit\n\
                   r b I2 D 2023-02-25 12:00:00 1.1.1.2 9001 0\ns Exit Exit Fast\nw Bandwidth=7 Unmeasured=1\n\
                   directory-footer\n";
        let net = parse_consensus(doc).unwrap();
        let [a, b] = net.relays() else { panic!() };
        assert!(a.entry_capable && !a.exit_capable);
        assert_eq!(a.bandwidth_kbps, 0);
        assert!(b.exit_capable && !b.entry_capable);
        assert_eq!(b.bandwidth_kbps, 7);
        let e = parse_router_entries(doc).unwrap();
        assert_eq!(e[1].flags.len(), 2);
    }

    #[test]
    fn short_router_line_reports_line_number() {
        let doc = "header\nr a I1 D 2023-02-25 12:00:00 1.1.1.1 9001\n";
        match parse_consensus(doc).unwrap_err() {
            ConsensusError::MalformedEntry { line, .. } => assert_eq!(line, 2),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn bad_bandwidth_aborts() {
        for bw in ["-5", "abc", ""] {
            let doc = format!("{ALPHA}r b I2 D 2023-02-25 12:00:00 1.1.1.2 9001 0\nw Bandwidth={bw}\n");
            match parse_consensus(&doc).unwrap_err() {
                ConsensusError::MalformedEntry { line, .. } => assert_eq!(line, 5),
                e => panic!("{e}"),
            }
        }
    }

    #[test]
    fn duplicate_identity_rejected() {
        let doc = format!("{ALPHA}{ALPHA}");
        match parse_consensus(&doc).unwrap_err() {
            ConsensusError::Duplicate { line, .. } => assert_eq!(line, 4),
            e => panic!("{e}"),
        }
    }

    fn spec(total: usize, entry: usize, exit: usize, dual: usize) -> SyntheticNetworkSpec {
        SyntheticNetworkSpec {
            total_relays: total,
            entry_capable_count: entry,
            exit_capable_count: exit,
            dual_capable_count: dual,
            bandwidth: BandwidthDistribution::Constant(100),
            seed: 7,
        }
    }

    #[test]
    fn synthetic_exact_counts() {
        let net = generate_synthetic(&spec(3, 1, 1, 0)).unwrap();
        let c = net.counts();
        assert_eq!((c.total, c.entry, c.exit, c.dual), (3, 1, 1, 0));
        assert!(net.relays().iter().all(|r| r.bandwidth_kbps == 100));

        let mut all = spec(10, 10, 10, 10);
        all.bandwidth = BandwidthDistribution::Constant(1);
        assert!(generate_synthetic(&all).unwrap().relays().iter().all(Relay::is_dual));
    }

    #[test]
    fn synthetic_rejects_bad_specs() {
        assert!(generate_synthetic(&spec(10, 2, 3, 4)).is_err());
        assert!(generate_synthetic(&spec(10, 8, 8, 2)).is_err());
        assert!(generate_synthetic(&spec(0, 0, 0, 0)).is_err());
        let mut s = spec(5, 1, 1, 0);
        s.bandwidth = BandwidthDistribution::Uniform { lo: 5.0, hi: 1.0 };
        assert!(generate_synthetic(&s).is_err());
    }

    #[test]
    fn synthetic_is_deterministic() {
        let mut s = spec(200, 80, 50, 20);
        s.bandwidth = BandwidthDistribution::Pareto {
            scale: 100.0,
            shape: 1.5,
        };
        assert_eq!(generate_synthetic(&s).unwrap(), generate_synthetic(&s).unwrap());
        s.seed += 1;
        let other = generate_synthetic(&s).unwrap();
        s.seed -= 1;
        assert_ne!(generate_synthetic(&s).unwrap(), other);
    }

    #[test]
    fn native_format_is_bit_exact() {
        let net = NetworkModel::new(vec![
            Relay::new("F1", "one", 10).with_entry(true).with_tee(true),
            Relay::new("F2", "two", 0).with_exit(true),
        ])
        .unwrap();
        let bytes = save_network(&net);
        assert_eq!(
            std::str::from_utf8(&bytes).unwrap(),
            "parteetor-network v1\nF1\tone\t10\tentry:1\texit:0\ttee:1\nF2\ttwo\t0\tentry:0\texit:1\ttee:0\n"
        );
    }

    #[test]
    fn decode_errors() {
        assert!(load_network(b"").unwrap().is_empty());
        assert!(load_network(b"parteetor-network v1\n").unwrap().is_empty());
        assert_eq!(load_network(b"nope\n").unwrap_err(), DecodeError::BadHeader);
        let full = b"parteetor-network v1\nF1\tone\t10\tentry:1\texit:0\ttee:1\n";
        // a cut right after the header is a valid empty network
        let header_end = NATIVE_HEADER.len() + 1;
        for cut in (1..full.len()).filter(|&c| c != header_end) {
            assert!(load_network(&full[..cut]).is_err(), "cut at {cut}");
        }
        assert!(matches!(
            load_network(b"parteetor-network v1\nF1\tone\tx\tentry:1\texit:0\ttee:1\n"),
            Err(DecodeError::BadRecord { line: 2, .. })
        ));
        assert!(matches!(
            load_network(b"parteetor-network v1\nF1\tone\t1\tentry:2\texit:0\ttee:1\n"),
            Err(DecodeError::BadRecord { line: 2, .. })
        ));
    }

    #[test]
    fn large_round_trip() {
        let s = SyntheticNetworkSpec {
            total_relays: 6356,
            entry_capable_count: 3179,
            exit_capable_count: 1668,
            dual_capable_count: 849,
            bandwidth: BandwidthDistribution::Pareto {
                scale: 1000.0,
                shape: 1.2,
            },
            seed: 2023,
        };
        let net = generate_synthetic(&s).unwrap();
        assert_eq!(load_network(&save_network(&net)).unwrap(), net);
    }

    fn arb_network() -> impl Strategy<Value = NetworkModel> {
        proptest::collection::vec(
            ("[a-z]{1,8}", 0u64..100_000, any::<bool>(), any::<bool>(), any::<bool>()),
            0..40,
        )
        .prop_map(|rows| {
            let relays = rows
                .into_iter()
                .enumerate()
                .map(|(i, (nick, bw, e, x, t))| {
                    Relay::new(format!("FP{i:04}"), nick, bw)
                        .with_entry(e)
                        .with_exit(x)
                        .with_tee(t)
                })
                .collect();
            NetworkModel::new(relays).unwrap()
        })
    }

    fn to_consensus(net: &NetworkModel) -> String {
        let mut doc = String::from("network-status-version 3\n");
        for r in net.relays() {
            doc.push_str(&format!(
                "r {} {} D 2023-02-26 00:00:00 10.0.0.1 9001 0\n",
                r.nickname, r.fingerprint
            ));
            let mut flags = vec!["Running"];
            if r.entry_capable {
                flags.push("Guard");
            }
            if r.exit_capable {
                flags.push("Exit");
            }
            doc.push_str(&format!("s {}\nw Bandwidth={}\n", flags.join(" "), r.bandwidth_kbps));
        }
        doc
    }

    proptest! {
        #[test]
        fn native_round_trip(net in arb_network()) {
            prop_assert_eq!(load_network(&save_network(&net)).unwrap(), net);
        }

        #[test]
        fn consensus_parse_is_idempotent(net in arb_network()) {
            let plain = net.with_tee_flags(&vec![false; net.len()]);
            let parsed = parse_consensus(&to_consensus(&plain)).unwrap();
            prop_assert_eq!(&parsed, &plain);
            prop_assert_eq!(parse_consensus(&to_consensus(&parsed)).unwrap(), parsed.clone());
            let c = parsed.counts();
            prop_assert!(c.entry <= c.total && c.exit <= c.total);
            prop_assert_eq!(c.dual, parsed.relays().iter().filter(|r| r.is_dual()).count());
            prop_assert_eq!(c.tee, 0);
        }
    }
}
