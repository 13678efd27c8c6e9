//! Security, performance and privacy metrics over circuits and networks.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::deployment::fraction_count;
use crate::model::{Circuit, Fingerprint, NetworkModel, Position, Relay};
use crate::selection::{complies, SecurityPolicy};

/// Networks larger than this are refused by [`enumerate_circuits`].
pub const ENUMERATION_LIMIT: usize = 200;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("relay {0} has no load entry")]
    MissingLoadEntry(Fingerprint),
    #[error("median of an empty list")]
    EmptyInput,
    #[error("network has {relays} relays; enumeration is limited to {limit}")]
    NetworkTooLarge { relays: usize, limit: usize },
}

/// Number of circuits each relay appears in.
pub type CircuitLoad<'a> = HashMap<&'a Fingerprint, usize>;

pub fn circuit_load<'a>(circuits: &[Circuit<'a>]) -> CircuitLoad<'a> {
    let mut load = HashMap::new();
    for c in circuits {
        for r in c.hops() {
            *load.entry(&r.fingerprint).or_insert(0) += 1;
        }
    }
    load
}

/// Minimum over the hops of bandwidth divided by load.
pub fn expected_bandwidth(circuit: &Circuit<'_>, load: &CircuitLoad<'_>) -> Result<f64, MetricsError> {
    circuit.hops().iter().try_fold(f64::INFINITY, |best, r| {
        let n = load
            .get(&r.fingerprint)
            .copied()
            .filter(|&n| n > 0)
            .ok_or_else(|| MetricsError::MissingLoadEntry(r.fingerprint.clone()))?;
        Ok(best.min(r.bandwidth_kbps as f64 / n as f64))
    })
}

pub fn median(values: &[f64]) -> Result<f64, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Ok(if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceReport {
    pub median_kbps: f64,
    /// One entry per circuit, in batch order.
    pub expected_kbps: Vec<f64>,
    pub load: BTreeMap<Fingerprint, usize>,
}

/// Load-adjusted expected bandwidth over one batch of circuits.
pub fn performance_report(circuits: &[Circuit<'_>]) -> Result<PerformanceReport, MetricsError> {
    let load = circuit_load(circuits);
    let expected_kbps = circuits
        .iter()
        .map(|c| expected_bandwidth(c, &load))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PerformanceReport {
        median_kbps: median(&expected_kbps)?,
        expected_kbps,
        load: load.into_iter().map(|(fp, n)| (fp.clone(), n)).collect(),
    })
}

/// How many circuits of a batch comply with each policy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecurityReport {
    pub circuits: usize,
    pub compliant: BTreeMap<SecurityPolicy, usize>,
}

impl SecurityReport {
    /// `None` for an empty batch.
    pub fn fraction(&self, policy: SecurityPolicy) -> Option<f64> {
        (self.circuits > 0).then(|| self.compliant[&policy] as f64 / self.circuits as f64)
    }

    /// Compliance can only shrink as the policy requires more TEE positions.
    pub fn is_monotone(&self) -> bool {
        SecurityPolicy::ALL.iter().all(|&a| {
            SecurityPolicy::ALL
                .iter()
                .all(|&b| !a.is_at_least(b) || self.compliant[&a] <= self.compliant[&b])
        }) && self.compliant[&SecurityPolicy::NoPolicy] == self.circuits
    }
}

pub fn security_compliance(circuits: &[Circuit<'_>]) -> SecurityReport {
    let compliant = SecurityPolicy::ALL
        .into_iter()
        .map(|p| (p, circuits.iter().filter(|c| complies(c, p)).count()))
        .collect();
    SecurityReport {
        circuits: circuits.len(),
        compliant,
    }
}

/// Exact number of distinct compliant circuits, by class counting.
///
/// With `E`, `X`, `T` the entry-capable, exit-capable and TEE sets, the
/// (entry, exit) pairs are `|E'|·|X'| - |E'∩X'|` for the policy-filtered
/// sets `E'`, `X'`, and any relay other than those two may be the middle
/// (any TEE relay other than those two under the all-TEE policy).
pub fn count_unique_circuits(network: &NetworkModel, policy: SecurityPolicy) -> u128 {
    let c = network.counts();
    let (entry, exit, both) = match (
        policy.tee_required(Position::Entry),
        policy.tee_required(Position::Exit),
    ) {
        (false, false) => (c.entry, c.exit, c.dual),
        (true, false) => (c.entry_tee, c.exit, c.dual_tee),
        (false, true) => (c.entry, c.exit_tee, c.dual_tee),
        (true, true) => (c.entry_tee, c.exit_tee, c.dual_tee),
    };
    let middle_pool = if policy.tee_required(Position::Middle) {
        c.tee
    } else {
        c.total
    };
    let pairs = entry as u128 * exit as u128 - both as u128;
    pairs * middle_pool.saturating_sub(2) as u128
}

/// Every compliant distinct triple, by exhaustive search. Test oracle for
/// [`count_unique_circuits`].
pub fn enumerate_circuits(network: &NetworkModel, policy: SecurityPolicy) -> Result<Vec<Circuit<'_>>, MetricsError> {
    let relays = network.relays();
    if relays.len() > ENUMERATION_LIMIT {
        return Err(MetricsError::NetworkTooLarge {
            relays: relays.len(),
            limit: ENUMERATION_LIMIT,
        });
    }
    let mut out = Vec::new();
    for entry in relays {
        for middle in relays {
            for exit in relays {
                let c = Circuit { entry, middle, exit };
                if c.is_valid() && complies(&c, policy) {
                    out.push(c);
                }
            }
        }
    }
    Ok(out)
}

/// Marks `round(p·|class|)` relays TEE-based in each of the four disjoint
/// capability classes (entry and exit, entry only, exit only, middle only),
/// taking the earliest relays of each class in network order.
pub fn uniform_capability_deployment(network: &NetworkModel, p: f64) -> NetworkModel {
    let class = |r: &Relay| (r.entry_capable, r.exit_capable);
    let mut sizes: HashMap<(bool, bool), usize> = HashMap::new();
    for r in network.relays() {
        *sizes.entry(class(r)).or_insert(0) += 1;
    }
    let mut quota: HashMap<(bool, bool), usize> = sizes.into_iter().map(|(k, n)| (k, fraction_count(p, n))).collect();
    let tee: Vec<bool> = network
        .relays()
        .iter()
        .map(|r| {
            let left = quota.get_mut(&class(r)).expect("every class counted");
            let take = *left > 0;
            *left -= take as usize;
            take
        })
        .collect();
    network.with_tee_flags(&tee)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrivacyReport {
    pub counts: BTreeMap<SecurityPolicy, u128>,
}

impl PrivacyReport {
    pub fn is_monotone(&self) -> bool {
        SecurityPolicy::ALL.iter().all(|&a| {
            SecurityPolicy::ALL
                .iter()
                .all(|&b| !a.is_at_least(b) || self.counts[&a] <= self.counts[&b])
        })
    }
}

pub fn privacy_report(network: &NetworkModel) -> PrivacyReport {
    PrivacyReport {
        counts: SecurityPolicy::ALL
            .into_iter()
            .map(|p| (p, count_unique_circuits(network, p)))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consensus::{generate_synthetic, BandwidthDistribution, SyntheticNetworkSpec};
    use proptest::prelude::*;

    fn relay(fp: &str, bw: u64) -> Relay {
        Relay::new(fp, fp, bw)
    }

    #[test]
    fn load_counts() {
        let r: Vec<Relay> = ["A", "B", "C", "D", "E"].iter().map(|f| relay(f, 1)).collect();
        assert!(circuit_load(&[]).is_empty());
        let c1 = Circuit {
            entry: &r[0],
            middle: &r[1],
            exit: &r[2],
        };
        let l = circuit_load(&[c1]);
        assert_eq!(l.len(), 3);
        assert!(l.values().all(|&n| n == 1));
        let c2 = Circuit {
            entry: &r[0],
            middle: &r[3],
            exit: &r[4],
        };
        let l = circuit_load(&[c1, c2]);
        assert_eq!(l[&r[0].fingerprint], 2);
        assert_eq!(l.values().sum::<usize>(), 6);
    }

    #[test]
    fn expected_bandwidth_cases() {
        let (a, b, c) = (relay("A", 100), relay("B", 200), relay("C", 300));
        let circ = Circuit {
            entry: &a,
            middle: &b,
            exit: &c,
        };
        assert_eq!(expected_bandwidth(&circ, &circuit_load(&[circ])).unwrap(), 100.0);

        let (e, m, x) = (relay("E", 100), relay("M", 300), relay("X", 90));
        let circ = Circuit {
            entry: &e,
            middle: &m,
            exit: &x,
        };
        let load: CircuitLoad = [(&e.fingerprint, 2), (&m.fingerprint, 1), (&x.fingerprint, 1)].into();
        assert_eq!(expected_bandwidth(&circ, &load).unwrap(), 50.0);

        let mut partial = load.clone();
        partial.remove(&x.fingerprint);
        assert_eq!(
            expected_bandwidth(&circ, &partial),
            Err(MetricsError::MissingLoadEntry(x.fingerprint.clone()))
        );

        let (p, q, r) = (relay("P", 64), relay("Q", 64), relay("R", 64));
        let circ = Circuit {
            entry: &p,
            middle: &q,
            exit: &r,
        };
        let load: CircuitLoad = [(&p.fingerprint, 4), (&q.fingerprint, 4), (&r.fingerprint, 4)].into();
        assert_eq!(expected_bandwidth(&circ, &load).unwrap(), 16.0);
    }

    #[test]
    fn median_cases() {
        assert_eq!(median(&[5.0]).unwrap(), 5.0);
        assert_eq!(median(&[1.0, 2.0, 3.0, 4.0]).unwrap(), 2.5);
        assert_eq!(median(&[3.0, 1.0, 2.0]).unwrap(), 2.0);
        assert_eq!(median(&[]), Err(MetricsError::EmptyInput));
    }

    #[test]
    fn compliance_extremes() {
        let all: Vec<Relay> = (0..3).map(|i| relay(&i.to_string(), 1).with_tee(true)).collect();
        let c = Circuit {
            entry: &all[0],
            middle: &all[1],
            exit: &all[2],
        };
        let rep = security_compliance(&[c, c]);
        assert!(SecurityPolicy::ALL.iter().all(|&p| rep.fraction(p) == Some(1.0)));

        let none: Vec<Relay> = (0..3).map(|i| relay(&i.to_string(), 1)).collect();
        let c = Circuit {
            entry: &none[0],
            middle: &none[1],
            exit: &none[2],
        };
        let rep = security_compliance(&[c]);
        assert_eq!(rep.fraction(SecurityPolicy::NoPolicy), Some(1.0));
        assert!(SecurityPolicy::ALL[1..].iter().all(|&p| rep.fraction(p) == Some(0.0)));
        assert!(rep.is_monotone());
        assert_eq!(security_compliance(&[]).fraction(SecurityPolicy::Entry), None);
    }

    /// A network with the given class sizes and TEE members per class.
    /// Classes: (entry-and-exit, entry-only, exit-only, middle-only).
    fn class_network(sizes: [usize; 4], tee: [usize; 4]) -> NetworkModel {
        let caps = [(true, true), (true, false), (false, true), (false, false)];
        let mut relays = Vec::new();
        for k in 0..4 {
            for i in 0..sizes[k] {
                relays.push(
                    Relay::new(format!("{k}-{i}"), "r", 1)
                        .with_entry(caps[k].0)
                        .with_exit(caps[k].1)
                        .with_tee(i < tee[k]),
                );
            }
        }
        NetworkModel::new(relays).unwrap()
    }

    #[test]
    fn baseline_count() {
        // m = 6356, |E| = 3179, |X| = 1668, |E∩X| = 849
        let net = class_network([849, 3179 - 849, 1668 - 849, 6356 - 3179 - 1668 + 849], [0; 4]);
        assert_eq!(count_unique_circuits(&net, SecurityPolicy::NoPolicy), 33_687_147_942);
        assert_eq!((3179u128 * 1668 - 849) * 6354, 33_687_147_942);
    }

    #[test]
    fn tiny_networks() {
        let net = NetworkModel::new(vec![
            relay("A", 1).with_entry(true),
            relay("B", 1).with_exit(true),
            relay("C", 1),
        ])
        .unwrap();
        assert_eq!(count_unique_circuits(&net, SecurityPolicy::NoPolicy), 1);
        let all = enumerate_circuits(&net, SecurityPolicy::NoPolicy).unwrap();
        assert_eq!(all.len(), 1);
        assert_eq!(
            [
                &all[0].entry.fingerprint,
                &all[0].middle.fingerprint,
                &all[0].exit.fingerprint
            ],
            [&"A".into(), &"C".into(), &"B".into()]
        );
        assert!(enumerate_circuits(&net, SecurityPolicy::Entry).unwrap().is_empty());

        let two_tee = class_network([2, 0, 0, 3], [2, 0, 0, 0]);
        assert_eq!(count_unique_circuits(&two_tee, SecurityPolicy::EntryMiddleExit), 0);
        assert!(enumerate_circuits(&two_tee, SecurityPolicy::EntryMiddleExit)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn enumeration_limit() {
        let net = class_network([0, 0, 0, 201], [0; 4]);
        assert_eq!(
            enumerate_circuits(&net, SecurityPolicy::NoPolicy).map(|v| v.len()),
            Err(MetricsError::NetworkTooLarge {
                relays: 201,
                limit: 200
            })
        );
    }

    #[test]
    fn uniform_deployment_full_and_empty() {
        let net = class_network([5, 7, 3, 9], [0; 4]);
        let full = privacy_report(&uniform_capability_deployment(&net, 1.0));
        let base = full.counts[&SecurityPolicy::NoPolicy];
        assert!(full.counts.values().all(|&c| c == base));

        let empty = privacy_report(&uniform_capability_deployment(&net, 0.0));
        assert_eq!(empty.counts[&SecurityPolicy::NoPolicy], base);
        assert!(SecurityPolicy::ALL[1..].iter().all(|p| empty.counts[p] == 0));

        let half = uniform_capability_deployment(&net, 0.5).counts();
        // round(2.5) + round(3.5) + round(1.5) + round(4.5)
        assert_eq!(half.tee, 3 + 4 + 2 + 5);
        assert_eq!(half.dual_tee, 3);
    }

    #[test]
    fn performance_report_invariants() {
        let r: Vec<Relay> = (0..5).map(|i| relay(&format!("R{i}"), 100 * (i + 1))).collect();
        let circuits = [
            Circuit {
                entry: &r[0],
                middle: &r[1],
                exit: &r[2],
            },
            Circuit {
                entry: &r[3],
                middle: &r[1],
                exit: &r[4],
            },
        ];
        let rep = performance_report(&circuits).unwrap();
        assert_eq!(rep.load.values().sum::<usize>(), 6);
        assert_eq!(rep.expected_kbps, [100.0, 100.0]);
        assert!(performance_report(&[]).is_err());
    }

    fn arb_network(max: usize) -> impl Strategy<Value = NetworkModel> {
        proptest::collection::vec((0u64..5, any::<bool>(), any::<bool>(), any::<bool>()), 0..=max).prop_map(|rows| {
            NetworkModel::new(
                rows.into_iter()
                    .enumerate()
                    .map(|(i, (bw, e, x, t))| {
                        Relay::new(format!("F{i}"), "r", bw)
                            .with_entry(e)
                            .with_exit(x)
                            .with_tee(t)
                    })
                    .collect(),
            )
            .unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(120))]

        #[test]
        fn closed_form_matches_enumeration(net in arb_network(14)) {
            for p in SecurityPolicy::ALL {
                prop_assert_eq!(count_unique_circuits(&net, p), enumerate_circuits(&net, p).unwrap().len() as u128);
            }
        }

        #[test]
        fn privacy_chain_and_reorder_invariance(net in arb_network(30), seed in any::<u64>()) {
            let rep = privacy_report(&net);
            prop_assert!(rep.is_monotone());
            let mut relays = net.relays().to_vec();
            use rand::{seq::SliceRandom, SeedableRng};
            relays.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(privacy_report(&NetworkModel::new(relays).unwrap()), rep);
        }

        #[test]
        fn expected_bandwidth_bounded_by_min_hop(loads in proptest::array::uniform3(1usize..5), bws in proptest::array::uniform3(1u64..1000)) {
            let r: Vec<Relay> = (0..3).map(|i| relay(&i.to_string(), bws[i])).collect();
            let c = Circuit { entry: &r[0], middle: &r[1], exit: &r[2] };
            let load: CircuitLoad = (0..3).map(|i| (&r[i].fingerprint, loads[i])).collect();
            let got = expected_bandwidth(&c, &load).unwrap();
            let min = *bws.iter().min().unwrap() as f64;
            prop_assert!(got <= min);
            if loads == [1, 1, 1] {
                prop_assert_eq!(got, min);
            }
        }
    }

    #[test]
    fn synthetic_oracle_equivalence() {
        for seed in 0..30 {
            let spec = SyntheticNetworkSpec {
                total_relays: 20,
                entry_capable_count: 9,
                exit_capable_count: 6,
                dual_capable_count: 3,
                bandwidth: BandwidthDistribution::Constant(1),
                seed,
            };
            let net = uniform_capability_deployment(&generate_synthetic(&spec).unwrap(), 0.4);
            for p in SecurityPolicy::ALL {
                assert_eq!(
                    count_unique_circuits(&net, p),
                    enumerate_circuits(&net, p).unwrap().len() as u128
                );
            }
        }
    }
}
