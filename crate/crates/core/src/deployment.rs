//! TEE assignment under the deployment scenarios.
//!
//! Every scenario realizes a fixed number of TEE relays rather than
//! independent per-relay coin flips. The first three scenarios draw
//! `round(p * m)` relays without replacement with per-relay weights
//! (uniform, bandwidth, inverse bandwidth). The circuit-position scenario
//! draws uniformly inside capability classes, in entry, middle, exit order,
//! and unions the picks.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

use crate::model::NetworkModel;

#[derive(Debug, Error, PartialEq)]
pub enum DeploymentError {
    #[error("cannot draw {requested} items: only {available} have positive weight")]
    InsufficientPositiveWeight { requested: usize, available: usize },
    #[error("invalid deployment scenario: {0}")]
    InvalidScenario(String),
    #[error("cannot deploy TEEs on an empty network")]
    EmptyNetwork,
}

/// Which capability classes a circuit-position deployment targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PositionDistribution {
    Entry,
    Exit,
    EntryExit,
    EntryMiddleExit,
}

impl PositionDistribution {
    pub const ALL: [PositionDistribution; 4] = [
        PositionDistribution::Entry,
        PositionDistribution::Exit,
        PositionDistribution::EntryExit,
        PositionDistribution::EntryMiddleExit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PositionDistribution::Entry => "entry",
            PositionDistribution::Exit => "exit",
            PositionDistribution::EntryExit => "entry-exit",
            PositionDistribution::EntryMiddleExit => "entry-middle-exit",
        }
    }

    /// Which of (w_e, w_m, w_x) the distribution uses.
    pub fn uses(self) -> (bool, bool, bool) {
        match self {
            PositionDistribution::Entry => (true, false, false),
            PositionDistribution::Exit => (false, false, true),
            PositionDistribution::EntryExit => (true, false, true),
            PositionDistribution::EntryMiddleExit => (true, true, true),
        }
    }
}

impl FromStr for PositionDistribution {
    type Err = DeploymentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PositionDistribution::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| DeploymentError::InvalidScenario(format!("unknown position distribution {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeploymentScenario {
    Random {
        p: f64,
    },
    BandwidthWeighted {
        p: f64,
    },
    InverseBandwidthWeighted {
        p: f64,
    },
    CircuitPositionWeighted {
        distribution: PositionDistribution,
        w_e: f64,
        w_m: f64,
        w_x: f64,
    },
}

fn fraction_ok(v: f64) -> bool {
    (0.0..=1.0).contains(&v)
}

impl DeploymentScenario {
    pub fn validate(&self) -> Result<(), DeploymentError> {
        let bad = |m: String| Err(DeploymentError::InvalidScenario(m));
        match *self {
            DeploymentScenario::Random { p }
            | DeploymentScenario::BandwidthWeighted { p }
            | DeploymentScenario::InverseBandwidthWeighted { p } => {
                if !fraction_ok(p) {
                    return bad(format!("p = {p} is not in [0, 1]"));
                }
            }
            DeploymentScenario::CircuitPositionWeighted {
                distribution,
                w_e,
                w_m,
                w_x,
            } => {
                let (ue, um, ux) = distribution.uses();
                for (name, w, used) in [("w_e", w_e, ue), ("w_m", w_m, um), ("w_x", w_x, ux)] {
                    if !fraction_ok(w) {
                        return bad(format!("{name} = {w} is not in [0, 1]"));
                    }
                    if !used && w != 0.0 {
                        return bad(format!("{name} must be 0 for the {} distribution", distribution.name()));
                    }
                }
            }
        }
        Ok(())
    }

    /// Scenario family name as used on the command line.
    pub fn kind(&self) -> String {
        match self {
            DeploymentScenario::Random { .. } => "random".into(),
            DeploymentScenario::BandwidthWeighted { .. } => "bandwidth".into(),
            DeploymentScenario::InverseBandwidthWeighted { .. } => "inverse-bandwidth".into(),
            DeploymentScenario::CircuitPositionWeighted { distribution, .. } => {
                format!("position:{}", distribution.name())
            }
        }
    }

    /// Parameter values, e.g. `p=0.1` or `we=0.1 wx=0.7`. Unused weights are omitted.
    pub fn params(&self) -> String {
        match *self {
            DeploymentScenario::Random { p }
            | DeploymentScenario::BandwidthWeighted { p }
            | DeploymentScenario::InverseBandwidthWeighted { p } => format!("p={p}"),
            DeploymentScenario::CircuitPositionWeighted {
                distribution,
                w_e,
                w_m,
                w_x,
            } => {
                let (ue, um, ux) = distribution.uses();
                let mut parts = Vec::new();
                if ue {
                    parts.push(format!("we={w_e}"));
                }
                if um {
                    parts.push(format!("wm={w_m}"));
                }
                if ux {
                    parts.push(format!("wx={w_x}"));
                }
                parts.join(" ")
            }
        }
    }
}

impl fmt::Display for DeploymentScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.kind(), self.params())
    }
}

/// `round(fraction * n)` with halves rounded up. The small epsilon absorbs
/// binary representation error of decimal fractions such as `0.35 * 10`.
pub fn fraction_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64) + 0.5 + 1e-9).floor().min(n as f64) as usize
}

/// Complete binary tree of partial sums over the weights. Internal nodes
/// are recomputed from their children on every update so removals never
/// accumulate rounding drift.
struct SumTree {
    leaves: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    fn new(weights: &[f64]) -> Self {
        let leaves = weights.len().next_power_of_two().max(1);
        let mut nodes = vec![0.0; 2 * leaves];
        nodes[leaves..leaves + weights.len()].copy_from_slice(weights);
        for i in (1..leaves).rev() {
            nodes[i] = nodes[2 * i] + nodes[2 * i + 1];
        }
        SumTree { leaves, nodes }
    }

    fn total(&self) -> f64 {
        self.nodes[1]
    }

    fn clear(&mut self, index: usize) {
        let mut i = self.leaves + index;
        self.nodes[i] = 0.0;
        while i > 1 {
            i /= 2;
            self.nodes[i] = self.nodes[2 * i] + self.nodes[2 * i + 1];
        }
    }

    /// Leaf whose cumulative interval contains `target`, never a zero-weight leaf.
    fn find(&self, mut target: f64) -> usize {
        let mut i = 1;
        while i < self.leaves {
            let (left, right) = (self.nodes[2 * i], self.nodes[2 * i + 1]);
            if right <= 0.0 || (target < left && left > 0.0) {
                i *= 2;
            } else {
                target -= left;
                i = 2 * i + 1;
            }
        }
        i - self.leaves
    }
}

/// Draws `k` distinct indices by `k` successive draws, each proportional to
/// weight among the indices not yet drawn. Returned in draw order.
pub fn weighted_sample_without_replacement<R: Rng + ?Sized>(
    weights: &[f64],
    k: usize,
    rng: &mut R,
) -> Result<Vec<usize>, DeploymentError> {
    let available = weights.iter().filter(|&&w| w > 0.0).count();
    if k > available {
        return Err(DeploymentError::InsufficientPositiveWeight {
            requested: k,
            available,
        });
    }
    let clean: Vec<f64> = weights.iter().map(|&w| if w > 0.0 { w } else { 0.0 }).collect();
    let mut tree = SumTree::new(&clean);
    let mut picked = Vec::with_capacity(k);
    for _ in 0..k {
        let target = rng.random::<f64>() * tree.total();
        let i = tree.find(target);
        debug_assert!(clean[i] > 0.0);
        tree.clear(i);
        picked.push(i);
    }
    Ok(picked)
}

/// Returns a copy of `network` with TEE flags assigned by `scenario`.
/// Bandwidths, capabilities and relay order are untouched; existing TEE
/// flags are replaced.
pub fn assign_tees<R: Rng + ?Sized>(
    network: &NetworkModel,
    scenario: &DeploymentScenario,
    rng: &mut R,
) -> Result<NetworkModel, DeploymentError> {
    scenario.validate()?;
    if network.is_empty() {
        return Err(DeploymentError::EmptyNetwork);
    }
    let relays = network.relays();
    let m = relays.len();
    let mut tee = vec![false; m];

    let mut weighted = |weights: Vec<f64>, p: f64, tee: &mut [bool]| -> Result<(), DeploymentError> {
        for i in weighted_sample_without_replacement(&weights, fraction_count(p, m), rng)? {
            tee[i] = true;
        }
        Ok(())
    };

    match *scenario {
        DeploymentScenario::Random { p } => weighted(vec![1.0; m], p, &mut tee)?,
        DeploymentScenario::BandwidthWeighted { p } => {
            weighted(relays.iter().map(|r| r.bandwidth_kbps as f64).collect(), p, &mut tee)?
        }
        DeploymentScenario::InverseBandwidthWeighted { p } => weighted(
            relays.iter().map(|r| 1.0 / r.bandwidth_kbps.max(1) as f64).collect(),
            p,
            &mut tee,
        )?,
        DeploymentScenario::CircuitPositionWeighted { w_e, w_m, w_x, .. } => {
            let entry: Vec<usize> = (0..m).filter(|&i| relays[i].entry_capable).collect();
            let all: Vec<usize> = (0..m).collect();
            let exit: Vec<usize> = (0..m).filter(|&i| relays[i].exit_capable).collect();
            for (class, w) in [(entry, w_e), (all, w_m), (exit, w_x)] {
                let k = fraction_count(w, class.len());
                for j in weighted_sample_without_replacement(&vec![1.0; class.len()], k, rng)? {
                    tee[class[j]] = true;
                }
            }
        }
    }
    Ok(network.with_tee_flags(&tee))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consensus::{generate_synthetic, BandwidthDistribution, SyntheticNetworkSpec};
    use crate::model::Relay;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn exhaustive_draw() {
        let got: BTreeSet<_> = weighted_sample_without_replacement(&[1.0, 1.0, 1.0], 3, &mut rng(1))
            .unwrap()
            .into_iter()
            .collect();
        assert_eq!(got, BTreeSet::from([0, 1, 2]));
    }

    #[test]
    fn single_positive_weight() {
        for s in 0..20 {
            assert_eq!(
                weighted_sample_without_replacement(&[0.0, 5.0, 0.0], 1, &mut rng(s)).unwrap(),
                [1]
            );
        }
    }

    #[test]
    fn insufficient_weight() {
        assert_eq!(
            weighted_sample_without_replacement(&[0.0, 5.0, 0.0], 2, &mut rng(0)),
            Err(DeploymentError::InsufficientPositiveWeight {
                requested: 2,
                available: 1
            })
        );
    }

    #[test]
    fn bernoulli_frequency() {
        // exact probability 3/4
        let mut r = rng(42);
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| weighted_sample_without_replacement(&[1.0, 3.0], 1, &mut r).unwrap()[0] == 1)
            .count();
        let f = hits as f64 / n as f64;
        assert!((f - 0.75).abs() <= 0.01, "{f}");
    }

    /// Exact probability that a successive-draw sample of size 2 from
    /// weights (1, 2, 3, 4) contains each index, by enumerating ordered pairs.
    fn pair_inclusion_oracle(w: &[f64]) -> Vec<f64> {
        let total: f64 = w.iter().sum();
        let mut inc = vec![0.0; w.len()];
        for i in 0..w.len() {
            for j in 0..w.len() {
                if i != j {
                    let p = w[i] / total * w[j] / (total - w[i]);
                    inc[i] += p;
                    inc[j] += p;
                }
            }
        }
        inc
    }

    #[test]
    fn second_draw_matches_successive_draw_oracle() {
        let w = [1.0, 2.0, 3.0, 4.0];
        let expect = pair_inclusion_oracle(&w);
        let mut r = rng(9);
        let n = 100_000;
        let mut seen = [0usize; 4];
        for _ in 0..n {
            for i in weighted_sample_without_replacement(&w, 2, &mut r).unwrap() {
                seen[i] += 1;
            }
        }
        for (s, e) in seen.iter().zip(&expect) {
            assert!((*s as f64 / n as f64 - e).abs() < 0.01, "{seen:?} vs {expect:?}");
        }
    }

    fn small_net() -> NetworkModel {
        generate_synthetic(&SyntheticNetworkSpec {
            total_relays: 200,
            entry_capable_count: 100,
            exit_capable_count: 60,
            dual_capable_count: 30,
            bandwidth: BandwidthDistribution::Uniform { lo: 10.0, hi: 10_000.0 },
            seed: 3,
        })
        .unwrap()
    }

    #[test]
    fn random_extremes() {
        let net = small_net();
        let none = assign_tees(&net, &DeploymentScenario::Random { p: 0.0 }, &mut rng(0)).unwrap();
        assert_eq!(none.counts().tee, 0);
        let all = assign_tees(&net, &DeploymentScenario::Random { p: 1.0 }, &mut rng(0)).unwrap();
        assert_eq!(all.counts().tee, net.len());
    }

    #[test]
    fn exact_counts_and_untouched_fields() {
        let net = small_net();
        for p in [0.01, 0.1, 0.35, 0.5, 0.99] {
            for sc in [
                DeploymentScenario::Random { p },
                DeploymentScenario::BandwidthWeighted { p },
                DeploymentScenario::InverseBandwidthWeighted { p },
            ] {
                let out = assign_tees(&net, &sc, &mut rng(5)).unwrap();
                assert_eq!(out.counts().tee, fraction_count(p, net.len()), "{sc}");
                for (a, b) in net.relays().iter().zip(out.relays()) {
                    assert_eq!(a.fingerprint, b.fingerprint);
                    assert_eq!(a.bandwidth_kbps, b.bandwidth_kbps);
                    assert_eq!((a.entry_capable, a.exit_capable), (b.entry_capable, b.exit_capable));
                }
            }
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let net = small_net();
        let sc = DeploymentScenario::BandwidthWeighted { p: 0.3 };
        assert_eq!(
            assign_tees(&net, &sc, &mut rng(11)).unwrap(),
            assign_tees(&net, &sc, &mut rng(11)).unwrap()
        );
    }

    #[test]
    fn bandwidth_weighting_favours_large_relays() {
        let net = NetworkModel::new(
            (0..10)
                .map(|i| {
                    Relay::new(
                        format!("R{i}"),
                        "r",
                        if i == 0 {
                            1
                        } else if i == 9 {
                            1000
                        } else {
                            100
                        },
                    )
                })
                .collect(),
        )
        .unwrap();
        let (mut lo, mut hi) = (0, 0);
        for s in 0..2000 {
            let out = assign_tees(&net, &DeploymentScenario::BandwidthWeighted { p: 0.2 }, &mut rng(s)).unwrap();
            lo += out.relays()[0].tee as usize;
            hi += out.relays()[9].tee as usize;
        }
        assert!(hi > lo, "max-bandwidth {hi} vs min-bandwidth {lo}");

        let (mut lo, mut hi) = (0, 0);
        for s in 0..2000 {
            let out = assign_tees(
                &net,
                &DeploymentScenario::InverseBandwidthWeighted { p: 0.2 },
                &mut rng(s),
            )
            .unwrap();
            lo += out.relays()[0].tee as usize;
            hi += out.relays()[9].tee as usize;
        }
        assert!(lo > hi);
    }

    #[test]
    fn bandwidth_weighted_needs_positive_bandwidth() {
        let net = NetworkModel::new(vec![Relay::new("A", "a", 0), Relay::new("B", "b", 0)]).unwrap();
        assert!(matches!(
            assign_tees(&net, &DeploymentScenario::BandwidthWeighted { p: 0.5 }, &mut rng(0)),
            Err(DeploymentError::InsufficientPositiveWeight { .. })
        ));
        // inverse weighting clamps to 1 so zero-bandwidth relays remain drawable
        let out = assign_tees(
            &net,
            &DeploymentScenario::InverseBandwidthWeighted { p: 1.0 },
            &mut rng(0),
        )
        .unwrap();
        assert_eq!(out.counts().tee, 2);
    }

    #[test]
    fn scenario_validation() {
        assert!(DeploymentScenario::Random { p: 1.5 }.validate().is_err());
        let sc = DeploymentScenario::CircuitPositionWeighted {
            distribution: PositionDistribution::Entry,
            w_e: 0.1,
            w_m: 0.0,
            w_x: 0.2,
        };
        assert!(sc.validate().is_err());
        assert!(assign_tees(
            &NetworkModel::default(),
            &DeploymentScenario::Random { p: 0.5 },
            &mut rng(0)
        )
        .is_err());
    }

    #[test]
    fn position_entry_only_touches_entry_class() {
        let net = small_net();
        let sc = DeploymentScenario::CircuitPositionWeighted {
            distribution: PositionDistribution::Entry,
            w_e: 0.3,
            w_m: 0.0,
            w_x: 0.0,
        };
        let out = assign_tees(&net, &sc, &mut rng(1)).unwrap();
        let c = out.counts();
        assert_eq!(c.entry_tee, 30);
        assert_eq!(c.tee, 30);
    }

    #[test]
    fn position_overlap_raises_realized_entry_fraction() {
        // half of the exits are also entry-capable
        let net = generate_synthetic(&SyntheticNetworkSpec {
            total_relays: 1000,
            entry_capable_count: 400,
            exit_capable_count: 200,
            dual_capable_count: 100,
            bandwidth: BandwidthDistribution::Constant(100),
            seed: 4,
        })
        .unwrap();
        let sc = DeploymentScenario::CircuitPositionWeighted {
            distribution: PositionDistribution::EntryExit,
            w_e: 0.1,
            w_m: 0.0,
            w_x: 0.1,
        };
        let trials = 500;
        let mut sum = 0.0;
        for s in 0..trials {
            let c = assign_tees(&net, &sc, &mut rng(s)).unwrap().counts();
            assert!(c.entry_tee >= 40);
            assert!(c.exit_tee >= 20);
            sum += c.entry_tee as f64 / c.entry as f64;
        }
        let mean = sum / trials as f64;
        // 40 entry picks plus ~ 20 * 100/200 * (1 - 0.1) duals not already chosen
        assert!(mean > 0.11, "{mean}");
    }

    #[test]
    fn rounding_is_half_up() {
        assert_eq!(fraction_count(0.5, 5), 3);
        assert_eq!(fraction_count(0.35, 10), 4);
        assert_eq!(fraction_count(0.01, 6356), 64);
        assert_eq!(fraction_count(1.0, 7), 7);
        assert_eq!(fraction_count(0.0, 7), 0);
    }
}
