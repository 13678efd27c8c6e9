//! Security policies and bandwidth-weighted relay selection with per-position
//! TEE requirements.
//!
//! Hops are drawn entry first, then exit, then middle, each excluding the
//! relays already chosen. The middle hop is unconstrained, so drawing it
//! last never steals the only relay able to fill a constrained position.
//!
//! [`build_circuit`] scans the network at every hop. [`CircuitBuilder`]
//! precomputes cumulative bandwidth tables once per network and returns the
//! same relay as the scan for the same random stream, so the two can be
//! used interchangeably.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

use crate::model::{eligible, Circuit, Fingerprint, NetworkModel, Position, Relay};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SelectionError {
    #[error("no candidate relays to select from")]
    EmptyCandidates,
    #[error("no eligible relay for the {position} position")]
    NoEligibleRelay { position: Position },
    #[error("unknown security policy {0:?} (expected none, entry, exit, entry-exit or entry-middle-exit)")]
    UnknownPolicy(String),
}

/// Which circuit positions must be TEE-based.
///
/// `Ord` is declaration order and only serves map keys; the requirement
/// lattice is [`SecurityPolicy::is_at_least`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SecurityPolicy {
    NoPolicy,
    Entry,
    Exit,
    EntryExit,
    EntryMiddleExit,
}

impl SecurityPolicy {
    pub const ALL: [SecurityPolicy; 5] = [
        SecurityPolicy::NoPolicy,
        SecurityPolicy::Entry,
        SecurityPolicy::Exit,
        SecurityPolicy::EntryExit,
        SecurityPolicy::EntryMiddleExit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SecurityPolicy::NoPolicy => "none",
            SecurityPolicy::Entry => "entry",
            SecurityPolicy::Exit => "exit",
            SecurityPolicy::EntryExit => "entry-exit",
            SecurityPolicy::EntryMiddleExit => "entry-middle-exit",
        }
    }

    pub fn tee_required(self, position: Position) -> bool {
        use Position as P;
        use SecurityPolicy as S;
        matches!(
            (self, position),
            (S::Entry, P::Entry) | (S::Exit, P::Exit) | (S::EntryExit, P::Entry | P::Exit) | (S::EntryMiddleExit, _)
        )
    }

    pub fn required_positions(self) -> BTreeSet<Position> {
        Position::ALL.into_iter().filter(|&p| self.tee_required(p)).collect()
    }

    /// True when `self` requires TEEs at every position `other` does.
    pub fn is_at_least(self, other: SecurityPolicy) -> bool {
        other.required_positions().is_subset(&self.required_positions())
    }

    /// Stable small integer, used to derive random substreams.
    pub fn ordinal(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for SecurityPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SecurityPolicy {
    type Err = SelectionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SecurityPolicy::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| SelectionError::UnknownPolicy(s.to_owned()))
    }
}

/// Order in which hops are drawn.
pub const SELECTION_ORDER: [Position; 3] = [Position::Entry, Position::Exit, Position::Middle];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AttackClass {
    Replay,
    Fingerprinting,
    OnionService,
    BadApple,
    BandwidthInflation,
}

impl AttackClass {
    pub const ALL: [AttackClass; 5] = [
        AttackClass::Replay,
        AttackClass::Fingerprinting,
        AttackClass::OnionService,
        AttackClass::BadApple,
        AttackClass::BandwidthInflation,
    ];

    /// Weakest policy that protects against this attack class.
    pub fn minimal_policy(self) -> SecurityPolicy {
        match self {
            AttackClass::Replay | AttackClass::Fingerprinting => SecurityPolicy::Entry,
            AttackClass::OnionService | AttackClass::BadApple => SecurityPolicy::Exit,
            AttackClass::BandwidthInflation => SecurityPolicy::EntryMiddleExit,
        }
    }
}

pub fn mitigated_attacks(policy: SecurityPolicy) -> BTreeSet<AttackClass> {
    AttackClass::ALL
        .into_iter()
        .filter(|a| policy.is_at_least(a.minimal_policy()))
        .collect()
}

/// True iff every position the policy requires is held by a TEE relay.
pub fn complies(circuit: &Circuit<'_>, policy: SecurityPolicy) -> bool {
    Position::ALL
        .into_iter()
        .all(|p| !policy.tee_required(p) || circuit.hop(p).tee)
}

/// Picks one relay with probability proportional to its bandwidth.
///
/// Draws one integer uniformly from `[0, total)` and returns the first
/// candidate whose cumulative bandwidth exceeds it.
pub fn select_weighted<'a, R: Rng + ?Sized>(
    candidates: &[&'a Relay],
    rng: &mut R,
) -> Result<&'a Relay, SelectionError> {
    let total: u64 = candidates.iter().map(|r| r.bandwidth_kbps).sum();
    if candidates.is_empty() || total == 0 {
        return Err(SelectionError::EmptyCandidates);
    }
    let target = rng.random_range(0..total);
    let mut acc = 0;
    for r in candidates {
        acc += r.bandwidth_kbps;
        if acc > target {
            return Ok(r);
        }
    }
    unreachable!("target below total")
}

/// Builds one circuit by scanning the network at every position.
pub fn build_circuit<'a, R: Rng + ?Sized>(
    network: &'a NetworkModel,
    policy: SecurityPolicy,
    rng: &mut R,
) -> Result<Circuit<'a>, SelectionError> {
    let mut chosen: Vec<&'a Relay> = Vec::with_capacity(3);
    for position in SELECTION_ORDER {
        let excluded: HashSet<&Fingerprint> = chosen.iter().map(|r| &r.fingerprint).collect();
        let candidates = eligible(network, position, policy.tee_required(position), &excluded);
        if candidates.is_empty() {
            return Err(SelectionError::NoEligibleRelay { position });
        }
        chosen.push(select_weighted(&candidates, rng)?);
    }
    Ok(Circuit {
        entry: chosen[0],
        exit: chosen[1],
        middle: chosen[2],
    })
}

/// Cumulative bandwidth over the relays eligible for one (position, TEE) pair.
#[derive(Debug, Clone)]
struct Pool {
    members: Vec<usize>,
    cumulative: Vec<u64>,
    /// Network index to slot in `members`.
    slot: Vec<Option<usize>>,
}

impl Pool {
    fn new(network: &NetworkModel, position: Position, tee_required: bool) -> Self {
        let relays = network.relays();
        let mut slot = vec![None; relays.len()];
        let mut members = Vec::new();
        let mut cumulative = Vec::new();
        let mut acc = 0u64;
        for (i, r) in relays.iter().enumerate() {
            if r.can_serve(position) && (r.tee || !tee_required) && r.bandwidth_kbps > 0 {
                acc += r.bandwidth_kbps;
                slot[i] = Some(members.len());
                members.push(i);
                cumulative.push(acc);
            }
        }
        Pool {
            members,
            cumulative,
            slot,
        }
    }

    fn total(&self) -> u64 {
        self.cumulative.last().copied().unwrap_or(0)
    }

    /// Draws from the pool with `excluded` removed. The draw is mapped back
    /// onto the full cumulative table by skipping the excluded intervals, so
    /// the result equals a scan over the reduced candidate list.
    fn draw<R: Rng + ?Sized>(&self, excluded: &[usize], rng: &mut R) -> Option<usize> {
        let mut skipped: Vec<(u64, u64)> = excluded
            .iter()
            .filter_map(|&i| self.slot[i])
            .map(|s| {
                let start = if s == 0 { 0 } else { self.cumulative[s - 1] };
                (start, self.cumulative[s] - start)
            })
            .collect();
        skipped.sort_unstable();
        let remaining = self.total() - skipped.iter().map(|&(_, w)| w).sum::<u64>();
        if remaining == 0 {
            return None;
        }
        let mut target = rng.random_range(0..remaining);
        for (start, width) in skipped {
            if target >= start {
                target += width;
            }
        }
        let s = self.cumulative.partition_point(|&c| c <= target);
        Some(self.members[s])
    }
}

/// Indexed circuit construction over a fixed network.
#[derive(Debug, Clone)]
pub struct CircuitBuilder<'a> {
    network: &'a NetworkModel,
    /// Indexed by `[position][tee_required]`.
    pools: [[Pool; 2]; 3],
}

impl<'a> CircuitBuilder<'a> {
    pub fn new(network: &'a NetworkModel) -> Self {
        let pools = Position::ALL.map(|p| [Pool::new(network, p, false), Pool::new(network, p, true)]);
        CircuitBuilder { network, pools }
    }

    pub fn network(&self) -> &'a NetworkModel {
        self.network
    }

    pub fn build<R: Rng + ?Sized>(&self, policy: SecurityPolicy, rng: &mut R) -> Result<Circuit<'a>, SelectionError> {
        let mut chosen = [0usize; 3];
        for (k, position) in SELECTION_ORDER.into_iter().enumerate() {
            let pool = &self.pools[position as usize][policy.tee_required(position) as usize];
            chosen[k] = pool
                .draw(&chosen[..k], rng)
                .ok_or(SelectionError::NoEligibleRelay { position })?;
        }
        let relays = self.network.relays();
        Ok(Circuit {
            entry: &relays[chosen[0]],
            exit: &relays[chosen[1]],
            middle: &relays[chosen[2]],
        })
    }
}
