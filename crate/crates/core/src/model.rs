//! The relay population and the circuit types shared by every other module.

use std::collections::{HashMap, HashSet};
use std::fmt;

use thiserror::Error;

/// Opaque relay identity. Unique within a [`NetworkModel`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fingerprint(pub String);

impl Fingerprint {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Fingerprint {
    fn from(s: &str) -> Self {
        Fingerprint(s.to_owned())
    }
}

/// One relay. Every relay can serve as a middle hop; entry and exit use
/// depend on its capability flags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relay {
    pub fingerprint: Fingerprint,
    pub nickname: String,
    /// Measured bandwidth in KB/s.
    pub bandwidth_kbps: u64,
    pub entry_capable: bool,
    pub exit_capable: bool,
    pub tee: bool,
}

impl Relay {
    pub fn new(fingerprint: impl Into<String>, nickname: impl Into<String>, bandwidth_kbps: u64) -> Self {
        Relay {
            fingerprint: Fingerprint(fingerprint.into()),
            nickname: nickname.into(),
            bandwidth_kbps,
            entry_capable: false,
            exit_capable: false,
            tee: false,
        }
    }

    pub fn with_entry(mut self, yes: bool) -> Self {
        self.entry_capable = yes;
        self
    }

    pub fn with_exit(mut self, yes: bool) -> Self {
        self.exit_capable = yes;
        self
    }

    pub fn with_tee(mut self, yes: bool) -> Self {
        self.tee = yes;
        self
    }

    pub fn can_serve(&self, position: Position) -> bool {
        match position {
            Position::Entry => self.entry_capable,
            Position::Middle => true,
            Position::Exit => self.exit_capable,
        }
    }

    pub fn is_dual(&self) -> bool {
        self.entry_capable && self.exit_capable
    }
}

/// Circuit hop, ordered by construction order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Position {
    Entry,
    Middle,
    Exit,
}

impl Position {
    pub const ALL: [Position; 3] = [Position::Entry, Position::Middle, Position::Exit];

    pub fn name(self) -> &'static str {
        match self {
            Position::Entry => "entry",
            Position::Middle => "middle",
            Position::Exit => "exit",
        }
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("duplicate relay fingerprint {0}")]
    DuplicateFingerprint(Fingerprint),
}

/// Capability and TEE tallies over a network.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CapabilityCounts {
    pub total: usize,
    pub entry: usize,
    pub exit: usize,
    pub dual: usize,
    pub tee: usize,
    pub entry_tee: usize,
    pub exit_tee: usize,
    pub dual_tee: usize,
}

impl fmt::Display for CapabilityCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "relays={} entry={} exit={} dual={}",
            self.total, self.entry, self.exit, self.dual
        )
    }
}

/// The full relay population in a stable order, indexed by fingerprint.
#[derive(Debug, Clone, Default)]
pub struct NetworkModel {
    relays: Vec<Relay>,
    index: HashMap<Fingerprint, usize>,
}

impl PartialEq for NetworkModel {
    fn eq(&self, other: &Self) -> bool {
        self.relays == other.relays
    }
}

impl Eq for NetworkModel {}

impl NetworkModel {
    pub fn new(relays: Vec<Relay>) -> Result<Self, ModelError> {
        let mut index = HashMap::with_capacity(relays.len());
        for (i, relay) in relays.iter().enumerate() {
            if index.insert(relay.fingerprint.clone(), i).is_some() {
                return Err(ModelError::DuplicateFingerprint(relay.fingerprint.clone()));
            }
        }
        Ok(NetworkModel { relays, index })
    }

    pub fn relays(&self) -> &[Relay] {
        &self.relays
    }

    pub fn len(&self) -> usize {
        self.relays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relays.is_empty()
    }

    pub fn get(&self, fingerprint: &Fingerprint) -> Option<&Relay> {
        self.index.get(fingerprint).map(|&i| &self.relays[i])
    }

    pub fn position_of(&self, fingerprint: &Fingerprint) -> Option<usize> {
        self.index.get(fingerprint).copied()
    }

    /// Returns a copy with the TEE flag of relay `i` set to `tee[i]`.
    /// Panics if the lengths differ.
    pub fn with_tee_flags(&self, tee: &[bool]) -> NetworkModel {
        assert_eq!(tee.len(), self.relays.len(), "one TEE flag per relay");
        let relays = self
            .relays
            .iter()
            .zip(tee)
            .map(|(r, &t)| Relay { tee: t, ..r.clone() })
            .collect();
        NetworkModel {
            relays,
            index: self.index.clone(),
        }
    }

    pub fn counts(&self) -> CapabilityCounts {
        let mut c = CapabilityCounts {
            total: self.relays.len(),
            ..Default::default()
        };
        for r in &self.relays {
            c.entry += r.entry_capable as usize;
            c.exit += r.exit_capable as usize;
            c.dual += r.is_dual() as usize;
            if r.tee {
                c.tee += 1;
                c.entry_tee += r.entry_capable as usize;
                c.exit_tee += r.exit_capable as usize;
                c.dual_tee += r.is_dual() as usize;
            }
        }
        c
    }
}

/// Relays usable at `position`: capable of it, TEE-based when required,
/// not excluded, and with positive bandwidth. Network order is kept.
pub fn eligible<'a>(
    network: &'a NetworkModel,
    position: Position,
    tee_required: bool,
    excluded: &HashSet<&Fingerprint>,
) -> Vec<&'a Relay> {
    network
        .relays
        .iter()
        .filter(|r| {
            r.can_serve(position)
                && (r.tee || !tee_required)
                && r.bandwidth_kbps > 0
                && !excluded.contains(&r.fingerprint)
        })
        .collect()
}

/// An (entry, middle, exit) path of three distinct relays.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Circuit<'a> {
    pub entry: &'a Relay,
    pub middle: &'a Relay,
    pub exit: &'a Relay,
}

impl<'a> Circuit<'a> {
    pub fn hop(&self, position: Position) -> &'a Relay {
        match position {
            Position::Entry => self.entry,
            Position::Middle => self.middle,
            Position::Exit => self.exit,
        }
    }

    pub fn hops(&self) -> [&'a Relay; 3] {
        [self.entry, self.middle, self.exit]
    }

    pub fn is_valid(&self) -> bool {
        let [a, b, c] = self.hops().map(|r| &r.fingerprint);
        a != b && b != c && a != c && self.entry.entry_capable && self.exit.exit_capable
    }
}

impl fmt::Display for Circuit<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {})",
            self.entry.nickname, self.middle.nickname, self.exit.nickname
        )
    }
}
