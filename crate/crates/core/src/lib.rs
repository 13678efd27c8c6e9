//! Simulation of partial TEE deployments in the Tor network.
//!
//! A [`NetworkModel`] is read from a consensus ([`consensus::parse_consensus`]),
//! generated synthetically, or loaded from the native format. A
//! [`DeploymentScenario`] marks some relays as TEE-based, and circuits are
//! built with bandwidth-weighted selection that can require TEE relays at
//! chosen positions ([`SecurityPolicy`]). The [`metrics`] module measures
//! how often circuits are protected, the load-adjusted bandwidth they get,
//! and how many distinct compliant circuits remain.
//!
//! ```
//! use parteetor::consensus::{generate_synthetic, BandwidthDistribution, SyntheticNetworkSpec};
//! use parteetor::{assign_tees, CircuitBuilder, DeploymentScenario, SecurityPolicy};
//! use rand::SeedableRng;
//!
//! let network = generate_synthetic(&SyntheticNetworkSpec {
//!     total_relays: 100,
//!     entry_capable_count: 50,
//!     exit_capable_count: 25,
//!     dual_capable_count: 10,
//!     bandwidth: BandwidthDistribution::Constant(1000),
//!     seed: 1,
//! })?;
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
//! let deployed = assign_tees(&network, &DeploymentScenario::Random { p: 0.3 }, &mut rng)?;
//! let circuit = CircuitBuilder::new(&deployed).build(SecurityPolicy::Entry, &mut rng)?;
//! assert!(circuit.entry.tee);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod cli;
pub mod consensus;
pub mod deployment;
pub mod experiment;
pub mod metrics;
pub mod model;
pub mod report;
pub mod selection;

pub use deployment::{assign_tees, DeploymentScenario, PositionDistribution};
pub use experiment::{run_sweep, ExperimentConfig, Metric, SweepResult};
pub use model::{Circuit, Fingerprint, NetworkModel, Position, Relay};
pub use selection::{build_circuit, complies, mitigated_attacks, AttackClass, CircuitBuilder, SecurityPolicy};
