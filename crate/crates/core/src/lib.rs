//! Event-by-event simulation of single-neutron spin experiments.
//!
//! Neutrons are modelled as messengers carrying a message that encodes the
//! direction of their magnetic moment. Devices (spin flippers, guide fields,
//! spin analyzers, detectors) update or consume messages one at a time, and
//! all statistics are obtained by counting detection events.
//!
//! Modules:
//!
//! * [`spin`]: messages, moments and rotations;
//! * [`devices`]: source, spin flipper, detuning field, analyzers, detector;
//! * [`experiments`]: seeded event loops for the three experiment topologies;
//! * [`oracle`]: closed-form quantum-theoretical predictions;
//! * [`stats`]: estimators and uncertainty-relation checks on count tables.

pub mod devices;
pub mod error;
pub mod experiments;
pub mod oracle;
pub mod rng;
pub mod spin;
pub mod stats;

pub use devices::{AnalyzerMode, AnalyzerModel, Sign};
pub use error::{Error, Result};
pub use experiments::{
    CountTable, FilteringTripleConfig, RobertsonPoint, RobertsonRunConfig, TripleCountTable,
    UncertaintyPoint, UncertaintyRunConfig,
};
pub use oracle::Expectations;
pub use spin::{MagneticMoment, Message, RotationSpec, Vec3};
