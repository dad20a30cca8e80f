//! Stochastic dynamic utilities and intertemporal preferences on finite
//! filtered probability spaces.

pub mod apps;
pub mod axioms;
pub mod cli;
pub mod curve;
pub mod engine;
pub mod error;
pub mod field;
pub mod random;
pub mod recovery;
pub mod scenario;
pub mod space;

pub use curve::{MonotoneCurve, Preimage};
pub use engine::{Pair, Representation, TriPartition, Verdict, VerdictTag};
pub use error::{Error, Result};
pub use field::UtilityField;
pub use space::{Act, Event, FilteredSpace, ProbabilityMeasure};
