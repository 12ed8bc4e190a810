//! Workbench for private structured-subset retrieval over replicated
//! servers: converse bounds on the retrieval rate, exact rational
//! optimization of balanced {0,1}-linear schemes, synthesis of concrete
//! query tables and decoding plans, and an end-to-end protocol simulator.

pub mod converse;
pub mod instance;
pub mod lp;
pub mod program;
pub mod rational;
pub mod subset;

pub use instance::{generate_family, normalize, DemandInstance, FamilyKind, IndexRemap};
pub use rational::{lift_to_integral, Rat};
pub use subset::SubsetMask;
