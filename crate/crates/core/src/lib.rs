//! Deterministic simulator and toolkit for migrating a warehouse-scale fleet
//! from x86 to Arm.
//!
//! The crate is organised around the stages of a migration:
//!
//! - [`fleet`]: the simulated monorepo and cluster (packages, owners, jobs, cells)
//!   and a seeded generator for reproducible synthetic fleets.
//! - [`oracle`]: latent portability defects embedded as literal text, and the
//!   per-ISA build / test / sanitizer / release outcomes they produce.
//! - [`lsc`]: large-scale changes generated from templates, sharded by owner,
//!   CI-gated, approved or refused, submitted or rolled back.
//! - [`agent`]: a nested-loop build/test repair agent over a pluggable reasoner,
//!   plus a revert-based benchmark harness.
//! - [`champ`]: the Arm auto-qualification state machine that compares Arm job
//!   health against x86 and scales healthy jobs up stage by stage.
//! - [`taxonomy`]: commit classification and the aggregate statistics over a
//!   migration commit corpus.
//! - [`sim`]: the day-granular driver composing all of the above.

pub mod agent;
pub mod champ;
pub mod fleet;
pub mod lsc;
pub mod oracle;
pub mod protocol;
pub mod rng;
pub mod sim;
pub mod taxonomy;

pub use agent::{BenchReport, BenchmarkCase, Reasoner, RuleReasoner, ToolCall};
pub use champ::{HealthSample, QualificationState, Stage, Verdict};
pub use fleet::{Fleet, FleetError, FleetParams, Isa, Package, RolloutPhase};
pub use lsc::{ChangeSpec, MegaChange, Shard, ShardState, ShardedChange};
pub use oracle::{CheckResult, DefectClass, DefectInstance, Status, SurfacePhase};
pub use sim::{ScenarioConfig, SimOutput, SimReport};
pub use taxonomy::{Category, CommitRecord};
