//! Generational genetic programming with a bounded number of live genome
//! buffers.
//!
//! A population of `M` trees bred by `nthreads` workers never holds more
//! than `M + 2 * max(1, nthreads)` tree buffers at once. Buffers come from a
//! fixed pool ([`expr_pool`]) and a per-generation schedule
//! ([`breeding_plan`]) orders the children so that parents can hand their
//! buffers back as early as possible. [`engine`] ties the two together with
//! a fork-join worker pool; [`naive`] is a plain two-population engine kept
//! as a reference.

pub mod breeding_plan;
pub mod cli;
pub mod engine;
pub mod expr_pool;
pub mod metrics;
pub mod naive;

pub use breeding_plan::{BreedingPlan, Class, ParentPair, SelectionOutcome};
pub use engine::{run_evolution, EngineError, Problem, ProblemId, Quartic, RunConfig, RunOutput};
pub use expr_pool::{pool_capacity, BufferPool, SlotId};
pub use metrics::GenerationStats;
pub use naive::run_evolution_naive;
