//! Multi-agent actor-critic training for highway on-ramp merging in mixed
//! traffic, with a priority-based multi-step safety supervisor.
//!
//! The crate splits into a deterministic traffic micro-simulator
//! ([`dynamics`], [`driver`], [`env`]), the action shield ([`supervisor`]),
//! a hand-rolled shared policy/value network with analytic gradients
//! ([`neural`]), and the training/evaluation harness ([`trainer`]).

pub mod collision;
pub mod driver;
pub mod dynamics;
pub mod env;
pub mod geometry;
pub mod neural;
pub mod plot;
pub mod runconfig;
pub mod supervisor;
pub mod trace;
pub mod trainer;

pub use dynamics::{MetaAction, VehicleKind, VehicleState};
pub use env::{EnvConfig, MergeEnv, RewardMode, TrafficMode};
pub use supervisor::SupervisorConfig;
pub use trainer::TrainerConfig;
