//! Multilayer thin-film design as a sequential decision problem.
//!
//! The crate is organised bottom-up:
//!
//! * [`materials`]: tabulated `n, k` data and interpolation.
//! * [`optics`]: normal-incidence transfer-matrix evaluation and the aim (merit) value.
//! * [`environment`]: the coating problem as an episodic MDP over layer thicknesses.
//! * [`qnet`]: a small fully-connected Q-network with exact backpropagation.
//! * [`agent`]: deep Q-learning with experience replay and ε-greedy exploration.
//! * [`ga`]: a real-coded genetic algorithm baseline on the same objective.
//! * [`report`]: serializable run summaries shared by both optimizers.

pub mod agent;
pub mod error;
pub mod materials;
pub mod environment;
pub mod ga;
pub mod optics;
pub mod qnet;
pub mod report;

pub use error::{Error, Result};
pub use materials::{MaterialLibrary, MaterialTable, Sample};
pub use agent::{DqnSettings, DqnTrainer, ExplorationSchedule, ReplayMemory};
pub use environment::{EnvConfig, EnvState, Environment, Transition};
pub use ga::{GaConfig, GaOutcome};
pub use qnet::{QNetworkParams, TrainHyperparams};
pub use report::{CurvePoint, OptimizerKind, RunReport};
pub use optics::{AimWeights, Layer, Rta, SpectralGrid, SpectralResponse, StackDesign, StackEvaluator, StackTemplate};
