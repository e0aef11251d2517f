//! Random witness functions on fat Cantor sets, with Monte Carlo energy and
//! box-counting estimators for graph dimensions and numerical checks of the
//! inequalities behind them.

pub mod boxcount;
pub mod cantor;
pub mod energy;
pub mod error;
pub mod experiment;
pub mod function;
pub mod horizon;
pub mod labeling;
pub mod quadrature;
pub mod rng;
pub mod verify;
pub mod witness;

pub use boxcount::{box_count_curve, box_count_surface, fit_dimension, DimFit, ScaleWindow};
pub use cantor::{build_levels, c_epsilon, n_of_pair, CantorConfig, CantorLevels, CantorPoint, PointCode};
pub use energy::{energy_mc, graph_energy, EnergyEstimate, GraphEnergy};
pub use error::{Error, Result};
pub use experiment::{run, ExperimentSpec, Outcome};
pub use function::FunctionHandle;
pub use horizon::{horizon, verify_horizon_shift, SurfaceGrid};
pub use labeling::Labeling;
pub use rng::Partitioning;
pub use verify::{Status, VerificationReport};
pub use witness::WitnessFunction;
