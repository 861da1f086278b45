//! Trajectory-based nonadiabatic dynamics on constraint phase space with
//! triangle window functions.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] builds diabatic benchmark Hamiltonians and their gradients.
//! * [`sampling`] draws nuclear Wigner initial conditions.
//! * [`mapping`] holds the electronic phase-space machinery: CPS and
//!   triangle-window samplers, window indicators, mapping kernels and the
//!   squeezed-window weights.
//! * [`frame`] adiabatizes the diabatic potential and builds short-time
//!   electronic propagators.
//! * [`propagation`] contains the NaF, mean-field and surface-hopping steppers.
//! * [`estimators`] reduces trajectory ensembles to correlation functions and
//!   observables.
//! * [`exact`] provides independent references: matrix exponentials, Monte
//!   Carlo checks of the window integrals, and a sinc-DVR wavepacket solver.
//! * [`runner`] parses run configurations, drives ensembles in parallel and
//!   writes CSV/JSON outputs.
//!
//! Atomic units (ħ = 1) are used throughout unless a type says otherwise.

pub mod error;
pub mod estimators;
pub mod exact;
pub mod frame;
pub mod linalg;
pub mod mapping;
pub mod model;
pub mod propagation;
pub mod runner;
pub mod sampling;
pub mod units;

pub use error::{Error, Result};
pub use estimators::{EstimateSeries, NuclearObservable, Representation};
pub use frame::AdiabaticFrame;
pub use linalg::{CMatrix, CVector, C64};
pub use mapping::{CommutatorMatrix, MappingState};
pub use model::{InitialCondition, ModelSpec};
pub use propagation::{Method, MethodOptions, PhaseSpacePoint, TrajectoryRecord, TurningPoint};
pub use runner::RunConfig;
pub use sampling::{InverseTemperature, NuclearSample};
