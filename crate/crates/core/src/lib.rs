//! Spherical-harmonic modal simulation of the potential, Lagrangian and
//! Eulerian acoustic models coupled to a membrane on the outer sphere.

pub mod audit;
pub mod domain;
pub mod elliptic;
pub mod error;
pub mod evolve;
pub mod eulerian;
pub mod lagrangian;
pub mod linalg;
pub mod material;
pub mod modal_ops;
pub mod model;
pub mod potential;
pub mod presets;
pub mod rng;
pub mod runner;
pub mod scenario;
pub mod transforms;

pub use domain::{make_domain, DomainSpec, GeometryKind, Mode, ModeSet, RadialGrid};
pub use elliptic::{check_div_curl_compat, solve_div_curl, DivCurlProblem, DivCurlSolution};
pub use error::{Error, Result};
pub use eulerian::{check_compat_eulerian, eulerian_constraint, eulerian_energy, eulerian_rhs, EulerianModeState, EulerianModel};
pub use lagrangian::{check_compat_lagrangian, lagrangian_energy, lagrangian_rhs, LagrangianModeState, LagrangianModel};
pub use material::{validate_params, MaterialParams};
pub use modal_ops::{assemble_mode_operators, Boundary, ModalOperatorSet, TraceOrder};
pub use model::{CompatReport, EnergyBreakdown, ModeModel, ModelFamily, ModelTag};
pub use potential::{
    check_compat_potential, constraint_functional, potential_energy, potential_rhs, PotentialModeState, PotentialModel,
};
pub use evolve::{evolve, evolve_continue, IntegratorConfig, Propagator, Scheme, TrajectoryRecord};
