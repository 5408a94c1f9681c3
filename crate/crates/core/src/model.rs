//! Shared vocabulary of the three modal models.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::material::MaterialParams;
use crate::modal_ops::ModalOperatorSet;

/// √(4π): ∫ over the unit sphere of the l = 0 orthonormal harmonic.
pub const SQRT_4PI: f64 = 3.544_907_701_811_031_8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelTag {
    /// Potential model.
    P,
    /// Potential model restricted to the integral constraint.
    Pc,
    /// Lagrangian model.
    L,
    /// Eulerian model.
    E,
    /// Eulerian model restricted to the integral constraint.
    Ec,
}

impl ModelTag {
    pub fn family(self) -> ModelFamily {
        match self {
            ModelTag::P | ModelTag::Pc => ModelFamily::Potential,
            ModelTag::L => ModelFamily::Lagrangian,
            ModelTag::E | ModelTag::Ec => ModelFamily::Eulerian,
        }
    }

    pub fn is_constrained(self) -> bool {
        matches!(self, ModelTag::Pc | ModelTag::Ec)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelTag::P => "P",
            ModelTag::Pc => "Pc",
            ModelTag::L => "L",
            ModelTag::E => "E",
            ModelTag::Ec => "Ec",
        }
    }
}

impl std::fmt::Display for ModelTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "P" => Ok(ModelTag::P),
            "Pc" => Ok(ModelTag::Pc),
            "L" => Ok(ModelTag::L),
            "E" => Ok(ModelTag::E),
            "Ec" => Ok(ModelTag::Ec),
            other => Err(Error::validation("model", format!("unknown model tag `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelFamily {
    Potential,
    Lagrangian,
    Eulerian,
}

/// Itemized energy of one mode.
///
/// `fluid_kinetic` is (ρ0/2)∫|velocity|², `fluid_compression` the elastic
/// bulk term, the three membrane terms are the tension, inertia and
/// stiffness contributions on Γ1.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub fluid_kinetic: f64,
    pub fluid_compression: f64,
    pub membrane_tension: f64,
    pub membrane_kinetic: f64,
    pub membrane_stiffness: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub(crate) fn new(
        ops: &ModalOperatorSet,
        params: &MaterialParams,
        fluid_kinetic: f64,
        fluid_compression: f64,
        v: f64,
        vt: f64,
    ) -> Self {
        let r1sq = ops.outer_radius().powi(2);
        let membrane_tension = 0.5 * params.sigma * ops.ll1() * v * v;
        let membrane_kinetic = 0.5 * params.mu * r1sq * vt * vt;
        let membrane_stiffness = 0.5 * params.kappa * r1sq * v * v;
        Self {
            fluid_kinetic,
            fluid_compression,
            membrane_tension,
            membrane_kinetic,
            membrane_stiffness,
            total: fluid_kinetic + fluid_compression + membrane_tension + membrane_kinetic + membrane_stiffness,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompatCondition {
    pub name: &'static str,
    pub residual: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompatReport {
    pub order: u32,
    pub tol: f64,
    pub conditions: Vec<CompatCondition>,
}

impl CompatReport {
    pub(crate) fn new(order: u32, tol: f64) -> Self {
        Self {
            order,
            tol,
            conditions: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, name: &'static str, residual: f64) {
        self.conditions.push(CompatCondition {
            name,
            residual,
            passed: residual.abs() <= self.tol,
        });
    }

    pub fn passed(&self) -> bool {
        self.conditions.iter().all(|c| c.passed)
    }

    pub fn max_residual(&self) -> f64 {
        self.conditions.iter().fold(0.0, |m, c| m.max(c.residual.abs()))
    }

    pub fn residual(&self, name: &str) -> Option<f64> {
        self.conditions.iter().find(|c| c.name == name).map(|c| c.residual)
    }
}

/// Default compatibility tolerance 1e-8 · (1 + state norm).
pub fn compat_tolerance(state_norm: f64) -> f64 {
    1e-8 * (1.0 + state_norm)
}

pub(crate) fn check_order(order: u32, max: u32) -> Result<()> {
    if (2..=max).contains(&order) {
        Ok(())
    } else {
        Err(Error::UnsupportedOrder(order))
    }
}

/// A semi-discrete linear model for one harmonic degree.
///
/// States are packed into a flat vector of the evolved unknowns. Boundary face
/// values are not evolved: `unpack` re-imposes them from the trace conditions.
pub trait ModeModel: Sync {
    type State: Clone + Send + Sync + std::fmt::Debug;

    fn family(&self) -> ModelFamily;
    fn ops(&self) -> &ModalOperatorSet;
    fn params(&self) -> &MaterialParams;

    fn dim(&self) -> usize;
    fn pack(&self, s: &Self::State) -> Vec<f64>;
    fn unpack(&self, x: &[f64]) -> Self::State;
    /// Radial location of each packed unknown, used to order the band solver.
    fn positions(&self) -> Vec<f64>;
    /// Time derivative of a packed state.
    fn rhs_packed(&self, x: &[f64]) -> Vec<f64>;
    /// Packed index of the membrane velocity.
    fn membrane_velocity_index(&self) -> usize;

    fn energy(&self, s: &Self::State) -> EnergyBreakdown;
    /// Integral constraint functional; identically 0 where the model has none.
    fn constraint(&self, s: &Self::State) -> f64;
    /// Pointwise f − (r g)' on interior faces of every vector field in the state;
    /// empty where the model has none.
    fn curl_field(&self, s: &Self::State) -> Vec<f64>;
    /// Max |f − (r g)'| over [`Self::curl_field`].
    fn curl_defect(&self, s: &Self::State) -> f64 {
        crate::modal_ops::max_abs(&self.curl_field(s))
    }
    /// (primary scalar at R1, normal velocity or displacement at R1).
    fn boundary_traces(&self, s: &Self::State) -> (f64, f64);
    fn membrane(&self, s: &Self::State) -> (f64, f64);
    /// Time-reversal involution: maps solutions with damping δ to solutions with −δ.
    fn reversed(&self, s: &Self::State) -> Self::State;
    fn zero_state(&self) -> Self::State {
        self.unpack(&vec![0.0; self.dim()])
    }
}

pub(crate) fn max_abs_all<'a>(parts: impl IntoIterator<Item = &'a [f64]>, scalars: &[f64]) -> f64 {
    let m = parts
        .into_iter()
        .flat_map(|p| p.iter())
        .fold(0.0f64, |m, x| m.max(x.abs()));
    scalars.iter().fold(m, |m, x| m.max(x.abs()))
}

pub(crate) fn axpy_vec(x: &[f64], a: f64, y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(p, q)| p + a * q).collect()
}
