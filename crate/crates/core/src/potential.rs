//! Velocity-potential model: wave equation for `u` with the membrane
//! equation on Γ1 and the Neumann coupling `∂_ν u = v_t`.

use crate::error::{Error, Result};
use crate::material::MaterialParams;
use crate::modal_ops::{Boundary, ModalOperatorSet, TraceOrder};
use crate::model::{
    check_order, compat_tolerance, max_abs_all, CompatReport, EnergyBreakdown, ModeModel, ModelFamily,
    SQRT_4PI,
};

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialModeState {
    pub degree: u32,
    pub u: Vec<f64>,
    pub ut: Vec<f64>,
    pub v: f64,
    pub vt: f64,
}

impl PotentialModeState {
    pub fn zeros(degree: u32, n: usize) -> Self {
        Self {
            degree,
            u: vec![0.0; n],
            ut: vec![0.0; n],
            v: 0.0,
            vt: 0.0,
        }
    }

    /// `self + a·other`.
    pub fn axpy(&self, a: f64, other: &Self) -> Self {
        Self {
            degree: self.degree,
            u: crate::model::axpy_vec(&self.u, a, &other.u),
            ut: crate::model::axpy_vec(&self.ut, a, &other.ut),
            v: self.v + a * other.v,
            vt: self.vt + a * other.vt,
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            degree: self.degree,
            u: self.u.iter().map(|x| a * x).collect(),
            ut: self.ut.iter().map(|x| a * x).collect(),
            v: a * self.v,
            vt: a * self.vt,
        }
    }

    pub fn norm(&self) -> f64 {
        max_abs_all([self.u.as_slice(), &self.ut], &[self.v, self.vt])
    }

    pub(crate) fn check(&self, ops: &ModalOperatorSet) -> Result<()> {
        if self.degree != ops.degree() {
            return Err(Error::DegreeMismatch(self.degree, ops.degree()));
        }
        for len in [self.u.len(), self.ut.len()] {
            if len != ops.len() {
                return Err(Error::LengthMismatch {
                    expected: ops.len(),
                    got: len,
                });
            }
        }
        Ok(())
    }
}

/// Time derivative `(u̇, u̇t, v̇, v̇t)`, returned in the state layout.
pub fn potential_rhs(ops: &ModalOperatorSet, p: &MaterialParams, s: &PotentialModeState) -> PotentialModeState {
    let c2 = p.sound_speed_sq();
    let lap = ops.lap(&s.u, 0.0, s.vt);
    let n = ops.len();
    let vtt = (-p.sigma * ops.lambda() * s.v - p.delta * s.vt - p.kappa * s.v - p.rho0 * s.ut[n - 1]) / p.mu;
    PotentialModeState {
        degree: s.degree,
        u: s.ut.clone(),
        ut: lap.into_iter().map(|x| c2 * x).collect(),
        v: s.vt,
        vt: vtt,
    }
}

pub fn potential_energy(ops: &ModalOperatorSet, p: &MaterialParams, s: &PotentialModeState) -> EnergyBreakdown {
    let grad = ops.grad(&s.u, 0.0, 0.0);
    let tang = ops.tangential(&s.u);
    let kinetic = 0.5 * p.rho0 * ops.vector_inner(&grad, &tang, &grad, &tang);
    let compression = 0.5 * p.rho0 * p.rho0 / p.bulk * ops.scalar_inner(&s.ut, &s.ut);
    EnergyBreakdown::new(ops, p, kinetic, compression, s.v, s.vt)
}

/// ρ0∫_Ω u_t − B∫_{Γ1} v for this mode (zero for l ≥ 1).
pub fn constraint_functional(ops: &ModalOperatorSet, p: &MaterialParams, s: &PotentialModeState) -> f64 {
    if ops.degree() != 0 {
        return 0.0;
    }
    let r1 = ops.outer_radius();
    SQRT_4PI * (p.rho0 * crate::modal_ops::dot(ops.quad_weights(), &s.ut) - p.bulk * r1 * r1 * s.v)
}

pub fn check_compat_potential(
    ops: &ModalOperatorSet,
    p: &MaterialParams,
    s: &PotentialModeState,
    order: u32,
) -> Result<CompatReport> {
    check_compat_potential_with_tol(ops, p, s, order, compat_tolerance(s.norm()))
}

pub fn check_compat_potential_with_tol(
    ops: &ModalOperatorSet,
    p: &MaterialParams,
    s: &PotentialModeState,
    order: u32,
    tol: f64,
) -> Result<CompatReport> {
    check_order(order, 3)?;
    s.check(ops)?;
    let mut report = CompatReport::new(order, tol);
    let has_gamma0 = ops.domain().has_gamma0();
    let dn = |phi: &[f64], b| ops.surface_trace(phi, b, TraceOrder::NormalDerivative);
    if has_gamma0 {
        report.push("gamma0_normal_u", dn(&s.u, Boundary::Gamma0)?);
    }
    let dnu1 = dn(&s.u, Boundary::Gamma1)?;
    report.push("gamma1_normal_u_eq_vt", dnu1 - s.vt);
    if order >= 3 {
        if has_gamma0 {
            report.push("gamma0_normal_ut", dn(&s.ut, Boundary::Gamma0)?);
        }
        let dnut1 = dn(&s.ut, Boundary::Gamma1)?;
        let ut1 = s.ut[ops.len() - 1];
        report.push(
            "gamma1_membrane",
            p.mu * dnut1 + p.sigma * ops.lambda() * s.v + p.delta * dnu1 + p.kappa * s.v + p.rho0 * ut1,
        );
    }
    Ok(report)
}

/// Potential model bound to one degree.
#[derive(Debug, Clone)]
pub struct PotentialModel {
    ops: ModalOperatorSet,
    params: MaterialParams,
}

impl PotentialModel {
    pub fn new(ops: ModalOperatorSet, params: MaterialParams) -> Self {
        Self { ops, params }
    }
}

impl ModeModel for PotentialModel {
    type State = PotentialModeState;

    fn family(&self) -> ModelFamily {
        ModelFamily::Potential
    }

    fn ops(&self) -> &ModalOperatorSet {
        &self.ops
    }

    fn params(&self) -> &MaterialParams {
        &self.params
    }

    fn dim(&self) -> usize {
        2 * self.ops.len() + 2
    }

    fn pack(&self, s: &PotentialModeState) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.dim());
        x.extend_from_slice(&s.u);
        x.extend_from_slice(&s.ut);
        x.push(s.v);
        x.push(s.vt);
        x
    }

    fn unpack(&self, x: &[f64]) -> PotentialModeState {
        let n = self.ops.len();
        PotentialModeState {
            degree: self.ops.degree(),
            u: x[..n].to_vec(),
            ut: x[n..2 * n].to_vec(),
            v: x[2 * n],
            vt: x[2 * n + 1],
        }
    }

    fn positions(&self) -> Vec<f64> {
        let r = self.ops.nodes();
        let r1 = self.ops.outer_radius();
        r.iter().chain(r).copied().chain([r1, r1]).collect()
    }

    fn rhs_packed(&self, x: &[f64]) -> Vec<f64> {
        self.pack(&potential_rhs(&self.ops, &self.params, &self.unpack(x)))
    }

    fn membrane_velocity_index(&self) -> usize {
        2 * self.ops.len() + 1
    }

    fn energy(&self, s: &PotentialModeState) -> EnergyBreakdown {
        potential_energy(&self.ops, &self.params, s)
    }

    fn constraint(&self, s: &PotentialModeState) -> f64 {
        constraint_functional(&self.ops, &self.params, s)
    }

    fn curl_field(&self, _s: &PotentialModeState) -> Vec<f64> {
        Vec::new()
    }

    fn boundary_traces(&self, s: &PotentialModeState) -> (f64, f64) {
        let n = self.ops.len();
        let dn = self
            .ops
            .surface_trace(&s.u, Boundary::Gamma1, TraceOrder::NormalDerivative)
            .unwrap_or(f64::NAN);
        (s.u[n - 1], dn)
    }

    fn membrane(&self, s: &PotentialModeState) -> (f64, f64) {
        (s.v, s.vt)
    }

    fn reversed(&self, s: &PotentialModeState) -> PotentialModeState {
        PotentialModeState {
            degree: s.degree,
            u: s.u.iter().map(|x| -x).collect(),
            ut: s.ut.clone(),
            v: s.v,
            vt: -s.vt,
        }
    }
}
