//! Displacement model: curl-free displacement `r⃗ = (F, G)` per mode, its
//! velocity `(Ft, Gt)` and the membrane pair, with `r⃗·ν = −v` on Γ1.

use crate::error::{Error, Result};
use crate::material::MaterialParams;
use crate::modal_ops::{Boundary, ModalOperatorSet, TraceOrder};
use crate::model::{check_order, compat_tolerance, max_abs_all, CompatReport, EnergyBreakdown, ModeModel, ModelFamily};

/// `F`, `Ft` hold `N + 1` face values (boundary faces included); `G`, `Gt` hold
/// `N` node values and are all zero for `l = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianModeState {
    pub degree: u32,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub v: f64,
    pub ft: Vec<f64>,
    pub gt: Vec<f64>,
    pub vt: f64,
}

impl LagrangianModeState {
    pub fn zeros(degree: u32, n: usize) -> Self {
        Self {
            degree,
            f: vec![0.0; n + 1],
            g: vec![0.0; n],
            v: 0.0,
            ft: vec![0.0; n + 1],
            gt: vec![0.0; n],
            vt: 0.0,
        }
    }

    /// `self + a·other`.
    pub fn axpy(&self, a: f64, other: &Self) -> Self {
        use crate::model::axpy_vec;
        Self {
            degree: self.degree,
            f: axpy_vec(&self.f, a, &other.f),
            g: axpy_vec(&self.g, a, &other.g),
            v: self.v + a * other.v,
            ft: axpy_vec(&self.ft, a, &other.ft),
            gt: axpy_vec(&self.gt, a, &other.gt),
            vt: self.vt + a * other.vt,
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        let s = |x: &[f64]| x.iter().map(|y| a * y).collect();
        Self {
            degree: self.degree,
            f: s(&self.f),
            g: s(&self.g),
            v: a * self.v,
            ft: s(&self.ft),
            gt: s(&self.gt),
            vt: a * self.vt,
        }
    }

    pub fn norm(&self) -> f64 {
        max_abs_all([self.f.as_slice(), &self.g, &self.ft, &self.gt], &[self.v, self.vt])
    }

    pub(crate) fn check(&self, ops: &ModalOperatorSet) -> Result<()> {
        if self.degree != ops.degree() {
            return Err(Error::DegreeMismatch(self.degree, ops.degree()));
        }
        let n = ops.len();
        for (len, expected) in [
            (self.f.len(), n + 1),
            (self.ft.len(), n + 1),
            (self.g.len(), n),
            (self.gt.len(), n),
        ] {
            if len != expected {
                return Err(Error::LengthMismatch { expected, got: len });
            }
        }
        Ok(())
    }
}

/// Modal `Div r⃗` with the displacement trace `F(R1) = −v` imposed.
pub fn lagrangian_divergence(ops: &ModalOperatorSet, s: &LagrangianModeState) -> Vec<f64> {
    let n = ops.len();
    let mut f = s.f.clone();
    f[0] = 0.0;
    f[n] = -s.v;
    ops.div(&f, &s.g)
}

/// Divergence computed from the stored boundary faces, as used by the compatibility checks.
fn stored_divergence(ops: &ModalOperatorSet, s: &LagrangianModeState) -> Vec<f64> {
    ops.div(&s.f, &s.g)
}

pub fn lagrangian_rhs(ops: &ModalOperatorSet, p: &MaterialParams, s: &LagrangianModeState) -> LagrangianModeState {
    let n = ops.len();
    let c2 = p.sound_speed_sq();
    let d = lagrangian_divergence(ops, s);
    let mut ft = s.ft.clone();
    let ftt: Vec<f64> = ops.grad(&d, 0.0, 0.0).into_iter().map(|x| c2 * x).collect();
    let gtt: Vec<f64> = ops.tangential(&d).into_iter().map(|x| c2 * x).collect();
    let mut gt = s.gt.clone();
    if !ops.has_tangential() {
        gt.iter_mut().for_each(|x| *x = 0.0);
    }
    let vtt = (-p.sigma * ops.lambda() * s.v - p.delta * s.vt - p.kappa * s.v + p.bulk * d[n - 1]) / p.mu;
    // boundary faces are slaved to the membrane, so their tangent entries stay 0
    ft[0] = 0.0;
    ft[n] = 0.0;
    LagrangianModeState {
        degree: s.degree,
        f: ft,
        g: gt,
        v: s.vt,
        ft: ftt,
        gt: gtt,
        vt: vtt,
    }
}

pub fn lagrangian_energy(ops: &ModalOperatorSet, p: &MaterialParams, s: &LagrangianModeState) -> EnergyBreakdown {
    let kinetic = 0.5 * p.rho0 * ops.vector_inner(&s.ft, &s.gt, &s.ft, &s.gt);
    let d = stored_divergence(ops, s);
    let compression = 0.5 * p.bulk * ops.scalar_inner(&d, &d);
    EnergyBreakdown::new(ops, p, kinetic, compression, s.v, s.vt)
}

pub fn check_compat_lagrangian(
    ops: &ModalOperatorSet,
    p: &MaterialParams,
    s: &LagrangianModeState,
    order: u32,
) -> Result<CompatReport> {
    check_compat_lagrangian_with_tol(ops, p, s, order, compat_tolerance(s.norm()))
}

pub fn check_compat_lagrangian_with_tol(
    ops: &ModalOperatorSet,
    p: &MaterialParams,
    s: &LagrangianModeState,
    order: u32,
    tol: f64,
) -> Result<CompatReport> {
    check_order(order, 3)?;
    s.check(ops)?;
    let n = ops.len();
    let shell = ops.domain().has_gamma0();
    let mut report = CompatReport::new(order, tol);
    report.push("gamma1_displacement_trace", s.f[n] + s.v);
    report.push("gamma1_velocity_trace", s.ft[n] + s.vt);
    if shell {
        report.push("gamma0_displacement_trace", s.f[0]);
        report.push("gamma0_velocity_trace", s.ft[0]);
    }
    if order >= 3 {
        let d = stored_divergence(ops, s);
        let dn1 = ops.surface_trace(&d, Boundary::Gamma1, TraceOrder::NormalDerivative)?;
        if shell {
            report.push(
                "gamma0_normal_div",
                ops.surface_trace(&d, Boundary::Gamma0, TraceOrder::NormalDerivative)?,
            );
        }
        report.push(
            "gamma1_membrane",
            p.bulk * p.mu / p.rho0 * dn1
                + p.sigma * ops.lambda() * s.f[n]
                + p.delta * s.ft[n]
                + p.kappa * s.f[n]
                + p.bulk * d[n - 1],
        );
    }
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct LagrangianModel {
    ops: ModalOperatorSet,
    params: MaterialParams,
}

impl LagrangianModel {
    pub fn new(ops: ModalOperatorSet, params: MaterialParams) -> Self {
        Self { ops, params }
    }

    fn block(&self) -> (usize, usize) {
        let n = self.ops.len();
        (n - 1, if self.ops.has_tangential() { n } else { 0 })
    }
}

impl ModeModel for LagrangianModel {
    type State = LagrangianModeState;

    fn family(&self) -> ModelFamily {
        ModelFamily::Lagrangian
    }

    fn ops(&self) -> &ModalOperatorSet {
        &self.ops
    }

    fn params(&self) -> &MaterialParams {
        &self.params
    }

    fn dim(&self) -> usize {
        let (nf, ng) = self.block();
        2 * (nf + ng) + 2
    }

    fn pack(&self, s: &LagrangianModeState) -> Vec<f64> {
        let n = self.ops.len();
        let (_, ng) = self.block();
        let mut x = Vec::with_capacity(self.dim());
        x.extend_from_slice(&s.f[1..n]);
        x.extend_from_slice(&s.g[..ng]);
        x.extend_from_slice(&s.ft[1..n]);
        x.extend_from_slice(&s.gt[..ng]);
        x.push(s.v);
        x.push(s.vt);
        x
    }

    fn unpack(&self, x: &[f64]) -> LagrangianModeState {
        let n = self.ops.len();
        let (nf, ng) = self.block();
        let mut s = LagrangianModeState::zeros(self.ops.degree(), n);
        let mut at = 0;
        let mut take = |len: usize| {
            let out = &x[at..at + len];
            at += len;
            out
        };
        s.f[1..n].copy_from_slice(take(nf));
        s.g[..ng].copy_from_slice(take(ng));
        s.ft[1..n].copy_from_slice(take(nf));
        s.gt[..ng].copy_from_slice(take(ng));
        s.v = x[at];
        s.vt = x[at + 1];
        s.f[n] = -s.v;
        s.ft[n] = -s.vt;
        s
    }

    fn positions(&self) -> Vec<f64> {
        let n = self.ops.len();
        let (_, ng) = self.block();
        let faces = &self.ops.faces()[1..n];
        let nodes = &self.ops.nodes()[..ng];
        let r1 = self.ops.outer_radius();
        faces
            .iter()
            .chain(nodes)
            .chain(faces)
            .chain(nodes)
            .copied()
            .chain([r1, r1])
            .collect()
    }

    fn rhs_packed(&self, x: &[f64]) -> Vec<f64> {
        self.pack(&lagrangian_rhs(&self.ops, &self.params, &self.unpack(x)))
    }

    fn membrane_velocity_index(&self) -> usize {
        self.dim() - 1
    }

    fn energy(&self, s: &LagrangianModeState) -> EnergyBreakdown {
        lagrangian_energy(&self.ops, &self.params, s)
    }

    fn constraint(&self, _s: &LagrangianModeState) -> f64 {
        0.0
    }

    fn curl_field(&self, s: &LagrangianModeState) -> Vec<f64> {
        let mut c = self.ops.curl_defect(&s.f, &s.g);
        c.extend(self.ops.curl_defect(&s.ft, &s.gt));
        c
    }

    fn boundary_traces(&self, s: &LagrangianModeState) -> (f64, f64) {
        let n = self.ops.len();
        (stored_divergence(&self.ops, s)[n - 1], s.f[n])
    }

    fn membrane(&self, s: &LagrangianModeState) -> (f64, f64) {
        (s.v, s.vt)
    }

    fn reversed(&self, s: &LagrangianModeState) -> LagrangianModeState {
        LagrangianModeState {
            ft: s.ft.iter().map(|x| -x).collect(),
            gt: s.gt.iter().map(|x| -x).collect(),
            vt: -s.vt,
            ..s.clone()
        }
    }
}
