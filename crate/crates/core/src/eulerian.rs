//! Pressure–velocity model: excess pressure `p`, curl-free velocity `(f, g)`
//! and the membrane pair, with `v⃗·ν = −v_t` on Γ1.

use crate::error::{Error, Result};
use crate::material::MaterialParams;
use crate::modal_ops::{dot, Boundary, ModalOperatorSet, TraceOrder};
use crate::model::{
    check_order, compat_tolerance, max_abs_all, CompatReport, EnergyBreakdown, ModeModel, ModelFamily,
    SQRT_4PI,
};

/// `f` holds `N + 1` face values; `p` and `g` hold `N` node values (`g` is zero for `l = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct EulerianModeState {
    pub degree: u32,
    pub p: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub v: f64,
    pub vt: f64,
}

impl EulerianModeState {
    pub fn zeros(degree: u32, n: usize) -> Self {
        Self {
            degree,
            p: vec![0.0; n],
            f: vec![0.0; n + 1],
            g: vec![0.0; n],
            v: 0.0,
            vt: 0.0,
        }
    }

    /// `self + a·other`.
    pub fn axpy(&self, a: f64, other: &Self) -> Self {
        use crate::model::axpy_vec;
        Self {
            degree: self.degree,
            p: axpy_vec(&self.p, a, &other.p),
            f: axpy_vec(&self.f, a, &other.f),
            g: axpy_vec(&self.g, a, &other.g),
            v: self.v + a * other.v,
            vt: self.vt + a * other.vt,
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        let s = |x: &[f64]| x.iter().map(|y| a * y).collect();
        Self {
            degree: self.degree,
            p: s(&self.p),
            f: s(&self.f),
            g: s(&self.g),
            v: a * self.v,
            vt: a * self.vt,
        }
    }

    pub fn norm(&self) -> f64 {
        max_abs_all([self.p.as_slice(), &self.f, &self.g], &[self.v, self.vt])
    }

    pub(crate) fn check(&self, ops: &ModalOperatorSet) -> Result<()> {
        if self.degree != ops.degree() {
            return Err(Error::DegreeMismatch(self.degree, ops.degree()));
        }
        let n = ops.len();
        for (len, expected) in [(self.p.len(), n), (self.f.len(), n + 1), (self.g.len(), n)] {
            if len != expected {
                return Err(Error::LengthMismatch { expected, got: len });
            }
        }
        Ok(())
    }
}

pub fn eulerian_rhs(ops: &ModalOperatorSet, mat: &MaterialParams, s: &EulerianModeState) -> EulerianModeState {
    let n = ops.len();
    let mut f = s.f.clone();
    f[0] = 0.0;
    f[n] = -s.vt;
    let pt: Vec<f64> = ops.div(&f, &s.g).into_iter().map(|x| -mat.bulk * x).collect();
    let ft: Vec<f64> = ops.grad(&s.p, 0.0, 0.0).into_iter().map(|x| -x / mat.rho0).collect();
    let gt: Vec<f64> = ops.tangential(&s.p).into_iter().map(|x| -x / mat.rho0).collect();
    let vtt = (-mat.sigma * ops.lambda() * s.v - mat.delta * s.vt - mat.kappa * s.v - s.p[n - 1]) / mat.mu;
    EulerianModeState {
        degree: s.degree,
        p: pt,
        f: ft,
        g: gt,
        v: s.vt,
        vt: vtt,
    }
}

pub fn eulerian_energy(ops: &ModalOperatorSet, mat: &MaterialParams, s: &EulerianModeState) -> EnergyBreakdown {
    let kinetic = 0.5 * mat.rho0 * ops.vector_inner(&s.f, &s.g, &s.f, &s.g);
    let compression = 0.5 / mat.bulk * ops.scalar_inner(&s.p, &s.p);
    EnergyBreakdown::new(ops, mat, kinetic, compression, s.v, s.vt)
}

/// ∫_Ω p − B∫_{Γ1} v for this mode (zero for l ≥ 1).
pub fn eulerian_constraint(ops: &ModalOperatorSet, mat: &MaterialParams, s: &EulerianModeState) -> f64 {
    if ops.degree() != 0 {
        return 0.0;
    }
    let r1 = ops.outer_radius();
    SQRT_4PI * (dot(ops.quad_weights(), &s.p) - mat.bulk * r1 * r1 * s.v)
}

pub fn check_compat_eulerian(
    ops: &ModalOperatorSet,
    mat: &MaterialParams,
    s: &EulerianModeState,
    order: u32,
) -> Result<CompatReport> {
    check_compat_eulerian_with_tol(ops, mat, s, order, compat_tolerance(s.norm()))
}

pub fn check_compat_eulerian_with_tol(
    ops: &ModalOperatorSet,
    mat: &MaterialParams,
    s: &EulerianModeState,
    order: u32,
    tol: f64,
) -> Result<CompatReport> {
    check_order(order, 3)?;
    s.check(ops)?;
    let n = ops.len();
    let shell = ops.domain().has_gamma0();
    let mut report = CompatReport::new(order, tol);
    report.push("gamma1_velocity_trace", s.f[n] + s.vt);
    if shell {
        report.push("gamma0_velocity_trace", s.f[0]);
    }
    if order >= 3 {
        if shell {
            report.push(
                "gamma0_normal_pressure",
                ops.surface_trace(&s.p, Boundary::Gamma0, TraceOrder::NormalDerivative)?,
            );
        }
        let dn1 = ops.surface_trace(&s.p, Boundary::Gamma1, TraceOrder::NormalDerivative)?;
        let force = -mat.sigma * ops.lambda() * s.v - mat.delta * s.vt - mat.kappa * s.v - s.p[n - 1];
        report.push("gamma1_membrane", mat.mu * dn1 - mat.rho0 * force);
    }
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct EulerianModel {
    ops: ModalOperatorSet,
    params: MaterialParams,
}

impl EulerianModel {
    pub fn new(ops: ModalOperatorSet, params: MaterialParams) -> Self {
        Self { ops, params }
    }

    fn ng(&self) -> usize {
        if self.ops.has_tangential() {
            self.ops.len()
        } else {
            0
        }
    }
}

impl ModeModel for EulerianModel {
    type State = EulerianModeState;

    fn family(&self) -> ModelFamily {
        ModelFamily::Eulerian
    }

    fn ops(&self) -> &ModalOperatorSet {
        &self.ops
    }

    fn params(&self) -> &MaterialParams {
        &self.params
    }

    fn dim(&self) -> usize {
        2 * self.ops.len() - 1 + self.ng() + 2
    }

    fn pack(&self, s: &EulerianModeState) -> Vec<f64> {
        let n = self.ops.len();
        let mut x = Vec::with_capacity(self.dim());
        x.extend_from_slice(&s.p);
        x.extend_from_slice(&s.f[1..n]);
        x.extend_from_slice(&s.g[..self.ng()]);
        x.push(s.v);
        x.push(s.vt);
        x
    }

    fn unpack(&self, x: &[f64]) -> EulerianModeState {
        let n = self.ops.len();
        let ng = self.ng();
        let mut s = EulerianModeState::zeros(self.ops.degree(), n);
        s.p.copy_from_slice(&x[..n]);
        s.f[1..n].copy_from_slice(&x[n..2 * n - 1]);
        s.g[..ng].copy_from_slice(&x[2 * n - 1..2 * n - 1 + ng]);
        s.v = x[2 * n - 1 + ng];
        s.vt = x[2 * n + ng];
        s.f[n] = -s.vt;
        s
    }

    fn positions(&self) -> Vec<f64> {
        let n = self.ops.len();
        let nodes = self.ops.nodes();
        let r1 = self.ops.outer_radius();
        nodes
            .iter()
            .chain(&self.ops.faces()[1..n])
            .chain(&nodes[..self.ng()])
            .copied()
            .chain([r1, r1])
            .collect()
    }

    fn rhs_packed(&self, x: &[f64]) -> Vec<f64> {
        self.pack(&eulerian_rhs(&self.ops, &self.params, &self.unpack(x)))
    }

    fn membrane_velocity_index(&self) -> usize {
        self.dim() - 1
    }

    fn energy(&self, s: &EulerianModeState) -> EnergyBreakdown {
        eulerian_energy(&self.ops, &self.params, s)
    }

    fn constraint(&self, s: &EulerianModeState) -> f64 {
        eulerian_constraint(&self.ops, &self.params, s)
    }

    fn curl_field(&self, s: &EulerianModeState) -> Vec<f64> {
        self.ops.curl_defect(&s.f, &s.g)
    }

    fn boundary_traces(&self, s: &EulerianModeState) -> (f64, f64) {
        let n = self.ops.len();
        (s.p[n - 1], s.f[n])
    }

    fn membrane(&self, s: &EulerianModeState) -> (f64, f64) {
        (s.v, s.vt)
    }

    fn reversed(&self, s: &EulerianModeState) -> EulerianModeState {
        EulerianModeState {
            f: s.f.iter().map(|x| -x).collect(),
            g: s.g.iter().map(|x| -x).collect(),
            vt: -s.vt,
            ..s.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::make_domain;
    use crate::modal_ops::{assemble_mode_operators, max_abs};
    use approx::assert_relative_eq;

    fn ops(r0: f64, n: usize, l: u32) -> ModalOperatorSet {
        let (d, g) = make_domain(r0, 1.0, n).unwrap();
        assemble_mode_operators(&d, &g, l)
    }

    #[test]
    fn constant_pressure_pushes_membrane() {
        let o = ops(0.0, 32, 0);
        let mat = MaterialParams {
            mu: 2.0,
            ..MaterialParams::unit()
        };
        let mut s = EulerianModeState::zeros(0, 32);
        s.p = vec![1.5; 32];
        let t = eulerian_rhs(&o, &mat, &s);
        assert!(t.p.iter().all(|&x| x == 0.0));
        assert!(max_abs(&t.f) < 1e-14);
        assert_eq!(t.v, 0.0);
        assert_relative_eq!(t.vt, -1.5 / 2.0, max_relative = 1e-15);
    }

    #[test]
    fn constant_pressure_energy_and_constraint() {
        let o = ops(0.0, 32, 0);
        let mat = MaterialParams::unit();
        let mut s = EulerianModeState::zeros(0, 32);
        s.p = vec![1.0; 32];
        assert_relative_eq!(eulerian_energy(&o, &mat, &s).fluid_compression, 1.0 / 6.0, max_relative = 1e-13);
        s.v = 1.0 / 3.0;
        assert!(eulerian_constraint(&o, &mat, &s).abs() < 1e-14);
        let o1 = ops(0.0, 32, 1);
        let mut s1 = s.clone();
        s1.degree = 1;
        assert_eq!(eulerian_constraint(&o1, &mat, &s1), 0.0);
    }

    #[test]
    fn zero_and_scaling() {
        let o = ops(0.5, 16, 2);
        let mat = MaterialParams::unit();
        let z = EulerianModeState::zeros(2, 16);
        assert_eq!(eulerian_rhs(&o, &mat, &z), z);
        assert_eq!(eulerian_energy(&o, &mat, &z).total, 0.0);
        let m = EulerianModel::new(o.clone(), mat);
        let x: Vec<f64> = (0..m.dim()).map(|i| (i as f64 * 0.7).sin()).collect();
        let s = m.unpack(&x);
        assert_relative_eq!(
            eulerian_energy(&o, &mat, &s.scaled(3.0)).total,
            9.0 * eulerian_energy(&o, &mat, &s).total,
            max_relative = 1e-13
        );
    }

    #[test]
    fn trace_checks() {
        let o = ops(0.5, 16, 0);
        let mat = MaterialParams::unit();
        let mut s = EulerianModeState::zeros(0, 16);
        s.f[16] = -1.0;
        s.vt = 1.0;
        let r = check_compat_eulerian(&o, &mat, &s, 2).unwrap();
        assert!(r.passed());
        assert_eq!(r.max_residual(), 0.0);
        s.f[16] = 1.0;
        let r = check_compat_eulerian(&o, &mat, &s, 2).unwrap();
        assert!(!r.passed());
        assert_relative_eq!(r.residual("gamma1_velocity_trace").unwrap(), 2.0);
        assert_eq!(check_compat_eulerian(&o, &mat, &s, 4), Err(Error::UnsupportedOrder(4)));
    }

    #[test]
    fn pack_layout() {
        for l in [0, 1] {
            let m = EulerianModel::new(ops(0.0, 10, l), MaterialParams::unit());
            let x: Vec<f64> = (0..m.dim()).map(|i| i as f64 + 1.0).collect();
            let s = m.unpack(&x);
            assert_eq!(m.pack(&s), x);
            assert_eq!(s.f[10], -s.vt);
            assert_eq!(m.positions().len(), m.dim());
        }
    }
}
