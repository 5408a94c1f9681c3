//! Maps between the potential, displacement and pressure–velocity
//! descriptions, on single states and on recorded trajectories.

use serde::{Deserialize, Serialize};

use crate::elliptic::{solve_div_curl, DivCurlProblem};
use crate::error::{Error, Result};
use crate::eulerian::{eulerian_constraint, eulerian_energy, EulerianModeState};
use crate::evolve::TrajectoryRecord;
use crate::lagrangian::{lagrangian_divergence, lagrangian_energy, LagrangianModeState};
use crate::material::MaterialParams;
use crate::modal_ops::{dot, ModalOperatorSet};
use crate::model::{EnergyBreakdown, ModelTag, SQRT_4PI};
use crate::potential::{constraint_functional, potential_energy, PotentialModeState};

/// Representative chosen from the class of potentials that differ by a constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum GaugePolicy {
    /// `∫ u r² dr = 0` at `t = 0` for `l = 0`; the constant is then carried unchanged.
    #[default]
    ZeroMeanPotential,
}

impl GaugePolicy {
    pub fn apply(self, ops: &ModalOperatorSet, u: &mut [f64]) {
        match self {
            GaugePolicy::ZeroMeanPotential => {
                if ops.degree() == 0 {
                    let w = ops.quad_weights();
                    let mean = dot(w, u) / w.iter().sum::<f64>();
                    u.iter_mut().for_each(|x| *x -= mean);
                }
            }
        }
    }
}

/// Potential `u` with `−∇u = (f, g)`; `f` on faces, `g` on nodes.
pub fn potential_from_gradient(ops: &ModalOperatorSet, f: &[f64], g: &[f64], gauge: GaugePolicy) -> Vec<f64> {
    if ops.has_tangential() {
        return ops.radial_from_tangential(g).into_iter().map(|x| -x).collect();
    }
    let r = ops.nodes();
    let mut u = vec![0.0; ops.len()];
    for k in 1..u.len() {
        u[k] = u[k - 1] - (r[k] - r[k - 1]) * f[k];
    }
    gauge.apply(ops, &mut u);
    u
}

fn neg(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| -v).collect()
}

fn constraint_tol(ops: &ModalOperatorSet, mat: &MaterialParams, norm: f64) -> f64 {
    let vol: f64 = ops.quad_weights().iter().sum();
    let r1 = ops.outer_radius();
    1e-8 * (1.0 + SQRT_4PI * (mat.rho0.max(1.0) * vol + mat.bulk * r1 * r1) * norm)
}

/// Ψ_PcL: `−B Div r⃗ = ρ0 u_t`, `r⃗·ν = −v`, `r⃗_t = −∇u`.
pub fn map_potential_to_lagrangian(
    ops: &ModalOperatorSet,
    mat: &MaterialParams,
    s: &PotentialModeState,
) -> Result<LagrangianModeState> {
    s.check(ops)?;
    let c = constraint_functional(ops, mat, s);
    let tol = constraint_tol(ops, mat, s.norm());
    if c.abs() > tol {
        return Err(Error::ConstraintViolated { residual: c, tol });
    }
    let sol = solve_div_curl(
        ops,
        mat,
        &DivCurlProblem {
            degree: s.degree,
            w: s.ut.clone(),
            vbar: s.v,
        },
    )?;
    Ok(LagrangianModeState {
        degree: s.degree,
        f: sol.f,
        g: sol.g,
        v: s.v,
        ft: neg(&ops.grad_with_traces(&s.u)),
        gt: neg(&ops.tangential(&s.u)),
        vt: s.vt,
    })
}

/// Ψ_PE: `p = ρ0 u_t`, `v⃗ = −∇u`.
pub fn map_potential_to_eulerian(ops: &ModalOperatorSet, mat: &MaterialParams, s: &PotentialModeState) -> EulerianModeState {
    EulerianModeState {
        degree: s.degree,
        p: s.ut.iter().map(|x| mat.rho0 * x).collect(),
        f: neg(&ops.grad_with_traces(&s.u)),
        g: neg(&ops.tangential(&s.u)),
        v: s.v,
        vt: s.vt,
    }
}

/// Ψ_LEc: `p = −B Div r⃗`, `v⃗ = r⃗_t`.
pub fn map_lagrangian_to_eulerian(ops: &ModalOperatorSet, mat: &MaterialParams, s: &LagrangianModeState) -> EulerianModeState {
    EulerianModeState {
        degree: s.degree,
        p: lagrangian_divergence(ops, s).into_iter().map(|d| -mat.bulk * d).collect(),
        f: s.ft.clone(),
        g: s.gt.clone(),
        v: s.v,
        vt: s.vt,
    }
}

fn map_record<A, B>(
    traj: &TrajectoryRecord<A>,
    tag: ModelTag,
    states: Vec<B>,
    energy: impl Fn(&B) -> EnergyBreakdown,
) -> TrajectoryRecord<B> {
    TrajectoryRecord {
        tag,
        degree: traj.degree,
        scheme: traj.scheme,
        dt: traj.dt,
        record_every: traj.record_every,
        times: traj.times.clone(),
        energies: states.iter().map(energy).collect(),
        states,
        dissipation: traj.dissipation.clone(),
        compensation: Vec::new(),
    }
}

/// Trapezoid time integral of `rate` accumulated onto `start`.
fn integrate(times: &[f64], start: Vec<f64>, rates: impl Fn(usize) -> Vec<f64>) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(times.len());
    let mut prev_rate = rates(0);
    out.push(start);
    for k in 1..times.len() {
        let rate = rates(k);
        let h = 0.5 * (times[k] - times[k - 1]);
        let next: Vec<f64> = out[k - 1]
            .iter()
            .zip(prev_rate.iter().zip(&rate))
            .map(|(x, (a, b))| x + h * (a + b))
            .collect();
        out.push(next);
        prev_rate = rate;
    }
    out
}

fn check_degree<S>(ops: &ModalOperatorSet, traj: &TrajectoryRecord<S>) -> Result<()> {
    if traj.degree != ops.degree() {
        return Err(Error::DegreeMismatch(traj.degree, ops.degree()));
    }
    if traj.is_empty() {
        return Err(Error::validation("trajectory", "has no samples"));
    }
    traj.require_every_step()
}

/// Ψ̇_PcL applied sample by sample.
pub fn map_potential_to_lagrangian_trajectory(
    ops: &ModalOperatorSet,
    mat: &MaterialParams,
    traj: &TrajectoryRecord<PotentialModeState>,
) -> Result<TrajectoryRecord<LagrangianModeState>> {
    let states = traj
        .states
        .iter()
        .map(|s| map_potential_to_lagrangian(ops, mat, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(map_record(traj, ModelTag::L, states, |s| lagrangian_energy(ops, mat, s)))
}

/// Ψ̇_PE applied sample by sample.
pub fn map_potential_to_eulerian_trajectory(
    ops: &ModalOperatorSet,
    mat: &MaterialParams,
    traj: &TrajectoryRecord<PotentialModeState>,
) -> TrajectoryRecord<EulerianModeState> {
    let tag = if traj.tag == ModelTag::Pc { ModelTag::Ec } else { ModelTag::E };
    let states = traj.states.iter().map(|s| map_potential_to_eulerian(ops, mat, s)).collect();
    map_record(traj, tag, states, |s| eulerian_energy(ops, mat, s))
}

/// Ψ_LEc applied sample by sample.
pub fn map_lagrangian_to_eulerian_trajectory(
    ops: &ModalOperatorSet,
    mat: &MaterialParams,
    traj: &TrajectoryRecord<LagrangianModeState>,
) -> TrajectoryRecord<EulerianModeState> {
    let states = traj.states.iter().map(|s| map_lagrangian_to_eulerian(ops, mat, s)).collect();
    map_record(traj, ModelTag::Ec, states, |s| eulerian_energy(ops, mat, s))
}

/// Ψ̇_LPc: `u_t = −(B/ρ0) Div r⃗`, `−∇u(0) = r⃗_t(0)`, `u(t) = u(0) + ∫ u_t`.
pub fn map_lagrangian_to_potential(
    ops: &ModalOperatorSet,
    mat: &MaterialParams,
    traj: &TrajectoryRecord<LagrangianModeState>,
    gauge: GaugePolicy,
) -> Result<TrajectoryRecord<PotentialModeState>> {
    check_degree(ops, traj)?;
    let c = mat.bulk / mat.rho0;
    let ut: Vec<Vec<f64>> = traj
        .states
        .iter()
        .map(|s| lagrangian_divergence(ops, s).into_iter().map(|d| -c * d).collect())
        .collect();
    let s0 = &traj.states[0];
    let u0 = potential_from_gradient(ops, &s0.ft, &s0.gt, gauge);
    let us = integrate(&traj.times, u0, |k| ut[k].clone());
    let states = us
        .into_iter()
        .zip(ut)
        .zip(&traj.states)
        .map(|((u, ut), s)| PotentialModeState {
            degree: s.degree,
            u,
            ut,
            v: s.v,
            vt: s.vt,
        })
        .collect();
    Ok(map_record(traj, ModelTag::Pc, states, |s| potential_energy(ops, mat, s)))
}

/// Ψ̇_EP: `u_t = p/ρ0`, `−∇u(0) = v⃗(0)`, `u(t) = u(0) + (1/ρ0)∫ p`.
pub fn map_eulerian_to_potential(
    ops: &ModalOperatorSet,
    mat: &MaterialParams,
    traj: &TrajectoryRecord<EulerianModeState>,
    gauge: GaugePolicy,
) -> Result<TrajectoryRecord<PotentialModeState>> {
    check_degree(ops, traj)?;
    let ut: Vec<Vec<f64>> = traj
        .states
        .iter()
        .map(|s| s.p.iter().map(|p| p / mat.rho0).collect())
        .collect();
    let s0 = &traj.states[0];
    let u0 = potential_from_gradient(ops, &s0.f, &s0.g, gauge);
    let us = integrate(&traj.times, u0, |k| ut[k].clone());
    let states = us
        .into_iter()
        .zip(ut)
        .zip(&traj.states)
        .map(|((u, ut), s)| PotentialModeState {
            degree: s.degree,
            u,
            ut,
            v: s.v,
            vt: s.vt,
        })
        .collect();
    let tag = if traj.tag == ModelTag::Ec { ModelTag::Pc } else { ModelTag::P };
    Ok(map_record(traj, tag, states, |s| potential_energy(ops, mat, s)))
}

/// Ψ_EcL: `−B Div r⃗(0) = p(0)`, `r⃗(0)·ν = −v(0)`, `r⃗(t) = r⃗(0) + ∫ v⃗`, `r⃗_t = v⃗`.
pub fn map_eulerian_to_lagrangian(
    ops: &ModalOperatorSet,
    mat: &MaterialParams,
    traj: &TrajectoryRecord<EulerianModeState>,
) -> Result<TrajectoryRecord<LagrangianModeState>> {
    check_degree(ops, traj)?;
    let s0 = &traj.states[0];
    s0.check(ops)?;
    let c = eulerian_constraint(ops, mat, s0);
    let tol = constraint_tol(ops, mat, s0.norm());
    if c.abs() > tol {
        return Err(Error::ConstraintViolated { residual: c, tol });
    }
    let sol = solve_div_curl(
        ops,
        mat,
        &DivCurlProblem {
            degree: s0.degree,
            w: s0.p.iter().map(|p| p / mat.rho0).collect(),
            vbar: s0.v,
        },
    )?;
    let n = ops.len();
    let mut start = sol.f;
    start.extend(sol.g);
    let fields = integrate(&traj.times, start, |k| {
        let s = &traj.states[k];
        let mut rate = s.f.clone();
        rate.extend_from_slice(&s.g);
        rate
    });
    let states = fields
        .into_iter()
        .zip(&traj.states)
        .map(|(mut fg, s)| {
            let g = fg.split_off(n + 1);
            let mut f = fg;
            f[0] = 0.0;
            f[n] = -s.v;
            let mut ft = s.f.clone();
            ft[n] = -s.vt;
            LagrangianModeState {
                degree: s.degree,
                f,
                g,
                v: s.v,
                ft,
                gt: s.g.clone(),
                vt: s.vt,
            }
        })
        .collect();
    Ok(map_record(traj, ModelTag::L, states, |s| lagrangian_energy(ops, mat, s)))
}

/// Max over samples of |−B Div r⃗(t) − p(t)|.
pub fn pressure_divergence_defect(
    ops: &ModalOperatorSet,
    mat: &MaterialParams,
    eul: &TrajectoryRecord<EulerianModeState>,
    lag: &TrajectoryRecord<LagrangianModeState>,
) -> f64 {
    eul.states
        .iter()
        .zip(&lag.states)
        .map(|(e, l)| {
            let d = lagrangian_divergence(ops, l);
            d.iter().zip(&e.p).fold(0.0f64, |m, (d, p)| m.max((-mat.bulk * d - p).abs()))
        })
        .fold(0.0, f64::max)
}

/// Relative discrete L² distance between two packed trajectories sampled at the same times.
pub fn trajectory_discrepancy(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        for (p, q) in x.iter().zip(y) {
            num += (p - q) * (p - q);
            den += p * p;
        }
    }
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EquivalenceKind {
    PcL,
    PE,
    EcL,
}

/// A single-mode state of any of the three models.
#[derive(Debug, Clone, PartialEq)]
pub enum ModeState {
    Potential(PotentialModeState),
    Lagrangian(LagrangianModeState),
    Eulerian(EulerianModeState),
}

impl ModeState {
    pub fn degree(&self) -> u32 {
        match self {
            ModeState::Potential(s) => s.degree,
            ModeState::Lagrangian(s) => s.degree,
            ModeState::Eulerian(s) => s.degree,
        }
    }

    pub fn norm(&self) -> f64 {
        match self {
            ModeState::Potential(s) => s.norm(),
            ModeState::Lagrangian(s) => s.norm(),
            ModeState::Eulerian(s) => s.norm(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub kind: EquivalenceKind,
    pub tol: f64,
    pub residuals: Vec<(&'static str, f64)>,
    pub passed: bool,
}

impl EquivalenceReport {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, (_, r)| m.max(*r))
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Max over interior faces and nodes of |−∇u − (f, g)|.
fn gradient_residual(ops: &ModalOperatorSet, u: &[f64], f: &[f64], g: &[f64]) -> f64 {
    let n = ops.len();
    let grad = ops.grad(u, 0.0, 0.0);
    let radial = (1..n).fold(0.0f64, |m, k| m.max((grad[k] + f[k]).abs()));
    if !ops.has_tangential() {
        return radial;
    }
    let tang = ops.tangential(u);
    radial.max(tang.iter().zip(g).fold(0.0, |m, (a, b)| m.max((a + b).abs())))
}

/// Checks that `a` and `b` are matched initial data for the given pair of models.
pub fn data_equivalence(
    ops: &ModalOperatorSet,
    mat: &MaterialParams,
    kind: EquivalenceKind,
    a: &ModeState,
    b: &ModeState,
) -> Result<EquivalenceReport> {
    let tol = 1e-8 * (1.0 + a.norm().max(b.norm()));
    data_equivalence_with_tol(ops, mat, kind, a, b, tol)
}

pub fn data_equivalence_with_tol(
    ops: &ModalOperatorSet,
    mat: &MaterialParams,
    kind: EquivalenceKind,
    a: &ModeState,
    b: &ModeState,
    tol: f64,
) -> Result<EquivalenceReport> {
    if a.degree() != b.degree() {
        return Err(Error::DegreeMismatch(a.degree(), b.degree()));
    }
    if a.degree() != ops.degree() {
        return Err(Error::DegreeMismatch(a.degree(), ops.degree()));
    }
    let membrane = |v1: f64, vt1: f64, v2: f64, vt2: f64| (v1 - v2).abs().max((vt1 - vt2).abs());
    let residuals = match (kind, a, b) {
        (EquivalenceKind::PcL, ModeState::Potential(p), ModeState::Lagrangian(l)) => {
            p.check(ops)?;
            l.check(ops)?;
            let d = ops.div(&l.f, &l.g);
            let rate: Vec<f64> = p.ut.iter().map(|x| mat.rho0 * x).collect();
            vec![
                ("gradient_velocity", gradient_residual(ops, &p.u, &l.ft, &l.gt)),
                ("divergence_rate", max_diff(&neg(&d).iter().map(|x| mat.bulk * x).collect::<Vec<_>>(), &rate)),
                ("membrane", membrane(p.v, p.vt, l.v, l.vt)),
            ]
        }
        (EquivalenceKind::PE, ModeState::Potential(p), ModeState::Eulerian(e)) => {
            p.check(ops)?;
            e.check(ops)?;
            let rate: Vec<f64> = p.ut.iter().map(|x| mat.rho0 * x).collect();
            vec![
                ("gradient_velocity", gradient_residual(ops, &p.u, &e.f, &e.g)),
                ("pressure_rate", max_diff(&e.p, &rate)),
                ("membrane", membrane(p.v, p.vt, e.v, e.vt)),
            ]
        }
        (EquivalenceKind::EcL, ModeState::Eulerian(e), ModeState::Lagrangian(l)) => {
            e.check(ops)?;
            l.check(ops)?;
            let p: Vec<f64> = ops.div(&l.f, &l.g).iter().map(|d| -mat.bulk * d).collect();
            let velocity = max_diff(&e.f, &l.ft).max(if ops.has_tangential() { max_diff(&e.g, &l.gt) } else { 0.0 });
            vec![
                ("divergence_pressure", max_diff(&p, &e.p)),
                ("velocity", velocity),
                ("membrane", membrane(e.v, e.vt, l.v, l.vt)),
            ]
        }
        _ => {
            return Err(Error::validation(
                "data_equivalence",
                format!("state kinds do not match {kind:?}"),
            ))
        }
    };
    let passed = residuals.iter().all(|(_, r)| *r <= tol);
    Ok(EquivalenceReport {
        kind,
        tol,
        residuals,
        passed,
    })
}
