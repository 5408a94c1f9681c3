//! Verification audits on recorded trajectories: energy balance, conserved
//! quantities and space–time weak-form residuals.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::eulerian::EulerianModeState;
use crate::evolve::{evolve, IntegratorConfig, TrajectoryRecord};
use crate::lagrangian::{lagrangian_divergence, LagrangianModeState};
use crate::material::MaterialParams;
use crate::modal_ops::ModalOperatorSet;
use crate::model::{ModeModel, ModelTag};
use crate::potential::PotentialModeState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyAudit {
    /// max over sample pairs of |E(t) − E(s) + ∫_s^t δ R1² v_t²|.
    pub residual: f64,
    pub initial_energy: f64,
    pub relative: f64,
}

pub fn audit_energy<S>(traj: &TrajectoryRecord<S>) -> EnergyAudit {
    let diss = traj.cumulative_dissipation();
    let (lo, hi) = traj
        .energies
        .iter()
        .zip(&diss)
        .map(|(e, d)| e.total + d)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
    let residual = if traj.is_empty() { 0.0 } else { hi - lo };
    let initial_energy = traj.energies.first().map_or(0.0, |e| e.total);
    EnergyAudit {
        residual,
        initial_energy,
        relative: if initial_energy > 0.0 { residual / initial_energy } else { residual },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConservationAudit {
    pub constraint_initial: f64,
    pub constraint_drift: f64,
    pub curl_initial: f64,
    /// max over samples and faces of |c(t) − c(0)| for the curl defect c.
    pub curl_drift: f64,
    /// `curl_drift` divided by the horizon.
    pub curl_drift_rate: f64,
}

pub fn audit_conservation<M: ModeModel>(traj: &TrajectoryRecord<M::State>, model: &M) -> ConservationAudit {
    let Some(first) = traj.states.first() else {
        return ConservationAudit {
            constraint_initial: 0.0,
            constraint_drift: 0.0,
            curl_initial: 0.0,
            curl_drift: 0.0,
            curl_drift_rate: 0.0,
        };
    };
    let c0 = model.constraint(first);
    let curl0 = model.curl_field(first);
    let mut constraint_drift = 0.0f64;
    let mut curl_drift = 0.0f64;
    for s in &traj.states {
        constraint_drift = constraint_drift.max((model.constraint(s) - c0).abs());
        let c = model.curl_field(s);
        curl_drift = c.iter().zip(&curl0).fold(curl_drift, |m, (a, b)| m.max((a - b).abs()));
    }
    let horizon = traj.times.last().copied().unwrap_or(0.0);
    ConservationAudit {
        constraint_initial: c0,
        constraint_drift,
        curl_initial: crate::modal_ops::max_abs(&curl0),
        curl_drift,
        curl_drift_rate: if horizon > 0.0 { curl_drift / horizon } else { curl_drift },
    }
}

/// Energy-identity residuals for `dt, dt/2, …` (`levels` runs).
pub fn energy_identity_ladder<M: ModeModel>(
    model: &M,
    tag: ModelTag,
    init: &M::State,
    cfg: &IntegratorConfig,
    levels: usize,
) -> Result<Vec<(f64, f64)>> {
    (0..levels)
        .map(|k| {
            let c = IntegratorConfig {
                dt: cfg.dt / f64::powi(2.0, k as i32),
                ..*cfg
            };
            let tr = evolve(model, tag, init, &c)?;
            Ok((c.dt, audit_energy(&tr).residual))
        })
        .collect()
}

/// log₂ ratios of successive errors of a halving ladder.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// `Σ c_i r^{p_i}` with analytic derivatives.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialPolynomial {
    pub terms: Vec<(f64, i32)>,
}

impl RadialPolynomial {
    pub fn value(&self, r: f64) -> f64 {
        self.terms.iter().map(|&(c, p)| c * r.powi(p)).sum()
    }

    pub fn d1(&self, r: f64) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.1 != 0)
            .map(|&(c, p)| c * p as f64 * r.powi(p - 1))
            .sum()
    }

    /// Modal Laplacian `b'' + 2b'/r − l(l+1) b/r²`.
    pub fn modal_laplacian(&self, l: u32, r: f64) -> f64 {
        let ll1 = f64::from(l * (l + 1));
        self.terms
            .iter()
            .map(|&(c, p)| {
                let k = f64::from(p) * f64::from(p + 1) - ll1;
                if k == 0.0 {
                    0.0
                } else {
                    c * k * r.powi(p - 2)
                }
            })
            .sum()
    }
}

/// Scalar test profiles `r^{l+2k}`, `k = 0..count`.
pub fn scalar_test_family(ops: &ModalOperatorSet, count: usize) -> Vec<RadialPolynomial> {
    let l = ops.degree() as i32;
    (0..count as i32)
        .map(|k| RadialPolynomial {
            terms: vec![(1.0, l + 2 * k)],
        })
        .collect()
}

/// Potentials `b = r^{l+2k}(r − R0)²` of gradient test fields `(b', b/r)`; `b'(R0) = 0`.
pub fn vector_test_family(ops: &ModalOperatorSet, count: usize) -> Vec<RadialPolynomial> {
    let l = ops.degree() as i32;
    let r0 = ops.domain().inner_radius();
    (0..count as i32)
        .map(|k| {
            let m = l + 2 * k;
            let mut terms = vec![(1.0, m + 2)];
            if r0 != 0.0 {
                terms.push((-2.0 * r0, m + 1));
                terms.push((r0 * r0, m));
            }
            RadialPolynomial { terms }
        })
        .collect()
}

/// Smooth bump `exp(1 − 1/(1 − x²))` supported on `(t0, t1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeBump {
    pub t0: f64,
    pub t1: f64,
}

impl TimeBump {
    fn x(&self, t: f64) -> f64 {
        (2.0 * t - self.t0 - self.t1) / (self.t1 - self.t0)
    }

    pub fn value(&self, t: f64) -> f64 {
        let x = self.x(t);
        if x.abs() >= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / (1.0 - x * x)).exp()
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let x = self.x(t);
        if x.abs() >= 1.0 {
            return 0.0;
        }
        let q = 1.0 - x * x;
        self.value(t) * (-2.0 * x / (q * q)) * 2.0 / (self.t1 - self.t0)
    }

    /// Bump on the middle of `[0, horizon]`, away from both ends.
    pub fn centered(horizon: f64) -> Self {
        Self {
            t0: 0.1 * horizon,
            t1: 0.9 * horizon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakResidual {
    pub identity: &'static str,
    pub test_index: usize,
    pub residual: f64,
}

fn check_window<S>(traj: &TrajectoryRecord<S>, bump: &TimeBump) -> Result<()> {
    let (Some(&a), Some(&b)) = (traj.times.first(), traj.times.last()) else {
        return Err(Error::validation("trajectory", "has no samples"));
    };
    if !(bump.t0 >= a && bump.t1 <= b && bump.t1 > bump.t0) {
        return Err(Error::InadmissibleTestFunction(format!(
            "time window ({}, {}) is not inside the horizon ({a}, {b})",
            bump.t0, bump.t1
        )));
    }
    Ok(())
}

fn check_vector_test(ops: &ModalOperatorSet, b: &RadialPolynomial) -> Result<()> {
    if ops.domain().has_gamma0() {
        let r0 = ops.domain().inner_radius();
        let trace = b.d1(r0);
        if trace.abs() > 1e-12 * (1.0 + b.terms.iter().map(|t| t.0.abs()).sum::<f64>()) {
            return Err(Error::InadmissibleTestFunction(format!(
                "normal trace {trace} on the inner sphere"
            )));
        }
    }
    Ok(())
}

/// Trapezoid rule in time.
fn time_integral(times: &[f64], f: impl Fn(usize) -> f64) -> f64 {
    (1..times.len())
        .map(|k| 0.5 * (times[k] - times[k - 1]) * (f(k - 1) + f(k)))
        .sum()
}

/// Σ_k A_k f_k a(r_k) over the faces, skipping zero-weight faces.
fn face_sum(ops: &ModalOperatorSet, f: &[f64], a: impl Fn(f64) -> f64) -> f64 {
    ops.face_weights()
        .iter()
        .zip(ops.faces())
        .zip(f)
        .filter(|((w, _), _)| **w != 0.0)
        .map(|((w, r), x)| w * x * a(*r))
        .sum()
}

fn node_sum(ops: &ModalOperatorSet, x: &[f64], a: impl Fn(f64) -> f64) -> f64 {
    ops.quad_weights()
        .iter()
        .zip(ops.nodes())
        .zip(x)
        .map(|((w, r), v)| w * v * a(*r))
        .sum()
}

/// ∫ (f α + l(l+1) g β) r² dr for a gradient test field `(α, β) = (b', b/r)`.
fn vector_pairing(ops: &ModalOperatorSet, f: &[f64], g: &[f64], b: &RadialPolynomial) -> f64 {
    let radial = face_sum(ops, f, |r| b.d1(r));
    if ops.has_tangential() {
        radial + ops.ll1() * node_sum(ops, g, |r| b.value(r) / r)
    } else {
        radial
    }
}

/// Residuals of the two potential-model identities: the bulk identity for each scalar
/// test profile, then the membrane identity with a constant surface profile.
pub fn weak_residuals_potential(
    ops: &ModalOperatorSet,
    mat: &MaterialParams,
    traj: &TrajectoryRecord<PotentialModeState>,
    bump: &TimeBump,
    tests: &[RadialPolynomial],
) -> Result<Vec<WeakResidual>> {
    check_window(traj, bump)?;
    let r1 = ops.outer_radius();
    let n = ops.len();
    let t = &traj.times;
    let mut out = Vec::new();
    for (i, a) in tests.iter().enumerate() {
        let res = time_integral(t, |k| {
            let s = &traj.states[k];
            let (th, dth) = (bump.value(t[k]), bump.derivative(t[k]));
            if th == 0.0 && dth == 0.0 {
                return 0.0;
            }
            let grad = ops.grad(&s.u, 0.0, 0.0);
            let tang = ops.tangential(&s.u);
            -mat.rho0 * dth * node_sum(ops, &s.ut, |r| a.value(r)) + th * mat.bulk * vector_pairing(ops, &grad, &tang, a)
                - th * mat.bulk * r1 * r1 * s.vt * a.value(r1)
        });
        out.push(WeakResidual {
            identity: "potential_bulk",
            test_index: i,
            residual: res,
        });
    }
    let ll1 = ops.ll1();
    let res = time_integral(t, |k| {
        let s = &traj.states[k];
        let (th, dth) = (bump.value(t[k]), bump.derivative(t[k]));
        r1 * r1 * (-mat.mu * s.vt * dth + mat.delta * s.vt * th + mat.kappa * s.v * th - mat.rho0 * s.u[n - 1] * dth)
            + mat.sigma * ll1 * s.v * th
    });
    out.push(WeakResidual {
        identity: "potential_membrane",
        test_index: 0,
        residual: res,
    });
    Ok(out)
}

/// Membrane part shared by the displacement and momentum identities, with `ψ = −θ α(R1)`.
fn membrane_pairing(ops: &ModalOperatorSet, mat: &MaterialParams, v: f64, vt: f64, psi: f64, dpsi: f64) -> f64 {
    let r1 = ops.outer_radius();
    r1 * r1 * (mat.mu * vt * dpsi - mat.delta * vt * psi - mat.kappa * v * psi) - mat.sigma * ops.ll1() * v * psi
}

/// Residual of the displacement-model identity for each gradient test field.
pub fn weak_residuals_lagrangian(
    ops: &ModalOperatorSet,
    mat: &MaterialParams,
    traj: &TrajectoryRecord<LagrangianModeState>,
    bump: &TimeBump,
    tests: &[RadialPolynomial],
) -> Result<Vec<WeakResidual>> {
    check_window(traj, bump)?;
    let r1 = ops.outer_radius();
    let l = ops.degree();
    let t = &traj.times;
    tests
        .iter()
        .enumerate()
        .map(|(i, b)| {
            check_vector_test(ops, b)?;
            let alpha1 = b.d1(r1);
            let res = time_integral(t, |k| {
                let s = &traj.states[k];
                let (th, dth) = (bump.value(t[k]), bump.derivative(t[k]));
                if th == 0.0 && dth == 0.0 {
                    return 0.0;
                }
                let d = lagrangian_divergence(ops, s);
                mat.rho0 * dth * vector_pairing(ops, &s.ft, &s.gt, b)
                    - mat.bulk * th * node_sum(ops, &d, |r| b.modal_laplacian(l, r))
                    + membrane_pairing(ops, mat, s.v, s.vt, -th * alpha1, -dth * alpha1)
            });
            Ok(WeakResidual {
                identity: "lagrangian",
                test_index: i,
                residual: res,
            })
        })
        .collect()
}

/// Residuals of the continuity identity (scalar tests) and the momentum identity
/// (gradient test fields).
pub fn weak_residuals_eulerian(
    ops: &ModalOperatorSet,
    mat: &MaterialParams,
    traj: &TrajectoryRecord<EulerianModeState>,
    bump: &TimeBump,
    scalar_tests: &[RadialPolynomial],
    vector_tests: &[RadialPolynomial],
) -> Result<Vec<WeakResidual>> {
    check_window(traj, bump)?;
    let r1 = ops.outer_radius();
    let l = ops.degree();
    let t = &traj.times;
    let mut out = Vec::new();
    for (i, a) in scalar_tests.iter().enumerate() {
        let res = time_integral(t, |k| {
            let s = &traj.states[k];
            let (th, dth) = (bump.value(t[k]), bump.derivative(t[k]));
            dth * node_sum(ops, &s.p, |r| a.value(r))
                + th * mat.bulk * vector_pairing(ops, &s.f, &s.g, a)
                + th * mat.bulk * r1 * r1 * s.vt * a.value(r1)
        });
        out.push(WeakResidual {
            identity: "eulerian_continuity",
            test_index: i,
            residual: res,
        });
    }
    for (i, b) in vector_tests.iter().enumerate() {
        check_vector_test(ops, b)?;
        let alpha1 = b.d1(r1);
        let res = time_integral(t, |k| {
            let s = &traj.states[k];
            let (th, dth) = (bump.value(t[k]), bump.derivative(t[k]));
            mat.rho0 * dth * vector_pairing(ops, &s.f, &s.g, b)
                + th * node_sum(ops, &s.p, |r| b.modal_laplacian(l, r))
                + membrane_pairing(ops, mat, s.v, s.vt, -th * alpha1, -dth * alpha1)
        });
        out.push(WeakResidual {
            identity: "eulerian_momentum",
            test_index: i,
            residual: res,
        });
    }
    Ok(out)
}
