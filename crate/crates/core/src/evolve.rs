//! Time integration of the per-mode linear systems and trajectory recording.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{norm2, BandLu, BandMatrix, CsrMatrix};
use crate::model::{EnergyBreakdown, ModeModel, ModelTag, SQRT_4PI};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    ImplicitMidpoint,
    #[serde(alias = "rk4")]
    ExplicitRk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "default_solver_tol")]
    pub linear_solver_tol: f64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

fn default_solver_tol() -> f64 {
    1e-12
}

fn default_record_every() -> usize {
    1
}

impl IntegratorConfig {
    pub fn midpoint(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            scheme: Scheme::ImplicitMidpoint,
            linear_solver_tol: default_solver_tol(),
            record_every: 1,
        }
    }

    pub fn rk4(dt: f64, t_end: f64) -> Self {
        Self {
            scheme: Scheme::ExplicitRk4,
            ..Self::midpoint(dt, t_end)
        }
    }

    pub fn with_record_every(mut self, k: usize) -> Self {
        self.record_every = k;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::validation("integrator.dt", "must be positive and finite"));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::validation("integrator.t_end", "must be non-negative and finite"));
        }
        if !(self.linear_solver_tol > 0.0) {
            return Err(Error::validation("integrator.linear_solver_tol", "must be positive"));
        }
        if self.record_every == 0 {
            return Err(Error::validation("integrator.record_every", "must be at least 1"));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    /// Advisory explicit stability bound `0.5 h √(ρ0/B)`.
    pub fn rk4_cfl_bound(spacing: f64, sound_speed_sq: f64) -> f64 {
        0.5 * spacing / sound_speed_sq.sqrt()
    }
}

/// A recorded solution for one mode.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord<S> {
    pub tag: ModelTag,
    pub degree: u32,
    pub scheme: Scheme,
    pub dt: f64,
    pub record_every: usize,
    pub times: Vec<f64>,
    pub states: Vec<S>,
    /// `dissipation[k]` is ∫ δ R1² v_t² over `(times[k-1], times[k])`; entry 0 is 0.
    pub dissipation: Vec<f64>,
    pub energies: Vec<EnergyBreakdown>,
    /// Packed rounding remainder of the final state. [`evolve_continue`] resumes from it so
    /// that a split run matches an uninterrupted one bit for bit. Empty for mapped records.
    pub compensation: Vec<f64>,
}

impl<S> TrajectoryRecord<S> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn cumulative_dissipation(&self) -> Vec<f64> {
        self.dissipation
            .iter()
            .scan(0.0, |acc, d| {
                *acc += d;
                Some(*acc)
            })
            .collect()
    }

    pub fn final_state(&self) -> &S {
        self.states.last().expect("trajectory has at least the initial sample")
    }

    /// Fails unless every integrator step was recorded.
    pub fn require_every_step(&self) -> Result<()> {
        if self.record_every != 1 {
            return Err(Error::QuadratureOrderMismatch(format!(
                "time integrals need every integrator node, trajectory records every {} steps",
                self.record_every
            )));
        }
        Ok(())
    }
}

/// The constant generator `A` of `ẋ = A x`, assembled column by column.
pub fn assemble_generator<M: ModeModel>(model: &M) -> CsrMatrix {
    let n = model.dim();
    let mut e = vec![0.0; n];
    let mut triplets = Vec::new();
    for j in 0..n {
        e[j] = 1.0;
        for (i, a) in model.rhs_packed(&e).into_iter().enumerate() {
            if a != 0.0 {
                triplets.push((i, j, a));
            }
        }
        e[j] = 0.0;
    }
    CsrMatrix::from_triplets(n, triplets)
}

/// One-step map for a fixed model and step size.
#[derive(Debug, Clone)]
pub struct Propagator {
    a: CsrMatrix,
    dt: f64,
    scheme: Scheme,
    tol: f64,
    implicit: Option<ImplicitSystem>,
}

#[derive(Debug, Clone)]
struct ImplicitSystem {
    /// `perm[k]` is the packed index placed at band position `k`.
    perm: Vec<usize>,
    lhs: CsrMatrix,
    lu: BandLu,
}

impl Propagator {
    pub fn new<M: ModeModel>(model: &M, cfg: &IntegratorConfig) -> Result<Self> {
        cfg.validate()?;
        let a = assemble_generator(model);
        let implicit = match cfg.scheme {
            Scheme::ImplicitMidpoint => Some(ImplicitSystem::new(&a, &model.positions(), cfg.dt)?),
            Scheme::ExplicitRk4 => None,
        };
        Ok(Self {
            a,
            dt: cfg.dt,
            scheme: cfg.scheme,
            tol: cfg.linear_solver_tol,
            implicit,
        })
    }

    pub fn generator(&self) -> &CsrMatrix {
        &self.a
    }

    pub fn step(&self, x: &[f64]) -> Result<Vec<f64>> {
        let dx = self.increment(x, None, &|y| self.a.matvec(y))?;
        Ok(x.iter().zip(&dx).map(|(a, b)| a + b).collect())
    }

    /// Advances `hi + lo` by one step of `model`, keeping the rounding error of the update
    /// in `lo`. The generator is applied in the model's difference form, so a growing
    /// constant potential (which the generator annihilates) does not leak roundoff
    /// proportional to its size into the dynamics.
    pub fn step_compensated<M: ModeModel>(&self, model: &M, hi: &mut [f64], lo: &mut [f64]) -> Result<()> {
        let dx = self.increment(hi, Some(lo), &|y| model.rhs_packed(y))?;
        for ((a, b), d) in hi.iter_mut().zip(lo.iter_mut()).zip(dx) {
            let y = d + *b;
            let t = *a + y;
            let bp = t - *a;
            *b = (*a - (t - bp)) + (y - bp);
            *a = t;
        }
        Ok(())
    }

    fn increment(&self, x: &[f64], lo: Option<&[f64]>, apply: &dyn Fn(&[f64]) -> Vec<f64>) -> Result<Vec<f64>> {
        match &self.implicit {
            Some(sys) => {
                // (I − dt/2 A) Δ = dt A x; solving for Δ scales the solve error with the step
                let mut ax = apply(x);
                if let Some(lo) = lo {
                    ax.iter_mut().zip(apply(lo)).for_each(|(a, b)| *a += b);
                }
                let rhs: Vec<f64> = ax.iter().map(|v| self.dt * v).collect();
                sys.solve(&rhs, self.tol)
            }
            None => {
                let mut d = self.rk4_increment(x, apply);
                if let Some(lo) = lo {
                    d.iter_mut().zip(self.rk4_increment(lo, apply)).for_each(|(a, b)| *a += b);
                }
                Ok(d)
            }
        }
    }

    fn rk4_increment(&self, x: &[f64], apply: &dyn Fn(&[f64]) -> Vec<f64>) -> Vec<f64> {
        let dt = self.dt;
        let axpy = |a: f64, k: &[f64]| -> Vec<f64> { x.iter().zip(k).map(|(xi, ki)| xi + a * ki).collect() };
        let k1 = apply(x);
        let k2 = apply(&axpy(0.5 * dt, &k1));
        let k3 = apply(&axpy(0.5 * dt, &k2));
        let k4 = apply(&axpy(dt, &k3));
        (0..x.len())
            .map(|i| dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect()
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }
}

impl ImplicitSystem {
    fn new(a: &CsrMatrix, positions: &[f64], dt: f64) -> Result<Self> {
        let n = a.dim();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.sort_by(|&i, &j| positions[i].total_cmp(&positions[j]).then(i.cmp(&j)));
        let mut inv = vec![0usize; n];
        for (k, &i) in perm.iter().enumerate() {
            inv[i] = k;
        }
        let mut triplets: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, i, 1.0)).collect();
        triplets.extend(a.entries().map(|(i, j, v)| (i, j, -0.5 * dt * v)));
        let lhs = CsrMatrix::from_triplets(n, triplets);
        let (mut kl, mut ku) = (0usize, 0usize);
        for (i, j, _) in lhs.entries() {
            let (bi, bj) = (inv[i], inv[j]);
            if bi > bj {
                kl = kl.max(bi - bj);
            } else {
                ku = ku.max(bj - bi);
            }
        }
        let mut band = BandMatrix::zeros(n, kl, ku);
        for (i, j, v) in lhs.entries() {
            band.add(inv[i], inv[j], v);
        }
        Ok(Self {
            perm,
            lhs,
            lu: band.factor()?,
        })
    }

    fn solve_permuted(&self, rhs: &[f64]) -> Vec<f64> {
        let mut b: Vec<f64> = self.perm.iter().map(|&i| rhs[i]).collect();
        self.lu.solve_in_place(&mut b);
        let mut x = vec![0.0; rhs.len()];
        for (k, &i) in self.perm.iter().enumerate() {
            x[i] = b[k];
        }
        x
    }

    fn residual(&self, x: &[f64], rhs: &[f64]) -> Vec<f64> {
        let mx = self.lhs.matvec(x);
        rhs.iter().zip(&mx).map(|(b, m)| b - m).collect()
    }

    fn solve(&self, rhs: &[f64], tol: f64) -> Result<Vec<f64>> {
        let scale = norm2(rhs);
        let mut x = self.solve_permuted(rhs);
        let mut r = self.residual(&x, rhs);
        if norm2(&r) <= tol * scale {
            return Ok(x);
        }
        let dx = self.solve_permuted(&r);
        x.iter_mut().zip(&dx).for_each(|(a, b)| *a += b);
        r = self.residual(&x, rhs);
        let rel = norm2(&r) / scale.max(f64::MIN_POSITIVE);
        if rel <= tol {
            Ok(x)
        } else {
            Err(Error::LinearSolveFailure(rel))
        }
    }
}

/// Tolerance for the integral constraint of a packed state.
pub(crate) fn constraint_tolerance<M: ModeModel>(model: &M, x: &[f64]) -> f64 {
    let ops = model.ops();
    let p = model.params();
    let vol: f64 = ops.quad_weights().iter().sum();
    let r1 = ops.outer_radius();
    let scale = SQRT_4PI * (p.rho0.max(1.0) * vol + p.bulk * r1 * r1);
    let norm = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    1e-8 * (1.0 + scale * norm)
}

/// Integrates `init` over `[0, cfg.t_end]` and records every `cfg.record_every`-th step.
pub fn evolve<M: ModeModel>(model: &M, tag: ModelTag, init: &M::State, cfg: &IntegratorConfig) -> Result<TrajectoryRecord<M::State>> {
    let prop = Propagator::new(model, cfg)?;
    evolve_with(model, &prop, tag, init, cfg)
}

/// As [`evolve`], reusing a prepared propagator.
pub fn evolve_with<M: ModeModel>(
    model: &M,
    prop: &Propagator,
    tag: ModelTag,
    init: &M::State,
    cfg: &IntegratorConfig,
) -> Result<TrajectoryRecord<M::State>> {
    cfg.validate()?;
    check_family(model, tag)?;
    let x = model.pack(init);
    if tag.is_constrained() {
        let c = model.constraint(init);
        let tol = constraint_tolerance(model, &x);
        if c.abs() > tol {
            return Err(Error::ConstraintViolated { residual: c, tol });
        }
    }
    let lo = vec![0.0; x.len()];
    run(model, prop, tag, x, lo, 0.0, cfg)
}

/// Continues `prev` from its final state over a further `cfg.t_end`.
pub fn evolve_continue<M: ModeModel>(
    model: &M,
    prev: &TrajectoryRecord<M::State>,
    cfg: &IntegratorConfig,
) -> Result<TrajectoryRecord<M::State>> {
    cfg.validate()?;
    check_family(model, prev.tag)?;
    let x = model.pack(prev.final_state());
    let lo = if prev.compensation.len() == x.len() {
        prev.compensation.clone()
    } else {
        vec![0.0; x.len()]
    };
    let t0 = prev.times.last().copied().unwrap_or(0.0);
    let prop = Propagator::new(model, cfg)?;
    run(model, &prop, prev.tag, x, lo, t0, cfg)
}

fn check_family<M: ModeModel>(model: &M, tag: ModelTag) -> Result<()> {
    if tag.family() != model.family() {
        return Err(Error::validation(
            "model",
            format!("tag {tag} does not belong to the {:?} family", model.family()),
        ));
    }
    Ok(())
}

fn run<M: ModeModel>(
    model: &M,
    prop: &Propagator,
    tag: ModelTag,
    mut x: Vec<f64>,
    mut lo: Vec<f64>,
    t0: f64,
    cfg: &IntegratorConfig,
) -> Result<TrajectoryRecord<M::State>> {
    let p = model.params();
    let r1sq = model.ops().outer_radius().powi(2);
    let ivt = model.membrane_velocity_index();
    let x0_norm = norm2(&x);
    let watch_growth = p.delta >= 0.0 && p.kappa >= 0.0;
    let steps = cfg.steps();

    let first = model.unpack(&x);
    let mut rec = TrajectoryRecord {
        tag,
        degree: model.ops().degree(),
        scheme: cfg.scheme,
        dt: cfg.dt,
        record_every: cfg.record_every,
        times: vec![t0],
        energies: vec![model.energy(&first)],
        states: vec![first],
        dissipation: vec![0.0],
        compensation: Vec::new(),
    };
    let mut pending = 0.0;
    for k in 1..=steps {
        let vt_prev = x[ivt];
        prop.step_compensated(model, &mut x, &mut lo)?;
        let vt_mid = 0.5 * (vt_prev + x[ivt]);
        pending += p.delta * r1sq * cfg.dt * vt_mid * vt_mid;
        let t = t0 + k as f64 * cfg.dt;
        if watch_growth && x0_norm > 0.0 {
            let growth = norm2(&x) / x0_norm;
            if !growth.is_finite() || growth > 1e6 {
                return Err(Error::UnstableBlowup { time: t, growth });
            }
        }
        if k % cfg.record_every == 0 || k == steps {
            let s = model.unpack(&x);
            rec.times.push(t);
            rec.energies.push(model.energy(&s));
            rec.states.push(s);
            rec.dissipation.push(pending);
            pending = 0.0;
        }
    }
    rec.compensation = lo;
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::make_domain;
    use crate::eulerian::EulerianModel;
    use crate::lagrangian::LagrangianModel;
    use crate::material::MaterialParams;
    use crate::modal_ops::assemble_mode_operators;
    use crate::potential::{PotentialModeState, PotentialModel};

    fn potential(n: usize, l: u32, p: MaterialParams) -> PotentialModel {
        let (d, g) = make_domain(0.0, 1.0, n).unwrap();
        PotentialModel::new(assemble_mode_operators(&d, &g, l), p)
    }

    fn smooth_packed<M: ModeModel>(m: &M) -> Vec<f64> {
        let pos = m.positions();
        let n = pos.len() as f64;
        pos.iter()
            .enumerate()
            .map(|(i, r)| (3.0 * r).cos() + 0.1 * (i as f64 / n).sin())
            .collect()
    }

    #[test]
    fn generator_reproduces_rhs() {
        let m = potential(16, 1, MaterialParams::unit().with_delta(0.3));
        let a = assemble_generator(&m);
        let x = smooth_packed(&m);
        let y = m.rhs_packed(&x);
        for (u, v) in a.matvec(&x).iter().zip(&y) {
            assert!((u - v).abs() < 1e-10 * (1.0 + v.abs()));
        }
    }

    #[test]
    fn midpoint_step_solves_the_implicit_equation() {
        let (d, g) = make_domain(0.5, 1.0, 20).unwrap();
        let m = EulerianModel::new(assemble_mode_operators(&d, &g, 2), MaterialParams::unit().with_delta(0.2));
        let cfg = IntegratorConfig::midpoint(0.05, 1.0);
        let prop = Propagator::new(&m, &cfg).unwrap();
        let x = smooth_packed(&m);
        let y = prop.step(&x).unwrap();
        let a = prop.generator();
        let (ax, ay) = (a.matvec(&x), a.matvec(&y));
        for i in 0..x.len() {
            let r = y[i] - x[i] - 0.025 * (ax[i] + ay[i]);
            assert!(r.abs() < 1e-12, "{i} {r}");
        }
    }

    #[test]
    fn zero_data_stays_zero() {
        let m = potential(12, 0, MaterialParams::unit());
        let z = PotentialModeState::zeros(0, 12);
        let tr = evolve(&m, ModelTag::P, &z, &IntegratorConfig::midpoint(0.1, 1.0)).unwrap();
        assert_eq!(tr.len(), 11);
        assert!(tr.states.iter().all(|s| *s == z));
        assert!(tr.energies.iter().all(|e| e.total == 0.0));
    }

    #[test]
    fn times_and_recording_stride() {
        let m = potential(12, 1, MaterialParams::unit());
        let init = m.unpack(&smooth_packed(&m));
        let cfg = IntegratorConfig::midpoint(0.1, 1.0).with_record_every(3);
        let tr = evolve(&m, ModelTag::P, &init, &cfg).unwrap();
        let t: Vec<f64> = tr.times.iter().map(|t| (t * 10.0).round()).collect();
        assert_eq!(t, vec![0.0, 3.0, 6.0, 9.0, 10.0]);
        assert!(tr.require_every_step().is_err());
        assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn semigroup_property_is_exact() {
        let (d, g) = make_domain(0.5, 1.0, 16).unwrap();
        let m = LagrangianModel::new(assemble_mode_operators(&d, &g, 1), MaterialParams::unit().with_delta(0.4));
        let init = m.unpack(&smooth_packed(&m));
        let whole = evolve(&m, ModelTag::L, &init, &IntegratorConfig::midpoint(0.1, 2.0)).unwrap();
        let a = evolve(&m, ModelTag::L, &init, &IntegratorConfig::midpoint(0.1, 1.2)).unwrap();
        let b = evolve_continue(&m, &a, &IntegratorConfig::midpoint(0.1, 0.8)).unwrap();
        assert_eq!(m.pack(whole.final_state()), m.pack(b.final_state()));
        assert_eq!(whole.compensation, b.compensation);
        // restarting from the rounded state alone stays within roundoff
        let c = evolve(&m, ModelTag::L, a.final_state(), &IntegratorConfig::midpoint(0.1, 0.8)).unwrap();
        let (x, y) = (m.pack(whole.final_state()), m.pack(c.final_state()));
        let d = x.iter().zip(&y).fold(0.0f64, |acc, (p, q)| acc.max((p - q).abs()));
        assert!(d <= 1e-14 * norm2(&x), "{d}");
    }

    #[test]
    fn time_reversal_returns_initial_state() {
        let (d, g) = make_domain(0.0, 1.0, 16).unwrap();
        let p = MaterialParams::unit().with_delta(0.3);
        let m = EulerianModel::new(assemble_mode_operators(&d, &g, 2), p);
        let back = EulerianModel::new(m.ops().clone(), p.with_delta(-0.3));
        let init = m.unpack(&smooth_packed(&m));
        let cfg = IntegratorConfig::midpoint(0.01, 1.0);
        let fwd = evolve(&m, ModelTag::E, &init, &cfg).unwrap();
        let rev = evolve(&back, ModelTag::E, &m.reversed(fwd.final_state()), &cfg).unwrap();
        let out = m.pack(&m.reversed(rev.final_state()));
        let x0 = m.pack(&init);
        let err = out.iter().zip(&x0).fold(0.0f64, |e, (a, b)| e.max((a - b).abs()));
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn rk4_and_midpoint_converge_together() {
        let m = potential(16, 2, MaterialParams::unit().with_delta(0.1));
        let init = m.unpack(&smooth_packed(&m));
        let gap = |dt: f64| {
            let a = evolve(&m, ModelTag::P, &init, &IntegratorConfig::midpoint(dt, 0.2)).unwrap();
            let b = evolve(&m, ModelTag::P, &init, &IntegratorConfig::rk4(dt, 0.2)).unwrap();
            let (xa, xb) = (m.pack(a.final_state()), m.pack(b.final_state()));
            let diff: Vec<f64> = xa.iter().zip(&xb).map(|(p, q)| p - q).collect();
            norm2(&diff) / norm2(&xa)
        };
        let (g1, g2) = (gap(2e-3), gap(1e-3));
        assert!(g2 < 1e-3);
        assert!(g1 / g2 > 3.5, "{g1} {g2}");
    }

    #[test]
    fn constrained_tag_rejects_violating_data() {
        let m = potential(12, 0, MaterialParams::unit());
        let mut s = PotentialModeState::zeros(0, 12);
        s.v = 1.0;
        let r = evolve(&m, ModelTag::Pc, &s, &IntegratorConfig::midpoint(0.1, 1.0));
        assert!(matches!(r, Err(Error::ConstraintViolated { .. })));
        assert!(evolve(&m, ModelTag::E, &s, &IntegratorConfig::midpoint(0.1, 1.0)).is_err());
    }

    #[test]
    fn explicit_blowup_is_reported() {
        let m = potential(32, 1, MaterialParams::unit());
        let init = m.unpack(&smooth_packed(&m));
        let r = evolve(&m, ModelTag::P, &init, &IntegratorConfig::rk4(0.5, 200.0));
        assert!(matches!(r, Err(Error::UnstableBlowup { .. })));
    }

    #[test]
    fn invalid_config_rejected() {
        let m = potential(12, 0, MaterialParams::unit());
        let z = PotentialModeState::zeros(0, 12);
        let bad = IntegratorConfig::midpoint(0.0, 1.0);
        assert!(matches!(evolve(&m, ModelTag::P, &z, &bad), Err(Error::Validation { .. })));
    }
}
