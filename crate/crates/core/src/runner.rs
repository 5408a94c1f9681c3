//! Batch execution of scenarios: simulation with audits, refinement ladders,
//! model-equivalence checks and the combined verification battery.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::audit::{
    audit_conservation, audit_energy, scalar_test_family, vector_test_family, weak_residuals_eulerian,
    weak_residuals_lagrangian, weak_residuals_potential, TimeBump,
};
use crate::domain::{make_domain, Mode};
use crate::error::{Error, Result};
use crate::eulerian::EulerianModel;
use crate::evolve::{evolve, IntegratorConfig, Scheme, TrajectoryRecord};
use crate::lagrangian::LagrangianModel;
use crate::material::MaterialParams;
use crate::modal_ops::{assemble_mode_operators, ModalOperatorSet};
use crate::model::{ModeModel, ModelFamily, ModelTag};
use crate::potential::PotentialModel;
use crate::presets::{build_initial, check_compat_any, compat_suite, manufactured_elliptic_error, InitialPreset};
use crate::scenario::{AuditKind, ConvergenceQuantity, EquivalenceConfig, LoadedScenario, Scenario};
use crate::transforms::{
    data_equivalence_with_tol, map_eulerian_to_lagrangian, map_eulerian_to_potential,
    map_lagrangian_to_eulerian_trajectory, map_lagrangian_to_potential, map_potential_to_eulerian_trajectory,
    map_potential_to_lagrangian_trajectory, trajectory_discrepancy, EquivalenceKind, GaugePolicy, ModeState,
};

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "ACOUSTICBC_THREADS";

/// Energy-identity residual bound relative to max(1, E(0)).
pub const ENERGY_TOL: f64 = 1e-10;
/// Absolute bound on the drift of the integral constraint functional.
pub const CONSTRAINT_TOL: f64 = 1e-12;
/// Bound on the curl-defect drift per unit time.
pub const CURL_RATE_TOL: f64 = 1e-10;
/// Bound on the distance from the closed-form drifting solution.
pub const EXACT_TOL: f64 = 1e-10;
/// Relative bound on evolve-then-map vs map-then-evolve and midpoint vs RK4.
pub const TRAJECTORY_TOL: f64 = 1e-6;
/// Relative bound on transform round trips.
pub const ROUND_TRIP_TOL: f64 = 1e-8;
/// Minimum observed order of a refinement ladder.
pub const MIN_ORDER: f64 = 1.7;
/// Below this (relative to the quantity's scale) a ladder has reached roundoff and
/// its order is not meaningful.
pub const ROUNDOFF_FLOOR: f64 = 1e-11;
/// Compatibility violations injected by the verification suite are reported within this fraction.
pub const INJECTION_REL_TOL: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub tol_scale: f64,
    pub threads: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            tol_scale: 1.0,
            threads: None,
        }
    }
}

impl RunOptions {
    /// Options with the thread cap read from [`THREADS_ENV`].
    pub fn from_env(tol_scale: f64) -> Result<Self> {
        let threads = match std::env::var(THREADS_ENV) {
            Ok(v) => Some(
                v.trim()
                    .parse::<usize>()
                    .ok()
                    .filter(|&n| n > 0)
                    .ok_or_else(|| Error::validation(THREADS_ENV, format!("`{v}` is not a positive integer")))?,
            ),
            Err(_) => None,
        };
        Ok(Self { tol_scale, threads })
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol_scale > 0.0 && self.tol_scale.is_finite()) {
            return Err(Error::validation("tol-scale", "must be positive and finite"));
        }
        Ok(())
    }

    fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = self.threads {
            b = b.num_threads(n);
        }
        let pool = b.build().map_err(|e| Error::Io(format!("thread pool: {e}")))?;
        Ok(pool.install(f))
    }
}

/// One row of the time-series table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Row {
    pub time: f64,
    pub mode: u32,
    pub fluid_kinetic: f64,
    pub fluid_compression: f64,
    pub membrane_tension: f64,
    pub membrane_kinetic: f64,
    pub membrane_stiffness: f64,
    pub total_energy: f64,
    pub dissipation: f64,
    pub constraint: f64,
    pub curl_defect: f64,
    pub trace_primary: f64,
    pub trace_normal: f64,
    pub v: f64,
    pub vt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditOutcome {
    pub name: String,
    pub applicable: bool,
    pub value: Option<f64>,
    pub tolerance: Option<f64>,
    pub passed: bool,
}

impl AuditOutcome {
    fn check(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            applicable: true,
            value: Some(value),
            tolerance: Some(tolerance),
            passed: value.abs() <= tolerance,
        }
    }

    fn skipped(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            applicable: false,
            value: None,
            tolerance: None,
            passed: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LadderLevel {
    pub nodes: usize,
    pub h: f64,
    pub dt: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ladder {
    pub quantity: &'static str,
    pub refine: &'static str,
    pub levels: Vec<LadderLevel>,
    /// Observed orders between successive levels.
    pub orders: Vec<f64>,
    /// Roundoff level below which an order is not assessed.
    pub floor: f64,
    /// Upper bound on the finest-level residual, where one applies.
    pub tolerance: Option<f64>,
    /// Some order fell below the minimum while above the floor.
    pub flagged: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeSummary {
    pub l: u32,
    pub m: Option<i32>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub audits: Vec<AuditOutcome>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub ladders: Vec<Ladder>,
}

impl ModeSummary {
    fn new(mode: Mode) -> Self {
        Self {
            l: mode.l,
            m: mode.m,
            audits: Vec::new(),
            ladders: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.audits.iter().all(|a| a.passed) && self.ladders.iter().all(|l| l.passed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridInfo {
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub nodes: usize,
    pub spacing: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub command: &'static str,
    pub name: Option<String>,
    pub config_sha256: String,
    pub model: ModelTag,
    pub grid: GridInfo,
    pub integrator: IntegratorConfig,
    pub steps: usize,
    pub tol_scale: f64,
    pub modes: Vec<ModeSummary>,
    pub passed: bool,
}

/// Everything a command produced, before it is written out.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub summary: Summary,
    pub rows: Vec<Row>,
}

/// Paths written by a command and its overall verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub passed: bool,
    pub files: Vec<PathBuf>,
}

/// Operators and models of one mode on one grid.
struct ModeContext {
    ops: ModalOperatorSet,
    mat: MaterialParams,
    p: PotentialModel,
    l: LagrangianModel,
    e: EulerianModel,
}

impl ModeContext {
    fn new(sc: &Scenario, nodes: usize, degree: u32) -> Result<Self> {
        let (d, g) = make_domain(sc.domain.inner_radius, sc.domain.outer_radius, nodes)?;
        let ops = assemble_mode_operators(&d, &g, degree);
        let mat = sc.material;
        Ok(Self {
            p: PotentialModel::new(ops.clone(), mat),
            l: LagrangianModel::new(ops.clone(), mat),
            e: EulerianModel::new(ops.clone(), mat),
            ops,
            mat,
        })
    }

    fn initial(&self, tag: ModelTag, preset: &InitialPreset) -> Result<ModeState> {
        build_initial(&self.ops, &self.mat, tag, preset)
    }
}

/// A trajectory of any family.
enum AnyTrajectory {
    P(TrajectoryRecord<crate::potential::PotentialModeState>),
    L(TrajectoryRecord<crate::lagrangian::LagrangianModeState>),
    E(TrajectoryRecord<crate::eulerian::EulerianModeState>),
}

impl AnyTrajectory {
    fn packed(&self, ctx: &ModeContext) -> Vec<Vec<f64>> {
        match self {
            AnyTrajectory::P(t) => t.states.iter().map(|s| ctx.p.pack(s)).collect(),
            AnyTrajectory::L(t) => t.states.iter().map(|s| ctx.l.pack(s)).collect(),
            AnyTrajectory::E(t) => t.states.iter().map(|s| ctx.e.pack(s)).collect(),
        }
    }

    fn first(&self) -> ModeState {
        match self {
            AnyTrajectory::P(t) => ModeState::Potential(t.states[0].clone()),
            AnyTrajectory::L(t) => ModeState::Lagrangian(t.states[0].clone()),
            AnyTrajectory::E(t) => ModeState::Eulerian(t.states[0].clone()),
        }
    }
}

fn evolve_any(ctx: &ModeContext, tag: ModelTag, init: &ModeState, cfg: &IntegratorConfig) -> Result<AnyTrajectory> {
    Ok(match init {
        ModeState::Potential(s) => AnyTrajectory::P(evolve(&ctx.p, tag, s, cfg)?),
        ModeState::Lagrangian(s) => AnyTrajectory::L(evolve(&ctx.l, tag, s, cfg)?),
        ModeState::Eulerian(s) => AnyTrajectory::E(evolve(&ctx.e, tag, s, cfg)?),
    })
}

fn map_any(ctx: &ModeContext, traj: &AnyTrajectory, to: ModelFamily) -> Result<AnyTrajectory> {
    let (o, m) = (&ctx.ops, &ctx.mat);
    let gauge = GaugePolicy::ZeroMeanPotential;
    Ok(match (traj, to) {
        (AnyTrajectory::P(t), ModelFamily::Eulerian) => AnyTrajectory::E(map_potential_to_eulerian_trajectory(o, m, t)),
        (AnyTrajectory::P(t), ModelFamily::Lagrangian) => AnyTrajectory::L(map_potential_to_lagrangian_trajectory(o, m, t)?),
        (AnyTrajectory::L(t), ModelFamily::Eulerian) => AnyTrajectory::E(map_lagrangian_to_eulerian_trajectory(o, m, t)),
        (AnyTrajectory::L(t), ModelFamily::Potential) => AnyTrajectory::P(map_lagrangian_to_potential(o, m, t, gauge)?),
        (AnyTrajectory::E(t), ModelFamily::Potential) => AnyTrajectory::P(map_eulerian_to_potential(o, m, t, gauge)?),
        (AnyTrajectory::E(t), ModelFamily::Lagrangian) => AnyTrajectory::L(map_eulerian_to_lagrangian(o, m, t)?),
        _ => return Err(Error::validation("equivalence.target", "source and target belong to the same family")),
    })
}

/// Shifts every potential sample by the constant that puts `u(0)` into the zero-mean gauge.
fn gauge_normalize(ctx: &ModeContext, traj: &mut AnyTrajectory) {
    if let AnyTrajectory::P(t) = traj {
        let Some(first) = t.states.first() else { return };
        let mut u0 = first.u.clone();
        GaugePolicy::ZeroMeanPotential.apply(&ctx.ops, &mut u0);
        let shift: Vec<f64> = first.u.iter().zip(&u0).map(|(a, b)| a - b).collect();
        for s in &mut t.states {
            for (x, c) in s.u.iter_mut().zip(&shift) {
                *x -= c;
            }
        }
    }
}

fn equivalence_kind(a: ModelFamily, b: ModelFamily) -> EquivalenceKind {
    use ModelFamily::*;
    match (a, b) {
        (Potential, Lagrangian) | (Lagrangian, Potential) => EquivalenceKind::PcL,
        (Potential, Eulerian) | (Eulerian, Potential) => EquivalenceKind::PE,
        _ => EquivalenceKind::EcL,
    }
}

/// Orders the pair as [`data_equivalence_with_tol`] expects for `kind`.
fn ordered<'a>(kind: EquivalenceKind, a: &'a ModeState, b: &'a ModeState) -> (&'a ModeState, &'a ModeState) {
    let first_is = |s: &ModeState| match kind {
        EquivalenceKind::PcL | EquivalenceKind::PE => matches!(s, ModeState::Potential(_)),
        EquivalenceKind::EcL => matches!(s, ModeState::Eulerian(_)),
    };
    if first_is(a) {
        (a, b)
    } else {
        (b, a)
    }
}

fn rows_for<M: ModeModel>(model: &M, traj: &TrajectoryRecord<M::State>) -> Vec<Row> {
    let diss = traj.cumulative_dissipation();
    traj.states
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let e = traj.energies[k];
            let (trace_primary, trace_normal) = model.boundary_traces(s);
            let (v, vt) = model.membrane(s);
            Row {
                time: traj.times[k],
                mode: traj.degree,
                fluid_kinetic: e.fluid_kinetic,
                fluid_compression: e.fluid_compression,
                membrane_tension: e.membrane_tension,
                membrane_kinetic: e.membrane_kinetic,
                membrane_stiffness: e.membrane_stiffness,
                total_energy: e.total,
                dissipation: diss[k],
                constraint: model.constraint(s),
                curl_defect: model.curl_defect(s),
                trace_primary,
                trace_normal,
                v,
                vt,
            }
        })
        .collect()
}

fn trajectory_audits<M: ModeModel>(
    model: &M,
    traj: &TrajectoryRecord<M::State>,
    audits: &[AuditKind],
    scale: f64,
    exact: Option<&dyn Fn(&M::State) -> f64>,
) -> Vec<AuditOutcome> {
    let family = model.family();
    let l = model.ops().degree();
    let energy = audit_energy(traj);
    let cons = audit_conservation(traj, model);
    audits
        .iter()
        .filter(|a| **a != AuditKind::Compatibility)
        .map(|&a| match a {
            AuditKind::EnergyIdentity => AuditOutcome::check(
                a.as_str(),
                energy.residual,
                ENERGY_TOL * energy.initial_energy.max(1.0) * scale,
            ),
            AuditKind::Constraint if family != ModelFamily::Lagrangian => {
                AuditOutcome::check(a.as_str(), cons.constraint_drift, CONSTRAINT_TOL * scale)
            }
            AuditKind::CurlFree if family != ModelFamily::Potential && l >= 1 => {
                AuditOutcome::check(a.as_str(), cons.curl_drift_rate, CURL_RATE_TOL * scale)
            }
            AuditKind::ExactSolution => match exact {
                Some(f) => AuditOutcome::check(
                    a.as_str(),
                    traj.states.iter().map(f).fold(0.0, f64::max),
                    EXACT_TOL * scale,
                ),
                None => AuditOutcome::skipped(a.as_str()),
            },
            _ => AuditOutcome::skipped(a.as_str()),
        })
        .collect()
}

fn simulate_mode(sc: &Scenario, mode: Mode, opts: &RunOptions) -> Result<(Vec<Row>, ModeSummary)> {
    let ctx = ModeContext::new(sc, sc.domain.nodes, mode.l)?;
    let init = ctx.initial(sc.model, &sc.initial_data)?;
    let mut summary = ModeSummary::new(mode);
    let scale = opts.tol_scale;
    if sc.audits.contains(&AuditKind::Compatibility) {
        let rep = check_compat_any(&ctx.ops, &ctx.mat, &init, 3, scale)?;
        summary.audits.push(AuditOutcome::check(
            AuditKind::Compatibility.as_str(),
            rep.max_residual(),
            rep.tol,
        ));
    }
    let drift = match sc.initial_data {
        InitialPreset::Remark34 { u1, k0 } if mode.l == 0 => Some((u1, -ctx.mat.rho0 * u1 / k0)),
        _ => None,
    };
    let rho0 = ctx.mat.rho0;
    let (rows, audits) = match &init {
        ModeState::Potential(s) => {
            let t = evolve(&ctx.p, sc.model, s, &sc.integrator)?;
            let exact = drift.map(|(u1, v0)| {
                move |s: &crate::potential::PotentialModeState| {
                    s.ut.iter().fold((s.v - v0).abs(), |m, x| m.max((x - u1).abs()))
                }
            });
            let exact_ref = exact.as_ref().map(|f| f as &dyn Fn(&_) -> f64);
            (rows_for(&ctx.p, &t), trajectory_audits(&ctx.p, &t, &sc.audits, scale, exact_ref))
        }
        ModeState::Eulerian(s) => {
            let t = evolve(&ctx.e, sc.model, s, &sc.integrator)?;
            let exact = drift.map(|(u1, v0)| {
                move |s: &crate::eulerian::EulerianModeState| {
                    s.p.iter().fold((s.v - v0).abs(), |m, p| m.max((p / rho0 - u1).abs()))
                }
            });
            let exact_ref = exact.as_ref().map(|f| f as &dyn Fn(&_) -> f64);
            (rows_for(&ctx.e, &t), trajectory_audits(&ctx.e, &t, &sc.audits, scale, exact_ref))
        }
        ModeState::Lagrangian(s) => {
            let t = evolve(&ctx.l, sc.model, s, &sc.integrator)?;
            (rows_for(&ctx.l, &t), trajectory_audits(&ctx.l, &t, &sc.audits, scale, None))
        }
    };
    summary.audits.extend(audits);
    Ok((rows, summary))
}

fn for_each_mode<T: Send>(
    sc: &Scenario,
    opts: &RunOptions,
    f: impl Fn(Mode) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    let modes = sc.mode_set()?;
    opts.install(|| modes.modes().par_iter().map(|&m| f(m)).collect::<Result<Vec<_>>>())?
}

fn config_hash(source: &[u8]) -> String {
    Sha256::digest(source).iter().map(|b| format!("{b:02x}")).collect()
}

fn summary(command: &'static str, sc: &Scenario, source: &[u8], opts: &RunOptions, modes: Vec<ModeSummary>) -> Summary {
    let (_, g) = make_domain(sc.domain.inner_radius, sc.domain.outer_radius, sc.domain.nodes).expect("validated scenario");
    let passed = modes.iter().all(ModeSummary::passed);
    Summary {
        command,
        name: sc.name.clone(),
        config_sha256: config_hash(source),
        model: sc.model,
        grid: GridInfo {
            inner_radius: sc.domain.inner_radius,
            outer_radius: sc.domain.outer_radius,
            nodes: sc.domain.nodes,
            spacing: g.spacing(),
        },
        integrator: sc.integrator,
        steps: sc.integrator.steps(),
        tol_scale: opts.tol_scale,
        modes,
        passed,
    }
}

/// Evolves every mode of the scenario and runs the requested audits.
pub fn simulate(sc: &Scenario, source: &[u8], opts: &RunOptions) -> Result<RunOutput> {
    opts.validate()?;
    let per_mode = for_each_mode(sc, opts, |m| simulate_mode(sc, m, opts))?;
    let mut rows = Vec::new();
    let mut modes = Vec::new();
    for (r, s) in per_mode {
        rows.extend(r);
        modes.push(s);
    }
    Ok(RunOutput {
        summary: summary("simulate", sc, source, opts, modes),
        rows,
    })
}

fn ladder(
    quantity: ConvergenceQuantity,
    refine: &'static str,
    levels: Vec<LadderLevel>,
    floor: f64,
    tolerance: Option<f64>,
) -> Ladder {
    let param = |l: &LadderLevel| if refine == "time" { l.dt } else { l.h };
    let orders: Vec<f64> = levels
        .windows(2)
        .map(|w| (w[0].residual / w[1].residual).ln() / (param(&w[0]) / param(&w[1])).ln())
        .collect();
    let flagged = levels
        .windows(2)
        .zip(&orders)
        .any(|(w, q)| w[1].residual.abs() > floor && !(*q >= MIN_ORDER));
    let within = tolerance.is_none_or(|t| levels.last().is_some_and(|l| l.residual.abs() <= t));
    Ladder {
        quantity: quantity.as_str(),
        refine,
        levels,
        orders,
        floor,
        tolerance,
        flagged,
        passed: !flagged && within,
    }
}

fn level_nodes(base: usize, k: usize) -> usize {
    base << k
}

fn level_dt(cfg: &IntegratorConfig, k: usize) -> IntegratorConfig {
    IntegratorConfig {
        dt: cfg.dt / f64::powi(2.0, k as i32),
        record_every: 1,
        ..*cfg
    }
}

fn weak_residual_max(ctx: &ModeContext, tag: ModelTag, init: &ModeState, cfg: &IntegratorConfig) -> Result<f64> {
    let bump = TimeBump::centered(cfg.steps() as f64 * cfg.dt);
    let (o, m) = (&ctx.ops, &ctx.mat);
    let res = match evolve_any(ctx, tag, init, cfg)? {
        AnyTrajectory::P(t) => weak_residuals_potential(o, m, &t, &bump, &scalar_test_family(o, 3))?,
        AnyTrajectory::L(t) => weak_residuals_lagrangian(o, m, &t, &bump, &vector_test_family(o, 3))?,
        AnyTrajectory::E(t) => {
            weak_residuals_eulerian(o, m, &t, &bump, &scalar_test_family(o, 3), &vector_test_family(o, 3))?
        }
    };
    Ok(res.iter().fold(0.0, |a, r| a.max(r.residual.abs())))
}

struct EquivalenceResult {
    data: AuditOutcome,
    trajectory: f64,
    round_trip: f64,
}

fn run_equivalence_mode(
    ctx: &ModeContext,
    eq: EquivalenceConfig,
    preset: &InitialPreset,
    cfg: &IntegratorConfig,
    scale: f64,
) -> Result<EquivalenceResult> {
    let cfg = IntegratorConfig { record_every: 1, ..*cfg };
    let init = ctx.initial(eq.source, preset)?;
    let mut src = evolve_any(ctx, eq.source, &init, &cfg)?;
    let mapped = map_any(ctx, &src, eq.target.family())?;
    let mapped_init = mapped.first();
    let direct = evolve_any(ctx, eq.target, &mapped_init, &cfg)?;
    let trajectory = trajectory_discrepancy(&direct.packed(ctx), &mapped.packed(ctx));

    let kind = equivalence_kind(eq.source.family(), eq.target.family());
    let (a, b) = ordered(kind, &init, &mapped_init);
    let tol = 1e-8 * (1.0 + a.norm().max(b.norm())) * scale;
    let rep = data_equivalence_with_tol(&ctx.ops, &ctx.mat, kind, a, b, tol)?;
    let data = AuditOutcome::check("data_equivalence", rep.max_residual(), tol);

    let mut back = map_any(ctx, &mapped, eq.source.family())?;
    gauge_normalize(ctx, &mut src);
    gauge_normalize(ctx, &mut back);
    let round_trip = trajectory_discrepancy(&src.packed(ctx), &back.packed(ctx));
    Ok(EquivalenceResult {
        data,
        trajectory,
        round_trip,
    })
}

fn equivalence_audits(prefix: &str, r: &EquivalenceResult, scale: f64) -> Vec<AuditOutcome> {
    let mut data = r.data.clone();
    data.name = format!("{prefix}data_equivalence");
    vec![
        data,
        AuditOutcome::check(format!("{prefix}trajectory_discrepancy"), r.trajectory, TRAJECTORY_TOL * scale),
        AuditOutcome::check(format!("{prefix}round_trip"), r.round_trip, ROUND_TRIP_TOL * scale),
    ]
}

fn convergence_ladder(
    sc: &Scenario,
    mode: Mode,
    quantity: ConvergenceQuantity,
    levels: usize,
    tag: ModelTag,
    cfg: &IntegratorConfig,
    scale: f64,
) -> Result<Ladder> {
    let base = sc.domain.nodes;
    let mut out = Vec::with_capacity(levels);
    let (refine, floor, tolerance) = match quantity {
        ConvergenceQuantity::EnergyIdentity => {
            let ctx = ModeContext::new(sc, base, mode.l)?;
            let init = ctx.initial(tag, &sc.initial_data)?;
            let mut e0 = 0.0;
            for k in 0..levels {
                let c = level_dt(cfg, k);
                let (residual, e) = match evolve_any(&ctx, tag, &init, &c)? {
                    AnyTrajectory::P(t) => (audit_energy(&t).residual, audit_energy(&t).initial_energy),
                    AnyTrajectory::L(t) => (audit_energy(&t).residual, audit_energy(&t).initial_energy),
                    AnyTrajectory::E(t) => (audit_energy(&t).residual, audit_energy(&t).initial_energy),
                };
                e0 = e;
                out.push(LadderLevel {
                    nodes: base,
                    h: ctx.ops.grid().spacing(),
                    dt: c.dt,
                    residual,
                });
            }
            ("time", ROUNDOFF_FLOOR * e0.max(1.0), None)
        }
        ConvergenceQuantity::Elliptic => {
            for k in 0..levels {
                let ctx = ModeContext::new(sc, level_nodes(base, k), mode.l)?;
                out.push(LadderLevel {
                    nodes: ctx.ops.len(),
                    h: ctx.ops.grid().spacing(),
                    dt: cfg.dt,
                    residual: manufactured_elliptic_error(&ctx.ops, &ctx.mat)?,
                });
            }
            ("space", ROUNDOFF_FLOOR, None)
        }
        ConvergenceQuantity::WeakResidual => {
            for k in 0..levels {
                let ctx = ModeContext::new(sc, level_nodes(base, k), mode.l)?;
                let c = level_dt(cfg, k);
                let init = ctx.initial(tag, &sc.initial_data)?;
                out.push(LadderLevel {
                    nodes: ctx.ops.len(),
                    h: ctx.ops.grid().spacing(),
                    dt: c.dt,
                    residual: weak_residual_max(&ctx, tag, &init, &c)?,
                });
            }
            ("joint", ROUNDOFF_FLOOR, None)
        }
        ConvergenceQuantity::Equivalence => {
            let eq = sc
                .equivalence
                .ok_or_else(|| Error::validation("equivalence", "missing equivalence section"))?;
            for k in 0..levels {
                let ctx = ModeContext::new(sc, level_nodes(base, k), mode.l)?;
                let c = level_dt(cfg, k);
                let r = run_equivalence_mode(&ctx, eq, &sc.initial_data, &c, scale)?;
                out.push(LadderLevel {
                    nodes: ctx.ops.len(),
                    h: ctx.ops.grid().spacing(),
                    dt: c.dt,
                    residual: r.trajectory,
                });
            }
            ("joint", ROUNDOFF_FLOOR, Some(TRAJECTORY_TOL * scale))
        }
        ConvergenceQuantity::CrossScheme => {
            let ctx = ModeContext::new(sc, base, mode.l)?;
            let bound = IntegratorConfig::rk4_cfl_bound(ctx.ops.grid().spacing(), ctx.mat.sound_speed_sq());
            if cfg.dt > bound {
                return Err(Error::validation(
                    "integrator.dt",
                    format!("cross-scheme ladder needs dt ≤ {bound:e} for the explicit scheme"),
                ));
            }
            let init = ctx.initial(tag, &sc.initial_data)?;
            for k in 0..levels {
                let c = level_dt(cfg, k);
                let mid = evolve_any(&ctx, tag, &init, &IntegratorConfig { scheme: Scheme::ImplicitMidpoint, ..c })?;
                let rk = evolve_any(&ctx, tag, &init, &IntegratorConfig { scheme: Scheme::ExplicitRk4, ..c })?;
                out.push(LadderLevel {
                    nodes: base,
                    h: ctx.ops.grid().spacing(),
                    dt: c.dt,
                    residual: trajectory_discrepancy(&mid.packed(&ctx), &rk.packed(&ctx)),
                });
            }
            ("time", ROUNDOFF_FLOOR, Some(TRAJECTORY_TOL * scale))
        }
    };
    Ok(ladder(quantity, refine, out, floor, tolerance))
}

/// Runs the refinement ladder named in the scenario's `convergence` section.
pub fn convergence(sc: &Scenario, source: &[u8], opts: &RunOptions) -> Result<RunOutput> {
    opts.validate()?;
    let c = sc
        .convergence
        .ok_or_else(|| Error::validation("convergence", "missing convergence section"))?;
    if c.levels < 3 {
        return Err(Error::validation("convergence.levels", "a ladder needs at least 3 levels"));
    }
    let tag = sc.equivalence.map_or(sc.model, |e| e.source);
    let modes = for_each_mode(sc, opts, |m| {
        let mut s = ModeSummary::new(m);
        s.ladders
            .push(convergence_ladder(sc, m, c.quantity, c.levels, tag, &sc.integrator, opts.tol_scale)?);
        Ok(s)
    })?;
    Ok(RunOutput {
        summary: summary("convergence", sc, source, opts, modes),
        rows: Vec::new(),
    })
}

/// Evolve-then-map against map-then-evolve for the scenario's `equivalence` section.
pub fn equivalence(sc: &Scenario, source: &[u8], opts: &RunOptions) -> Result<RunOutput> {
    opts.validate()?;
    let eq = sc
        .equivalence
        .ok_or_else(|| Error::validation("equivalence", "missing equivalence section"))?;
    let modes = for_each_mode(sc, opts, |m| {
        let ctx = ModeContext::new(sc, sc.domain.nodes, m.l)?;
        let r = run_equivalence_mode(&ctx, eq, &sc.initial_data, &sc.integrator, opts.tol_scale)?;
        let mut s = ModeSummary::new(m);
        s.audits = equivalence_audits("", &r, opts.tol_scale);
        Ok(s)
    })?;
    Ok(RunOutput {
        summary: summary("equivalence", sc, source, opts, modes),
        rows: Vec::new(),
    })
}

/// Builds the 20 + 20 classification suite for `family` and checks every verdict and
/// every reported violation size.
fn compat_classification(ctx: &ModeContext, family: ModelFamily, scale: f64) -> Result<AuditOutcome> {
    let cases = compat_suite(&ctx.ops, &ctx.mat, family, 0x5eed, 20, 20)?;
    let mut worst = 0.0f64;
    let mut misclassified = 0usize;
    for case in &cases {
        let rep = check_compat_any(&ctx.ops, &ctx.mat, &case.state, case.order, scale)?;
        match case.injected {
            None => misclassified += usize::from(!rep.passed()),
            Some((j, eps)) => {
                misclassified += usize::from(rep.passed());
                worst = worst.max((rep.conditions[j].residual - eps).abs() / eps);
            }
        }
    }
    let mut out = AuditOutcome::check(format!("compat_classification_{family:?}").to_lowercase(), worst, INJECTION_REL_TOL);
    out.passed &= misclassified == 0;
    Ok(out)
}

fn verify_mode(sc: &Scenario, mode: Mode, opts: &RunOptions) -> Result<(Vec<Row>, ModeSummary)> {
    let scale = opts.tol_scale;
    let (rows, mut summary) = simulate_mode(sc, mode, opts)?;
    let ctx = ModeContext::new(sc, sc.domain.nodes, mode.l)?;

    let bound = IntegratorConfig::rk4_cfl_bound(ctx.ops.grid().spacing(), ctx.mat.sound_speed_sq());
    let explicit = IntegratorConfig {
        dt: sc.integrator.dt.min(bound),
        scheme: Scheme::ExplicitRk4,
        ..sc.integrator
    };
    summary.ladders.push(convergence_ladder(
        sc,
        mode,
        ConvergenceQuantity::EnergyIdentity,
        3,
        sc.model,
        &explicit,
        scale,
    )?);
    summary
        .ladders
        .push(convergence_ladder(sc, mode, ConvergenceQuantity::Elliptic, 3, sc.model, &sc.integrator, scale)?);
    summary.ladders.push(convergence_ladder(
        sc,
        mode,
        ConvergenceQuantity::WeakResidual,
        3,
        sc.model,
        &sc.integrator,
        scale,
    )?);
    summary.ladders.push(convergence_ladder(
        sc,
        mode,
        ConvergenceQuantity::CrossScheme,
        3,
        sc.model,
        &IntegratorConfig {
            scheme: Scheme::ImplicitMidpoint,
            ..explicit
        },
        scale,
    )?);

    for (source, target) in [
        (ModelTag::P, ModelTag::E),
        (ModelTag::Pc, ModelTag::L),
        (ModelTag::L, ModelTag::Ec),
        (ModelTag::Ec, ModelTag::L),
    ] {
        let prefix = format!("{source}_to_{target}.");
        let eq = EquivalenceConfig { source, target };
        match run_equivalence_mode(&ctx, eq, &sc.initial_data, &sc.integrator, scale) {
            Ok(r) => summary.audits.extend(equivalence_audits(&prefix, &r, scale)),
            // data the preset cannot make constraint-satisfying is outside the scope of the pair
            Err(Error::Validation { field, .. }) if field == "initial_data" => {
                summary.audits.push(AuditOutcome::skipped(format!("{prefix}equivalence")))
            }
            Err(e) => return Err(e),
        }
    }
    for family in [ModelFamily::Potential, ModelFamily::Lagrangian, ModelFamily::Eulerian] {
        summary.audits.push(compat_classification(&ctx, family, scale)?);
    }
    Ok((rows, summary))
}

/// Simulation audits plus every ladder, equivalence and classification check.
pub fn verify(sc: &Scenario, source: &[u8], opts: &RunOptions) -> Result<RunOutput> {
    opts.validate()?;
    let per_mode = for_each_mode(sc, opts, |m| verify_mode(sc, m, opts))?;
    let mut rows = Vec::new();
    let mut modes = Vec::new();
    for (r, s) in per_mode {
        rows.extend(r);
        modes.push(s);
    }
    Ok(RunOutput {
        summary: summary("verify", sc, source, opts, modes),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Convergence,
    Equivalence,
    Verify,
}

pub fn execute(cmd: Command, sc: &Scenario, source: &[u8], opts: &RunOptions) -> Result<RunOutput> {
    match cmd {
        Command::Simulate => simulate(sc, source, opts),
        Command::Convergence => convergence(sc, source, opts),
        Command::Equivalence => equivalence(sc, source, opts),
        Command::Verify => verify(sc, source, opts),
    }
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    Ok(())
}

pub fn write_rows(path: &Path, rows: &[Row]) -> Result<()> {
    create_parent(path)?;
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Flattened ladder levels: one row per (mode, quantity, level).
pub fn write_ladders(path: &Path, modes: &[ModeSummary]) -> Result<()> {
    #[derive(Serialize)]
    struct LadderRow<'a> {
        mode: u32,
        quantity: &'a str,
        refine: &'a str,
        level: usize,
        nodes: usize,
        h: f64,
        dt: f64,
        residual: f64,
        order: Option<f64>,
    }
    create_parent(path)?;
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    for m in modes {
        for l in &m.ladders {
            for (k, lev) in l.levels.iter().enumerate() {
                let row = LadderRow {
                    mode: m.l,
                    quantity: l.quantity,
                    refine: l.refine,
                    level: k,
                    nodes: lev.nodes,
                    h: lev.h,
                    dt: lev.dt,
                    residual: lev.residual,
                    order: k.checked_sub(1).map(|i| l.orders[i]),
                };
                w.serialize(row).map_err(|e| Error::Io(e.to_string()))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary(path: &Path, s: &Summary) -> Result<()> {
    create_parent(path)?;
    let mut text = serde_json::to_string_pretty(s).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Loads the config at `path`, runs `cmd` and writes its artifacts next to it (or
/// where the `output` section says).
pub fn run_file(cmd: Command, path: &Path, opts: &RunOptions) -> Result<RunReport> {
    let loaded = Scenario::load(path)?;
    run_loaded(cmd, &loaded, opts)
}

pub fn run_loaded(cmd: Command, loaded: &LoadedScenario, opts: &RunOptions) -> Result<RunReport> {
    let out = execute(cmd, &loaded.scenario, &loaded.source, opts)?;
    let o = &loaded.scenario.output;
    let mut files = Vec::new();
    if matches!(cmd, Command::Simulate | Command::Verify) {
        let p = loaded.output_path(o.timeseries.as_ref(), ".csv");
        write_rows(&p, &out.rows)?;
        files.push(p);
    }
    if out.summary.modes.iter().any(|m| !m.ladders.is_empty()) {
        let p = loaded.output_path(o.table.as_ref(), ".convergence.csv");
        write_ladders(&p, &out.summary.modes)?;
        files.push(p);
    }
    let p = loaded.output_path(o.summary.as_ref(), ".summary.json");
    write_summary(&p, &out.summary)?;
    files.push(p);
    Ok(RunReport {
        passed: out.summary.passed,
        files,
    })
}

/// `simulate` on a config file.
pub fn run_scenario(path: &Path, opts: &RunOptions) -> Result<RunReport> {
    run_file(Command::Simulate, path, opts)
}

pub fn run_convergence(path: &Path, opts: &RunOptions) -> Result<RunReport> {
    run_file(Command::Convergence, path, opts)
}

pub fn run_equivalence(path: &Path, opts: &RunOptions) -> Result<RunReport> {
    run_file(Command::Equivalence, path, opts)
}

pub fn run_verify(path: &Path, opts: &RunOptions) -> Result<RunReport> {
    run_file(Command::Verify, path, opts)
}
