//! Initial-data recipes and the linear fix-ups that make random data satisfy
//! the boundary compatibility conditions.

use serde::{Deserialize, Serialize};

use crate::elliptic::{solve_div_curl, DivCurlProblem};
use crate::error::{Error, Result};
use crate::eulerian::{check_compat_eulerian_with_tol, EulerianModeState};
use crate::lagrangian::{check_compat_lagrangian_with_tol, LagrangianModeState};
use crate::linalg::solve_dense;
use crate::material::MaterialParams;
use crate::modal_ops::{dot, ModalOperatorSet};
use crate::model::{ModelFamily, ModelTag};
use crate::potential::{check_compat_potential_with_tol, constraint_functional, PotentialModeState};
use crate::rng::SplitMix64;
use crate::transforms::{map_potential_to_eulerian, map_potential_to_lagrangian, ModeState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialPreset {
    Zero,
    /// Uniform drift `u_t ≡ u1` balanced by a stiff membrane `κ = k0` (degree 0 only).
    Remark34 { u1: f64, k0: f64 },
    /// Rate field `u_t = −(B/ρ0) Δ q` with `q = r^l (r − R0)²` and membrane displacement `−q'(R1)`.
    ManufacturedElliptic,
    /// Smooth random data made compatible to third order.
    RandomCompatible { seed: u64 },
}

/// `x ↦ x + Σ c_i d_i` with `c` chosen so that every linear condition vanishes.
pub fn fix_up<S>(
    base: &S,
    dirs: &[S],
    conditions: impl Fn(&S) -> Vec<f64>,
    axpy: impl Fn(&S, f64, &S) -> S,
) -> Result<S> {
    let r0 = conditions(base);
    let c = solve_dense(direction_matrix(dirs, &conditions, r0.len())?, r0.iter().map(|x| -x).collect())?;
    Ok(dirs.iter().zip(c).fold(axpy(base, 0.0, base), |acc, (d, ci)| axpy(&acc, ci, d)))
}

/// A combination of `dirs` whose conditions are the `j`-th unit vector.
pub fn unit_violation<S>(
    zero: &S,
    dirs: &[S],
    conditions: impl Fn(&S) -> Vec<f64>,
    axpy: impl Fn(&S, f64, &S) -> S,
    j: usize,
) -> Result<S> {
    let m = conditions(zero).len();
    let mut e = vec![0.0; m];
    e[j] = 1.0;
    let c = solve_dense(direction_matrix(dirs, &conditions, m)?, e)?;
    Ok(dirs.iter().zip(c).fold(axpy(zero, 0.0, zero), |acc, (d, ci)| axpy(&acc, ci, d)))
}

fn direction_matrix<S>(dirs: &[S], conditions: &impl Fn(&S) -> Vec<f64>, m: usize) -> Result<Vec<Vec<f64>>> {
    if dirs.len() != m {
        return Err(Error::validation(
            "fix_up",
            format!("{} directions for {m} conditions", dirs.len()),
        ));
    }
    let cols: Vec<Vec<f64>> = dirs.iter().map(conditions).collect();
    Ok((0..m).map(|i| cols.iter().map(|c| c[i]).collect()).collect())
}

/// Profiles used to build data: `r^l` times a polynomial in `s = (r − R0)/(R1 − R0)`
/// (in `(r/R1)²` on the ball so the field is smooth at the origin).
struct Profiles<'a> {
    ops: &'a ModalOperatorSet,
}

impl Profiles<'_> {
    fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let r0 = self.ops.domain().inner_radius();
        let r1 = self.ops.outer_radius();
        let l = self.ops.degree() as i32;
        self.ops
            .nodes()
            .iter()
            .map(|&r| (r / r1).powi(l) * f(r, (r - r0) / (r1 - r0)))
            .collect()
    }

    fn random(&self, rng: &mut SplitMix64) -> Vec<f64> {
        let c: Vec<f64> = (0..4).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let ball = !self.ops.domain().has_gamma0();
        let r1 = self.ops.outer_radius();
        self.sample(|r, s| {
            let x = if ball { (r / r1).powi(2) } else { s };
            c[0] + x * (c[1] + x * (c[2] + x * c[3]))
        })
    }

    /// Vanishes to fourth order at Γ1 with unit slope weight at Γ0.
    fn inner_bump(&self) -> Vec<f64> {
        self.sample(|_, s| s * (1.0 - s).powi(4))
    }

    /// Flat to third order at Γ0 (or at the origin), equal to 1 on Γ1.
    fn outer_bump(&self) -> Vec<f64> {
        self.sample(|_, s| s.powi(4))
    }
}

fn potential_dir(n: usize, l: u32, build: impl FnOnce(&mut PotentialModeState)) -> PotentialModeState {
    let mut s = PotentialModeState::zeros(l, n);
    build(&mut s);
    s
}

/// Conditions of a potential state: the compatibility residuals up to `order`, then the
/// integral constraint when `constrained` and `l = 0`.
pub fn potential_conditions(
    ops: &ModalOperatorSet,
    mat: &MaterialParams,
    s: &PotentialModeState,
    order: u32,
    constrained: bool,
) -> Vec<f64> {
    let report = check_compat_potential_with_tol(ops, mat, s, order, f64::INFINITY).expect("order and lengths checked by caller");
    let mut r: Vec<f64> = report.conditions.iter().map(|c| c.residual).collect();
    if constrained && ops.degree() == 0 {
        r.push(constraint_functional(ops, mat, s));
    }
    r
}

/// Perturbation directions matching [`potential_conditions`] one to one.
pub fn potential_directions(ops: &ModalOperatorSet, order: u32, constrained: bool) -> Vec<PotentialModeState> {
    let n = ops.len();
    let l = ops.degree();
    let pr = Profiles { ops };
    let shell = ops.domain().has_gamma0();
    let mut dirs = Vec::new();
    if shell {
        dirs.push(potential_dir(n, l, |s| s.u = pr.inner_bump()));
    }
    dirs.push(potential_dir(n, l, |s| s.vt = 1.0));
    if order >= 3 {
        if shell {
            dirs.push(potential_dir(n, l, |s| s.ut = pr.inner_bump()));
        }
        dirs.push(potential_dir(n, l, |s| s.ut = pr.outer_bump()));
    }
    if constrained && l == 0 {
        dirs.push(potential_dir(n, l, |s| s.v = 1.0));
    }
    dirs
}

/// Smooth random potential data satisfying the compatibility conditions up to `order`
/// (and the integral constraint when `constrained`).
pub fn compatible_potential(
    ops: &ModalOperatorSet,
    mat: &MaterialParams,
    rng: &mut SplitMix64,
    order: u32,
    constrained: bool,
) -> Result<PotentialModeState> {
    crate::model::check_order(order, 3)?;
    let pr = Profiles { ops };
    let base = PotentialModeState {
        degree: ops.degree(),
        u: pr.random(rng),
        ut: pr.random(rng),
        v: rng.uniform(-1.0, 1.0),
        vt: rng.uniform(-1.0, 1.0),
    };
    fix_up(
        &base,
        &potential_directions(ops, order, constrained),
        |s| potential_conditions(ops, mat, s, order, constrained),
        |x, a, y| x.axpy(a, y),
    )
}

pub fn lagrangian_conditions(ops: &ModalOperatorSet, mat: &MaterialParams, s: &LagrangianModeState, order: u32) -> Vec<f64> {
    check_compat_lagrangian_with_tol(ops, mat, s, order, f64::INFINITY)
        .expect("order and lengths checked by caller")
        .conditions
        .iter()
        .map(|c| c.residual)
        .collect()
}

/// Directions matching [`lagrangian_conditions`]: boundary face values, then face bumps
/// of the displacement that move `Div r⃗` near each boundary.
pub fn lagrangian_directions(ops: &ModalOperatorSet, order: u32) -> Vec<LagrangianModeState> {
    let n = ops.len();
    let l = ops.degree();
    let shell = ops.domain().has_gamma0();
    let unit = |set: &dyn Fn(&mut LagrangianModeState)| {
        let mut s = LagrangianModeState::zeros(l, n);
        set(&mut s);
        s
    };
    let r0 = ops.domain().inner_radius();
    let r1 = ops.outer_radius();
    let face_profile = |f: &dyn Fn(f64) -> f64| -> Vec<f64> {
        let mut v: Vec<f64> = ops.faces().iter().map(|&r| f((r - r0) / (r1 - r0))).collect();
        v[0] = 0.0;
        v[n] = 0.0;
        v
    };
    let mut dirs = vec![unit(&|s| s.f[n] = 1.0), unit(&|s| s.ft[n] = 1.0)];
    if shell {
        dirs.push(unit(&|s| s.f[0] = 1.0));
        dirs.push(unit(&|s| s.ft[0] = 1.0));
    }
    if order >= 3 {
        if shell {
            dirs.push(unit(&|s| s.f = face_profile(&|x| x * (1.0 - x).powi(4))));
        }
        dirs.push(unit(&|s| s.f = face_profile(&|x| x.powi(4))));
    }
    dirs
}

pub fn eulerian_conditions(ops: &ModalOperatorSet, mat: &MaterialParams, s: &EulerianModeState, order: u32) -> Vec<f64> {
    check_compat_eulerian_with_tol(ops, mat, s, order, f64::INFINITY)
        .expect("order and lengths checked by caller")
        .conditions
        .iter()
        .map(|c| c.residual)
        .collect()
}

/// Directions matching [`eulerian_conditions`].
pub fn eulerian_directions(ops: &ModalOperatorSet, order: u32) -> Vec<EulerianModeState> {
    let n = ops.len();
    let l = ops.degree();
    let shell = ops.domain().has_gamma0();
    let pr = Profiles { ops };
    let unit = |set: &dyn Fn(&mut EulerianModeState)| {
        let mut s = EulerianModeState::zeros(l, n);
        set(&mut s);
        s
    };
    let mut dirs = vec![unit(&|s| s.f[n] = 1.0)];
    if shell {
        dirs.push(unit(&|s| s.f[0] = 1.0));
    }
    if order >= 3 {
        if shell {
            dirs.push(unit(&|s| s.p = pr.inner_bump()));
        }
        dirs.push(unit(&|s| s.p = pr.outer_bump()));
    }
    dirs
}

fn remark34(ops: &ModalOperatorSet, mat: &MaterialParams, u1: f64, k0: f64) -> Result<PotentialModeState> {
    if k0 == 0.0 || !k0.is_finite() {
        return Err(Error::validation("initial_data.k0", "must be finite and nonzero"));
    }
    if (mat.kappa - k0).abs() > 1e-12 * k0.abs() {
        return Err(Error::validation(
            "initial_data.k0",
            format!("must equal material.kappa ({})", mat.kappa),
        ));
    }
    let n = ops.len();
    let mut s = PotentialModeState::zeros(ops.degree(), n);
    if ops.degree() == 0 {
        s.ut = vec![u1; n];
        s.v = -mat.rho0 * u1 / k0;
    }
    Ok(s)
}

/// The potential-side data of [`InitialPreset::ManufacturedElliptic`].
pub fn manufactured_elliptic(ops: &ModalOperatorSet, mat: &MaterialParams) -> PotentialModeState {
    let l = ops.degree() as i32;
    let lf = l as f64;
    let r0 = ops.domain().inner_radius();
    let r1 = ops.outer_radius();
    let c2 = mat.sound_speed_sq();
    // Δ_l r^m = (m(m+1) − l(l+1)) r^(m−2) applied to r^(l+2) − 2R0 r^(l+1) + R0² r^l
    let lap_q = |r: f64| (4.0 * lf + 6.0) * r.powi(l) - 2.0 * r0 * (2.0 * lf + 2.0) * r.powi(l - 1);
    let ut: Vec<f64> = ops
        .nodes()
        .iter()
        .map(|&r| if r0 == 0.0 { -c2 * (4.0 * lf + 6.0) * r.powi(l) } else { -c2 * lap_q(r) })
        .collect();
    let dq1 = lf * r1.powi(l - 1) * (r1 - r0).powi(2) + 2.0 * r1.powi(l) * (r1 - r0);
    let v = if l == 0 {
        // the discrete constraint fixes the l = 0 amplitude; it matches −q'(R1) to O(h²)
        mat.rho0 * dot(ops.quad_weights(), &ut) / (mat.bulk * r1 * r1)
    } else {
        -dq1
    };
    PotentialModeState {
        degree: ops.degree(),
        u: vec![0.0; ops.len()],
        ut,
        v,
        vt: 0.0,
    }
}

/// Potential data for a preset; `constrained` requests the integral constraint for `l = 0`.
pub fn potential_preset(
    ops: &ModalOperatorSet,
    mat: &MaterialParams,
    preset: &InitialPreset,
    constrained: bool,
) -> Result<PotentialModeState> {
    match *preset {
        InitialPreset::Zero => Ok(PotentialModeState::zeros(ops.degree(), ops.len())),
        InitialPreset::Remark34 { u1, k0 } => {
            let s = remark34(ops, mat, u1, k0)?;
            if constrained && ops.degree() == 0 && u1 != 0.0 {
                return Err(Error::validation(
                    "initial_data",
                    "the drifting remark34 state violates the integral constraint",
                ));
            }
            Ok(s)
        }
        InitialPreset::ManufacturedElliptic => Ok(manufactured_elliptic(ops, mat)),
        InitialPreset::RandomCompatible { seed } => {
            let mut rng = SplitMix64::new(seed).fork(u64::from(ops.degree()) + 1);
            compatible_potential(ops, mat, &mut rng, 3, constrained)
        }
    }
}

/// Initial data for `tag` built from a preset. Displacement data always satisfies the
/// integral constraint since it is produced through the elliptic solve.
pub fn build_initial(ops: &ModalOperatorSet, mat: &MaterialParams, tag: ModelTag, preset: &InitialPreset) -> Result<ModeState> {
    let constrained = tag.is_constrained() || tag.family() == ModelFamily::Lagrangian;
    let p = potential_preset(ops, mat, preset, constrained)?;
    Ok(match tag.family() {
        ModelFamily::Potential => ModeState::Potential(p),
        ModelFamily::Eulerian => ModeState::Eulerian(map_potential_to_eulerian(ops, mat, &p)),
        ModelFamily::Lagrangian => ModeState::Lagrangian(map_potential_to_lagrangian(ops, mat, &p)?),
    })
}

/// Max interior-face error of the div-curl solve for [`InitialPreset::ManufacturedElliptic`]
/// against the exact radial component `q'`.
pub fn manufactured_elliptic_error(ops: &ModalOperatorSet, mat: &MaterialParams) -> Result<f64> {
    let s = manufactured_elliptic(ops, mat);
    let sol = solve_div_curl(
        ops,
        mat,
        &DivCurlProblem {
            degree: ops.degree(),
            w: s.ut,
            vbar: s.v,
        },
    )?;
    let l = ops.degree() as i32;
    let lf = f64::from(ops.degree());
    let r0 = ops.domain().inner_radius();
    let dq = |r: f64| lf * r.powi(l - 1) * (r - r0).powi(2) + 2.0 * r.powi(l) * (r - r0);
    let n = ops.len();
    Ok((1..n).map(|k| (sol.f[k] - dq(ops.faces()[k])).abs()).fold(0.0, f64::max))
}

/// One entry of a compatibility classification suite.
#[derive(Debug, Clone, PartialEq)]
pub struct CompatCase {
    pub state: ModeState,
    pub order: u32,
    /// Index of the condition that was violated and the injected residual.
    pub injected: Option<(usize, f64)>,
}

/// `satisfying` compatible data sets of `family` followed by `violating` ones, each
/// violating a single condition (cycling through them) by a known amount well above
/// the default tolerance.
pub fn compat_suite(
    ops: &ModalOperatorSet,
    mat: &MaterialParams,
    family: ModelFamily,
    seed: u64,
    satisfying: usize,
    violating: usize,
) -> Result<Vec<CompatCase>> {
    let order = 3;
    let mut root = SplitMix64::new(seed);
    let base = |k: usize, rng: &mut SplitMix64| -> Result<ModeState> {
        let constrained = family == ModelFamily::Lagrangian;
        let p = compatible_potential(ops, mat, &mut rng.fork(k as u64), order, constrained)?;
        Ok(match family {
            ModelFamily::Potential => ModeState::Potential(p),
            ModelFamily::Eulerian => ModeState::Eulerian(map_potential_to_eulerian(ops, mat, &p)),
            ModelFamily::Lagrangian => ModeState::Lagrangian(map_potential_to_lagrangian(ops, mat, &p)?),
        })
    };
    let mut cases = Vec::with_capacity(satisfying + violating);
    for k in 0..satisfying {
        cases.push(CompatCase {
            state: base(k, &mut root)?,
            order,
            injected: None,
        });
    }
    for k in 0..violating {
        let s = base(satisfying + k, &mut root)?;
        let eps = 1e-4 * 10f64.powi(-((k % 3) as i32)) * (1.0 + s.norm());
        let state = match s {
            ModeState::Potential(s) => {
                let dirs = potential_directions(ops, order, false);
                let cond = |x: &PotentialModeState| potential_conditions(ops, mat, x, order, false);
                let j = k % dirs.len();
                let zero = PotentialModeState::zeros(ops.degree(), ops.len());
                let e = unit_violation(&zero, &dirs, cond, |x, a, y| x.axpy(a, y), j)?;
                (ModeState::Potential(s.axpy(eps, &e)), j)
            }
            ModeState::Lagrangian(s) => {
                let dirs = lagrangian_directions(ops, order);
                let cond = |x: &LagrangianModeState| lagrangian_conditions(ops, mat, x, order);
                let j = k % dirs.len();
                let zero = LagrangianModeState::zeros(ops.degree(), ops.len());
                let e = unit_violation(&zero, &dirs, cond, |x, a, y| x.axpy(a, y), j)?;
                (ModeState::Lagrangian(s.axpy(eps, &e)), j)
            }
            ModeState::Eulerian(s) => {
                let dirs = eulerian_directions(ops, order);
                let cond = |x: &EulerianModeState| eulerian_conditions(ops, mat, x, order);
                let j = k % dirs.len();
                let zero = EulerianModeState::zeros(ops.degree(), ops.len());
                let e = unit_violation(&zero, &dirs, cond, |x, a, y| x.axpy(a, y), j)?;
                (ModeState::Eulerian(s.axpy(eps, &e)), j)
            }
        };
        cases.push(CompatCase {
            state: state.0,
            order,
            injected: Some((state.1, eps)),
        });
    }
    Ok(cases)
}

/// Compatibility report of a state of any family.
pub fn check_compat_any(
    ops: &ModalOperatorSet,
    mat: &MaterialParams,
    s: &ModeState,
    order: u32,
    tol_scale: f64,
) -> Result<crate::model::CompatReport> {
    let tol = crate::model::compat_tolerance(s.norm()) * tol_scale;
    match s {
        ModeState::Potential(s) => check_compat_potential_with_tol(ops, mat, s, order, tol),
        ModeState::Lagrangian(s) => check_compat_lagrangian_with_tol(ops, mat, s, order, tol),
        ModeState::Eulerian(s) => check_compat_eulerian_with_tol(ops, mat, s, order, tol),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::make_domain;
    use crate::elliptic::{solve_div_curl, DivCurlProblem};
    use crate::eulerian::check_compat_eulerian;
    use crate::lagrangian::check_compat_lagrangian;
    use crate::modal_ops::assemble_mode_operators;
    use crate::potential::check_compat_potential;

    fn ops(r0: f64, n: usize, l: u32) -> ModalOperatorSet {
        let (d, g) = make_domain(r0, 1.0, n).unwrap();
        assemble_mode_operators(&d, &g, l)
    }

    fn mat() -> MaterialParams {
        MaterialParams {
            rho0: 1.2,
            bulk: 2.0,
            mu: 0.8,
            sigma: 0.5,
            delta: 0.3,
            kappa: 1.5,
        }
    }

    #[test]
    fn random_potential_data_is_compatible() {
        for r0 in [0.0, 0.4] {
            for l in 0..3 {
                let o = ops(r0, 24, l);
                let mut rng = SplitMix64::new(11 + u64::from(l));
                for order in [2, 3] {
                    let s = compatible_potential(&o, &mat(), &mut rng, order, true).unwrap();
                    let r = check_compat_potential(&o, &mat(), &s, order).unwrap();
                    assert!(r.passed(), "r0 {r0} l {l} order {order}: {r:?}");
                    assert!(constraint_functional(&o, &mat(), &s).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn mapped_data_stays_compatible() {
        for r0 in [0.0, 0.4] {
            for l in 0..3 {
                let o = ops(r0, 24, l);
                let mut rng = SplitMix64::new(5);
                let s = compatible_potential(&o, &mat(), &mut rng, 3, true).unwrap();
                let e = map_potential_to_eulerian(&o, &mat(), &s);
                assert!(check_compat_eulerian(&o, &mat(), &e, 3).unwrap().passed());
                let lg = map_potential_to_lagrangian(&o, &mat(), &s).unwrap();
                let r = check_compat_lagrangian(&o, &mat(), &lg, 3).unwrap();
                assert!(r.passed(), "{r:?}");
            }
        }
    }

    #[test]
    fn unit_violation_hits_one_condition() {
        let o = ops(0.4, 20, 1);
        let m = mat();
        let dirs = lagrangian_directions(&o, 3);
        let zero = LagrangianModeState::zeros(1, 20);
        let cond = |s: &LagrangianModeState| lagrangian_conditions(&o, &m, s, 3);
        for j in 0..dirs.len() {
            let e = unit_violation(&zero, &dirs, cond, |x, a, y| x.axpy(a, y), j).unwrap();
            let r = cond(&e);
            for (i, x) in r.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((x - expect).abs() < 1e-9, "{j} {i} {x}");
            }
        }
        let ed = eulerian_directions(&o, 3);
        assert_eq!(ed.len(), eulerian_conditions(&o, &m, &EulerianModeState::zeros(1, 20), 3).len());
    }

    #[test]
    fn manufactured_elliptic_recovers_the_field() {
        for (r0, l) in [(0.0, 0), (0.0, 1), (0.4, 0), (0.4, 2)] {
            let m = mat();
            let err = |n: usize| {
                let o = ops(r0, n, l);
                let s = manufactured_elliptic(&o, &m);
                let sol = solve_div_curl(&o, &m, &DivCurlProblem { degree: l, w: s.ut.clone(), vbar: s.v }).unwrap();
                let lf = l as f64;
                let dq = |r: f64| lf * r.powf(lf - 1.0) * (r - r0).powi(2) + 2.0 * r.powi(l as i32) * (r - r0);
                (1..n).map(|k| (sol.f[k] - dq(o.faces()[k])).abs()).fold(0.0, f64::max)
            };
            let (e1, e2) = (err(32), err(64));
            assert!(e2 < 1e-11 || e1 / e2 > 3.5, "r0 {r0} l {l}: {e1} {e2}");
        }
    }

    #[test]
    fn presets_per_model() {
        let o = ops(0.0, 16, 0);
        let m = mat().with_kappa(2.0);
        let r = build_initial(&o, &m, ModelTag::P, &InitialPreset::Remark34 { u1: 1.0, k0: 2.0 }).unwrap();
        match r {
            ModeState::Potential(s) => assert_eq!(s.v, -m.rho0 / 2.0),
            _ => panic!(),
        }
        assert!(build_initial(&o, &m, ModelTag::P, &InitialPreset::Remark34 { u1: 1.0, k0: 3.0 }).is_err());
        assert!(build_initial(&o, &m, ModelTag::L, &InitialPreset::Remark34 { u1: 1.0, k0: 2.0 }).is_err());
        for tag in [ModelTag::Pc, ModelTag::L, ModelTag::Ec] {
            let s = build_initial(&o, &m, tag, &InitialPreset::RandomCompatible { seed: 9 }).unwrap();
            let again = build_initial(&o, &m, tag, &InitialPreset::RandomCompatible { seed: 9 }).unwrap();
            assert_eq!(s, again);
        }
    }

    #[test]
    fn compat_suite_is_classified_exactly() {
        for (r0, l) in [(0.0, 0), (0.5, 1), (0.3, 2)] {
            let o = ops(r0, 24, l);
            let m = mat();
            for family in [ModelFamily::Potential, ModelFamily::Lagrangian, ModelFamily::Eulerian] {
                for case in compat_suite(&o, &m, family, 5, 4, 8).unwrap() {
                    let rep = check_compat_any(&o, &m, &case.state, case.order, 1.0).unwrap();
                    match case.injected {
                        None => assert!(rep.passed(), "{family:?} {rep:?}"),
                        Some((j, eps)) => {
                            assert!(!rep.passed());
                            let r = rep.conditions[j].residual;
                            assert!((r - eps).abs() <= 0.1 * eps, "{family:?} {j}: {r} vs {eps}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn manufactured_error_is_second_order() {
        let m = mat();
        let e: Vec<f64> = [16, 32, 64]
            .iter()
            .map(|&n| manufactured_elliptic_error(&ops(0.4, n, 1), &m).unwrap())
            .collect();
        assert!(e[1] / e[2] > 3.2, "{e:?}");
    }
}
