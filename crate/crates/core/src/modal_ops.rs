//! Per-degree radial operators.
//!
//! A field `Φ(x) = φ(r) Y_lm(x/|x|)` with `Y_lm` orthonormal on the unit
//! sphere reduces every volume integral to `∫ φ r² dr` and every Γ1 integral
//! to `R1² φ(R1)`. Gradient fields split as `∇(ψ Y) = ψ' Y r̂ + (ψ/r) r∇Y`,
//! so a curl-free vector field is carried by a radial profile `f` and a
//! tangential profile `g` with `f = (r g)'`.
//!
//! Scalars live on grid nodes, radial vector components on faces (the `N + 1`
//! face vector includes both boundary faces) and tangential profiles on
//! nodes. The discrete gradient and divergence satisfy
//!
//! ```text
//! <grad ψ, (f, g)>_W = −<ψ, div(f, g)>_V + R1² ψ_{N−1} f_N − R0² ψ_0 f_0
//! ```
//!
//! exactly, which is what makes the energy and constraint identities exact
//! at the semi-discrete level.

use crate::domain::{DomainSpec, GeometryKind, RadialGrid};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Gamma0,
    Gamma1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceOrder {
    Value,
    NormalDerivative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModalOperatorSet {
    domain: DomainSpec,
    grid: RadialGrid,
    degree: u32,
    lambda: f64,
    face_weights: Vec<f64>,
}

pub fn assemble_mode_operators(domain: &DomainSpec, grid: &RadialGrid, degree: u32) -> ModalOperatorSet {
    ModalOperatorSet::new(domain, grid, degree)
}

impl ModalOperatorSet {
    pub fn new(domain: &DomainSpec, grid: &RadialGrid, degree: u32) -> Self {
        let faces = grid.faces();
        let nodes = grid.nodes();
        let n = grid.len();
        let mut face_weights = vec![0.0; n + 1];
        for k in 1..n {
            face_weights[k] = faces[k] * faces[k] * (nodes[k] - nodes[k - 1]);
        }
        let ll1 = f64::from(degree) * f64::from(degree + 1);
        Self {
            domain: *domain,
            grid: grid.clone(),
            degree,
            lambda: ll1 / (domain.outer_radius() * domain.outer_radius()),
            face_weights,
        }
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    /// l(l+1).
    pub fn ll1(&self) -> f64 {
        f64::from(self.degree) * f64::from(self.degree + 1)
    }

    /// Eigenvalue l(l+1)/R1² of −Δ_Γ on the outer sphere.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn outer_radius(&self) -> f64 {
        self.domain.outer_radius()
    }

    pub fn has_tangential(&self) -> bool {
        self.degree > 0
    }

    /// Volume quadrature weights, ∫ φ r² dr ≈ Σ w_j φ_j.
    pub fn quad_weights(&self) -> &[f64] {
        self.grid.volumes()
    }

    /// Weights of radial face components, r_k² h_k on interior faces and 0 on the boundary faces.
    pub fn face_weights(&self) -> &[f64] {
        &self.face_weights
    }

    fn check_len(&self, got: usize, expected: usize) -> Result<()> {
        if got == expected {
            Ok(())
        } else {
            Err(Error::LengthMismatch { expected, got })
        }
    }

    pub fn volume_integral(&self, phi: &[f64]) -> Result<f64> {
        self.check_len(phi.len(), self.len())?;
        Ok(dot(self.quad_weights(), phi))
    }

    /// Σ w_j a_j b_j.
    pub fn scalar_inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.quad_weights()
            .iter()
            .zip(a)
            .zip(b)
            .map(|((w, x), y)| w * x * y)
            .sum()
    }

    /// Discrete ∫ (f1 f2 + l(l+1) g1 g2) r² dr.
    pub fn vector_inner(&self, f1: &[f64], g1: &[f64], f2: &[f64], g2: &[f64]) -> f64 {
        let radial: f64 = self
            .face_weights
            .iter()
            .zip(f1)
            .zip(f2)
            .map(|((w, x), y)| w * x * y)
            .sum();
        if self.degree == 0 {
            return radial;
        }
        radial + self.ll1() * self.scalar_inner(g1, g2)
    }

    /// Face gradient of node values. Boundary entries are set to the given values.
    pub fn grad(&self, psi: &[f64], inner: f64, outer: f64) -> Vec<f64> {
        let n = self.len();
        let r = self.grid.nodes();
        let mut f = vec![0.0; n + 1];
        for k in 1..n {
            f[k] = (psi[k] - psi[k - 1]) / (r[k] - r[k - 1]);
        }
        f[0] = inner;
        f[n] = outer;
        f
    }

    /// Face gradient whose boundary entries are the one-sided collocated derivative
    /// (the inner entry of a ball is 0).
    pub fn grad_with_traces(&self, psi: &[f64]) -> Vec<f64> {
        let d = self.d1(psi);
        let inner = match self.grid.kind() {
            GeometryKind::Shell => d[0],
            GeometryKind::Ball => 0.0,
        };
        self.grad(psi, inner, d[self.len() - 1])
    }

    /// Tangential profile ψ/r of a gradient field (zero for l = 0).
    pub fn tangential(&self, psi: &[f64]) -> Vec<f64> {
        if self.degree == 0 {
            return vec![0.0; self.len()];
        }
        psi.iter()
            .zip(self.grid.tangential_radii())
            .map(|(p, rt)| p / rt)
            .collect()
    }

    /// Inverse of [`Self::tangential`]: r g.
    pub fn radial_from_tangential(&self, g: &[f64]) -> Vec<f64> {
        g.iter()
            .zip(self.grid.tangential_radii())
            .map(|(x, rt)| x * rt)
            .collect()
    }

    /// Modal divergence f' + 2f/r − l(l+1) g/r as a flux balance per control volume.
    /// `f` has `N + 1` face entries; its boundary entries are the boundary fluxes.
    pub fn div(&self, f: &[f64], g: &[f64]) -> Vec<f64> {
        let n = self.len();
        let faces = self.grid.faces();
        let vol = self.grid.volumes();
        let rt = self.grid.tangential_radii();
        let ll1 = self.ll1();
        (0..n)
            .map(|j| {
                let flux = faces[j + 1] * faces[j + 1] * f[j + 1] - faces[j] * faces[j] * f[j];
                let mut d = flux / vol[j];
                if self.degree > 0 {
                    d -= ll1 * g[j] / rt[j];
                }
                d
            })
            .collect()
    }

    /// Radial Laplacian with prescribed outward fluxes: `inner_flux` = ψ'(R0), `outer_flux` = ψ'(R1).
    pub fn lap(&self, psi: &[f64], inner_flux: f64, outer_flux: f64) -> Vec<f64> {
        let f = self.grad(psi, inner_flux, outer_flux);
        let g = self.tangential(psi);
        self.div(&f, &g)
    }

    /// Collocated d/dr: central in the interior, one-sided second order at the ends.
    pub fn d1(&self, phi: &[f64]) -> Vec<f64> {
        let n = self.len();
        let h = self.grid.spacing();
        let mut d = vec![0.0; n];
        for j in 1..n - 1 {
            d[j] = (phi[j + 1] - phi[j - 1]) / (2.0 * h);
        }
        d[0] = (-3.0 * phi[0] + 4.0 * phi[1] - phi[2]) / (2.0 * h);
        d[n - 1] = (3.0 * phi[n - 1] - 4.0 * phi[n - 2] + phi[n - 3]) / (2.0 * h);
        d
    }

    pub fn surface_trace(&self, phi: &[f64], which: Boundary, order: TraceOrder) -> Result<f64> {
        self.check_len(phi.len(), self.len())?;
        let n = self.len();
        let h = self.grid.spacing();
        match which {
            Boundary::Gamma1 => Ok(match order {
                TraceOrder::Value => phi[n - 1],
                TraceOrder::NormalDerivative => {
                    (3.0 * phi[n - 1] - 4.0 * phi[n - 2] + phi[n - 3]) / (2.0 * h)
                }
            }),
            Boundary::Gamma0 => {
                if !self.domain.has_gamma0() {
                    return Err(Error::NoGamma0);
                }
                Ok(match order {
                    TraceOrder::Value => phi[0],
                    TraceOrder::NormalDerivative => {
                        -(-3.0 * phi[0] + 4.0 * phi[1] - phi[2]) / (2.0 * h)
                    }
                })
            }
        }
    }

    /// f − (r g)' on the interior faces (boundary entries are 0).
    pub fn curl_defect(&self, f: &[f64], g: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut out = vec![0.0; n + 1];
        if self.degree == 0 {
            return out;
        }
        let rg = self.radial_from_tangential(g);
        let r = self.grid.nodes();
        for k in 1..n {
            out[k] = f[k] - (rg[k] - rg[k - 1]) / (r[k] - r[k - 1]);
        }
        out
    }

    /// Face positions (N + 1 entries).
    pub fn faces(&self) -> &[f64] {
        self.grid.faces()
    }

    pub fn nodes(&self) -> &[f64] {
        self.grid.nodes()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::make_domain;
    use approx::assert_relative_eq;

    fn ops(r0: f64, n: usize, l: u32) -> ModalOperatorSet {
        let (d, g) = make_domain(r0, 1.0, n).unwrap();
        assemble_mode_operators(&d, &g, l)
    }

    fn sample(o: &ModalOperatorSet, f: impl Fn(f64) -> f64) -> Vec<f64> {
        o.nodes().iter().map(|&r| f(r)).collect()
    }

    #[test]
    fn lambda_matches_degree() {
        assert_eq!(ops(0.0, 16, 2).lambda(), 6.0);
        assert_eq!(ops(0.0, 16, 0).lambda(), 0.0);
    }

    #[test]
    fn laplacian_of_r_squared_is_six() {
        let err = |n| {
            let o = ops(0.5, n, 0);
            let psi = sample(&o, |r| r * r);
            let lap = o.lap(&psi, 2.0 * 0.5, 2.0);
            lap[1..n - 1].iter().map(|x| (x - 6.0).abs()).fold(0.0, f64::max)
        };
        assert!(err(33) < 1e-9);
        // the flux form is exact for r² in the interior, boundary cells included
        let o = ops(0.0, 20, 0);
        let psi = sample(&o, |r| r * r);
        for x in o.lap(&psi, 0.0, 2.0) {
            assert_relative_eq!(x, 6.0, max_relative = 1e-10);
        }
    }

    #[test]
    fn laplacian_of_linear_harmonic_vanishes() {
        for r0 in [0.0, 0.5] {
            let err = |n| {
                let o = ops(r0, n, 1);
                let psi = sample(&o, |r| r);
                let lap = o.lap(&psi, 1.0, 1.0);
                lap[1..n - 1].iter().fold(0.0f64, |m, x| m.max(x.abs()))
            };
            let (e1, e2) = (err(33), err(65));
            assert!(e1 < 1e-2, "{e1}");
            // the flux form reproduces r Y_1 exactly away from Γ1
            let ratio = e1 / e2;
            assert!(e2 < 1e-11 || (3.5..=4.5).contains(&ratio), "r0 {r0}: {e1} {e2}");
        }
    }

    #[test]
    fn laplacian_converges_second_order_for_smooth_profile() {
        // ψ = r^2 sin(r) for l = 2: Δ_l ψ = ψ'' + 2ψ'/r − 6ψ/r²
        let exact = |r: f64| {
            let (s, c) = r.sin_cos();
            let p = r * r * s;
            let dp = 2.0 * r * s + r * r * c;
            let ddp = 2.0 * s + 4.0 * r * c - r * r * s;
            ddp + 2.0 * dp / r - 6.0 * p / (r * r)
        };
        let err = |n| {
            let o = ops(0.5, n, 2);
            let psi = sample(&o, |r| r * r * r.sin());
            let d = |r: f64| 2.0 * r * r.sin() + r * r * r.cos();
            let lap = o.lap(&psi, d(0.5), d(1.0));
            (1..n - 1)
                .map(|j| (lap[j] - exact(o.nodes()[j])).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(41) / err(81);
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn quadrature_examples() {
        let o = ops(0.5, 64, 0);
        let ones = vec![1.0; 64];
        assert_relative_eq!(o.volume_integral(&ones).unwrap(), 0.875 / 3.0, max_relative = 1e-13);
        let o = ops(0.0, 64, 0);
        let r2 = sample(&o, |r| r * r);
        let q = o.volume_integral(&r2).unwrap();
        assert!((q - 0.2).abs() < 5e-4, "{q}");
        assert_eq!(o.volume_integral(&vec![0.0; 64]).unwrap(), 0.0);
        assert!(matches!(
            o.volume_integral(&[1.0; 3]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn quadrature_of_r_squared_converges() {
        let err = |n| {
            let o = ops(0.0, n, 0);
            let r2 = sample(&o, |r| r * r);
            (o.volume_integral(&r2).unwrap() - 0.2).abs()
        };
        let ratio = err(32) / err(64);
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn traces() {
        let o = ops(0.5, 40, 0);
        let phi = sample(&o, |r| r);
        let t = |b, ord| o.surface_trace(&phi, b, ord).unwrap();
        assert_relative_eq!(t(Boundary::Gamma1, TraceOrder::NormalDerivative), 1.0, max_relative = 1e-12);
        assert_relative_eq!(t(Boundary::Gamma0, TraceOrder::NormalDerivative), -1.0, max_relative = 1e-12);
        assert_eq!(t(Boundary::Gamma1, TraceOrder::Value), 1.0);
        let c = vec![3.0; 40];
        assert_eq!(o.surface_trace(&c, Boundary::Gamma0, TraceOrder::NormalDerivative).unwrap(), 0.0);
        let ball = ops(0.0, 40, 0);
        assert_eq!(
            ball.surface_trace(&c, Boundary::Gamma0, TraceOrder::Value),
            Err(Error::NoGamma0)
        );
    }

    #[test]
    fn trace_derivative_second_order() {
        let err = |n| {
            let o = ops(0.5, n, 0);
            let phi = sample(&o, |r| r.sin());
            (o.surface_trace(&phi, Boundary::Gamma1, TraceOrder::NormalDerivative).unwrap() - 1f64.cos()).abs()
        };
        let ratio = err(33) / err(65);
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn summation_by_parts_is_exact() {
        for (r0, l) in [(0.0, 0), (0.0, 3), (0.5, 0), (0.5, 2)] {
            let o = ops(r0, 23, l);
            let psi = sample(&o, |r| (3.0 * r).cos() + r);
            let f: Vec<f64> = o.faces().iter().map(|&r| (2.0 * r).sin() + 0.3).collect();
            let g = sample(&o, |r| r * r - 0.1);
            let gp = o.grad(&psi, 0.0, 0.0);
            let gt = o.tangential(&psi);
            let lhs = o.vector_inner(&gp, &gt, &f, &g);
            let div = o.div(&f, &g);
            let n = o.len();
            let r1 = o.faces()[n];
            let rr0 = o.faces()[0];
            let rhs = -o.scalar_inner(&psi, &div) + r1 * r1 * psi[n - 1] * f[n] - rr0 * rr0 * psi[0] * f[0];
            assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn integration_by_parts_against_continuous_forms() {
        // Σ w (Δ_l a) b + ∫(a'b' + l(l+1) a b / r²) r² − R1² a'(R1) b(R1) + R0² a'(R0) b(R0) → 0
        let resid = |n| {
            let o = ops(0.5, n, 1);
            let a = |r: f64| r.powi(3);
            let da = |r: f64| 3.0 * r * r;
            let b = |r: f64| r.cos();
            let an = sample(&o, a);
            let bn = sample(&o, b);
            let lap = o.lap(&an, da(0.5), da(1.0));
            let grad_term: f64 = o.nodes().iter().zip(o.quad_weights()).map(|(&r, w)| {
                w * (da(r) * (-r.sin()) + 2.0 * a(r) * b(r) / (r * r))
            }).sum();
            o.scalar_inner(&lap, &bn) + grad_term - da(1.0) * b(1.0) + 0.25 * da(0.5) * b(0.5)
        };
        let (e1, e2) = (resid(33).abs(), resid(65).abs());
        assert!(e1 < 1e-2);
        assert!(e1 / e2 > 3.5, "{e1} {e2}");
    }

    #[test]
    fn divergence_of_sampled_gradient_matches_laplacian() {
        let err = |n| {
            let o = ops(0.5, n, 2);
            let psi = sample(&o, |r| r.powi(2) * (1.0 + r));
            let dpsi = |r: f64| 2.0 * r + 3.0 * r * r;
            let f: Vec<f64> = o.faces().iter().map(|&r| dpsi(r)).collect();
            let g: Vec<f64> = o.nodes().iter().map(|&r| r * (1.0 + r)).collect();
            let div = o.div(&f, &g);
            let lap = o.lap(&psi, dpsi(0.5), dpsi(1.0));
            (1..n - 1).map(|j| (div[j] - lap[j]).abs()).fold(0.0, f64::max)
        };
        assert!(err(33) < 1e-2);
        assert!(err(33) / err(65) > 3.5);
    }

    #[test]
    fn operators_are_linear() {
        let o = ops(0.5, 20, 2);
        let x = sample(&o, |r| r.sin());
        let y = sample(&o, |r| r.exp());
        let z: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 2.0 * a - 3.0 * b).collect();
        let lx = o.lap(&x, 0.1, 0.2);
        let ly = o.lap(&y, 0.3, -0.4);
        let lz = o.lap(&z, 2.0 * 0.1 - 3.0 * 0.3, 2.0 * 0.2 + 3.0 * 0.4);
        for j in 0..20 {
            assert!((lz[j] - (2.0 * lx[j] - 3.0 * ly[j])).abs() < 1e-9 * (1.0 + lz[j].abs()));
        }
    }

    #[test]
    fn gradient_fields_are_curl_free() {
        let o = ops(0.0, 30, 3);
        let psi = sample(&o, |r| r.powi(3) * (1.0 - r));
        let f = o.grad(&psi, 0.0, 0.0);
        let g = o.tangential(&psi);
        assert!(max_abs(&o.curl_defect(&f, &g)) < 1e-13);
    }
}
