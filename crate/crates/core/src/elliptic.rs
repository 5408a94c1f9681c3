//! Curl-free field with prescribed divergence and normal traces, through its
//! Neumann potential: `−B Δψ = ρ0 w`, `∂_ν ψ = −v̄` on Γ1, `∂_ν ψ = 0` on Γ0.

use crate::error::{Error, Result};
use crate::linalg::solve_tridiagonal;
use crate::material::MaterialParams;
use crate::modal_ops::{dot, ModalOperatorSet};
use crate::model::SQRT_4PI;

#[derive(Debug, Clone, PartialEq)]
pub struct DivCurlProblem {
    pub degree: u32,
    pub w: Vec<f64>,
    pub vbar: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivCurlSolution {
    /// Radial component on the `N + 1` faces.
    pub f: Vec<f64>,
    /// Tangential profile on the nodes (zero for `l = 0`).
    pub g: Vec<f64>,
    /// Generating potential; zero volume mean when `l = 0`.
    pub psi: Vec<f64>,
}

/// Solvability residual `√(4π)(ρ0∫w − B R1² v̄)` for `l = 0`, and 0 otherwise.
pub fn check_div_curl_compat(ops: &ModalOperatorSet, mat: &MaterialParams, prob: &DivCurlProblem) -> f64 {
    if prob.degree != 0 {
        return 0.0;
    }
    let r1 = ops.outer_radius();
    SQRT_4PI * (mat.rho0 * dot(ops.quad_weights(), &prob.w) - mat.bulk * r1 * r1 * prob.vbar)
}

fn default_tol(ops: &ModalOperatorSet, mat: &MaterialParams, prob: &DivCurlProblem) -> f64 {
    let r1 = ops.outer_radius();
    let scale: f64 = mat.rho0 * ops.quad_weights().iter().zip(&prob.w).map(|(v, w)| (v * w).abs()).sum::<f64>()
        + mat.bulk * r1 * r1 * prob.vbar.abs();
    1e-8 * (1.0 + SQRT_4PI * scale)
}

pub fn solve_div_curl(ops: &ModalOperatorSet, mat: &MaterialParams, prob: &DivCurlProblem) -> Result<DivCurlSolution> {
    let tol = default_tol(ops, mat, prob);
    solve_div_curl_with_tol(ops, mat, prob, tol)
}

pub fn solve_div_curl_with_tol(
    ops: &ModalOperatorSet,
    mat: &MaterialParams,
    prob: &DivCurlProblem,
    tol: f64,
) -> Result<DivCurlSolution> {
    if prob.degree != ops.degree() {
        return Err(Error::DegreeMismatch(prob.degree, ops.degree()));
    }
    let n = ops.len();
    if prob.w.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: prob.w.len(),
        });
    }
    let residual = check_div_curl_compat(ops, mat, prob);
    if residual.abs() > tol {
        return Err(Error::IncompatibleData { residual, tol });
    }

    // Rows of V_j Δψ_j, which is symmetric in the node unknowns.
    let faces = ops.faces();
    let nodes = ops.nodes();
    let vol = ops.quad_weights();
    let rt = ops.grid().tangential_radii();
    let coupling: Vec<f64> = (1..n).map(|k| faces[k] * faces[k] / (nodes[k] - nodes[k - 1])).collect();
    let mut lower = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for j in 0..n {
        if j > 0 {
            lower[j] = coupling[j - 1];
        }
        if j + 1 < n {
            upper[j] = coupling[j];
        }
        diag[j] = -(lower[j] + upper[j]) - ops.ll1() * vol[j] / (rt[j] * rt[j]);
        rhs[j] = -mat.rho0 / mat.bulk * vol[j] * prob.w[j];
    }
    rhs[n - 1] += faces[n] * faces[n] * prob.vbar;

    let psi = if prob.degree == 0 {
        // singular Neumann system: pin the last node, then move to the zero-mean representative
        let m = n - 1;
        let mut psi = solve_tridiagonal(&lower[..m], &diag[..m], &upper[..m], &rhs[..m])?;
        psi.push(0.0);
        let mean = dot(vol, &psi) / vol.iter().sum::<f64>();
        psi.iter_mut().for_each(|x| *x -= mean);
        psi
    } else {
        solve_tridiagonal(&lower, &diag, &upper, &rhs)?
    };
    Ok(DivCurlSolution {
        f: ops.grad(&psi, 0.0, -prob.vbar),
        g: ops.tangential(&psi),
        psi,
    })
}
