//! Concentric-sphere geometry, the radial grid and the harmonic mode set.
//!
//! The fluid occupies either a ball of radius `R1` (no inner boundary) or a
//! spherical shell `R0 < r < R1` whose inner sphere is the rigid wall Γ0.
//! The outer sphere is always the membrane Γ1.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Smallest admissible radial node count.
pub const MIN_NODES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum GeometryKind {
    Ball,
    Shell,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainSpec {
    inner_radius: f64,
    outer_radius: f64,
}

impl DomainSpec {
    pub fn new(inner_radius: f64, outer_radius: f64) -> Result<Self> {
        if !(inner_radius.is_finite() && outer_radius.is_finite()) {
            return Err(Error::InvalidGeometry("radii must be finite".into()));
        }
        if inner_radius < 0.0 {
            return Err(Error::InvalidGeometry(format!(
                "inner radius {inner_radius} is negative"
            )));
        }
        if inner_radius >= outer_radius {
            return Err(Error::InvalidGeometry(format!(
                "inner radius {inner_radius} must be below outer radius {outer_radius}"
            )));
        }
        Ok(Self {
            inner_radius,
            outer_radius,
        })
    }

    pub fn inner_radius(&self) -> f64 {
        self.inner_radius
    }

    pub fn outer_radius(&self) -> f64 {
        self.outer_radius
    }

    pub fn kind(&self) -> GeometryKind {
        if self.inner_radius == 0.0 {
            GeometryKind::Ball
        } else {
            GeometryKind::Shell
        }
    }

    pub fn has_gamma0(&self) -> bool {
        self.kind() == GeometryKind::Shell
    }

    /// |Ω| = (4π/3)(R1³ − R0³).
    pub fn volume(&self) -> f64 {
        4.0 * PI / 3.0 * (self.outer_radius.powi(3) - self.inner_radius.powi(3))
    }

    /// |Γ1| = 4π R1².
    pub fn gamma1_area(&self) -> f64 {
        4.0 * PI * self.outer_radius * self.outer_radius
    }
}

pub fn volume(d: &DomainSpec) -> f64 {
    d.volume()
}

pub fn gamma1_area(d: &DomainSpec) -> f64 {
    d.gamma1_area()
}

/// Uniform radial grid with its finite-volume dual.
///
/// Nodes carry scalar unknowns. Faces sit halfway between nodes; face `0` is
/// the inner boundary (R0, or the origin for a ball) and face `N` is R1, so
/// there are `N + 1` faces of which `N − 1` are interior. Control volume `j`
/// spans `[face_j, face_{j+1}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    kind: GeometryKind,
    spacing: f64,
    nodes: Vec<f64>,
    faces: Vec<f64>,
    volumes: Vec<f64>,
    lengths: Vec<f64>,
    tangential_radii: Vec<f64>,
}

impl RadialGrid {
    pub fn new(domain: &DomainSpec, node_count: usize) -> Result<Self> {
        if node_count < MIN_NODES {
            return Err(Error::GridTooCoarse {
                nodes: node_count,
                min: MIN_NODES,
            });
        }
        let n = node_count;
        let r0 = domain.inner_radius();
        let r1 = domain.outer_radius();
        let kind = domain.kind();
        let (h, start) = match kind {
            GeometryKind::Shell => ((r1 - r0) / (n - 1) as f64, r0),
            GeometryKind::Ball => {
                let h = r1 / (n as f64 - 0.5);
                (h, 0.5 * h)
            }
        };
        let mut nodes: Vec<f64> = (0..n).map(|j| start + j as f64 * h).collect();
        nodes[n - 1] = r1;
        if kind == GeometryKind::Shell {
            nodes[0] = r0;
        }

        let mut faces = Vec::with_capacity(n + 1);
        faces.push(r0);
        for k in 1..n {
            faces.push(0.5 * (nodes[k - 1] + nodes[k]));
        }
        faces.push(r1);

        let volumes: Vec<f64> = (0..n)
            .map(|j| (faces[j + 1].powi(3) - faces[j].powi(3)) / 3.0)
            .collect();
        let lengths: Vec<f64> = (0..n).map(|j| faces[j + 1] - faces[j]).collect();
        let tangential_radii = volumes
            .iter()
            .zip(&lengths)
            .map(|(v, len)| (v / len).sqrt())
            .collect();

        Ok(Self {
            kind,
            spacing: h,
            nodes,
            faces,
            volumes,
            lengths,
            tangential_radii,
        })
    }

    pub fn kind(&self) -> GeometryKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// All `N + 1` face positions, boundaries included.
    pub fn faces(&self) -> &[f64] {
        &self.faces
    }

    /// ∫ r² dr over each control volume.
    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    /// Length of each control volume.
    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    /// Effective radius sqrt(V_j / len_j) used for tangential 1/r factors.
    pub fn tangential_radii(&self) -> &[f64] {
        &self.tangential_radii
    }

    pub fn inner_radius(&self) -> f64 {
        self.faces[0]
    }

    pub fn outer_radius(&self) -> f64 {
        self.faces[self.faces.len() - 1]
    }
}

/// Validated domain and grid in one call.
pub fn make_domain(r0: f64, r1: f64, node_count: usize) -> Result<(DomainSpec, RadialGrid)> {
    let d = DomainSpec::new(r0, r1)?;
    let g = RadialGrid::new(&d, node_count)?;
    Ok((d, g))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Mode {
    pub l: u32,
    /// Order label; has no effect on the dynamics.
    #[serde(default)]
    pub m: Option<i32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ModeSet {
    modes: Vec<Mode>,
}

impl ModeSet {
    pub fn new(modes: impl IntoIterator<Item = Mode>) -> Result<Self> {
        let mut modes: Vec<Mode> = modes.into_iter().collect();
        for m in &modes {
            if let Some(order) = m.m {
                if order.unsigned_abs() > m.l {
                    return Err(Error::validation(
                        "modes",
                        format!("order m = {order} exceeds degree l = {}", m.l),
                    ));
                }
            }
        }
        modes.sort_by_key(|m| m.l);
        for w in modes.windows(2) {
            if w[0].l == w[1].l {
                return Err(Error::validation(
                    "modes",
                    format!("degree {} listed twice", w[0].l),
                ));
            }
        }
        Ok(Self { modes })
    }

    pub fn from_degrees(degrees: &[u32]) -> Result<Self> {
        Self::new(degrees.iter().map(|&l| Mode { l, m: None }))
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn degrees(&self) -> Vec<u32> {
        self.modes.iter().map(|m| m.l).collect()
    }

    pub fn contains_degree_zero(&self) -> bool {
        self.modes.first().is_some_and(|m| m.l == 0)
    }
}
