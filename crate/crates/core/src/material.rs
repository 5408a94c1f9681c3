use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fluid constants and (spatially constant) membrane coefficients on Γ1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    pub rho0: f64,
    #[serde(rename = "bulk_modulus", alias = "B")]
    pub bulk: f64,
    pub mu: f64,
    pub sigma: f64,
    pub delta: f64,
    pub kappa: f64,
}

impl MaterialParams {
    pub fn unit() -> Self {
        Self {
            rho0: 1.0,
            bulk: 1.0,
            mu: 1.0,
            sigma: 1.0,
            delta: 0.0,
            kappa: 1.0,
        }
    }

    /// Squared sound speed B/ρ0.
    pub fn sound_speed_sq(&self) -> f64 {
        self.bulk / self.rho0
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn validate(self) -> Result<Self> {
        validate_params(self)
    }
}

/// Returns `p` unchanged when ρ0, B, μ and σ are positive. δ and κ carry no sign restriction.
pub fn validate_params(p: MaterialParams) -> Result<MaterialParams> {
    let positive = [
        ("rho0", p.rho0),
        ("bulk_modulus", p.bulk),
        ("mu", p.mu),
        ("sigma", p.sigma),
    ];
    for (field, value) in positive {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::AssumptionAViolated { field, value });
        }
    }
    for (field, value) in [("delta", p.delta), ("kappa", p.kappa)] {
        if !value.is_finite() {
            return Err(Error::validation(field, "must be finite"));
        }
    }
    Ok(p)
}
