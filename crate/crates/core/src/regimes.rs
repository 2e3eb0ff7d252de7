//! Second-order Zeeman splitting and linear/non-linear regime classification.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{mhz, BOHR_MAGNETON, HBAR};

/// Field above which uncorrected second-order effects dominate, T.
pub const FIELD_LIMIT: f64 = 0.45;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IonSpecies {
    /// Hyperfine (singlet-triplet) splitting A, rad/s.
    pub hyperfine_splitting: f64,
    /// μ_B/ħ, rad/(s·T).
    pub bohr_response: f64,
}

impl IonSpecies {
    pub fn yb171() -> Self {
        Self { hyperfine_splitting: mhz(12_600.0), bohr_response: BOHR_MAGNETON / HBAR }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hyperfine_splitting > 0.0) {
            return Err(Error::OutOfRange {
                name: "hyperfine_splitting",
                value: self.hyperfine_splitting,
                range: "(0, inf)",
            });
        }
        if !(self.bohr_response > 0.0) {
            return Err(Error::OutOfRange { name: "bohr_response", value: self.bohr_response, range: "(0, inf)" });
        }
        Ok(())
    }
}

impl Default for IonSpecies {
    fn default() -> Self {
        Self::yb171()
    }
}

/// Δ = 2(μ_B B)²/A.
pub fn zeeman_gap(species: &IonSpecies, b_field: f64) -> f64 {
    let z = species.bohr_response * b_field;
    2.0 * z * z / species.hyperfine_splitting
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Nonlinear,
    Intermediate,
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub regime: Regime,
    /// Ωg/Δ
    pub rf_ratio: f64,
    /// ηΩg/Δ
    pub sideband_ratio: f64,
    /// Δ/Ωg
    pub nonlinear_ratio: f64,
    /// B / 0.45 T
    pub field_margin: f64,
    pub threshold: f64,
}

pub const DEFAULT_THRESHOLD: f64 = 10.0;

pub fn classify(omega_g: f64, eta_omega_g: f64, delta: f64, b_field: f64, threshold: f64) -> RegimeReport {
    let ratio = |a: f64, b: f64| if b == 0.0 { if a == 0.0 { 0.0 } else { f64::INFINITY } } else { a / b };
    let delta = delta.abs();
    let rf_ratio = ratio(omega_g.abs(), delta);
    let sideband_ratio = ratio(eta_omega_g.abs(), delta);
    let nonlinear_ratio = ratio(delta, omega_g.abs());
    let regime = if rf_ratio >= threshold && sideband_ratio >= threshold {
        Regime::Linear
    } else if nonlinear_ratio >= threshold {
        Regime::Nonlinear
    } else {
        Regime::Intermediate
    };
    RegimeReport { regime, rf_ratio, sideband_ratio, nonlinear_ratio, field_margin: b_field / FIELD_LIMIT, threshold }
}

/// Δ including the dressed Stark contribution of a detuned |0>↔|0'> leg.
pub fn dressed_delta(
    species: &IonSpecies,
    b_field: f64,
    omega_z: f64,
    delta_z: f64,
    omega: f64,
    min_ratio: f64,
) -> Result<f64> {
    let base = zeeman_gap(species, b_field);
    if omega_z == 0.0 {
        return Ok(base);
    }
    for (name, lhs) in [
        ("|Ω + √2 δz| / Ωz", (omega + SQRT_2 * delta_z).abs()),
        ("|Ω - √2 δz| / Ωz", (omega - SQRT_2 * delta_z).abs()),
    ] {
        let ratio = lhs / omega_z.abs();
        if ratio < min_ratio {
            return Err(Error::ConstraintViolated { name, ratio, required: min_ratio });
        }
    }
    Ok(base + delta_z * omega_z * omega_z / (omega * omega - 2.0 * delta_z * delta_z))
}
