//! Unit conversions. Internally everything is SI seconds and angular
//! frequency in rad/s (hbar = 1).

use std::f64::consts::TAU;

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Bohr magneton, J/T.
pub const BOHR_MAGNETON: f64 = 9.274_010_078_3e-24;
/// Atomic mass unit, kg.
pub const AMU: f64 = 1.660_539_066_60e-27;
/// Mass of a 171Yb+ ion, kg.
pub const YB171_MASS: f64 = 170.936_331 * AMU;

/// Ordinary frequency in Hz to angular frequency.
pub fn hz(f: f64) -> f64 {
    TAU * f
}

/// Ordinary frequency in kHz to angular frequency.
pub fn khz(f: f64) -> f64 {
    TAU * 1e3 * f
}

/// Ordinary frequency in MHz to angular frequency.
pub fn mhz(f: f64) -> f64 {
    TAU * 1e6 * f
}

/// Angular frequency back to kHz.
pub fn to_khz(omega: f64) -> f64 {
    omega / (TAU * 1e3)
}

/// Angular frequency back to Hz.
pub fn to_hz(omega: f64) -> f64 {
    omega / TAU
}

pub fn ms(t: f64) -> f64 {
    1e-3 * t
}

pub fn us(t: f64) -> f64 {
    1e-6 * t
}

/// Parameter rates quoted in rad/ms.
pub fn rad_per_ms(r: f64) -> f64 {
    1e3 * r
}

/// Gauss to tesla.
pub fn gauss(b: f64) -> f64 {
    1e-4 * b
}
