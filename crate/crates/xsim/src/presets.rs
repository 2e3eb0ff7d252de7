//! Built-in experiments.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Result};

use crate::config::{CustomNoise, ExperimentConfig, IntegratorSettings, NoiseSpec, Sweep};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum PresetKind {
    DLifetime,
    Fig4Bottom,
    Fig4Middle,
    Fig4Top,
    MsGate,
    RegimeReport,
    StarkZDressed,
    StarkZRf,
}

/// All presets, sorted by name.
pub const ALL: [PresetKind; 8] = [
    PresetKind::DLifetime,
    PresetKind::Fig4Bottom,
    PresetKind::Fig4Middle,
    PresetKind::Fig4Top,
    PresetKind::MsGate,
    PresetKind::RegimeReport,
    PresetKind::StarkZDressed,
    PresetKind::StarkZRf,
];

impl PresetKind {
    pub fn name(self) -> &'static str {
        match self {
            PresetKind::DLifetime => "d-lifetime",
            PresetKind::Fig4Bottom => "fig4-bottom",
            PresetKind::Fig4Middle => "fig4-middle",
            PresetKind::Fig4Top => "fig4-top",
            PresetKind::MsGate => "ms-gate",
            PresetKind::RegimeReport => "regime-report",
            PresetKind::StarkZDressed => "stark-z-dressed",
            PresetKind::StarkZRf => "stark-z-rf",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match ALL.iter().find(|k| k.name() == name) {
            Some(k) => Ok(*k),
            None => bail!("unknown preset {name:?}; available: {}", ALL.map(|k| k.name()).join(", ")),
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            PresetKind::DLifetime => "survival of |D> under dressing only (36.5 kHz, 50 ms) with an exponential T1 fit",
            PresetKind::Fig4Bottom => "adiabatic sigma_z loop, x = 3.1416, rate 47.124 rad/ms, swept over dressing strength",
            PresetKind::Fig4Middle => "adiabatic D -> B transfer, rate 31.416 rad/ms, swept over dressing strength",
            PresetKind::Fig4Top => "basic sigma_y gate, Omega_g = 1.1785 kHz, swept over dressing strength",
            PresetKind::MsGate => "two-ion entangling gate at the reference parameters for heating 0, 10, 100 /s",
            PresetKind::RegimeReport => "second-order Zeeman gap and linear/non-linear classification versus field",
            PresetKind::StarkZDressed => "sigma_z from a detuned |0>-|0'> leg under dressing, swept over dressing strength",
            PresetKind::StarkZRf => "sigma_z from oppositely detuned RF legs, swept over dressing strength",
        }
    }
}

pub fn sweep_parameter(kind: PresetKind) -> &'static str {
    match kind {
        PresetKind::MsGate => "heating_rate_per_s",
        PresetKind::RegimeReport => "b_gauss",
        _ => "omega_khz",
    }
}

pub fn uses_noise(kind: PresetKind) -> bool {
    !matches!(kind, PresetKind::MsGate | PresetKind::RegimeReport)
}

const KNOBS: [(&str, f64); 2] = [("delta_omega_mismatch_khz", 0.0), ("delta_phi_error_rad", 0.0)];

/// Parameter names and defaults accepted by a preset.
pub fn default_params(kind: PresetKind) -> Vec<(&'static str, f64)> {
    let mut p: Vec<(&'static str, f64)> = match kind {
        PresetKind::Fig4Top => vec![("omega_g_khz", 1.1785)],
        PresetKind::Fig4Middle => vec![("rate_rad_per_ms", 31.416)],
        PresetKind::Fig4Bottom => vec![("rate_rad_per_ms", 47.124), ("x_rad", 3.1416)],
        PresetKind::DLifetime => vec![("horizon_ms", 50.0), ("record_ms", 1.0), ("fit_from_ms", 1.0)],
        PresetKind::StarkZDressed => {
            vec![("omega_z_khz", 20.0), ("delta_z_khz", 200.0), ("x_rad", std::f64::consts::PI), ("min_ratio", 10.0)]
        }
        PresetKind::StarkZRf => {
            vec![("omega_g_khz", 2.0), ("delta_khz", 40.0), ("x_rad", std::f64::consts::PI), ("min_ratio", 10.0)]
        }
        PresetKind::MsGate => vec![("fock_dim", 8.0), ("record_stride", 5.0), ("t_end_ms", 0.0)],
        PresetKind::RegimeReport => vec![
            ("omega_g_khz", 100.0),
            ("eta", 0.0071),
            ("threshold", 10.0),
            ("omega_khz", 500.0),
            ("omega_z_khz", 0.0),
            ("delta_z_khz", 1000.0),
        ],
    };
    if uses_noise(kind) {
        p.extend(KNOBS);
    }
    p
}

fn log_points(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let v = lo * (hi / lo).powf(k as f64 / (n - 1) as f64);
            // four significant digits keep configs readable
            let scale = 10f64.powi(3 - v.log10().floor() as i32);
            (v * scale).round() / scale
        })
        .collect()
}

/// Default configuration for a named preset.
pub fn default_config(name: &str) -> Result<ExperimentConfig> {
    let kind = PresetKind::from_name(name)?;
    let table = || vec![NoiseSpec::Marker("black".into()), NoiseSpec::Marker("red".into())];
    let (values, log_axis, noise) = match kind {
        PresetKind::Fig4Top | PresetKind::Fig4Middle | PresetKind::Fig4Bottom => (log_points(50.0, 1000.0, 20), true, table()),
        PresetKind::DLifetime => (
            vec![36.5],
            false,
            vec![NoiseSpec::Custom(CustomNoise {
                marker: "lifetime".into(),
                sd_mu_hz: 100.0,
                tau_mu_ms: 0.1,
                f: 0.01,
                tau_f_ms: 3.2,
            })],
        ),
        PresetKind::StarkZDressed => (log_points(10.0, 60.0, 8), true, table()),
        PresetKind::StarkZRf => (log_points(50.0, 500.0, 6), true, table()),
        PresetKind::MsGate => (vec![0.0, 10.0, 100.0], false, Vec::new()),
        PresetKind::RegimeReport => (log_points(1.0, 4500.0, 20), true, Vec::new()),
    };
    Ok(ExperimentConfig {
        preset: kind.name().into(),
        sweep: Sweep { parameter: sweep_parameter(kind).into(), values, log_axis },
        noise,
        trajectories: 50,
        base_seed: 2024,
        out: PathBuf::from("xsim-out").join(kind.name()),
        params: BTreeMap::new(),
        integrator: IntegratorSettings::default(),
        record_wall_time: false,
        workers: None,
    })
}
