//! Ornstein-Uhlenbeck noise for the magnetic and Rabi-frequency fluctuations.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{hz, ms};

/// Parameters of a stationary OU process.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OUParams {
    /// Relaxation time τ, seconds.
    pub relaxation_time: f64,
    /// Stationary standard deviation, rad/s.
    pub stationary_sd: f64,
    /// Starting value; `None` draws from the stationary distribution.
    pub initial_value: Option<f64>,
}

impl OUParams {
    pub fn new(relaxation_time: f64, stationary_sd: f64) -> Result<Self> {
        if !(relaxation_time > 0.0) || !relaxation_time.is_finite() {
            return Err(Error::OutOfRange {
                name: "relaxation_time",
                value: relaxation_time,
                range: "(0, inf)",
            });
        }
        if !(stationary_sd >= 0.0) || !stationary_sd.is_finite() {
            return Err(Error::OutOfRange {
                name: "stationary_sd",
                value: stationary_sd,
                range: "[0, inf)",
            });
        }
        Ok(Self { relaxation_time, stationary_sd, initial_value: None })
    }

    pub fn from_diffusion(relaxation_time: f64, diffusion: f64) -> Result<Self> {
        Self::new(relaxation_time, (diffusion * relaxation_time / 2.0).sqrt())
    }

    pub fn with_initial(mut self, x0: f64) -> Self {
        self.initial_value = Some(x0);
        self
    }

    /// Diffusion constant c = 2 SD² / τ.
    pub fn diffusion(&self) -> f64 {
        2.0 * self.stationary_sd * self.stationary_sd / self.relaxation_time
    }
}

/// Exact OU update over a step `dt` given a standard normal draw.
pub fn ou_update(x: f64, dt: f64, params: &OUParams, gauss: f64) -> f64 {
    let r = -dt / params.relaxation_time;
    let decay = r.exp();
    // 1 - e^(-2dt/τ) without cancellation for small steps
    let spread = params.stationary_sd * (-(2.0 * r).exp_m1()).sqrt();
    x * decay + spread * gauss
}

/// A sampled noise record on a uniform grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseTrajectory {
    pub dt: f64,
    pub samples: Vec<f64>,
    pub seed: u64,
    pub stream_id: u64,
}

impl NoiseTrajectory {
    /// Sample held over `[k dt, (k+1) dt)`; clamps past the end.
    pub fn value_at(&self, t: f64) -> f64 {
        let k = (t / self.dt).floor().max(0.0) as usize;
        self.samples[k.min(self.samples.len() - 1)]
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Deterministic generator for one `(seed, stream_id)` pair.
pub fn stream_rng(seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

pub fn sample_trajectory(
    params: &OUParams,
    dt: f64,
    n: usize,
    seed: u64,
    stream_id: u64,
) -> Result<NoiseTrajectory> {
    if n == 0 {
        return Err(Error::InvalidParameter("trajectory length must be at least 1".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::OutOfRange { name: "dt", value: dt, range: "(0, inf)" });
    }
    let mut rng = stream_rng(seed, stream_id);
    let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
    let mut x = match params.initial_value {
        Some(x0) => x0,
        None => params.stationary_sd * draw(),
    };
    let mut samples = Vec::with_capacity(n);
    samples.push(x);
    for _ in 1..n {
        x = ou_update(x, dt, params, draw());
        samples.push(x);
    }
    Ok(NoiseTrajectory { dt, samples, seed, stream_id })
}

/// Two-sided Lorentzian spectral density with `(1/2π)∫S dω = SD²`.
pub fn spectral_density(params: &OUParams, omega: f64) -> f64 {
    let tau = params.relaxation_time;
    2.0 * params.stationary_sd.powi(2) * tau / (1.0 + (omega * tau).powi(2))
}

/// One row of the single-qubit noise table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisePreset {
    pub marker: String,
    /// rad/s
    pub sd_mu: f64,
    /// seconds
    pub tau_mu: f64,
    pub f: f64,
    /// seconds
    pub tau_f: f64,
    pub runs: usize,
}

impl NoisePreset {
    pub fn is_noise_free(&self) -> bool {
        self.sd_mu == 0.0 && self.f == 0.0
    }

    pub fn mu_params(&self) -> OUParams {
        OUParams { relaxation_time: self.tau_mu, stationary_sd: self.sd_mu, initial_value: None }
    }

    /// δΩ process for dressing strength `omega`: SD = √2 f Ω.
    pub fn delta_omega_params(&self, omega: f64) -> OUParams {
        OUParams {
            relaxation_time: self.tau_f,
            stationary_sd: std::f64::consts::SQRT_2 * self.f * omega,
            initial_value: None,
        }
    }

    /// Relative Ωg process; multiply by Ωg to get SD = f Ωg.
    pub fn relative_rf_params(&self) -> OUParams {
        OUParams { relaxation_time: self.tau_f, stationary_sd: self.f, initial_value: None }
    }
}

pub const PRESET_MARKERS: [&str; 9] = [
    "black",
    "red",
    "yellow",
    "green",
    "blue",
    "red-dashed",
    "yellow-dashed",
    "green-dashed",
    "blue-dashed",
];

pub fn preset(marker: &str) -> Result<NoisePreset> {
    let (base, dashed) = match marker.strip_suffix("-dashed") {
        Some(b) => (b, true),
        None => (marker, false),
    };
    let (tau_mu_ms, tau_f_ms) = match base {
        "red" => (0.16, 32.0),
        "yellow" => (0.016, 32.0),
        "green" => (0.16, 3.2),
        "blue" => (0.016, 3.2),
        "black" if !dashed => {
            // τ values are placeholders; all magnitudes are zero
            return Ok(NoisePreset {
                marker: "black".into(),
                sd_mu: 0.0,
                tau_mu: ms(0.16),
                f: 0.0,
                tau_f: ms(32.0),
                runs: 1,
            });
        }
        _ => return Err(Error::UnknownMarker(marker.to_string())),
    };
    let (sd_hz, f) = if dashed { (500.0, 0.05) } else { (100.0, 0.01) };
    Ok(NoisePreset {
        marker: marker.to_string(),
        sd_mu: hz(sd_hz),
        tau_mu: ms(tau_mu_ms),
        f,
        tau_f: ms(tau_f_ms),
        runs: 200,
    })
}
