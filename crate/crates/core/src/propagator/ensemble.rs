//! Stochastic-trajectory ensembles with reproducible noise streams.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{advance_pure, Generator, IntegratorConfig, PureStepper};
use crate::error::{Error, Result};
use crate::noise::{sample_trajectory, NoisePreset, OUParams};
use crate::ops::{merit_from_squared, overlap_probability, MixedState, PureState, MERIT_FLOOR};

/// Instantaneous noise values held over one noise step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseSample {
    /// Magnetic shift, rad/s.
    pub mu: f64,
    /// Dressing imbalance δΩ, rad/s.
    pub d_omega: f64,
    /// Relative RF amplitude error; multiplies the instantaneous Ωg.
    pub rf_fraction: f64,
}

/// A gate protocol that can be replayed under sampled noise.
pub trait NoisySchedule: Sync {
    fn dim(&self) -> usize;
    fn duration(&self) -> f64;
    fn initial_state(&self) -> PureState;
    fn target_state(&self) -> PureState;
    /// Ω used to scale the δΩ process.
    fn dressing_strength(&self) -> f64;
    /// Noise-free frequency bound used to validate the step.
    fn max_frequency(&self) -> f64;
    /// Generator with the noise held at `noise`.
    fn generator(&self, noise: NoiseSample) -> Box<dyn Generator + '_>;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub integrator: IntegratorConfig,
    /// Interval over which noise is held constant, seconds.
    pub noise_step: f64,
    /// Record the mean state every this many noise steps; 0 records the endpoints only.
    pub record_every: usize,
    pub merit_floor: f64,
}

impl EnsembleConfig {
    pub const DEFAULT_NOISE_STEP: f64 = 1e-6;

    /// Integrator step resolving `schedule`, noise held for 1 µs.
    pub fn for_schedule<S: NoisySchedule + ?Sized>(schedule: &S) -> Self {
        let mut integrator = IntegratorConfig::resolving(schedule.max_frequency());
        integrator.dt = integrator.dt.min(Self::DEFAULT_NOISE_STEP);
        Self { integrator, noise_step: Self::DEFAULT_NOISE_STEP, record_every: 0, merit_floor: MERIT_FLOOR }
    }
}

/// Stream identifiers used for one trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectorySeed {
    pub seed: u64,
    pub mu_stream: u64,
    pub omega_stream: u64,
    pub rf_stream: u64,
}

impl TrajectorySeed {
    pub fn for_index(seed: u64, index: usize) -> Self {
        let base = 3 * index as u64;
        Self { seed, mu_stream: base, omega_stream: base + 1, rf_stream: base + 2 }
    }
}

#[derive(Clone, Debug)]
pub struct EnsembleResult {
    pub times: Vec<f64>,
    pub mean_density: Vec<MixedState>,
    /// F against the target at each recorded time.
    pub fidelity_series: Vec<f64>,
    pub merit_series: Vec<f64>,
    /// Per-trajectory F² at the final time.
    pub trajectory_f2: Vec<f64>,
    pub seeds: Vec<TrajectorySeed>,
    pub trajectory_count: usize,
    pub max_step_norm_drift: f64,
}

impl EnsembleResult {
    pub fn final_fidelity(&self) -> f64 {
        *self.fidelity_series.last().expect("non-empty")
    }

    pub fn final_f2(&self) -> f64 {
        let f = self.final_fidelity();
        f * f
    }

    pub fn final_merit(&self) -> f64 {
        *self.merit_series.last().expect("non-empty")
    }

    /// Standard error of the mean final F² over trajectories.
    pub fn sem(&self) -> f64 {
        let n = self.trajectory_f2.len();
        if n < 2 {
            return 0.0;
        }
        let mean = self.trajectory_f2.iter().sum::<f64>() / n as f64;
        let var = self.trajectory_f2.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    }

    pub fn final_density(&self) -> &MixedState {
        self.mean_density.last().expect("non-empty")
    }
}

/// Pairwise sum with a shape fixed by `items.len()` alone.
pub fn tree_sum<T: Clone>(items: &[T], add: &impl Fn(&T, &T) -> T) -> T {
    match items.len() {
        0 => panic!("tree_sum of an empty slice"),
        1 => items[0].clone(),
        n => {
            let mid = n / 2;
            add(&tree_sum(&items[..mid], add), &tree_sum(&items[mid..], add))
        }
    }
}

struct TrajectoryOutput {
    records: Vec<DMatrix<C64>>,
    final_f2: f64,
    drift: f64,
}

fn segment_grid(duration: f64, noise_step: f64, record_every: usize) -> (Vec<f64>, Vec<usize>) {
    let n = ((duration / noise_step) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let edges: Vec<f64> = (0..=n).map(|k| if k == n { duration } else { k as f64 * noise_step }).collect();
    let mut record_at: Vec<usize> = vec![0];
    if record_every > 0 {
        record_at.extend((1..n).filter(|k| k % record_every == 0));
    }
    record_at.push(n);
    (edges, record_at)
}

fn noise_stream(params: OUParams, dt: f64, n: usize, seed: u64, stream: u64) -> Result<Vec<f64>> {
    if params.stationary_sd == 0.0 {
        return Ok(vec![0.0; n]);
    }
    Ok(sample_trajectory(&params, dt, n, seed, stream)?.samples)
}

fn run_trajectory<S: NoisySchedule + ?Sized>(
    schedule: &S,
    preset: &NoisePreset,
    seed: TrajectorySeed,
    cfg: &EnsembleConfig,
    edges: &[f64],
    record_at: &[usize],
) -> Result<TrajectoryOutput> {
    let nseg = edges.len() - 1;
    let mu = noise_stream(preset.mu_params(), cfg.noise_step, nseg, seed.seed, seed.mu_stream)?;
    let dom = noise_stream(preset.delta_omega_params(schedule.dressing_strength()), cfg.noise_step, nseg, seed.seed, seed.omega_stream)?;
    let drf = noise_stream(preset.relative_rf_params(), cfg.noise_step, nseg, seed.seed, seed.rf_stream)?;

    let target = schedule.target_state();
    let mut psi = schedule.initial_state().amplitudes().clone();
    let mut stepper = PureStepper::new(schedule.dim());
    let mut records = Vec::with_capacity(record_at.len());
    let mut next_record = 0;
    let mut drift: f64 = 0.0;
    let project = |v: &nalgebra::DVector<C64>| v * v.adjoint();
    if record_at[0] == 0 {
        records.push(project(&psi));
        next_record = 1;
    }
    for k in 0..nseg {
        let noise = NoiseSample { mu: mu[k], d_omega: dom[k], rf_fraction: drf[k] };
        let gen = schedule.generator(noise);
        drift = drift.max(advance_pure(gen.as_ref(), &mut psi, edges[k], edges[k + 1], &cfg.integrator, &mut stepper));
        if next_record < record_at.len() && record_at[next_record] == k + 1 {
            records.push(project(&psi));
            next_record += 1;
        }
    }
    let amp = target.amplitudes().dotc(&psi);
    Ok(TrajectoryOutput { records, final_f2: amp.norm_sqr(), drift })
}

/// Averages `n_traj` noisy trajectories of `schedule`.
///
/// Trajectory `j` draws its three noise streams from `(base_seed, 3j..3j+2)`,
/// so results do not depend on scheduling or thread count.
pub fn run_ensemble<S: NoisySchedule + ?Sized>(
    schedule: &S,
    preset: &NoisePreset,
    n_traj: usize,
    base_seed: u64,
    cfg: &EnsembleConfig,
) -> Result<EnsembleResult> {
    if n_traj == 0 {
        return Err(Error::InvalidParameter("n_traj must be at least 1".into()));
    }
    if !(cfg.noise_step > 0.0) {
        return Err(Error::OutOfRange { name: "noise_step", value: cfg.noise_step, range: "(0, inf)" });
    }
    cfg.integrator.validate(schedule.max_frequency())?;
    let (edges, record_at) = segment_grid(schedule.duration(), cfg.noise_step, cfg.record_every);
    let seeds: Vec<TrajectorySeed> = (0..n_traj).map(|j| TrajectorySeed::for_index(base_seed, j)).collect();

    let outputs: Vec<TrajectoryOutput> = seeds
        .par_iter()
        .map(|s| run_trajectory(schedule, preset, *s, cfg, &edges, &record_at))
        .collect::<Result<Vec<_>>>()?;

    let scale = C64::new(1.0 / n_traj as f64, 0.0);
    let target = schedule.target_state();
    let per_record: Vec<Vec<DMatrix<C64>>> = outputs.iter().map(|o| o.records.clone()).collect();
    let summed = tree_sum(&per_record, &|a: &Vec<DMatrix<C64>>, b: &Vec<DMatrix<C64>>| {
        a.iter().zip(b).map(|(x, y)| x + y).collect()
    });

    let mut mean_density = Vec::with_capacity(summed.len());
    let mut fidelity_series = Vec::with_capacity(summed.len());
    let mut merit_series = Vec::with_capacity(summed.len());
    for m in summed {
        let rho = MixedState::from_raw(m * scale);
        let f2 = overlap_probability(&target, &rho)?;
        fidelity_series.push(f2.sqrt());
        merit_series.push(merit_from_squared(f2, cfg.merit_floor));
        mean_density.push(rho);
    }
    Ok(EnsembleResult {
        times: record_at.iter().map(|&k| edges[k]).collect(),
        mean_density,
        fidelity_series,
        merit_series,
        trajectory_f2: outputs.iter().map(|o| o.final_f2).collect(),
        seeds,
        trajectory_count: n_traj,
        max_step_norm_drift: outputs.iter().map(|o| o.drift).fold(0.0, f64::max),
    })
}
