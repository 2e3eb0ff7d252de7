//! Schrödinger and Lindblad time evolution.

mod ensemble;
mod generator;

pub use ensemble::{
    run_ensemble, tree_sum, EnsembleConfig, EnsembleResult, NoiseSample, NoisySchedule, TrajectorySeed,
};
pub use generator::{DenseHamiltonian, Generator, SparseMatrix, TermBuilder, TermHamiltonian};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops::{tensor_product, ComplexOperator, MixedState, PureState, ZERO};

const MINUS_I: C64 = C64::new(0.0, -1.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Rk4,
    MidpointExponential,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    /// Largest allowed step, seconds.
    pub dt: f64,
    pub method: Method,
    pub norm_renormalize: bool,
    /// Record every this many steps; 0 keeps only the endpoints.
    pub record_stride: usize,
}

impl IntegratorConfig {
    /// Largest allowed `dt·ω_max`.
    pub const MAX_PHASE_PER_STEP: f64 = 0.1;

    pub fn rk4(dt: f64) -> Self {
        Self { dt, method: Method::Rk4, norm_renormalize: false, record_stride: 0 }
    }

    /// RK4 with the largest step the generator allows.
    pub fn resolving(omega_max: f64) -> Self {
        Self::rk4(Self::MAX_PHASE_PER_STEP / omega_max.max(1e-300))
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    pub fn validate(&self, omega_max: f64) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::OutOfRange { name: "dt", value: self.dt, range: "(0, inf)" });
        }
        let product = self.dt * omega_max;
        if product > Self::MAX_PHASE_PER_STEP * (1.0 + 1e-12) {
            return Err(Error::StepTooCoarse { dt: self.dt, product, limit: Self::MAX_PHASE_PER_STEP });
        }
        Ok(())
    }

    pub fn steps_for(&self, span: f64) -> usize {
        if span <= 0.0 {
            0
        } else {
            ((span / self.dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize
        }
    }
}

#[derive(Clone, Debug)]
pub struct PureTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<PureState>,
    /// Largest single-step change of the norm.
    pub max_step_norm_drift: f64,
}

impl PureTrajectory {
    pub fn final_state(&self) -> &PureState {
        self.states.last().expect("at least the initial state is recorded")
    }
}

/// Workspace for one pure-state RK4 step.
pub(crate) struct PureStepper {
    k: [DVector<C64>; 4],
    tmp: DVector<C64>,
}

impl PureStepper {
    pub(crate) fn new(dim: usize) -> Self {
        let z = DVector::zeros(dim);
        Self { k: [z.clone(), z.clone(), z.clone(), z.clone()], tmp: z }
    }

    fn deriv<G: Generator + ?Sized>(gen: &G, t: f64, x: &DVector<C64>, out: &mut DVector<C64>) {
        gen.apply(t, x, out);
        *out *= MINUS_I;
    }

    pub(crate) fn step<G: Generator + ?Sized>(&mut self, gen: &G, method: Method, t: f64, dt: f64, psi: &mut DVector<C64>) {
        match method {
            Method::Rk4 => {
                let h = C64::new(dt, 0.0);
                let half = C64::new(0.5 * dt, 0.0);
                let [k1, k2, k3, k4] = &mut self.k;
                Self::deriv(gen, t, psi, k1);
                self.tmp.copy_from(psi);
                self.tmp.axpy(half, k1, C64::new(1.0, 0.0));
                Self::deriv(gen, t + 0.5 * dt, &self.tmp, k2);
                self.tmp.copy_from(psi);
                self.tmp.axpy(half, k2, C64::new(1.0, 0.0));
                Self::deriv(gen, t + 0.5 * dt, &self.tmp, k3);
                self.tmp.copy_from(psi);
                self.tmp.axpy(h, k3, C64::new(1.0, 0.0));
                Self::deriv(gen, t + dt, &self.tmp, k4);
                let sixth = C64::new(dt / 6.0, 0.0);
                let third = C64::new(dt / 3.0, 0.0);
                psi.axpy(sixth, k1, C64::new(1.0, 0.0));
                psi.axpy(third, k2, C64::new(1.0, 0.0));
                psi.axpy(third, k3, C64::new(1.0, 0.0));
                psi.axpy(sixth, k4, C64::new(1.0, 0.0));
            }
            Method::MidpointExponential => {
                let u = gen.operator_at(t + 0.5 * dt).hermitian_propagator(dt);
                self.tmp.gemv(C64::new(1.0, 0.0), u.matrix(), psi, ZERO);
                psi.copy_from(&self.tmp);
            }
        }
    }
}

/// Advances `psi` from `t0` to `t1` in equal steps no longer than `cfg.dt`.
/// Returns the largest per-step norm change.
pub(crate) fn advance_pure<G: Generator + ?Sized>(
    gen: &G,
    psi: &mut DVector<C64>,
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
    stepper: &mut PureStepper,
) -> f64 {
    let n = cfg.steps_for(t1 - t0);
    let dt = if n > 0 { (t1 - t0) / n as f64 } else { 0.0 };
    let mut drift: f64 = 0.0;
    let mut norm = psi.norm();
    for k in 0..n {
        stepper.step(gen, cfg.method, t0 + k as f64 * dt, dt, psi);
        let new_norm = psi.norm();
        drift = drift.max((new_norm - norm).abs());
        if cfg.norm_renormalize {
            *psi /= C64::new(new_norm, 0.0);
            norm = 1.0;
        } else {
            norm = new_norm;
        }
    }
    drift
}

/// Integrates `i dψ/dt = H(t) ψ` over `t_span`.
pub fn evolve_pure<G: Generator + ?Sized>(
    gen: &G,
    psi0: &PureState,
    t_span: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<PureTrajectory> {
    if psi0.dim() != gen.dim() {
        return Err(Error::DimensionMismatch { expected: gen.dim(), found: psi0.dim() });
    }
    cfg.validate(gen.max_frequency())?;
    let (t0, t1) = t_span;
    let n = cfg.steps_for(t1 - t0);
    let dt = if n > 0 { (t1 - t0) / n as f64 } else { 0.0 };
    let mut stepper = PureStepper::new(gen.dim());
    let mut psi = psi0.amplitudes().clone();
    let mut times = vec![t0];
    let mut states = vec![psi0.clone()];
    let mut max_drift: f64 = 0.0;
    let mut norm = psi.norm();
    for k in 0..n {
        let t = t0 + k as f64 * dt;
        stepper.step(gen, cfg.method, t, dt, &mut psi);
        let new_norm = psi.norm();
        max_drift = max_drift.max((new_norm - norm).abs());
        norm = new_norm;
        if cfg.norm_renormalize {
            psi /= C64::new(new_norm, 0.0);
            norm = 1.0;
        }
        let last = k + 1 == n;
        if last || (cfg.record_stride > 0 && (k + 1) % cfg.record_stride == 0) {
            times.push(if last { t1 } else { t + dt });
            states.push(PureState::from_raw(psi.clone()));
        }
    }
    Ok(PureTrajectory { times, states, max_step_norm_drift: max_drift })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeatingMode {
    /// Collapse operator `b†` at the quoted rate.
    HeatingOnly,
    /// `b†` and `b` at equal rates.
    InfiniteTemperature,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatingModel {
    /// phonons/s
    pub rate: f64,
    pub mode: HeatingMode,
}

impl HeatingModel {
    pub fn new(rate: f64, mode: HeatingMode) -> Result<Self> {
        if !(rate >= 0.0) || !rate.is_finite() {
            return Err(Error::OutOfRange { name: "heating rate", value: rate, range: "[0, inf)" });
        }
        Ok(Self { rate, mode })
    }

    pub fn heating_only(rate: f64) -> Result<Self> {
        Self::new(rate, HeatingMode::HeatingOnly)
    }
}

/// Phonon ladder operators embedded in `system ⊗ phonon`.
#[derive(Clone, Debug)]
pub struct PhononOps {
    pub system_dim: usize,
    pub fock_dim: usize,
    pub b: SparseMatrix,
    pub b_dag: SparseMatrix,
}

impl PhononOps {
    pub fn new(system_dim: usize, fock_dim: usize) -> Self {
        let b = tensor_product(&ComplexOperator::identity(system_dim), &ComplexOperator::destroy(fock_dim));
        Self {
            system_dim,
            fock_dim,
            b_dag: SparseMatrix::from_operator(&b.adjoint()),
            b: SparseMatrix::from_operator(&b),
        }
    }

    pub fn dim(&self) -> usize {
        self.system_dim * self.fock_dim
    }

    /// Population of the highest retained Fock level.
    pub fn top_level_population(&self, rho: &DMatrix<C64>) -> f64 {
        let f = self.fock_dim;
        (0..self.system_dim).map(|a| rho[(a * f + f - 1, a * f + f - 1)].re).sum()
    }

    pub fn mean_phonon_number(&self, rho: &DMatrix<C64>) -> f64 {
        let f = self.fock_dim;
        (0..self.dim()).map(|i| (i % f) as f64 * rho[(i, i)].re).sum()
    }
}

#[derive(Clone, Debug)]
pub struct OpenTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<MixedState>,
    /// Largest `|tr ρ - 1|` seen at recorded times.
    pub max_trace_error: f64,
    /// Smallest eigenvalue seen at recorded times.
    pub min_eigenvalue: f64,
    /// Largest top-Fock-level population seen at recorded times.
    pub max_top_population: f64,
}

impl OpenTrajectory {
    pub const SATURATION_LIMIT: f64 = 1e-4;

    pub fn saturated(&self) -> bool {
        self.max_top_population > Self::SATURATION_LIMIT
    }

    pub fn final_state(&self) -> &MixedState {
        self.states.last().expect("at least the initial state is recorded")
    }
}

struct Collapse {
    rate: f64,
    l: SparseMatrix,
    l_dag_l: SparseMatrix,
}

struct OpenStepper {
    k: [DMatrix<C64>; 4],
    tmp: DMatrix<C64>,
    x: DMatrix<C64>,
    y: DMatrix<C64>,
}

impl OpenStepper {
    fn new(n: usize) -> Self {
        let z = DMatrix::zeros(n, n);
        Self { k: [z.clone(), z.clone(), z.clone(), z.clone()], tmp: z.clone(), x: z.clone(), y: z }
    }
}

/// `out = -i[H, ρ] + Σ γ (L ρ L† - ½{L†L, ρ})` using the hermiticity of ρ.
fn lindblad_rhs<G: Generator + ?Sized>(
    gen: &G,
    collapses: &[Collapse],
    t: f64,
    rho: &DMatrix<C64>,
    out: &mut DMatrix<C64>,
    x: &mut DMatrix<C64>,
    y: &mut DMatrix<C64>,
) {
    gen.apply_to_columns(t, rho, x);
    // -i(Hρ - ρH) with ρH = (Hρ)†
    let n = rho.nrows();
    for j in 0..n {
        for i in 0..n {
            out[(i, j)] = MINUS_I * (x[(i, j)] - x[(j, i)].conj());
        }
    }
    for c in collapses {
        if c.rate == 0.0 {
            continue;
        }
        let g = c.rate;
        // L ρ L† = L (L ρ)†
        c.l.mul_mat(rho, x);
        let xa = x.adjoint();
        c.l.mul_mat(&xa, y);
        for j in 0..n {
            for i in 0..n {
                out[(i, j)] += y[(i, j)] * g;
            }
        }
        c.l_dag_l.mul_mat(rho, x);
        for j in 0..n {
            for i in 0..n {
                out[(i, j)] -= (x[(i, j)] + x[(j, i)].conj()) * (0.5 * g);
            }
        }
    }
}

/// Trace and truncation diagnostics from an observed open run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OpenDiagnostics {
    pub max_trace_error: f64,
    pub max_top_population: f64,
    pub steps: usize,
}

/// Integrates the Lindblad master equation with RK4, handing `ρ` to
/// `observe` at `t0`, every `record_stride` steps and at `t1`.
pub fn evolve_open_observed<G: Generator + ?Sized>(
    gen: &G,
    rho0: &MixedState,
    heating: &HeatingModel,
    phonons: &PhononOps,
    t_span: (f64, f64),
    cfg: &IntegratorConfig,
    observe: &mut dyn FnMut(f64, &DMatrix<C64>),
) -> Result<OpenDiagnostics> {
    if cfg.method != Method::Rk4 {
        return Err(Error::Unsupported("open-system evolution integrates with rk4 only"));
    }
    if rho0.dim() != gen.dim() {
        return Err(Error::DimensionMismatch { expected: gen.dim(), found: rho0.dim() });
    }
    if phonons.dim() != gen.dim() {
        return Err(Error::DimensionMismatch { expected: gen.dim(), found: phonons.dim() });
    }
    cfg.validate(gen.max_frequency())?;

    let make = |l: &SparseMatrix, rate: f64| {
        let d = l.to_dense();
        Collapse { rate, l: l.clone(), l_dag_l: SparseMatrix::from_dense(&(d.adjoint() * &d)) }
    };
    let mut collapses = vec![make(&phonons.b_dag, heating.rate)];
    if heating.mode == HeatingMode::InfiniteTemperature {
        collapses.push(make(&phonons.b, heating.rate));
    }

    let (t0, t1) = t_span;
    let nsteps = cfg.steps_for(t1 - t0);
    let dt = if nsteps > 0 { (t1 - t0) / nsteps as f64 } else { 0.0 };
    let n = gen.dim();
    let mut st = OpenStepper::new(n);
    let mut rho = rho0.matrix().clone();

    let mut diag = OpenDiagnostics {
        max_trace_error: (rho0.trace() - 1.0).abs(),
        max_top_population: phonons.top_level_population(&rho),
        steps: nsteps,
    };
    observe(t0, &rho);

    for step in 0..nsteps {
        let t = t0 + step as f64 * dt;
        let [k1, k2, k3, k4] = &mut st.k;
        lindblad_rhs(gen, &collapses, t, &rho, k1, &mut st.x, &mut st.y);
        st.tmp.copy_from(&rho);
        st.tmp.zip_apply(k1, |a, b| *a += b * (0.5 * dt));
        lindblad_rhs(gen, &collapses, t + 0.5 * dt, &st.tmp, k2, &mut st.x, &mut st.y);
        st.tmp.copy_from(&rho);
        st.tmp.zip_apply(k2, |a, b| *a += b * (0.5 * dt));
        lindblad_rhs(gen, &collapses, t + 0.5 * dt, &st.tmp, k3, &mut st.x, &mut st.y);
        st.tmp.copy_from(&rho);
        st.tmp.zip_apply(k3, |a, b| *a += b * dt);
        lindblad_rhs(gen, &collapses, t + dt, &st.tmp, k4, &mut st.x, &mut st.y);
        let (a, b) = (dt / 6.0, dt / 3.0);
        for idx in 0..n * n {
            rho[idx] += k1[idx] * a + k2[idx] * b + k3[idx] * b + k4[idx] * a;
        }
        let last = step + 1 == nsteps;
        if last || (cfg.record_stride > 0 && (step + 1) % cfg.record_stride == 0) {
            let tr: f64 = (0..n).map(|i| rho[(i, i)].re).sum();
            diag.max_trace_error = diag.max_trace_error.max((tr - 1.0).abs());
            diag.max_top_population = diag.max_top_population.max(phonons.top_level_population(&rho));
            observe(if last { t1 } else { t + dt }, &rho);
        }
    }
    Ok(diag)
}

/// Integrates the Lindblad master equation with RK4, keeping every recorded state.
pub fn evolve_open<G: Generator + ?Sized>(
    gen: &G,
    rho0: &MixedState,
    heating: &HeatingModel,
    phonons: &PhononOps,
    t_span: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<OpenTrajectory> {
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut min_eigenvalue = f64::INFINITY;
    let diag = evolve_open_observed(gen, rho0, heating, phonons, t_span, cfg, &mut |t, rho| {
        let m = MixedState::from_raw(rho.clone());
        min_eigenvalue = min_eigenvalue.min(m.min_eigenvalue());
        times.push(t);
        states.push(m);
    })?;
    Ok(OpenTrajectory {
        times,
        states,
        max_trace_error: diag.max_trace_error,
        min_eigenvalue,
        max_top_population: diag.max_top_population,
    })
}
