//! Two ions sharing one motional mode: Mølmer-Sørensen planning, the full
//! spin-phonon Hamiltonian, Schrieffer-Wolff analysis and gate simulation.
//!
//! Hilbert space ordering is `ion1 ⊗ ion2 ⊗ phonon`; each ion uses the
//! bare basis `(|-1>, |0>, |0'>, |1>)`.

use std::f64::consts::{FRAC_PI_4, PI};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops::{
    c, overlap_probability, partial_trace_phonon, tensor_all, ComplexOperator, MixedState, PureState, ONE, ZERO,
};
use crate::propagator::{
    evolve_open_observed, evolve_pure, Generator, HeatingMode, HeatingModel, IntegratorConfig, PhononOps,
    TermBuilder, TermHamiltonian,
};
use crate::single::{states, MINUS, PLUS, ZERO_LEVEL, ZERO_PRIME};
use crate::units::{khz, BOHR_MAGNETON, HBAR, YB171_MASS};

/// Dimension of one ion.
pub const ION_DIM: usize = 4;
/// Dimension of the two-ion internal space.
pub const PAIR_DIM: usize = ION_DIM * ION_DIM;

/// Trap and motional-mode parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrapConfig {
    /// kg
    pub ion_mass: f64,
    /// T/m
    pub magnetic_gradient: f64,
    /// Motional mode frequency ν, rad/s.
    pub nu: f64,
    pub zeta: f64,
    pub fock_dim: usize,
    pub initial_phonons: usize,
    /// phonons/s
    pub heating_rate: f64,
}

impl TrapConfig {
    /// Centre-of-mass mode of a two-ion ¹⁷¹Yb⁺ crystal, ground state, no heating.
    pub fn yb171_pair(magnetic_gradient: f64, nu: f64) -> Self {
        Self {
            ion_mass: YB171_MASS,
            magnetic_gradient,
            nu,
            zeta: std::f64::consts::FRAC_1_SQRT_2,
            fock_dim: 8,
            initial_phonons: 0,
            heating_rate: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0) {
            return Err(Error::OutOfRange { name: "nu", value: self.nu, range: "(0, inf)" });
        }
        if !(self.ion_mass > 0.0) {
            return Err(Error::OutOfRange { name: "ion_mass", value: self.ion_mass, range: "(0, inf)" });
        }
        if self.fock_dim < self.initial_phonons + 4 {
            return Err(Error::InvalidParameter(format!(
                "fock_dim {} leaves less than 4 levels above n = {}",
                self.fock_dim, self.initial_phonons
            )));
        }
        if !(self.heating_rate >= 0.0) {
            return Err(Error::OutOfRange { name: "heating_rate", value: self.heating_rate, range: "[0, inf)" });
        }
        Ok(())
    }
}

/// η = κ/ν with κ = (μ_B/ħ)·∂zB·ζ·√(ħ/2mν).
pub fn effective_eta(trap: &TrapConfig) -> f64 {
    let dz_beta = BOHR_MAGNETON / HBAR * trap.magnetic_gradient;
    let z0 = (HBAR / (2.0 * trap.ion_mass * trap.nu)).sqrt();
    dz_beta * trap.zeta * z0 / trap.nu
}

/// Microwave dressing and auxiliary |0>↔|0'> coupling of each ion.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Dressing {
    pub omega: f64,
    pub delta_0: f64,
    pub omega_z: f64,
    pub delta_z: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MSPlan {
    pub r: u32,
    pub eta: f64,
    pub omega_g: f64,
    /// Sideband detuning, rad/s.
    pub q: f64,
    /// Gate time, seconds.
    pub t: f64,
    pub omega: f64,
    pub delta_0: f64,
    pub omega_z: f64,
    pub delta_z: f64,
}

impl MSPlan {
    pub fn dressing(&self) -> Dressing {
        Dressing { omega: self.omega, delta_0: self.delta_0, omega_z: self.omega_z, delta_z: self.delta_z }
    }
}

/// Gate time and sideband detuning closing the phase-space loop `R` times.
pub fn ms_plan(r: u32, eta: f64, omega_g: f64, dressing: Dressing) -> Result<MSPlan> {
    if r == 0 {
        return Err(Error::OutOfRange { name: "R", value: 0.0, range: "[1, inf)" });
    }
    if eta == 0.0 {
        return Err(Error::Degenerate("η = 0: no spin-motion coupling, check the magnetic gradient"));
    }
    if !(eta > 0.0) {
        return Err(Error::OutOfRange { name: "eta", value: eta, range: "(0, inf)" });
    }
    if !(omega_g > 0.0) {
        return Err(Error::OutOfRange { name: "omega_g", value: omega_g, range: "(0, inf)" });
    }
    let rf = r as f64;
    let q = 2.0 * (2.0 * rf).sqrt() * eta * omega_g;
    Ok(MSPlan {
        r,
        eta,
        omega_g,
        q,
        t: 2.0 * PI * rf / q,
        omega: dressing.omega,
        delta_0: dressing.delta_0,
        omega_z: dressing.omega_z,
        delta_z: dressing.delta_z,
    })
}

/// Reference entangling-gate parameters and the matching trap.
pub fn reference_gate() -> (MSPlan, TrapConfig) {
    let dressing = Dressing { omega: khz(20.0), delta_0: khz(2.0), omega_z: khz(10.0), delta_z: khz(1000.0) };
    let plan = ms_plan(1, 0.0071, khz(100.0), dressing).expect("valid constants");
    (plan, TrapConfig::yb171_pair(46.0, khz(500.0)))
}

/// Reference frame for the motional mode.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Frame {
    /// `ν b†b` kept explicitly.
    Lab,
    /// Interaction picture with respect to `ν b†b`; `b → b e^{-iνt}`.
    #[default]
    PhononRotating,
}

/// Static magnetic offset μ per ion.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum MagneticNoise {
    #[default]
    Off,
    Common { mu: f64 },
    Independent { mu1: f64, mu2: f64 },
}

/// `σz = |1><1| - |-1><-1|` on one ion.
pub fn sigma_z_ion() -> ComplexOperator {
    ComplexOperator::diagonal(&[-1.0, 0.0, 0.0, 1.0])
}

fn embed_ion(a: &ComplexOperator, ion: usize, fock_dim: usize) -> ComplexOperator {
    let id = ComplexOperator::identity(ION_DIM);
    let idf = ComplexOperator::identity(fock_dim);
    match ion {
        0 => tensor_all(&[a, &id, &idf]),
        _ => tensor_all(&[&id, a, &idf]),
    }
}

fn embed_phonon(b: &ComplexOperator) -> ComplexOperator {
    tensor_all(&[&ComplexOperator::identity(PAIR_DIM), b])
}

/// `σz1 + σz2` on the two-ion internal space.
pub fn total_sigma_z() -> ComplexOperator {
    let sz = sigma_z_ion();
    let id = ComplexOperator::identity(ION_DIM);
    tensor_all(&[&sz, &id]).add(&tensor_all(&[&id, &sz])).expect("same dims")
}

/// Per-ion pieces of the drive.
struct IonTerms {
    static_part: ComplexOperator,
    /// Real-amplitude RF operator, multiplied by `Ωg cos((ν+q)t)`.
    rf: ComplexOperator,
    /// `|0><0'|`, multiplied by `(Ωz/2) e^{iδz t}` plus h.c.
    z_leg: ComplexOperator,
}

fn ion_terms(d: &Dressing, mu: f64) -> IonTerms {
    let kb = |i, j| ComplexOperator::ket_bra(ION_DIM, i, j);
    let dressing = kb(ZERO_LEVEL, MINUS).add(&kb(ZERO_LEVEL, PLUS)).expect("4x4");
    let mut static_part = ComplexOperator::plus_adjoint(&dressing.scale(c(0.5 * d.omega, 0.0)));
    static_part = static_part.add(&kb(ZERO_LEVEL, ZERO_LEVEL).scale(c(2.0 * d.delta_0, 0.0))).expect("4x4");
    static_part = static_part.add(&sigma_z_ion().scale(c(mu, 0.0))).expect("4x4");
    let rf = ComplexOperator::plus_adjoint(&kb(ZERO_PRIME, MINUS).add(&kb(PLUS, ZERO_PRIME)).expect("4x4"));
    IonTerms { static_part, rf, z_leg: kb(ZERO_LEVEL, ZERO_PRIME) }
}

/// Full two-ion spin-phonon Hamiltonian as a sum of rotating terms.
pub fn two_ion_hamiltonian(plan: &MSPlan, trap: &TrapConfig, frame: Frame, magnetic: MagneticNoise) -> TermHamiltonian {
    let f = trap.fock_dim;
    let dim = PAIR_DIM * f;
    let (mu1, mu2) = match magnetic {
        MagneticNoise::Off => (0.0, 0.0),
        MagneticNoise::Common { mu } => (mu, mu),
        MagneticNoise::Independent { mu1, mu2 } => (mu1, mu2),
    };
    let d = plan.dressing();
    let mut builder = TermBuilder::new(dim);
    let w_rf = trap.nu + plan.q;
    for (ion, mu) in [(0, mu1), (1, mu2)] {
        let terms = ion_terms(&d, mu);
        builder.add_static(&embed_ion(&terms.static_part, ion, f));
        builder.add_rotating(c(0.5 * plan.omega_g, 0.0), w_rf, &embed_ion(&terms.rf, ion, f));
        if d.omega_z != 0.0 {
            builder.add_rotating(c(0.5 * d.omega_z, 0.0), d.delta_z, &embed_ion(&terms.z_leg, ion, f));
        }
    }
    let kappa = plan.eta * trap.nu;
    let b = ComplexOperator::destroy(f);
    let charge_b_dag = tensor_all(&[&total_sigma_z(), &b.adjoint()]);
    match frame {
        Frame::Lab => {
            builder.add_static(&embed_phonon(&ComplexOperator::number(f)).scale(c(trap.nu, 0.0)));
            builder.add_rotating(c(kappa, 0.0), 0.0, &charge_b_dag);
        }
        Frame::PhononRotating => {
            builder.add_rotating(c(kappa, 0.0), trap.nu, &charge_b_dag);
        }
    }
    builder.build()
}

/// Lab-frame Hamiltonian at time `t`.
pub fn two_ion_hamiltonian_at(t: f64, plan: &MSPlan, trap: &TrapConfig) -> ComplexOperator {
    two_ion_hamiltonian(plan, trap, Frame::Lab, MagneticNoise::Off).operator_at(t)
}

/// `e^{S} op e^{-S}` with `S = η·charge ⊗ (b† - b)`; `charge` acts on the
/// internal space and must be Hermitian.
pub fn sw_transform(op: &ComplexOperator, eta: f64, charge: &ComplexOperator, fock_dim: usize) -> Result<ComplexOperator> {
    let dim = charge.dim() * fock_dim;
    if op.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: op.dim() });
    }
    if eta == 0.0 {
        return Ok(op.clone());
    }
    let b = ComplexOperator::destroy(fock_dim);
    let gen = b.adjoint().sub(&b).expect("same dims");
    let eig = nalgebra::SymmetricEigen::new(charge.matrix().clone());
    let n = charge.dim();
    let mut u = DMatrix::<C64>::zeros(dim, dim);
    for k in 0..n {
        let v = eig.eigenvectors.column(k);
        let p = ComplexOperator::from_matrix(&v * v.adjoint()).expect("square");
        let disp = gen.scale(c(eta * eig.eigenvalues[k], 0.0)).expm();
        u += tensor_all(&[&p, &disp]).matrix();
    }
    let u = ComplexOperator::from_matrix(u).expect("square");
    u.mul(op)?.mul(&u.adjoint())
}

/// Coefficient of the residual resonance terms, −2η²ν³/(2ν²−Ω²).
pub fn resonance_shift(eta: f64, nu: f64, omega: f64) -> Result<f64> {
    let den = 2.0 * nu * nu - omega * omega;
    if den.abs() <= 1e-12 * 2.0 * nu * nu {
        return Err(Error::Degenerate("2ν² = Ω²"));
    }
    Ok(-2.0 * eta * eta * nu.powi(3) / den)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    /// ηΩg/ν
    pub jc_ratio: f64,
    /// ην/Ωg
    pub resonance_ratio: f64,
    /// η²ν/δ0
    pub delta0_ratio: f64,
    /// Δ/(ηΩg)
    pub linear_regime_ratio: f64,
    pub threshold: f64,
    pub jc_pass: bool,
    pub resonance_pass: bool,
    pub delta0_pass: bool,
    pub linear_regime_pass: bool,
}

impl ConstraintReport {
    pub const DEFAULT_THRESHOLD: f64 = 0.05;

    pub fn all_pass(&self) -> bool {
        self.jc_pass && self.resonance_pass && self.delta0_pass && self.linear_regime_pass
    }
}

/// Ratios that must be small; each passes when `ratio <= threshold`.
pub fn constraint_report(plan: &MSPlan, trap: &TrapConfig, delta_zeeman: f64, threshold: f64) -> ConstraintReport {
    let ratio = |a: f64, b: f64| if b == 0.0 { f64::INFINITY } else { a / b };
    let (eta, nu, og) = (plan.eta, trap.nu, plan.omega_g);
    let jc_ratio = ratio(eta * og, nu);
    let resonance_ratio = ratio(eta * nu, og);
    let delta0_ratio = ratio(eta * eta * nu, plan.delta_0.abs());
    let linear_regime_ratio = ratio(delta_zeeman.abs(), eta * og);
    ConstraintReport {
        jc_ratio,
        resonance_ratio,
        delta0_ratio,
        linear_regime_ratio,
        threshold,
        jc_pass: jc_ratio <= threshold,
        resonance_pass: resonance_ratio <= threshold,
        delta0_pass: delta0_ratio <= threshold,
        linear_regime_pass: linear_regime_ratio <= threshold,
    }
}

/// Index of a logical two-qubit basis state (`0 = |D>`, `1 = |0'>`) in the
/// ordering `DD, D0', 0'D, 0'0'`.
pub fn logical_index(a: usize, b: usize) -> usize {
    2 * a + b
}

/// Per-ion σy on the logical pair `(|D>, |0'>)`.
pub fn logical_sigma_y() -> ComplexOperator {
    ComplexOperator::from_matrix(DMatrix::from_row_slice(2, 2, &[ZERO, c(0.0, -1.0), c(0.0, 1.0), ZERO])).expect("2x2")
}

/// `exp(−iπ/4 (1 + σy⊗σy))` on the logical two-qubit space.
pub fn target_unitary() -> ComplexOperator {
    let sy = logical_sigma_y();
    let yy = tensor_all(&[&sy, &sy]);
    // (σy⊗σy)² = 1
    let m = (ComplexOperator::identity(4).scale(c(FRAC_PI_4.cos(), 0.0)))
        .add(&yy.scale(c(0.0, -FRAC_PI_4.sin())))
        .expect("4x4");
    m.scale(C64::from_polar(1.0, -FRAC_PI_4))
}

/// Embeds logical amplitudes `(DD, D0', 0'D, 0'0')` into the two-ion space.
pub fn embed_logical(amplitudes: &[C64; 4]) -> Result<PureState> {
    let ion = [states::dark(), states::zero_prime()];
    let mut v = DVector::<C64>::zeros(PAIR_DIM);
    for a in 0..2 {
        for b in 0..2 {
            v += ion[a].tensor(&ion[b]).amplitudes() * amplitudes[logical_index(a, b)];
        }
    }
    PureState::normalized(v)
}

/// Named two-ion states.
pub fn dd() -> PureState {
    embed_logical(&[ONE, ZERO, ZERO, ZERO]).expect("non-zero")
}

pub fn zz() -> PureState {
    embed_logical(&[ZERO, ZERO, ZERO, ONE]).expect("non-zero")
}

/// `(|DD> + i|0'0'>)/√2`.
pub fn bell_target() -> PureState {
    embed_logical(&[ONE, ZERO, ZERO, c(0.0, 1.0)]).expect("non-zero")
}

/// `1 − (2Ωg²/(q+ν)²) sin²((q+ν)t)`.
pub fn fidelity_oscillation(omega_g: f64, q: f64, nu: f64, t: f64) -> Result<f64> {
    let w = q + nu;
    if omega_g > 0.0 {
        let ratio = w / omega_g;
        if ratio < 5.0 {
            return Err(Error::ConstraintViolated { name: "(q + ν) / Ωg", ratio, required: 5.0 });
        }
    }
    Ok(1.0 - 2.0 * omega_g * omega_g / (w * w) * (w * t).sin().powi(2))
}

/// Depth `2Ωg²/(q+ν)²` and period `π/(q+ν)` of the fidelity ripple.
pub fn oscillation_shape(omega_g: f64, q: f64, nu: f64) -> (f64, f64) {
    let w = q + nu;
    (2.0 * omega_g * omega_g / (w * w), PI / w)
}

/// Single-ion `μσz` in the D-qubit dressed basis `{u, d, D, 0'}`.
pub fn magnetic_term_dressed(mu: f64) -> ComplexOperator {
    let frame = crate::single::DressedFrame::new(crate::single::QubitKind::D);
    frame.operator_to_dressed(&sigma_z_ion().scale(c(mu, 0.0))).expect("4x4")
}

/// Settings for one entangling-gate simulation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MsSimulation {
    pub plan: MSPlan,
    pub trap: TrapConfig,
    pub heating_mode: HeatingMode,
    pub magnetic: MagneticNoise,
    pub frame: Frame,
    /// Step override; `None` resolves the generator's fastest frequency.
    pub dt: Option<f64>,
    /// Record observables every this many integrator steps.
    pub record_stride: usize,
    /// End time; `None` stops at the planned gate time.
    pub t_end: Option<f64>,
    /// Compute the full-state minimum eigenvalue every this many records.
    pub positivity_every: usize,
}

impl MsSimulation {
    pub fn new(plan: MSPlan, trap: TrapConfig) -> Self {
        Self {
            plan,
            trap,
            heating_mode: HeatingMode::HeatingOnly,
            magnetic: MagneticNoise::Off,
            frame: Frame::PhononRotating,
            dt: None,
            record_stride: 5,
            t_end: None,
            positivity_every: 200,
        }
    }

    pub fn reference(heating_rate: f64) -> Self {
        let (plan, mut trap) = reference_gate();
        trap.heating_rate = heating_rate;
        Self::new(plan, trap)
    }

    pub fn hamiltonian(&self) -> TermHamiltonian {
        two_ion_hamiltonian(&self.plan, &self.trap, self.frame, self.magnetic)
    }

    pub fn integrator(&self, gen: &TermHamiltonian) -> IntegratorConfig {
        let auto = IntegratorConfig::resolving(gen.max_frequency());
        let mut cfg = match self.dt {
            Some(dt) => IntegratorConfig::rk4(dt),
            None => auto,
        };
        cfg.record_stride = self.record_stride;
        cfg
    }

    pub fn initial_state(&self) -> PureState {
        dd().tensor(&PureState::basis(self.trap.fock_dim, self.trap.initial_phonons))
    }
}

/// Qubit observables over time and end-of-run diagnostics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MsGateResult {
    pub times: Vec<f64>,
    /// F² of `(|DD> + i|0'0'>)/√2`.
    pub f2_target: Vec<f64>,
    pub f2_dd: Vec<f64>,
    pub f2_zz: Vec<f64>,
    /// `<DD|ρ|0'0'>`
    pub rho_dd_zz: Vec<(f64, f64)>,
    pub mean_phonons: Vec<f64>,
    pub dt: f64,
    pub steps: usize,
    pub max_trace_error: f64,
    pub min_eigenvalue: f64,
    pub max_top_population: f64,
    pub max_step_norm_drift: f64,
    pub saturated: bool,
}

impl MsGateResult {
    pub fn final_f2(&self) -> f64 {
        *self.f2_target.last().expect("non-empty")
    }
}

struct Recorder {
    fock_dim: usize,
    target: PureState,
    dd: PureState,
    zz: PureState,
    out: MsGateResult,
}

impl Recorder {
    fn record(&mut self, t: f64, rho: &DMatrix<C64>) -> Result<()> {
        let full = MixedState::from_raw(rho.clone());
        let q = partial_trace_phonon(&full, PAIR_DIM, self.fock_dim)?;
        let (d, z) = (self.dd.amplitudes(), self.zz.amplitudes());
        let elem = (d.adjoint() * q.matrix() * z)[(0, 0)];
        let f = self.fock_dim;
        let n_mean = (0..rho.nrows()).map(|i| (i % f) as f64 * rho[(i, i)].re).sum();
        self.out.times.push(t);
        self.out.f2_target.push(overlap_probability(&self.target, &q)?);
        self.out.f2_dd.push(overlap_probability(&self.dd, &q)?);
        self.out.f2_zz.push(overlap_probability(&self.zz, &q)?);
        self.out.rho_dd_zz.push((elem.re, elem.im));
        self.out.mean_phonons.push(n_mean);
        Ok(())
    }
}

/// Runs the entangling gate from `|DD>⊗|n>`: Schrödinger evolution when the
/// heating rate is zero, Lindblad evolution otherwise.
pub fn simulate_ms_gate(sim: &MsSimulation) -> Result<MsGateResult> {
    sim.trap.validate()?;
    let gen = sim.hamiltonian();
    let cfg = sim.integrator(&gen);
    let t_end = sim.t_end.unwrap_or(sim.plan.t);
    let psi0 = sim.initial_state();
    let steps = cfg.steps_for(t_end);
    let mut rec = Recorder {
        fock_dim: sim.trap.fock_dim,
        target: bell_target(),
        dd: dd(),
        zz: zz(),
        out: MsGateResult {
            times: Vec::new(),
            f2_target: Vec::new(),
            f2_dd: Vec::new(),
            f2_zz: Vec::new(),
            rho_dd_zz: Vec::new(),
            mean_phonons: Vec::new(),
            dt: if steps > 0 { t_end / steps as f64 } else { 0.0 },
            steps,
            max_trace_error: 0.0,
            min_eigenvalue: 0.0,
            max_top_population: 0.0,
            max_step_norm_drift: 0.0,
            saturated: false,
        },
    };
    let phonons = PhononOps::new(PAIR_DIM, sim.trap.fock_dim);

    if sim.trap.heating_rate == 0.0 {
        let tr = evolve_pure(&gen, &psi0, (0.0, t_end), &cfg)?;
        let mut top: f64 = 0.0;
        let mut max_trace: f64 = 0.0;
        for (t, psi) in tr.times.iter().zip(&tr.states) {
            let rho = psi.projector();
            top = top.max(phonons.top_level_population(rho.matrix()));
            max_trace = max_trace.max((rho.trace() - 1.0).abs());
            rec.record(*t, rho.matrix())?;
        }
        rec.out.max_step_norm_drift = tr.max_step_norm_drift;
        rec.out.max_trace_error = max_trace;
        rec.out.max_top_population = top;
        rec.out.min_eigenvalue = 0.0;
    } else {
        let heating = HeatingModel::new(sim.trap.heating_rate, sim.heating_mode)?;
        let mut min_eig = f64::INFINITY;
        let mut count = 0usize;
        let mut failure = None;
        let every = sim.positivity_every.max(1);
        let diag = evolve_open_observed(&gen, &psi0.projector(), &heating, &phonons, (0.0, t_end), &cfg, &mut |t, rho| {
            if count % every == 0 || (t - t_end).abs() < 0.5 * cfg.dt {
                min_eig = min_eig.min(MixedState::from_raw(rho.clone()).min_eigenvalue());
            }
            count += 1;
            if let Err(e) = rec.record(t, rho) {
                failure.get_or_insert(e);
            }
        })?;
        if let Some(e) = failure {
            return Err(e);
        }
        rec.out.max_trace_error = diag.max_trace_error;
        rec.out.max_top_population = diag.max_top_population;
        rec.out.min_eigenvalue = min_eig;
    }
    rec.out.saturated = rec.out.max_top_population > crate::propagator::OpenTrajectory::SATURATION_LIMIT;
    Ok(rec.out)
}

/// Peak-to-peak depth and dominant period of `f2` over `[t_from, t_to]`,
/// measured after removing a linear trend.
pub fn measure_ripple(times: &[f64], f2: &[f64], t_from: f64, t_to: f64) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = times.iter().zip(f2).filter(|(t, _)| **t >= t_from && **t <= t_to).map(|(t, f)| (*t, *f)).collect();
    if pts.len() < 8 {
        return None;
    }
    let n = pts.len() as f64;
    let (mt, mf) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0 / n, a.1 + p.1 / n));
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + (p.0 - mt) * (p.1 - mf), a.1 + (p.0 - mt).powi(2)));
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let resid: Vec<(f64, f64)> = pts.iter().map(|p| (p.0, p.1 - mf - slope * (p.0 - mt))).collect();
    let hi = resid.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let lo = resid.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    // upward mean crossings, linearly interpolated
    let mut crossings = Vec::new();
    for w in resid.windows(2) {
        if w[0].1 < 0.0 && w[1].1 >= 0.0 {
            let s = -w[0].1 / (w[1].1 - w[0].1);
            crossings.push(w[0].0 + s * (w[1].0 - w[0].0));
        }
    }
    if crossings.len() < 2 {
        return None;
    }
    let period = (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64;
    Some((hi - lo, period))
}

/// Two-ion state produced by the target unitary from `|DD>`.
pub fn ideal_gate_output() -> PureState {
    let u = target_unitary();
    let v = u.matrix().column(logical_index(0, 0)).into_owned();
    embed_logical(&[v[0], v[1], v[2], v[3]]).expect("unitary column")
}
