//! Single-ion four-level model: Hamiltonian, dressed frames, gate field
//! sets, adiabatic schedules and perturbative noise budgets.
//!
//! Bare basis order is `(|-1>, |0>, |0'>, |1>)`.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops::{c, ComplexOperator, PureState, ONE, ZERO};
use crate::propagator::{DenseHamiltonian, Generator, NoiseSample, NoisySchedule};

pub const MINUS: usize = 0;
pub const ZERO_LEVEL: usize = 1;
pub const ZERO_PRIME: usize = 2;
pub const PLUS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum QubitKind {
    #[serde(rename = "D")]
    D,
    #[serde(rename = "B")]
    B,
}

/// Complete field configuration of one ion.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SingleQubitFields {
    pub omega_minus: f64,
    pub omega_plus: f64,
    pub theta_minus: f64,
    pub theta_plus: f64,
    pub theta_z: f64,
    pub omega_g: f64,
    pub phi_minus: f64,
    pub phi_plus: f64,
    pub delta_minus: f64,
    pub delta_plus: f64,
    pub delta_z: f64,
    pub omega_z: f64,
    /// Static Ω₊ − Ω₋ imbalance.
    pub delta_omega_mismatch: f64,
    /// Static error added to both RF phases.
    pub delta_phi_error: f64,
}

impl SingleQubitFields {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("omega_minus", self.omega_minus),
            ("omega_plus", self.omega_plus),
            ("omega_g", self.omega_g),
            ("omega_z", self.omega_z),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::OutOfRange { name, value: v, range: "[0, inf)" });
            }
        }
        Ok(())
    }

    /// Bound on the fastest frequency of `hamiltonian_at` for these fields.
    pub fn max_frequency(&self) -> f64 {
        let om = self.omega_minus + self.delta_omega_mismatch.abs();
        let op = self.omega_plus + self.delta_omega_mismatch.abs();
        let rows = [
            0.5 * (om + self.omega_g),
            0.5 * (om + op + self.omega_z),
            0.5 * (2.0 * self.omega_g + self.omega_z),
            0.5 * (op + self.omega_g),
        ];
        let detuning = self.delta_minus.abs().max(self.delta_plus.abs()).max(self.delta_z.abs());
        rows.iter().copied().fold(0.0, f64::max) + detuning
    }
}

/// Interaction-picture Hamiltonian with instantaneous noise values.
pub fn hamiltonian_at(t: f64, fields: &SingleQubitFields, mu: f64, d_omega: f64, d_omega_g: f64) -> ComplexOperator {
    let f = fields;
    let om = f.omega_minus + 0.5 * d_omega - 0.5 * f.delta_omega_mismatch;
    let op = f.omega_plus - 0.5 * d_omega + 0.5 * f.delta_omega_mismatch;
    let og = f.omega_g + d_omega_g;
    let pm = f.phi_minus + f.delta_phi_error;
    let pp = f.phi_plus + f.delta_phi_error;

    let mut a = ComplexOperator::zeros(4).into_matrix();
    a[(ZERO_LEVEL, MINUS)] = C64::from_polar(0.5 * om, -f.theta_minus);
    a[(ZERO_LEVEL, PLUS)] = C64::from_polar(0.5 * op, -f.theta_plus);
    a[(MINUS, ZERO_PRIME)] = C64::from_polar(0.5 * og, pm - f.delta_minus * t);
    a[(ZERO_PRIME, PLUS)] = C64::from_polar(0.5 * og, pp - f.delta_plus * t);
    a[(ZERO_LEVEL, ZERO_PRIME)] = C64::from_polar(0.5 * f.omega_z, -f.theta_z + f.delta_z * t);
    let mut h = &a + a.adjoint();
    h[(PLUS, PLUS)] += mu;
    h[(MINUS, MINUS)] -= mu;
    ComplexOperator::from_matrix(h).expect("4x4")
}

/// Named single-ion states.
pub mod states {
    use super::*;

    fn ket(a: [C64; 4]) -> PureState {
        PureState::from_slice(&a).expect("non-zero literal")
    }

    pub fn minus_one() -> PureState {
        PureState::basis(4, MINUS)
    }

    pub fn zero() -> PureState {
        PureState::basis(4, ZERO_LEVEL)
    }

    pub fn zero_prime() -> PureState {
        PureState::basis(4, ZERO_PRIME)
    }

    pub fn plus_one() -> PureState {
        PureState::basis(4, PLUS)
    }

    /// `(|-1> - |1>)/√2`
    pub fn dark() -> PureState {
        ket([ONE, ZERO, ZERO, -ONE])
    }

    /// `(|-1> + |1>)/√2`
    pub fn bright() -> PureState {
        ket([ONE, ZERO, ZERO, ONE])
    }

    /// Logical partner of |0'> for the given qubit.
    pub fn logical(kind: QubitKind) -> PureState {
        match kind {
            QubitKind::D => dark(),
            QubitKind::B => bright(),
        }
    }

    /// The dressing partner: |B> for the D-qubit, |D> for the B-qubit.
    pub fn partner(kind: QubitKind) -> PureState {
        match kind {
            QubitKind::D => bright(),
            QubitKind::B => dark(),
        }
    }

    pub fn up(kind: QubitKind) -> PureState {
        combine(&partner(kind), ONE, &zero(), ONE)
    }

    pub fn down(kind: QubitKind) -> PureState {
        combine(&partner(kind), ONE, &zero(), -ONE)
    }

    /// Normalized `a|x> + b|y>`.
    pub fn combine(x: &PureState, a: C64, y: &PureState, b: C64) -> PureState {
        PureState::normalized(x.amplitudes() * a + y.amplitudes() * b).expect("independent states")
    }
}

/// Bare-to-dressed change of basis for one qubit encoding.
#[derive(Clone, Debug, PartialEq)]
pub struct DressedFrame {
    pub qubit_kind: QubitKind,
    /// Columns are `|u>, |d>, |D or B>, |0'>` in the bare basis.
    pub basis_map: ComplexOperator,
}

impl DressedFrame {
    pub const U: usize = 0;
    pub const D: usize = 1;
    pub const LOGICAL: usize = 2;
    pub const ZERO_PRIME: usize = 3;

    pub fn new(kind: QubitKind) -> Self {
        let cols = [states::up(kind), states::down(kind), states::logical(kind), states::zero_prime()];
        let basis_map = ComplexOperator::from_fn(4, |i, j| cols[j].amplitude(i));
        Self { qubit_kind: kind, basis_map }
    }

    /// `V† A V`.
    pub fn operator_to_dressed(&self, op: &ComplexOperator) -> Result<ComplexOperator> {
        op.conjugate_by(&self.basis_map)
    }

    pub fn operator_from_dressed(&self, op: &ComplexOperator) -> Result<ComplexOperator> {
        op.conjugate_by(&self.basis_map.adjoint())
    }

    /// Dressed-basis amplitudes of a bare state.
    pub fn state_to_dressed(&self, psi: &PureState) -> Result<PureState> {
        let v = self.basis_map.adjoint().apply(psi)?;
        Ok(PureState::from_raw(v))
    }

    pub fn state_from_dressed(&self, psi: &PureState) -> Result<PureState> {
        let v = self.basis_map.apply(psi)?;
        Ok(PureState::from_raw(v))
    }
}

/// Field phases for the basic σy (D-qubit) or σx (B-qubit) gate.
pub fn basic_gate_fields(kind: QubitKind, omega: f64, omega_g: f64) -> Result<SingleQubitFields> {
    if !(omega > 0.0) {
        return Err(Error::OutOfRange { name: "omega", value: omega, range: "(0, inf)" });
    }
    if !(omega_g > 0.0) {
        return Err(Error::OutOfRange { name: "omega_g", value: omega_g, range: "(0, inf)" });
    }
    let (theta_plus, phi) = match kind {
        QubitKind::D => (0.0, FRAC_PI_2),
        QubitKind::B => (PI, 0.0),
    };
    Ok(SingleQubitFields {
        omega_minus: omega,
        omega_plus: omega,
        theta_plus,
        omega_g,
        phi_minus: phi,
        phi_plus: phi,
        ..Default::default()
    })
}

/// Dressing fields only, with the RF legs off.
pub fn dressing_fields(kind: QubitKind, omega: f64) -> SingleQubitFields {
    SingleQubitFields {
        omega_minus: omega,
        omega_plus: omega,
        theta_plus: if kind == QubitKind::B { PI } else { 0.0 },
        ..Default::default()
    }
}

/// Duration of a basic-gate π-pulse, π/(√2 Ωg).
pub fn pi_pulse_time(omega_g: f64) -> f64 {
    PI / (SQRT_2 * omega_g)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    Transfer,
    SigmaZ,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RampShape {
    #[default]
    Linear,
    SineSquared,
}

/// Straight move between two parameter points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSegment {
    pub start: (f64, f64),
    pub end: (f64, f64),
    pub t_start: f64,
    /// Zero for an instantaneous jump.
    pub duration: f64,
}

/// Piecewise-linear path in `(R1, R2)`; for transfer R1 is θ₊ and R2 is unused.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdiabaticSchedule {
    pub kind: ScheduleKind,
    pub rate: f64,
    pub waypoints: Vec<(f64, f64)>,
    pub segments: Vec<PathSegment>,
    pub duration: f64,
    pub x: Option<f64>,
    pub shape: RampShape,
}

impl AdiabaticSchedule {
    fn from_waypoints(
        kind: ScheduleKind,
        rate: f64,
        waypoints: Vec<(f64, f64)>,
        jumps: &[usize],
        x: Option<f64>,
    ) -> Self {
        let mut t = 0.0;
        let segments = waypoints
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let len = ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt();
                let duration = if jumps.contains(&i) { 0.0 } else { len / rate };
                let seg = PathSegment { start: w[0], end: w[1], t_start: t, duration };
                t += duration;
                seg
            })
            .collect();
        Self { kind, rate, waypoints, segments, duration: t, x, shape: RampShape::Linear }
    }

    pub fn with_shape(mut self, shape: RampShape) -> Self {
        self.shape = shape;
        self
    }

    /// Parameters `(R1, R2)` at time `t`, clamped to the path ends.
    pub fn params_at(&self, t: f64) -> (f64, f64) {
        let mut current = self.waypoints[0];
        for seg in &self.segments {
            if seg.duration == 0.0 {
                if t >= seg.t_start {
                    current = seg.end;
                }
                continue;
            }
            if t < seg.t_start {
                break;
            }
            let s = ((t - seg.t_start) / seg.duration).clamp(0.0, 1.0);
            let s = match self.shape {
                RampShape::Linear => s,
                RampShape::SineSquared => (FRAC_PI_2 * s).sin().powi(2),
            };
            current = (
                seg.start.0 + s * (seg.end.0 - seg.start.0),
                seg.start.1 + s * (seg.end.1 - seg.start.1),
            );
        }
        current
    }

    /// Instantaneous fields for dressing strength `omega`.
    pub fn fields_at(&self, t: f64, omega: f64) -> SingleQubitFields {
        let (r1, r2) = self.params_at(t);
        match self.kind {
            ScheduleKind::Transfer => SingleQubitFields {
                omega_minus: omega,
                omega_plus: omega,
                theta_plus: r1,
                ..Default::default()
            },
            ScheduleKind::SigmaZ => SingleQubitFields {
                omega_minus: omega * r2.sin(),
                omega_plus: omega * r2.sin(),
                theta_minus: r1,
                theta_plus: r1,
                omega_g: omega * r2.cos(),
                ..Default::default()
            },
        }
    }
}

/// θ₊ ramp between the dark and bright states at `rate` rad/s.
pub fn transfer_schedule(rate: f64, from: QubitKind) -> Result<AdiabaticSchedule> {
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(Error::OutOfRange { name: "rate", value: rate, range: "(0, inf)" });
    }
    let path = match from {
        QubitKind::D => vec![(0.0, 0.0), (PI, 0.0)],
        QubitKind::B => vec![(PI, 0.0), (0.0, 0.0)],
    };
    Ok(AdiabaticSchedule::from_waypoints(ScheduleKind::Transfer, rate, path, &[], None))
}

/// Closed σz loop A → B → C ⇒ D → A, with C → D taken instantaneously.
pub fn sigmaz_path(x: f64, rate: f64) -> Result<AdiabaticSchedule> {
    if !(x > 0.0 && x <= 2.0 * PI) {
        return Err(Error::OutOfRange { name: "x", value: x, range: "(0, 2π]" });
    }
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(Error::OutOfRange { name: "rate", value: rate, range: "(0, inf)" });
    }
    let path = vec![(0.0, FRAC_PI_2), (x, FRAC_PI_2), (x, 0.0), (0.0, 0.0), (0.0, FRAC_PI_2)];
    Ok(AdiabaticSchedule::from_waypoints(ScheduleKind::SigmaZ, rate, path, &[2], Some(x)))
}

/// `∫ cos²(R2) dR1` along a piecewise-linear path.
pub fn berry_phase(path: &[(f64, f64)]) -> f64 {
    path.windows(2)
        .map(|w| {
            let (a1, a2) = w[0];
            let (b1, b2) = w[1];
            let d1 = b1 - a1;
            let d2 = b2 - a2;
            if d1 == 0.0 {
                0.0
            } else if d2.abs() < 1e-14 {
                d1 * a2.cos().powi(2)
            } else {
                d1 * (0.5 + ((2.0 * b2).sin() - (2.0 * a2).sin()) / (4.0 * d2))
            }
        })
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum StarkParams {
    /// Detuned |0>↔|0'> coupling under D-qubit dressing.
    Dressed { omega: f64, omega_z: f64, delta_z: f64 },
    /// Oppositely detuned RF legs, with optional dressing.
    Rf { omega: f64, omega_g: f64, delta: f64 },
}

impl StarkParams {
    /// Rate at which |0'> gains phase relative to |D> for a predicted `shift`.
    ///
    /// The dressed shift acts on |0'> alone; the RF shift is the coefficient
    /// of `|0'><0'| − |D><D|`, so the relative phase runs twice as fast.
    pub fn phase_rate(&self, shift: f64) -> f64 {
        match self {
            StarkParams::Dressed { .. } => shift,
            StarkParams::Rf { .. } => 2.0 * shift,
        }
    }
}

/// Minimum ratio standing in for "≫" in validity conditions.
pub const DEFAULT_MIN_RATIO: f64 = 10.0;

/// Fields for a Stark-shift σz gate and its predicted shift, rad/s: the
/// energy of |0'> for the dressed variant, the coefficient of
/// `|0'><0'| − |D><D|` for the RF variant. See [`StarkParams::phase_rate`].
pub fn stark_sigmaz_fields(params: StarkParams, min_ratio: f64) -> Result<(SingleQubitFields, f64)> {
    match params {
        StarkParams::Dressed { omega, omega_z, delta_z } => {
            if omega_z > 0.0 {
                for (name, lhs) in [
                    ("|Ω + √2 δz| / Ωz", (omega + SQRT_2 * delta_z).abs()),
                    ("|Ω - √2 δz| / Ωz", (omega - SQRT_2 * delta_z).abs()),
                ] {
                    let ratio = lhs / omega_z;
                    if ratio < min_ratio {
                        return Err(Error::ConstraintViolated { name, ratio, required: min_ratio });
                    }
                }
            }
            let fields = SingleQubitFields { omega_z, delta_z, ..dressing_fields(QubitKind::D, omega) };
            let shift = dressed_stark_shift(omega, omega_z, delta_z);
            Ok((fields, shift))
        }
        StarkParams::Rf { omega, omega_g, delta } => {
            if omega_g > 0.0 {
                let ratio = delta.abs() / omega_g;
                if ratio < min_ratio {
                    return Err(Error::ConstraintViolated { name: "δ / Ωg", ratio, required: min_ratio });
                }
            }
            let fields = SingleQubitFields {
                omega_g,
                phi_plus: PI,
                phi_minus: 0.0,
                delta_plus: -delta,
                delta_minus: delta,
                ..dressing_fields(QubitKind::D, omega)
            };
            let shift = if omega_g == 0.0 { 0.0 } else { omega_g * omega_g / (2.0 * delta) };
            Ok((fields, shift))
        }
    }
}

/// Second-order shift of |0'> from a detuned |0>↔|0'> leg under dressing.
pub fn dressed_stark_shift(omega: f64, omega_z: f64, delta_z: f64) -> f64 {
    if omega_z == 0.0 {
        return 0.0;
    }
    delta_z * omega_z * omega_z / (2.0 * omega * omega - 4.0 * delta_z * delta_z)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateKind {
    Basic,
    Transfer,
    SigmaZ,
}

/// Closed-form perturbative noise magnitudes, rad/s unless noted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseBudget {
    pub gate: GateKind,
    pub second_order_shift: f64,
    pub gate_coupling_correction: f64,
    pub leakage_terms: Vec<f64>,
    /// Dimensionless; values above 1 mean the expansion is valid.
    pub constraint_margin: Vec<f64>,
    /// First-order in-qubit coupling (σz gate only).
    pub first_order_coupling: f64,
    /// Third-order in-qubit coupling (σz gate only).
    pub third_order_coupling: f64,
}

impl NoiseBudget {
    /// Sum of all magnitudes.
    pub fn total_estimate(&self) -> f64 {
        self.second_order_shift
            + self.gate_coupling_correction
            + self.first_order_coupling
            + self.third_order_coupling
            + self.leakage_terms.iter().sum::<f64>()
    }
}

pub fn noise_budget(gate: GateKind, omega: f64, omega_g: f64, sd_mu: f64, sd_delta_omega: f64) -> Result<NoiseBudget> {
    let (mu, dw) = (sd_mu.abs(), sd_delta_omega.abs());
    let f = if omega > 0.0 { dw / (SQRT_2 * omega) } else { f64::INFINITY };
    let inv = |x: f64| if x == 0.0 { f64::INFINITY } else { 1.0 / x };
    match gate {
        GateKind::Basic => {
            let gap2 = omega * omega - omega_g * omega_g;
            if gap2 == 0.0 {
                return Err(Error::Degenerate("basic gate budget requires Ω ≠ Ωg"));
            }
            let cube = (8f64.sqrt() * mu + dw).powi(3);
            Ok(NoiseBudget {
                gate,
                second_order_shift: mu * omega * dw / (2.0 * gap2.abs()),
                gate_coupling_correction: (8.0 * mu * mu + dw * dw) * omega_g / (8.0 * SQRT_2 * gap2.abs()),
                leakage_terms: vec![
                    omega * omega * cube / (32.0 * gap2 * gap2),
                    omega * omega_g * cube / (32.0 * gap2 * gap2),
                ],
                constraint_margin: vec![gap2.abs().sqrt() * inv(mu.max(dw))],
                first_order_coupling: 0.0,
                third_order_coupling: 0.0,
            })
        }
        GateKind::Transfer => {
            if !(omega > 0.0) {
                return Err(Error::OutOfRange { name: "omega", value: omega, range: "(0, inf)" });
            }
            let o2 = omega * omega;
            Ok(NoiseBudget {
                gate,
                second_order_shift: mu * dw / omega,
                gate_coupling_correction: 0.0,
                leakage_terms: vec![mu.powi(3) / o2, mu * mu * dw / o2, mu * dw * dw / o2, dw.powi(3) / o2],
                constraint_margin: vec![omega * inv(mu), inv(f)],
                first_order_coupling: 0.0,
                third_order_coupling: 0.0,
            })
        }
        GateKind::SigmaZ => {
            if !(omega > 0.0) {
                return Err(Error::OutOfRange { name: "omega", value: omega, range: "(0, inf)" });
            }
            let o2 = omega * omega;
            Ok(NoiseBudget {
                gate,
                second_order_shift: mu * dw / omega,
                gate_coupling_correction: 0.0,
                leakage_terms: vec![
                    dw * mu / omega,
                    dw * dw / omega,
                    mu.powi(3) / o2,
                    mu * mu * dw / o2,
                    mu * dw * dw / o2,
                    dw.powi(3) / o2,
                ],
                constraint_margin: vec![omega * inv(mu), inv(f)],
                first_order_coupling: dw / (4.0 * SQRT_2),
                third_order_coupling: dw * (8.0 * mu * mu + dw * dw) / (16.0 * SQRT_2 * o2),
            })
        }
    }
}

/// Second-order gradient shift of the dark state, −η²ν.
pub fn gradient_shift(eta: f64, nu: f64) -> f64 {
    -eta * eta * nu
}

/// Static error knobs applied on top of a protocol's fields.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorKnobs {
    pub delta_omega_mismatch: f64,
    pub delta_phi_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Drive {
    Fixed(SingleQubitFields),
    Adiabatic { schedule: AdiabaticSchedule, omega: f64 },
}

/// A single-ion gate run: drive, duration, input and comparison states.
#[derive(Clone, Debug)]
pub struct SingleIonProtocol {
    pub drive: Drive,
    pub duration: f64,
    pub initial: PureState,
    pub target: PureState,
    pub knobs: ErrorKnobs,
}

impl SingleIonProtocol {
    /// One basic-gate π-pulse. D-qubit: (D+0')/√2 → (D−0')/√2;
    /// B-qubit: (B+i0')/√2 → (B−i0')/√2.
    pub fn basic_gate(kind: QubitKind, omega: f64, omega_g: f64) -> Result<Self> {
        let fields = basic_gate_fields(kind, omega, omega_g)?;
        let l = states::logical(kind);
        let z = states::zero_prime();
        let (initial, target) = match kind {
            QubitKind::D => (states::combine(&l, ONE, &z, ONE), states::combine(&l, ONE, &z, -ONE)),
            QubitKind::B => (states::combine(&l, ONE, &z, c(0.0, 1.0)), states::combine(&l, ONE, &z, c(0.0, -1.0))),
        };
        Ok(Self { drive: Drive::Fixed(fields), duration: pi_pulse_time(omega_g), initial, target, knobs: ErrorKnobs::default() })
    }

    /// Adiabatic transfer of `(L + 0')/√2` with the Berry phase ∓π/2 on the new logical state.
    pub fn transfer(rate: f64, from: QubitKind, omega: f64) -> Result<Self> {
        check_omega(omega)?;
        let schedule = transfer_schedule(rate, from)?;
        let z = states::zero_prime();
        let (src, dst, phase) = match from {
            QubitKind::D => (states::dark(), states::bright(), -FRAC_PI_2),
            QubitKind::B => (states::bright(), states::dark(), FRAC_PI_2),
        };
        Ok(Self {
            duration: schedule.duration,
            drive: Drive::Adiabatic { schedule, omega },
            initial: states::combine(&src, ONE, &z, ONE),
            target: states::combine(&dst, C64::from_polar(1.0, phase), &z, ONE),
            knobs: ErrorKnobs::default(),
        })
    }

    /// Adiabatic σz loop: (D + 0')/√2 → (D + e^{−ix} 0')/√2.
    pub fn sigma_z(x: f64, rate: f64, omega: f64) -> Result<Self> {
        check_omega(omega)?;
        let schedule = sigmaz_path(x, rate)?;
        let d = states::dark();
        let z = states::zero_prime();
        Ok(Self {
            duration: schedule.duration,
            drive: Drive::Adiabatic { schedule, omega },
            initial: states::combine(&d, ONE, &z, ONE),
            target: states::combine(&d, ONE, &z, C64::from_polar(1.0, -x)),
            knobs: ErrorKnobs::default(),
        })
    }

    /// Dressing only; |D> should survive for `horizon`.
    pub fn dark_state_hold(omega: f64, horizon: f64) -> Result<Self> {
        check_omega(omega)?;
        Ok(Self {
            drive: Drive::Fixed(dressing_fields(QubitKind::D, omega)),
            duration: horizon,
            initial: states::dark(),
            target: states::dark(),
            knobs: ErrorKnobs::default(),
        })
    }

    /// Fixed fields held for `duration` with explicit states.
    pub fn fixed(fields: SingleQubitFields, duration: f64, initial: PureState, target: PureState) -> Result<Self> {
        fields.validate()?;
        Ok(Self { drive: Drive::Fixed(fields), duration, initial, target, knobs: ErrorKnobs::default() })
    }

    pub fn with_knobs(mut self, knobs: ErrorKnobs) -> Self {
        self.knobs = knobs;
        self
    }

    pub fn with_duration(mut self, duration: f64) -> Self {
        self.duration = duration;
        self
    }

    pub fn fields_at(&self, t: f64) -> SingleQubitFields {
        let mut f = match &self.drive {
            Drive::Fixed(f) => *f,
            Drive::Adiabatic { schedule, omega } => schedule.fields_at(t, *omega),
        };
        f.delta_omega_mismatch += self.knobs.delta_omega_mismatch;
        f.delta_phi_error += self.knobs.delta_phi_error;
        f
    }

    /// Noise-free generator.
    pub fn noiseless(&self) -> Box<dyn Generator + '_> {
        self.generator(NoiseSample::default())
    }
}

fn check_omega(omega: f64) -> Result<()> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::OutOfRange { name: "omega", value: omega, range: "(0, inf)" });
    }
    Ok(())
}

impl NoisySchedule for SingleIonProtocol {
    fn dim(&self) -> usize {
        4
    }

    fn duration(&self) -> f64 {
        self.duration
    }

    fn initial_state(&self) -> PureState {
        self.initial.clone()
    }

    fn target_state(&self) -> PureState {
        self.target.clone()
    }

    fn dressing_strength(&self) -> f64 {
        match &self.drive {
            Drive::Fixed(f) => 0.5 * (f.omega_minus + f.omega_plus),
            Drive::Adiabatic { omega, .. } => *omega,
        }
    }

    fn max_frequency(&self) -> f64 {
        match &self.drive {
            Drive::Fixed(_) => self.fields_at(0.0).max_frequency(),
            Drive::Adiabatic { schedule, omega } => *omega + schedule.rate + self.knobs.delta_omega_mismatch.abs(),
        }
    }

    fn generator(&self, noise: NoiseSample) -> Box<dyn Generator + '_> {
        let bound = self.max_frequency() + noise.mu.abs() + noise.d_omega.abs();
        Box::new(DenseHamiltonian::new(4, bound, move |t| {
            let f = self.fields_at(t);
            hamiltonian_at(t, &f, noise.mu, noise.d_omega, noise.rf_fraction * f.omega_g)
        }))
    }
}

/// Exponential decay `F² ≈ e^{-t/T₁}` fitted to a survival curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LifetimeFit {
    /// seconds
    pub t1: f64,
    /// 95% interval on T₁ from the slope standard error.
    pub t1_low: f64,
    pub t1_high: f64,
    pub points: usize,
}

/// Least-squares fit of `ln F²` against `t` over `t >= t_from`.
///
/// The intercept is free so that a fast initial transient does not bias
/// the slope. Returns `None` with fewer than three usable points or a
/// non-decaying curve.
pub fn fit_lifetime(times: &[f64], f2: &[f64], t_from: f64) -> Option<LifetimeFit> {
    let pts: Vec<(f64, f64)> =
        times.iter().zip(f2).filter(|(t, f)| **t >= t_from && **f > 0.0).map(|(t, f)| (*t, f.ln())).collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let (mt, my) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0 / n, a.1 + p.1 / n));
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return None;
    }
    let rss: f64 = pts.iter().map(|p| (p.1 - my - slope * (p.0 - mt)).powi(2)).sum();
    let se = (rss / (n - 2.0) / sxx).sqrt();
    let t1 = -1.0 / slope;
    let steep = slope - 1.96 * se;
    let shallow = slope + 1.96 * se;
    Some(LifetimeFit {
        t1,
        t1_low: -1.0 / steep,
        t1_high: if shallow < 0.0 { -1.0 / shallow } else { f64::INFINITY },
        points: pts.len(),
    })
}

/// Phase of the |0'> amplitude relative to the logical amplitude.
pub fn relative_phase(psi: &PureState, kind: QubitKind) -> f64 {
    let l = states::logical(kind).inner(psi).expect("dim 4");
    let z = psi.amplitude(ZERO_PRIME);
    (z / l).arg()
}
