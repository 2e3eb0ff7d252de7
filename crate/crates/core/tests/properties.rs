use std::f64::consts::{FRAC_PI_2, PI};

use dressed_core::noise::{ou_update, preset, sample_trajectory, OUParams};
use dressed_core::ops::{
    c, merit, partial_trace_phonon, state_fidelity, tensor_product, ComplexOperator, MixedState, PureState,
};
use dressed_core::propagator::{
    evolve_open, evolve_pure, run_ensemble, tree_sum, DenseHamiltonian, EnsembleConfig, Generator, HeatingMode,
    HeatingModel, IntegratorConfig, NoisySchedule, PhononOps,
};
use dressed_core::regimes::{classify, zeeman_gap, IonSpecies};
use dressed_core::single::{
    basic_gate_fields, berry_phase, dressing_fields, hamiltonian_at, noise_budget, relative_phase, states,
    DressedFrame, ErrorKnobs, GateKind, QubitKind, SingleIonProtocol, SingleQubitFields,
};
use dressed_core::two::{
    ms_plan, reference_gate, simulate_ms_gate, two_ion_hamiltonian, Dressing, Frame, MagneticNoise, MsSimulation,
};
use dressed_core::units::{khz, rad_per_ms};
use num_complex::Complex64 as C64;
use proptest::prelude::*;

fn fields_strategy() -> impl Strategy<Value = SingleQubitFields> {
    (
        (0.0..1e6f64, 0.0..1e6f64, -PI..PI, -PI..PI, -PI..PI),
        (0.0..1e5f64, -PI..PI, -PI..PI, -1e5..1e5f64, -1e5..1e5f64),
        (-1e6..1e6f64, 0.0..1e5f64, -1e3..1e3f64, -0.1..0.1f64),
    )
        .prop_map(|((om, op, tm, tp, tz), (og, pm, pp, dm, dp), (dz, oz, dw, dphi))| SingleQubitFields {
            omega_minus: om,
            omega_plus: op,
            theta_minus: tm,
            theta_plus: tp,
            theta_z: tz,
            omega_g: og,
            phi_minus: pm,
            phi_plus: pp,
            delta_minus: dm,
            delta_plus: dp,
            delta_z: dz,
            omega_z: oz,
            delta_omega_mismatch: dw,
            delta_phi_error: dphi,
        })
}

fn random_operator(dim: usize) -> impl Strategy<Value = ComplexOperator> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), dim * dim)
        .prop_map(move |v| ComplexOperator::from_fn(dim, |i, j| c(v[i * dim + j].0, v[i * dim + j].1)))
}

fn random_state(dim: usize) -> impl Strategy<Value = PureState> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), dim)
        .prop_filter("non-zero", |v| v.iter().map(|(a, b)| a * a + b * b).sum::<f64>() > 1e-3)
        .prop_map(|v| PureState::from_slice(&v.iter().map(|(a, b)| c(*a, *b)).collect::<Vec<_>>()).unwrap())
}

fn path_strategy() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-2.0 * PI..2.0 * PI, -PI..PI), 2..8)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn single_ion_hamiltonian_is_hermitian(
        f in fields_strategy(),
        t in 0.0..1e-3f64,
        mu in -1e4..1e4f64,
        dw in -1e4..1e4f64,
        dg in -1e3..1e3f64,
    ) {
        let h = hamiltonian_at(t, &f, mu, dw, dg);
        prop_assert!(h.hermiticity_defect() <= 1e-12 * h.frobenius_norm().max(1.0));
    }

    #[test]
    fn plus_adjoint_is_exactly_hermitian(a in random_operator(5)) {
        let h = ComplexOperator::plus_adjoint(&a);
        prop_assert_eq!(h.hermiticity_defect(), 0.0);
    }

    #[test]
    fn tensor_product_is_associative(a in random_operator(2), b in random_operator(3), d in random_operator(2)) {
        let left = tensor_product(&tensor_product(&a, &b), &d);
        let right = tensor_product(&a, &tensor_product(&b, &d));
        let defect = (left.matrix() - right.matrix()).camax();
        prop_assert!(defect <= 1e-12 * (1.0 + left.matrix().camax()), "defect {}", defect);
    }

    #[test]
    fn hermitian_propagator_is_unitary(a in random_operator(4), t in -10.0..10.0f64) {
        let u = ComplexOperator::plus_adjoint(&a).hermitian_propagator(t);
        prop_assert!(u.unitarity_defect() < 1e-12);
    }

    #[test]
    fn orthogonal_fidelities_bounded(psi in random_state(2), rho_src in random_state(2), mix in 0.0..1.0f64) {
        let perp = PureState::from_slice(&[-psi.amplitude(1).conj(), psi.amplitude(0).conj()]).unwrap();
        let m = rho_src.projector().matrix() * c(mix, 0.0) + MixedState::maximally_mixed(2).matrix() * c(1.0 - mix, 0.0);
        let rho = MixedState::new(m).unwrap();
        let a = state_fidelity(&psi, &rho).unwrap();
        let b = state_fidelity(&perp, &rho).unwrap();
        prop_assert!(a * a + b * b <= 1.0 + 1e-12);
    }

    #[test]
    fn merit_strictly_decreasing(f1 in 0.0..0.999_999f64, gap in 1e-6..1e-3f64) {
        let f2 = (f1 + gap).min(0.999_999_9);
        prop_assume!(f2 > f1);
        prop_assert!(merit(f2).unwrap() < merit(f1).unwrap());
    }

    #[test]
    fn dressed_frame_round_trip(psi in random_state(4), a in random_operator(4)) {
        for kind in [QubitKind::D, QubitKind::B] {
            let frame = DressedFrame::new(kind);
            prop_assert!(frame.basis_map.unitarity_defect() < 1e-12);
            let back = frame.state_from_dressed(&frame.state_to_dressed(&psi).unwrap()).unwrap();
            prop_assert!((back.amplitudes() - psi.amplitudes()).norm() < 1e-12);
            let op_back = frame.operator_from_dressed(&frame.operator_to_dressed(&a).unwrap()).unwrap();
            prop_assert!((op_back.matrix() - a.matrix()).norm() < 1e-12);
        }
    }

    #[test]
    fn dressed_eigenvectors(om in 1e3..1e7f64, og in 1e2..1e5f64) {
        let f = basic_gate_fields(QubitKind::D, om, og).unwrap();
        let h = hamiltonian_at(0.0, &f, 0.0, 0.0, 0.0);
        for (state, e) in [(states::up(QubitKind::D), om / 2f64.sqrt()), (states::down(QubitKind::D), -om / 2f64.sqrt())] {
            let hv = h.apply(&state).unwrap();
            let resid = (hv - state.amplitudes() * c(e, 0.0)).norm();
            prop_assert!(resid < 1e-10 * om);
        }
    }

    #[test]
    fn berry_phase_additive(p in path_strategy(), q in path_strategy()) {
        let mut joined = p.clone();
        joined.push(q[0]);
        joined.extend_from_slice(&q[1..]);
        let bridge = berry_phase(&[*p.last().unwrap(), q[0]]);
        let total = berry_phase(&p) + bridge + berry_phase(&q);
        prop_assert!((berry_phase(&joined) - total).abs() < 1e-9);
    }

    #[test]
    fn berry_phase_antisymmetric(p in path_strategy()) {
        let rev: Vec<_> = p.iter().rev().copied().collect();
        prop_assert!((berry_phase(&p) + berry_phase(&rev)).abs() < 1e-9);
    }

    #[test]
    fn berry_phase_split_segment(a in (-PI..PI, -PI..PI), b in (-PI..PI, -PI..PI), s in 0.01..0.99f64) {
        let mid = (a.0 + s * (b.0 - a.0), a.1 + s * (b.1 - a.1));
        prop_assert!((berry_phase(&[a, b]) - berry_phase(&[a, mid, b])).abs() < 1e-9);
    }

    #[test]
    fn flat_r2_path_has_no_phase(xs in prop::collection::vec(-5.0..5.0f64, 2..6)) {
        let p: Vec<_> = xs.iter().map(|x| (*x, FRAC_PI_2)).collect();
        prop_assert!(berry_phase(&p).abs() < 1e-12);
    }

    #[test]
    fn noise_budget_non_negative(
        om in 1e3..1e7f64,
        og in 1e2..1e5f64,
        mu in 0.0..1e4f64,
        dw in 0.0..1e5f64,
    ) {
        for gate in [GateKind::Basic, GateKind::Transfer, GateKind::SigmaZ] {
            if let Ok(b) = noise_budget(gate, om, og, mu, dw) {
                prop_assert!(b.second_order_shift >= 0.0 && b.gate_coupling_correction >= 0.0);
                prop_assert!(b.leakage_terms.iter().all(|x| *x >= 0.0));
                prop_assert!(b.constraint_margin.iter().all(|x| *x >= 0.0));
                prop_assert!(b.total_estimate() >= 0.0);
            }
        }
    }

    #[test]
    fn ms_plan_invariants(r in 1u32..20, eta in 1e-4..0.1f64, og in 1e3..1e7f64) {
        let p = ms_plan(r, eta, og, Dressing::default()).unwrap();
        prop_assert!((p.q * p.t / (2.0 * PI * r as f64) - 1.0).abs() < 1e-12);
        prop_assert!((p.t * (eta * og).powi(2) / p.q - PI / 4.0).abs() < 1e-12);
    }

    #[test]
    fn zeeman_gap_quadratic(b in 0.0..1.0f64) {
        let s = IonSpecies::yb171();
        let one = zeeman_gap(&s, b);
        prop_assert!((zeeman_gap(&s, 2.0 * b) - 4.0 * one).abs() <= 1e-12 * one.max(1e-300));
    }

    #[test]
    fn classify_monotone_in_rf(og in 1e2..1e6f64, scale in 1.0..100.0f64, delta in 0.0..1e6f64, eta in 1e-3..1.0f64) {
        let lo = classify(og, eta * og, delta, 0.0, 10.0).regime;
        let hi = classify(og * scale, eta * og * scale, delta, 0.0, 10.0).regime;
        prop_assert!(hi >= lo);
    }

    #[test]
    fn ou_zero_sd_is_deterministic_decay(x in -10.0..10.0f64, dt in 1e-9..1e-2f64, tau in 1e-6..1.0f64, g in -5.0..5.0f64) {
        let p = OUParams::new(tau, 0.0).unwrap();
        prop_assert_eq!(ou_update(x, dt, &p, g), x * (-dt / tau).exp());
    }

    #[test]
    fn ou_two_steps_match_one_in_moments(dt1 in 1e-6..1e-2f64, dt2 in 1e-6..1e-2f64, tau in 1e-4..1.0f64, sd in 0.1..10.0f64) {
        // mean and variance recursions of the exact update compose
        let p = OUParams::new(tau, sd).unwrap();
        let a1 = (-dt1 / tau).exp();
        let a2 = (-dt2 / tau).exp();
        let v = |dt: f64| sd * sd * (1.0 - (-2.0 * dt / tau).exp());
        let var_two = a2 * a2 * v(dt1) + v(dt2);
        prop_assert!((var_two - v(dt1 + dt2)).abs() <= 1e-10 * sd * sd);
        prop_assert!((a1 * a2 - (-(dt1 + dt2) / tau).exp()).abs() < 1e-14);
        // zero-draw updates reproduce the mean recursion
        let m = ou_update(ou_update(1.0, dt1, &p, 0.0), dt2, &p, 0.0);
        prop_assert!((m - ou_update(1.0, dt1 + dt2, &p, 0.0)).abs() < 1e-14);
    }

    #[test]
    fn ou_seed_stream_determinism(seed in any::<u64>(), stream in 0u64..1000) {
        let p = OUParams::new(1e-4, 5.0).unwrap();
        let a = sample_trajectory(&p, 1e-6, 64, seed, stream).unwrap();
        let b = sample_trajectory(&p, 1e-6, 64, seed, stream).unwrap();
        prop_assert_eq!(a.samples, b.samples);
    }

    #[test]
    fn tree_sum_is_bitwise_stable(v in prop::collection::vec(-1e3..1e3f64, 1..64)) {
        let a = tree_sum(&v, &|x: &f64, y: &f64| x + y);
        let b = tree_sum(&v.clone(), &|x: &f64, y: &f64| x + y);
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn partial_trace_preserves_trace(psi in random_state(12)) {
        let r = partial_trace_phonon(&psi.projector(), 3, 4).unwrap();
        prop_assert!((r.trace() - 1.0).abs() < 1e-12);
        prop_assert!(r.min_eigenvalue() > -1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn two_ion_hamiltonian_is_hermitian(t in 0.0..5e-4f64, mu in -1e3..1e3f64) {
        let (plan, mut trap) = reference_gate();
        trap.fock_dim = 6;
        for frame in [Frame::Lab, Frame::PhononRotating] {
            let h = two_ion_hamiltonian(&plan, &trap, frame, MagneticNoise::Common { mu }).operator_at(t);
            prop_assert!(h.hermiticity_defect() <= 1e-12 * h.frobenius_norm());
        }
    }

    #[test]
    fn pure_evolution_preserves_norm(f in fields_strategy(), psi in random_state(4)) {
        let mut f = f;
        f.omega_minus = f.omega_minus.min(1e5);
        f.omega_plus = f.omega_plus.min(1e5);
        f.delta_z = f.delta_z.clamp(-1e5, 1e5);
        let gen = DenseHamiltonian::new(4, f.max_frequency(), move |t| hamiltonian_at(t, &f, 0.0, 0.0, 0.0));
        let cfg = IntegratorConfig::resolving(gen.max_frequency());
        let tr = evolve_pure(&gen, &psi, (0.0, 2e-4), &cfg).unwrap();
        // RK4 loses at most (ω dt)⁶/72 of the norm per step.
        let per_step = (cfg.dt * gen.max_frequency()).powi(6) / 72.0 * 1.01 + 1e-15;
        let steps = (2e-4 / cfg.dt).ceil();
        prop_assert!(tr.max_step_norm_drift <= per_step, "drift {}", tr.max_step_norm_drift);
        prop_assert!((tr.final_state().norm() - 1.0).abs() <= steps * per_step);
    }

    #[test]
    fn open_evolution_trace_and_positivity(rate in 0.0..500.0f64, omega in 1e3..1e5f64, infinite in any::<bool>()) {
        let f = 5;
        let gen = DenseHamiltonian::new(2 * f, omega, move |_t| {
            let q = ComplexOperator::plus_adjoint(&ComplexOperator::ket_bra(2, 0, 1).scale(c(0.5 * omega, 0.0)));
            tensor_product(&q, &ComplexOperator::identity(f))
        });
        let mode = if infinite { HeatingMode::InfiniteTemperature } else { HeatingMode::HeatingOnly };
        let heating = HeatingModel::new(rate, mode).unwrap();
        let cfg = IntegratorConfig::resolving(omega).with_stride(200);
        let tr = evolve_open(&gen, &PureState::basis(2 * f, 0).projector(), &heating, &PhononOps::new(2, f), (0.0, 5e-3), &cfg).unwrap();
        prop_assert!(tr.max_trace_error < 1e-6);
        prop_assert!(tr.min_eigenvalue > -1e-6);
    }

    #[test]
    fn qubit_space_decoupled_without_rf(om in 1e4..1e6f64, a in random_state(2)) {
        let f = dressing_fields(QubitKind::D, om);
        let psi = states::combine(&states::dark(), a.amplitude(0), &states::zero_prime(), a.amplitude(1));
        let gen = DenseHamiltonian::new(4, f.max_frequency(), move |t| hamiltonian_at(t, &f, 0.0, 0.0, 0.0));
        let cfg = IntegratorConfig::resolving(gen.max_frequency());
        let tr = evolve_pure(&gen, &psi, (0.0, 1e-4), &cfg).unwrap();
        let overlap = psi.inner(tr.final_state()).unwrap();
        prop_assert!((overlap - C64::new(1.0, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn ensemble_is_deterministic(seed in any::<u64>()) {
        let p = SingleIonProtocol::basic_gate(QubitKind::D, khz(100.0), khz(5.0)).unwrap();
        let cfg = EnsembleConfig { record_every: 10, ..EnsembleConfig::for_schedule(&p) };
        let red = preset("red").unwrap();
        let a = run_ensemble(&p, &red, 3, seed, &cfg).unwrap();
        let b = run_ensemble(&p, &red, 3, seed, &cfg).unwrap();
        prop_assert_eq!(a.merit_series.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.merit_series.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        for rho in &a.mean_density {
            prop_assert!((rho.trace() - 1.0).abs() < 1e-6);
        }
    }
}

#[test]
fn thread_count_does_not_change_ensemble() {
    let p = SingleIonProtocol::basic_gate(QubitKind::D, khz(200.0), khz(2.0)).unwrap();
    let cfg = EnsembleConfig::for_schedule(&p);
    let red = preset("red").unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_ensemble(&p, &red, 9, 77, &cfg).unwrap())
    };
    let a = run(1);
    let b = run(4);
    assert_eq!(a.final_merit().to_bits(), b.final_merit().to_bits());
    assert_eq!(a.final_density().matrix(), b.final_density().matrix());
}

#[test]
fn single_trajectory_black_matches_pure_run() {
    let p = SingleIonProtocol::basic_gate(QubitKind::D, khz(300.0), khz(1.1785)).unwrap();
    let cfg = EnsembleConfig::for_schedule(&p);
    let r = run_ensemble(&p, &preset("black").unwrap(), 1, 5, &cfg).unwrap();
    let gen = p.noiseless();
    let tr = evolve_pure(gen.as_ref(), &p.initial, (0.0, p.duration), &cfg.integrator).unwrap();
    let f = state_fidelity(tr.final_state(), r.final_density()).unwrap();
    assert!(1.0 - f < 1e-9, "{}", 1.0 - f);
}

#[test]
fn fock_truncation_converged() {
    let base = MsSimulation::reference(0.0);
    let mut wider = base.clone();
    wider.trap.fock_dim += 4;
    let a = simulate_ms_gate(&base).unwrap();
    let b = simulate_ms_gate(&wider).unwrap();
    assert!((a.final_f2() - b.final_f2()).abs() < 1e-4);
    assert!(!a.saturated);
}

#[test]
fn sigmaz_phase_slow_limit() {
    // rate ≤ 10 rad/ms and Ω ≥ 2π·500 kHz
    for x in [0.7, PI, 5.0] {
        let p = SingleIonProtocol::sigma_z(x, rad_per_ms(10.0), khz(500.0)).unwrap();
        let gen = p.noiseless();
        let cfg = IntegratorConfig::resolving(p.max_frequency());
        let tr = evolve_pure(gen.as_ref(), &p.initial, (0.0, p.duration), &cfg).unwrap();
        let phase = relative_phase(tr.final_state(), QubitKind::D);
        let err = (phase + x).rem_euclid(2.0 * PI);
        let err = err.min(2.0 * PI - err);
        assert!(err < 1e-2, "x = {x}: phase {phase}");
    }
}

fn phase_error_infidelity(dphi: f64) -> f64 {
    let p = SingleIonProtocol::basic_gate(QubitKind::D, khz(500.0), khz(1.1785))
        .unwrap()
        .with_knobs(ErrorKnobs { delta_phi_error: dphi, ..ErrorKnobs::default() });
    let gen = p.noiseless();
    let cfg = IntegratorConfig::resolving(p.max_frequency() * 1.01);
    let tr = evolve_pure(gen.as_ref(), &p.initial, (0.0, p.duration), &cfg).unwrap();
    1.0 - p.target.inner(tr.final_state()).unwrap().norm_sqr()
}

fn phase_error_exponent() -> f64 {
    let base = phase_error_infidelity(0.0);
    let (a, b) = (0.005, 0.05);
    let (ia, ib) = (phase_error_infidelity(a) - base, phase_error_infidelity(b) - base);
    (ib / ia).ln() / (b / a).ln()
}

// The coupling shrinks by cos δφ, so the rotation angle misses by ~πδφ²/4.
#[test]
fn phase_error_enters_through_rotation_angle() {
    let dphi: f64 = 0.05;
    let measured = phase_error_infidelity(dphi) - phase_error_infidelity(0.0);
    let predicted = (PI * dphi * dphi / 4.0).powi(2);
    assert!((measured / predicted - 1.0).abs() < 0.05, "{measured} vs {predicted}");
    assert!(phase_error_infidelity(0.01) < 1e-6);
}

#[test]
#[ignore = "infidelity is quartic in the phase error; see decisions ledger"]
fn phase_error_infidelity_is_quadratic() {
    let exponent = phase_error_exponent();
    assert!((exponent - 2.0).abs() <= 0.2, "exponent {exponent}");
}

#[test]
fn basic_gate_trend_in_dressing_strength() {
    let red = preset("red").unwrap();
    let oms = [50.0, 80.0, 130.0, 200.0, 320.0, 500.0];
    let ms: Vec<(f64, f64)> = oms
        .iter()
        .map(|&om| {
            let p = SingleIonProtocol::basic_gate(QubitKind::D, khz(om), khz(1.1785)).unwrap();
            let r = run_ensemble(&p, &red, 50, 2024, &EnsembleConfig::for_schedule(&p)).unwrap();
            let mean = r.trajectory_f2.iter().sum::<f64>() / r.trajectory_f2.len() as f64;
            // merit uncertainty from the F² standard error
            (r.final_merit(), r.sem() / ((1.0 - mean) * std::f64::consts::LN_10))
        })
        .collect();
    let inversions = ms.windows(2).filter(|w| w[1].0 > w[0].0 + 2.0 * (w[0].1 + w[1].1)).count();
    let loose = ms.windows(2).filter(|w| w[1].0 > w[0].0).count();
    assert!(inversions == 0 && loose <= 1, "{ms:?}");
}
