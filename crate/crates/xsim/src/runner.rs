//! Executes an experiment and writes its artifacts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use dressed_core::noise::NoisePreset;
use dressed_core::ops::{merit_from_squared, MERIT_FLOOR, ONE};
use dressed_core::propagator::{run_ensemble, EnsembleConfig, EnsembleResult, IntegratorConfig, NoisySchedule};
use dressed_core::regimes::{classify, dressed_delta, zeeman_gap, IonSpecies, Regime};
use dressed_core::single::{
    fit_lifetime, stark_sigmaz_fields, states, ErrorKnobs, QubitKind, SingleIonProtocol, StarkParams,
};
use dressed_core::two::{simulate_ms_gate, MsGateResult, MsSimulation};
use dressed_core::units::{gauss, khz, ms, rad_per_ms, to_khz, us};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::plot::{render_svg, Plot, Series};
use crate::presets::PresetKind;

pub const CSV_HEADER: &str = "sweep_value,noise_marker,F,F2,M,sem,wall_time_s";

/// Marker used in results.csv for runs without classical noise.
pub const NO_NOISE: &str = "none";

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub sweep_value: f64,
    pub noise_marker: String,
    pub f: f64,
    pub f2: f64,
    pub m: f64,
    pub sem: f64,
    pub wall_time_s: f64,
}

/// Everything needed to reproduce a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: ExperimentConfig,
    /// Noise rows as simulated, in rad/s and seconds.
    pub noise: Vec<NoisePreset>,
    pub seed_rule: String,
    pub summary: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
    pub outputs: Vec<String>,
}

#[derive(Debug)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub rows: Vec<ResultRow>,
    pub manifest: Manifest,
}

/// 12 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.11e}")
}

pub fn format_rows(rows: &[ResultRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            num(r.sweep_value),
            r.noise_marker,
            num(r.f),
            num(r.f2),
            num(r.m),
            num(r.sem),
            num(r.wall_time_s)
        );
    }
    s
}

struct Artifacts {
    rows: Vec<ResultRow>,
    extra_csv: Vec<(&'static str, String)>,
    plot: Plot,
    summary: BTreeMap<String, f64>,
    warnings: Vec<String>,
}

/// Runs `cfg` on `workers` threads (rayon's default when `None`) and writes
/// results.csv, plot.svg, manifest.json and any preset-specific tables.
pub fn run_experiment(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<RunOutput> {
    cfg.validate()?;
    let kind = cfg.kind()?;
    let noise: Vec<NoisePreset> = cfg.noise.iter().map(|n| n.resolve()).collect::<Result<_>>()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers.or(cfg.workers) {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().context("starting worker pool")?;
    let art = pool.install(|| match kind {
        PresetKind::MsGate => run_ms_gate(cfg),
        PresetKind::RegimeReport => run_regimes(cfg),
        _ => run_single(cfg, kind, &noise),
    })?;

    let dir = cfg.out.clone();
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut outputs = Vec::new();
    let mut write = |name: &str, body: &str| -> Result<()> {
        std::fs::write(dir.join(name), body).with_context(|| format!("writing {}", dir.join(name).display()))?;
        outputs.push(name.to_string());
        Ok(())
    };
    if kind != PresetKind::RegimeReport {
        write("results.csv", &format_rows(&art.rows))?;
    }
    for (name, body) in &art.extra_csv {
        write(name, body)?;
    }
    write("plot.svg", &render_svg(&art.plot))?;
    outputs.push("manifest.json".into());
    let manifest = Manifest {
        tool: "xsim".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        noise,
        seed_rule: "every sweep point and noise row uses base_seed; trajectory j draws the magnetic, dressing and RF \
                    processes from ChaCha8 streams 3j, 3j+1 and 3j+2"
            .into(),
        summary: art.summary,
        warnings: art.warnings,
        outputs,
    };
    let json = serde_json::to_string_pretty(&manifest)? + "\n";
    std::fs::write(dir.join("manifest.json"), json).context("writing manifest.json")?;
    Ok(RunOutput { dir, rows: art.rows, manifest })
}

fn knobs(cfg: &ExperimentConfig) -> ErrorKnobs {
    ErrorKnobs {
        delta_omega_mismatch: khz(cfg.param("delta_omega_mismatch_khz")),
        delta_phi_error: cfg.param("delta_phi_error_rad"),
    }
}

/// Stark σz gate held until the predicted phase reaches `x`.
fn stark_protocol(params: StarkParams, x: f64, min_ratio: f64) -> Result<SingleIonProtocol> {
    let (fields, shift) = stark_sigmaz_fields(params, min_ratio)?;
    let rate = params.phase_rate(shift);
    if rate == 0.0 {
        bail!("Stark configuration produces no shift");
    }
    let d = states::dark();
    let z = states::zero_prime();
    let initial = states::combine(&d, ONE, &z, ONE);
    let target = states::combine(&d, ONE, &z, C64::from_polar(1.0, -x * rate.signum()));
    Ok(SingleIonProtocol::fixed(fields, x / rate.abs(), initial, target)?)
}

pub fn single_protocol(cfg: &ExperimentConfig, kind: PresetKind, omega_khz: f64) -> Result<SingleIonProtocol> {
    let omega = khz(omega_khz);
    let p = match kind {
        PresetKind::Fig4Top => SingleIonProtocol::basic_gate(QubitKind::D, omega, khz(cfg.param("omega_g_khz")))?,
        PresetKind::Fig4Middle => {
            SingleIonProtocol::transfer(rad_per_ms(cfg.param("rate_rad_per_ms")), QubitKind::D, omega)?
        }
        PresetKind::Fig4Bottom => {
            SingleIonProtocol::sigma_z(cfg.param("x_rad"), rad_per_ms(cfg.param("rate_rad_per_ms")), omega)?
        }
        PresetKind::DLifetime => SingleIonProtocol::dark_state_hold(omega, ms(cfg.param("horizon_ms")))?,
        PresetKind::StarkZDressed => stark_protocol(
            StarkParams::Dressed { omega, omega_z: khz(cfg.param("omega_z_khz")), delta_z: khz(cfg.param("delta_z_khz")) },
            cfg.param("x_rad"),
            cfg.param("min_ratio"),
        )?,
        PresetKind::StarkZRf => stark_protocol(
            StarkParams::Rf { omega, omega_g: khz(cfg.param("omega_g_khz")), delta: khz(cfg.param("delta_khz")) },
            cfg.param("x_rad"),
            cfg.param("min_ratio"),
        )?,
        PresetKind::MsGate | PresetKind::RegimeReport => bail!("{} is not a single-ion preset", kind.name()),
    };
    Ok(p.with_knobs(knobs(cfg)))
}

fn ensemble_config(cfg: &ExperimentConfig, p: &SingleIonProtocol) -> EnsembleConfig {
    let mut ec = EnsembleConfig::for_schedule(p);
    ec.noise_step = us(cfg.integrator.noise_step_us);
    ec.integrator.dt = match cfg.integrator.dt_us {
        Some(dt) => us(dt),
        None => IntegratorConfig::resolving(p.max_frequency()).dt.min(ec.noise_step),
    };
    ec
}

fn run_single(cfg: &ExperimentConfig, kind: PresetKind, noise: &[NoisePreset]) -> Result<Artifacts> {
    let jobs: Vec<(usize, usize)> =
        (0..cfg.sweep.values.len()).flat_map(|i| (0..noise.len()).map(move |j| (i, j))).collect();
    let record_every = if kind == PresetKind::DLifetime {
        ((cfg.param("record_ms") * 1e3 / cfg.integrator.noise_step_us).round() as usize).max(1)
    } else {
        0
    };
    let results: Vec<(EnsembleResult, f64, f64)> = jobs
        .par_iter()
        .map(|&(i, j)| -> Result<(EnsembleResult, f64, f64)> {
            let value = cfg.sweep.values[i];
            let p = single_protocol(cfg, kind, value).with_context(|| format!("sweep value {value}"))?;
            let mut ec = ensemble_config(cfg, &p);
            ec.record_every = record_every;
            let n = if noise[j].is_noise_free() { 1 } else { cfg.trajectories };
            let start = Instant::now();
            let r = run_ensemble(&p, &noise[j], n, cfg.base_seed, &ec)
                .map_err(|e| anyhow!("{} at {value}: {e}", noise[j].marker))?;
            Ok((r, start.elapsed().as_secs_f64(), p.duration))
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut summary = BTreeMap::new();
    let mut warnings = Vec::new();
    let mut series: BTreeMap<usize, Series> = BTreeMap::new();
    let mut lifetime_csv = String::from("sweep_value,noise_marker,t_ms,F2\n");
    let mut decay_series = Vec::new();
    for (&(i, j), (r, wall, duration)) in jobs.iter().zip(&results) {
        let value = cfg.sweep.values[i];
        let marker = noise[j].marker.clone();
        rows.push(ResultRow {
            sweep_value: value,
            noise_marker: marker.clone(),
            f: r.final_fidelity(),
            f2: r.final_f2(),
            m: r.final_merit(),
            sem: r.sem(),
            wall_time_s: if cfg.record_wall_time { *wall } else { 0.0 },
        });
        summary.insert(format!("duration_ms/{}", num(value)), duration * 1e3);
        if r.max_step_norm_drift > 1e-6 {
            warnings.push(format!("{marker} at {value}: step norm drift {:.2e}", r.max_step_norm_drift));
        }
        series.entry(j).or_insert_with(|| Series { label: marker.clone(), points: Vec::new() }).points.push((value, r.final_merit()));
        if kind == PresetKind::DLifetime {
            let f2: Vec<f64> = r.fidelity_series.iter().map(|f| f * f).collect();
            for (t, v) in r.times.iter().zip(&f2) {
                let _ = writeln!(lifetime_csv, "{},{marker},{},{}", num(value), num(t * 1e3), num(*v));
            }
            decay_series.push(Series {
                label: format!("{marker} {value} kHz"),
                points: r.times.iter().zip(&f2).map(|(t, v)| (t * 1e3, *v)).collect(),
            });
            match fit_lifetime(&r.times, &f2, ms(cfg.param("fit_from_ms"))) {
                Some(fit) => {
                    let key = format!("{marker}/{}", num(value));
                    summary.insert(format!("t1_s/{key}"), fit.t1);
                    summary.insert(format!("t1_low_s/{key}"), fit.t1_low);
                    if fit.t1_high.is_finite() {
                        summary.insert(format!("t1_high_s/{key}"), fit.t1_high);
                    }
                }
                None => warnings.push(format!("{marker} at {value}: no decay to fit")),
            }
        }
    }

    let (plot, extra_csv) = if kind == PresetKind::DLifetime {
        let plot = Plot {
            title: format!("{}: survival of |D>", kind.name()),
            x_label: "t (ms)".into(),
            y_label: "F²".into(),
            log_x: false,
            log_y: false,
            series: decay_series,
        };
        (plot, vec![("lifetime.csv", lifetime_csv)])
    } else {
        let plot = Plot {
            title: kind.name().into(),
            x_label: "Ω / 2π (kHz)".into(),
            y_label: "M = log10(1 − F²)".into(),
            log_x: cfg.sweep.log_axis,
            log_y: false,
            series: series.into_values().collect(),
        };
        (plot, Vec::new())
    };
    Ok(Artifacts { rows, extra_csv, plot, summary, warnings })
}

fn integer_param(cfg: &ExperimentConfig, key: &str, min: usize) -> Result<usize> {
    let v = cfg.param(key);
    if v.fract() != 0.0 || v < min as f64 {
        bail!("{key} must be an integer of at least {min}, got {v}");
    }
    Ok(v as usize)
}

fn run_ms_gate(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let fock_dim = integer_param(cfg, "fock_dim", 2)?;
    let stride = integer_param(cfg, "record_stride", 1)?;
    let t_end = cfg.param("t_end_ms");
    if t_end < 0.0 {
        bail!("t_end_ms must be non-negative (0 runs to the planned gate time)");
    }
    let results: Vec<(MsGateResult, f64)> = cfg
        .sweep
        .values
        .par_iter()
        .map(|&rate| -> Result<(MsGateResult, f64)> {
            let mut sim = MsSimulation::reference(rate);
            sim.trap.fock_dim = fock_dim;
            sim.record_stride = stride;
            if t_end > 0.0 {
                sim.t_end = Some(ms(t_end));
            }
            sim.dt = cfg.integrator.dt_us.map(us);
            let start = Instant::now();
            let r = simulate_ms_gate(&sim).map_err(|e| anyhow!("heating {rate}/s: {e}"))?;
            Ok((r, start.elapsed().as_secs_f64()))
        })
        .collect::<Result<_>>()?;

    let plan = MsSimulation::reference(0.0).plan;
    let mut summary = BTreeMap::from([
        ("gate_time_ms".to_string(), plan.t * 1e3),
        ("q_khz".to_string(), to_khz(plan.q)),
        ("eta".to_string(), plan.eta),
    ]);
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    let mut ts = String::from("heating_rate_per_s,t_us,F2_target,F2_DD,F2_ZZ,re_rho_DD_ZZ,im_rho_DD_ZZ,mean_phonons\n");
    let mut series = Vec::new();
    for (&rate, (r, wall)) in cfg.sweep.values.iter().zip(&results) {
        let f2 = r.final_f2();
        rows.push(ResultRow {
            sweep_value: rate,
            noise_marker: NO_NOISE.into(),
            f: f2.max(0.0).sqrt(),
            f2,
            m: merit_from_squared(f2, MERIT_FLOOR),
            sem: 0.0,
            wall_time_s: if cfg.record_wall_time { *wall } else { 0.0 },
        });
        let key = num(rate);
        summary.insert(format!("dt_s/{key}"), r.dt);
        summary.insert(format!("max_top_population/{key}"), r.max_top_population);
        summary.insert(format!("max_trace_error/{key}"), r.max_trace_error);
        summary.insert(format!("min_eigenvalue/{key}"), r.min_eigenvalue);
        if r.saturated {
            warnings.push(format!(
                "heating {rate}/s: top Fock level reached population {:.2e}; raise fock_dim",
                r.max_top_population
            ));
        }
        for k in 0..r.times.len() {
            let (re, im) = r.rho_dd_zz[k];
            let _ = writeln!(
                ts,
                "{},{},{},{},{},{},{},{}",
                num(rate),
                num(r.times[k] * 1e6),
                num(r.f2_target[k]),
                num(r.f2_dd[k]),
                num(r.f2_zz[k]),
                num(re),
                num(im),
                num(r.mean_phonons[k])
            );
        }
        series.push(Series {
            label: format!("{rate} /s"),
            points: r.times.iter().zip(&r.f2_target).map(|(t, f)| (t * 1e6, *f)).collect(),
        });
    }
    let plot = Plot {
        title: "ms-gate: F² of (|DD> + i|0'0'>)/√2".into(),
        x_label: "t (µs)".into(),
        y_label: "F²".into(),
        log_x: false,
        log_y: false,
        series,
    };
    Ok(Artifacts { rows, extra_csv: vec![("timeseries.csv", ts)], plot, summary, warnings })
}

fn regime_name(r: Regime) -> &'static str {
    match r {
        Regime::Linear => "linear",
        Regime::Intermediate => "intermediate",
        Regime::Nonlinear => "nonlinear",
    }
}

fn run_regimes(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let species = IonSpecies::yb171();
    let omega_g = khz(cfg.param("omega_g_khz"));
    let eta = cfg.param("eta");
    let threshold = cfg.param("threshold");
    let omega_z = khz(cfg.param("omega_z_khz"));
    let mut csv = String::from("b_gauss,delta_khz,rf_ratio,sideband_ratio,nonlinear_ratio,field_margin,regime\n");
    let mut warnings = Vec::new();
    let mut gap = Vec::new();
    let mut summary = BTreeMap::new();
    for &b in &cfg.sweep.values {
        let delta = if omega_z == 0.0 {
            zeeman_gap(&species, gauss(b))
        } else {
            dressed_delta(&species, gauss(b), omega_z, khz(cfg.param("delta_z_khz")), khz(cfg.param("omega_khz")), 10.0)
                .map_err(|e| anyhow!("field {b} G: {e}"))?
        };
        let r = classify(omega_g, eta * omega_g, delta, gauss(b), threshold);
        if r.field_margin > 1.0 {
            warnings.push(format!("{b} G exceeds the field limit by a factor {:.2}", r.field_margin));
        }
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            num(b),
            num(to_khz(delta)),
            num(r.rf_ratio),
            num(r.sideband_ratio),
            num(r.nonlinear_ratio),
            num(r.field_margin),
            regime_name(r.regime)
        );
        *summary.entry(format!("points/{}", regime_name(r.regime))).or_insert(0.0) += 1.0;
        gap.push((b, to_khz(delta).abs()));
    }
    let flat = |label: &str, v: f64| Series {
        label: label.into(),
        points: cfg.sweep.values.iter().map(|&b| (b, to_khz(v))).collect(),
    };
    let plot = Plot {
        title: "regime-report: |Δ| against drive strengths".into(),
        x_label: "B (G)".into(),
        y_label: "kHz".into(),
        log_x: cfg.sweep.log_axis,
        log_y: true,
        series: vec![Series { label: "|Δ|".into(), points: gap }, flat("Ωg", omega_g), flat("ηΩg", eta * omega_g)],
    };
    Ok(Artifacts { rows: Vec::new(), extra_csv: vec![("regimes.csv", csv)], plot, summary, warnings })
}

/// Reads a results.csv body back into rows.
pub fn parse_rows(text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        bail!("unexpected results.csv header");
    }
    lines
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                bail!("malformed row {line:?}");
            }
            let p = |s: &str| s.parse::<f64>().with_context(|| format!("number {s:?}"));
            Ok(ResultRow {
                sweep_value: p(f[0])?,
                noise_marker: f[1].to_string(),
                f: p(f[2])?,
                f2: p(f[3])?,
                m: p(f[4])?,
                sem: p(f[5])?,
                wall_time_s: p(f[6])?,
            })
        })
        .collect()
}

pub fn manifest_path(dir: &Path) -> PathBuf {
    dir.join("manifest.json")
}
