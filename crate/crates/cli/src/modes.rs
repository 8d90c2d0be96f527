use std::f64::consts::{E, PI};
use std::time::Instant;

use num_complex::Complex64;
use qhd_core::continuation::{delta_sweep, RungOutcome};
use qhd_core::grid::random_band_limited;
use qhd_core::io::{self, fmt_f64, series_row, state_series_row, SERIES_HEADER};
use qhd_core::log_nls::{evolve, plane_wave};
use qhd_core::madelung::{bohm_identity_residual, observables, observables_default, quadratic_identity_residual};
use qhd_core::thermo::{entropy_density, haraux_ratio, lipschitz_ratio, HARAUX_CONSTANT, LIPSCHITZ_CONSTANT};
use qhd_core::weakform::{
    default_basket, mollified_system_residual, verify_basket, MollifierSpec, Pressure, RunMeta,
};
use qhd_core::{ComplexField, HydroState, QhdError, ThermoParams, WaveState};
use rayon::prelude::*;

use crate::config::{Basket, Initial, Mode, RunConfig};
use crate::error::CliError;
use crate::output::{sha256_hex, Outputs};

/// How a mode finished.
#[derive(Clone, Debug, PartialEq)]
pub enum Status {
    Ok,
    /// The blow-up guard tripped (or a sweep rung failed).
    Aborted { step: Option<usize>, reason: String },
}

impl Status {
    pub fn exit_code(&self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Aborted { .. } => 2,
        }
    }
}

type Notes = Vec<(&'static str, String)>;

/// Runs the configured mode, writes every output plus `manifest.txt`, and returns the
/// process exit code.
pub fn execute(cfg: &RunConfig) -> Result<i32, CliError> {
    let start = Instant::now();
    let mut out = Outputs::create(&cfg.output)?;
    let config_text = cfg.to_text();
    out.write("config.txt", config_text.as_bytes())?;
    let mut notes = Notes::new();
    let status = match cfg.mode {
        Mode::Run => run(cfg, &mut out, &mut notes)?,
        Mode::Sweep => sweep(cfg, &mut out, &mut notes)?,
        Mode::Verify => verify(cfg, &mut out, &mut notes)?,
        Mode::Identities => identities(cfg, &mut out, &mut notes)?,
    };
    let mut header: Notes = vec![
        ("version", env!("CARGO_PKG_VERSION").to_string()),
        ("mode", cfg.mode.to_string()),
        ("config_sha256", sha256_hex(config_text.as_bytes())),
        ("threads", rayon::current_num_threads().to_string()),
    ];
    match &status {
        Status::Ok => header.push(("status", "ok".into())),
        Status::Aborted { step, reason } => {
            header.push(("status", "aborted".into()));
            if let Some(step) = step {
                header.push(("abort_step", step.to_string()));
            }
            header.push(("abort_reason", reason.clone()));
        }
    }
    header.extend(notes);
    out.write_manifest(&header, start.elapsed())?;
    Ok(status.exit_code())
}

fn initial_data(cfg: &RunConfig, params: ThermoParams) -> Result<ComplexField, CliError> {
    let grid = cfg.grid();
    Ok(match cfg.initial {
        Initial::Random => random_band_limited(&grid, cfg.seed, cfg.max_mode, cfg.decay)?
            .scale(Complex64::new(cfg.amplitude, 0.0)),
        Initial::PlaneWave => plane_wave(&grid, cfg.amplitude, [1, 0, 0], params, 0.0),
    })
}

fn hydro(cfg: &RunConfig, state: &WaveState) -> HydroState {
    match cfg.eps_vac {
        Some(eps) => observables(state, eps),
        None => observables_default(state),
    }
}

fn csv(rows: Vec<String>) -> Vec<u8> {
    let mut text = rows.join("\n");
    text.push('\n');
    text.into_bytes()
}

fn dump_state(out: &mut Outputs, rel: &str, state: &WaveState) -> Result<(), CliError> {
    let mut buf = Vec::new();
    io::write_field(&mut buf, state)?;
    out.write(rel, &buf)
}

fn dump_hydro(out: &mut Outputs, rel: &str, h: &HydroState, delta: f64) -> Result<(), CliError> {
    let mut buf = Vec::new();
    io::write_hydro(&mut buf, h, delta)?;
    out.write(rel, &buf)
}

/// Evolves from the configured initial data, recording the series and (optionally) every
/// snapshot. Aborts are returned as a status, not an error.
fn simulate(
    cfg: &RunConfig,
    out: &mut Outputs,
    keep: bool,
) -> Result<(WaveState, Vec<WaveState>, Option<WaveState>, Status), CliError> {
    let params = ThermoParams::for_dynamics(cfg.delta, cfg.hbar)?;
    let start = WaveState::new(initial_data(cfg, params)?, 0.0, params)?;
    let mut rows = vec![SERIES_HEADER.to_string()];
    let mut snaps = Vec::new();
    let result = evolve(&start, &cfg.solver(), |s| {
        rows.push(state_series_row(s.state, &s.energy));
        if keep {
            snaps.push(s.state.clone());
        }
    });
    out.write("series.csv", &csv(rows))?;
    match result {
        Ok(end) => Ok((start, snaps, Some(end), Status::Ok)),
        Err(QhdError::NumericAbort { step, reason, .. }) => {
            Ok((start, snaps, None, Status::Aborted { step: Some(step), reason }))
        }
        Err(e) => Err(e.into()),
    }
}

fn run(cfg: &RunConfig, out: &mut Outputs, _notes: &mut Notes) -> Result<Status, CliError> {
    let (start, _, end, status) = simulate(cfg, out, false)?;
    dump_state(out, "initial.qhdf", &start)?;
    if let Some(end) = end {
        dump_state(out, "final.qhdf", &end)?;
        dump_hydro(out, "final_hydro.qhdf", &hydro(cfg, &end), cfg.delta)?;
    }
    Ok(status)
}

fn sweep(cfg: &RunConfig, out: &mut Outputs, notes: &mut Notes) -> Result<Status, CliError> {
    let params = ThermoParams::for_dynamics(cfg.delta_ladder[0], cfg.hbar)?;
    let psi0 = initial_data(cfg, params)?;
    let report = delta_sweep(&psi0, &cfg.delta_ladder, cfg.hbar, &cfg.solver())?;
    out.write("continuation.csv", report.to_csv().as_bytes())?;
    let mut failed = Vec::new();
    for (i, outcome) in report.outcomes.iter().enumerate() {
        match outcome {
            RungOutcome::Done(run) => {
                let dir = format!("rung_{i}_delta_{:?}", run.delta);
                let mut rows = vec![SERIES_HEADER.to_string()];
                rows.extend(
                    run.samples.iter().map(|s| series_row(s.time, &s.energy, s.min_rho, s.max_rho)),
                );
                out.write(format!("{dir}/series.csv"), &csv(rows))?;
                dump_state(out, &format!("{dir}/final.qhdf"), &run.final_state)?;
            }
            RungOutcome::Failed { delta, error } => {
                let dir = format!("rung_{i}_delta_{delta:?}");
                out.write(format!("{dir}/error.txt"), format!("{error}\n").as_bytes())?;
                failed.push(format!("{delta:?}"));
            }
        }
    }
    notes.push(("mass_spread", fmt_f64(report.mass_spread())));
    if failed.is_empty() {
        Ok(Status::Ok)
    } else {
        notes.push(("failed_rungs", failed.join(",")));
        Ok(Status::Aborted { step: None, reason: format!("{} rung(s) failed", failed.len()) })
    }
}

fn verify(cfg: &RunConfig, out: &mut Outputs, notes: &mut Notes) -> Result<Status, CliError> {
    let (_, states, end, status) = simulate(cfg, out, true)?;
    if end.is_none() {
        return Ok(status);
    }
    let keep = |vector: bool| cfg.basket == Basket::Default || !vector;
    let basket: Vec<_> = default_basket(cfg.d, 0.0, cfg.t_final).into_iter().filter(|s| keep(s.vector)).collect();
    let snaps: Vec<HydroState> = states.iter().map(|s| hydro(cfg, s)).collect();
    let meta = RunMeta { n_snapshots: snaps.len(), dt: cfg.dt, n: cfg.n, delta: cfg.delta, epsilon: None };
    let plain = verify_basket(&snaps, &basket, Pressure::Regularized(cfg.delta), meta)?;
    let mut moll = mollified_system_residual(&states, MollifierSpec::new(cfg.epsilon)?, None, None, cfg.dt)?;
    let window_basket = default_basket(cfg.d, moll.window.0, moll.window.1);
    moll.report
        .entries
        .retain(|e| window_basket.iter().any(|s| s.id == e.test_fn_id && keep(s.vector)));
    let mut text = plain.to_csv();
    text.extend(moll.report.to_csv().lines().skip(1).map(|l| format!("{l}\n")));
    out.write("residuals.csv", text.as_bytes())?;
    notes.push(("quadrature", plain.quadrature.clone()));
    notes.push(("mollified_quadrature", moll.report.quadrature.clone()));
    notes.push(("mollified_window", format!("{:?},{:?}", moll.window.0, moll.window.1)));
    notes.push(("commutator_l2_window", fmt_f64(moll.g_norm_window)));
    Ok(Status::Ok)
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut x = 0.0;
    while i > 0 {
        f /= base as f64;
        x += f * (i % base) as f64;
        i /= base;
    }
    x
}

/// Quasi-random pair in the disk `|z| <= 10` (Halton bases 2, 3, 5, 7).
fn halton_pair(i: u64) -> (Complex64, Complex64) {
    let point = |u: f64, v: f64| Complex64::from_polar(10.0 * u.sqrt(), 2.0 * PI * v);
    (
        point(radical_inverse(i, 2), radical_inverse(i, 3)),
        point(radical_inverse(i, 5), radical_inverse(i, 7)),
    )
}

struct Row {
    suite: &'static str,
    case: String,
    value: f64,
    relation: &'static str,
    bound: f64,
}

impl Row {
    fn pass(&self) -> bool {
        match self.relation {
            "<=" => self.value <= self.bound,
            _ => self.value >= self.bound,
        }
    }
}

fn identities(cfg: &RunConfig, out: &mut Outputs, notes: &mut Notes) -> Result<Status, CliError> {
    let (_, states, _, status) = simulate(cfg, out, true)?;
    let mut rows = Vec::new();

    let quad = states
        .par_iter()
        .map(|s| quadratic_identity_residual(s, &hydro(cfg, s)))
        .reduce(|| 0.0, f64::max);
    rows.push(Row { suite: "quadratic", case: "max_over_snapshots".into(), value: quad, relation: "<=", bound: 1e-12 });

    let grid = cfg.grid();
    let sqrt_rho = grid.sample_real(|x| (2.0 + (2.0 * PI * x[0]).cos()) / 2.0);
    let bohm = bohm_identity_residual(&sqrt_rho, cfg.hbar, 1e-8)?;
    rows.push(Row { suite: "bohm", case: format!("n={}", cfg.n), value: bohm, relation: "<=", bound: 1e-8 });

    let entropy_min = states
        .iter()
        .flat_map(|s| s.psi.values().iter().map(|z| entropy_density(z.norm_sqr()).unwrap()))
        .fold(f64::INFINITY, f64::min);
    rows.push(Row {
        suite: "entropy",
        case: "min_over_snapshots".into(),
        value: entropy_min,
        relation: ">=",
        bound: -1.0 / E - 1e-12,
    });
    rows.push(Row {
        suite: "entropy",
        case: "scalar_min_error".into(),
        value: (entropy_density(1.0 / E)? + 0.367_879_441_17).abs(),
        relation: "<=",
        bound: 1e-10,
    });

    let first = cfg.seed.wrapping_mul(cfg.samples as u64).wrapping_add(1);
    let indices = first..first + cfg.samples as u64;
    let (sup, violations) = indices
        .clone()
        .into_par_iter()
        .filter_map(|i| {
            let (a, b) = halton_pair(i);
            haraux_ratio(a, b).ok()
        })
        .map(|r| (r, usize::from(r > HARAUX_CONSTANT)))
        .reduce(|| (f64::NEG_INFINITY, 0), |a, b| (a.0.max(b.0), a.1 + b.1));
    rows.push(Row { suite: "haraux", case: "sup".into(), value: sup, relation: "<=", bound: HARAUX_CONSTANT });
    rows.push(Row { suite: "haraux", case: "violations".into(), value: violations as f64, relation: "<=", bound: 0.0 });

    let lip = (1..=6)
        .into_par_iter()
        .flat_map(|j| indices.clone().into_par_iter().map(move |i| (10f64.powi(-j), i)))
        .filter_map(|(delta, i)| {
            let (a, b) = halton_pair(i);
            lipschitz_ratio(a, b, delta).ok()
        })
        .reduce(|| 0.0, f64::max);
    rows.push(Row { suite: "lipschitz", case: "sup_delta_1e-1_to_1e-6".into(), value: lip, relation: "<=", bound: LIPSCHITZ_CONSTANT });

    let failed = rows.iter().filter(|r| !r.pass()).count();
    notes.push(("identity_failures", failed.to_string()));
    let mut lines = vec!["suite,case,value,relation,bound,pass".to_string()];
    lines.extend(rows.iter().map(|r| {
        format!("{},{},{},{},{},{}", r.suite, r.case, fmt_f64(r.value), r.relation, fmt_f64(r.bound), r.pass())
    }));
    out.write("identities.csv", &csv(lines))?;
    Ok(status)
}
