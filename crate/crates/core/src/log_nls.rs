//! Strang-split integrator for the regularized logarithmic Schrödinger equation
//!
//! `i hbar psi_t + (hbar^2 / 2) Lap psi = (log(|psi|^2 + delta) + 1) psi`
//!
//! The kinetic flow is a Fourier multiplier and the nonlinear flow is an exact pointwise
//! phase rotation (it preserves `|psi|`), so a step is `K(dt/2) N(dt) K(dt/2)`.

use num_complex::Complex64;

use crate::error::{QhdError, Result};
use crate::grid::{spectral_gradient, ComplexField, TorusGrid};
use crate::madelung::{self, HydroState};
use crate::thermo::{xlogx, ThermoParams};

/// `max |psi|` above which a run is aborted.
pub const BLOWUP_LIMIT: f64 = 1e6;

const HISTORY_LEN: usize = 32;

/// Wave function with its time stamp and physical parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveState {
    pub psi: ComplexField,
    pub time: f64,
    pub params: ThermoParams,
}

impl WaveState {
    pub fn new(psi: ComplexField, time: f64, params: ThermoParams) -> Result<Self> {
        if !psi.is_finite() {
            return Err(QhdError::InvalidArgument("wave function has non-finite samples".into()));
        }
        if !(time.is_finite() && time >= 0.0) {
            return Err(QhdError::InvalidArgument(format!("time must be >= 0, got {time}")));
        }
        Ok(Self { psi, time, params })
    }

    pub fn grid(&self) -> &TorusGrid {
        self.psi.grid()
    }

    /// `int |psi|^2`.
    pub fn mass(&self) -> f64 {
        self.psi.l2_norm().powi(2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_final: f64,
    pub snapshot_stride: usize,
    pub dealias: bool,
}

impl SolverConfig {
    pub fn new(dt: f64, t_final: f64, snapshot_stride: usize) -> Result<Self> {
        let cfg = Self {
            dt,
            t_final,
            snapshot_stride,
            dealias: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_dealias(mut self, dealias: bool) -> Self {
        self.dealias = dealias;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(QhdError::InvalidArgument(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_final.is_finite() && self.t_final > 0.0) {
            return Err(QhdError::InvalidArgument(format!(
                "t_final must be > 0, got {}",
                self.t_final
            )));
        }
        if self.dt > self.t_final * (1.0 + 1e-12) {
            return Err(QhdError::InvalidArgument(format!(
                "dt {} exceeds t_final {}",
                self.dt, self.t_final
            )));
        }
        if self.t_final / self.dt > u32::MAX as f64 {
            return Err(QhdError::InvalidArgument("too many time steps".into()));
        }
        if self.snapshot_stride == 0 {
            return Err(QhdError::InvalidArgument("snapshot_stride must be positive".into()));
        }
        Ok(())
    }

    /// Number of steps; the step actually taken is `t_final / n_steps`.
    pub fn n_steps(&self) -> usize {
        ((self.t_final / self.dt).round() as usize).max(1)
    }

    pub fn step_size(&self) -> f64 {
        self.t_final / self.n_steps() as f64
    }

    /// Step indices at which `evolve` emits a snapshot.
    pub fn snapshot_steps(&self) -> Vec<usize> {
        let n = self.n_steps();
        let mut steps: Vec<usize> = (0..=n).step_by(self.snapshot_stride).collect();
        if *steps.last().unwrap() != n {
            steps.push(n);
        }
        steps
    }
}

/// Energy split of a state.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergyBreakdown {
    /// `hbar^2 / 2 int |grad psi|^2`
    pub kinetic: f64,
    /// `int f_delta(|psi|^2)`
    pub internal: f64,
    pub total: f64,
    pub mass: f64,
    /// `hbar^2 / 2 int |grad sqrt(rho)|^2`
    pub hydro_grad: f64,
    /// `1/2 int |Lambda|^2`
    pub hydro_lambda: f64,
}

/// Energy split of `state`, with its own `delta` in the internal energy.
pub fn energy(state: &WaveState) -> EnergyBreakdown {
    energy_with_delta(state, state.params.delta)
}

/// Energy split of `state` with the internal energy evaluated at `delta`
/// (`delta = 0` gives the limit functional `int rho log rho`).
pub fn energy_with_delta(state: &WaveState, delta: f64) -> EnergyBreakdown {
    let hydro = madelung::observables_default(state);
    energy_from_hydro(state, &hydro, delta)
}

pub(crate) fn energy_from_hydro(state: &WaveState, hydro: &HydroState, delta: f64) -> EnergyBreakdown {
    let grid = state.grid();
    let hbar = state.params.hbar;
    let grad_sq: f64 = spectral_gradient(&state.psi)
        .iter()
        .map(|g| g.l2_norm().powi(2))
        .sum();
    let kinetic = 0.5 * hbar * hbar * grad_sq;
    let internal = grid.integrate(
        &hydro
            .rho
            .values()
            .iter()
            .map(|&r| xlogx(r + delta))
            .collect::<Vec<_>>(),
    );
    let hydro_grad =
        0.5 * hbar * hbar * grid.integrate(hydro.grad_sqrt_rho.norm_sq().values());
    let hydro_lambda = 0.5 * grid.integrate(hydro.momentum.norm_sq().values());
    EnergyBreakdown {
        kinetic,
        internal,
        total: kinetic + internal,
        mass: grid.integrate(hydro.rho.values()),
        hydro_grad,
        hydro_lambda,
    }
}

/// Reusable in-place stepping machinery for one grid and parameter set.
pub struct Stepper {
    grid: TorusGrid,
    params: ThermoParams,
    dt: f64,
    half_kinetic: Vec<Complex64>,
    keep: Option<Vec<bool>>,
}

impl Stepper {
    pub fn new(grid: &TorusGrid, params: ThermoParams, dt: f64, dealias: bool) -> Result<Self> {
        if !(params.delta > 0.0) {
            return Err(QhdError::NonPositiveDelta(params.delta));
        }
        let half_kinetic = kinetic_multiplier(grid, params.hbar, 0.5 * dt);
        let keep = dealias.then(|| {
            let cutoff = (grid.n() / 3) as i64;
            (0..grid.len())
                .map(|i| grid.frequency_vector(i).iter().all(|m| m.abs() <= cutoff))
                .collect()
        });
        Ok(Self {
            grid: grid.clone(),
            params,
            dt,
            half_kinetic,
            keep,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// One Strang step on raw samples.
    pub fn step(&self, psi: &mut [Complex64]) {
        self.grid.forward(psi);
        mul_assign(psi, &self.half_kinetic);
        self.grid.inverse(psi);
        nonlinear_in_place(psi, self.params, self.dt);
        self.grid.forward(psi);
        mul_assign(psi, &self.half_kinetic);
        if let Some(keep) = &self.keep {
            psi.iter_mut()
                .zip(keep)
                .filter(|(_, &k)| !k)
                .for_each(|(z, _)| *z = Complex64::new(0.0, 0.0));
        }
        self.grid.inverse(psi);
    }
}

fn mul_assign(a: &mut [Complex64], b: &[Complex64]) {
    a.iter_mut().zip(b).for_each(|(x, y)| *x *= y);
}

/// `exp(-i hbar |k|^2 tau / 2)` per mode: the free flow over time `tau`.
fn kinetic_multiplier(grid: &TorusGrid, hbar: f64, tau: f64) -> Vec<Complex64> {
    (0..grid.len())
        .map(|i| Complex64::from_polar(1.0, -0.5 * hbar * grid.wavenumber_sq(i) * tau))
        .collect()
}

fn nonlinear_in_place(psi: &mut [Complex64], params: ThermoParams, dt: f64) {
    let rate = dt / params.hbar;
    for z in psi.iter_mut() {
        let phase = -rate * ((z.norm_sqr() + params.delta).ln() + 1.0);
        *z *= Complex64::from_polar(1.0, phase);
    }
}

/// Free flow over `dt / 2`.
pub fn kinetic_halfstep(state: &WaveState, dt: f64) -> WaveState {
    let grid = state.grid();
    let mult = kinetic_multiplier(grid, state.params.hbar, 0.5 * dt);
    let mut buf = state.psi.values().to_vec();
    grid.forward(&mut buf);
    mul_assign(&mut buf, &mult);
    grid.inverse(&mut buf);
    WaveState {
        psi: ComplexField::from_raw(grid.clone(), buf),
        time: state.time,
        params: state.params,
    }
}

/// Exact nonlinear flow over `dt`: `psi -> psi exp(-i dt (log(|psi|^2 + delta) + 1) / hbar)`.
pub fn nonlinear_step(state: &WaveState, dt: f64) -> Result<WaveState> {
    if !(state.params.delta > 0.0) {
        return Err(QhdError::NonPositiveDelta(state.params.delta));
    }
    let mut buf = state.psi.values().to_vec();
    nonlinear_in_place(&mut buf, state.params, dt);
    Ok(WaveState {
        psi: ComplexField::from_raw(state.grid().clone(), buf),
        time: state.time,
        params: state.params,
    })
}

/// `K(dt/2) N(dt) K(dt/2)`, advancing the time stamp by `dt`.
pub fn strang_step(state: &WaveState, dt: f64) -> Result<WaveState> {
    let stepper = Stepper::new(state.grid(), state.params, dt, false)?;
    let mut buf = state.psi.values().to_vec();
    stepper.step(&mut buf);
    Ok(WaveState {
        psi: ComplexField::from_raw(state.grid().clone(), buf),
        time: state.time + dt,
        params: state.params,
    })
}

/// Emitted by [`evolve`].
#[derive(Debug)]
pub struct Snapshot<'a> {
    pub step: usize,
    pub state: &'a WaveState,
    pub energy: EnergyBreakdown,
}

/// Runs `config.n_steps()` Strang steps, emitting a snapshot every `snapshot_stride`
/// steps plus the initial and final states.
pub fn evolve(
    initial: &WaveState,
    config: &SolverConfig,
    mut sink: impl FnMut(&Snapshot<'_>),
) -> Result<WaveState> {
    config.validate()?;
    let n_steps = config.n_steps();
    let dt = config.step_size();
    let stepper = Stepper::new(initial.grid(), initial.params, dt, config.dealias)?;
    let t0 = initial.time;
    let mut state = initial.clone();
    let mut history: Vec<f64> = Vec::with_capacity(HISTORY_LEN);

    let emit = |state: &WaveState, step: usize, sink: &mut dyn FnMut(&Snapshot<'_>)| {
        let energy = energy(state);
        sink(&Snapshot { step, state, energy });
    };
    emit(&state, 0, &mut sink);

    for step in 1..=n_steps {
        stepper.step(state.psi.values_mut());
        state.time = t0 + step as f64 * dt;

        let mut max_abs = 0.0f64;
        let mut finite = true;
        for z in state.psi.values() {
            let a = z.norm();
            if !a.is_finite() {
                finite = false;
                break;
            }
            max_abs = max_abs.max(a);
        }
        if history.len() == HISTORY_LEN {
            history.remove(0);
        }
        history.push(if finite { max_abs } else { f64::NAN });
        if !finite || max_abs > BLOWUP_LIMIT {
            let reason = if finite {
                format!("max |psi| = {max_abs:e} exceeds {BLOWUP_LIMIT:e}")
            } else {
                "non-finite value in psi".to_string()
            };
            return Err(QhdError::NumericAbort {
                step,
                reason,
                max_norm_history: history,
            });
        }
        if step % config.snapshot_stride == 0 || step == n_steps {
            emit(&state, step, &mut sink);
        }
    }
    Ok(state)
}

/// Evolves without collecting snapshots.
pub fn evolve_quiet(initial: &WaveState, config: &SolverConfig) -> Result<WaveState> {
    let stride = config.n_steps();
    let cfg = SolverConfig {
        snapshot_stride: stride,
        ..*config
    };
    evolve(initial, &cfg, |_| {})
}

/// Evolves to `s = config.t_final`, conjugates, evolves to `s` again and conjugates back.
/// Returns the relative `L^2` distance to `psi0`.
pub fn time_reversal_check(
    psi0: &ComplexField,
    params: ThermoParams,
    config: &SolverConfig,
) -> Result<f64> {
    let start = WaveState::new(psi0.clone(), 0.0, params)?;
    let forward = evolve_quiet(&start, config)?;
    let reversed = WaveState::new(forward.psi.conj(), 0.0, params)?;
    let back = evolve_quiet(&reversed, config)?;
    let recovered = back.psi.conj();
    Ok(recovered.sub(psi0)?.l2_norm() / psi0.l2_norm())
}

/// Exact plane-wave solution `A exp(i 2 pi m.x) exp(-i omega t)` with
/// `hbar omega = hbar^2 |2 pi m|^2 / 2 + log(A^2 + delta) + 1`.
pub fn plane_wave(grid: &TorusGrid, amplitude: f64, mode: [i64; 3], params: ThermoParams, t: f64) -> ComplexField {
    let omega = plane_wave_frequency(amplitude, mode, params);
    grid.sample_complex(|x| {
        let phase = 2.0 * std::f64::consts::PI
            * (mode[0] as f64 * x[0] + mode[1] as f64 * x[1] + mode[2] as f64 * x[2]);
        Complex64::from_polar(amplitude, phase - omega * t)
    })
}

pub fn plane_wave_frequency(amplitude: f64, mode: [i64; 3], params: ThermoParams) -> f64 {
    let k_sq: f64 = mode
        .iter()
        .map(|&m| (2.0 * std::f64::consts::PI * m as f64).powi(2))
        .sum();
    let hbar = params.hbar;
    (0.5 * hbar * hbar * k_sq + (amplitude * amplitude + params.delta).ln() + 1.0) / hbar
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::random_band_limited;
    use std::f64::consts::{E, PI};

    fn params(delta: f64) -> ThermoParams {
        ThermoParams::new(delta, 1.0).unwrap()
    }

    #[test]
    fn kinetic_halfstep_leaves_constant() {
        let g = TorusGrid::new(2, 8).unwrap();
        let s = WaveState::new(ComplexField::constant(&g, Complex64::new(0.7, 0.2)), 0.0, params(0.1)).unwrap();
        let out = kinetic_halfstep(&s, 0.3);
        assert!(out.psi.sub(&s.psi).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn kinetic_halfstep_rotates_mode() {
        let g = TorusGrid::new(1, 16).unwrap();
        let psi = g.sample_complex(|x| Complex64::from_polar(1.0, 2.0 * PI * x[0]));
        let s = WaveState::new(psi.clone(), 0.0, params(0.1)).unwrap();
        let out = kinetic_halfstep(&s, 0.01);
        let rot = Complex64::from_polar(1.0, -4.0 * PI * PI * 0.0025);
        for (a, b) in out.psi.values().iter().zip(psi.values()) {
            assert!((a - b * rot).norm() < 1e-14);
        }
    }

    #[test]
    fn kinetic_halfstep_is_unitary() {
        let g = TorusGrid::new(2, 16).unwrap();
        let psi = random_band_limited(&g, 3, 4, 1.5).unwrap();
        let s = WaveState::new(psi, 0.0, params(0.1)).unwrap();
        let out = kinetic_halfstep(&s, 0.05);
        assert!((out.psi.l2_norm() - s.psi.l2_norm()).abs() < 1e-14);
    }

    #[test]
    fn nonlinear_step_global_phase_when_log_is_one() {
        let g = TorusGrid::new(1, 8).unwrap();
        let delta = 0.2;
        let a = (E - delta).sqrt();
        let s = WaveState::new(ComplexField::constant(&g, Complex64::new(a, 0.0)), 0.0, params(delta)).unwrap();
        let dt = 0.01;
        let out = nonlinear_step(&s, dt).unwrap();
        let expect = Complex64::new(a, 0.0) * Complex64::from_polar(1.0, -2.0 * dt);
        for z in out.psi.values() {
            assert!((z - expect).norm() < 1e-15);
        }
    }

    #[test]
    fn nonlinear_step_preserves_modulus() {
        let g = TorusGrid::new(2, 16).unwrap();
        let psi = random_band_limited(&g, 9, 3, 1.0).unwrap();
        let s = WaveState::new(psi, 0.0, params(0.05)).unwrap();
        let out = nonlinear_step(&s, 0.37).unwrap();
        for (a, b) in out.psi.values().iter().zip(s.psi.values()) {
            assert!((a.norm() - b.norm()).abs() <= 1e-15 * b.norm().max(1.0));
        }
    }

    #[test]
    fn nonlinear_step_rejects_zero_delta() {
        let g = TorusGrid::new(1, 8).unwrap();
        let s = WaveState::new(ComplexField::constant(&g, Complex64::new(1.0, 0.0)), 0.0, params(0.0)).unwrap();
        assert!(matches!(nonlinear_step(&s, 0.1), Err(QhdError::NonPositiveDelta(_))));
        assert!(strang_step(&s, 0.1).is_err());
    }

    #[test]
    fn nearly_stationary_constant_with_tiny_delta() {
        let g = TorusGrid::new(1, 8).unwrap();
        let a = (-0.5f64).exp();
        let delta = 1e-12;
        let s = WaveState::new(ComplexField::constant(&g, Complex64::new(a, 0.0)), 0.0, params(delta)).unwrap();
        let out = nonlinear_step(&s, 1.0).unwrap();
        // phase drift is log(1/e + delta) + 1 ~ delta * e
        let drift = (out.psi.values()[0] / Complex64::new(a, 0.0)).arg().abs();
        assert!(drift < 10.0 * delta * E);
    }

    #[test]
    fn stationary_constant_is_fixed_point() {
        let g = TorusGrid::new(2, 8).unwrap();
        let delta = 0.1;
        // log(A^2 + delta) + 1 = 0
        let a = ((-1.0f64).exp() - delta).sqrt();
        let s = WaveState::new(ComplexField::constant(&g, Complex64::new(a, 0.0)), 0.0, params(delta)).unwrap();
        let out = strang_step(&s, 0.01).unwrap();
        assert!(out.psi.sub(&s.psi).unwrap().max_abs() < 1e-13);
        assert!((out.time - 0.01).abs() < 1e-16);
    }

    #[test]
    fn plane_wave_single_step_matches_dispersion() {
        let g = TorusGrid::new(2, 16).unwrap();
        let p = params(0.05);
        let psi0 = plane_wave(&g, 1.0, [1, 0, 0], p, 0.0);
        let s = WaveState::new(psi0, 0.0, p).unwrap();
        let dt = 0.01;
        let out = strang_step(&s, dt).unwrap();
        let exact = plane_wave(&g, 1.0, [1, 0, 0], p, dt);
        assert!(out.psi.sub(&exact).unwrap().l2_norm() < dt.powi(3));
    }

    #[test]
    fn single_mode_dispersion_matches_brute_force_ode() {
        // amplitude of a single mode obeys i hbar c' = (hbar^2 k^2 / 2 + log(A^2 + delta) + 1) c;
        // integrate with RK4 at a tiny step and compare with the closed form
        let p = params(0.05);
        let k_sq = (2.0 * PI).powi(2);
        let rhs = |c: Complex64| -> Complex64 {
            let w = 0.5 * k_sq + (c.norm_sqr() + p.delta).ln() + 1.0;
            Complex64::new(0.0, -w) * c
        };
        let mut c = Complex64::new(1.0, 0.0);
        let h = 1e-4;
        for _ in 0..10_000 {
            let k1 = rhs(c);
            let k2 = rhs(c + k1 * (h / 2.0));
            let k3 = rhs(c + k2 * (h / 2.0));
            let k4 = rhs(c + k3 * h);
            c += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
        let omega = plane_wave_frequency(1.0, [1, 0, 0], p);
        let exact = Complex64::from_polar(1.0, -omega);
        assert!((c - exact).norm() < 1e-9);
    }

    #[test]
    fn evolve_snapshot_count() {
        let g = TorusGrid::new(1, 8).unwrap();
        let s = WaveState::new(ComplexField::constant(&g, Complex64::new(1.0, 0.0)), 0.0, params(0.1)).unwrap();
        let cfg = SolverConfig::new(0.01, 0.1, 5).unwrap();
        let mut times = Vec::new();
        evolve(&s, &cfg, |snap| times.push((snap.step, snap.state.time))).unwrap();
        assert_eq!(times.len(), 3);
        assert_eq!(times.iter().map(|t| t.0).collect::<Vec<_>>(), vec![0, 5, 10]);
        assert!((times[2].1 - 0.1).abs() < 1e-15);
        assert_eq!(cfg.snapshot_steps(), vec![0, 5, 10]);
    }

    #[test]
    fn snapshot_steps_include_final() {
        let cfg = SolverConfig::new(0.1, 1.0, 3).unwrap();
        assert_eq!(cfg.snapshot_steps(), vec![0, 3, 6, 9, 10]);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::new(0.0, 1.0, 1).is_err());
        assert!(SolverConfig::new(2.0, 1.0, 1).is_err());
        assert!(SolverConfig::new(0.1, 1.0, 0).is_err());
        assert!(SolverConfig::new(f64::NAN, 1.0, 1).is_err());
    }

    #[test]
    fn blowup_guard_trips() {
        let g = TorusGrid::new(1, 8).unwrap();
        let s = WaveState::new(ComplexField::constant(&g, Complex64::new(2e6, 0.0)), 0.0, params(0.1)).unwrap();
        let cfg = SolverConfig::new(0.01, 0.05, 1).unwrap();
        match evolve(&s, &cfg, |_| {}) {
            Err(QhdError::NumericAbort { step, max_norm_history, .. }) => {
                assert_eq!(step, 1);
                assert_eq!(max_norm_history.len(), 1);
            }
            other => panic!("expected abort, got {other:?}"),
        }
    }

    #[test]
    fn energy_of_constants() {
        let g = TorusGrid::new(2, 8).unwrap();
        let s = WaveState::new(ComplexField::constant(&g, Complex64::new(1.0, 0.0)), 0.0, params(0.0)).unwrap();
        let e = energy(&s);
        assert_eq!(e.kinetic, 0.0);
        assert!(e.internal.abs() < 1e-16);
        assert!(e.total.abs() < 1e-16);
        let a: f64 = 1.7;
        let s = WaveState::new(ComplexField::constant(&g, Complex64::new(0.0, a)), 0.0, params(0.0)).unwrap();
        let e = energy(&s);
        assert!((e.total - a * a * (a * a).ln()).abs() < 1e-14);
        assert!((e.mass - a * a).abs() < 1e-14);
    }

    #[test]
    fn energy_of_plane_wave() {
        let g = TorusGrid::new(1, 16).unwrap();
        let psi = g.sample_complex(|x| Complex64::from_polar(1.0, 2.0 * PI * x[0]));
        let s = WaveState::new(psi, 0.0, params(0.0)).unwrap();
        let e = energy(&s);
        let two_pi_sq = 2.0 * PI * PI;
        assert!((e.kinetic - two_pi_sq).abs() < 1e-12);
        assert!(e.internal.abs() < 1e-14);
        assert!(e.hydro_grad.abs() < 1e-12);
        assert!((e.hydro_lambda - two_pi_sq).abs() < 1e-12);
    }

    #[test]
    fn time_reversal_of_stationary_data() {
        let g = TorusGrid::new(2, 8).unwrap();
        let p = params(0.1);
        let psi0 = ComplexField::constant(&g, Complex64::new(0.8, 0.1));
        for dt in [0.1, 0.01] {
            let cfg = SolverConfig::new(dt, 0.5, 1).unwrap();
            assert!(time_reversal_check(&psi0, p, &cfg).unwrap() < 1e-12);
        }
    }
}
