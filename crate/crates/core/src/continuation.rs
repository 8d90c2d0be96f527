//! The vanishing-regularization study: one trajectory per `delta` from shared initial
//! data, Cauchy distances between consecutive rungs, and the limit energy functional
//! evaluated along each run.

use rayon::prelude::*;

use crate::error::{QhdError, Result};
use crate::grid::{spectral_gradient, ComplexField};
use crate::log_nls::{energy_from_hydro, evolve, EnergyBreakdown, SolverConfig, WaveState};
use crate::madelung::{
    observables_with_gradient, quadratic_residual_with_gradient, vacuum_threshold, HydroState,
};
use crate::thermo::ThermoParams;
use crate::weakform::simpson_weights;

/// Default ladder, geometric with ratio 2.
pub const DEFAULT_LADDER: [f64; 5] = [0.2, 0.1, 0.05, 0.025, 0.0125];

/// Number of interior comparison times `T/10, ..., 9T/10`.
pub const N_COMPARISON: usize = 9;

/// `||a - b||_{L^2}`.
pub fn l2_distance(a: &ComplexField, b: &ComplexField) -> Result<f64> {
    Ok(a.sub(b)?.l2_norm())
}

/// `(||a - b||^2 + ||grad(a - b)||^2)^(1/2)`.
pub fn h1_distance(a: &ComplexField, b: &ComplexField) -> Result<f64> {
    Ok(a.sub(b)?.h1_norm())
}

/// One diagnostic sample of a rung.
#[derive(Clone, Debug, PartialEq)]
pub struct RungSample {
    pub step: usize,
    pub time: f64,
    /// Energy with the rung's own `delta`.
    pub energy: EnergyBreakdown,
    /// Energy with the limit internal energy `int rho log rho`.
    pub limit_energy: EnergyBreakdown,
    pub quadratic_residual: f64,
    pub min_rho: f64,
    pub max_rho: f64,
}

impl RungSample {
    /// `|int f_delta(rho) - int rho log rho|`.
    pub fn internal_gap(&self) -> f64 {
        (self.energy.internal - self.limit_energy.internal).abs()
    }
}

#[derive(Clone, Debug)]
pub struct RungRun {
    pub delta: f64,
    pub samples: Vec<RungSample>,
    /// States at the comparison times.
    pub comparison: Vec<WaveState>,
    pub final_state: WaveState,
}

impl RungRun {
    fn max_over(&self, f: impl Fn(&RungSample) -> f64) -> f64 {
        self.samples.iter().map(f).fold(0.0, f64::max)
    }

    /// `max_t |E_delta(t) - E_delta(0)| / (1 + |E_delta(0)|)`.
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.samples[0].energy.total;
        self.max_over(|s| (s.energy.total - e0).abs()) / (1.0 + e0.abs())
    }

    /// `max_t |E(t) - E(0)| / (1 + |E(0)|)` for the limit functional.
    pub fn limit_energy_drift(&self) -> f64 {
        let e0 = self.samples[0].limit_energy.total;
        self.max_over(|s| (s.limit_energy.total - e0).abs()) / (1.0 + e0.abs())
    }

    /// `max_t |M(t) - M(0)| / M(0)`.
    pub fn mass_drift(&self) -> f64 {
        let m0 = self.samples[0].energy.mass;
        self.max_over(|s| (s.energy.mass - m0).abs()) / m0
    }

    pub fn max_internal_gap(&self) -> f64 {
        self.max_over(RungSample::internal_gap)
    }

    pub fn max_quadratic_residual(&self) -> f64 {
        self.max_over(|s| s.quadratic_residual)
    }

    pub fn max_density(&self) -> f64 {
        self.samples.iter().map(|s| s.max_rho).fold(0.0, f64::max)
    }

    /// `int_0^T int |grad psi|^2` by Simpson's rule over the samples.
    pub fn kinetic_time_integral(&self) -> Result<f64> {
        let n = self.samples.len();
        let h = self.samples[1].time - self.samples[0].time;
        let w = simpson_weights(n, h)?;
        let hbar = self.final_state.params.hbar;
        Ok(self
            .samples
            .iter()
            .zip(&w)
            .map(|(s, w)| w * 2.0 * s.energy.kinetic / (hbar * hbar))
            .sum())
    }
}

/// Distances between two rungs at the comparison times.
#[derive(Clone, Debug, PartialEq)]
pub struct PairDistances {
    pub delta_coarse: f64,
    pub delta_fine: f64,
    pub l2_per_time: Vec<f64>,
    pub h1_per_time: Vec<f64>,
    /// `L^2(0,T; L^2)` proxy `sqrt(T mean_k d_k^2)`.
    pub l2: f64,
    /// `L^2(0,T; H^1)` proxy.
    pub h1: f64,
    pub sqrt_rho_l2: f64,
    pub lambda_l2: f64,
    pub grad_sqrt_rho_l2: f64,
}

/// Outcome of one rung.
#[derive(Clone, Debug)]
pub enum RungOutcome {
    Done(Box<RungRun>),
    Failed { delta: f64, error: QhdError },
}

#[derive(Clone, Debug)]
pub struct ContinuationReport {
    pub ladder: Vec<f64>,
    pub t_final: f64,
    pub comparison_times: Vec<f64>,
    pub outcomes: Vec<RungOutcome>,
    /// Distances between consecutive successful rungs.
    pub pairs: Vec<PairDistances>,
}

impl ContinuationReport {
    pub const CSV_HEADER: &'static str =
        "delta,pair_l2,pair_h1,sqrt_rho_l2,lambda_l2,energy_drift,internal_gap";

    pub fn runs(&self) -> impl Iterator<Item = &RungRun> {
        self.outcomes.iter().filter_map(|o| match o {
            RungOutcome::Done(r) => Some(r.as_ref()),
            RungOutcome::Failed { .. } => None,
        })
    }

    pub fn failed(&self) -> impl Iterator<Item = (f64, &QhdError)> {
        self.outcomes.iter().filter_map(|o| match o {
            RungOutcome::Failed { delta, error } => Some((*delta, error)),
            RungOutcome::Done(_) => None,
        })
    }

    /// The rung with the smallest successful `delta`.
    pub fn smallest(&self) -> Option<&RungRun> {
        self.runs().last()
    }

    /// Spread `max - min` of the initial masses and of all sampled masses across rungs.
    pub fn mass_spread(&self) -> f64 {
        let masses: Vec<f64> = self.runs().flat_map(|r| r.samples.iter().map(|s| s.energy.mass)).collect();
        let max = masses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = masses.iter().copied().fold(f64::INFINITY, f64::min);
        (max - min) / max
    }

    /// One row per successful rung; pair columns compare with the previous successful
    /// rung (`nan` on the first row). `energy_drift` is the limit-functional drift.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for (i, run) in self.runs().enumerate() {
            let pair = if i == 0 { None } else { self.pairs.get(i - 1) };
            let f = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), |v| format!("{v:.16e}"));
            out.push_str(&format!(
                "{:.16e},{},{},{},{},{:.16e},{:.16e}\n",
                run.delta,
                f(pair.map(|p| p.l2)),
                f(pair.map(|p| p.h1)),
                f(pair.map(|p| p.sqrt_rho_l2)),
                f(pair.map(|p| p.lambda_l2)),
                run.limit_energy_drift(),
                run.max_internal_gap(),
            ));
        }
        out
    }
}

/// Checks that `ladder` is strictly decreasing and positive.
pub fn validate_ladder(ladder: &[f64]) -> Result<()> {
    if ladder.is_empty() {
        return Err(QhdError::InvalidArgument("empty delta ladder".into()));
    }
    if let Some(d) = ladder.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
        return Err(QhdError::InvalidArgument(format!("ladder entries must be > 0, got {d}")));
    }
    if ladder.windows(2).any(|w| w[1] >= w[0]) {
        return Err(QhdError::InvalidArgument(format!(
            "delta ladder must be strictly decreasing: {ladder:?}"
        )));
    }
    Ok(())
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Step indices of the comparison times for `n` steps.
fn comparison_steps(n: usize) -> Vec<usize> {
    (1..=N_COMPARISON).map(|k| ((k * n) as f64 / 10.0).round() as usize).collect()
}

fn sample(state: &WaveState, step: usize) -> RungSample {
    let grad = spectral_gradient(&state.psi);
    let max_rho = state.psi.values().iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
    let hydro = observables_with_gradient(
        &state.psi,
        &grad,
        state.params.hbar,
        state.time,
        vacuum_threshold(max_rho),
    );
    RungSample {
        step,
        time: state.time,
        energy: energy_from_hydro(state, &hydro, state.params.delta),
        limit_energy: energy_from_hydro(state, &hydro, 0.0),
        quadratic_residual: quadratic_residual_with_gradient(&grad, &hydro),
        min_rho: hydro.rho.min(),
        max_rho,
    }
}

/// Evolves one rung, sampling every `config.snapshot_stride` steps and capturing the
/// comparison states.
pub fn run_rung(psi0: &ComplexField, delta: f64, hbar: f64, config: &SolverConfig) -> Result<RungRun> {
    let params = ThermoParams::for_dynamics(delta, hbar)?;
    let start = WaveState::new(psi0.clone(), 0.0, params)?;
    let n = config.n_steps();
    let stride = config.snapshot_stride;
    if !n.is_multiple_of(stride) {
        return Err(QhdError::InvalidArgument(format!(
            "snapshot_stride {stride} must divide the step count {n} for uniform sampling"
        )));
    }
    let targets = comparison_steps(n);
    let step_gcd = targets.iter().fold(stride, |g, &t| gcd(g, t));
    let inner = SolverConfig { snapshot_stride: step_gcd.max(1), ..*config };
    let mut samples = Vec::new();
    let mut comparison = Vec::new();
    let final_state = evolve(&start, &inner, |snap| {
        if snap.step % stride == 0 {
            samples.push(sample(snap.state, snap.step));
        }
        if targets.contains(&snap.step) {
            comparison.push(snap.state.clone());
        }
    })?;
    Ok(RungRun { delta, samples, comparison, final_state })
}

fn hydro_of(state: &WaveState) -> HydroState {
    crate::madelung::observables_default(state)
}

fn pair_distances(a: &RungRun, b: &RungRun, t_final: f64) -> Result<PairDistances> {
    let mut l2_per_time = Vec::with_capacity(N_COMPARISON);
    let mut h1_per_time = Vec::with_capacity(N_COMPARISON);
    let (mut s_sq, mut lam_sq, mut gs_sq) = (0.0, 0.0, 0.0);
    for (sa, sb) in a.comparison.iter().zip(&b.comparison) {
        l2_per_time.push(l2_distance(&sa.psi, &sb.psi)?);
        h1_per_time.push(h1_distance(&sa.psi, &sb.psi)?);
        let (ha, hb) = (hydro_of(sa), hydro_of(sb));
        let grid = sa.grid();
        let diff_sq = |x: &[f64], y: &[f64]| -> f64 {
            grid.integrate(&x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).collect::<Vec<_>>())
        };
        s_sq += diff_sq(ha.sqrt_rho.values(), hb.sqrt_rho.values());
        for j in 0..grid.dim() {
            lam_sq += diff_sq(ha.momentum.component(j), hb.momentum.component(j));
            gs_sq += diff_sq(ha.grad_sqrt_rho.component(j), hb.grad_sqrt_rho.component(j));
        }
    }
    let k = l2_per_time.len() as f64;
    let proxy = |sum_sq: f64| (t_final * sum_sq / k).sqrt();
    Ok(PairDistances {
        delta_coarse: a.delta,
        delta_fine: b.delta,
        l2: proxy(l2_per_time.iter().map(|d| d * d).sum()),
        h1: proxy(h1_per_time.iter().map(|d| d * d).sum()),
        sqrt_rho_l2: proxy(s_sq),
        lambda_l2: proxy(lam_sq),
        grad_sqrt_rho_l2: proxy(gs_sq),
        l2_per_time,
        h1_per_time,
    })
}

/// Runs every rung (concurrently) from `psi0` and measures consecutive-pair distances at
/// `T/10, ..., 9T/10`. Failed rungs are reported and excluded from the pairs.
pub fn delta_sweep(
    psi0: &ComplexField,
    ladder: &[f64],
    hbar: f64,
    config: &SolverConfig,
) -> Result<ContinuationReport> {
    validate_ladder(ladder)?;
    config.validate()?;
    if !(hbar.is_finite() && hbar > 0.0) {
        return Err(QhdError::InvalidArgument(format!("hbar must be > 0, got {hbar}")));
    }
    let n = config.n_steps();
    if !n.is_multiple_of(config.snapshot_stride) {
        return Err(QhdError::InvalidArgument(format!(
            "snapshot_stride {} must divide the step count {n}",
            config.snapshot_stride
        )));
    }
    if n < 10 {
        return Err(QhdError::InvalidArgument("a sweep needs at least 10 time steps".into()));
    }
    let outcomes: Vec<RungOutcome> = ladder
        .par_iter()
        .map(|&delta| match run_rung(psi0, delta, hbar, config) {
            Ok(run) => RungOutcome::Done(Box::new(run)),
            Err(error) => RungOutcome::Failed { delta, error },
        })
        .collect();
    let runs: Vec<&RungRun> = outcomes
        .iter()
        .filter_map(|o| match o {
            RungOutcome::Done(r) => Some(r.as_ref()),
            RungOutcome::Failed { .. } => None,
        })
        .collect();
    let t_final = config.t_final;
    let pairs = runs
        .windows(2)
        .map(|w| pair_distances(w[0], w[1], t_final))
        .collect::<Result<Vec<_>>>()?;
    let steps = comparison_steps(n);
    let dt = config.step_size();
    Ok(ContinuationReport {
        ladder: ladder.to_vec(),
        t_final,
        comparison_times: steps.iter().map(|&s| s as f64 * dt).collect(),
        outcomes,
        pairs,
    })
}

/// `max_t |E(t) - E(0)| / (1 + |E(0)|)` of the limit functional on the smallest-`delta` rung.
pub fn energy_equality_check(report: &ContinuationReport) -> Result<f64> {
    report
        .smallest()
        .map(RungRun::limit_energy_drift)
        .ok_or_else(|| QhdError::InvalidArgument("no successful rung in the report".into()))
}

/// Decay of the kinetic time integrals along the ladder.
#[derive(Clone, Debug, PartialEq)]
pub struct KineticConvergence {
    pub integrals: Vec<f64>,
    /// `|K(delta_{i+1}) - K(delta_i)|`
    pub differences: Vec<f64>,
    /// Least-squares slope of `log difference` against `log delta_i`.
    pub slope: f64,
    /// Set when the differences are not strictly decreasing.
    pub non_monotone: bool,
}

/// Fits the decay of consecutive differences of `int_0^T int |grad psi^delta|^2`.
pub fn kinetic_convergence_check(report: &ContinuationReport) -> Result<KineticConvergence> {
    let runs: Vec<&RungRun> = report.runs().collect();
    if runs.len() < 3 {
        return Err(QhdError::InvalidArgument(format!(
            "kinetic convergence needs >= 3 rungs, got {}",
            runs.len()
        )));
    }
    let integrals = runs.iter().map(|r| r.kinetic_time_integral()).collect::<Result<Vec<_>>>()?;
    let differences: Vec<f64> = integrals.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let xs: Vec<f64> = runs[..runs.len() - 1].iter().map(|r| r.delta.ln()).collect();
    let ys: Vec<f64> = differences.iter().map(|d| d.max(f64::MIN_POSITIVE).ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let non_monotone = differences.windows(2).any(|w| w[1] >= w[0]);
    Ok(KineticConvergence { integrals, differences, slope: sxy / sxx, non_monotone })
}

/// Upper bound `delta (|log delta| + C_run)` for the pointwise internal-energy gap, with
/// `C_run = 1 + |log(max rho + delta)|`.
pub fn internal_gap_bound(delta: f64, max_rho: f64) -> f64 {
    delta * (delta.ln().abs() + 1.0 + (max_rho + delta).ln().abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;
    use crate::thermo::{f_delta, xlogx};
    use num_complex::Complex64;
    use std::f64::consts::PI;

    #[test]
    fn distance_values() {
        let grid = TorusGrid::new(2, 16).unwrap();
        let one = ComplexField::constant(&grid, Complex64::new(1.0, 0.0));
        let zero = ComplexField::zeros(&grid);
        assert_eq!(l2_distance(&one, &one).unwrap(), 0.0);
        assert!((l2_distance(&one, &zero).unwrap() - 1.0).abs() < 1e-14);
        let wave = grid.sample_complex(|x| Complex64::from_polar(1.0, 2.0 * PI * x[0]));
        assert!((l2_distance(&wave, &zero).unwrap() - 1.0).abs() < 1e-14);
        let expected = (1.0 + 4.0 * PI * PI).sqrt();
        assert!((h1_distance(&wave, &zero).unwrap() - expected).abs() < 1e-12);
        let other = ComplexField::zeros(&TorusGrid::new(2, 8).unwrap());
        assert!(l2_distance(&one, &other).is_err());
    }

    #[test]
    fn ladder_validation() {
        assert!(validate_ladder(&DEFAULT_LADDER).is_ok());
        assert!(validate_ladder(&[0.1, 0.1]).is_err());
        assert!(validate_ladder(&[0.1, 0.2]).is_err());
        assert!(validate_ladder(&[0.1, 0.0]).is_err());
        assert!(validate_ladder(&[]).is_err());
    }

    #[test]
    fn comparison_steps_are_interior() {
        assert_eq!(comparison_steps(1000), vec![100, 200, 300, 400, 500, 600, 700, 800, 900]);
        assert_eq!(gcd(5, 100), 5);
        assert_eq!(gcd(7, 100), 1);
    }

    #[test]
    fn internal_gap_bound_holds_pointwise() {
        for delta in [0.2, 0.1, 0.05, 0.025, 0.0125, 1e-4] {
            for i in 0..=1000 {
                let rho = 4.0 * i as f64 / 1000.0;
                let gap = (f_delta(rho, delta).unwrap() - xlogx(rho)).abs();
                assert!(gap <= internal_gap_bound(delta, 4.0), "{delta} {rho}");
            }
        }
    }
}
