use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{QhdError, Result};
use crate::grid::{spectral_gradient, ComplexField, ScalarField, VectorField};
use crate::log_nls::WaveState;
use crate::madelung::{observables_with_gradient, vacuum_threshold, HydroState};
use crate::thermo::big_f_delta;

use super::mollifier::{Mollifier, MollifierSpec};
use super::quadrature::{describe, simpson_weights, uniform_spacing};
use super::residual::{
    continuity_with, momentum_with, pair_scalar, pair_vector, Pressure, Remainder, ResidualEntry,
    ResidualKind, ResidualReport, RunMeta,
};
use super::test_fn::{default_basket, TestFunctionSpec};

/// `G = eta_eps * F(psi) - F(eta_eps * psi)` along a trajectory.
#[derive(Clone, Debug)]
pub struct Commutator {
    pub psi_eps: Vec<ComplexField>,
    pub g: Vec<ComplexField>,
    pub times: Vec<f64>,
    pub mollifier: Mollifier,
    /// `||G||_{L^2((0,T) x T^d)}` over the whole trajectory.
    pub l2_norm: f64,
    /// The same norm restricted to the interior window.
    pub l2_norm_interior: f64,
}

fn space_time_l2(fields: &[ComplexField], spacing: f64) -> Result<f64> {
    let w = simpson_weights(fields.len(), spacing)?;
    Ok(fields
        .iter()
        .zip(&w)
        .map(|(f, w)| w * f.l2_norm().powi(2))
        .sum::<f64>()
        .sqrt())
}

fn trajectory_times(states: &[WaveState]) -> Result<(Vec<f64>, f64)> {
    let times: Vec<f64> = states.iter().map(|s| s.time).collect();
    let spacing = uniform_spacing(&times, 5)?;
    for s in states {
        states[0].grid().check_same(s.grid())?;
    }
    Ok((times, spacing))
}

/// Commutator for `F_delta`, `delta > 0`.
pub fn commutator_g(states: &[WaveState], delta: f64, spec: MollifierSpec) -> Result<Commutator> {
    if !(delta > 0.0) {
        return Err(QhdError::NonPositiveDelta(delta));
    }
    commutator_with(states, spec, |z| big_f_delta(z, delta))
}

/// Commutator for an arbitrary pointwise nonlinearity.
pub fn commutator_with(
    states: &[WaveState],
    spec: MollifierSpec,
    f: impl Fn(Complex64) -> Complex64 + Sync,
) -> Result<Commutator> {
    let (times, spacing) = trajectory_times(states)?;
    let mollifier = Mollifier::new(states[0].grid(), spacing, spec)?;
    let psi: Vec<ComplexField> = states.iter().map(|s| s.psi.clone()).collect();
    let f_psi: Vec<ComplexField> = psi.iter().map(|p| p.map(&f)).collect();
    let psi_eps = mollifier.mollify(&psi)?;
    let moll_f = mollifier.mollify(&f_psi)?;
    let g: Vec<ComplexField> = moll_f
        .iter()
        .zip(&psi_eps)
        .map(|(a, pe)| a.sub(&pe.map(&f)))
        .collect::<Result<_>>()?;
    let l2_norm = space_time_l2(&g, spacing)?;
    let interior = mollifier.interior(g.len());
    let l2_norm_interior = if interior.len() >= 4 {
        space_time_l2(&g[interior], spacing)?
    } else {
        f64::NAN
    };
    Ok(Commutator { psi_eps, g, times, mollifier, l2_norm, l2_norm_interior })
}

/// `R0 = (2/hbar) Im(conj(psi_eps) G)` and `R1 = Re(G grad conj(psi_eps) - conj(psi_eps) grad G)`.
pub fn remainders(
    psi_eps: &[ComplexField],
    g: &[ComplexField],
    hbar: f64,
) -> Result<(Vec<ScalarField>, Vec<VectorField>)> {
    if psi_eps.len() != g.len() {
        return Err(QhdError::MisalignedSnapshots(format!(
            "{} mollified states but {} commutator snapshots",
            psi_eps.len(),
            g.len()
        )));
    }
    let mut r0 = Vec::with_capacity(g.len());
    let mut r1 = Vec::with_capacity(g.len());
    for (p, gi) in psi_eps.iter().zip(g) {
        p.grid().check_same(gi.grid())?;
        let grid = p.grid().clone();
        r0.push(ScalarField::from_raw(
            grid.clone(),
            p.values().iter().zip(gi.values()).map(|(a, b)| 2.0 / hbar * (a.conj() * b).im).collect(),
        ));
        let gp = spectral_gradient(p);
        let gg = spectral_gradient(gi);
        let comps = (0..grid.dim())
            .map(|j| {
                (0..grid.len())
                    .map(|x| {
                        let (pv, gv) = (p.values()[x], gi.values()[x]);
                        (gv * gp[j].values()[x].conj() - pv.conj() * gg[j].values()[x]).re
                    })
                    .collect()
            })
            .collect();
        r1.push(VectorField::from_raw(grid, comps));
    }
    Ok((r0, r1))
}

/// `<R0, zeta>` over the given snapshot times (Simpson in time, spectral in space).
pub fn pair_r0(r0: &[ScalarField], times: &[f64], zeta: &TestFunctionSpec) -> Result<f64> {
    check_pairing(r0.len(), times.len())?;
    pair_scalar(r0, times, zeta)
}

/// `<R1, phi>` over the given snapshot times; scalar specs act as `zeta e_1`.
pub fn pair_r1(r1: &[VectorField], times: &[f64], phi: &TestFunctionSpec) -> Result<f64> {
    check_pairing(r1.len(), times.len())?;
    pair_vector(r1, times, phi)
}

fn check_pairing(fields: usize, times: usize) -> Result<()> {
    if fields != times || fields == 0 {
        return Err(QhdError::MisalignedSnapshots(format!("{fields} fields for {times} times")));
    }
    Ok(())
}

/// Mollified identities and remainder pairings of one trajectory.
#[derive(Clone, Debug)]
pub struct MollifiedReport {
    pub report: ResidualReport,
    /// `||G||` over the whole trajectory (includes the zero-extension jumps at 0 and T).
    pub g_norm: f64,
    /// `||G||` over the evaluation window.
    pub g_norm_window: f64,
    /// Window `[t_lo, t_hi]` on which the identities are evaluated.
    pub window: (f64, f64),
}

impl MollifiedReport {
    /// `max |<R0, zeta>|` over the basket.
    pub fn max_r0(&self) -> f64 {
        self.report.max_residual(ResidualKind::RemainderR0)
    }

    /// `max |<R1, phi>|` over the basket.
    pub fn max_r1(&self) -> f64 {
        self.report.max_residual(ResidualKind::RemainderR1)
    }
}

/// Mollifies a trajectory, forms `G`, `R0`, `R1`, and evaluates the mollified weak
/// continuity and momentum identities with `P_delta` on the interior window
/// `[window.0, window.1]` (defaults to the mollifier's interior). The basket defaults to
/// the six standard functions placed inside the window.
pub fn mollified_system_residual(
    states: &[WaveState],
    spec: MollifierSpec,
    window: Option<(f64, f64)>,
    basket: Option<&[TestFunctionSpec]>,
    dt: f64,
) -> Result<MollifiedReport> {
    let params = states[0].params;
    let comm = commutator_g(states, params.delta, spec)?;
    let times = &comm.times;
    let interior = comm.mollifier.interior(times.len());
    if interior.is_empty() {
        return Err(QhdError::TooFewSnapshots { needed: 2 * comm.mollifier.half_width() + 5, got: times.len() });
    }
    let (lo, hi) = match window {
        Some((a, b)) => {
            let lo = times.iter().position(|&t| t >= a - 1e-12).unwrap_or(times.len());
            let hi = times.iter().rposition(|&t| t <= b + 1e-12).map_or(0, |i| i + 1);
            if lo < interior.start || hi > interior.end {
                return Err(QhdError::InvalidArgument(format!(
                    "window [{a}, {b}] leaves the mollifier interior [{}, {}]",
                    times[interior.start],
                    times[interior.end - 1]
                )));
            }
            (lo, hi)
        }
        None => (interior.start, interior.end),
    };
    if hi < lo + 5 {
        return Err(QhdError::TooFewSnapshots { needed: 5, got: hi.saturating_sub(lo) });
    }
    let psi_w = &comm.psi_eps[lo..hi];
    let g_w = &comm.g[lo..hi];
    let t_w = &times[lo..hi];
    let (r0, r1) = remainders(psi_w, g_w, params.hbar)?;
    let hydro: Vec<HydroState> = psi_w
        .iter()
        .zip(t_w)
        .map(|(p, &t)| {
            let grad = spectral_gradient(p);
            let max_rho = p.values().iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
            observables_with_gradient(p, &grad, params.hbar, t, vacuum_threshold(max_rho))
        })
        .collect();
    let (t_lo, t_hi) = (t_w[0], t_w[t_w.len() - 1]);
    let default;
    let basket = match basket {
        Some(b) => b,
        None => {
            default = default_basket(states[0].grid().dim(), t_lo, t_hi);
            &default
        }
    };
    let pressure = Pressure::Regularized(params.delta);
    let entries: Vec<Vec<ResidualEntry>> = basket
        .par_iter()
        .map(|spec| {
            let c = continuity_with(&hydro, spec, Remainder::Scalar(&r0))?;
            let m = momentum_with(&hydro, spec, pressure, Remainder::Vector(&r1))?;
            let p0 = pair_r0(&r0, t_w, spec)?;
            let p1 = pair_r1(&r1, t_w, spec)?;
            let entry = |kind, residual, normalization, terms| ResidualEntry {
                test_fn_id: spec.id.clone(),
                kind,
                residual,
                normalization,
                terms,
            };
            Ok(vec![
                entry(ResidualKind::MollifiedContinuity, c.residual, c.normalization, c.terms),
                entry(ResidualKind::MollifiedMomentum, m.residual, m.normalization, m.terms),
                entry(ResidualKind::RemainderR0, p0.abs(), 1.0, vec![p0]),
                entry(ResidualKind::RemainderR1, p1.abs(), 1.0, vec![p1]),
            ])
        })
        .collect::<Result<_>>()?;
    let spacing = t_w[1] - t_w[0];
    Ok(MollifiedReport {
        report: ResidualReport {
            entries: entries.into_iter().flatten().collect(),
            meta: RunMeta {
                n_snapshots: states.len(),
                dt,
                n: states[0].grid().n(),
                delta: params.delta,
                epsilon: Some(spec.epsilon),
            },
            quadrature: describe(hi - lo, spacing),
        },
        g_norm: comm.l2_norm,
        g_norm_window: space_time_l2(g_w, spacing)?,
        window: (t_lo, t_hi),
    })
}
