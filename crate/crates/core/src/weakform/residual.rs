use std::fmt;

use rayon::prelude::*;

use crate::error::{QhdError, Result};
use crate::grid::{ScalarField, VectorField};
use crate::madelung::HydroState;
use crate::thermo::pressure_unchecked;

use super::quadrature::{describe, simpson_weights, uniform_spacing};
use super::test_fn::{SampledTest, TestFunctionSpec};

/// Pressure law in the momentum equation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Pressure {
    /// `P(rho) = rho`
    Limit,
    /// `P_delta(rho) = rho - delta log(rho + delta)`
    Regularized(f64),
}

impl Pressure {
    fn eval(&self, rho: f64) -> f64 {
        match *self {
            Pressure::Limit => rho,
            Pressure::Regularized(delta) => pressure_unchecked(rho, delta),
        }
    }
}

/// Signed space-time integrals of one weak identity.
///
/// `normalization` is the largest `int int |integrand|` among the terms (including the
/// initial-time term), so the residual stays meaningful when every signed term vanishes.
#[derive(Clone, Debug, PartialEq)]
pub struct WeakResidual {
    pub terms: Vec<f64>,
    pub initial: f64,
    pub residual: f64,
    pub normalization: f64,
}

impl WeakResidual {
    fn assemble(terms: Vec<f64>, abs_terms: &[f64], initial: f64, abs_initial: f64) -> Self {
        let sum: f64 = terms.iter().sum::<f64>() + initial;
        let normalization = abs_terms.iter().copied().fold(abs_initial, f64::max);
        let normalization = if normalization > 0.0 { normalization } else { f64::MIN_POSITIVE };
        Self { residual: sum.abs() / normalization, terms, initial, normalization }
    }

    /// Sum of all signed terms.
    pub fn sum(&self) -> f64 {
        self.terms.iter().sum::<f64>() + self.initial
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ResidualKind {
    Continuity,
    Momentum,
    MollifiedContinuity,
    MollifiedMomentum,
    /// `|<R0, zeta>|`
    RemainderR0,
    /// `|<R1, phi>|`
    RemainderR1,
}

impl fmt::Display for ResidualKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ResidualKind::Continuity => "continuity",
            ResidualKind::Momentum => "momentum",
            ResidualKind::MollifiedContinuity => "mollified_continuity",
            ResidualKind::MollifiedMomentum => "mollified_momentum",
            ResidualKind::RemainderR0 => "remainder_r0",
            ResidualKind::RemainderR1 => "remainder_r1",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResidualEntry {
    pub test_fn_id: String,
    pub kind: ResidualKind,
    pub residual: f64,
    pub normalization: f64,
    pub terms: Vec<f64>,
}

/// Run parameters echoed into every CSV row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunMeta {
    pub n_snapshots: usize,
    pub dt: f64,
    pub n: usize,
    pub delta: f64,
    pub epsilon: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResidualReport {
    pub entries: Vec<ResidualEntry>,
    pub meta: RunMeta,
    pub quadrature: String,
}

impl ResidualReport {
    pub const CSV_HEADER: &'static str = "test_fn_id,kind,residual,normalization,n_snapshots,dt,N,delta,epsilon";

    pub fn of_kind(&self, kind: ResidualKind) -> impl Iterator<Item = &ResidualEntry> {
        self.entries.iter().filter(move |e| e.kind == kind)
    }

    /// Largest residual of `kind`, or 0 if there are none.
    pub fn max_residual(&self, kind: ResidualKind) -> f64 {
        self.of_kind(kind).map(|e| e.residual).fold(0.0, f64::max)
    }

    /// CSV with a header row; floats at 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        let m = &self.meta;
        let eps = m.epsilon.map_or_else(|| "nan".to_string(), |e| format!("{e:.16e}"));
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{:.16e},{:.16e},{},{:.16e},{},{:.16e},{}\n",
                e.test_fn_id, e.kind, e.residual, e.normalization, m.n_snapshots, m.dt, m.n, m.delta, eps
            ));
        }
        out
    }
}

/// Remainder fields entering a mollified identity with a `+` sign.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Remainder<'a> {
    None,
    Scalar(&'a [ScalarField]),
    Vector(&'a [VectorField]),
}

struct Prepared {
    weights: Vec<f64>,
    sampled: SampledTest,
}

fn prepare(snaps: &[HydroState], spec: &TestFunctionSpec) -> Result<Prepared> {
    let times: Vec<f64> = snaps.iter().map(|s| s.time).collect();
    let spacing = uniform_spacing(&times, 5)?;
    let grid = snaps[0].rho.grid();
    for s in snaps {
        grid.check_same(s.rho.grid())?;
    }
    spec.validate(grid, times[times.len() - 1])?;
    Ok(Prepared { weights: simpson_weights(snaps.len(), spacing)?, sampled: spec.sample(grid) })
}

fn check_remainder_len(snaps: &[HydroState], rem: Remainder<'_>) -> Result<()> {
    let len = match rem {
        Remainder::None => return Ok(()),
        Remainder::Scalar(r) => r.len(),
        Remainder::Vector(r) => r.len(),
    };
    if len != snaps.len() {
        return Err(QhdError::MisalignedSnapshots(format!(
            "{} remainder snapshots for {} states",
            len,
            snaps.len()
        )));
    }
    Ok(())
}

/// `int int (rho d_t zeta + J . grad zeta) + int rho_0 zeta(0)`, using the first
/// component of `zeta`.
pub fn continuity_residual(snaps: &[HydroState], zeta: &TestFunctionSpec) -> Result<WeakResidual> {
    continuity_with(snaps, zeta, Remainder::None)
}

pub(crate) fn continuity_with(
    snaps: &[HydroState],
    zeta: &TestFunctionSpec,
    rem: Remainder<'_>,
) -> Result<WeakResidual> {
    let p = prepare(snaps, zeta)?;
    check_remainder_len(snaps, rem)?;
    let grid = snaps[0].rho.grid();
    let dim = grid.dim();
    let dv = grid.cell_volume();
    let s = &p.sampled.value[0];
    let grad = &p.sampled.jacobian[0];
    let n_terms = if matches!(rem, Remainder::None) { 2 } else { 3 };
    let mut terms = vec![0.0; n_terms];
    let mut abs_terms = vec![0.0; n_terms];
    for (i, snap) in snaps.iter().enumerate() {
        let (env, denv) = (zeta.envelope.value(snap.time), zeta.envelope.derivative(snap.time));
        let w = p.weights[i];
        let rho = snap.rho.values();
        let (mut a, mut a_abs, mut b, mut b_abs) = (0.0, 0.0, 0.0, 0.0);
        for x in 0..rho.len() {
            a += rho[x] * s[x];
            a_abs += (rho[x] * s[x]).abs();
            let mut flux = 0.0;
            for j in 0..dim {
                flux += snap.current.component(j)[x] * grad[j][x];
            }
            b += flux;
            b_abs += flux.abs();
        }
        terms[0] += w * denv * a * dv;
        abs_terms[0] += w * denv.abs() * a_abs * dv;
        terms[1] += w * env * b * dv;
        abs_terms[1] += w * env.abs() * b_abs * dv;
        if let Remainder::Scalar(r) = rem {
            let (c, c_abs) = r[i]
                .values()
                .iter()
                .zip(s)
                .fold((0.0, 0.0), |(c, ca), (r, s)| (c + r * s, ca + (r * s).abs()));
            terms[2] += w * env * c * dv;
            abs_terms[2] += w * env.abs() * c_abs * dv;
        }
    }
    let snap0 = &snaps[0];
    let env0 = zeta.envelope.value(snap0.time);
    let (init, init_abs) = snap0
        .rho
        .values()
        .iter()
        .zip(s)
        .fold((0.0, 0.0), |(c, ca), (r, s)| (c + r * s, ca + (r * s).abs()));
    Ok(WeakResidual::assemble(terms, &abs_terms, env0 * init * dv, (env0 * init_abs * dv).abs()))
}

/// `int int (J . d_t phi + Lambda x Lambda : grad phi + P(rho) div phi
///  + hbar^2 grad sqrt rho x grad sqrt rho : grad phi - hbar^2/4 rho Lap div phi) + int J_0 . phi(0)`.
///
/// A scalar spec is used as `zeta e_1`. The five integrals are returned in this order.
pub fn momentum_residual(
    snaps: &[HydroState],
    phi: &TestFunctionSpec,
    pressure: Pressure,
) -> Result<WeakResidual> {
    momentum_with(snaps, phi, pressure, Remainder::None)
}

pub(crate) fn momentum_with(
    snaps: &[HydroState],
    phi: &TestFunctionSpec,
    pressure: Pressure,
    rem: Remainder<'_>,
) -> Result<WeakResidual> {
    let p = prepare(snaps, phi)?;
    check_remainder_len(snaps, rem)?;
    let grid = snaps[0].rho.grid();
    let dim = grid.dim();
    let dv = grid.cell_volume();
    let st = &p.sampled;
    let n_terms = if matches!(rem, Remainder::None) { 5 } else { 6 };
    let mut terms = vec![0.0; n_terms];
    let mut abs_terms = vec![0.0; n_terms];
    let len = grid.len();
    for (i, snap) in snaps.iter().enumerate() {
        let hbar = snap.hbar;
        let (env, denv) = (phi.envelope.value(snap.time), phi.envelope.derivative(snap.time));
        let w = p.weights[i];
        let mut loc = vec![0.0; n_terms];
        let mut loc_abs = vec![0.0; n_terms];
        let rho = snap.rho.values();
        for x in 0..len {
            let mut vals = [0.0; 6];
            for k in 0..dim {
                vals[0] += snap.current.component(k)[x] * st.value[k][x];
                for j in 0..dim {
                    let dphi = st.jacobian[k][j][x];
                    vals[1] += snap.momentum.component(j)[x] * snap.momentum.component(k)[x] * dphi;
                    vals[3] += hbar
                        * hbar
                        * snap.grad_sqrt_rho.component(j)[x]
                        * snap.grad_sqrt_rho.component(k)[x]
                        * dphi;
                }
            }
            vals[2] = pressure.eval(rho[x]) * st.div[x];
            vals[4] = -0.25 * hbar * hbar * rho[x] * st.lap_div[x];
            if let Remainder::Vector(r) = rem {
                for k in 0..dim {
                    vals[5] += r[i].component(k)[x] * st.value[k][x];
                }
            }
            for t in 0..n_terms {
                loc[t] += vals[t];
                loc_abs[t] += vals[t].abs();
            }
        }
        for t in 0..n_terms {
            let factor = if t == 0 { denv } else { env };
            terms[t] += w * factor * loc[t] * dv;
            abs_terms[t] += w * factor.abs() * loc_abs[t] * dv;
        }
    }
    let snap0 = &snaps[0];
    let env0 = phi.envelope.value(snap0.time);
    let (mut init, mut init_abs) = (0.0, 0.0);
    for x in 0..len {
        let v: f64 = (0..dim).map(|k| snap0.current.component(k)[x] * st.value[k][x]).sum();
        init += v;
        init_abs += v.abs();
    }
    Ok(WeakResidual::assemble(terms, &abs_terms, env0 * init * dv, (env0 * init_abs * dv).abs()))
}

/// Continuity and momentum residuals of every spec in `basket`, evaluated concurrently.
pub fn verify_basket(
    snaps: &[HydroState],
    basket: &[TestFunctionSpec],
    pressure: Pressure,
    meta: RunMeta,
) -> Result<ResidualReport> {
    let times: Vec<f64> = snaps.iter().map(|s| s.time).collect();
    let spacing = uniform_spacing(&times, 5)?;
    let entries: Vec<Vec<ResidualEntry>> = basket
        .par_iter()
        .map(|spec| {
            let c = continuity_residual(snaps, spec)?;
            let m = momentum_residual(snaps, spec, pressure)?;
            Ok(vec![
                ResidualEntry {
                    test_fn_id: spec.id.clone(),
                    kind: ResidualKind::Continuity,
                    residual: c.residual,
                    normalization: c.normalization,
                    terms: c.terms,
                },
                ResidualEntry {
                    test_fn_id: spec.id.clone(),
                    kind: ResidualKind::Momentum,
                    residual: m.residual,
                    normalization: m.normalization,
                    terms: m.terms,
                },
            ])
        })
        .collect::<Result<_>>()?;
    Ok(ResidualReport {
        entries: entries.into_iter().flatten().collect(),
        meta,
        quadrature: describe(snaps.len(), spacing),
    })
}

/// `sum_i w_i env(t_i) int r_i S` over the snapshot times.
pub(crate) fn pair_scalar(
    fields: &[ScalarField],
    times: &[f64],
    spec: &TestFunctionSpec,
) -> Result<f64> {
    let spacing = uniform_spacing(times, 4)?;
    let w = simpson_weights(times.len(), spacing)?;
    let grid = fields[0].grid();
    let s = spec.sample(grid);
    let dv = grid.cell_volume();
    Ok(fields
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let inner: f64 = f.values().iter().zip(&s.value[0]).map(|(a, b)| a * b).sum();
            w[i] * spec.envelope.value(times[i]) * inner * dv
        })
        .sum())
}

/// `sum_i w_i env(t_i) int r_i . phi` over the snapshot times.
pub(crate) fn pair_vector(
    fields: &[VectorField],
    times: &[f64],
    spec: &TestFunctionSpec,
) -> Result<f64> {
    let spacing = uniform_spacing(times, 4)?;
    let w = simpson_weights(times.len(), spacing)?;
    let grid = fields[0].grid();
    let s = spec.sample(grid);
    let dv = grid.cell_volume();
    Ok(fields
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let inner: f64 = (0..grid.dim())
                .map(|k| f.component(k).iter().zip(&s.value[k]).map(|(a, b)| a * b).sum::<f64>())
                .sum();
            w[i] * spec.envelope.value(times[i]) * inner * dv
        })
        .sum())
}
