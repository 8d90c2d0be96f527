//! Hydrodynamic observables of a wave function through its polar factor.
//!
//! With `psi = sqrt(rho) phi`, `|phi| <= 1`, the vacuum-stable variables are
//! `grad sqrt(rho) = Re(conj(phi) grad psi)` and `Lambda = hbar Im(conj(phi) grad psi)`,
//! and `J = sqrt(rho) Lambda`. `phi` is set to zero on the vacuum set `rho <= eps_vac`.

use num_complex::Complex64;

use crate::error::{QhdError, Result};
use crate::grid::{spectral_gradient, ComplexField, ScalarField, VectorField};
use crate::log_nls::WaveState;

/// Absolute floor of the vacuum threshold.
pub const EPS_VAC_FLOOR: f64 = 1e-300;
/// Vacuum threshold relative to `max rho`.
pub const EPS_VAC_RELATIVE: f64 = 1e-12;

/// Default vacuum threshold `max(1e-12 max rho, 1e-300)`.
pub fn vacuum_threshold(max_rho: f64) -> f64 {
    (EPS_VAC_RELATIVE * max_rho).max(EPS_VAC_FLOOR)
}

#[derive(Clone, Debug, PartialEq)]
pub struct HydroState {
    pub rho: ScalarField,
    pub sqrt_rho: ScalarField,
    pub polar: ComplexField,
    /// `J`
    pub current: VectorField,
    /// `Lambda`
    pub momentum: VectorField,
    pub grad_sqrt_rho: VectorField,
    pub time: f64,
    pub hbar: f64,
    pub eps_vac: f64,
}

/// Observables with the default vacuum threshold.
pub fn observables_default(state: &WaveState) -> HydroState {
    let max_rho = state
        .psi
        .values()
        .iter()
        .map(|z| z.norm_sqr())
        .fold(0.0, f64::max);
    observables(state, vacuum_threshold(max_rho))
}

/// Polar decomposition of `state`. `grad psi` is computed spectrally once and reused.
pub fn observables(state: &WaveState, eps_vac: f64) -> HydroState {
    let grad = spectral_gradient(&state.psi);
    observables_with_gradient(&state.psi, &grad, state.params.hbar, state.time, eps_vac)
}

pub(crate) fn observables_with_gradient(
    psi: &ComplexField,
    grad: &[ComplexField],
    hbar: f64,
    time: f64,
    eps_vac: f64,
) -> HydroState {
    let grid = psi.grid().clone();
    let len = grid.len();
    let dim = grid.dim();
    let mut rho = Vec::with_capacity(len);
    let mut sqrt_rho = Vec::with_capacity(len);
    let mut polar = Vec::with_capacity(len);
    for z in psi.values() {
        let r = z.norm_sqr();
        let s = z.norm();
        rho.push(r);
        sqrt_rho.push(s);
        polar.push(if r > eps_vac { z / s } else { Complex64::new(0.0, 0.0) });
    }
    let mut grad_sqrt_rho = vec![vec![0.0; len]; dim];
    let mut momentum = vec![vec![0.0; len]; dim];
    let mut current = vec![vec![0.0; len]; dim];
    for axis in 0..dim {
        let g = grad[axis].values();
        for i in 0..len {
            let w = polar[i].conj() * g[i];
            grad_sqrt_rho[axis][i] = w.re;
            momentum[axis][i] = hbar * w.im;
            current[axis][i] = sqrt_rho[i] * hbar * w.im;
        }
    }
    HydroState {
        rho: ScalarField::from_raw(grid.clone(), rho),
        sqrt_rho: ScalarField::from_raw(grid.clone(), sqrt_rho),
        polar: ComplexField::from_raw(grid.clone(), polar),
        current: VectorField::from_raw(grid.clone(), current),
        momentum: VectorField::from_raw(grid.clone(), momentum),
        grad_sqrt_rho: VectorField::from_raw(grid, grad_sqrt_rho),
        time,
        hbar,
        eps_vac,
    }
}

/// `J = hbar Im(conj(psi) grad psi)` computed without the polar factor.
pub fn current_direct(state: &WaveState) -> VectorField {
    let grid = state.grid().clone();
    let hbar = state.params.hbar;
    let comps = spectral_gradient(&state.psi)
        .iter()
        .map(|g| {
            state
                .psi
                .values()
                .iter()
                .zip(g.values())
                .map(|(p, dp)| hbar * (p.conj() * dp).im)
                .collect()
        })
        .collect();
    VectorField::from_raw(grid, comps)
}

/// `max |hbar^2 |grad psi|^2 - hbar^2 |grad sqrt rho|^2 - |Lambda|^2| / (1 + hbar^2 |grad psi|^2)`.
pub fn quadratic_identity_residual(state: &WaveState, hydro: &HydroState) -> f64 {
    let grad = spectral_gradient(&state.psi);
    quadratic_residual_with_gradient(&grad, hydro)
}

pub(crate) fn quadratic_residual_with_gradient(grad: &[ComplexField], hydro: &HydroState) -> f64 {
    let h2 = hydro.hbar * hydro.hbar;
    let gs = hydro.grad_sqrt_rho.norm_sq();
    let lam = hydro.momentum.norm_sq();
    let mut worst = 0.0f64;
    for i in 0..gs.values().len() {
        let wave: f64 = grad.iter().map(|g| g.values()[i].norm_sqr()).sum::<f64>() * h2;
        let r = (wave - h2 * gs.values()[i] - lam.values()[i]).abs() / (1.0 + wave);
        worst = worst.max(r);
    }
    worst
}

/// Both assemblies of the kinetic stress tensor.
#[derive(Clone, Debug)]
pub struct StressTensor {
    /// `hbar^2 Re(d_j psi conj(d_k psi))`, row-major `d x d`
    pub wave: Vec<ScalarField>,
    /// `hbar^2 d_j sqrt(rho) d_k sqrt(rho) + Lambda_j Lambda_k`
    pub hydro: Vec<ScalarField>,
    pub dim: usize,
}

impl StressTensor {
    pub fn wave_entry(&self, j: usize, k: usize) -> &ScalarField {
        &self.wave[j * self.dim + k]
    }

    pub fn hydro_entry(&self, j: usize, k: usize) -> &ScalarField {
        &self.hydro[j * self.dim + k]
    }

    /// Max-norm discrepancy between the two assemblies, pointwise relative to
    /// `1 + tr` of the wave assembly (`tr = hbar^2 |grad psi|^2`).
    pub fn residual(&self) -> f64 {
        let len = self.wave[0].values().len();
        let mut worst = 0.0f64;
        for i in 0..len {
            let trace: f64 = (0..self.dim).map(|j| self.wave_entry(j, j).values()[i]).sum();
            for (a, b) in self.wave.iter().zip(&self.hydro) {
                worst = worst.max((a.values()[i] - b.values()[i]).abs() / (1.0 + trace));
            }
        }
        worst
    }
}

pub fn stress_tensor(state: &WaveState, hydro: &HydroState) -> StressTensor {
    let grid = state.grid().clone();
    let dim = grid.dim();
    let h2 = hydro.hbar * hydro.hbar;
    let grad = spectral_gradient(&state.psi);
    let mut wave = Vec::with_capacity(dim * dim);
    let mut hyd = Vec::with_capacity(dim * dim);
    for j in 0..dim {
        for k in 0..dim {
            let w: Vec<f64> = grad[j]
                .values()
                .iter()
                .zip(grad[k].values())
                .map(|(a, b)| h2 * (a * b.conj()).re)
                .collect();
            let gj = hydro.grad_sqrt_rho.component(j);
            let gk = hydro.grad_sqrt_rho.component(k);
            let lj = hydro.momentum.component(j);
            let lk = hydro.momentum.component(k);
            let h: Vec<f64> = (0..grid.len())
                .map(|i| h2 * gj[i] * gk[i] + lj[i] * lk[i])
                .collect();
            wave.push(ScalarField::from_raw(grid.clone(), w));
            hyd.push(ScalarField::from_raw(grid.clone(), h));
        }
    }
    StressTensor { wave, hydro: hyd, dim }
}

/// Sides of the Bohm stress identity
/// `(hbar^2/2) rho grad(Lap s / s) = (hbar^2/4) Lap grad rho - hbar^2 div(grad s (x) grad s)`
/// for `s = sqrt(rho)`.
#[derive(Clone, Debug)]
pub struct BohmSides {
    pub potential_form: VectorField,
    pub stress_form: VectorField,
}

pub fn bohm_sides(sqrt_rho: &ScalarField, hbar: f64, floor: f64) -> Result<BohmSides> {
    let min = sqrt_rho.min();
    if !(min >= floor) {
        return Err(QhdError::VacuumDensity { min, floor });
    }
    let grid = sqrt_rho.grid().clone();
    let dim = grid.dim();
    let h2 = hbar * hbar;
    let s = sqrt_rho.values();
    let rho = sqrt_rho.map(|x| x * x);

    // potential form: pointwise quotient, then gradient
    let lap_s = sqrt_rho.laplacian();
    let quotient = ScalarField::from_raw(
        grid.clone(),
        lap_s.values().iter().zip(s).map(|(l, x)| l / x).collect(),
    );
    let grad_q = quotient.gradient();
    let potential: Vec<Vec<f64>> = (0..dim)
        .map(|a| {
            grad_q
                .component(a)
                .iter()
                .zip(rho.values())
                .map(|(g, r)| 0.5 * h2 * r * g)
                .collect()
        })
        .collect();

    // stress form
    let grad_rho = rho.gradient();
    let grad_s = sqrt_rho.gradient();
    let mut stress = vec![vec![0.0; grid.len()]; dim];
    for i in 0..dim {
        let comp = ScalarField::from_raw(grid.clone(), grad_rho.component(i).to_vec());
        let lap = comp.laplacian();
        let flux = VectorField::from_raw(
            grid.clone(),
            (0..dim)
                .map(|j| {
                    grad_s
                        .component(j)
                        .iter()
                        .zip(grad_s.component(i))
                        .map(|(a, b)| a * b)
                        .collect()
                })
                .collect(),
        );
        let div = flux.divergence();
        for p in 0..grid.len() {
            stress[i][p] = 0.25 * h2 * lap.values()[p] - h2 * div.values()[p];
        }
    }
    Ok(BohmSides {
        potential_form: VectorField::from_raw(grid.clone(), potential),
        stress_form: VectorField::from_raw(grid, stress),
    })
}

/// Relative max-norm discrepancy of the two sides of the Bohm identity.
///
/// The scale is `max(|lhs|_inf, |rhs|_inf, hbar^2 max rho)`, so constant densities give ~0.
pub fn bohm_identity_residual(sqrt_rho: &ScalarField, hbar: f64, floor: f64) -> Result<f64> {
    let sides = bohm_sides(sqrt_rho, hbar, floor)?;
    let max_abs = |v: &VectorField| {
        v.components()
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0f64, |m, x| m.max(x.abs()))
    };
    let diff = sides
        .potential_form
        .components()
        .iter()
        .zip(sides.stress_form.components())
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
        .fold(0.0f64, f64::max);
    let max_rho = sqrt_rho.max().powi(2);
    let scale = max_abs(&sides.potential_form)
        .max(max_abs(&sides.stress_form))
        .max(hbar * hbar * max_rho);
    Ok(diff / scale)
}
