//! Pointwise thermodynamics of the isothermal fluid and the scalar inequalities
//! behind the energy and uniqueness arguments.
//!
//! `0 * log 0 = 0` wherever a density vanishes.

use num_complex::Complex64;

use crate::error::{QhdError, Result};
use crate::grid::ScalarField;

/// `-1/e`, the minimum of `rho log rho` on `[0, inf)`.
pub const ENTROPY_MIN: f64 = -1.0 / std::f64::consts::E;

/// Regularization offset and scaled Planck constant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThermoParams {
    pub delta: f64,
    pub hbar: f64,
}

impl ThermoParams {
    pub fn new(delta: f64, hbar: f64) -> Result<Self> {
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(QhdError::InvalidArgument(format!("delta must be >= 0, got {delta}")));
        }
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(QhdError::InvalidArgument(format!("hbar must be > 0, got {hbar}")));
        }
        Ok(Self { delta, hbar })
    }

    /// Parameters usable by the time integrator (`delta > 0`).
    pub fn for_dynamics(delta: f64, hbar: f64) -> Result<Self> {
        let p = Self::new(delta, hbar)?;
        if delta <= 0.0 {
            return Err(QhdError::NonPositiveDelta(delta));
        }
        Ok(p)
    }
}

fn check_density(rho: f64) -> Result<()> {
    if rho < 0.0 || rho.is_nan() {
        Err(QhdError::NegativeDensity(rho))
    } else {
        Ok(())
    }
}

/// `x log x` with the vacuum convention.
#[inline]
pub fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// `f_delta(rho) = (rho + delta) log(rho + delta)`.
pub fn f_delta(rho: f64, delta: f64) -> Result<f64> {
    check_density(rho)?;
    check_density(delta)?;
    Ok(xlogx(rho + delta))
}

/// `f_delta'(rho) = log(rho + delta) + 1`.
pub fn f_delta_prime(rho: f64, delta: f64) -> Result<f64> {
    check_density(rho)?;
    check_density(delta)?;
    Ok((rho + delta).ln() + 1.0)
}

/// `P_delta(rho) = rho f_delta'(rho) - f_delta(rho) = rho - delta log(rho + delta)`.
pub fn p_delta(rho: f64, delta: f64) -> Result<f64> {
    check_density(rho)?;
    check_density(delta)?;
    Ok(pressure_unchecked(rho, delta))
}

#[inline]
pub(crate) fn pressure_unchecked(rho: f64, delta: f64) -> f64 {
    if delta == 0.0 {
        rho
    } else {
        rho - delta * (rho + delta).ln()
    }
}

/// `rho log rho`, the limit internal energy density.
pub fn entropy_density(rho: f64) -> Result<f64> {
    check_density(rho)?;
    Ok(xlogx(rho))
}

/// True iff `min rho log rho >= -1/e - 1e-12` over the field.
pub fn entropy_min_check(rho: &ScalarField) -> Result<bool> {
    let mut min = f64::INFINITY;
    for &r in rho.values() {
        min = min.min(entropy_density(r)?);
    }
    Ok(min >= ENTROPY_MIN - 1e-12)
}

/// `F_delta(z) = (log(|z|^2 + delta) + 1) z`.
///
/// At `delta = 0` the vacuum value `F(0) = 0` is used.
#[inline]
pub fn big_f_delta(z: Complex64, delta: f64) -> Complex64 {
    let s = z.norm_sqr() + delta;
    if s == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    z * (s.ln() + 1.0)
}

#[inline]
fn z_log_modsq(z: Complex64) -> Complex64 {
    let r = z.norm_sqr();
    if r == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        z * r.ln()
    }
}

/// Supremum of [`haraux_ratio`] over the disk `|z| <= 10`, measured by dense sampling
/// (approached as `z2 -> z1`).
pub const HARAUX_CONSTANT: f64 = 1.0;

/// Supremum of [`lipschitz_ratio`] over `|z| <= 10`, `delta` in `[1e-6, 1e-1]`, measured
/// by dense sampling (attained at `|z| = 10`, `delta = 0.1`); numerically just above `ln 10`.
#[allow(clippy::approx_constant)]
pub const LIPSCHITZ_CONSTANT: f64 = 2.3026;

/// `Im((z2 ln|z2|^2 - z1 ln|z1|^2)(conj z2 - conj z1)) / |z2 - z1|^2`.
pub fn haraux_ratio(z1: Complex64, z2: Complex64) -> Result<f64> {
    let diff = z2 - z1;
    let denom = diff.norm_sqr();
    if denom == 0.0 {
        return Err(QhdError::CoincidentPoints);
    }
    let num = ((z_log_modsq(z2) - z_log_modsq(z1)) * diff.conj()).im;
    Ok(num / denom)
}

/// `|F_delta(z1) - F_delta(z2)| / ((1 + |log delta|) |z1 - z2|)`.
pub fn lipschitz_ratio(z1: Complex64, z2: Complex64, delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(QhdError::NonPositiveDelta(delta));
    }
    let diff = (z1 - z2).norm();
    if diff == 0.0 {
        return Err(QhdError::CoincidentPoints);
    }
    let num = (big_f_delta(z1, delta) - big_f_delta(z2, delta)).norm();
    Ok(num / ((1.0 + delta.ln().abs()) * diff))
}
