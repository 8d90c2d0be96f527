use std::f64::consts::PI;
use std::ops::Range;

use num_complex::Complex64;

use crate::error::{QhdError, Result};
use crate::grid::{ComplexField, TorusGrid};

/// Space-time mollification scale.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MollifierSpec {
    pub epsilon: f64,
}

impl MollifierSpec {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0 && epsilon <= 0.5) {
            return Err(QhdError::InvalidArgument(format!(
                "mollifier scale must lie in (0, 0.5], got {epsilon}"
            )));
        }
        Ok(Self { epsilon })
    }
}

fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}

/// A product bump `eta_eps(t, x) = eta(t/eps) prod_j eta(x_j/eps)` sampled on the grid and
/// the snapshot lattice, each factor normalized to unit discrete mass.
///
/// Spatial convolution is a Fourier multiplier (the kernel's own discrete transform);
/// the time convolution is a direct sum over snapshots with the trajectory extended by 0.
#[derive(Clone, Debug)]
pub struct Mollifier {
    spec: MollifierSpec,
    grid: TorusGrid,
    /// Discrete transform of the 1D factor, indexed by FFT position.
    transfer_1d: Vec<f64>,
    /// 1D spatial kernel samples (unit discrete mass).
    kernel_1d: Vec<f64>,
    /// Time weights for offsets `-half..=half` snapshots.
    time_weights: Vec<f64>,
    half: usize,
}

impl Mollifier {
    /// Precondition: `eps >= 4h` and `eps >= 4 dt_snapshot`.
    pub fn new(grid: &TorusGrid, snapshot_spacing: f64, spec: MollifierSpec) -> Result<Self> {
        let eps = spec.epsilon;
        let needed = 4.0 * grid.spacing().max(snapshot_spacing);
        if eps < needed * (1.0 - 1e-12) {
            return Err(QhdError::UnresolvedMollifier { epsilon: eps, needed });
        }
        let n = grid.n();
        let h = grid.spacing();
        let offsets: Vec<f64> = (0..n)
            .map(|i| if i <= n / 2 { i as f64 * h } else { (i as f64 - n as f64) * h })
            .collect();
        let mut kernel_1d: Vec<f64> = offsets.iter().map(|&x| bump(x / eps)).collect();
        let mass: f64 = kernel_1d.iter().sum::<f64>() * h;
        kernel_1d.iter_mut().for_each(|w| *w /= mass);
        let transfer_1d = (0..n)
            .map(|i| {
                let m = grid.frequency(i) as f64;
                kernel_1d
                    .iter()
                    .zip(&offsets)
                    .map(|(w, x)| w * (2.0 * PI * m * x).cos())
                    .sum::<f64>()
                    * h
            })
            .collect();
        let half = (eps / snapshot_spacing).floor() as usize;
        let mut time_weights: Vec<f64> = (0..=2 * half)
            .map(|l| bump((l as f64 - half as f64) * snapshot_spacing / eps))
            .collect();
        let tm: f64 = time_weights.iter().sum();
        time_weights.iter_mut().for_each(|w| *w /= tm);
        Ok(Self { spec, grid: grid.clone(), transfer_1d, kernel_1d, time_weights, half })
    }

    pub fn spec(&self) -> MollifierSpec {
        self.spec
    }

    /// Discrete integral of the spatial kernel over the torus.
    pub fn spatial_mass(&self) -> f64 {
        let s: f64 = self.kernel_1d.iter().sum::<f64>() * self.grid.spacing();
        s.powi(self.grid.dim() as i32)
    }

    /// Smallest spatial kernel sample.
    pub fn spatial_min(&self) -> f64 {
        self.kernel_1d.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Sum of the time weights.
    pub fn time_mass(&self) -> f64 {
        self.time_weights.iter().sum()
    }

    /// Number of snapshots on either side covered by the time kernel.
    pub fn half_width(&self) -> usize {
        self.half
    }

    /// Multiplier applied to the Fourier coefficient of mode `freq`.
    pub fn transfer_factor(&self, freq: [i64; 3]) -> f64 {
        let n = self.grid.n() as i64;
        (0..self.grid.dim())
            .map(|j| self.transfer_1d[freq[j].rem_euclid(n) as usize])
            .product()
    }

    fn transfer_flat(&self, flat: usize) -> f64 {
        let idx = self.grid.multi_index(flat);
        (0..self.grid.dim()).map(|j| self.transfer_1d[idx[j]]).product()
    }

    /// Spatial convolution of a single field.
    pub fn mollify_space(&self, field: &ComplexField) -> Result<ComplexField> {
        self.grid.check_same(field.grid())?;
        Ok(field.apply_multiplier(|flat| Complex64::new(self.transfer_flat(flat), 0.0)))
    }

    /// Snapshot indices whose time stencil stays inside the trajectory.
    pub fn interior(&self, n_snapshots: usize) -> Range<usize> {
        if n_snapshots <= 2 * self.half {
            return 0..0;
        }
        self.half..n_snapshots - self.half
    }

    /// Space-time convolution of a uniformly spaced snapshot sequence (extended by 0 in time).
    pub fn mollify(&self, snaps: &[ComplexField]) -> Result<Vec<ComplexField>> {
        let spatial: Vec<ComplexField> =
            snaps.iter().map(|f| self.mollify_space(f)).collect::<Result<_>>()?;
        let len = self.grid.len();
        let m = spatial.len();
        Ok((0..m)
            .map(|i| {
                let mut acc = vec![Complex64::new(0.0, 0.0); len];
                for (l, &w) in self.time_weights.iter().enumerate() {
                    let j = i as i64 + l as i64 - self.half as i64;
                    if j < 0 || j >= m as i64 {
                        continue;
                    }
                    for (a, v) in acc.iter_mut().zip(spatial[j as usize].values()) {
                        *a += w * v;
                    }
                }
                ComplexField::from_raw(self.grid.clone(), acc)
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{derivative, random_band_limited};

    #[test]
    fn unit_mass_and_nonnegative() {
        for (d, n, eps) in [(1, 64, 0.1), (2, 32, 0.2), (3, 16, 0.25)] {
            let grid = TorusGrid::new(d, n).unwrap();
            let m = Mollifier::new(&grid, 0.01, MollifierSpec::new(eps).unwrap()).unwrap();
            assert!((m.spatial_mass() - 1.0).abs() < 1e-10);
            assert!((m.time_mass() - 1.0).abs() < 1e-14);
            assert!(m.spatial_min() >= -1e-12);
            assert!((m.transfer_factor([0; 3]) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_unresolved() {
        let grid = TorusGrid::new(1, 32).unwrap();
        let spec = MollifierSpec::new(0.1).unwrap();
        assert!(matches!(
            Mollifier::new(&grid, 0.01, spec),
            Err(QhdError::UnresolvedMollifier { .. })
        ));
        assert!(matches!(
            Mollifier::new(&TorusGrid::new(1, 64).unwrap(), 0.05, spec),
            Err(QhdError::UnresolvedMollifier { .. })
        ));
        assert!(MollifierSpec::new(0.0).is_err());
        assert!(MollifierSpec::new(0.7).is_err());
    }

    #[test]
    fn constant_unchanged_in_interior() {
        let grid = TorusGrid::new(2, 32).unwrap();
        let m = Mollifier::new(&grid, 0.02, MollifierSpec::new(0.15).unwrap()).unwrap();
        let c = Complex64::new(0.7, -0.3);
        let snaps = vec![ComplexField::constant(&grid, c); 41];
        let out = m.mollify(&snaps).unwrap();
        for i in m.interior(41) {
            assert!(out[i].values().iter().all(|v| (v - c).norm() < 1e-10));
        }
        // zero extension shows at the ends
        assert!((out[0].values()[0] - c).norm() > 1e-3);
    }

    #[test]
    fn pure_mode_scaled_by_transfer_factor() {
        let grid = TorusGrid::new(2, 32).unwrap();
        let m = Mollifier::new(&grid, 0.02, MollifierSpec::new(0.15).unwrap()).unwrap();
        let mode = [3, -2, 0];
        let f = grid.sample_complex(|x| {
            Complex64::from_polar(1.0, 2.0 * PI * (3.0 * x[0] - 2.0 * x[1]))
        });
        let g = m.mollify_space(&f).unwrap();
        let factor = m.transfer_factor(mode);
        assert!(factor > 0.0 && factor < 1.0);
        for (a, b) in g.values().iter().zip(f.values()) {
            assert!((a - b * factor).norm() < 1e-13);
        }
    }

    #[test]
    fn commutes_with_derivatives() {
        let grid = TorusGrid::new(2, 32).unwrap();
        let m = Mollifier::new(&grid, 0.02, MollifierSpec::new(0.15).unwrap()).unwrap();
        let f = random_band_limited(&grid, 7, 6, 1.5).unwrap();
        for axis in 0..2 {
            let a = derivative(&m.mollify_space(&f).unwrap(), axis);
            let b = m.mollify_space(&derivative(&f, axis)).unwrap();
            assert!(a.sub(&b).unwrap().max_abs() < 1e-11);
        }
    }
}
