//! Uniform periodic grids on the unit torus and the spectral machinery on top of them.
//!
//! Samples are stored row-major with axis 1 fastest: the flat index of the point
//! `(i1, i2, i3)` is `i1 + N * (i2 + N * i3)`. Point `i` on an axis sits at `x = i / N`.
//! Frequencies follow the FFT ordering `0, 1, .., N/2 - 1, -N/2, .., -1`, so the
//! Nyquist frequency `-N/2` appears exactly once per axis.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};

use crate::error::{QhdError, Result};

const TWO_PI: f64 = 2.0 * PI;

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Discretization of `T^d = (R/Z)^d` with `N` points per axis.
#[derive(Clone)]
pub struct TorusGrid {
    dim: usize,
    n: usize,
    wavenumbers: Arc<[f64]>,
    plans: Arc<Plans>,
}

impl fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGrid")
            .field("dim", &self.dim)
            .field("n", &self.n)
            .finish()
    }
}

impl PartialEq for TorusGrid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.n == other.n
    }
}

impl Eq for TorusGrid {}

impl TorusGrid {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(QhdError::InvalidGrid(format!(
                "dimension must be 1, 2 or 3, got {dim}"
            )));
        }
        if n < 4 || !n.is_multiple_of(2) {
            return Err(QhdError::InvalidGrid(format!(
                "points per axis must be even and >= 4, got {n}"
            )));
        }
        let mut planner = FftPlanner::new();
        let plans = Plans {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        };
        let wavenumbers: Vec<f64> = (0..n)
            .map(|i| TWO_PI * frequency_of(i, n) as f64)
            .collect();
        Ok(Self {
            dim,
            n,
            wavenumbers: wavenumbers.into(),
            plans: Arc::new(plans),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of grid points, `N^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Quadrature weight `h^d` of a single point.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Integer frequency `m` stored at FFT index `i`.
    pub fn frequency(&self, i: usize) -> i64 {
        frequency_of(i, self.n)
    }

    /// Per-axis table `k = 2*pi*m` in FFT ordering.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    pub fn is_nyquist(&self, i: usize) -> bool {
        i == self.n / 2
    }

    /// Splits a flat index into per-axis indices; unused axes are zero.
    pub fn multi_index(&self, mut flat: usize) -> [usize; 3] {
        let mut out = [0usize; 3];
        for slot in out.iter_mut().take(self.dim) {
            *slot = flat % self.n;
            flat /= self.n;
        }
        out
    }

    pub fn flat_index(&self, idx: [usize; 3]) -> usize {
        let mut flat = 0;
        for axis in (0..self.dim).rev() {
            flat = flat * self.n + idx[axis];
        }
        flat
    }

    /// Coordinates of a point; unused axes are zero.
    pub fn point(&self, flat: usize) -> [f64; 3] {
        let idx = self.multi_index(flat);
        let h = self.spacing();
        [idx[0] as f64 * h, idx[1] as f64 * h, idx[2] as f64 * h]
    }

    /// Frequency vector of a flat spectral index.
    pub fn frequency_vector(&self, flat: usize) -> [i64; 3] {
        let idx = self.multi_index(flat);
        let mut m = [0i64; 3];
        for axis in 0..self.dim {
            m[axis] = self.frequency(idx[axis]);
        }
        m
    }

    /// `|k|^2` of a flat spectral index, Nyquist included.
    pub fn wavenumber_sq(&self, flat: usize) -> f64 {
        let idx = self.multi_index(flat);
        (0..self.dim)
            .map(|a| self.wavenumbers[idx[a]].powi(2))
            .sum()
    }

    /// Discrete integral `h^d * sum(values)`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        self.cell_volume() * values.iter().sum::<f64>()
    }

    pub fn integrate_complex(&self, values: &[Complex64]) -> Complex64 {
        debug_assert_eq!(values.len(), self.len());
        values.iter().sum::<Complex64>() * self.cell_volume()
    }

    /// Unnormalized forward transform over every axis.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.plans.forward);
    }

    /// Inverse transform over every axis, normalized by `N^d`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.plans.inverse);
        let scale = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|z| *z *= scale);
    }

    fn transform(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.len(), self.len(), "buffer length does not match grid");
        let n = self.n;
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        // axis 1 is contiguous
        fft.process_with_scratch(data, &mut scratch);
        if self.dim == 1 {
            return;
        }
        let total = data.len();
        let mut lines = vec![Complex64::new(0.0, 0.0); total];
        for axis in 1..self.dim {
            let stride = n.pow(axis as u32);
            let block = stride * n;
            let mut line = 0;
            for outer in (0..total).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    for j in 0..n {
                        lines[line * n + j] = data[base + j * stride];
                    }
                    line += 1;
                }
            }
            fft.process_with_scratch(&mut lines, &mut scratch);
            line = 0;
            for outer in (0..total).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    for j in 0..n {
                        data[base + j * stride] = lines[line * n + j];
                    }
                    line += 1;
                }
            }
        }
    }

    /// Samples a complex function of the coordinates.
    pub fn sample_complex(&self, f: impl Fn([f64; 3]) -> Complex64) -> ComplexField {
        let values = (0..self.len()).map(|i| f(self.point(i))).collect();
        ComplexField::from_raw(self.clone(), values)
    }

    pub fn sample_real(&self, f: impl Fn([f64; 3]) -> f64) -> ScalarField {
        let values = (0..self.len()).map(|i| f(self.point(i))).collect();
        ScalarField::from_raw(self.clone(), values)
    }

    /// Builds a field from Fourier coefficients `c_m` of `sum_m c_m exp(i 2 pi m.x)`,
    /// given in FFT ordering.
    pub fn from_coefficients(&self, coeffs: Vec<Complex64>) -> ComplexField {
        assert_eq!(coeffs.len(), self.len());
        let scale = self.len() as f64;
        let mut values: Vec<Complex64> = coeffs.into_iter().map(|c| c * scale).collect();
        self.inverse(&mut values);
        ComplexField::from_raw(self.clone(), values)
    }

    /// Returns true when `other` is the same discretization.
    pub fn check_same(&self, other: &TorusGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(QhdError::GridMismatch(format!(
                "d={} N={} vs d={} N={}",
                self.dim, self.n, other.dim, other.n
            )))
        }
    }
}

fn frequency_of(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

fn ensure_finite<T>(values: &[T], finite: impl Fn(&T) -> bool, what: &str) -> Result<()> {
    match values.iter().position(|v| !finite(v)) {
        None => Ok(()),
        Some(i) => Err(QhdError::InvalidArgument(format!(
            "{what} has a non-finite sample at index {i}"
        ))),
    }
}

/// Complex samples on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    grid: TorusGrid,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: TorusGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(QhdError::InvalidArgument(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        ensure_finite(&values, |z| z.re.is_finite() && z.im.is_finite(), "complex field")?;
        Ok(Self { grid, values })
    }

    pub(crate) fn from_raw(grid: TorusGrid, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: &TorusGrid) -> Self {
        Self::from_raw(grid.clone(), vec![Complex64::new(0.0, 0.0); grid.len()])
    }

    pub fn constant(grid: &TorusGrid, value: Complex64) -> Self {
        Self::from_raw(grid.clone(), vec![value; grid.len()])
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn conj(&self) -> Self {
        Self::from_raw(self.grid.clone(), self.values.iter().map(|z| z.conj()).collect())
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self::from_raw(self.grid.clone(), self.values.iter().map(|z| z * factor).collect())
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self::from_raw(self.grid.clone(), self.values.iter().map(|&z| f(z)).collect())
    }

    /// `|u|^2` pointwise.
    pub fn modulus_sq(&self) -> ScalarField {
        ScalarField::from_raw(self.grid.clone(), self.values.iter().map(|z| z.norm_sqr()).collect())
    }

    pub fn re(&self) -> ScalarField {
        ScalarField::from_raw(self.grid.clone(), self.values.iter().map(|z| z.re).collect())
    }

    pub fn im(&self) -> ScalarField {
        ScalarField::from_raw(self.grid.clone(), self.values.iter().map(|z| z.im).collect())
    }

    pub fn sub(&self, other: &ComplexField) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(Self::from_raw(
            self.grid.clone(),
            self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        ))
    }

    /// Normalized Fourier coefficients `c_m` in FFT ordering.
    pub fn coefficients(&self) -> Vec<Complex64> {
        let mut buf = self.values.clone();
        self.grid.forward(&mut buf);
        let scale = 1.0 / self.grid.len() as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
        buf
    }

    /// Multiplies every Fourier coefficient by `multiplier(flat spectral index)`.
    pub fn apply_multiplier(&self, multiplier: impl Fn(usize) -> Complex64) -> Self {
        let mut buf = self.values.clone();
        self.grid.forward(&mut buf);
        buf.iter_mut()
            .enumerate()
            .for_each(|(i, c)| *c *= multiplier(i));
        self.grid.inverse(&mut buf);
        Self::from_raw(self.grid.clone(), buf)
    }

    /// Discrete `L^2` norm computed from samples.
    pub fn l2_norm(&self) -> f64 {
        (self.grid.cell_volume() * self.values.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// Discrete `L^2` norm computed from Fourier coefficients.
    pub fn l2_norm_spectral(&self) -> f64 {
        self.coefficients()
            .iter()
            .map(|c| c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Discrete `H^1` norm, `sqrt(int |u|^2 + int |grad u|^2)`.
    pub fn h1_norm(&self) -> f64 {
        let grad_sq: f64 = spectral_gradient(self)
            .iter()
            .map(|g| g.l2_norm().powi(2))
            .sum();
        (self.l2_norm().powi(2) + grad_sq).sqrt()
    }

    /// Zeroes every Fourier mode with some `|m_j| > N/3` (2/3-rule truncation).
    pub fn dealias_two_thirds(&mut self) {
        let grid = self.grid.clone();
        let cutoff = (grid.n() / 3) as i64;
        grid.forward(&mut self.values);
        for (i, c) in self.values.iter_mut().enumerate() {
            let m = grid.frequency_vector(i);
            if m.iter().any(|mj| mj.abs() > cutoff) {
                *c = Complex64::new(0.0, 0.0);
            }
        }
        grid.inverse(&mut self.values);
    }
}

/// Real samples on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(QhdError::InvalidArgument(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        ensure_finite(&values, |x| x.is_finite(), "scalar field")?;
        Ok(Self { grid, values })
    }

    pub(crate) fn from_raw(grid: TorusGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: &TorusGrid) -> Self {
        Self::from_raw(grid.clone(), vec![0.0; grid.len()])
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(self.grid.clone(), self.values.iter().map(|&x| f(x)).collect())
    }

    pub fn to_complex(&self) -> ComplexField {
        ComplexField::from_raw(
            self.grid.clone(),
            self.values.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        )
    }

    /// Spectral gradient of a real field.
    pub fn gradient(&self) -> VectorField {
        let comps = spectral_gradient(&self.to_complex())
            .into_iter()
            .map(|g| g.re().into_values())
            .collect();
        VectorField::from_raw(self.grid.clone(), comps)
    }

    pub fn laplacian(&self) -> ScalarField {
        spectral_laplacian(&self.to_complex()).re()
    }
}

/// `d` real samples per grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    grid: TorusGrid,
    components: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn new(grid: TorusGrid, components: Vec<Vec<f64>>) -> Result<Self> {
        if components.len() != grid.dim() {
            return Err(QhdError::InvalidArgument(format!(
                "vector field needs {} components, got {}",
                grid.dim(),
                components.len()
            )));
        }
        for c in &components {
            if c.len() != grid.len() {
                return Err(QhdError::InvalidArgument("component length mismatch".into()));
            }
            ensure_finite(c, |x| x.is_finite(), "vector field")?;
        }
        Ok(Self { grid, components })
    }

    pub(crate) fn from_raw(grid: TorusGrid, components: Vec<Vec<f64>>) -> Self {
        debug_assert_eq!(components.len(), grid.dim());
        Self { grid, components }
    }

    pub fn zeros(grid: &TorusGrid) -> Self {
        Self::from_raw(grid.clone(), vec![vec![0.0; grid.len()]; grid.dim()])
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn component(&self, axis: usize) -> &[f64] {
        &self.components[axis]
    }

    /// Pointwise Euclidean norm squared.
    pub fn norm_sq(&self) -> ScalarField {
        let mut out = vec![0.0; self.grid.len()];
        for c in &self.components {
            out.iter_mut().zip(c).for_each(|(o, x)| *o += x * x);
        }
        ScalarField::from_raw(self.grid.clone(), out)
    }

    /// Spectral divergence.
    pub fn divergence(&self) -> ScalarField {
        let mut out = vec![0.0; self.grid.len()];
        for (axis, c) in self.components.iter().enumerate() {
            let field = ScalarField::from_raw(self.grid.clone(), c.clone()).to_complex();
            let d = derivative(&field, axis);
            out.iter_mut().zip(d.values()).for_each(|(o, z)| *o += z.re);
        }
        ScalarField::from_raw(self.grid.clone(), out)
    }
}

/// Discrete integral `h^d * sum f` over the unit torus.
pub fn integrate(f: &ScalarField) -> f64 {
    f.grid.integrate(&f.values)
}

/// Derivative along one axis, multiplier `i k_axis` with the Nyquist mode zeroed.
pub fn derivative(u: &ComplexField, axis: usize) -> ComplexField {
    let grid = u.grid.clone();
    assert!(axis < grid.dim());
    u.apply_multiplier(|flat| {
        let i = grid.multi_index(flat)[axis];
        if grid.is_nyquist(i) {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, grid.wavenumbers()[i])
        }
    })
}

/// Gradient of `u`; component `j` is the inverse transform of `i k_j u_hat`.
pub fn spectral_gradient(u: &ComplexField) -> Vec<ComplexField> {
    let grid = &u.grid;
    let mut hat = u.values.clone();
    grid.forward(&mut hat);
    (0..grid.dim())
        .map(|axis| {
            let mut buf: Vec<Complex64> = hat
                .iter()
                .enumerate()
                .map(|(flat, c)| {
                    let i = grid.multi_index(flat)[axis];
                    if grid.is_nyquist(i) {
                        Complex64::new(0.0, 0.0)
                    } else {
                        c * Complex64::new(0.0, grid.wavenumbers()[i])
                    }
                })
                .collect();
            grid.inverse(&mut buf);
            ComplexField::from_raw(grid.clone(), buf)
        })
        .collect()
}

/// Laplacian via the multiplier `-|k|^2`.
pub fn spectral_laplacian(u: &ComplexField) -> ComplexField {
    let grid = u.grid.clone();
    u.apply_multiplier(|flat| Complex64::new(-grid.wavenumber_sq(flat), 0.0))
}

/// Deterministic band-limited random field.
///
/// Every mode with `max_j |m_j| <= max_mode` gets magnitude `(1 + |m|)^(-decay)` and a
/// uniformly random phase drawn from a ChaCha8 stream seeded with `seed`. Modes are visited
/// in lexicographic order (last axis slowest), so the field depends only on the inputs.
pub fn random_band_limited(
    grid: &TorusGrid,
    seed: u64,
    max_mode: usize,
    decay: f64,
) -> Result<ComplexField> {
    if 3 * max_mode >= grid.n() {
        return Err(QhdError::InvalidArgument(format!(
            "max_mode {max_mode} must be below N/3 = {}",
            grid.n() as f64 / 3.0
        )));
    }
    if !decay.is_finite() {
        return Err(QhdError::InvalidArgument("decay must be finite".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs = vec![Complex64::new(0.0, 0.0); grid.len()];
    let n = grid.n() as i64;
    let side = 2 * max_mode + 1;
    let count = side.pow(grid.dim() as u32);
    for k in 0..count {
        let mut rest = k;
        let mut idx = [0usize; 3];
        let mut norm_sq = 0.0;
        for slot in idx.iter_mut().take(grid.dim()) {
            let m = (rest % side) as i64 - max_mode as i64;
            rest /= side;
            norm_sq += (m * m) as f64;
            *slot = m.rem_euclid(n) as usize;
        }
        let magnitude = (1.0 + norm_sq.sqrt()).powf(-decay);
        let phase = rng.gen::<f64>() * TWO_PI;
        coeffs[grid.flat_index(idx)] = Complex64::from_polar(magnitude, phase);
    }
    Ok(grid.from_coefficients(coeffs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn rejects_odd_or_small_grids() {
        assert!(TorusGrid::new(2, 33).is_err());
        assert!(TorusGrid::new(2, 2).is_err());
        assert!(TorusGrid::new(4, 16).is_err());
        assert!(TorusGrid::new(0, 16).is_err());
        assert!(TorusGrid::new(3, 4).is_ok());
    }

    #[test]
    fn wavenumber_table_has_single_nyquist() {
        let g = TorusGrid::new(2, 16).unwrap();
        assert_eq!(g.wavenumbers().len(), 16);
        let freqs: Vec<i64> = (0..16).map(|i| g.frequency(i)).collect();
        assert_eq!(freqs.iter().filter(|&&m| m == -8).count(), 1);
        assert!(freqs.iter().all(|&m| (-8..8).contains(&m)));
        assert_eq!(g.len(), 256);
    }

    #[test]
    fn integral_of_one_is_one() {
        for (d, n) in [(1, 8), (2, 16), (3, 6)] {
            let g = TorusGrid::new(d, n).unwrap();
            let f = g.sample_real(|_| 1.0);
            assert!((integrate(&f) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn integral_of_mean_zero_mode() {
        let g = TorusGrid::new(1, 16).unwrap();
        let f = g.sample_real(|x| (TWO_PI * x[0]).cos());
        assert!(integrate(&f).abs() < 1e-14);
    }

    #[test]
    fn integral_of_trig_polynomial() {
        let g = TorusGrid::new(2, 16).unwrap();
        let f = g.sample_real(|x| 2.0 + (TWO_PI * x[0]).cos() * (TWO_PI * x[1]).cos());
        assert!((integrate(&f) - 2.0).abs() < 1e-13);
    }

    #[test]
    fn gradient_of_plane_wave() {
        let g = TorusGrid::new(1, 16).unwrap();
        let u = g.sample_complex(|x| Complex64::from_polar(1.0, TWO_PI * x[0]));
        let du = &spectral_gradient(&u)[0];
        for (a, b) in du.values().iter().zip(u.values()) {
            assert!((a - b * Complex64::new(0.0, TWO_PI)).norm() < 1e-12);
        }
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let g = TorusGrid::new(2, 8).unwrap();
        let u = ComplexField::constant(&g, c(3.0));
        for comp in spectral_gradient(&u) {
            assert!(comp.max_abs() < 1e-14);
        }
    }

    #[test]
    fn gradient_of_cosine() {
        let g = TorusGrid::new(1, 32).unwrap();
        let u = g.sample_complex(|x| c((2.0 * TWO_PI * x[0]).cos()));
        let du = &spectral_gradient(&u)[0];
        for (i, z) in du.values().iter().enumerate() {
            let x = g.point(i)[0];
            let exact = -2.0 * TWO_PI * (2.0 * TWO_PI * x).sin();
            assert!((z - c(exact)).norm() < 1e-12);
        }
    }

    #[test]
    fn nyquist_mode_has_zero_derivative() {
        let g = TorusGrid::new(1, 8).unwrap();
        // (-1)^i is the pure Nyquist mode
        let u = g.sample_complex(|x| c((PI * 8.0 * x[0]).cos()));
        assert!(spectral_gradient(&u)[0].max_abs() < 1e-12);
        let lap = spectral_laplacian(&u);
        let expected = (PI * 8.0).powi(2);
        assert!((lap.values()[0].re + expected).abs() < 1e-9);
    }

    #[test]
    fn laplacian_eigenfunctions() {
        let g = TorusGrid::new(1, 16).unwrap();
        let u = g.sample_complex(|x| Complex64::from_polar(1.0, TWO_PI * x[0]));
        let lap = spectral_laplacian(&u);
        for (a, b) in lap.values().iter().zip(u.values()) {
            assert!((a + b * (4.0 * PI * PI)).norm() < 1e-11);
        }
        let g2 = TorusGrid::new(2, 16).unwrap();
        let u2 = g2.sample_complex(|x| c((TWO_PI * x[0]).cos() * (TWO_PI * x[1]).cos()));
        let lap2 = spectral_laplacian(&u2);
        for (a, b) in lap2.values().iter().zip(u2.values()) {
            assert!((a + b * (8.0 * PI * PI)).norm() < 1e-11);
        }
        let k = ComplexField::constant(&g2, c(5.0));
        assert!(spectral_laplacian(&k).max_abs() < 1e-12);
    }

    #[test]
    fn band_limited_rejects_large_mode() {
        let g = TorusGrid::new(2, 12).unwrap();
        assert!(random_band_limited(&g, 1, 4, 2.0).is_err());
        assert!(random_band_limited(&g, 1, 3, 2.0).is_ok());
    }

    #[test]
    fn band_limited_zero_mode_is_constant() {
        let g = TorusGrid::new(2, 16).unwrap();
        let u = random_band_limited(&g, 1, 0, 2.0).unwrap();
        let first = u.values()[0];
        assert!(u.values().iter().all(|z| (z - first).norm() < 1e-15));
        assert!((first.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn band_limited_is_deterministic_and_band_limited() {
        let g = TorusGrid::new(2, 32).unwrap();
        let a = random_band_limited(&g, 7, 4, 3.0).unwrap();
        let b = random_band_limited(&g, 7, 4, 3.0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.h1_norm().to_bits(), b.h1_norm().to_bits());
        for (i, coeff) in a.coefficients().iter().enumerate() {
            let m = g.frequency_vector(i);
            let norm = ((m[0] * m[0] + m[1] * m[1]) as f64).sqrt();
            if m[0].abs() > 4 || m[1].abs() > 4 {
                assert!(coeff.norm() < 1e-15);
            } else {
                assert!((coeff.norm() - (1.0 + norm).powf(-3.0)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn band_limited_h1_norm_matches_coefficients() {
        // recompute the H^1 norm from the emitted coefficients
        let g = TorusGrid::new(2, 32).unwrap();
        let u = random_band_limited(&g, 7, 4, 3.0).unwrap();
        let from_coeffs: f64 = u
            .coefficients()
            .iter()
            .enumerate()
            .map(|(i, c)| c.norm_sqr() * (1.0 + g.wavenumber_sq(i)))
            .sum::<f64>()
            .sqrt();
        assert!(u.h1_norm().is_finite());
        assert!((u.h1_norm() - from_coeffs).abs() < 1e-12 * from_coeffs);
    }

    #[test]
    fn three_dimensional_transform_roundtrip() {
        let g = TorusGrid::new(3, 6).unwrap();
        let u = g.sample_complex(|x| {
            Complex64::new((TWO_PI * x[0]).sin() + x[2], (TWO_PI * (x[1] - x[2])).cos())
        });
        let mut buf = u.values().to_vec();
        g.forward(&mut buf);
        g.inverse(&mut buf);
        for (a, b) in buf.iter().zip(u.values()) {
            assert!((a - b).norm() < 1e-14);
        }
        // derivative along axis 3 of sin(2 pi (x2 + 2 x3))
        let v = g.sample_complex(|x| c((TWO_PI * (x[1] + 2.0 * x[2])).sin()));
        let dv = derivative(&v, 2);
        for (i, z) in dv.values().iter().enumerate() {
            let x = g.point(i);
            let exact = 2.0 * TWO_PI * (TWO_PI * (x[1] + 2.0 * x[2])).cos();
            assert!((z.re - exact).abs() < 1e-11);
        }
    }

    #[test]
    fn dealias_removes_high_modes() {
        let g = TorusGrid::new(1, 12).unwrap();
        let mut u = g.sample_complex(|x| c((TWO_PI * x[0]).cos() + (5.0 * TWO_PI * x[0]).cos()));
        u.dealias_two_thirds();
        for (i, z) in u.values().iter().enumerate() {
            let x = g.point(i)[0];
            assert!((z.re - (TWO_PI * x).cos()).abs() < 1e-13);
        }
    }

    #[test]
    fn new_rejects_non_finite() {
        let g = TorusGrid::new(1, 4).unwrap();
        let mut v = vec![c(0.0); 4];
        v[2] = c(f64::NAN);
        assert!(ComplexField::new(g.clone(), v).is_err());
        assert!(ScalarField::new(g, vec![0.0; 3]).is_err());
    }
}
