use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{QhdError, Result};
use crate::grid::TorusGrid;

/// One real trigonometric mode `Re(coeff * exp(i 2 pi m.x))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mode {
    pub freq: [i64; 3],
    pub coeff: Complex64,
}

impl Mode {
    pub fn new(freq: [i64; 3], coeff: Complex64) -> Self {
        Self { freq, coeff }
    }

    /// `c cos(2 pi m.x)`
    pub fn cos(freq: [i64; 3], c: f64) -> Self {
        Self::new(freq, Complex64::new(c, 0.0))
    }

    /// `c sin(2 pi m.x)`
    pub fn sin(freq: [i64; 3], c: f64) -> Self {
        Self::new(freq, Complex64::new(0.0, -c))
    }

    /// The constant `c`.
    pub fn constant(c: f64) -> Self {
        Self::cos([0; 3], c)
    }
}

fn bump(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else {
        (-1.0 / u).exp()
    }
}

fn bump_prime(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else {
        bump(u) / (u * u)
    }
}

/// Smooth cutoff equal to 1 for `t <= a` and 0 for `t >= b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeEnvelope {
    pub a: f64,
    pub b: f64,
}

impl TimeEnvelope {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(QhdError::InvalidArgument(format!("envelope needs a < b, got a={a}, b={b}")));
        }
        Ok(Self { a, b })
    }

    fn s(&self, t: f64) -> f64 {
        (t - self.a) / (self.b - self.a)
    }

    pub fn value(&self, t: f64) -> f64 {
        let s = self.s(t);
        if s <= 0.0 {
            return 1.0;
        }
        if s >= 1.0 {
            return 0.0;
        }
        let (p, q) = (bump(1.0 - s), bump(s));
        p / (p + q)
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let s = self.s(t);
        if s <= 0.0 || s >= 1.0 {
            return 0.0;
        }
        let (p, q) = (bump(1.0 - s), bump(s));
        let (dp, dq) = (-bump_prime(1.0 - s), bump_prime(s));
        (dp * q - p * dq) / ((p + q) * (p + q)) / (self.b - self.a)
    }

    /// The same envelope mapped affinely from `[t0, t1]` onto `[s0, s1]`.
    pub fn rescaled(&self, t0: f64, t1: f64, s0: f64, s1: f64) -> Self {
        let map = |t: f64| s0 + (t - t0) / (t1 - t0) * (s1 - s0);
        Self { a: map(self.a), b: map(self.b) }
    }
}

/// A smooth space-time test function `env(t) S(x)`; `S` is scalar or a vector of
/// trigonometric polynomials, one per axis.
#[derive(Clone, Debug, PartialEq)]
pub struct TestFunctionSpec {
    pub id: String,
    pub components: Vec<Vec<Mode>>,
    pub envelope: TimeEnvelope,
    pub vector: bool,
}

/// Spatial part of a test function sampled on a grid. For scalar specs the
/// vector quantities treat the function as `S e_1`.
#[derive(Clone, Debug)]
pub(crate) struct SampledTest {
    /// `S_k`
    pub value: Vec<Vec<f64>>,
    /// `d_j S_k`, indexed `[k][j]`
    pub jacobian: Vec<Vec<Vec<f64>>>,
    pub div: Vec<f64>,
    pub lap_div: Vec<f64>,
}

impl SampledTest {
    /// `max |S|` over the grid, as a vector magnitude.
    pub(crate) fn max_abs(&self) -> f64 {
        (0..self.div.len())
            .map(|i| self.value.iter().map(|c| c[i] * c[i]).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

impl TestFunctionSpec {
    pub fn scalar(id: impl Into<String>, modes: Vec<Mode>, envelope: TimeEnvelope) -> Self {
        Self { id: id.into(), components: vec![modes], envelope, vector: false }
    }

    pub fn vector(id: impl Into<String>, components: Vec<Vec<Mode>>, envelope: TimeEnvelope) -> Self {
        Self { id: id.into(), components, envelope, vector: true }
    }

    /// The negated test function.
    pub fn negated(&self) -> Self {
        let mut out = self.clone();
        for comp in &mut out.components {
            for m in comp {
                m.coeff = -m.coeff;
            }
        }
        out
    }

    /// Checks that the spatial part is representable on `grid` below `N/3` and the
    /// support ends before `t_end`.
    pub fn validate(&self, grid: &TorusGrid, t_end: f64) -> Result<()> {
        if self.components.is_empty() || self.components.len() > 3 {
            return Err(QhdError::InvalidArgument(format!(
                "test function {} needs 1..=3 components",
                self.id
            )));
        }
        let n = grid.n() as i64;
        for comp in &self.components {
            for m in comp {
                if m.freq.iter().any(|&f| 3 * f.abs() >= n) {
                    return Err(QhdError::InvalidArgument(format!(
                        "test function {} has mode {:?} not below N/3",
                        self.id, m.freq
                    )));
                }
                if m.freq[grid.dim()..].iter().any(|&f| f != 0) {
                    return Err(QhdError::InvalidArgument(format!(
                        "test function {} has mode {:?} outside dimension {}",
                        self.id,
                        m.freq,
                        grid.dim()
                    )));
                }
                if !(m.coeff.re.is_finite() && m.coeff.im.is_finite()) {
                    return Err(QhdError::InvalidArgument(format!(
                        "test function {} has a non-finite coefficient",
                        self.id
                    )));
                }
            }
        }
        if self.envelope.b >= t_end {
            return Err(QhdError::SupportTouchesEnd(format!(
                "{}: envelope ends at {} but final time is {}",
                self.id, self.envelope.b, t_end
            )));
        }
        Ok(())
    }

    /// `max |S(x)|` on the grid; the envelope is bounded by 1.
    pub fn sup_norm(&self, grid: &TorusGrid) -> f64 {
        self.sample(grid).max_abs()
    }

    pub(crate) fn sample(&self, grid: &TorusGrid) -> SampledTest {
        let dim = grid.dim();
        let len = grid.len();
        let points: Vec<[f64; 3]> = (0..len).map(|i| grid.point(i)).collect();
        let eval = |modes: &[Mode], mult: &dyn Fn([f64; 3]) -> Complex64| -> Vec<f64> {
            points
                .iter()
                .map(|x| {
                    modes
                        .iter()
                        .map(|m| {
                            let k = m.freq.map(|f| 2.0 * PI * f as f64);
                            let theta = k[0] * x[0] + k[1] * x[1] + k[2] * x[2];
                            (m.coeff * mult(k) * Complex64::from_polar(1.0, theta)).re
                        })
                        .sum()
                })
                .collect()
        };
        let n_comp = dim;
        let mut value = Vec::with_capacity(n_comp);
        let mut jacobian = Vec::with_capacity(n_comp);
        let mut div = vec![0.0; len];
        let mut lap_div = vec![0.0; len];
        let empty: Vec<Mode> = Vec::new();
        for k in 0..n_comp {
            let modes = self.components.get(k).unwrap_or(&empty);
            value.push(eval(modes, &|_| Complex64::new(1.0, 0.0)));
            let jac: Vec<Vec<f64>> =
                (0..dim).map(|j| eval(modes, &|kv| Complex64::new(0.0, kv[j]))).collect();
            let ldk = eval(modes, &|kv| {
                let ksq = kv[0] * kv[0] + kv[1] * kv[1] + kv[2] * kv[2];
                Complex64::new(0.0, -kv[k] * ksq)
            });
            for i in 0..len {
                div[i] += jac[k][i];
                lap_div[i] += ldk[i];
            }
            jacobian.push(jac);
        }
        SampledTest { value, jacobian, div, lap_div }
    }
}

/// The fixed six-function basket over `[t0, t1]`: two spatially constant functions with
/// distinct envelopes, two single-mode functions, and two mixed-mode vector fields.
pub fn default_basket(dim: usize, t0: f64, t1: f64) -> Vec<TestFunctionSpec> {
    let span = t1 - t0;
    let env = |a: f64, b: f64| TimeEnvelope { a: t0 + a * span, b: t0 + b * span };
    let main = env(0.3, 0.7);
    let e = |v: [i64; 3]| v;
    let diag = if dim >= 2 { e([1, 1, 0]) } else { e([2, 0, 0]) };
    let second = if dim >= 2 { e([0, 1, 0]) } else { e([1, 0, 0]) };
    let mut vec_a = vec![
        vec![Mode::cos(second, 1.0), Mode::cos([1, 0, 0], 0.5)],
        vec![Mode::sin([1, 0, 0], 1.0), Mode::constant(0.25)],
        vec![Mode::cos([1, 0, 0], 0.3), Mode::sin(if dim == 3 { [0, 0, 1] } else { [1, 0, 0] }, 0.6)],
    ];
    let mut vec_b = vec![
        vec![Mode::sin(if dim >= 2 { [1, -1, 0] } else { [1, 0, 0] }, 1.0)],
        vec![Mode::cos(if dim >= 2 { [1, 2, 0] } else { [2, 0, 0] }, 0.7), Mode::constant(0.3)],
        vec![Mode::sin(if dim == 3 { [1, 0, 1] } else { [2, 0, 0] }, 0.8)],
    ];
    vec_a.truncate(dim);
    vec_b.truncate(dim);
    vec![
        TestFunctionSpec::scalar("const_a", vec![Mode::constant(1.0)], main),
        TestFunctionSpec::scalar("const_b", vec![Mode::constant(1.0)], env(0.1, 0.7)),
        TestFunctionSpec::scalar("mode_x", vec![Mode::cos([1, 0, 0], 1.0)], main),
        TestFunctionSpec::scalar("mode_diag", vec![Mode::sin(diag, 1.0)], main),
        TestFunctionSpec::vector("vec_a", vec_a, main),
        TestFunctionSpec::vector("vec_b", vec_b, env(0.25, 0.75)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_shape() {
        let e = TimeEnvelope::new(0.3, 0.7).unwrap();
        assert_eq!(e.value(0.0), 1.0);
        assert_eq!(e.value(0.3), 1.0);
        assert_eq!(e.value(0.7), 0.0);
        assert!((e.value(0.5) - 0.5).abs() < 1e-15);
        for i in 1..100 {
            let t = 0.3 + 0.4 * i as f64 / 100.0;
            let h = 1e-6;
            let fd = (e.value(t + h) - e.value(t - h)) / (2.0 * h);
            assert!((fd - e.derivative(t)).abs() < 1e-6, "{t}");
        }
        assert!(TimeEnvelope::new(0.5, 0.5).is_err());
    }

    #[test]
    fn sampled_derivatives_match_spectral() {
        let grid = TorusGrid::new(2, 16).unwrap();
        for spec in default_basket(2, 0.0, 1.0) {
            let s = spec.sample(&grid);
            for (k, comp) in s.value.iter().enumerate() {
                let field = crate::grid::ScalarField::new(grid.clone(), comp.clone()).unwrap();
                let g = field.gradient();
                for j in 0..2 {
                    for (a, b) in g.component(j).iter().zip(&s.jacobian[k][j]) {
                        assert!((a - b).abs() < 1e-11);
                    }
                }
            }
            let div = crate::grid::ScalarField::new(grid.clone(), s.div.clone()).unwrap();
            for (a, b) in div.laplacian().values().iter().zip(&s.lap_div) {
                assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()));
            }
        }
    }

    #[test]
    fn validation() {
        let grid = TorusGrid::new(2, 8).unwrap();
        let env = TimeEnvelope::new(0.3, 0.7).unwrap();
        let bad = TestFunctionSpec::scalar("x", vec![Mode::cos([3, 0, 0], 1.0)], env);
        assert!(bad.validate(&grid, 1.0).is_err());
        let ok = TestFunctionSpec::scalar("x", vec![Mode::cos([2, 0, 0], 1.0)], env);
        assert!(ok.validate(&grid, 1.0).is_ok());
        assert!(matches!(ok.validate(&grid, 0.7), Err(QhdError::SupportTouchesEnd(_))));
        for spec in default_basket(3, 0.0, 1.0) {
            assert!(spec.validate(&TorusGrid::new(3, 8).unwrap(), 1.0).is_ok());
        }
        for spec in default_basket(1, 0.0, 1.0) {
            assert!(spec.validate(&TorusGrid::new(1, 8).unwrap(), 1.0).is_ok());
        }
    }
}
