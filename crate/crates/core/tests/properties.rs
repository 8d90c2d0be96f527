use num_complex::Complex64;
use proptest::prelude::*;
use qhd_core::grid::{integrate, random_band_limited, spectral_gradient, spectral_laplacian};
use qhd_core::log_nls::{energy, evolve_quiet, nonlinear_step};
use qhd_core::madelung::{current_direct, observables_default, quadratic_identity_residual};
use qhd_core::{ComplexField, ScalarField, SolverConfig, ThermoParams, TorusGrid, WaveState};

fn grid_strategy() -> impl Strategy<Value = TorusGrid> {
    prop_oneof![
        (prop_oneof![Just(16usize), Just(32), Just(64)]).prop_map(|n| TorusGrid::new(1, n).unwrap()),
        (prop_oneof![Just(8usize), Just(16), Just(32)]).prop_map(|n| TorusGrid::new(2, n).unwrap()),
        (prop_oneof![Just(8usize), Just(12)]).prop_map(|n| TorusGrid::new(3, n).unwrap()),
    ]
}

fn field(grid: &TorusGrid, seed: u64, decay: f64) -> ComplexField {
    let max_mode = (grid.n() - 1) / 3;
    random_band_limited(grid, seed, max_mode.min(4), decay).unwrap()
}

#[test]
fn parseval_on_random_fields() {
    for seed in 0..100u64 {
        let grid = TorusGrid::new(1 + (seed % 3) as usize, [16, 12, 8][(seed % 3) as usize]).unwrap();
        let mut rng_field = field(&grid, seed, 0.5);
        // add non-band-limited point noise so every mode is populated
        for (i, v) in rng_field.values_mut().iter_mut().enumerate() {
            *v += Complex64::new(((i * 7919 + seed as usize) % 13) as f64 * 0.01, 0.0);
        }
        let a = rng_field.l2_norm();
        let b = rng_field.l2_norm_spectral();
        assert!((a - b).abs() <= 1e-13 * a, "seed {seed}: {a} vs {b}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gradient_components_integrate_to_zero(grid in grid_strategy(), seed in any::<u64>()) {
        let u = field(&grid, seed, 1.0);
        for g in spectral_gradient(&u) {
            let total = grid.integrate_complex(g.values());
            prop_assert!(total.norm() <= 1e-13 * (1.0 + g.max_abs()), "{total}");
        }
    }

    #[test]
    fn laplacian_is_divergence_of_gradient(grid in grid_strategy(), seed in any::<u64>()) {
        let u = field(&grid, seed, 1.0);
        let lap = spectral_laplacian(&u);
        let grad = spectral_gradient(&u);
        for part in [false, true] {
            let comps: Vec<Vec<f64>> = grad
                .iter()
                .map(|g| g.values().iter().map(|z| if part { z.im } else { z.re }).collect())
                .collect();
            let div = qhd_core::VectorField::new(grid.clone(), comps).unwrap().divergence();
            let target: Vec<f64> = lap.values().iter().map(|z| if part { z.im } else { z.re }).collect();
            let err = div.values().iter().zip(&target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            prop_assert!(err <= 1e-11 * (1.0 + lap.max_abs()), "{err}");
        }
    }

    #[test]
    fn nonlinear_step_preserves_modulus(grid in grid_strategy(), seed in any::<u64>(), delta in 1e-4..0.5f64, dt in 1e-4..0.1f64) {
        let params = ThermoParams::for_dynamics(delta, 1.0).unwrap();
        let state = WaveState::new(field(&grid, seed, 1.0), 0.0, params).unwrap();
        let next = nonlinear_step(&state, dt).unwrap();
        let err = state
            .psi
            .values()
            .iter()
            .zip(next.psi.values())
            .map(|(a, b)| (a.norm() - b.norm()).abs())
            .fold(0.0, f64::max);
        prop_assert!(err <= 1e-15 * (1.0 + state.psi.max_abs()), "{err}");
    }

    #[test]
    fn madelung_identities_hold(grid in grid_strategy(), seed in any::<u64>(), hbar in 0.2..2.0f64) {
        let params = ThermoParams::for_dynamics(0.1, hbar).unwrap();
        let state = WaveState::new(field(&grid, seed, 1.5), 0.0, params).unwrap();
        let hydro = observables_default(&state);
        prop_assert!(quadratic_identity_residual(&state, &hydro) <= 1e-12);
        let direct = current_direct(&state);
        let scale = 1.0 + direct.components().iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        for (j, comp) in direct.components().iter().enumerate() {
            for (x, v) in comp.iter().enumerate() {
                if hydro.rho.values()[x] > hydro.eps_vac {
                    let polar = hydro.sqrt_rho.values()[x] * hydro.momentum.component(j)[x];
                    prop_assert!((v - polar).abs() <= 1e-12 * scale);
                }
            }
        }
        let e = energy(&state);
        prop_assert!((e.hydro_grad + e.hydro_lambda - e.kinetic).abs() <= 1e-11 * e.kinetic.max(1e-300));
    }
}

fn short_run(psi: ComplexField, delta: f64, t_final: f64) -> WaveState {
    let params = ThermoParams::for_dynamics(delta, 1.0).unwrap();
    let start = WaveState::new(psi, 0.0, params).unwrap();
    evolve_quiet(&start, &SolverConfig::new(1e-3, t_final, 1).unwrap()).unwrap()
}

#[test]
fn mass_is_conserved() {
    for (d, n, seed) in [(1, 64, 1u64), (2, 32, 2), (3, 16, 3)] {
        let grid = TorusGrid::new(d, n).unwrap();
        let psi = random_band_limited(&grid, seed, 2, 2.0).unwrap();
        let m0 = psi.l2_norm().powi(2);
        let end = short_run(psi, 0.05, 0.5);
        assert!((end.mass() - m0).abs() <= 1e-11 * m0, "{d}D: {} vs {m0}", end.mass());
    }
}

#[test]
fn evolution_is_gauge_covariant() {
    let grid = TorusGrid::new(2, 32).unwrap();
    let psi = random_band_limited(&grid, 5, 2, 2.0).unwrap();
    for theta in [0.3, 1.7, -2.9] {
        let unit = Complex64::from_polar(1.0, theta);
        let a = short_run(psi.scale(unit), 0.05, 0.025);
        let b = short_run(psi.clone(), 0.05, 0.025).psi.scale(unit);
        let err = a.psi.sub(&b).unwrap().max_abs();
        assert!(err <= 1e-14 * b.max_abs().max(1.0), "theta {theta}: {err}");
    }
}

#[test]
fn integrate_matches_mean() {
    let grid = TorusGrid::new(2, 16).unwrap();
    let f = grid.sample_real(|x| 2.0 + (2.0 * std::f64::consts::PI * x[0]).sin());
    assert!((integrate(&f) - 2.0).abs() < 1e-14);
    let zero = ScalarField::zeros(&grid);
    assert_eq!(integrate(&zero), 0.0);
}
