use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

use rotorwkb::field::WaveField;
use rotorwkb::grid::GridSpec;
use rotorwkb::harness::compare::gauge_align;
use rotorwkb::init::{gaussian, wkb_assemble};
use rotorwkb::nls::{evolve_nls, step_potential_nonlinear, strang_step, SplitStepPlan};
use rotorwkb::norms::l2_complex;
use rotorwkb::params::{Nonlinearity, SimParams};

fn params(eps: f64, rotation: f64, trap: [f64; 2], nl: Nonlinearity) -> SimParams {
    SimParams::new(eps, rotation, trap.to_vec(), nl).unwrap()
}

fn mass(g: &GridSpec, v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>() * g.cell_measure()
}

fn relative_distance(g: &GridSpec, a: &[Complex64], b: &[Complex64]) -> f64 {
    let d: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    l2_complex(g, &d) / l2_complex(g, b)
}

/// Coherent state of the unit isotropic oscillator with `hbar = eps`:
/// centre `x0 cos t`, momentum `-x0 sin t`, up to a global phase.
fn coherent_state(g: &GridSpec, eps: f64, x0: [f64; 2], t: f64) -> Vec<Complex64> {
    let (s, c) = t.sin_cos();
    let q = [x0[0] * c, x0[1] * c];
    let p = [-x0[0] * s, -x0[1] * s];
    let norm = (PI * eps).powf(-0.5);
    g.sample(|x| {
        let dx = [x[0] - q[0], x[1] - q[1]];
        let r2 = dx[0] * dx[0] + dx[1] * dx[1];
        let ph = (p[0] * dx[0] + p[1] * dx[1]) / eps;
        Complex64::from_polar(norm * (-r2 / (2.0 * eps)).exp(), ph)
    })
}

#[test]
fn strang_order_on_coherent_state() {
    let g = GridSpec::uniform(2, 128, 8.0).unwrap();
    let eps = 0.25;
    let p = params(eps, 0.0, [1.0, 1.0], Nonlinearity::Linear);
    let x0 = [1.0, 0.5];
    let psi0 = WaveField::new(g.clone(), coherent_state(&g, eps, x0, 0.0), 0.0, eps).unwrap();
    let exact = coherent_state(&g, eps, x0, 1.0);
    let err = |dt: f64| {
        let psi = evolve_nls(&psi0, &p, 1.0, dt, usize::MAX, |_, _| {}).unwrap();
        let aligned = gauge_align(&g, &exact, &psi.values);
        relative_distance(&g, &aligned, &exact)
    };
    let (e1, e2) = (err(0.02), err(0.01));
    let ratio = e1 / e2;
    assert!((3.5..=4.5).contains(&ratio), "errors {e1:e} {e2:e} ratio {ratio}");
}

#[test]
fn ground_state_is_stationary() {
    let g = GridSpec::uniform(2, 64, 6.0).unwrap();
    let eps = 0.25;
    let p = params(eps, 0.0, [1.0, 1.0], Nonlinearity::Linear);
    let psi0 = WaveField::new(g.clone(), coherent_state(&g, eps, [0.0, 0.0], 0.0), 0.0, eps).unwrap();
    let psi = evolve_nls(&psi0, &p, 1.0, 1e-2, usize::MAX, |_, _| {}).unwrap();
    let worst = psi
        .values
        .iter()
        .zip(&psi0.values)
        .map(|(a, b)| (a.norm() - b.norm()).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-4, "{worst:e}");
}

#[test]
fn backward_steps_reverse_the_flow() {
    let g = GridSpec::uniform(2, 64, 8.0).unwrap();
    let p = params(0.2, 0.7, [1.0, 1.5], Nonlinearity::default());
    let a = gaussian(&g, &[0.5, -0.3], 0.8);
    let phase = g.sample(|x| 0.2 * x[0] - 0.1 * x[1] * x[1]);
    let psi0 = wkb_assemble(&g, &a, &phase, p.eps).unwrap();
    let fwd = SplitStepPlan::new(&g, &p, 1e-2).unwrap();
    let back = SplitStepPlan::new(&g, &p, -1e-2).unwrap();
    let mut data = psi0.values.clone();
    for _ in 0..100 {
        fwd.step_in_place(&mut data);
    }
    for _ in 0..100 {
        back.step_in_place(&mut data);
    }
    let err = relative_distance(&g, &data, &psi0.values);
    assert!(err < 1e-10, "{err:e}");
}

#[test]
fn rotation_carries_density_counterclockwise() {
    let g = GridSpec::uniform(2, 128, 8.0).unwrap();
    let eps = 0.25;
    let rotation = 1.0;
    let p = params(eps, rotation, [0.0, 0.0], Nonlinearity::Linear);
    let w = std::f64::consts::FRAC_1_SQRT_2;
    let c0 = [1.5, 0.0];
    let mut a = gaussian(&g, &c0, w);
    rotorwkb::init::normalize(&g, &mut a);
    let psi0 = WaveField::new(g.clone(), a, 0.0, eps).unwrap();
    let t = 1.0;
    let psi = evolve_nls(&psi0, &p, t, 1e-3, usize::MAX, |_, _| {}).unwrap();
    let (s, c) = (rotation * t).sin_cos();
    let centre = [c * c0[0] - s * c0[1], s * c0[0] + c * c0[1]];
    let sigma2 = w * w * (1.0 + (eps * t / (w * w)).powi(2));
    let worst = (0..g.len())
        .map(|k| {
            let x = g.position(k);
            let r2 = (x[0] - centre[0]).powi(2) + (x[1] - centre[1]).powi(2);
            let exact = (-r2 / sigma2).exp() / (PI * sigma2);
            (psi.values[k].norm_sqr() - exact).abs()
        })
        .fold(0.0, f64::max);
    assert!(worst < 1e-5, "{worst:e}");
}

#[test]
fn mass_is_kept_over_many_steps() {
    let g = GridSpec::uniform(2, 64, 8.0).unwrap();
    let p = params(0.125, 0.5, [1.0, 1.0], Nonlinearity::default());
    let a = gaussian(&g, &[1.0, 0.0], 0.7);
    let psi0 = wkb_assemble(&g, &a, &vec![0.0; g.len()], p.eps).unwrap();
    let m0 = mass(&g, &psi0.values);
    let plan = SplitStepPlan::new(&g, &p, 1e-3).unwrap();
    let mut psi = psi0;
    for _ in 0..1000 {
        psi = strang_step(&plan, &psi);
    }
    assert!((mass(&g, &psi.values) - m0).abs() / m0 < 1e-12);
}

#[test]
fn observer_stride_and_zero_time() {
    let g = GridSpec::uniform(2, 32, 6.0).unwrap();
    let p = params(0.5, 0.3, [1.0, 1.0], Nonlinearity::default());
    let psi0 = WaveField::new(g.clone(), gaussian(&g, &[0.0, 0.0], 1.0), 0.0, p.eps).unwrap();
    let mut seen = Vec::new();
    let same = evolve_nls(&psi0, &p, 0.0, 1e-2, 1, |k, _| seen.push(k)).unwrap();
    assert_eq!(same.values, psi0.values);
    assert_eq!(seen, vec![0]);
    seen.clear();
    let fin = evolve_nls(&psi0, &p, 0.105, 1e-2, 4, |k, _| seen.push(k)).unwrap();
    assert_eq!(seen, vec![0, 4, 8, 11]);
    assert!((fin.t - 0.105).abs() < 1e-15);
    assert!(evolve_nls(&psi0, &p, 1.0, 0.0, 1, |_, _| {}).is_err());
    assert!(evolve_nls(&psi0, &p, -1.0, 1e-2, 1, |_, _| {}).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn potential_step_keeps_modulus(seed in any::<u64>(), dt in 0.0f64..1.0) {
        let g = GridSpec::uniform(2, 16, 4.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vals: Vec<Complex64> = (0..g.len())
            .map(|_| Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)))
            .collect();
        let p = params(0.1, 0.5, [1.0, 2.0], Nonlinearity::default());
        let psi = WaveField::new(g, vals, 0.0, p.eps).unwrap();
        let out = step_potential_nonlinear(&psi, &p, dt).unwrap();
        for (a, b) in out.values.iter().zip(&psi.values) {
            prop_assert!((a.norm() - b.norm()).abs() < 1e-15 * b.norm().max(1.0));
        }
    }

    #[test]
    fn each_step_is_an_isometry(seed in any::<u64>(), rotation in 0.0f64..2.0, dt in 1e-4f64..0.1) {
        let g = GridSpec::uniform(2, 32, 6.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centre = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let a = gaussian(&g, &centre, 1.0);
        let phase = g.sample(|x| centre[1] * x[0] - 0.2 * x[1] * x[1]);
        let p = params(0.3, rotation, [1.0, 1.3], Nonlinearity::default());
        let psi0 = wkb_assemble(&g, &a, &phase, p.eps).unwrap();
        let plan = SplitStepPlan::new(&g, &p, dt).unwrap();
        let psi = strang_step(&plan, &psi0);
        let (m0, m1) = (mass(&g, &psi0.values), mass(&g, &psi.values));
        prop_assert!((m1 - m0).abs() / m0 < 1e-14);
    }
}
