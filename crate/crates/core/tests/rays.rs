use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rotorwkb::linalg::{self, Mat3, Vec3};
use rotorwkb::params::{Nonlinearity, SimParams};
use rotorwkb::rays::{
    eval_phase_general, hamiltonian_rhs, hj_residual, integrate_ray, quadratic_phase_evolve, subquadratic_monitor,
    InitialPhase, QuadraticPhase, Ray,
};

fn params(rotation: f64, trap: [f64; 2]) -> SimParams {
    SimParams::new(0.1, rotation, trap.to_vec(), Nonlinearity::default()).unwrap()
}

/// Phase with a position dependent Hessian.
struct Wavy;

impl InitialPhase for Wavy {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, x: &[f64]) -> f64 {
        0.2 * x[0].sin() * x[1].cos() + 0.1 * x[0]
    }

    fn gradient(&self, x: &[f64]) -> Vec3 {
        [0.2 * x[0].cos() * x[1].cos() + 0.1, -0.2 * x[0].sin() * x[1].sin(), 0.0]
    }

    fn hessian(&self, x: &[f64]) -> Mat3 {
        let off = -0.2 * x[0].cos() * x[1].sin();
        let diag = -0.2 * x[0].sin() * x[1].cos();
        [[diag, off, 0.0], [off, diag, 0.0], [0.0, 0.0, 0.0]]
    }
}

/// `exp(M t)` for the linear ray flow `(x, p)' = M (x, p)` by scaled Taylor series.
fn flow_exponential(rotation: f64, trap: [f64; 2], t: f64) -> [[f64; 4]; 4] {
    let (w1, w2) = (trap[0] * trap[0], trap[1] * trap[1]);
    // x' = p - Omega J x, p' = -diag(w) x - Omega J p, J = [[0, 1], [-1, 0]]
    let m = [
        [0.0, -rotation, 1.0, 0.0],
        [rotation, 0.0, 0.0, 1.0],
        [-w1, 0.0, 0.0, -rotation],
        [0.0, -w2, rotation, 0.0],
    ];
    let squarings = 10;
    let h = t / f64::from(1 << squarings);
    let mul = |a: &[[f64; 4]; 4], b: &[[f64; 4]; 4]| -> [[f64; 4]; 4] {
        std::array::from_fn(|i| std::array::from_fn(|j| (0..4).map(|k| a[i][k] * b[k][j]).sum()))
    };
    let mut term: [[f64; 4]; 4] = std::array::from_fn(|i| std::array::from_fn(|j| if i == j { 1.0 } else { 0.0 }));
    let mut sum = term;
    for k in 1..20 {
        term = mul(&term, &m);
        term = term.map(|r| r.map(|v| v * h / k as f64));
        sum = std::array::from_fn(|i| std::array::from_fn(|j| sum[i][j] + term[i][j]));
    }
    for _ in 0..squarings {
        sum = mul(&sum, &sum);
    }
    sum
}

fn ray_from(x: [f64; 2], p: [f64; 2]) -> Ray {
    let q = QuadraticPhase::new(2, &[0.0; 4], &p, 0.0).unwrap();
    Ray::launch(&x, &q)
}

#[test]
fn rhs_examples() {
    let p = params(0.0, [1.0, 1.0]);
    assert_eq!(hamiltonian_rhs(&[0.0, 0.0], &[0.0, 0.0], &p), ([0.0; 3], [0.0; 3]));
    let (xd, pd) = hamiltonian_rhs(&[1.0, 0.0], &[0.0, 0.0], &p);
    assert_eq!(xd, [0.0; 3]);
    assert_eq!(pd, [-1.0, 0.0, 0.0]);
}

#[test]
fn flow_matches_matrix_exponential() {
    for (rotation, trap) in [(1.0, [0.0, 0.0]), (0.7, [1.0, 1.5])] {
        let p = params(rotation, trap);
        let (x0, p0) = ([1.0, -0.5], [if trap[0] == 0.0 { 0.0 } else { 0.3 }, 0.2]);
        let traj = integrate_ray(&ray_from(x0, p0), &p, 1e-3, 0.7).unwrap();
        assert!(traj.caustic.is_none());
        let e = flow_exponential(rotation, trap, 0.7);
        let z = [x0[0], x0[1], p0[0], p0[1]];
        let expect: Vec<f64> = (0..4).map(|i| (0..4).map(|k| e[i][k] * z[k]).sum()).collect();
        let r = traj.last();
        let got = [r.x[0], r.x[1], r.p[0], r.p[1]];
        for i in 0..4 {
            assert!((got[i] - expect[i]).abs() < 1e-10, "{got:?} vs {expect:?}");
        }
    }
}

#[test]
fn flow_is_linear() {
    let p = params(0.8, [1.0, 2.0]);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut pick = || [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
    let (xa, pa, xb, pb, xc, pc) = (pick(), pick(), pick(), pick(), pick(), pick());
    let end = |x: [f64; 2], q: [f64; 2]| {
        let traj = integrate_ray(&ray_from(x, q), &p, 1e-3, 0.7).unwrap();
        assert!(traj.caustic.is_none());
        let r = *traj.last();
        [r.x[0], r.x[1], r.p[0], r.p[1]]
    };
    let (a, b, c) = (end(xa, pa), end(xb, pb), end(xc, pc));
    let combo = |u: [f64; 2], v: [f64; 2], w: [f64; 2]| [u[0] + 2.0 * v[0] - w[0], u[1] + 2.0 * v[1] - w[1]];
    let s = end(combo(xa, xb, xc), combo(pa, pb, pc));
    for i in 0..4 {
        assert!((s[i] - (a[i] + 2.0 * b[i] - c[i])).abs() < 1e-9);
    }
}

#[test]
fn free_phase_stays_zero() {
    let p = params(1.3, [0.0, 0.0]);
    let traj = quadratic_phase_evolve(&QuadraticPhase::zero(2), &p, 1e-2, 2.0).unwrap();
    let q = traj.last();
    assert_eq!(linalg::frobenius(&q.sigma), 0.0);
    assert_eq!(q.b, [0.0; 3]);
    assert_eq!(q.c, 0.0);
}

#[test]
fn quadratic_phase_solves_hamilton_jacobi() {
    let p = params(0.9, [1.0, 1.4]);
    let q0 = QuadraticPhase::new(2, &[0.3, -0.1, -0.1, 0.2], &[0.4, -0.2], 0.1).unwrap();
    let traj = quadratic_phase_evolve(&q0, &p, 1e-3, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let h = 1e-3;
    for _ in 0..20 {
        let t = rng.gen_range(0.05..0.9);
        let x = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let s = |k: f64| traj.at(t + k * h).unwrap().value(&x);
        let s_t = (s(-2.0) - 8.0 * s(-1.0) + 8.0 * s(1.0) - s(2.0)) / (12.0 * h);
        let q = traj.at(t).unwrap();
        let r = hj_residual(s_t, &x, &q.gradient(&x)[..2], &p);
        assert!(r.abs() < 1e-8, "residual {r:e} at t = {t}");
    }
}

#[test]
fn ray_and_quadratic_phase_agree() {
    let p = params(1.0, [1.0, 1.2]);
    let q0 = QuadraticPhase::new(2, &[0.2, 0.1, 0.1, -0.3], &[0.1, 0.3], 0.0).unwrap();
    let traj = quadratic_phase_evolve(&q0, &p, 1e-3, 1.0).unwrap();
    for x0 in [[0.5, 0.5], [-1.0, 0.3], [1.5, -1.2]] {
        let ray = integrate_ray(&Ray::launch(&x0, &q0), &p, 1e-3, 1.0).unwrap();
        let r = ray.last();
        let q = traj.last();
        let g = q.gradient(&r.x[..2]);
        for i in 0..2 {
            assert!((g[i] - r.p[i]).abs() < 1e-8);
            for j in 0..2 {
                assert!((q.sigma[i][j] - r.sigma[i][j]).abs() < 1e-8);
            }
        }
        assert!(linalg::asymmetry(&r.sigma) < 1e-10);
    }
}

#[test]
fn general_phase_matches_fast_path() {
    let p = params(0.6, [1.0, 1.0]);
    let q0 = QuadraticPhase::new(2, &[0.1, 0.05, 0.05, -0.2], &[0.2, 0.0], 0.3).unwrap();
    let traj = quadratic_phase_evolve(&q0, &p, 1e-3, 0.8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let t = rng.gen_range(0.1..0.8);
        let x = [rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)];
        let q = traj.at(t).unwrap();
        let e = eval_phase_general(t, &x, &q0, &p).unwrap();
        assert!((e.value - q.value(&x)).abs() < 1e-8, "{} vs {}", e.value, q.value(&x));
        let g = q.gradient(&x);
        for i in 0..2 {
            assert!((e.gradient[i] - g[i]).abs() < 1e-8);
        }
    }
    let z = eval_phase_general(0.0, &[0.3, 0.4], &Wavy, &p).unwrap();
    assert_eq!(z.value, Wavy.value(&[0.3, 0.4]));
    assert_eq!(z.gradient, Wavy.gradient(&[0.3, 0.4]));
}

#[test]
fn general_phase_gradient_matches_differences() {
    let p = params(0.5, [1.0, 1.0]);
    let t = 0.5;
    let x = [0.4, -0.3];
    let e = eval_phase_general(t, &x, &Wavy, &p).unwrap();
    let h = 1e-3;
    for i in 0..2 {
        let (mut xp, mut xm) = (x, x);
        xp[i] += h;
        xm[i] -= h;
        let fd = (eval_phase_general(t, &xp, &Wavy, &p).unwrap().value
            - eval_phase_general(t, &xm, &Wavy, &p).unwrap().value)
            / (2.0 * h);
        assert!((fd - e.gradient[i]).abs() < 1e-5, "axis {i}: {fd} vs {}", e.gradient[i]);
    }
}

#[test]
fn monitor_values() {
    let samples: Vec<Vec<f64>> = (0..9).map(|k| vec![k as f64 - 4.0, 0.5 * k as f64]).collect();
    let free = params(0.0, [0.0, 0.0]);
    let zero = quadratic_phase_evolve(&QuadraticPhase::zero(2), &free, 1e-2, 1.0).unwrap();
    let m0 = subquadratic_monitor(|_| Ok(zero.last().sigma), &samples).unwrap();
    assert_eq!(m0, 0.0);
    let trap = params(0.0, [1.0, 1.0]);
    let traj = quadratic_phase_evolve(&QuadraticPhase::zero(2), &trap, 1e-3, 1.0).unwrap();
    let narrow = subquadratic_monitor(|_| traj.at(1.0).map(|q| q.sigma), &samples[3..6]).unwrap();
    let wide = subquadratic_monitor(|_| traj.at(1.0).map(|q| q.sigma), &samples).unwrap();
    assert!((wide - 1f64.tan()).abs() < 1e-8);
    assert_eq!(narrow, wide);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn transport_identities_hold(x1 in -2.0f64..2.0, x2 in -2.0f64..2.0, rotation in 0.0f64..1.5) {
        let p = params(rotation, [1.0, 1.3]);
        let ray = Ray::launch(&[x1, x2], &Wavy);
        let h = 1e-3;
        let traj = integrate_ray(&ray, &p, h, 0.6).unwrap();
        prop_assert!(traj.caustic.is_none());
        let mut integral = 0.0;
        for w in traj.samples.windows(2) {
            integral += 0.5 * h * (w[0].tr_sigma() + w[1].tr_sigma());
            prop_assert!(linalg::asymmetry(&w[1].sigma) < 1e-10);
        }
        let r = traj.last();
        prop_assert!((r.det_gamma() - integral.exp()).abs() < 1e-6);
        let e0 = ray.energy(&p);
        prop_assert!((r.energy(&p) - e0).abs() < 1e-10 * (1.0 + e0.abs()));
    }
}
