//! Independent checks of the SDE coefficients, the simulators and the
//! estimators against closed forms and short-time moments of the kernel.

use std::f64::consts::PI;

use torus_diffusion::inference::ParamVector;
use torus_diffusion::rng::{replicate_rng, seeded};
use torus_diffusion::stats::{ks_one_sample, ks_two_sample};
use torus_diffusion::{
    fit_mle, BvmParams, CircularDensity, CovarianceSpec, DiffusionModel, FamilyKind, FitOptions, JumpMode, JumpModel,
    ModelSpec, ToroidalDensity, TransitionKernel,
};

const TAU: f64 = 2.0 * PI;

/// Drift and `DDᵀ` recovered from the first two moments of the exact kernel
/// over a short step, integrated on a fine window around the start.
fn short_time_moments(model: &DiffusionModel, x0: [f64; 2], dt: f64) -> ([f64; 2], [f64; 4]) {
    let (n, w) = (600, 0.08);
    let h = 2.0 * w / n as f64;
    let mut m1 = [0.0; 2];
    let mut m2 = [0.0; 4];
    for i in 0..=n {
        for j in 0..=n {
            let d = [-w + i as f64 * h, -w + j as f64 * h];
            let p = model.transition_density(&x0, &[x0[0] + d[0], x0[1] + d[1]], dt).unwrap() * h * h;
            m1[0] += p * d[0];
            m1[1] += p * d[1];
            m2[0] += p * d[0] * d[0];
            m2[1] += p * d[0] * d[1];
            m2[3] += p * d[1] * d[1];
        }
    }
    m2[2] = m2[1];
    (m1.map(|v| v / dt), m2.map(|v| v / dt))
}

#[test]
fn bivariate_coefficients_match_kernel_moments() {
    let cov = CovarianceSpec::new(vec![0.0625, 0.01, 0.01, 0.04], 2).unwrap();
    for lambda in [0.0, 0.8] {
        let d = ToroidalDensity::bivariate_von_mises(BvmParams::new(0.0, 0.0, 2.0, 1.0, lambda)).unwrap();
        let model = DiffusionModel::toroidal(d, cov.clone()).unwrap();
        let x0 = [0.5, 0.3];
        let c = model.sde_coefficients(&x0).unwrap();
        let dd = &c.diffusion;
        let a = [
            dd[0] * dd[0] + dd[1] * dd[1],
            dd[0] * dd[2] + dd[1] * dd[3],
            dd[2] * dd[0] + dd[3] * dd[1],
            dd[2] * dd[2] + dd[3] * dd[3],
        ];
        let (drift, second) = short_time_moments(&model, x0, 1e-4);
        for k in 0..2 {
            assert!((drift[k] - c.drift[k]).abs() < 2e-3, "lambda {lambda}: drift {drift:?} vs {:?}", c.drift);
        }
        for k in 0..4 {
            assert!((second[k] - a[k]).abs() < 1e-3 * a[0].max(a[3]), "lambda {lambda}: a {second:?} vs {a:?}");
        }
    }
}

#[test]
fn circular_coefficients_match_kernel_moments() {
    let model = DiffusionModel::circular(CircularDensity::von_mises(0.3, 1.5).unwrap(), 0.4).unwrap();
    let (x0, dt, n, w) = (1.2, 2e-6, 20_000, 0.02);
    let h = 2.0 * w / n as f64;
    let (mut m1, mut m2) = (0.0, 0.0);
    for i in 0..=n {
        let d = -w + i as f64 * h;
        let p = model.transition_density(&[x0], &[x0 + d], dt).unwrap() * h;
        m1 += p * d;
        m2 += p * d * d;
    }
    let c = model.sde_coefficients(&[x0]).unwrap();
    assert!((m1 / dt - c.drift[0]).abs() < 1e-3, "{} vs {}", m1 / dt, c.drift[0]);
    let a = c.diffusion[0].powi(2);
    assert!((m2 / dt - a).abs() < 1e-4 * a, "{} vs {a}", m2 / dt);
}

#[test]
fn long_horizon_draws_follow_the_stationary_law() {
    let model = DiffusionModel::circular(CircularDensity::von_mises(0.0, 2.0).unwrap(), 0.25).unwrap();
    let d = CircularDensity::von_mises(0.0, 2.0).unwrap();
    let mut rng = seeded(11);
    let draws: Vec<f64> = (0..5000)
        .map(|_| model.simulate_exact(&[2.5], 1, 10.0, &mut rng).unwrap().state(1)[0])
        .collect();
    let ks = ks_one_sample(&draws, |x| d.cdf(x)).unwrap();
    assert!(ks.statistic < 0.03, "D = {}", ks.statistic);
}

#[test]
fn euler_is_exact_for_the_uniform_density() {
    // zero drift and constant volatility: one Euler step is the exact law
    let model = DiffusionModel::circular(CircularDensity::uniform(), 0.7).unwrap();
    let mut rng = seeded(12);
    let exact: Vec<f64> = (0..5000)
        .map(|_| model.simulate_exact(&[1.0], 1, 0.2, &mut rng).unwrap().state(1)[0])
        .collect();
    let euler: Vec<f64> = (0..5000)
        .map(|_| model.simulate_euler(&[1.0], 1, 0.2, 1, &mut rng).unwrap().state(1)[0])
        .collect();
    let ks = ks_two_sample(&exact, &euler).unwrap();
    assert!(ks.statistic < 0.03, "D = {}", ks.statistic);
}

#[test]
fn jump_increments_are_cauchy_in_both_modes() {
    let model = JumpModel::new(CircularDensity::uniform(), 0.3).unwrap();
    let delta = 0.5;
    let scale = 0.3 * delta;
    let mut rng = seeded(13);
    let direct: Vec<f64> = (0..10_000).map(|_| model.increment(delta, JumpMode::Direct, &mut rng)).collect();
    let sub: Vec<f64> = (0..10_000)
        .map(|_| model.increment(delta, JumpMode::Subordinated, &mut rng))
        .collect();
    let cauchy = |x: f64| 0.5 + (x / scale).atan() / PI;
    for (name, s) in [("direct", &direct), ("subordinated", &sub)] {
        let ks = ks_one_sample(s, cauchy).unwrap();
        assert!(ks.p_value > 0.001, "{name}: D = {}, p = {}", ks.statistic, ks.p_value);
    }
    assert!(ks_two_sample(&direct, &sub).unwrap().statistic < 0.03);
}

#[test]
fn jump_paths_stay_on_the_circle() {
    let model = JumpModel::new(CircularDensity::von_mises(1.0, 3.0).unwrap(), 0.5).unwrap();
    let mut rng = seeded(14);
    let path = model.simulate_path(-4.0, 200, 0.1, JumpMode::Subordinated, &mut rng).unwrap();
    assert!(path.angles().iter().all(|a| (0.0..TAU).contains(a)));
    assert_eq!(path.n_steps(), 200);
}

#[test]
fn wald_intervals_cover_the_truth() {
    let spec = ModelSpec::diffusion(FamilyKind::VonMises);
    let truth = [0.0, 1.0, 1.0 / TAU];
    let model = DiffusionModel::circular(CircularDensity::von_mises(0.0, 1.0).unwrap(), truth[2]).unwrap();
    let m = 100;
    let mut covered = [0usize; 3];
    for i in 0..m {
        let mut rng = replicate_rng(15, i as u64);
        let start = model.sample_stationary(&mut rng).unwrap();
        let path = model.simulate_exact(&start, 200, 0.5, &mut rng).unwrap();
        let init = ParamVector::from_natural(FamilyKind::VonMises, &truth).unwrap();
        let fit = fit_mle(&spec, &[path], Some(&init), &FitOptions::default()).unwrap();
        let est = fit.estimate.natural();
        for k in 0..3 {
            let se = fit.standard_errors[k].unwrap();
            let mut err = est[k] - truth[k];
            if k == 0 {
                err = (err + PI).rem_euclid(TAU) - PI;
            }
            if err.abs() <= 1.96 * se {
                covered[k] += 1;
            }
        }
    }
    for (k, c) in covered.iter().enumerate() {
        assert!(*c as f64 >= 0.9 * m as f64, "parameter {k}: {c}/{m}");
    }
}
