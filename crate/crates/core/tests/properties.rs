use std::f64::consts::PI;

use proptest::prelude::*;
use torus_diffusion::inference::{log_likelihood, score, Parameterization};
use torus_diffusion::io::{path_to_string, read_path};
use torus_diffusion::rng::seeded;
use torus_diffusion::special::{wrapped_normal_direct, wrapped_normal_fourier};
use torus_diffusion::{
    BvmParams, CircularDensity, DiffusionModel, FamilyKind, JumpModel, ModelSpec, PathSample, RosenblattMap,
    ToroidalDensity, TransitionKernel, VonMisesComponent,
};

const TAU: f64 = 2.0 * PI;

fn integral(n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = TAU / n as f64;
    (0..n).map(|i| f(i as f64 * h)).sum::<f64>() * h
}

fn density() -> impl Strategy<Value = CircularDensity> {
    prop_oneof![
        Just(CircularDensity::uniform()),
        (-PI..PI, 0.1..4.0f64).prop_map(|(m, k)| CircularDensity::von_mises(m, k).unwrap()),
        (-PI..PI, 0.05..0.7f64).prop_map(|(m, r)| CircularDensity::wrapped_cauchy(m, r).unwrap()),
        (0.2..0.8f64, -PI..0.0, 0.5..4.0f64, 0.0..PI, 0.5..4.0f64).prop_map(|(w, m1, k1, m2, k2)| {
            CircularDensity::von_mises_mixture(vec![
                VonMisesComponent { weight: w, mu: m1, kappa: k1 },
                VonMisesComponent { weight: 1.0 - w, mu: m2, kappa: k2 },
            ])
            .unwrap()
        }),
    ]
}

fn bvm() -> impl Strategy<Value = ToroidalDensity> {
    (-PI..PI, -PI..PI, 0.1..3.0f64, 0.1..3.0f64, -0.95..0.95f64).prop_map(|(m1, m2, k1, k2, r)| {
        // keep the density unimodal: |λ| < sqrt(κ₁κ₂)
        let lambda = r * (k1 * k2).sqrt();
        ToroidalDensity::bivariate_von_mises(BvmParams::new(m1, m2, k1, k2, lambda)).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cdf_inverts_and_extends_periodically(d in density(), x in -10.0..10.0f64, k in -3i32..4) {
        let back = d.inverse_cdf(d.cdf(x)).unwrap();
        prop_assert!((back - x).abs() < 1e-7, "{x} -> {back}");
        let shifted = d.cdf(x + TAU * k as f64) - d.cdf(x);
        prop_assert!((shifted - k as f64).abs() < 1e-12);
    }

    #[test]
    fn kernel_is_normalized_and_reversible(
        d in density(), sigma in 0.2..1.0f64, t in 0.1..2.0f64, x in 0.0..TAU, y in 0.0..TAU,
    ) {
        let m = DiffusionModel::circular(d, sigma).unwrap();
        let total = integral(4096, |z| m.transition_density(&[x], &[z], t).unwrap());
        prop_assert!((total - 1.0).abs() < 1e-8, "mass {total}");
        let lhs = m.stationary_pdf(&[x]) * m.transition_density(&[x], &[y], t).unwrap();
        let rhs = m.stationary_pdf(&[y]) * m.transition_density(&[y], &[x], t).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs());
    }

    #[test]
    fn kernel_satisfies_chapman_kolmogorov(
        d in density(), sigma in 0.3..1.0f64, t in 0.2..1.5f64, split in 0.2..0.8f64,
        x in 0.0..TAU, y in 0.0..TAU,
    ) {
        let m = DiffusionModel::circular(d, sigma).unwrap();
        let (s1, s2) = (split * t, (1.0 - split) * t);
        let composed = integral(4096, |z| {
            m.transition_density(&[x], &[z], s1).unwrap() * m.transition_density(&[z], &[y], s2).unwrap()
        });
        let direct = m.transition_density(&[x], &[y], t).unwrap();
        prop_assert!((composed - direct).abs() < 1e-6, "{composed} vs {direct}");
    }

    #[test]
    fn jump_kernel_is_normalized_and_reversible(
        d in density(), sigma in 0.2..1.0f64, t in 0.1..2.0f64, x in 0.0..TAU, y in 0.0..TAU,
    ) {
        let m = JumpModel::new(d, sigma).unwrap();
        let total = integral(4096, |z| m.transition_density(&[x], &[z], t).unwrap());
        prop_assert!((total - 1.0).abs() < 1e-6, "mass {total}");
        let lhs = m.stationary_pdf(&[x]) * m.transition_density(&[x], &[y], t).unwrap();
        let rhs = m.stationary_pdf(&[y]) * m.transition_density(&[y], &[x], t).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs());
    }

    #[test]
    fn wrapped_normal_representations_agree(theta in -PI..PI, mean in -PI..PI, var in 0.05..20.0f64) {
        let a = wrapped_normal_direct(theta, mean, var);
        let b = wrapped_normal_fourier(theta, mean, var);
        prop_assert!((a - b).abs() < 1e-12 * a.max(1e-3), "{a} vs {b}");
    }

    #[test]
    fn rosenblatt_map_inverts(d in bvm(), x1 in -7.0..7.0f64, x2 in -7.0..7.0f64) {
        let map = RosenblattMap::new(d);
        let y = map.forward(&[x1, x2]).unwrap();
        let back = map.inverse(&y).unwrap();
        prop_assert!((back[0] - x1).abs() < 1e-7 && (back[1] - x2).abs() < 1e-7, "{back:?}");
    }

    #[test]
    fn parameterization_round_trips(
        m1 in -PI..PI, k1 in 0.1..6.0f64, m2 in -PI..PI, k2 in 0.1..6.0f64, w in 0.05..0.95f64, s in 0.01..3.0f64,
    ) {
        let cases = [
            (ModelSpec::diffusion(FamilyKind::VonMises), vec![m1, k1, s]),
            (ModelSpec::jump(FamilyKind::WrappedCauchy), vec![m1, k1 / 7.0, s]),
            (ModelSpec::diffusion(FamilyKind::VonMisesMixture { components: 2 }), vec![w, m1, k1, m2, k2, s]),
        ];
        for (spec, xi) in cases {
            let p = Parameterization::unrestricted(spec);
            let back = p.to_natural(&p.to_unconstrained(&xi).unwrap());
            for (a, b) in xi.iter().zip(&back) {
                prop_assert!((a - b).abs() < 1e-10, "{spec:?}: {xi:?} vs {back:?}");
            }
        }
    }

    #[test]
    fn score_matches_finite_differences(
        mu in -PI..PI, kappa in 0.3..4.0f64, sigma in 0.1..1.0f64, seed in 0u64..1000,
    ) {
        let spec = ModelSpec::diffusion(FamilyKind::VonMises);
        let xi = [mu, kappa, sigma];
        let model = DiffusionModel::circular(CircularDensity::von_mises(mu, kappa).unwrap(), sigma).unwrap();
        let mut rng = seeded(seed);
        let start = model.sample_stationary(&mut rng).unwrap();
        let path = model.simulate_exact(&start, 30, 0.5, &mut rng).unwrap();
        let analytic = score(&spec, &xi, &path).unwrap();
        for j in 0..3 {
            let h = 1e-5 * xi[j].abs().max(0.1);
            let (mut up, mut dn) = (xi, xi);
            up[j] += h;
            dn[j] -= h;
            let fd = (log_likelihood(&spec, &up, &path).unwrap() - log_likelihood(&spec, &dn, &path).unwrap()) / (2.0 * h);
            prop_assert!((analytic[j] - fd).abs() < 1e-4 * analytic[j].abs().max(1.0), "{j}: {} vs {fd}", analytic[j]);
        }
    }

    #[test]
    fn path_csv_round_trips(angles in prop::collection::vec(-PI..PI, 2..40), delta in 0.01..5.0f64) {
        let path = PathSample::new(delta, 2, angles[..angles.len() / 2 * 2].to_vec()).unwrap();
        let text = path_to_string(&path).unwrap();
        let back = read_path(text.as_bytes(), None).unwrap();
        prop_assert_eq!(back.angles(), path.angles());
        prop_assert_eq!(path_to_string(&back).unwrap(), text);
    }
}
