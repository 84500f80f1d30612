use core::f64::consts::{FRAC_PI_2, PI};

use lensloc_core::array_model::{lens_amplitude, ArrayConfig};
use lensloc_core::crlb::{build_fim, crlb_lens, FimLink, Variant};
use lensloc_core::estimators::{r2sa, sic_multi, SicUpdate};
use lensloc_core::localization::{all_pairs, exact_measurements, objective, solve_se, Pose, SolveContext, SolverOptions};
use lensloc_core::math::{sinc, wrap_angle};
use lensloc_core::scenario::{body_angle, facing_array, resolve_overlaps, true_aoa, Point2};
use lensloc_core::signal::{synthesize, PathSpec, Snapshot};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn lens31() -> ArrayConfig {
    ArrayConfig::lens(31, 15.0, 7.5).unwrap()
}

fn noiseless(cfg: &ArrayConfig, paths: &[PathSpec]) -> Snapshot {
    synthesize(cfg, paths, 0.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap()
}

proptest! {
    #[test]
    fn r2sa_noiseless_exact(n in -14i64..=14, e in -0.45f64..0.45) {
        let cfg = lens31();
        let theta = ((n as f64 + e) / 15.0).asin();
        let est = r2sa(&cfg, &noiseless(&cfg, &[PathSpec::unit(theta)])).unwrap();
        prop_assert!((est.theta_hat - theta).abs() <= 1e-9);
    }

    #[test]
    fn r2sa_ignores_phase_and_scale(theta in -1.2f64..1.2, phase in 0.0..2.0 * PI, scale in 0.01f64..100.0, seed in 0u64..1000) {
        let cfg = lens31();
        let s = synthesize(&cfg, &[PathSpec::unit(theta)], 0.1, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let rot = Complex64::from_polar(scale, phase);
        let t = Snapshot { y: s.y.iter().map(|v| v * rot).collect(), sigma2: s.sigma2 };
        let a = r2sa(&cfg, &s).unwrap();
        let b = r2sa(&cfg, &t).unwrap();
        prop_assert_eq!(a.n_star, b.n_star);
        prop_assert!((a.theta_hat - b.theta_hat).abs() < 1e-12);
    }

    #[test]
    fn sic_keeps_separated_pairs_within_a_cell(sa in -0.85f64..0.85, cells in 3.0f64..12.0, phase in 0.0..2.0 * PI) {
        let cfg = lens31();
        let sb = sa + cells / 15.0;
        prop_assume!(sb < 0.9);
        let paths = [
            PathSpec::unit(sa.asin()),
            PathSpec::new(sb.asin(), Complex64::from_polar(1.0, phase), 1.0),
        ];
        let est = sic_multi(&cfg, &noiseless(&cfg, &paths), 2, SicUpdate::Projection).unwrap();
        let mut got: Vec<f64> = est.iter().map(|e| e.theta_hat.sin()).collect();
        got.sort_by(f64::total_cmp);
        prop_assert!(15.0 * (got[0] - sa).abs() < 1.0);
        prop_assert!(15.0 * (got[1] - sb).abs() < 1.0);
    }

    #[test]
    fn sic_exact_on_critical_pairs(a in -14i64..=14, b in -14i64..=14, phase in 0.0..2.0 * PI) {
        prop_assume!((a - b).abs() >= 2);
        let cfg = lens31();
        let ta = (a as f64 / 15.0).asin();
        let tb = (b as f64 / 15.0).asin();
        let paths = [PathSpec::unit(ta), PathSpec::new(tb, Complex64::from_polar(0.8, phase), 1.0)];
        let est = sic_multi(&cfg, &noiseless(&cfg, &paths), 2, SicUpdate::Projection).unwrap();
        prop_assert!((est[0].theta_hat - ta).abs() < 1e-12);
        prop_assert!((est[1].theta_hat - tb).abs() < 1e-12);
    }

    #[test]
    fn aoa_antisymmetry(x1 in -50.0f64..50.0, y1 in -50.0f64..50.0, x2 in -50.0f64..50.0, y2 in -50.0f64..50.0) {
        let (a, b) = (Point2::new(x1, y1), Point2::new(x2, y2));
        prop_assume!(a.distance(&b) > 1e-6);
        let f = true_aoa(a, b, 0.0).unwrap();
        let r = true_aoa(b, a, 0.0).unwrap();
        prop_assert!(wrap_angle(f - wrap_angle(r + PI)).abs() < 1e-12);
    }

    #[test]
    fn facing_roundtrip(theta in -PI..PI) {
        let (face, local) = facing_array(theta);
        prop_assert!(local.abs() <= FRAC_PI_2);
        prop_assert!(wrap_angle(body_angle(face, local) - theta).abs() < 1e-12);
    }

    #[test]
    fn overlaps_resolved(mut s in proptest::collection::vec(0.0f64..30.0, 0..8)) {
        s.sort_by(f64::total_cmp);
        let out = resolve_overlaps(&s, 4.7, 30.0);
        prop_assert_eq!(out.len(), s.len().min(7));
        for w in out.windows(2) {
            prop_assert!(w[1] - w[0] >= 4.7 - 1e-9);
        }
        if let (Some(first), Some(last)) = (out.first(), out.last()) {
            prop_assert!(*first >= -1e-12 && *last <= 30.0 + 1e-9);
        }
    }

    #[test]
    fn lens_crlb_even(theta in 0.0f64..1.3) {
        let cfg = lens31();
        let a = crlb_lens(&cfg, theta, 1.0).unwrap();
        let b = crlb_lens(&cfg, -theta, 1.0).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn objective_similarity_invariant(
        pts in proptest::collection::vec((-40.0f64..40.0, -40.0f64..40.0, 0.0..2.0 * PI), 4..7),
        rot in -PI..PI, scale in 0.1f64..10.0, tx in -100.0f64..100.0, ty in -100.0f64..100.0,
        noise in proptest::collection::vec(-0.05f64..0.05, 42),
    ) {
        let poses: Vec<Pose> = pts.iter().map(|&(x, y, w)| Pose::new(x, y, w)).collect();
        for i in 0..poses.len() {
            for j in 0..i {
                prop_assume!(poses[i].position().distance(&poses[j].position()) > 1e-3);
            }
        }
        let mut meas = exact_measurements(&poses, &all_pairs(poses.len())).unwrap();
        for (m, n) in meas.entries.iter_mut().zip(noise.iter()) {
            m.theta += n;
        }
        let base = objective(&meas, &poses, false);
        let (s, c) = rot.sin_cos();
        let moved: Vec<Pose> = poses
            .iter()
            .map(|p| Pose::new(scale * (c * p.x - s * p.y) + tx, scale * (s * p.x + c * p.y) + ty, p.omega + rot))
            .collect();
        prop_assert!((objective(&meas, &moved, false) - base).abs() < 1e-9);
    }

    #[test]
    fn fim_is_symmetric(pts in proptest::collection::vec((-40.0f64..40.0, -40.0f64..40.0), 3..6), var in 1e-6f64..1e-2) {
        let pos: Vec<Point2> = pts.iter().map(|&(x, y)| Point2::new(x, y)).collect();
        for i in 0..pos.len() {
            for j in 0..i {
                prop_assume!(pos[i].distance(&pos[j]) > 1e-3);
            }
        }
        let links: Vec<FimLink> = all_pairs(pos.len()).into_iter().map(|(rx, tx)| FimLink { rx, tx, variance: var }).collect();
        for variant in [Variant::PaperExact, Variant::Textbook] {
            let f = build_fim(&pos, &links, variant).unwrap().matrix;
            prop_assert_eq!(&f, &f.transpose());
        }
    }
}

#[test]
fn sinc_energy_nearly_unit() {
    for n in [31usize, 61, 121] {
        let cfg = ArrayConfig::critical_lens_min_focal(n).unwrap();
        let l = cfg.aperture;
        for i in 0..=120 {
            let theta = (-60.0 + i as f64).to_radians();
            let s = theta.sin();
            let e: f64 = cfg.indices().map(|k| sinc(k as f64 - l * s).powi(2)).sum();
            assert!((0.9..=1.0 + 1e-12).contains(&e), "N={n} theta={theta}: {e}");
        }
    }
}

#[test]
fn amplitude_derivatives_match_finite_differences() {
    let cfg = lens31();
    let h = 1e-6;
    for i in 0..=300 {
        let theta = (-75.0 + 0.5 * i as f64).to_radians();
        let a = lens_amplitude(&cfg, theta);
        let p = lens_amplitude(&cfg, theta + h).values;
        let m = lens_amplitude(&cfg, theta - h).values;
        let scale = a.derivs.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        for k in 0..cfg.n {
            let fd = (p[k] - m[k]) / (2.0 * h);
            assert!((fd - a.derivs[k]).abs() <= 1e-6 * scale, "theta={theta} k={k}");
        }
    }
}

fn random_scene(rng: &mut ChaCha8Rng, n: usize) -> Vec<Pose> {
    use rand::Rng;
    loop {
        let poses: Vec<Pose> = (0..n)
            .map(|_| Pose::new(rng.random_range(-30.0..30.0), rng.random_range(-30.0..30.0), rng.random_range(0.0..2.0 * PI)))
            .collect();
        let ok = (0..n).all(|i| (0..i).all(|j| poses[i].position().distance(&poses[j].position()) > 3.0));
        if ok {
            return poses;
        }
    }
}

#[test]
fn noiseless_scenes_reach_zero_residual() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let opts = SolverOptions::default();
    let mut failures = 0;
    for trial in 0..100 {
        let n = 4 + trial % 3;
        let truth = random_scene(&mut rng, n);
        let meas = exact_measurements(&truth, &all_pairs(n)).unwrap();
        assert!(objective(&meas, &truth, false) < 1e-24);
        let ctx = SolveContext {
            anchor_pose: Some(truth[0]),
            baseline: Some(truth[0].position().distance(&truth[1].position())),
            bounds: Some((Point2::new(-40.0, -40.0), Point2::new(40.0, 40.0))),
            initial: None,
        };
        let est = solve_se(&meas, &opts, &ctx, &mut rng).unwrap();
        let recovered = est.residual <= 1e-12
            && est.poses.iter().zip(&truth).all(|(e, t)| {
                e.position().distance(&t.position()) < 1e-6 && wrap_angle(e.omega - t.omega).abs() < 1e-8
            });
        if !recovered {
            failures += 1;
        }
        for w in est.history.windows(2) {
            assert!(w[1] <= w[0], "objective increased between accepted steps");
        }
    }
    assert_eq!(failures, 0, "{failures} of 100 scenes missed the global minimum");
}

#[test]
fn ppp_lane_counts_match_mean() {
    use lensloc_core::scenario::{drop_vehicles, IntersectionSpec};
    let spec = IntersectionSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let drops = 10_000;
    let counts: Vec<f64> = (0..drops)
        .map(|_| drop_vehicles(&spec, 10.0, &mut rng).unwrap().len() as f64)
        .collect();
    let mean = counts.iter().sum::<f64>() / drops as f64;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (drops - 1) as f64;
    let se = (var / drops as f64).sqrt();
    let expected = 10.0 * 0.03 * 12.0;
    assert!((mean - expected).abs() <= 3.0 * se, "mean {mean} vs {expected} (se {se})");
}
