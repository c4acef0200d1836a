use std::f64::consts::PI;

use asymlink::config::Preset;
use asymlink::ergodic::{
    average_linking, verify_arnold, ArnoldConfig, Horizon, LambdaMode, LambdaOptions, Sampling,
};
use asymlink::fields::{FieldSpec, TubeSpec};
use asymlink::linking::{gauss_linking, ClosedCurve};
use asymlink::vec3::{Rotation, Vec3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn preset_fields() -> Vec<FieldSpec> {
    Preset::ALL
        .iter()
        .flat_map(|p| {
            let (x, y) = p.build(0.2, 1.0).unwrap();
            [x, y]
        })
        .collect()
}

#[test]
fn divergence_vanishes_across_support_boxes() {
    for (i, f) in preset_fields().iter().enumerate() {
        let b = f.support_box();
        let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
        for _ in 0..10_000 {
            let p = b.at_fraction([rng.random(), rng.random(), rng.random()]);
            let d = f.divergence(p, 1e-7);
            assert!(d.abs() < 1e-6, "field {i}: div {d:e} at {p:?}");
        }
    }
}

/// Away from the `r = a` shell the central-difference divergence is pure
/// truncation error: it falls by 4× when the step halves, and it is below
/// 1e-6 at step 1e-4 for the canonical `a = 0.5` tube.
#[test]
fn divergence_residual_is_second_order_truncation() {
    let (x, _) = Preset::HopfPair.build(0.2, 1.0).unwrap();
    let p = Vec3::new(1.12, 0.05, 0.07);
    let ratio = x.divergence(p, 1e-4) / x.divergence(p, 5e-5);
    assert!((3.6..4.4).contains(&ratio), "ratio {ratio}");

    let canon = FieldSpec::single(TubeSpec::canonical(0.5, 1.0).unwrap());
    let b = canon.support_box();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10_000 {
        let p = b.at_fraction([rng.random(), rng.random(), rng.random()]);
        let r = canon.tubes[0].coords(p).core_dist_sq.sqrt();
        if (r - 0.5).abs() > 2e-4 {
            assert!(canon.divergence(p, 1e-4).abs() < 1e-6, "at {p:?}");
        }
    }
}

fn unit(theta: f64, phi: f64) -> Vec3 {
    Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos())
}

fn tube_strategy() -> impl Strategy<Value = TubeSpec> {
    (
        prop::array::uniform3(-1.0..1.0f64),
        0.0..PI,
        0.0..2.0 * PI,
        0.5..1.5f64,
        0.1..0.4f64,
        -2.0..2.0f64,
        prop::bool::ANY,
    )
        .prop_map(|(c, th, ph, r, a, amp, neg)| {
            TubeSpec::new(Vec3::new(c[0], c[1], c[2]), unit(th, ph), r, a, amp, if neg { -1 } else { 1 }).unwrap()
        })
}

fn circle(center: Vec3, normal: Vec3, radius: f64, n: usize) -> ClosedCurve {
    let (e1, e2) = normal.orthonormal_basis();
    let v = (0..n)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / n as f64;
            center + (e1 * t.cos() + e2 * t.sin()) * radius
        })
        .collect();
    ClosedCurve::new(v, 0..0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eval_is_linear_in_the_tube_list(tubes in prop::collection::vec(tube_strategy(), 1..5), p in prop::array::uniform3(-2.0..2.0f64)) {
        let p = Vec3::new(p[0], p[1], p[2]);
        let whole = FieldSpec::new(tubes.clone()).eval(p);
        let parts = tubes.iter().fold(Vec3::ZERO, |acc, t| acc + t.eval(p));
        let scale = tubes.iter().map(|t| t.eval(p).norm()).sum::<f64>();
        prop_assert!((whole - parts).norm() <= 1e-14 * scale.max(f64::MIN_POSITIVE));
    }

    #[test]
    fn eval_is_zero_outside_support_box(tube in tube_strategy(), u in prop::array::uniform3(0.0..1.0f64), axis in 0usize..3, far in prop::bool::ANY) {
        let b = tube.support_box();
        let mut p = b.at_fraction(u);
        let off = if far { b.max_corner.component(axis) + 1e-9 + u[axis] } else { b.min_corner.component(axis) - 1e-9 - u[axis] };
        p = p.with_component(axis, off);
        prop_assert_eq!(tube.eval(p), Vec3::ZERO);
    }

    #[test]
    fn gauss_linking_is_rigid_motion_invariant(
        ra in 0.6..1.4f64, ratio in 0.6..1.4f64, n in 64usize..200,
        angles in prop::array::uniform3(0.0..2.0 * PI), shift in prop::array::uniform3(-3.0..3.0f64),
    ) {
        let a = circle(Vec3::ZERO, Vec3::Z, ra, n);
        let b = circle(Vec3::new(ra, 0.0, 0.0), Vec3::Y, ra * ratio, n + 7);
        let base = gauss_linking(&a, &b, 1e-10).unwrap();
        let rot = Rotation::from_euler_zyz(angles[0], angles[1], angles[2]);
        let s = Vec3::new(shift[0], shift[1], shift[2]);
        let moved = gauss_linking(&a.transformed(&rot, s), &b.transformed(&rot, s), 1e-10).unwrap();
        prop_assert!((moved - base).abs() < 1e-9, "{} vs {}", moved, base);
        let reversed = gauss_linking(&a, &b.reversed(), 1e-10).unwrap();
        prop_assert!((reversed + base).abs() < 1e-12);
    }
}

#[test]
fn gauss_linking_converges_under_vertex_doubling() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for k in 0..10 {
        let ra = rng.random_range(0.6..1.4);
        let rb = ra * rng.random_range(0.6..1.4);
        let offset = if k % 2 == 0 { ra } else { ra + rb + 0.3 };
        let rot = Rotation::from_euler_zyz(rng.random(), rng.random(), rng.random());
        let n = rng.random_range(64..257);
        let value = |m: usize| {
            let a = circle(Vec3::ZERO, Vec3::Z, ra, m).transformed(&rot, Vec3::ZERO);
            let b = circle(Vec3::new(offset, 0.0, 0.0), Vec3::Y, rb, m + 3).transformed(&rot, Vec3::ZERO);
            gauss_linking(&a, &b, 1e-8).unwrap()
        };
        let (coarse, fine) = (value(n), value(2 * n));
        assert!((coarse - fine).abs() < 1e-6, "pair {k}: {coarse} vs {fine}");
    }
}

fn stderr(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
}

/// Standard error of the weighted estimator at n = 50 and 200, averaged
/// over disjoint blocks of one 800-sample run, scales like n^{-1/2}.
#[test]
fn stderr_scales_like_inverse_sqrt_n() {
    let (x, y) = Preset::HopfPair.build(0.2, 1.0).unwrap();
    let h = Horizon::equal(4.0 * PI).unwrap();
    let a = average_linking(&x, &y, &h, 800, 1, LambdaMode::Kernel, Sampling::FluxWeighted, &LambdaOptions::default())
        .unwrap();
    let v: Vec<f64> = a.samples.iter().filter(|s| !s.estimate.discarded).map(|s| s.weight * s.estimate.value).collect();
    assert_eq!(v.len(), 800);
    let reference = stderr(&v) * 800f64.sqrt();
    assert!((a.stderr * 800f64.sqrt() - reference).abs() < 1e-12 * reference);
    for n in [50usize, 200] {
        let blocks: Vec<f64> = v.chunks(n).map(|c| stderr(c) * (n as f64).sqrt()).collect();
        let mean = blocks.iter().sum::<f64>() / blocks.len() as f64;
        assert!((mean / reference - 1.0).abs() < 0.2, "n = {n}: {mean} vs {reference}");
    }
}

#[test]
fn superposition_pair_satisfies_the_helicity_identity() {
    let (x, y) = Preset::SuperpositionPair.build(0.2, 1.0).unwrap();
    let cfg = ArnoldConfig {
        horizon: Horizon::equal(8.0 * PI).unwrap(),
        n_samples: 100,
        seed: 3,
        decay_schedule: Vec::new(),
        ..ArnoldConfig::default()
    };
    let r = verify_arnold(&x, &y, &cfg);
    assert!(r.errors.is_empty(), "{:?}", r.errors);
    assert!(r.pass, "Λ̂ = {} ± {}, Ĥ = {}", r.lambda_avg, r.lambda_stderr, r.hopf_kernel);
    let phi = PI * 0.04 / 3.0;
    assert!((r.thin_tube_prediction.unwrap() - 2.0 * phi * phi).abs() < 1e-15);
}
