use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::fields::FieldSpec;
use crate::vec3::Vec3;

/// How seed points are drawn for Monte-Carlo averages over `M × M`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Uniform in the support box, weight = box volume.
    Box,
    /// Density proportional to the orbit frequency `|F|/(2πρ)` summed over
    /// tubes, weight = its reciprocal. Unbiased for any integrand that
    /// vanishes outside the supports.
    #[default]
    FluxWeighted,
}

/// A seed point with its importance weight `1/p(x)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightedPoint {
    pub point: Vec3,
    pub weight: f64,
}

fn frequency_density(field: &FieldSpec, p: Vec3) -> f64 {
    field.tubes.iter().map(|t| t.flux_density(p)).sum()
}

/// Draw one seed point for `field`. Falls back to box sampling for fields
/// with no flux.
pub fn sample_point<R: Rng>(field: &FieldSpec, sampling: Sampling, rng: &mut R) -> WeightedPoint {
    let total = field.total_abs_flux();
    if sampling == Sampling::Box || total <= 0.0 {
        let b = field.support_box();
        let point = b.at_fraction([rng.random(), rng.random(), rng.random()]);
        return WeightedPoint { point, weight: b.volume() };
    }
    let mut pick = rng.random::<f64>() * total;
    let mut tube = &field.tubes[field.tubes.len() - 1];
    for t in &field.tubes {
        let f = t.flux().abs();
        if pick < f {
            tube = t;
            break;
        }
        pick -= f;
    }
    // Radial density ∝ r·(1 − r²/a²)²: with s = r²/a², s has density 3(1 − s)².
    let u: f64 = rng.random();
    let s = 1.0 - (1.0 - u).cbrt();
    let r = tube.minor_radius() * s.sqrt();
    let theta = 2.0 * PI * rng.random::<f64>();
    let phi = 2.0 * PI * rng.random::<f64>();
    let point = tube.point_at(r, theta, phi);
    let density = frequency_density(field, point);
    let weight = if density > 0.0 { total / density } else { 0.0 };
    WeightedPoint { point, weight }
}

/// Seed pair `k` of a run: `(x, y)` drawn from stream `k` of the run seed.
pub fn sample_pair(x: &FieldSpec, y: &FieldSpec, sampling: Sampling, seed: u64, k: u64) -> (WeightedPoint, WeightedPoint) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    let px = sample_point(x, sampling, &mut rng);
    let py = sample_point(y, sampling, &mut rng);
    (px, py)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{make_hopf_pair, make_superposition_pair, TubeSpec};

    #[test]
    fn box_samples_stay_in_box() {
        let (x, _) = make_hopf_pair(0.2, 1.0).unwrap();
        let b = x.support_box();
        for k in 0..200 {
            let (p, _) = sample_pair(&x, &x, Sampling::Box, 5, k);
            assert!(b.contains(p.point));
            assert_eq!(p.weight, b.volume());
        }
    }

    #[test]
    fn flux_weighted_samples_are_inside_tubes() {
        let (_, y) = make_superposition_pair(0.2, 1.0).unwrap();
        for k in 0..500 {
            let (p, _) = sample_pair(&y, &y, Sampling::FluxWeighted, 9, k);
            assert!(y.contains(p.point) || p.weight == 0.0);
        }
    }

    #[test]
    fn streams_are_deterministic_and_distinct() {
        let (x, y) = make_hopf_pair(0.2, 1.0).unwrap();
        let a = sample_pair(&x, &y, Sampling::FluxWeighted, 1, 3);
        let b = sample_pair(&x, &y, Sampling::FluxWeighted, 1, 3);
        let c = sample_pair(&x, &y, Sampling::FluxWeighted, 1, 4);
        assert_eq!(a, b);
        assert_ne!(a.0.point, c.0.point);
    }

    /// `E[w·f] = ∫ f` for integrands supported in the tube: `f = |X|`
    /// integrates to `2πR·|Φ|`, and `f = |F|/(2πρ)` to `|Φ|` exactly.
    #[test]
    fn importance_weights_are_unbiased() {
        let tube = TubeSpec::new(Vec3::new(0.3, -0.2, 0.1), Vec3::new(1.0, 2.0, 2.0).normalized(), 1.0, 0.3, 1.0, 1)
            .unwrap();
        let field = FieldSpec::single(tube.clone());
        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (mut acc, mut acc_sq) = (0.0, 0.0);
        for _ in 0..n {
            let p = sample_point(&field, Sampling::FluxWeighted, &mut rng);
            assert!(tube.contains(p.point));
            let v = p.weight * field.eval(p.point).norm();
            acc += v;
            acc_sq += v * v;
        }
        let mean = acc / n as f64;
        let se = ((acc_sq / n as f64 - mean * mean) / n as f64).sqrt();
        let exact = 2.0 * PI * tube.flux().abs();
        assert!((mean - exact).abs() < 4.0 * se, "{mean} vs {exact} (se {se})");

        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut acc = 0.0;
        for _ in 0..1000 {
            let p = sample_point(&field, Sampling::FluxWeighted, &mut rng);
            acc += p.weight * tube.flux_density(p.point);
        }
        assert!((acc / 1000.0 - tube.flux().abs()).abs() < 1e-12);
    }

    #[test]
    fn zero_field_falls_back_to_box() {
        let z = FieldSpec::zero();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = sample_point(&z, Sampling::FluxWeighted, &mut rng);
        assert_eq!(p.point, Vec3::ZERO);
        assert_eq!(p.weight, 0.0);
    }
}
