//! Segment and polyline distance queries.

use crate::vec3::Vec3;

/// Closest points between segments `p0→p1` and `q0→q1`, returned as the
/// segment parameters `(s, t) ∈ [0,1]²` and the distance.
///
/// Handles zero-length segments (points) and parallel segments.
pub fn closest_segment_params(p0: Vec3, p1: Vec3, q0: Vec3, q1: Vec3) -> (f64, f64, f64) {
    const EPS: f64 = 1e-300;
    let d1 = p1 - p0;
    let d2 = q1 - q0;
    let r = p0 - q0;
    let a = d1.norm_sq();
    let e = d2.norm_sq();
    let f = d2.dot(r);

    let (s, t);
    if a <= EPS && e <= EPS {
        s = 0.0;
        t = 0.0;
    } else if a <= EPS {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(r);
        if e <= EPS {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > 1e-14 * a * e { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    let dist = ((p0 + d1 * s) - (q0 + d2 * t)).norm();
    (s, t, dist)
}

#[inline]
pub fn segment_distance(p0: Vec3, p1: Vec3, q0: Vec3, q1: Vec3) -> f64 {
    closest_segment_params(p0, p1, q0, q1).2
}

/// Distance from point `p` to segment `a→b`.
pub fn point_segment_distance(p: Vec3, a: Vec3, b: Vec3) -> f64 {
    segment_distance(p, p, a, b)
}

/// Lower bound on the distance between two segments from their bounding
/// spheres. Cheap pre-filter for pair loops.
#[inline]
pub fn segment_distance_lower_bound(p0: Vec3, p1: Vec3, q0: Vec3, q1: Vec3) -> f64 {
    let cp = (p0 + p1) * 0.5;
    let cq = (q0 + q1) * 0.5;
    (cp - cq).norm() - 0.5 * ((p1 - p0).norm() + (q1 - q0).norm())
}
