//! Gauss–Legendre rules and adaptive quadrature of the linking kernel over
//! pairs of straight segments.
//!
//! For segments `A(s) = a0 + s·da` and `B(t) = b0 + t·db` the double line
//! integral of the kernel is
//! `(1/4π) ∫∫ (da × db)·(A − B) / |A − B|³ ds dt`, which is smooth unless
//! the segments are close compared to their length. Pairs closer than the
//! longer segment are split before any rule is applied; otherwise nested
//! Gauss rules of increasing order are compared until two successive
//! estimates agree to the pair's share of the tolerance.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::geometry::{segment_distance, segment_distance_lower_bound};
use crate::par;
use crate::vec3::Vec3;

const INV_4PI: f64 = 1.0 / (4.0 * PI);

/// Gauss–Legendre nodes and weights mapped to `[0, 1]`.
#[derive(Clone, Debug)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    fn compute(n: usize) -> GaussRule {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            // Newton iteration on P_n from the Chebyshev-like initial guess.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let pn = if n == 1 { x } else { p1 };
                let pn1 = if n == 1 { 1.0 } else { p0 };
                dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
                let dx = pn / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            nodes[i] = 0.5 * (1.0 - x);
            weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
        }
        GaussRule { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// `∫₀¹ f` by this rule.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

const MAX_CACHED_ORDER: usize = 16;

/// Cached rule of order `n` (1 ≤ n ≤ 16).
pub fn gauss_legendre(n: usize) -> &'static GaussRule {
    static RULES: OnceLock<Vec<GaussRule>> = OnceLock::new();
    assert!((1..=MAX_CACHED_ORDER).contains(&n), "Gauss order {n} not cached");
    &RULES.get_or_init(|| (1..=MAX_CACHED_ORDER).map(GaussRule::compute).collect())[n - 1]
}

/// What is integrated over each segment pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Integrand {
    /// The linking kernel itself.
    Signed,
    /// Its absolute value (short-path decay diagnostics).
    Absolute,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairQuadrature {
    /// Absolute error target for the whole double sum, split uniformly
    /// across segment pairs.
    pub tol: f64,
    /// Per-pair relative acceptance; 0 disables it.
    pub rel_tol: f64,
    /// Pairs closer than this are refused.
    pub floor: f64,
    pub max_depth: u32,
}

impl Default for PairQuadrature {
    fn default() -> Self {
        PairQuadrature { tol: 1e-6, rel_tol: 0.0, floor: 1e-10, max_depth: 40 }
    }
}

impl PairQuadrature {
    pub fn with_tol(tol: f64) -> Self {
        PairQuadrature { tol, ..Self::default() }
    }

    /// Settings for `|L|` integrals, whose integrand has kinks where the
    /// kernel changes sign.
    pub fn absolute(tol: f64) -> Self {
        PairQuadrature { tol, rel_tol: 1e-6, floor: 1e-10, max_depth: 12 }
    }
}

/// A straight segment with cached length and midpoint.
#[derive(Clone, Copy, Debug)]
pub struct Segment {
    pub p0: Vec3,
    pub p1: Vec3,
    pub dir: Vec3,
    pub len: f64,
    pub mid: Vec3,
}

impl Segment {
    pub fn new(p0: Vec3, p1: Vec3) -> Self {
        let dir = p1 - p0;
        Segment { p0, p1, dir, len: dir.norm(), mid: (p0 + p1) * 0.5 }
    }
}

#[inline]
fn tensor_rule(a: &Segment, b: &Segment, c: Vec3, integrand: Integrand, rule: &GaussRule) -> f64 {
    let mut acc = 0.0;
    for (&s, &ws) in rule.nodes.iter().zip(&rule.weights) {
        let pa = a.p0 + a.dir * s;
        let mut row = 0.0;
        for (&t, &wt) in rule.nodes.iter().zip(&rule.weights) {
            let r = pa - (b.p0 + b.dir * t);
            let r2 = r.norm_sq();
            let num = c.dot(r);
            let v = match integrand {
                Integrand::Signed => num,
                Integrand::Absolute => num.abs(),
            };
            row += wt * v / (r2 * r2.sqrt());
        }
        acc += ws * row;
    }
    acc * INV_4PI
}

fn split_pair(a: &Segment, b: &Segment, integrand: Integrand, tol: f64, q: &PairQuadrature, depth: u32) -> Result<f64> {
    if a.len >= b.len {
        let m = a.mid;
        let l = adaptive_pair(&Segment::new(a.p0, m), b, integrand, 0.5 * tol, q, depth + 1)?;
        let r = adaptive_pair(&Segment::new(m, a.p1), b, integrand, 0.5 * tol, q, depth + 1)?;
        Ok(l + r)
    } else {
        let m = b.mid;
        let l = adaptive_pair(a, &Segment::new(b.p0, m), integrand, 0.5 * tol, q, depth + 1)?;
        let r = adaptive_pair(a, &Segment::new(m, b.p1), integrand, 0.5 * tol, q, depth + 1)?;
        Ok(l + r)
    }
}

const ORDERS: [usize; 4] = [2, 3, 5, 8];

/// Adaptive integral of the kernel (or its absolute value) over one pair.
pub fn adaptive_pair(a: &Segment, b: &Segment, integrand: Integrand, tol: f64, q: &PairQuadrature, depth: u32) -> Result<f64> {
    if a.len == 0.0 || b.len == 0.0 {
        return Ok(0.0);
    }
    let c = a.dir.cross(b.dir);
    if integrand == Integrand::Signed && c == Vec3::ZERO {
        return Ok(0.0);
    }
    let lmax = a.len.max(b.len);
    let lower = segment_distance_lower_bound(a.p0, a.p1, b.p0, b.p1);
    let dist = if lower > lmax { lower } else { segment_distance(a.p0, a.p1, b.p0, b.p1) };
    if dist < q.floor {
        return Err(Error::Proximity { distance: dist, floor: q.floor });
    }
    if dist < lmax && depth < q.max_depth {
        return split_pair(a, b, integrand, tol, q, depth);
    }
    let mut prev = tensor_rule(a, b, c, integrand, gauss_legendre(ORDERS[0]));
    for &n in &ORDERS[1..] {
        let cur = tensor_rule(a, b, c, integrand, gauss_legendre(n));
        let diff = (cur - prev).abs();
        if diff <= tol || diff <= q.rel_tol * cur.abs() {
            return Ok(cur);
        }
        prev = cur;
    }
    if depth < q.max_depth {
        split_pair(a, b, integrand, tol, q, depth)
    } else {
        Ok(prev)
    }
}

/// `∫_A ∫_B` of the kernel over two segment lists, rows reduced in index
/// order.
pub fn double_line_integral(a: &[Segment], b: &[Segment], integrand: Integrand, q: &PairQuadrature) -> Result<f64> {
    let pairs = a.len() * b.len();
    if pairs == 0 {
        return Ok(0.0);
    }
    let tol_pair = q.tol / pairs as f64;
    par::try_sum(a.len(), |i| {
        let sa = &a[i];
        let mut row = Vec::with_capacity(b.len());
        for sb in b {
            row.push(adaptive_pair(sa, sb, integrand, tol_pair, q, 0)?);
        }
        Ok(par::pairwise_sum(&row))
    })
}

/// Segments of an open polyline.
pub fn open_segments(points: &[Vec3]) -> Vec<Segment> {
    points.windows(2).map(|w| Segment::new(w[0], w[1])).collect()
}
