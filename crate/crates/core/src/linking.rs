//! Linking form, short-path closure and linking numbers of closed polylines.
//!
//! Sign convention: ℝ³ is right-handed and curves are oriented by the flow
//! direction. The Gauss kernel below integrates to the linking number whose
//! crossing signs follow the right-hand rule: looking down the projection
//! direction, a crossing is positive when the over-strand turns
//! counter-clockwise onto the under-strand. With this convention the cores
//! of [`crate::fields::make_hopf_pair`] have linking number +1.

use std::f64::consts::PI;
use std::io::{BufRead, Write};
use std::ops::Range;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::FieldSpec;
use crate::flow::{integrate, StepControl, Trajectory};
use crate::geometry::{segment_distance, segment_distance_lower_bound};
use crate::quadrature::{double_line_integral, Integrand, PairQuadrature, Segment};
use crate::vec3::{Rotation, Vec3};

/// Below this separation the kernel is not evaluated.
pub const KERNEL_SINGULAR_DISTANCE: f64 = 1e-14;

/// Minimum spacing between consecutive vertices of a closed curve.
pub const MIN_VERTEX_SPACING: f64 = 1e-12;

/// Retry budget for finding a generic projection direction.
pub const GENERICITY_RETRIES: usize = 32;

/// Crossings closer than this to a vertex (in the projection plane) make a
/// projection non-generic.
pub const GENERICITY_EPS: f64 = 1e-9;

/// The linking form on ℝ³: `L(V, W) = (1/4π)·⟨V, W × (x − y)⟩ / |x − y|³`
/// for `V` tangent at `x` and `W` tangent at `y`.
///
/// Evaluated as `(V × W)·(x − y) / |x − y|³`, which makes the swap
/// `(x,V) ↔ (y,W)` bit-exact: both the cross product and the difference
/// change sign exactly.
pub fn kernel(x: Vec3, v: Vec3, y: Vec3, w: Vec3) -> Result<f64> {
    let d = x - y;
    let r = d.norm();
    if r < KERNEL_SINGULAR_DISTANCE {
        return Err(Error::Singular { distance: r });
    }
    Ok(v.cross(w).dot(d) / (4.0 * PI * r * r * r))
}

/// An oriented closed polyline, implicitly closed from the last vertex back
/// to the first. Segment `i` runs from vertex `i` to vertex `(i+1) mod n`.
/// `closure` lists the segments that belong to the short path σ.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosedCurve {
    vertices: Vec<Vec3>,
    closure: Range<usize>,
    degenerate: bool,
}

impl ClosedCurve {
    /// Validate and build a closed curve. `closure` indexes segments.
    pub fn new(vertices: Vec<Vec3>, closure: Range<usize>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::validation(format!(
                "closed curve needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("closed curve vertices must be finite"));
        }
        let n = vertices.len();
        for i in 0..n {
            if (vertices[(i + 1) % n] - vertices[i]).norm() <= MIN_VERTEX_SPACING {
                return Err(Error::validation(format!("closed curve vertices {i} and {} coincide", (i + 1) % n)));
            }
        }
        if closure.start > closure.end || closure.end > n {
            return Err(Error::validation(format!("closure range {closure:?} out of bounds for {n} segments")));
        }
        Ok(ClosedCurve { vertices, closure, degenerate: false })
    }

    /// The point curve produced by a fixed point of the flow.
    pub fn point(p: Vec3) -> Self {
        ClosedCurve { vertices: vec![p], closure: 0..0, degenerate: true }
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn closure_range(&self) -> Range<usize> {
        self.closure.clone()
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn segment_count(&self) -> usize {
        if self.degenerate {
            0
        } else {
            self.vertices.len()
        }
    }

    pub fn segment(&self, i: usize) -> Segment {
        let n = self.vertices.len();
        Segment::new(self.vertices[i], self.vertices[(i + 1) % n])
    }

    pub fn segments(&self) -> Vec<Segment> {
        (0..self.segment_count()).map(|i| self.segment(i)).collect()
    }

    /// Segments of the flow arc (everything outside the closure range).
    pub fn arc_segments(&self) -> Vec<Segment> {
        (0..self.segment_count()).filter(|i| !self.closure.contains(i)).map(|i| self.segment(i)).collect()
    }

    /// Segments of the short path σ.
    pub fn closure_segments(&self) -> Vec<Segment> {
        if self.degenerate {
            return Vec::new();
        }
        self.closure.clone().map(|i| self.segment(i)).collect()
    }

    pub fn closure_length(&self) -> f64 {
        self.closure_segments().iter().map(|s| s.len).sum()
    }

    /// Same curve traversed backwards.
    pub fn reversed(&self) -> ClosedCurve {
        if self.degenerate {
            return self.clone();
        }
        let n = self.vertices.len();
        let vertices: Vec<Vec3> = self.vertices.iter().rev().copied().collect();
        // Old segment i (v_i → v_{i+1}) becomes new segment n−2−i (mod n).
        let map = |i: usize| (2 * n - 2 - i) % n;
        let closure = if self.closure.is_empty() {
            0..0
        } else {
            let a = map(self.closure.end - 1);
            let b = map(self.closure.start);
            if a <= b {
                a..b + 1
            } else {
                // The closure wraps; keep the flag on the arc side only.
                a..n
            }
        };
        ClosedCurve { vertices, closure, degenerate: false }
    }

    /// Image under `p ↦ rot·p + shift`.
    pub fn transformed(&self, rot: &Rotation, shift: Vec3) -> ClosedCurve {
        ClosedCurve {
            vertices: self.vertices.iter().map(|&v| rot.apply(v) + shift).collect(),
            closure: self.closure.clone(),
            degenerate: self.degenerate,
        }
    }

    /// CSV with columns `x,y,z`, preceded by `# closure_range=a..b` (and
    /// `# degenerate` for point curves).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e: std::io::Error| Error::Parse(format!("curve csv: {e}"));
        writeln!(w, "# closure_range={}..{}", self.closure.start, self.closure.end).map_err(io)?;
        if self.degenerate {
            writeln!(w, "# degenerate").map_err(io)?;
        }
        writeln!(w, "x,y,z").map_err(io)?;
        for v in &self.vertices {
            writeln!(w, "{},{},{}", v.x, v.y, v.z).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<ClosedCurve> {
        let mut closure = 0..0;
        let mut degenerate = false;
        let mut vertices = Vec::new();
        let mut header_seen = false;
        for line in r.lines() {
            let line = line.map_err(|e| Error::Parse(format!("curve csv: {e}")))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                let comment = comment.trim();
                if let Some(range) = comment.strip_prefix("closure_range=") {
                    let (a, b) = range
                        .split_once("..")
                        .ok_or_else(|| Error::Parse(format!("curve csv: bad closure range {range:?}")))?;
                    let parse = |s: &str| s.trim().parse::<usize>().map_err(|e| Error::Parse(format!("curve csv: {e}")));
                    closure = parse(a)?..parse(b)?;
                } else if comment == "degenerate" {
                    degenerate = true;
                }
                continue;
            }
            if !header_seen {
                header_seen = true;
                if line.starts_with('x') {
                    continue;
                }
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("curve csv: {e}"))))
                .collect::<Result<_>>()?;
            if vals.len() != 3 {
                return Err(Error::Parse(format!("curve csv: expected 3 columns, got {}", vals.len())));
            }
            vertices.push(Vec3::new(vals[0], vals[1], vals[2]));
        }
        if degenerate {
            return match vertices.as_slice() {
                [p] => Ok(ClosedCurve::point(*p)),
                _ => Err(Error::Parse("curve csv: degenerate curve must have one vertex".into())),
            };
        }
        ClosedCurve::new(vertices, closure)
    }

    pub fn load_csv(path: &Path) -> Result<ClosedCurve> {
        let f = std::fs::File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        ClosedCurve::read_csv(std::io::BufReader::new(f))
    }
}

/// Endpoints closer than this are treated as coincident (zero-length σ).
pub const CLOSURE_COINCIDENCE: f64 = 1e-12;

/// Consecutive arc samples closer than this are merged before closing.
pub const ARC_THINNING: f64 = 1e-10;

/// Close a flow arc with the straight segment from its end back to its
/// start, subdivided to the arc's longest segment. Samples closer than
/// [`ARC_THINNING`] to their predecessor are merged; an arc that collapses
/// to a single point gives the degenerate point curve.
pub fn close_curve(traj: &Trajectory) -> Result<ClosedCurve> {
    if traj.is_constant() || traj.len() < 2 {
        return Ok(ClosedCurve::point(traj.start()));
    }
    let mut verts: Vec<Vec3> = Vec::with_capacity(traj.len());
    for p in traj.points() {
        match verts.last() {
            Some(&q) if (p - q).norm() <= ARC_THINNING => {}
            _ => verts.push(p),
        }
    }
    let end = traj.end();
    if verts.len() > 1 && *verts.last().unwrap() != end {
        // keep the true endpoint in place of its near duplicate
        verts.pop();
        if (end - *verts.last().unwrap()).norm() > ARC_THINNING {
            verts.push(end);
        }
    }
    if verts.len() < 2 {
        return Ok(ClosedCurve::point(traj.start()));
    }
    let start = verts[0];
    let end = verts[verts.len() - 1];
    let chord = (end - start).norm();
    if chord <= CLOSURE_COINCIDENCE {
        verts.pop();
        let n = verts.len();
        if n < 3 {
            return Err(Error::validation("closed orbit has too few samples to form a curve"));
        }
        return ClosedCurve::new(verts, n..n);
    }
    let m = verts.len();
    let seg = verts.windows(2).map(|w| (w[1] - w[0]).norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut pieces = ((chord / seg).ceil() as usize).max(1);
    // Need at least three vertices in total.
    if m + pieces - 1 < 3 {
        pieces = 3 + 1 - m;
    }
    for j in 1..pieces {
        verts.push(end.lerp(start, j as f64 / pieces as f64));
    }
    ClosedCurve::new(verts, (m - 1)..(m - 1 + pieces))
}

/// Minimum segment–segment distance between two closed curves.
pub fn min_distance(a: &ClosedCurve, b: &ClosedCurve) -> f64 {
    min_distance_segments(&a.segments_or_point(), &b.segments_or_point())
}

impl ClosedCurve {
    fn segments_or_point(&self) -> Vec<Segment> {
        if self.degenerate {
            vec![Segment::new(self.vertices[0], self.vertices[0])]
        } else {
            self.segments()
        }
    }
}

/// Minimum distance between two segment sets, pruned by bounding spheres.
pub fn min_distance_segments(a: &[Segment], b: &[Segment]) -> f64 {
    let rows = crate::par::map(a.len(), |i| {
        let sa = &a[i];
        let mut best = f64::INFINITY;
        for sb in b {
            if segment_distance_lower_bound(sa.p0, sa.p1, sb.p0, sb.p1) >= best {
                continue;
            }
            best = best.min(segment_distance(sa.p0, sa.p1, sb.p0, sb.p1));
        }
        best
    });
    rows.into_iter().fold(f64::INFINITY, f64::min)
}

/// `∫_A ∫_B L` by adaptive quadrature with absolute error target `tol`.
pub fn gauss_linking(a: &ClosedCurve, b: &ClosedCurve, tol: f64) -> Result<f64> {
    gauss_linking_with(a, b, &PairQuadrature::with_tol(tol))
}

pub fn gauss_linking_with(a: &ClosedCurve, b: &ClosedCurve, q: &PairQuadrature) -> Result<f64> {
    if a.is_degenerate() || b.is_degenerate() {
        return Err(Error::validation("gauss_linking needs two non-degenerate curves"));
    }
    double_line_integral(&a.segments(), &b.segments(), Integrand::Signed, q)
}

#[derive(Clone, Copy)]
struct Projected {
    u: f64,
    v: f64,
    depth: f64,
}

#[inline]
fn cross2(ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    ax * by - ay * bx
}

/// Linking number from signed inter-component crossings of the projection
/// along `direction`: half the sum of crossing signs.
pub fn crossing_linking(a: &ClosedCurve, b: &ClosedCurve, direction: Vec3) -> Result<i64> {
    if a.is_degenerate() || b.is_degenerate() {
        return Ok(0);
    }
    let d = direction.normalized();
    if d == Vec3::ZERO || !d.is_finite() {
        return Err(Error::validation("projection direction must be non-zero"));
    }
    let (e1, e2) = d.orthonormal_basis();
    let project = |c: &ClosedCurve| -> Vec<Projected> {
        c.vertices().iter().map(|&p| Projected { u: p.dot(e1), v: p.dot(e2), depth: p.dot(d) }).collect()
    };
    let pa = project(a);
    let pb = project(b);
    let na = pa.len();
    let nb = pb.len();

    let partial = crate::par::try_map(na, |i| -> Result<i64> {
        let p0 = pa[i];
        let p1 = pa[(i + 1) % na];
        let (dx, dy) = (p1.u - p0.u, p1.v - p0.v);
        let la = dx.hypot(dy);
        let (amin_u, amax_u) = (p0.u.min(p1.u), p0.u.max(p1.u));
        let (amin_v, amax_v) = (p0.v.min(p1.v), p0.v.max(p1.v));
        let mut sum = 0i64;
        for j in 0..nb {
            let q0 = pb[j];
            let q1 = pb[(j + 1) % nb];
            if q0.u.max(q1.u) < amin_u - GENERICITY_EPS
                || q0.u.min(q1.u) > amax_u + GENERICITY_EPS
                || q0.v.max(q1.v) < amin_v - GENERICITY_EPS
                || q0.v.min(q1.v) > amax_v + GENERICITY_EPS
            {
                continue;
            }
            let (ex, ey) = (q1.u - q0.u, q1.v - q0.v);
            let lb = ex.hypot(ey);
            let denom = cross2(dx, dy, ex, ey);
            let (wx, wy) = (q0.u - p0.u, q0.v - p0.v);
            if denom.abs() <= 1e-12 * la * lb {
                // Parallel in projection: non-generic only if collinear and overlapping.
                let off = if la > 0.0 { cross2(dx, dy, wx, wy).abs() / la } else { wx.hypot(wy) };
                if off < GENERICITY_EPS {
                    return Err(Error::NonGeneric("collinear overlapping segments in projection".into()));
                }
                continue;
            }
            let s = cross2(wx, wy, ex, ey) / denom;
            let t = cross2(wx, wy, dx, dy) / denom;
            let ds = GENERICITY_EPS / la.max(f64::MIN_POSITIVE);
            let dt = GENERICITY_EPS / lb.max(f64::MIN_POSITIVE);
            if s < -ds || s > 1.0 + ds || t < -dt || t > 1.0 + dt {
                continue;
            }
            if s < ds || s > 1.0 - ds || t < dt || t > 1.0 - dt {
                return Err(Error::NonGeneric(format!("crossing within {GENERICITY_EPS:e} of a vertex")));
            }
            let za = p0.depth + s * (p1.depth - p0.depth);
            let zb = q0.depth + t * (q1.depth - q0.depth);
            if (za - zb).abs() < GENERICITY_EPS {
                return Err(Error::NonGeneric("curves meet (or nearly meet) at a crossing".into()));
            }
            // The strand nearer the viewer (larger depth) is the over-strand.
            let sign = if za > zb { cross2(dx, dy, ex, ey) } else { cross2(ex, ey, dx, dy) };
            sum += if sign > 0.0 { 1 } else { -1 };
        }
        Ok(sum)
    })?;
    let total: i64 = partial.into_iter().sum();
    if total % 2 != 0 {
        return Err(Error::NonGeneric(format!("odd crossing sum {total}")));
    }
    Ok(total / 2)
}

/// [`crossing_linking`] with up to [`GENERICITY_RETRIES`] random directions
/// (deterministic for a given seed) after `preferred` fails.
pub fn crossing_linking_retry(a: &ClosedCurve, b: &ClosedCurve, preferred: Vec3, seed: u64) -> Result<(i64, Vec3)> {
    match crossing_linking(a, b, preferred) {
        Ok(v) => return Ok((v, preferred.normalized())),
        Err(Error::NonGeneric(_)) => {}
        Err(e) => return Err(e),
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last = String::new();
    for _ in 0..GENERICITY_RETRIES {
        let dir = random_unit(&mut rng);
        match crossing_linking(a, b, dir) {
            Ok(v) => return Ok((v, dir)),
            Err(Error::NonGeneric(msg)) => last = msg,
            Err(e) => return Err(e),
        }
    }
    Err(Error::NonGeneric(format!("no generic direction in {GENERICITY_RETRIES} attempts ({last})")))
}

pub(crate) fn random_unit<R: Rng>(rng: &mut R) -> Vec3 {
    let z: f64 = 2.0 * rng.random::<f64>() - 1.0;
    let phi: f64 = 2.0 * PI * rng.random::<f64>();
    let s = (1.0 - z * z).max(0.0).sqrt();
    Vec3::new(s * phi.cos(), s * phi.sin(), z)
}

/// A slightly tilted default projection direction, away from the
/// coordinate axes where the shipped configurations are symmetric.
pub const DEFAULT_PROJECTION: Vec3 = Vec3::new(0.267_261_241_912_424_4, 0.534_522_483_824_848_8, 0.801_783_725_737_273_2);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkingResult {
    pub gauss: f64,
    pub oracle: Option<i64>,
    pub min_distance: f64,
    pub generic: bool,
    pub discarded: bool,
}

impl LinkingResult {
    /// The integer linking number: the crossing count when available,
    /// otherwise the rounded Gauss integral.
    pub fn linking_number(&self) -> i64 {
        self.oracle.unwrap_or_else(|| self.gauss.round() as i64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkOptions {
    pub tol: f64,
    /// Pairs closer than this are flagged discarded instead of integrated.
    pub separation_floor: f64,
    pub seed: u64,
}

impl Default for LinkOptions {
    fn default() -> Self {
        LinkOptions { tol: 1e-6, separation_floor: 1e-10, seed: 0x5eed }
    }
}

/// Gauss integral plus crossing oracle for two closed curves.
///
/// Degenerate (point) curves link nothing. Pairs closer than the
/// separation floor are returned with `discarded = true` and no integral.
pub fn link(a: &ClosedCurve, b: &ClosedCurve, opts: &LinkOptions) -> Result<LinkingResult> {
    let dist = min_distance(a, b);
    if a.is_degenerate() || b.is_degenerate() {
        return Ok(LinkingResult { gauss: 0.0, oracle: Some(0), min_distance: dist, generic: true, discarded: false });
    }
    let floor = opts.separation_floor.max(1e-10);
    if dist < floor {
        return Ok(LinkingResult { gauss: f64::NAN, oracle: None, min_distance: dist, generic: false, discarded: true });
    }
    let q = PairQuadrature { floor: floor.min(1e-10), ..PairQuadrature::with_tol(opts.tol) };
    let gauss = gauss_linking_with(a, b, &q)?;
    let (oracle, generic) = match crossing_linking_retry(a, b, DEFAULT_PROJECTION, opts.seed) {
        Ok((v, _)) => (Some(v), true),
        Err(Error::NonGeneric(_)) => (None, false),
        Err(e) => return Err(e),
    };
    Ok(LinkingResult { gauss, oracle, min_distance: dist, generic, discarded: false })
}

/// The three normalized `|L|` integrals between flow arcs and their short
/// paths: (arc_X × σ_Y, σ_X × arc_Y, σ_X × σ_Y), each divided by `T·S`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ShortPathTerms {
    pub arc_closure: f64,
    pub closure_arc: f64,
    pub closure_closure: f64,
}

impl ShortPathTerms {
    pub fn sum(&self) -> f64 {
        self.arc_closure + self.closure_arc + self.closure_closure
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.arc_closure, self.closure_arc, self.closure_closure]
    }
}

/// Short-path terms for two already closed curves.
pub fn short_path_terms_for_curves(cx: &ClosedCurve, cy: &ClosedCurve, t: f64, s: f64, tol: f64) -> Result<ShortPathTerms> {
    if !(t > 0.0 && s > 0.0) {
        return Err(Error::validation("short-path terms need positive horizons"));
    }
    let q = PairQuadrature::absolute(tol);
    let norm = 1.0 / (t * s);
    let (ax, sx) = (cx.arc_segments(), cx.closure_segments());
    let (ay, sy) = (cy.arc_segments(), cy.closure_segments());
    Ok(ShortPathTerms {
        arc_closure: double_line_integral(&ax, &sy, Integrand::Absolute, &q)? * norm,
        closure_arc: double_line_integral(&sx, &ay, Integrand::Absolute, &q)? * norm,
        closure_closure: double_line_integral(&sx, &sy, Integrand::Absolute, &q)? * norm,
    })
}

/// Integrate both flow arcs, close them and evaluate the short-path terms.
#[allow(clippy::too_many_arguments)]
pub fn short_path_terms(
    x_field: &FieldSpec,
    y_field: &FieldSpec,
    x: Vec3,
    y: Vec3,
    t: f64,
    s: f64,
    ctrl: &StepControl,
    max_seglen: f64,
    tol: f64,
) -> Result<ShortPathTerms> {
    let cx = close_curve(&integrate(x_field, x, t, ctrl)?.resample(max_seglen)?)?;
    let cy = close_curve(&integrate(y_field, y, s, ctrl)?.resample(max_seglen)?)?;
    short_path_terms_for_curves(&cx, &cy, t, s, tol)
}

/// Regular `n`-gon inscribed in the circle of radius `radius` about
/// `center` in the plane normal to `normal`, counter-clockwise about it.
pub fn circle_polyline(center: Vec3, normal: Vec3, radius: f64, n: usize) -> Result<ClosedCurve> {
    let (e1, e2) = normal.normalized().orthonormal_basis();
    let verts = (0..n)
        .map(|k| {
            let a = 2.0 * PI * k as f64 / n as f64;
            center + (e1 * a.cos() + e2 * a.sin()) * radius
        })
        .collect();
    ClosedCurve::new(verts, 0..0)
}

fn phased_circle(center: Vec3, normal: Vec3, radius: f64, n: usize, phase: f64) -> Vec<Vec3> {
    let (e1, e2) = normal.normalized().orthonormal_basis();
    (0..n)
        .map(|k| {
            let a = phase + 2.0 * PI * k as f64 / n as f64;
            center + (e1 * a.cos() + e2 * a.sin()) * radius
        })
        .collect()
}

/// A random pair of disjoint circle polylines with `|lk|` known by
/// construction: pair `k` of run `seed`. Even `k` threads the second circle
/// once through the first; odd `k` places it beside the first. Both then
/// undergo one random rigid motion, with random radii, vertex counts in
/// `vertices`, start phases and orientations. Returns the curves and `|lk|`.
pub fn random_circle_pair(seed: u64, k: u64, vertices: Range<usize>) -> Result<(ClosedCurve, ClosedCurve, i64)> {
    if vertices.start < 3 || vertices.is_empty() {
        return Err(Error::validation("random circles need at least 3 vertices"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    let ra = rng.random_range(0.5..1.5);
    let rb = ra * rng.random_range(0.5..1.5);
    let linked = k.is_multiple_of(2);
    let center_b = if linked {
        Vec3::new(ra, 0.0, 0.0)
    } else {
        Vec3::new(ra + rb + rng.random_range(0.1..1.0), 0.0, rng.random_range(-0.5..0.5))
    };
    let na = rng.random_range(vertices.clone());
    let nb = rng.random_range(vertices);
    let mut a = ClosedCurve::new(phased_circle(Vec3::ZERO, Vec3::Z, ra, na, rng.random_range(0.0..2.0 * PI)), 0..0)?;
    let mut b = ClosedCurve::new(phased_circle(center_b, Vec3::Y, rb, nb, rng.random_range(0.0..2.0 * PI)), 0..0)?;
    if rng.random::<bool>() {
        a = a.reversed();
    }
    if rng.random::<bool>() {
        b = b.reversed();
    }
    let rot = Rotation::from_euler_zyz(
        rng.random_range(0.0..2.0 * PI),
        (1.0 - 2.0 * rng.random::<f64>()).acos(),
        rng.random_range(0.0..2.0 * PI),
    );
    let shift = Vec3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
    Ok((a.transformed(&rot, shift), b.transformed(&rot, shift), i64::from(linked)))
}

/// Gauss integral against the crossing count for one curve pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub gauss: f64,
    pub oracle: i64,
    pub difference: f64,
    /// `round(gauss)` equals the oracle.
    pub rounding_exact: bool,
}

pub fn compare_with_oracle(a: &ClosedCurve, b: &ClosedCurve, tol: f64, seed: u64) -> Result<OracleComparison> {
    let gauss = gauss_linking(a, b, tol)?;
    let (oracle, _) = crossing_linking_retry(a, b, DEFAULT_PROJECTION, seed)?;
    Ok(OracleComparison {
        gauss,
        oracle,
        difference: (gauss - oracle as f64).abs(),
        rounding_exact: gauss.round() as i64 == oracle,
    })
}
