//! Exactly divergence-free, compactly supported fields built from circular
//! flux tubes.
//!
//! A tube with core circle of radius `R` about `axis` carries the field
//! `F(r)·ê_φ`, where `r` is the distance to the core circle, `ê_φ` is the
//! azimuthal unit vector about the axis and `F(r) = F0·(1 − (r/a)²)²` inside
//! the solid torus `r < a` (zero outside). Both `F` and `ê_φ` are constant
//! along `ê_φ` and `ê_φ` itself is solenoidal, so the field has zero
//! divergence in exact arithmetic.
//!
//! Orientation convention: ℝ³ is right-handed and the field circulates
//! counter-clockwise about `axis` when `sign = +1`.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec3::Vec3;

const AXIS_UNIT_TOL: f64 = 1e-12;

/// Axis-aligned bounding box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min_corner: Vec3,
    pub max_corner: Vec3,
}

impl Aabb {
    pub fn new(min_corner: Vec3, max_corner: Vec3) -> Self {
        debug_assert!(
            min_corner.x <= max_corner.x && min_corner.y <= max_corner.y && min_corner.z <= max_corner.z
        );
        Aabb { min_corner, max_corner }
    }

    /// The degenerate box at the origin (support of the zero field).
    pub fn degenerate() -> Self {
        Aabb::new(Vec3::ZERO, Vec3::ZERO)
    }

    pub fn union(&self, o: &Aabb) -> Aabb {
        Aabb::new(self.min_corner.min(o.min_corner), self.max_corner.max(o.max_corner))
    }

    pub fn extent(&self) -> Vec3 {
        self.max_corner - self.min_corner
    }

    pub fn volume(&self) -> f64 {
        let e = self.extent();
        e.x * e.y * e.z
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().norm()
    }

    pub fn center(&self) -> Vec3 {
        (self.min_corner + self.max_corner) * 0.5
    }

    pub fn contains(&self, p: Vec3) -> bool {
        (0..3).all(|k| {
            let v = p.component(k);
            v >= self.min_corner.component(k) && v <= self.max_corner.component(k)
        })
    }

    /// Point at fractional coordinates `u ∈ [0,1]³`.
    pub fn at_fraction(&self, u: [f64; 3]) -> Vec3 {
        let e = self.extent();
        self.min_corner + Vec3::new(u[0] * e.x, u[1] * e.y, u[2] * e.z)
    }
}

/// Position of a point relative to a tube: cylindrical coordinates about
/// the tube axis plus the squared distance to the core circle.
#[derive(Clone, Copy, Debug)]
pub struct TubeCoords {
    /// Distance from the axis.
    pub rho: f64,
    /// Signed height along the axis.
    pub height: f64,
    /// Component of `p − center` orthogonal to the axis.
    pub radial: Vec3,
    /// Squared distance to the core circle.
    pub core_dist_sq: f64,
}

#[derive(Clone, Debug, Deserialize)]
struct RawTube {
    center: Vec3,
    axis: Vec3,
    major_radius: f64,
    minor_radius: f64,
    amplitude: f64,
    #[serde(default = "default_sign")]
    sign: i32,
}

fn default_sign() -> i32 {
    1
}

/// One circular flux tube. Construct with [`TubeSpec::new`], which validates
/// the geometry; deserialization goes through the same checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTube")]
pub struct TubeSpec {
    center: Vec3,
    axis: Vec3,
    major_radius: f64,
    minor_radius: f64,
    amplitude: f64,
    sign: i32,
}

impl TryFrom<RawTube> for TubeSpec {
    type Error = Error;

    fn try_from(r: RawTube) -> Result<Self> {
        TubeSpec::new(r.center, r.axis, r.major_radius, r.minor_radius, r.amplitude, r.sign)
    }
}

impl TubeSpec {
    pub fn new(
        center: Vec3,
        axis: Vec3,
        major_radius: f64,
        minor_radius: f64,
        amplitude: f64,
        sign: i32,
    ) -> Result<Self> {
        if !center.is_finite() || !axis.is_finite() {
            return Err(Error::validation("tube center and axis must be finite"));
        }
        if (axis.norm() - 1.0).abs() > AXIS_UNIT_TOL {
            return Err(Error::validation(format!(
                "tube axis must be a unit vector (|axis| = {})",
                axis.norm()
            )));
        }
        if !(major_radius.is_finite() && major_radius > 0.0) {
            return Err(Error::validation("major_radius must be positive and finite"));
        }
        if !(minor_radius > 0.0 && minor_radius < major_radius) {
            return Err(Error::validation(format!(
                "minor_radius must satisfy 0 < a < R (a = {minor_radius}, R = {major_radius})"
            )));
        }
        if !amplitude.is_finite() {
            return Err(Error::validation("amplitude must be finite"));
        }
        if sign != 1 && sign != -1 {
            return Err(Error::validation(format!("sign must be +1 or -1, got {sign}")));
        }
        Ok(TubeSpec { center, axis, major_radius, minor_radius, amplitude, sign })
    }

    /// Tube centered at the origin with axis +z and unit core radius.
    pub fn canonical(minor_radius: f64, amplitude: f64) -> Result<Self> {
        TubeSpec::new(Vec3::ZERO, Vec3::Z, 1.0, minor_radius, amplitude, 1)
    }

    pub fn center(&self) -> Vec3 {
        self.center
    }
    pub fn axis(&self) -> Vec3 {
        self.axis
    }
    pub fn major_radius(&self) -> f64 {
        self.major_radius
    }
    pub fn minor_radius(&self) -> f64 {
        self.minor_radius
    }
    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }
    pub fn sign(&self) -> i32 {
        self.sign
    }

    /// Amplitude including the orientation sign.
    pub fn signed_amplitude(&self) -> f64 {
        self.sign as f64 * self.amplitude
    }

    /// Same tube moved by `p ↦ rot·p + shift`.
    pub fn transformed(&self, rot: &crate::vec3::Rotation, shift: Vec3) -> Result<Self> {
        let axis = rot.apply(self.axis).normalized();
        TubeSpec::new(
            rot.apply(self.center) + shift,
            axis,
            self.major_radius,
            self.minor_radius,
            self.amplitude,
            self.sign,
        )
    }

    pub fn coords(&self, p: Vec3) -> TubeCoords {
        let d = p - self.center;
        let height = d.dot(self.axis);
        let radial = d - self.axis * height;
        let rho = radial.norm();
        let dr = rho - self.major_radius;
        TubeCoords { rho, height, radial, core_dist_sq: dr * dr + height * height }
    }

    /// Signed profile `F(r)` given the squared distance to the core.
    #[inline]
    fn profile(&self, core_dist_sq: f64) -> f64 {
        let a2 = self.minor_radius * self.minor_radius;
        if core_dist_sq >= a2 {
            return 0.0;
        }
        let s = 1.0 - core_dist_sq / a2;
        self.signed_amplitude() * s * s
    }

    pub fn eval(&self, p: Vec3) -> Vec3 {
        let c = self.coords(p);
        let f = self.profile(c.core_dist_sq);
        if f == 0.0 {
            return Vec3::ZERO;
        }
        // ê_φ = axis × radial / ρ; ρ ≥ R − a > 0 inside the support.
        self.axis.cross(c.radial) * (f / c.rho)
    }

    /// True when `p` lies in the open solid torus carrying the field.
    pub fn contains(&self, p: Vec3) -> bool {
        self.coords(p).core_dist_sq < self.minor_radius * self.minor_radius
    }

    /// `|F(r)| / (2πρ)`: angular frequency of the orbit through `p` divided
    /// by 2π. Integrates to `|Φ|` over the tube.
    pub fn flux_density(&self, p: Vec3) -> f64 {
        let c = self.coords(p);
        let f = self.profile(c.core_dist_sq).abs();
        if f == 0.0 {
            0.0
        } else {
            f / (2.0 * PI * c.rho)
        }
    }

    /// Cross-sectional flux `Φ = sign·π·F0·a²/3`.
    pub fn flux(&self) -> f64 {
        self.signed_amplitude() * PI * self.minor_radius * self.minor_radius / 3.0
    }

    pub fn support_box(&self) -> Aabb {
        let ext = |n: f64| self.major_radius * (1.0 - n * n).max(0.0).sqrt() + self.minor_radius;
        let e = Vec3::new(ext(self.axis.x), ext(self.axis.y), ext(self.axis.z));
        Aabb::new(self.center - e, self.center + e)
    }

    /// Volume of the solid torus, `2π²·R·a²`.
    pub fn volume(&self) -> f64 {
        2.0 * PI * PI * self.major_radius * self.minor_radius * self.minor_radius
    }

    /// Right-handed orthonormal frame `(e1, e2, axis)` of the tube.
    pub fn frame(&self) -> (Vec3, Vec3, Vec3) {
        let (e1, e2) = self.axis.orthonormal_basis();
        (e1, e2, self.axis)
    }

    /// Point at toroidal coordinates: distance `r` from the core, poloidal
    /// angle `theta` and azimuth `phi` about the axis.
    pub fn point_at(&self, r: f64, theta: f64, phi: f64) -> Vec3 {
        let (e1, e2, n) = self.frame();
        let rho = self.major_radius + r * theta.cos();
        let h = r * theta.sin();
        self.center + (e1 * phi.cos() + e2 * phi.sin()) * rho + n * h
    }

    /// Core circle as a closed polyline with `n` vertices, oriented along
    /// the field.
    pub fn core_polyline(&self, n: usize) -> Vec<Vec3> {
        let dir = self.sign as f64;
        (0..n)
            .map(|k| self.point_at(0.0, 0.0, dir * 2.0 * PI * k as f64 / n as f64))
            .collect()
    }

    /// A vector potential in axial gauge: `A = −G(ρ, h)·axis` with
    /// `G = ∫₀^ρ F dρ'`, so that `curl A` equals the tube field. Evaluated
    /// in closed form since `F` is polynomial in `ρ'` along a radial ray.
    pub fn axial_potential(&self, p: Vec3) -> Vec3 {
        let c = self.coords(p);
        let a = self.minor_radius;
        let a2 = a * a;
        let rem = a2 - c.height * c.height;
        if rem <= 0.0 {
            return Vec3::ZERO;
        }
        let w = rem.sqrt();
        let upper = (c.rho - self.major_radius).min(w);
        if upper <= -w {
            return Vec3::ZERO;
        }
        // ∫ (rem − u²)² du = rem²·u − (2·rem/3)·u³ + u⁵/5
        let prim = |u: f64| {
            let u2 = u * u;
            u * (rem * rem - 2.0 * rem * u2 / 3.0 + u2 * u2 / 5.0)
        };
        let g = self.signed_amplitude() / (a2 * a2) * (prim(upper) - prim(-w));
        self.axis * (-g)
    }
}

/// A superposition of flux tubes. The empty list is the zero field.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    #[serde(default)]
    pub tubes: Vec<TubeSpec>,
}

impl FieldSpec {
    pub fn new(tubes: Vec<TubeSpec>) -> Self {
        FieldSpec { tubes }
    }

    pub fn zero() -> Self {
        FieldSpec::default()
    }

    pub fn single(tube: TubeSpec) -> Self {
        FieldSpec { tubes: vec![tube] }
    }

    /// Concatenation of the tube lists; evaluates to the sum of the fields.
    pub fn superpose(&self, other: &FieldSpec) -> FieldSpec {
        let mut tubes = self.tubes.clone();
        tubes.extend(other.tubes.iter().cloned());
        FieldSpec { tubes }
    }

    /// The field multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<FieldSpec> {
        let tubes = self
            .tubes
            .iter()
            .map(|t| TubeSpec::new(t.center, t.axis, t.major_radius, t.minor_radius, t.amplitude * c, t.sign))
            .collect::<Result<_>>()?;
        Ok(FieldSpec { tubes })
    }

    /// True when every tube has zero amplitude (or there are none).
    pub fn is_zero(&self) -> bool {
        self.tubes.iter().all(|t| t.amplitude() == 0.0)
    }

    pub fn eval(&self, p: Vec3) -> Vec3 {
        let mut v = Vec3::ZERO;
        for t in &self.tubes {
            v += t.eval(p);
        }
        v
    }

    /// Central-difference divergence with step `h`. The difference quotient
    /// divides by the realized coordinate spacing, so the identity field
    /// offsets are exact even when `p ± h` rounds.
    pub fn divergence(&self, p: Vec3, h: f64) -> f64 {
        assert!(h > 0.0, "divergence step must be positive");
        let mut div = 0.0;
        for k in 0..3 {
            let c = p.component(k);
            let (hi, lo) = (c + h, c - h);
            let fp = self.eval(p.with_component(k, hi)).component(k);
            let fm = self.eval(p.with_component(k, lo)).component(k);
            div += (fp - fm) / (hi - lo);
        }
        div
    }

    /// Tight bounding box of all tube supports; the zero field (no tubes)
    /// maps to the degenerate box at the origin.
    pub fn support_box(&self) -> Aabb {
        let mut it = self.tubes.iter().map(TubeSpec::support_box);
        match it.next() {
            None => Aabb::degenerate(),
            Some(first) => it.fold(first, |acc, b| acc.union(&b)),
        }
    }

    pub fn contains(&self, p: Vec3) -> bool {
        self.tubes.iter().any(|t| t.contains(p))
    }

    /// Uniform point of the support by rejection from the support box;
    /// `None` for the zero field.
    pub fn sample_support<R: rand::Rng>(&self, rng: &mut R) -> Option<Vec3> {
        if self.tubes.is_empty() {
            return None;
        }
        let b = self.support_box();
        loop {
            let p = b.at_fraction([rng.random(), rng.random(), rng.random()]);
            if self.contains(p) {
                return Some(p);
            }
        }
    }

    /// Total absolute flux `Σ|Φ_i|`.
    pub fn total_abs_flux(&self) -> f64 {
        self.tubes.iter().map(|t| t.flux().abs()).sum()
    }

    pub fn axial_potential(&self, p: Vec3) -> Vec3 {
        let mut v = Vec3::ZERO;
        for t in &self.tubes {
            v += t.axial_potential(p);
        }
        v
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Parse(format!("field spec: {e}")))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(format!("field spec: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)
            .map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&s)
    }
}

pub fn tube_flux(tube: &TubeSpec) -> f64 {
    tube.flux()
}

/// The canonical linked pair: `X` lives on the unit circle in the xy-plane
/// (axis +z), `Y` on the unit circle in the xz-plane centered at (1,0,0)
/// (axis +y). Every point of either core is at distance exactly 1 from the
/// other core, so the supports are disjoint iff `a < 1/2`. With the
/// orientation convention above the cores have linking number +1.
pub fn make_hopf_pair(a: f64, amplitude: f64) -> Result<(FieldSpec, FieldSpec)> {
    if !(a > 0.0 && a < 0.5) {
        return Err(Error::validation(format!(
            "hopf pair requires 0 < a < 1/2 so the tube supports stay disjoint (a = {a})"
        )));
    }
    let x = TubeSpec::new(Vec3::ZERO, Vec3::Z, 1.0, a, amplitude, 1)?;
    let y = TubeSpec::new(Vec3::X, Vec3::Y, 1.0, a, amplitude, 1)?;
    Ok((FieldSpec::single(x), FieldSpec::single(y)))
}

/// Two coaxial tubes in parallel planes ten units apart (split link).
pub fn make_unlinked_pair(a: f64, amplitude: f64) -> Result<(FieldSpec, FieldSpec)> {
    let x = TubeSpec::new(Vec3::ZERO, Vec3::Z, 1.0, a, amplitude, 1)?;
    let y = TubeSpec::new(Vec3::new(0.0, 0.0, 10.0), Vec3::Z, 1.0, a, amplitude, 1)?;
    Ok((FieldSpec::single(x), FieldSpec::single(y)))
}

/// `X` as in [`make_hopf_pair`]; `Y` is the sum of two tubes that each link
/// the `X` core once with the same sign: the Hopf partner and a circle of
/// radius 1/2 in the yz-plane centered at (0,−1,0) with axis +x. The second
/// core stays at distance 1/2 from the `X` core and from the first `Y` core,
/// so all three supports are disjoint for `a < 1/4`.
pub fn make_superposition_pair(a: f64, amplitude: f64) -> Result<(FieldSpec, FieldSpec)> {
    if !(a > 0.0 && a < 0.25) {
        return Err(Error::validation(format!(
            "superposition pair requires 0 < a < 1/4 (a = {a})"
        )));
    }
    let (x, y1) = make_hopf_pair(a, amplitude)?;
    let y2 = TubeSpec::new(Vec3::new(0.0, -1.0, 0.0), Vec3::X, 0.5, a, amplitude, 1)?;
    Ok((x, y1.superpose(&FieldSpec::single(y2))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vec3::Rotation;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn canonical() -> FieldSpec {
        FieldSpec::single(TubeSpec::canonical(0.5, 1.0).unwrap())
    }

    #[test]
    fn eval_on_core() {
        let v = canonical().eval(Vec3::new(1.0, 0.0, 0.0));
        assert_abs_diff_eq!(v.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v.y, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v.z, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn eval_outside_support_is_zero() {
        assert_eq!(canonical().eval(Vec3::new(3.0, 0.0, 0.0)), Vec3::ZERO);
    }

    #[test]
    fn eval_off_core() {
        let v = canonical().eval(Vec3::new(1.0, 0.0, 0.25));
        assert_abs_diff_eq!(v.y, 0.5625, epsilon = 1e-15);
        assert_abs_diff_eq!(v.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v.z, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn non_unit_axis_rejected_at_construction() {
        let r = TubeSpec::new(Vec3::ZERO, Vec3::new(0.0, 0.0, 1.1), 1.0, 0.2, 1.0, 1);
        assert!(matches!(r, Err(Error::Validation(_))));
        let r = TubeSpec::new(Vec3::ZERO, Vec3::Z, 1.0, 1.0, 1.0, 1);
        assert!(r.is_err(), "a = R must be rejected");
        let r = TubeSpec::new(Vec3::ZERO, Vec3::Z, 1.0, 0.2, 1.0, 0);
        assert!(r.is_err(), "sign must be ±1");
    }

    #[test]
    fn deserialization_validates() {
        let bad = r#"
            [[tubes]]
            center = [0.0, 0.0, 0.0]
            axis = [0.0, 0.0, 2.0]
            major_radius = 1.0
            minor_radius = 0.2
            amplitude = 1.0
            sign = 1
        "#;
        assert!(FieldSpec::from_toml_str(bad).is_err());
        let good = bad.replace("[0.0, 0.0, 2.0]", "[0.0, 0.0, 1.0]");
        let f = FieldSpec::from_toml_str(&good).unwrap();
        assert_eq!(f.tubes.len(), 1);
        let back = FieldSpec::from_toml_str(&f.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn divergence_at_interior_point() {
        assert!(canonical().divergence(Vec3::new(1.0, 0.0, 0.1), 1e-4).abs() < 1e-6);
        assert_eq!(FieldSpec::zero().divergence(Vec3::new(0.3, 0.1, 0.2), 1e-4), 0.0);
    }

    #[test]
    fn divergence_in_overlap_of_two_tubes() {
        let t1 = TubeSpec::canonical(0.5, 1.0).unwrap();
        let t2 = TubeSpec::new(Vec3::new(0.3, 0.0, 0.0), Vec3::Z, 1.0, 0.5, -0.7, 1).unwrap();
        let f = FieldSpec::new(vec![t1.clone(), t2.clone()]);
        let p = Vec3::new(1.1, 0.1, 0.05);
        assert!(t1.contains(p) && t2.contains(p));
        assert!(f.divergence(p, 1e-4).abs() < 1e-6);
    }

    /// Independent oracle: midpoint rule on ∫₀^a F(r)·2πr dr.
    fn flux_by_quadrature(a: f64, f0: f64) -> f64 {
        let n = 200_000;
        let h = a / n as f64;
        (0..n)
            .map(|i| {
                let r = (i as f64 + 0.5) * h;
                let s = 1.0 - (r / a).powi(2);
                f0 * s * s * 2.0 * PI * r * h
            })
            .sum()
    }

    #[test]
    fn flux_matches_radial_quadrature() {
        let frozen = [(0.5, 1.0, 0.261_799_387_799_149_4), (0.2, 1.0, 0.041_887_902_047_863_9)];
        for (a, f0, expected) in frozen {
            let tube = TubeSpec::canonical(a, f0).unwrap();
            assert_abs_diff_eq!(tube_flux(&tube), expected, epsilon = 1e-15);
            assert_abs_diff_eq!(flux_by_quadrature(a, f0), expected, epsilon = 1e-10);
        }
        assert_eq!(TubeSpec::canonical(0.3, 0.0).unwrap().flux(), 0.0);
        let neg = TubeSpec::new(Vec3::ZERO, Vec3::Z, 1.0, 0.5, 1.0, -1).unwrap();
        assert_abs_diff_eq!(neg.flux(), -PI / 12.0, epsilon = 1e-15);
    }

    #[test]
    fn support_boxes() {
        let b = canonical().support_box();
        assert_abs_diff_eq!(b.min_corner.x, -1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(b.max_corner.y, 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(b.min_corner.z, -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(b.max_corner.z, 0.5, epsilon = 1e-15);
        assert_eq!(FieldSpec::zero().support_box(), Aabb::degenerate());

        let (x, y) = make_unlinked_pair(0.2, 1.0).unwrap();
        let u = x.superpose(&y).support_box();
        assert_eq!(u, x.support_box().union(&y.support_box()));
        assert_abs_diff_eq!(u.max_corner.z, 10.2, epsilon = 1e-12);
    }

    #[test]
    fn hopf_pair_validation() {
        assert!(make_hopf_pair(0.5, 1.0).is_err());
        assert!(make_hopf_pair(0.0, 1.0).is_err());
        let (x, y) = make_hopf_pair(0.2, 1.0).unwrap();
        assert_eq!(x.tubes.len(), 1);
        assert_eq!(y.tubes.len(), 1);
    }

    #[test]
    fn hopf_cores_are_equidistant() {
        let (x, y) = make_hopf_pair(0.2, 1.0).unwrap();
        let tx = &x.tubes[0];
        for p in y.tubes[0].core_polyline(97) {
            let c = tx.coords(p);
            assert_abs_diff_eq!(c.core_dist_sq.sqrt(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn rigid_motion_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let tube = TubeSpec::canonical(0.4, 1.3).unwrap();
        for _ in 0..200 {
            let rot = Rotation::from_euler_zyz(rng.random::<f64>() * 6.3, rng.random::<f64>() * 3.1, rng.random::<f64>() * 6.3);
            let shift = Vec3::new(rng.random(), rng.random(), rng.random()) * 4.0;
            let moved = tube.transformed(&rot, shift).unwrap();
            let p = Vec3::new(rng.random::<f64>() * 3.0 - 1.5, rng.random::<f64>() * 3.0 - 1.5, rng.random::<f64>() - 0.5);
            let lhs = moved.eval(rot.apply(p) + shift);
            let rhs = rot.apply(tube.eval(p));
            assert!((lhs - rhs).norm() < 1e-12, "{lhs:?} vs {rhs:?}");
        }
    }

    #[test]
    fn axial_potential_curl_reproduces_field() {
        let tube = TubeSpec::new(Vec3::new(0.2, -0.1, 0.3), Vec3::new(1.0, 2.0, 2.0) * (1.0 / 3.0), 1.0, 0.3, 1.2, -1).unwrap();
        let f = FieldSpec::single(tube.clone());
        let h = 1e-5;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let p = tube.point_at(0.35 * rng.random::<f64>(), 6.3 * rng.random::<f64>(), 6.3 * rng.random::<f64>());
            let d = |k: usize, c: usize| {
                let e = Vec3::ZERO.with_component(k, h);
                (f.axial_potential(p + e).component(c) - f.axial_potential(p - e).component(c)) / (2.0 * h)
            };
            let curl = Vec3::new(d(1, 2) - d(2, 1), d(2, 0) - d(0, 2), d(0, 1) - d(1, 0));
            assert!((curl - f.eval(p)).norm() < 1e-6, "{curl:?} vs {:?}", f.eval(p));
        }
    }

    #[test]
    fn superposition_supports_disjoint() {
        let (x, y) = make_superposition_pair(0.2, 1.0).unwrap();
        let y2 = &y.tubes[1];
        for p in y2.core_polyline(101) {
            assert!((x.tubes[0].coords(p).core_dist_sq.sqrt() - 0.5).abs() < 1e-12);
            assert!(y.tubes[0].coords(p).core_dist_sq.sqrt() >= 0.5 - 1e-12);
        }
    }
}
