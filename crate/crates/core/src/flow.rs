//! Flow lines of a [`FieldSpec`] by an adaptive Dormand–Prince 5(4) pair
//! with its fourth-order continuous extension.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::FieldSpec;
use crate::vec3::{det3, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl { rel_tol: 1e-9, abs_tol: 1e-9, max_step: 0.05, max_steps: 2_000_000 }
    }
}

impl StepControl {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !(ok(self.rel_tol) && ok(self.abs_tol) && ok(self.max_step) && self.max_steps > 0) {
            return Err(Error::validation(format!("step control parameters must be positive: {self:?}")));
        }
        Ok(())
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.rel_tol = tol;
        self.abs_tol = tol;
        self
    }
}

/// Continuous extension over one accepted step `[t0, t0 + h]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseStep {
    pub t0: f64,
    pub h: f64,
    coeffs: [Vec3; 5],
}

impl DenseStep {
    fn constant(t0: f64, h: f64, p: Vec3) -> Self {
        DenseStep { t0, h, coeffs: [p, Vec3::ZERO, Vec3::ZERO, Vec3::ZERO, Vec3::ZERO] }
    }

    pub fn eval(&self, t: f64) -> Vec3 {
        let s = if self.h > 0.0 { (t - self.t0) / self.h } else { 0.0 };
        let s1 = 1.0 - s;
        let [r1, r2, r3, r4, r5] = self.coeffs;
        r1 + (r2 + (r3 + (r4 + r5 * s1) * s) * s1) * s
    }
}

/// A time-stamped polyline approximation of a flow arc `φ_[0,T] x`, with
/// dense output covering the whole interval.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    samples: Vec<(f64, Vec3)>,
    dense: Vec<DenseStep>,
    duration: f64,
    constant: bool,
}

impl Trajectory {
    /// The fixed point `x0` over `[0, duration]`.
    pub fn constant(x0: Vec3, duration: f64) -> Self {
        let samples = if duration > 0.0 { vec![(0.0, x0), (duration, x0)] } else { vec![(0.0, x0)] };
        Trajectory { samples, dense: vec![DenseStep::constant(0.0, duration, x0)], duration, constant: true }
    }

    /// Piecewise-linear trajectory through time-stamped points (e.g. read
    /// back from CSV). Times must start at 0 and increase strictly.
    pub fn from_samples(samples: Vec<(f64, Vec3)>) -> Result<Self> {
        if samples.is_empty() || samples[0].0 != 0.0 {
            return Err(Error::validation("trajectory samples must start at t = 0"));
        }
        if samples.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::validation("trajectory times must increase strictly"));
        }
        if samples.iter().any(|s| !s.1.is_finite()) {
            return Err(Error::validation("trajectory points must be finite"));
        }
        let duration = samples[samples.len() - 1].0;
        if samples.len() == 1 {
            return Ok(Trajectory::constant(samples[0].1, 0.0));
        }
        let dense = samples
            .windows(2)
            .map(|w| DenseStep {
                t0: w[0].0,
                h: w[1].0 - w[0].0,
                coeffs: [w[0].1, w[1].1 - w[0].1, Vec3::ZERO, Vec3::ZERO, Vec3::ZERO],
            })
            .collect();
        let constant = samples.iter().all(|s| s.1 == samples[0].1);
        Ok(Trajectory { samples, dense, duration, constant })
    }

    pub fn samples(&self) -> &[(f64, Vec3)] {
        &self.samples
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = Vec3> + '_ {
        self.samples.iter().map(|s| s.1)
    }

    pub fn start(&self) -> Vec3 {
        self.samples[0].1
    }

    pub fn end(&self) -> Vec3 {
        self.samples[self.samples.len() - 1].1
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// True when the seed is a fixed point of the flow.
    pub fn is_constant(&self) -> bool {
        self.constant
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dense_steps(&self) -> &[DenseStep] {
        &self.dense
    }

    /// Position at time `t ∈ [0, T]` from the continuous extension.
    pub fn position_at(&self, t: f64) -> Vec3 {
        let t = t.clamp(0.0, self.duration);
        let idx = self.dense.partition_point(|d| d.t0 + d.h < t).min(self.dense.len() - 1);
        self.dense[idx].eval(t)
    }

    /// Longest chord between consecutive samples.
    pub fn max_segment_length(&self) -> f64 {
        self.samples.windows(2).map(|w| (w[1].1 - w[0].1).norm()).fold(0.0, f64::max)
    }

    pub fn arc_length(&self) -> f64 {
        self.samples.windows(2).map(|w| (w[1].1 - w[0].1).norm()).sum()
    }

    /// Refine so that every chord is at most `max_seglen`, inserting points
    /// from the dense output. Existing samples (and both endpoints) are kept
    /// exactly.
    pub fn resample(&self, max_seglen: f64) -> Result<Trajectory> {
        if !(max_seglen > 0.0) {
            return Err(Error::validation("resample: max_seglen must be positive"));
        }
        if self.constant || self.samples.len() < 2 {
            return Ok(self.clone());
        }
        let mut out = Vec::with_capacity(self.samples.len());
        out.push(self.samples[0]);
        for w in self.samples.windows(2) {
            let (t0, p0) = w[0];
            let (t1, p1) = w[1];
            let chord = (p1 - p0).norm();
            let mut pieces = ((chord / max_seglen).ceil() as usize).max(1);
            loop {
                let mut pts = Vec::with_capacity(pieces);
                for j in 1..pieces {
                    let t = t0 + (t1 - t0) * j as f64 / pieces as f64;
                    pts.push((t, self.position_at(t)));
                }
                pts.push((t1, p1));
                let mut prev = p0;
                let fits = pts.iter().all(|&(_, p)| {
                    let ok = (p - prev).norm() <= max_seglen;
                    prev = p;
                    ok
                });
                if fits || pieces > 1 << 20 {
                    out.extend(pts);
                    break;
                }
                pieces *= 2;
            }
        }
        Ok(Trajectory { samples: out, dense: self.dense.clone(), duration: self.duration, constant: false })
    }

    /// CSV with columns `t,x,y,z`; values use shortest round-trip formatting.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| Error::Parse(format!("trajectory csv: {e}"));
        wr.write_record(["t", "x", "y", "z"]).map_err(csv_err)?;
        for &(t, p) in &self.samples {
            wr.write_record([t.to_string(), p.x.to_string(), p.y.to_string(), p.z.to_string()])
                .map_err(csv_err)?;
        }
        wr.flush().map_err(|e| Error::Parse(format!("trajectory csv: {e}")))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    /// Read back `(t, position)` rows written by [`Trajectory::write_csv`].
    pub fn read_csv_samples<R: std::io::Read>(r: R) -> Result<Vec<(f64, Vec3)>> {
        let mut rd = csv::Reader::from_reader(r);
        let mut rows = Vec::new();
        for rec in rd.records() {
            let rec = rec.map_err(|e| Error::Parse(format!("trajectory csv: {e}")))?;
            let v: Vec<f64> = rec
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("trajectory csv: {e}"))))
                .collect::<Result<_>>()?;
            if v.len() != 4 {
                return Err(Error::Parse(format!("trajectory csv: expected 4 columns, got {}", v.len())));
            }
            rows.push((v[0], Vec3::new(v[1], v[2], v[3])));
        }
        Ok(rows)
    }
}

// Dormand–Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;

/// Integrate `dx/dt = field(x)` from `x0` over `[0, duration]`.
///
/// Seeds where the field vanishes are fixed points and return a constant
/// trajectory without stepping.
pub fn integrate(field: &FieldSpec, x0: Vec3, duration: f64, ctrl: &StepControl) -> Result<Trajectory> {
    ctrl.validate()?;
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(Error::validation(format!("integration time must be finite and ≥ 0, got {duration}")));
    }
    if !x0.is_finite() {
        return Err(Error::validation("seed point must be finite"));
    }
    let mut k1 = field.eval(x0);
    if duration == 0.0 || k1 == Vec3::ZERO {
        return Ok(Trajectory::constant(x0, duration));
    }

    let mut samples = vec![(0.0, x0)];
    let mut dense = Vec::new();
    let mut t = 0.0;
    let mut y = x0;
    let mut h = ctrl.max_step.min(duration);
    let mut attempts = 0usize;

    while t < duration {
        if attempts >= ctrl.max_steps {
            return Err(Error::MaxStepsExceeded {
                steps: attempts,
                t,
                target: duration,
                partial: Box::new(Trajectory { samples, dense, duration: t, constant: false }),
            });
        }
        attempts += 1;
        let last = t + h >= duration;
        if last {
            h = duration - t;
        }

        let k2 = field.eval(y + k1 * (h * A21));
        let k3 = field.eval(y + (k1 * A31 + k2 * A32) * h);
        let k4 = field.eval(y + (k1 * A41 + k2 * A42 + k3 * A43) * h);
        let k5 = field.eval(y + (k1 * A51 + k2 * A52 + k3 * A53 + k4 * A54) * h);
        let k6 = field.eval(y + (k1 * A61 + k2 * A62 + k3 * A63 + k4 * A64 + k5 * A65) * h);
        let y_new = y + (k1 * A71 + k3 * A73 + k4 * A74 + k5 * A75 + k6 * A76) * h;
        let k7 = field.eval(y_new);

        let err_vec = (k1 * E1 + k3 * E3 + k4 * E4 + k5 * E5 + k6 * E6 + k7 * E7) * h;
        let mut acc = 0.0;
        for c in 0..3 {
            let sc = ctrl.abs_tol + ctrl.rel_tol * y.component(c).abs().max(y_new.component(c).abs());
            let e = err_vec.component(c) / sc;
            acc += e * e;
        }
        let err = (acc / 3.0).sqrt();

        if err <= 1.0 {
            let ydiff = y_new - y;
            let bspl = k1 * h - ydiff;
            let coeffs = [
                y,
                ydiff,
                bspl,
                ydiff - k7 * h - bspl,
                (k1 * D1 + k3 * D3 + k4 * D4 + k5 * D5 + k6 * D6 + k7 * D7) * h,
            ];
            dense.push(DenseStep { t0: t, h, coeffs });
            t = if last { duration } else { t + h };
            y = y_new;
            k1 = k7;
            samples.push((t, y));
            let fac = if err == 0.0 { MAX_FACTOR } else { (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR) };
            h = (h * fac).min(ctrl.max_step);
        } else {
            let fac = (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, 1.0);
            h *= fac;
            if t + h == t {
                return Err(Error::MaxStepsExceeded {
                    steps: attempts,
                    t,
                    target: duration,
                    partial: Box::new(Trajectory { samples, dense, duration: t, constant: false }),
                });
            }
        }
    }
    Ok(Trajectory { samples, dense, duration, constant: false })
}

/// Determinant of the central-difference Jacobian of the time-`duration`
/// flow map at `x0`. Each column divides by the realized seed spacing.
pub fn flow_jacobian_det(field: &FieldSpec, x0: Vec3, duration: f64, h: f64, ctrl: &StepControl) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::validation("flow_jacobian_det: h must be positive"));
    }
    let mut cols = [Vec3::ZERO; 3];
    for (k, col) in cols.iter_mut().enumerate() {
        let c = x0.component(k);
        let (hi, lo) = (c + h, c - h);
        let fp = integrate(field, x0.with_component(k, hi), duration, ctrl)?.end();
        let fm = integrate(field, x0.with_component(k, lo), duration, ctrl)?.end();
        *col = (fp - fm) / (hi - lo);
    }
    Ok(det3(cols[0], cols[1], cols[2]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::TubeSpec;
    use std::f64::consts::PI;

    fn canonical(a: f64) -> FieldSpec {
        FieldSpec::single(TubeSpec::canonical(a, 1.0).unwrap())
    }

    #[test]
    fn quarter_turn_on_core() {
        let tr = integrate(&canonical(0.5), Vec3::X, PI / 2.0, &StepControl::default()).unwrap();
        assert!((tr.end() - Vec3::Y).norm() < 1e-6);
        assert_eq!(tr.samples().last().unwrap().0, PI / 2.0);
    }

    #[test]
    fn seed_outside_support_is_fixed() {
        let x0 = Vec3::new(3.0, 0.0, 0.0);
        let tr = integrate(&canonical(0.5), x0, 12.0, &StepControl::default()).unwrap();
        assert!(tr.is_constant());
        assert!(tr.points().all(|p| p == x0));
        assert_eq!(tr.duration(), 12.0);
    }

    #[test]
    fn zero_duration_is_single_sample() {
        let tr = integrate(&canonical(0.5), Vec3::X, 0.0, &StepControl::default()).unwrap();
        assert_eq!(tr.len(), 1);
        assert_eq!(tr.start(), Vec3::X);
    }

    #[test]
    fn max_steps_carries_partial_trajectory() {
        let ctrl = StepControl { max_steps: 10, ..StepControl::default() };
        match integrate(&canonical(0.5), Vec3::X, 100.0, &ctrl) {
            Err(Error::MaxStepsExceeded { partial, steps, .. }) => {
                assert_eq!(steps, 10);
                assert!(partial.len() > 1);
                assert!(partial.duration() > 0.0 && partial.duration() < 100.0);
            }
            other => panic!("expected MaxStepsExceeded, got {other:?}"),
        }
    }

    #[test]
    fn invalid_inputs() {
        assert!(integrate(&canonical(0.5), Vec3::X, -1.0, &StepControl::default()).is_err());
        let bad = StepControl { rel_tol: 0.0, ..StepControl::default() };
        assert!(integrate(&canonical(0.5), Vec3::X, 1.0, &bad).is_err());
    }

    #[test]
    fn dense_output_tracks_circle() {
        let tr = integrate(&canonical(0.5), Vec3::X, 7.0, &StepControl::default()).unwrap();
        for k in 0..=700 {
            let t = k as f64 * 0.01;
            let exact = Vec3::new(t.cos(), t.sin(), 0.0);
            assert!((tr.position_at(t) - exact).norm() < 1e-7, "t = {t}");
        }
    }

    #[test]
    fn orbits_are_planar_circles() {
        let f = canonical(0.4);
        let x0 = Vec3::new(1.15, 0.2, -0.17);
        let rho0 = (x0.x * x0.x + x0.y * x0.y).sqrt();
        let tr = integrate(&f, x0, 30.0, &StepControl::default()).unwrap();
        for p in tr.points() {
            assert!((p.z - x0.z).abs() < 1e-8);
            assert!(((p.x * p.x + p.y * p.y).sqrt() - rho0).abs() < 1e-8);
        }
    }

    #[test]
    fn group_property() {
        let (x, _) = crate::fields::make_hopf_pair(0.2, 1.0).unwrap();
        let ctrl = StepControl::default();
        let x0 = Vec3::new(0.95, 0.3, 0.05);
        let a = integrate(&x, x0, 3.0, &ctrl).unwrap();
        let b = integrate(&x, a.end(), 4.5, &ctrl).unwrap();
        let c = integrate(&x, x0, 7.5, &ctrl).unwrap();
        assert!((b.end() - c.end()).norm() < 1e-7);
    }

    /// With tolerances loose enough that `max_step` governs, halving the
    /// step must shrink the endpoint error by at least 8× (order ≥ 4).
    #[test]
    fn fixed_step_convergence_order() {
        let f = canonical(0.5);
        let duration = 2.0 * PI;
        let errs: Vec<f64> = [0.4, 0.2, 0.1, 0.05]
            .iter()
            .map(|&hmax| {
                let ctrl = StepControl { rel_tol: 1.0, abs_tol: 1.0, max_step: hmax, max_steps: 1_000_000 };
                (integrate(&f, Vec3::X, duration, &ctrl).unwrap().end() - Vec3::X).norm()
            })
            .collect();
        for w in errs.windows(2) {
            assert!(w[0] / w[1] >= 8.0, "errors {errs:?}");
        }
    }

    #[test]
    fn tolerance_controls_error() {
        let f = canonical(0.5);
        let mut prev = f64::INFINITY;
        for tol in [1e-5, 1e-6, 1e-7, 1e-8, 1e-9] {
            let ctrl = StepControl { max_step: 10.0, ..StepControl::default().with_tolerance(tol) };
            let e = (integrate(&f, Vec3::X, 4.0 * PI, &ctrl).unwrap().end() - Vec3::X).norm();
            assert!(e < prev, "tol {tol}: {e} !< {prev}");
            assert!(e < 1e3 * tol);
            prev = e;
        }
    }

    #[test]
    fn jacobian_det_identity_for_zero_field() {
        let d = flow_jacobian_det(&FieldSpec::zero(), Vec3::new(5.0, -1.0, 0.3), 10.0, 1e-4, &StepControl::default()).unwrap();
        assert_eq!(d, 1.0);
    }

    #[test]
    fn jacobian_det_canonical() {
        let d = flow_jacobian_det(&canonical(0.5), Vec3::new(1.0, 0.0, 0.1), 10.0, 1e-4, &StepControl::default()).unwrap();
        assert!((d - 1.0).abs() < 1e-4, "det = {d}");
    }

    #[test]
    fn resample_straight_and_circle() {
        let tr = integrate(&canonical(0.5), Vec3::X, 2.0 * PI, &StepControl::default()).unwrap();
        let r = tr.resample(0.01).unwrap();
        assert!(r.max_segment_length() <= 0.01);
        assert_eq!(r.end(), tr.end());
        assert_eq!(r.start(), tr.start());
        assert!(r.len() >= 629);

        let line = Trajectory::from_samples(vec![(0.0, Vec3::ZERO), (1.0, Vec3::X)]).unwrap();
        let lr = line.resample(0.1).unwrap();
        assert!(lr.len() > 10);
        assert!(lr.max_segment_length() <= 0.1);
        assert_eq!(lr.end(), Vec3::X);

        let c = Trajectory::constant(Vec3::X, 3.0);
        assert_eq!(c.resample(0.1).unwrap(), c);
        let single = Trajectory::constant(Vec3::X, 0.0);
        assert_eq!(single.resample(0.1).unwrap().len(), 1);
        assert!(tr.resample(0.0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let tr = integrate(&canonical(0.5), Vec3::new(1.1, 0.0, 0.05), 3.0, &StepControl::default()).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,x,y,z\n"));
        let rows = Trajectory::read_csv_samples(&buf[..]).unwrap();
        assert_eq!(rows, tr.samples());
    }
}
