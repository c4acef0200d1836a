use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::helicity::{hopf_kernel, hopf_potential, PotentialGauge, QuadratureGrid};
use super::lambda::{lambda, lambda_with_terms, terms_only, LambdaEstimate, LambdaMode, LambdaOptions};
use super::sampling::{sample_pair, Sampling};
use super::{thin_tube_prediction, Horizon};
use crate::error::{Error, Result};
use crate::fields::FieldSpec;
use crate::par;
use crate::vec3::Vec3;

/// Discard rates above this fraction are flagged.
pub const DISCARD_WARNING_RATE: f64 = 0.2;
/// Attempts per requested sample before giving up on replacements.
pub const MAX_OVERSAMPLING: usize = 3;

/// One Monte-Carlo sample of the average linking number.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaSample {
    pub index: u64,
    pub x0: Vec3,
    pub y0: Vec3,
    /// Product of the two importance weights.
    pub weight: f64,
    pub estimate: LambdaEstimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AverageLinking {
    pub mean: f64,
    pub stderr: f64,
    /// Non-discarded samples entering the mean.
    pub n_samples: usize,
    pub n_discarded: usize,
    pub n_attempted: usize,
    pub warning: Option<String>,
    pub samples: Vec<LambdaSample>,
}

impl AverageLinking {
    pub fn discard_rate(&self) -> f64 {
        if self.n_attempted == 0 {
            0.0
        } else {
            self.n_discarded as f64 / self.n_attempted as f64
        }
    }
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = par::pairwise_sum(values) / n;
    let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = if values.len() > 1 { par::pairwise_sum(&dev) / (n - 1.0) } else { 0.0 };
    (mean, (var / n).sqrt())
}

/// Monte-Carlo estimate of `Λ(X,Y) = ∫∫ λ(x,y) dx dy` from `n` seed pairs.
///
/// Pair `k` is drawn from stream `k` of `seed`, so results do not depend on
/// the worker count. Discarded pairs are replaced by further streams, up to
/// `3n` attempts in total.
#[allow(clippy::too_many_arguments)]
pub fn average_linking(
    x: &FieldSpec,
    y: &FieldSpec,
    h: &Horizon,
    n: usize,
    seed: u64,
    mode: LambdaMode,
    sampling: Sampling,
    opts: &LambdaOptions,
) -> Result<AverageLinking> {
    if n < 2 {
        return Err(Error::validation(format!("average_linking needs n ≥ 2 samples (got {n})")));
    }
    h.validate()?;
    opts.validate()?;
    let max_attempts = MAX_OVERSAMPLING * n;
    let mut samples: Vec<LambdaSample> = Vec::with_capacity(n);
    let mut accepted = 0;
    while accepted < n && samples.len() < max_attempts {
        let start = samples.len() as u64;
        let batch = (n - accepted).min(max_attempts - samples.len());
        let fresh = par::try_map(batch, |i| -> Result<LambdaSample> {
            let k = start + i as u64;
            let (px, py) = sample_pair(x, y, sampling, seed, k);
            let estimate = lambda(mode, x, y, px.point, py.point, h, opts)?;
            Ok(LambdaSample { index: k, x0: px.point, y0: py.point, weight: px.weight * py.weight, estimate })
        })?;
        accepted += fresh.iter().filter(|s| !s.estimate.discarded).count();
        samples.extend(fresh);
    }
    let values: Vec<f64> =
        samples.iter().filter(|s| !s.estimate.discarded).map(|s| s.weight * s.estimate.value).collect();
    let n_discarded = samples.len() - values.len();
    if values.len() < 2 {
        return Err(Error::Validation(format!(
            "only {} of {} seed pairs survived the separation test",
            values.len(),
            samples.len()
        )));
    }
    let (mean, stderr) = mean_and_stderr(&values);
    let rate = n_discarded as f64 / samples.len() as f64;
    let mut warning = None;
    if rate > DISCARD_WARNING_RATE {
        warning = Some(format!("discard rate {:.1}% exceeds {:.0}%", 100.0 * rate, 100.0 * DISCARD_WARNING_RATE));
    }
    if values.len() < n {
        let msg = format!("only {} of {n} requested samples after {} attempts", values.len(), samples.len());
        warning = Some(match warning {
            Some(w) => format!("{w}; {msg}"),
            None => msg,
        });
    }
    Ok(AverageLinking { mean, stderr, n_samples: values.len(), n_discarded, n_attempted: samples.len(), warning, samples })
}

/// One horizon of a convergence table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "S")]
    pub s: f64,
    pub lambda_mean: f64,
    /// Mean `|λ̂(this row) − λ̂(previous row)|`; absent on the first row.
    pub l1_increment: Option<f64>,
    pub term1: f64,
    pub term2: f64,
    pub term3: f64,
    pub n_used: usize,
}

/// Empirical L¹ Cauchy diagnostic over fixed seed pairs.
pub fn convergence_series(
    x: &FieldSpec,
    y: &FieldSpec,
    pairs: &[(Vec3, Vec3)],
    schedule: &[Horizon],
    mode: LambdaMode,
    opts: &LambdaOptions,
) -> Result<Vec<ConvergenceRow>> {
    if pairs.is_empty() {
        return Err(Error::validation("convergence_series needs at least one seed pair"));
    }
    if schedule.is_empty() {
        return Err(Error::validation("convergence_series needs a non-empty schedule"));
    }
    for h in schedule {
        h.validate()?;
    }
    for w in schedule.windows(2) {
        if !(w[1].t > w[0].t && w[1].s > w[0].s) {
            return Err(Error::validation("schedule must be strictly increasing in both T and S"));
        }
    }
    let m = pairs.len();
    let jobs = par::try_map(schedule.len() * m, |idx| {
        let (hi, pi) = (idx / m, idx % m);
        let (px, py) = pairs[pi];
        lambda_with_terms(mode, x, y, px, py, &schedule[hi], opts)
    })?;
    let mut rows = Vec::with_capacity(schedule.len());
    for (hi, h) in schedule.iter().enumerate() {
        let cur = &jobs[hi * m..(hi + 1) * m];
        let used: Vec<_> = cur.iter().filter(|(e, _)| !e.discarded).collect();
        let count = used.len().max(1) as f64;
        let mean_of = |f: &dyn Fn(&(LambdaEstimate, crate::linking::ShortPathTerms)) -> f64| {
            par::pairwise_sum(&used.iter().map(|r| f(r)).collect::<Vec<_>>()) / count
        };
        let l1_increment = (hi > 0).then(|| {
            let prev = &jobs[(hi - 1) * m..hi * m];
            let diffs: Vec<f64> = prev
                .iter()
                .zip(cur)
                .filter(|(a, b)| !a.0.discarded && !b.0.discarded)
                .map(|(a, b)| (b.0.value - a.0.value).abs())
                .collect();
            if diffs.is_empty() {
                0.0
            } else {
                par::pairwise_sum(&diffs) / diffs.len() as f64
            }
        });
        rows.push(ConvergenceRow {
            t: h.t,
            s: h.s,
            lambda_mean: mean_of(&|r| r.0.value),
            l1_increment,
            term1: mean_of(&|r| r.1.arc_closure),
            term2: mean_of(&|r| r.1.closure_arc),
            term3: mean_of(&|r| r.1.closure_closure),
            n_used: used.len(),
        });
    }
    Ok(rows)
}

/// Write a convergence table as CSV
/// (`T,S,lambda_mean,l1_increment,term1,term2,term3`).
pub fn write_convergence_csv<W: Write>(rows: &[ConvergenceRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::Parse(format!("convergence csv: {e}"));
    wr.write_record(["T", "S", "lambda_mean", "l1_increment", "term1", "term2", "term3"]).map_err(err)?;
    for r in rows {
        let inc = r.l1_increment.map(|v| v.to_string()).unwrap_or_default();
        wr.write_record([
            r.t.to_string(),
            r.s.to_string(),
            r.lambda_mean.to_string(),
            inc,
            r.term1.to_string(),
            r.term2.to_string(),
            r.term3.to_string(),
        ])
        .map_err(err)?;
    }
    wr.flush().map_err(|e| Error::Parse(format!("convergence csv: {e}")))
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Short-path decay table row.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "S")]
    pub s: f64,
    pub term1: f64,
    pub term2: f64,
    pub term3: f64,
}

/// Mean short-path terms over fixed seed pairs for each horizon, without
/// the linking estimates. Discarded pairs are left out of the means.
pub fn decay_series(
    x: &FieldSpec,
    y: &FieldSpec,
    pairs: &[(Vec3, Vec3)],
    schedule: &[Horizon],
    opts: &LambdaOptions,
) -> Result<Vec<DecayRow>> {
    if pairs.is_empty() || schedule.is_empty() {
        return Err(Error::validation("decay_series needs seed pairs and a non-empty schedule"));
    }
    let m = pairs.len();
    let jobs = par::try_map(schedule.len() * m, |idx| {
        let (px, py) = pairs[idx % m];
        terms_only(x, y, px, py, &schedule[idx / m], opts)
    })?;
    Ok(schedule
        .iter()
        .enumerate()
        .map(|(hi, h)| {
            let used: Vec<_> = jobs[hi * m..(hi + 1) * m].iter().flatten().collect();
            let count = used.len().max(1) as f64;
            let mean = |k: usize| par::pairwise_sum(&used.iter().map(|t| t.as_array()[k]).collect::<Vec<_>>()) / count;
            DecayRow { t: h.t, s: h.s, term1: mean(0), term2: mean(1), term3: mean(2) }
        })
        .collect())
}

/// Least-squares log-log slopes of the three decay columns against `S`,
/// `T` and `T·S` respectively.
pub fn decay_slopes(rows: &[DecayRow]) -> [f64; 3] {
    let t: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let s: Vec<f64> = rows.iter().map(|r| r.s).collect();
    let ts: Vec<f64> = rows.iter().map(|r| r.t * r.s).collect();
    let col = |f: fn(&DecayRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    [
        log_log_slope(&s, &col(|r| r.term1)),
        log_log_slope(&t, &col(|r| r.term2)),
        log_log_slope(&ts, &col(|r| r.term3)),
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArnoldConfig {
    pub horizon: Horizon,
    pub n_samples: usize,
    pub seed: u64,
    pub mode: LambdaMode,
    pub sampling: Sampling,
    #[serde(skip)]
    pub lambda: LambdaOptions,
    pub grid: QuadratureGrid,
    pub potential_grid: QuadratureGrid,
    pub gauge: PotentialGauge,
    /// Horizons of the decay table; empty skips it.
    pub decay_schedule: Vec<Horizon>,
    pub decay_pairs: usize,
    pub relative_tolerance: f64,
    pub stderr_factor: f64,
}

impl Default for ArnoldConfig {
    fn default() -> Self {
        ArnoldConfig {
            horizon: Horizon::default(),
            n_samples: 200,
            seed: 20_240_601,
            mode: LambdaMode::Kernel,
            sampling: Sampling::FluxWeighted,
            lambda: LambdaOptions::default(),
            grid: QuadratureGrid::default(),
            potential_grid: QuadratureGrid { spacing: 0.0125, ..QuadratureGrid::default() },
            gauge: PotentialGauge::Axial,
            decay_schedule: [4.0, 8.0, 16.0].iter().map(|k| Horizon { t: k * PI, s: k * PI }).collect(),
            decay_pairs: 8,
            relative_tolerance: 0.05,
            stderr_factor: 3.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectionError {
    pub section: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArnoldReport {
    pub lambda_avg: f64,
    pub lambda_stderr: f64,
    /// Grid-refinement extrapolation of the kernel helicity integral.
    pub hopf_kernel: f64,
    pub hopf_kernel_fine: f64,
    pub hopf_kernel_error: f64,
    pub hopf_potential: f64,
    pub thin_tube_prediction: Option<f64>,
    pub n_samples: usize,
    pub n_discarded: usize,
    pub discard_rate: f64,
    pub horizon: Horizon,
    pub decay_table: Vec<DecayRow>,
    /// `|Λ̂ − Ĥ|` and the allowed `k·stderr + r·|Ĥ|`.
    pub difference: f64,
    pub allowed: f64,
    pub pass: bool,
    pub warnings: Vec<String>,
    pub errors: Vec<SectionError>,
}

impl ArnoldReport {
    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self).map_err(|e| Error::Parse(format!("report json: {e}")))
    }

    /// Single-row summary CSV.
    pub fn write_summary_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let err = |e: csv::Error| Error::Parse(format!("report csv: {e}"));
        wr.write_record([
            "lambda_avg",
            "lambda_stderr",
            "hopf_kernel",
            "hopf_kernel_error",
            "hopf_potential",
            "thin_tube_prediction",
            "n_samples",
            "n_discarded",
            "T",
            "S",
            "pass",
        ])
        .map_err(err)?;
        wr.write_record([
            self.lambda_avg.to_string(),
            self.lambda_stderr.to_string(),
            self.hopf_kernel.to_string(),
            self.hopf_kernel_error.to_string(),
            self.hopf_potential.to_string(),
            self.thin_tube_prediction.map(|v| v.to_string()).unwrap_or_default(),
            self.n_samples.to_string(),
            self.n_discarded.to_string(),
            self.horizon.t.to_string(),
            self.horizon.s.to_string(),
            self.pass.to_string(),
        ])
        .map_err(err)?;
        wr.flush().map_err(|e| Error::Parse(format!("report csv: {e}")))
    }

    pub fn write_decay_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let err = |e: csv::Error| Error::Parse(format!("decay csv: {e}"));
        wr.write_record(["T", "S", "term1", "term2", "term3"]).map_err(err)?;
        for r in &self.decay_table {
            wr.write_record([r.t, r.s, r.term1, r.term2, r.term3].map(|v| v.to_string())).map_err(err)?;
        }
        wr.flush().map_err(|e| Error::Parse(format!("decay csv: {e}")))
    }
}

/// `Λ̂`, `Ĥ` and diagnostics for one pair of fields. Failing sections are
/// recorded in `errors` and the report is still produced.
pub fn verify_arnold(x: &FieldSpec, y: &FieldSpec, cfg: &ArnoldConfig) -> ArnoldReport {
    let mut errors = Vec::new();
    let mut warnings = Vec::new();
    let mut record = |section: &str, e: Error| errors.push(SectionError { section: section.into(), message: e.to_string() });

    let avg = average_linking(x, y, &cfg.horizon, cfg.n_samples, cfg.seed, cfg.mode, cfg.sampling, &cfg.lambda);
    let (lambda_avg, lambda_stderr, n_samples, n_discarded, discard_rate) = match avg {
        Ok(a) => {
            if let Some(w) = &a.warning {
                warnings.push(w.clone());
            }
            (a.mean, a.stderr, a.n_samples, a.n_discarded, a.discard_rate())
        }
        Err(e) => {
            record("average_linking", e);
            (f64::NAN, f64::NAN, 0, 0, 0.0)
        }
    };
    let (hk, hk_fine, hk_err) = match hopf_kernel(x, y, &cfg.grid) {
        Ok(h) => (h.extrapolated, h.value, h.error_estimate),
        Err(e) => {
            record("hopf_kernel", e);
            (f64::NAN, f64::NAN, f64::NAN)
        }
    };
    let hp = hopf_potential(x, y, &cfg.potential_grid, cfg.gauge).unwrap_or_else(|e| {
        record("hopf_potential", e);
        f64::NAN
    });
    let prediction = thin_tube_prediction(x, y).map_err(|e| record("thin_tube_prediction", e)).ok();

    let mut decay_table = Vec::new();
    if !cfg.decay_schedule.is_empty() && cfg.decay_pairs > 0 {
        let pairs: Vec<(Vec3, Vec3)> = (0..cfg.decay_pairs as u64)
            .map(|k| {
                let (a, b) = sample_pair(x, y, cfg.sampling, cfg.seed ^ 0xdeca_7000, k);
                (a.point, b.point)
            })
            .collect();
        match decay_series(x, y, &pairs, &cfg.decay_schedule, &cfg.lambda) {
            Ok(rows) => decay_table = rows,
            Err(e) => record("decay_table", e),
        }
    }

    let difference = (lambda_avg - hk).abs();
    let allowed = cfg.stderr_factor * lambda_stderr + cfg.relative_tolerance * hk.abs();
    let pass = errors.is_empty() && difference <= allowed;
    ArnoldReport {
        lambda_avg,
        lambda_stderr,
        hopf_kernel: hk,
        hopf_kernel_fine: hk_fine,
        hopf_kernel_error: hk_err,
        hopf_potential: hp,
        thin_tube_prediction: prediction,
        n_samples,
        n_discarded,
        discard_rate,
        horizon: cfg.horizon,
        decay_table,
        difference,
        allowed,
        pass,
        warnings,
        errors,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{make_hopf_pair, make_unlinked_pair};

    fn quick_opts() -> LambdaOptions {
        LambdaOptions { max_seglen: 0.1, ..LambdaOptions::default() }
    }

    #[test]
    fn average_is_deterministic_and_validated() {
        let (x, y) = make_hopf_pair(0.2, 1.0).unwrap();
        let h = Horizon::equal(4.0 * PI).unwrap();
        let run = || average_linking(&x, &y, &h, 6, 7, LambdaMode::Geometric, Sampling::FluxWeighted, &quick_opts());
        let a = run().unwrap();
        let b = run().unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_samples, 6);
        assert!(a.stderr >= 0.0);
        assert!(average_linking(&x, &y, &h, 1, 7, LambdaMode::Geometric, Sampling::Box, &quick_opts())
            .unwrap_err()
            .is_validation());
    }

    #[test]
    fn zero_field_rows_are_zero() {
        let z = FieldSpec::zero();
        let pairs = vec![(Vec3::X, Vec3::ZERO), (Vec3::Y, Vec3::Z)];
        let sched = [Horizon::equal(1.0).unwrap(), Horizon::equal(2.0).unwrap()];
        let rows = convergence_series(&z, &z, &pairs, &sched, LambdaMode::Kernel, &quick_opts()).unwrap();
        for r in &rows {
            assert_eq!((r.lambda_mean, r.term1, r.term2, r.term3), (0.0, 0.0, 0.0, 0.0));
        }
        assert_eq!(rows[0].l1_increment, None);
        assert_eq!(rows[1].l1_increment, Some(0.0));
    }

    #[test]
    fn schedule_must_increase() {
        let z = FieldSpec::zero();
        let sched = [Horizon::new(2.0, 1.0).unwrap(), Horizon::new(3.0, 1.0).unwrap()];
        let e = convergence_series(&z, &z, &[(Vec3::X, Vec3::X)], &sched, LambdaMode::Kernel, &quick_opts());
        assert!(e.unwrap_err().is_validation());
    }

    #[test]
    fn log_log_slope_of_power_law() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-1.5)).collect();
        assert!((log_log_slope(&xs, &ys) + 1.5).abs() < 1e-12);
    }

    #[test]
    fn unlinked_pair_report_passes() {
        let (x, y) = make_unlinked_pair(0.2, 1.0).unwrap();
        let cfg = ArnoldConfig {
            horizon: Horizon::equal(4.0 * PI).unwrap(),
            n_samples: 8,
            mode: LambdaMode::Kernel,
            lambda: quick_opts(),
            grid: QuadratureGrid { spacing: 0.1, ..QuadratureGrid::default() },
            potential_grid: QuadratureGrid { spacing: 0.05, ..QuadratureGrid::default() },
            decay_schedule: Vec::new(),
            ..ArnoldConfig::default()
        };
        let r = verify_arnold(&x, &y, &cfg);
        assert!(r.errors.is_empty(), "{:?}", r.errors);
        assert!(r.lambda_avg.abs() <= 3.0 * r.lambda_stderr, "{r:?}");
        assert!(r.hopf_kernel.abs() < 1e-9 && r.hopf_potential.abs() < 1e-9, "{r:?}");
        assert_eq!(r.thin_tube_prediction, Some(0.0));
        assert!(r.pass);
        let mut buf = Vec::new();
        r.write_json(&mut buf).unwrap();
        let back: ArnoldReport = serde_json::from_slice(&buf).unwrap();
        assert_eq!(back.n_samples, 8);
    }

    #[test]
    fn report_records_failing_sections() {
        let (x, y) = make_hopf_pair(0.2, 1.0).unwrap();
        let cfg = ArnoldConfig { n_samples: 1, decay_schedule: Vec::new(), ..ArnoldConfig::default() };
        let cfg = ArnoldConfig { grid: QuadratureGrid { spacing: 0.2, ..cfg.grid }, potential_grid: QuadratureGrid { spacing: 0.1, ..cfg.grid }, ..cfg };
        let r = verify_arnold(&x, &y, &cfg);
        assert!(!r.pass);
        assert_eq!(r.errors[0].section, "average_linking");
        assert!(r.hopf_kernel.is_finite());
    }
}
