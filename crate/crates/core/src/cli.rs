//! Batch front end: one config file in, result files out.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Parser;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{Command, ModeChoice, Preset, RunConfig};
use crate::error::{Error, Result};
use crate::ergodic::{
    convergence_series, decay_series, decay_slopes, evaluate_pair, helicity_report, lambda_geometric, lambda_kernel,
    sample_pair, verify_arnold, write_convergence_csv, ConvergenceRow, DecayRow, LambdaEstimate, LambdaMode,
};
use crate::fields::FieldSpec;
use crate::flow::{flow_jacobian_det, integrate};
use crate::linking::{close_curve, compare_with_oracle, link, random_circle_pair, ClosedCurve, LinkOptions, OracleComparison};
use crate::par;
use crate::vec3::Vec3;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_ACCEPTANCE: i32 = 3;

/// Slope windows for the decay of the short-path terms.
pub const TERM_SLOPE_WINDOW: (f64, f64) = (-1.15, -0.85);
pub const JOINT_SLOPE_WINDOW: (f64, f64) = (-1.2, -0.8);

#[derive(Debug, Parser)]
#[command(name = "asymlink", version, about = "Asymptotic linking numbers and helicity of flux-tube fields")]
pub struct Args {
    /// Run configuration (TOML).
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long, value_name = "DIR")]
    pub output: Option<PathBuf>,
    /// Run seed; overrides `seed`.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores); overrides `workers`.
    #[arg(long, value_name = "N")]
    pub workers: Option<usize>,
    /// Suppress the summary on stdout.
    #[arg(long)]
    pub quiet: bool,
}

/// What a command produced.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
    /// Acceptance verdict for commands that compute one.
    pub pass: Option<bool>,
    /// A section failed numerically but the run still produced its files.
    pub numerical_failure: bool,
}

impl Outcome {
    fn exit_code(&self, command: Command) -> i32 {
        if self.numerical_failure {
            EXIT_NUMERICAL
        } else if command == Command::Verify && self.pass == Some(false) {
            EXIT_ACCEPTANCE
        } else {
            EXIT_OK
        }
    }
}

fn exit_code_for(e: &Error) -> i32 {
    if e.is_validation() {
        EXIT_VALIDATION
    } else {
        EXIT_NUMERICAL
    }
}

/// Parse `argv`, run, and return the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let mut cfg = match RunConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code_for(&e);
        }
    };
    if let Some(dir) = args.output {
        cfg.output.dir = std::path::absolute(&dir).unwrap_or(dir);
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    match run(&cfg) {
        Ok(out) => {
            if !args.quiet {
                for line in &out.summary {
                    println!("{line}");
                }
                for f in &out.files {
                    println!("wrote {}", f.display());
                }
            }
            out.exit_code(cfg.command)
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

/// Validate `cfg` and run its command with the configured worker count.
pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    let dir = cfg.output_dir();
    std::fs::create_dir_all(&dir).map_err(|source| Error::Io { path: dir.clone(), source })?;
    par::with_workers(cfg.workers, || match cfg.command {
        Command::Link => run_link(cfg, &dir),
        Command::Helicity => run_helicity(cfg, &dir),
        Command::Lambda => run_lambda(cfg, &dir),
        Command::Converge => run_converge(cfg, &dir),
        Command::Verify => run_verify(cfg, &dir),
        Command::Curves => emit_curves(cfg, &dir),
        Command::Check => run_check(cfg, &dir),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w)?;
    w.flush().map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Parse(format!("{}: {e}", path.display()))
}

#[derive(Serialize)]
struct RandomPairResult {
    index: u64,
    vertices_a: usize,
    vertices_b: usize,
    expected_abs: i64,
    #[serde(flatten)]
    comparison: OracleComparison,
    pass: bool,
}

#[derive(Serialize)]
struct RandomLinkReport {
    seed: u64,
    tolerance: f64,
    agreement: f64,
    max_difference: f64,
    pass: bool,
    pairs: Vec<RandomPairResult>,
}

fn run_link(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    let l = &cfg.link;
    let path = dir.join("link.json");
    if let (Some(a), Some(b)) = (&l.curve_a, &l.curve_b) {
        let ca = ClosedCurve::load_csv(&cfg.resolve(a))?;
        let cb = ClosedCurve::load_csv(&cfg.resolve(b))?;
        let opts = LinkOptions { tol: l.tol, ..LinkOptions::default() };
        let r = link(&ca, &cb, &opts)?;
        write_json(&path, &r)?;
        let summary = vec![format!(
            "gauss = {:.9}, oracle = {}, min distance = {:.3e}",
            r.gauss,
            r.oracle.map(|v| v.to_string()).unwrap_or_else(|| "-".into()),
            r.min_distance
        )];
        let pass = r.oracle.map(|o| (r.gauss - o as f64).abs() < l.agreement);
        return Ok(Outcome { files: vec![path], summary, pass, numerical_failure: false });
    }
    let range = l.min_vertices..l.max_vertices + 1;
    let pairs = par::try_map(l.random_circle_pairs, |k| -> Result<RandomPairResult> {
        let (a, b, expected_abs) = random_circle_pair(cfg.seed, k as u64, range.clone())?;
        let comparison = compare_with_oracle(&a, &b, l.tol, cfg.seed ^ k as u64)?;
        let pass = comparison.difference < l.agreement
            && comparison.rounding_exact
            && comparison.oracle.abs() == expected_abs;
        Ok(RandomPairResult {
            index: k as u64,
            vertices_a: a.segment_count(),
            vertices_b: b.segment_count(),
            expected_abs,
            comparison,
            pass,
        })
    })?;
    let max_difference = pairs.iter().map(|p| p.comparison.difference).fold(0.0, f64::max);
    let pass = pairs.iter().all(|p| p.pass);
    let report = RandomLinkReport { seed: cfg.seed, tolerance: l.tol, agreement: l.agreement, max_difference, pass, pairs };
    write_json(&path, &report)?;
    let summary = vec![format!(
        "{} random circle pairs: max |gauss - oracle| = {:.3e}, {}",
        report.pairs.len(),
        max_difference,
        if pass { "pass" } else { "FAIL" }
    )];
    Ok(Outcome { files: vec![path], summary, pass: Some(pass), numerical_failure: false })
}

fn run_helicity(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    let (x, y) = cfg.fields()?;
    let h = &cfg.helicity;
    let r = helicity_report(&x, &y, &h.grid, &h.potential_grid, h.gauge, h.relative_tolerance)?;
    let path = dir.join("helicity.json");
    write_json(&path, &r)?;
    let summary = vec![
        format!(
            "hopf_kernel = {:.6e} (fine {:.6e}, error {:.1e}), hopf_potential = {:.6e}",
            r.kernel.extrapolated, r.kernel.value, r.kernel.error_estimate, r.potential
        ),
        format!(
            "relative difference {:.2e}, symmetry {:.1e}, bilinearity {:.1e}: {}",
            r.relative_difference,
            r.symmetry_error,
            r.bilinearity_error,
            if r.pass { "pass" } else { "FAIL" }
        ),
    ];
    Ok(Outcome { files: vec![path], summary, pass: Some(r.pass), numerical_failure: false })
}

#[derive(Clone, Debug, Default, Serialize)]
struct ModeSummary {
    mode: &'static str,
    n_used: usize,
    n_discarded: usize,
    mean: f64,
    stderr: f64,
}

fn summarize(mode: LambdaMode, rows: &[(f64, LambdaEstimate)]) -> ModeSummary {
    let vals: Vec<f64> = rows.iter().filter(|(_, e)| !e.discarded).map(|(w, e)| w * e.value).collect();
    let n = vals.len();
    let mean = if n > 0 { par::pairwise_sum(&vals) / n as f64 } else { f64::NAN };
    let stderr = if n > 1 {
        let sq: Vec<f64> = vals.iter().map(|v| (v - mean).powi(2)).collect();
        (par::pairwise_sum(&sq) / (n - 1) as f64 / n as f64).sqrt()
    } else {
        f64::NAN
    };
    ModeSummary { mode: mode.as_str(), n_used: n, n_discarded: rows.len() - n, mean, stderr }
}

#[derive(Serialize)]
struct ModeConsistency {
    checked: usize,
    violations: usize,
    max_gap_over_bound: f64,
    pass: bool,
}

#[derive(Serialize)]
struct LambdaSummary {
    horizon: crate::ergodic::Horizon,
    n_samples: usize,
    modes: Vec<ModeSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    consistency: Option<ModeConsistency>,
}

struct LambdaRow {
    x0: Vec3,
    y0: Vec3,
    weight: f64,
    estimates: Vec<LambdaEstimate>,
    gap_over_bound: Option<(f64, bool)>,
}

fn run_lambda(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    let (x, y) = cfg.fields()?;
    let opts = cfg.lambda_options();
    let h = cfg.horizon;
    let mode = cfg.lambda.mode;
    let rows = par::try_map(cfg.lambda.n_samples, |k| -> Result<LambdaRow> {
        let (px, py) = sample_pair(&x, &y, cfg.lambda.sampling, cfg.seed, k as u64);
        let weight = px.weight * py.weight;
        let (estimates, gap_over_bound) = match mode {
            ModeChoice::Geometric => (vec![lambda_geometric(&x, &y, px.point, py.point, &h, &opts)?], None),
            ModeChoice::Kernel => (vec![lambda_kernel(&x, &y, px.point, py.point, &h, &opts)?], None),
            ModeChoice::Both => {
                let e = evaluate_pair(&x, &y, px.point, py.point, &h, &opts)?;
                let g = if e.geometric.discarded {
                    None
                } else {
                    Some((e.mode_gap() / e.mode_bound(&opts), e.modes_consistent(&opts)))
                };
                (vec![e.geometric, e.kernel], g)
            }
        };
        Ok(LambdaRow { x0: px.point, y0: py.point, weight, estimates, gap_over_bound })
    })?;

    let path = dir.join("lambda.csv");
    write_with(&path, |w| {
        let err = csv_err(&path);
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record([
            "x0_x", "x0_y", "x0_z", "y0_x", "y0_y", "y0_z", "T", "S", "mode", "value", "discarded", "weight",
        ])
        .map_err(&err)?;
        for r in &rows {
            for e in &r.estimates {
                let mut rec: Vec<String> = r.x0.to_array().iter().chain(r.y0.to_array().iter()).map(f64::to_string).collect();
                rec.extend([
                    e.horizon.t.to_string(),
                    e.horizon.s.to_string(),
                    e.mode.as_str().to_string(),
                    e.value.to_string(),
                    e.discarded.to_string(),
                    r.weight.to_string(),
                ]);
                wr.write_record(&rec).map_err(&err)?;
            }
        }
        wr.flush().map_err(|source| Error::Io { path: path.clone(), source })
    })?;

    let mut modes = Vec::new();
    for m in [LambdaMode::Geometric, LambdaMode::Kernel] {
        let picked: Vec<(f64, LambdaEstimate)> = rows
            .iter()
            .filter_map(|r| r.estimates.iter().find(|e| e.mode == m).map(|e| (r.weight, *e)))
            .collect();
        if !picked.is_empty() {
            modes.push(summarize(m, &picked));
        }
    }
    let consistency = (mode == ModeChoice::Both).then(|| {
        let checked: Vec<(f64, bool)> = rows.iter().filter_map(|r| r.gap_over_bound).collect();
        let violations = checked.iter().filter(|(_, ok)| !ok).count();
        ModeConsistency {
            checked: checked.len(),
            violations,
            max_gap_over_bound: checked.iter().map(|c| c.0).fold(0.0, f64::max),
            pass: violations == 0,
        }
    });
    let mut summary: Vec<String> = modes
        .iter()
        .map(|m| format!("{}: mean {:.6e} ± {:.2e} over {} pairs ({} discarded)", m.mode, m.mean, m.stderr, m.n_used, m.n_discarded))
        .collect();
    let pass = consistency.as_ref().map(|c| c.pass);
    if let Some(c) = &consistency {
        summary.push(format!(
            "mode consistency: {} of {} pairs within bound (max gap/bound {:.3})",
            c.checked - c.violations,
            c.checked,
            c.max_gap_over_bound
        ));
    }
    let spath = dir.join("lambda_summary.json");
    write_json(&spath, &LambdaSummary { horizon: h, n_samples: cfg.lambda.n_samples, modes, consistency })?;
    Ok(Outcome { files: vec![path, spath], summary, pass, numerical_failure: false })
}

/// The first `n` seed pairs of the run's sampling stream.
pub fn seed_pairs(cfg: &RunConfig, x: &FieldSpec, y: &FieldSpec, n: usize) -> Vec<(Vec3, Vec3)> {
    (0..n as u64)
        .map(|k| {
            let (px, py) = sample_pair(x, y, cfg.lambda.sampling, cfg.seed, k);
            (px.point, py.point)
        })
        .collect()
}

#[derive(Serialize)]
struct ConvergeSummary {
    increments: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    increments_strictly_decreasing: Option<bool>,
    slopes: [f64; 3],
    slopes_in_window: bool,
    pass: bool,
}

/// True when each slope lies in its window.
pub fn slopes_in_window(slopes: &[f64; 3]) -> bool {
    let inside = |v: f64, (lo, hi): (f64, f64)| v >= lo && v <= hi;
    inside(slopes[0], TERM_SLOPE_WINDOW) && inside(slopes[1], TERM_SLOPE_WINDOW) && inside(slopes[2], JOINT_SLOPE_WINDOW)
}

/// True when the `l1_increment` column strictly decreases.
pub fn increments_strictly_decreasing(rows: &[ConvergenceRow]) -> bool {
    let inc: Vec<f64> = rows.iter().filter_map(|r| r.l1_increment).collect();
    inc.len() >= 2 && inc.windows(2).all(|w| w[1] < w[0])
}

fn run_converge(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    let (x, y) = cfg.fields()?;
    let c = &cfg.converge;
    let opts = cfg.lambda_options();
    let pairs = seed_pairs(cfg, &x, &y, c.n_pairs);
    let (decay, rows, path) = if c.terms_only {
        let decay = decay_series(&x, &y, &pairs, &c.schedule, &opts)?;
        let path = dir.join("decay.csv");
        write_with(&path, |w| {
            let err = csv_err(&path);
            let mut wr = csv::Writer::from_writer(w);
            wr.write_record(["T", "S", "term1", "term2", "term3"]).map_err(&err)?;
            for r in &decay {
                wr.write_record([r.t, r.s, r.term1, r.term2, r.term3].map(|v| v.to_string())).map_err(&err)?;
            }
            wr.flush().map_err(|source| Error::Io { path: path.clone(), source })
        })?;
        (decay, None, path)
    } else {
        let rows = convergence_series(&x, &y, &pairs, &c.schedule, c.mode, &opts)?;
        let path = dir.join("convergence.csv");
        write_with(&path, |w| write_convergence_csv(&rows, w))?;
        let decay =
            rows.iter().map(|r| DecayRow { t: r.t, s: r.s, term1: r.term1, term2: r.term2, term3: r.term3 }).collect();
        (decay, Some(rows), path)
    };
    let slopes = if decay.len() >= 2 { decay_slopes(&decay) } else { [f64::NAN; 3] };
    let in_window = slopes_in_window(&slopes);
    let increments: Vec<f64> =
        rows.as_deref().unwrap_or_default().iter().filter_map(|r| r.l1_increment).collect();
    let decreasing = rows.as_deref().map(increments_strictly_decreasing);
    let pass = in_window && decreasing.unwrap_or(true);
    let mut summary = vec![format!(
        "decay slopes: term1 vs S {:.3}, term2 vs T {:.3}, term3 vs TS {:.3}",
        slopes[0], slopes[1], slopes[2]
    )];
    if let Some(d) = decreasing {
        summary.push(format!(
            "L1 increments {:?}: {}",
            increments.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>(),
            if d { "strictly decreasing" } else { "NOT strictly decreasing" }
        ));
    }
    let spath = dir.join("convergence_summary.json");
    write_json(
        &spath,
        &ConvergeSummary { increments, increments_strictly_decreasing: decreasing, slopes, slopes_in_window: in_window, pass },
    )?;
    Ok(Outcome { files: vec![path, spath], summary, pass: Some(pass), numerical_failure: false })
}

fn run_verify(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    let (x, y) = cfg.fields()?;
    let report = verify_arnold(&x, &y, &cfg.arnold());
    let files = vec![dir.join("report.json"), dir.join("report.csv"), dir.join("decay.csv")];
    write_with(&files[0], |w| report.write_json(w))?;
    write_with(&files[1], |w| report.write_summary_csv(w))?;
    write_with(&files[2], |w| report.write_decay_csv(w))?;
    let mut summary = vec![
        format!("lambda_avg = {:.6e} ± {:.2e} ({} samples, {} discarded)", report.lambda_avg, report.lambda_stderr, report.n_samples, report.n_discarded),
        format!("hopf_kernel = {:.6e} ± {:.1e}, hopf_potential = {:.6e}", report.hopf_kernel, report.hopf_kernel_error, report.hopf_potential),
        format!(
            "|difference| = {:.3e}, allowed {:.3e}: {}",
            report.difference,
            report.allowed,
            if report.pass { "pass" } else { "FAIL" }
        ),
    ];
    summary.extend(report.warnings.iter().map(|w| format!("warning: {w}")));
    for e in &report.errors {
        eprintln!("error in {}: {}", e.section, e.message);
    }
    Ok(Outcome { files, summary, pass: Some(report.pass), numerical_failure: !report.errors.is_empty() })
}

/// Trajectory and closed-curve CSVs for one seed pair.
pub fn emit_curves(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    let (x, y) = cfg.fields()?;
    let (sx, sy) = sample_pair(&x, &y, cfg.lambda.sampling, cfg.seed, 0);
    let x0 = cfg.curves.x0.unwrap_or(sx.point);
    let y0 = cfg.curves.y0.unwrap_or(sy.point);
    let mut files = Vec::new();
    let mut summary = Vec::new();
    for (name, field, p0, dur) in [("x", &x, x0, cfg.horizon.t), ("y", &y, y0, cfg.horizon.s)] {
        let traj = integrate(field, p0, dur, &cfg.integrator)?.resample(cfg.lambda.max_seglen)?;
        let curve = close_curve(&traj)?;
        let tp = dir.join(format!("trajectory_{name}.csv"));
        let cp = dir.join(format!("curve_{name}.csv"));
        write_with(&tp, |w| traj.write_csv(w))?;
        curve.save_csv(&cp)?;
        summary.push(format!(
            "{name}: {} trajectory samples, {} curve vertices, closure length {:.4}",
            traj.len(),
            curve.vertices().len(),
            curve.closure_length()
        ));
        files.push(tp);
        files.push(cp);
    }
    Ok(Outcome { files, summary, pass: None, numerical_failure: false })
}

#[derive(Serialize)]
struct FieldCheck {
    name: String,
    n_points: usize,
    max_divergence: f64,
    jacobian_seeds: usize,
    max_jacobian_error: f64,
    pass: bool,
}

#[derive(Serialize)]
struct CheckReport {
    divergence_step: f64,
    divergence_limit: f64,
    jacobian_time: f64,
    jacobian_limit: f64,
    fields: Vec<FieldCheck>,
    pass: bool,
}

/// Largest `|div X|` over `n` uniform support points drawn from stream `stream`.
pub fn max_divergence(field: &FieldSpec, n: usize, h: f64, seed: u64, stream: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let pts: Vec<Vec3> = (0..n).filter_map(|_| field.sample_support(&mut rng)).collect();
    par::map(pts.len(), |i| field.divergence(pts[i], h).abs()).into_iter().fold(0.0, f64::max)
}

/// Largest `|det Dφ_T − 1|` over `n` uniform support seeds.
pub fn max_jacobian_error(
    field: &FieldSpec,
    n: usize,
    duration: f64,
    h: f64,
    ctrl: &crate::flow::StepControl,
    seed: u64,
    stream: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let pts: Vec<Vec3> = (0..n).filter_map(|_| field.sample_support(&mut rng)).collect();
    let dets = par::try_map(pts.len(), |i| flow_jacobian_det(field, pts[i], duration, h, ctrl))?;
    Ok(dets.into_iter().map(|d| (d - 1.0).abs()).fold(0.0, f64::max))
}

fn run_check(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    let c = &cfg.check;
    let mut named: Vec<(String, FieldSpec)> = Vec::new();
    if c.presets.is_empty() {
        let (x, y) = cfg.fields()?;
        named.push(("x".into(), x));
        named.push(("y".into(), y));
    } else {
        for p in &c.presets {
            let (x, y) = p.build(cfg.fields.minor_radius, cfg.fields.amplitude)?;
            let tag = match p {
                Preset::HopfPair => "hopf_pair",
                Preset::UnlinkedPair => "unlinked_pair",
                Preset::SuperpositionPair => "superposition_pair",
            };
            named.push((format!("{tag}.x"), x));
            named.push((format!("{tag}.y"), y));
        }
    }
    let ctrl = cfg.integrator.with_tolerance(c.jacobian_tol);
    let mut fields = Vec::new();
    for (i, (name, f)) in named.into_iter().enumerate() {
        let stream = 2 * i as u64;
        let max_div = max_divergence(&f, c.n_points, c.divergence_step, cfg.seed, stream);
        let max_jac = max_jacobian_error(&f, c.jacobian_seeds, c.jacobian_time, c.jacobian_step, &ctrl, cfg.seed, stream + 1)?;
        let pass = max_div < c.divergence_limit && max_jac < c.jacobian_limit;
        fields.push(FieldCheck {
            name,
            n_points: c.n_points,
            max_divergence: max_div,
            jacobian_seeds: c.jacobian_seeds,
            max_jacobian_error: max_jac,
            pass,
        });
    }
    let pass = fields.iter().all(|f| f.pass);
    let summary = fields
        .iter()
        .map(|f| {
            format!(
                "{}: max |div| = {:.2e}, max |det - 1| = {:.2e}: {}",
                f.name,
                f.max_divergence,
                f.max_jacobian_error,
                if f.pass { "pass" } else { "FAIL" }
            )
        })
        .collect();
    let report = CheckReport {
        divergence_step: c.divergence_step,
        divergence_limit: c.divergence_limit,
        jacobian_time: c.jacobian_time,
        jacobian_limit: c.jacobian_limit,
        fields,
        pass,
    };
    let path = dir.join("check.json");
    write_json(&path, &report)?;
    Ok(Outcome { files: vec![path], summary, pass: Some(pass), numerical_failure: false })
}
