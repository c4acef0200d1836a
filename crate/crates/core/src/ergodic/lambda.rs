use serde::{Deserialize, Serialize};

use super::Horizon;
use crate::error::{Error, Result};
use crate::fields::FieldSpec;
use crate::flow::{integrate, StepControl};
use crate::linking::{
    close_curve, crossing_linking_retry, gauss_linking_with, min_distance, short_path_terms_for_curves, ClosedCurve,
    ShortPathTerms, DEFAULT_PROJECTION,
};
use crate::quadrature::{double_line_integral, Integrand, PairQuadrature};
use crate::vec3::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaMode {
    /// Linking number of the closed-up arcs divided by `T·S`.
    Geometric,
    /// Linking form integrated along the open arcs divided by `T·S`.
    Kernel,
}

impl LambdaMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            LambdaMode::Geometric => "geometric",
            LambdaMode::Kernel => "kernel",
        }
    }
}

/// A finite-horizon estimate of `λ(x, y)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaEstimate {
    pub value: f64,
    pub mode: LambdaMode,
    pub horizon: Horizon,
    /// Closed curves came closer than the separation floor; excluded from
    /// averages.
    pub discarded: bool,
    /// A seed sits at a zero of its field, so its curve is a point.
    pub degenerate: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LambdaOptions {
    pub ctrl: StepControl,
    /// Trajectories are resampled so that no chord exceeds this length.
    pub max_seglen: f64,
    /// Absolute quadrature tolerance on the normalized kernel value.
    pub tol: f64,
    /// Absolute tolerance of the Gauss integral of the closed curves.
    pub link_tol: f64,
    /// Discard threshold as a fraction of the joint support-box diagonal.
    pub separation_factor: f64,
    /// Seed for the projection retries of the crossing oracle.
    pub projection_seed: u64,
}

impl Default for LambdaOptions {
    fn default() -> Self {
        LambdaOptions {
            ctrl: StepControl::default(),
            max_seglen: 0.05,
            tol: 1e-8,
            link_tol: 1e-3,
            separation_factor: 1e-6,
            projection_seed: 0x11_4b,
        }
    }
}

impl LambdaOptions {
    pub fn validate(&self) -> Result<()> {
        self.ctrl.validate()?;
        let positive = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::validation(format!("{name} must be positive and finite (got {v})")))
            }
        };
        positive(self.max_seglen, "max_seglen")?;
        positive(self.tol, "tol")?;
        positive(self.link_tol, "link_tol")?;
        if !(self.link_tol < 0.5) {
            return Err(Error::validation("link_tol must be below 1/2 so linking numbers round exactly"));
        }
        positive(self.separation_factor, "separation_factor")
    }

    /// `ε_sep` for a pair of fields.
    pub fn separation_floor(&self, x: &FieldSpec, y: &FieldSpec) -> f64 {
        let diag = x.support_box().union(&y.support_box()).diagonal();
        (self.separation_factor * diag).max(1e-10)
    }
}

/// Both estimates and the short-path terms for one seed pair, all from the
/// same pair of closed curves.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairEvaluation {
    pub x0: Vec3,
    pub y0: Vec3,
    pub geometric: LambdaEstimate,
    pub kernel: LambdaEstimate,
    pub terms: ShortPathTerms,
    /// Gauss integral of the closed curves (before rounding).
    pub gauss: f64,
    pub min_distance: f64,
}

impl PairEvaluation {
    /// `|geometric − kernel|`.
    pub fn mode_gap(&self) -> f64 {
        (self.geometric.value - self.kernel.value).abs()
    }

    /// Bound on [`mode_gap`](Self::mode_gap): the absolute short-path terms
    /// plus one quadrature tolerance for the kernel and each term.
    pub fn mode_bound(&self, opts: &LambdaOptions) -> f64 {
        self.terms.sum() + 4.0 * opts.tol
    }

    pub fn modes_consistent(&self, opts: &LambdaOptions) -> bool {
        self.geometric.discarded || self.mode_gap() <= self.mode_bound(opts)
    }
}

struct Curves {
    cx: ClosedCurve,
    cy: ClosedCurve,
    degenerate: bool,
    discarded: bool,
    min_distance: f64,
}

fn build_curves(xf: &FieldSpec, yf: &FieldSpec, x: Vec3, y: Vec3, h: &Horizon, opts: &LambdaOptions) -> Result<Curves> {
    h.validate()?;
    opts.validate()?;
    let cx = close_curve(&integrate(xf, x, h.t, &opts.ctrl)?.resample(opts.max_seglen)?)?;
    let cy = close_curve(&integrate(yf, y, h.s, &opts.ctrl)?.resample(opts.max_seglen)?)?;
    let degenerate = cx.is_degenerate() || cy.is_degenerate();
    let dist = min_distance(&cx, &cy);
    let discarded = !degenerate && dist < opts.separation_floor(xf, yf);
    Ok(Curves { cx, cy, degenerate, discarded, min_distance: dist })
}

fn estimate(value: f64, mode: LambdaMode, h: &Horizon, c: &Curves) -> LambdaEstimate {
    LambdaEstimate {
        value: if c.discarded { f64::NAN } else { value },
        mode,
        horizon: *h,
        discarded: c.discarded,
        degenerate: c.degenerate,
    }
}

fn linking_number(c: &Curves, opts: &LambdaOptions) -> Result<(i64, f64)> {
    let q = PairQuadrature::with_tol(opts.link_tol);
    let gauss = gauss_linking_with(&c.cx, &c.cy, &q)?;
    let lk = match crossing_linking_retry(&c.cx, &c.cy, DEFAULT_PROJECTION, opts.projection_seed) {
        Ok((lk, _)) => lk,
        Err(Error::NonGeneric(_)) => gauss.round() as i64,
        Err(e) => return Err(e),
    };
    Ok((lk, gauss))
}

fn kernel_value(c: &Curves, h: &Horizon, opts: &LambdaOptions) -> Result<f64> {
    let q = PairQuadrature::with_tol(opts.tol * h.product());
    Ok(double_line_integral(&c.cx.arc_segments(), &c.cy.arc_segments(), Integrand::Signed, &q)? / h.product())
}

/// `lk(φ_[0,T]x ∪ σ, ψ_[0,S]y ∪ σ) / (T·S)`.
pub fn lambda_geometric(
    xf: &FieldSpec,
    yf: &FieldSpec,
    x: Vec3,
    y: Vec3,
    h: &Horizon,
    opts: &LambdaOptions,
) -> Result<LambdaEstimate> {
    let c = build_curves(xf, yf, x, y, h, opts)?;
    if c.degenerate || c.discarded {
        return Ok(estimate(0.0, LambdaMode::Geometric, h, &c));
    }
    let (lk, _) = linking_number(&c, opts)?;
    Ok(estimate(lk as f64 / h.product(), LambdaMode::Geometric, h, &c))
}

/// `(1/TS)·∫₀ᵀ∫₀ˢ L(X(φ_t x), Y(ψ_s y)) ds dt` along the open arcs.
pub fn lambda_kernel(
    xf: &FieldSpec,
    yf: &FieldSpec,
    x: Vec3,
    y: Vec3,
    h: &Horizon,
    opts: &LambdaOptions,
) -> Result<LambdaEstimate> {
    let c = build_curves(xf, yf, x, y, h, opts)?;
    if c.degenerate || c.discarded {
        return Ok(estimate(0.0, LambdaMode::Kernel, h, &c));
    }
    Ok(estimate(kernel_value(&c, h, opts)?, LambdaMode::Kernel, h, &c))
}

/// Both modes and the short-path terms for one seed pair.
pub fn evaluate_pair(
    xf: &FieldSpec,
    yf: &FieldSpec,
    x: Vec3,
    y: Vec3,
    h: &Horizon,
    opts: &LambdaOptions,
) -> Result<PairEvaluation> {
    let c = build_curves(xf, yf, x, y, h, opts)?;
    let (geo, ker, terms, gauss) = if c.degenerate || c.discarded {
        (0.0, 0.0, ShortPathTerms::default(), 0.0)
    } else {
        let (lk, gauss) = linking_number(&c, opts)?;
        let ker = kernel_value(&c, h, opts)?;
        let terms = short_path_terms_for_curves(&c.cx, &c.cy, h.t, h.s, opts.tol * h.product())?;
        (lk as f64 / h.product(), ker, terms, gauss)
    };
    Ok(PairEvaluation {
        x0: x,
        y0: y,
        geometric: estimate(geo, LambdaMode::Geometric, h, &c),
        kernel: estimate(ker, LambdaMode::Kernel, h, &c),
        terms,
        gauss,
        min_distance: c.min_distance,
    })
}

/// Estimate in one mode together with the short-path terms of the same
/// closed curves.
pub(crate) fn lambda_with_terms(
    mode: LambdaMode,
    xf: &FieldSpec,
    yf: &FieldSpec,
    x: Vec3,
    y: Vec3,
    h: &Horizon,
    opts: &LambdaOptions,
) -> Result<(LambdaEstimate, ShortPathTerms)> {
    let c = build_curves(xf, yf, x, y, h, opts)?;
    if c.degenerate || c.discarded {
        return Ok((estimate(0.0, mode, h, &c), ShortPathTerms::default()));
    }
    let value = match mode {
        LambdaMode::Geometric => linking_number(&c, opts)?.0 as f64 / h.product(),
        LambdaMode::Kernel => kernel_value(&c, h, opts)?,
    };
    let terms = short_path_terms_for_curves(&c.cx, &c.cy, h.t, h.s, opts.tol * h.product())?;
    Ok((estimate(value, mode, h, &c), terms))
}

/// Short-path terms alone; `None` when the pair is discarded.
pub(crate) fn terms_only(
    xf: &FieldSpec,
    yf: &FieldSpec,
    x: Vec3,
    y: Vec3,
    h: &Horizon,
    opts: &LambdaOptions,
) -> Result<Option<ShortPathTerms>> {
    let c = build_curves(xf, yf, x, y, h, opts)?;
    if c.discarded {
        return Ok(None);
    }
    if c.degenerate {
        return Ok(Some(ShortPathTerms::default()));
    }
    Ok(Some(short_path_terms_for_curves(&c.cx, &c.cy, h.t, h.s, opts.tol * h.product())?))
}

/// Estimate in the requested mode.
pub(crate) fn lambda(
    mode: LambdaMode,
    xf: &FieldSpec,
    yf: &FieldSpec,
    x: Vec3,
    y: Vec3,
    h: &Horizon,
    opts: &LambdaOptions,
) -> Result<LambdaEstimate> {
    match mode {
        LambdaMode::Geometric => lambda_geometric(xf, yf, x, y, h, opts),
        LambdaMode::Kernel => lambda_kernel(xf, yf, x, y, h, opts),
    }
}
