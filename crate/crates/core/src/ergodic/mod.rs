//! Asymptotic and average linking numbers, helicity integrals and the
//! comparison between them.

mod arnold;
mod helicity;
mod lambda;
mod sampling;

pub use arnold::{
    average_linking, convergence_series, decay_series, decay_slopes, log_log_slope, verify_arnold, write_convergence_csv, ArnoldConfig,
    ArnoldReport, AverageLinking, ConvergenceRow, DecayRow, LambdaSample, SectionError, DISCARD_WARNING_RATE,
    MAX_OVERSAMPLING,
};
pub use helicity::{
    helicity_report, hopf_kernel, hopf_potential, vector_potential, CellRule, HelicityEstimate, HelicityReport, PotentialGauge,
    QuadratureGrid, BILINEARITY_TOLERANCE, SYMMETRY_TOLERANCE,
};
pub use lambda::{
    evaluate_pair, lambda_geometric, lambda_kernel, LambdaEstimate, LambdaMode, LambdaOptions, PairEvaluation,
};
pub use sampling::{sample_pair, sample_point, Sampling, WeightedPoint};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Flow times `T` for `X` and `S` for `Y`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Horizon {
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "S")]
    pub s: f64,
}

impl Horizon {
    pub fn new(t: f64, s: f64) -> Result<Self> {
        let h = Horizon { t, s };
        h.validate()?;
        Ok(h)
    }

    pub fn equal(t: f64) -> Result<Self> {
        Horizon::new(t, t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t > 0.0 && self.t.is_finite() && self.s > 0.0 && self.s.is_finite()) {
            return Err(Error::validation(format!(
                "horizon must be positive and finite (T = {}, S = {})",
                self.t, self.s
            )));
        }
        Ok(())
    }

    pub fn product(&self) -> f64 {
        self.t * self.s
    }
}

impl Default for Horizon {
    fn default() -> Self {
        Horizon { t: 16.0 * std::f64::consts::PI, s: 16.0 * std::f64::consts::PI }
    }
}

/// Thin-tube prediction `Σ lk(core_i, core_j)·Φ_i·Φ_j` over tube pairs,
/// with linking numbers of the cores from the crossing oracle.
pub fn thin_tube_prediction(x: &crate::fields::FieldSpec, y: &crate::fields::FieldSpec) -> Result<f64> {
    use crate::linking::{crossing_linking_retry, ClosedCurve, DEFAULT_PROJECTION};
    let mut total = 0.0;
    for tx in &x.tubes {
        let cx = ClosedCurve::new(tx.core_polyline(256), 0..0)?;
        for ty in &y.tubes {
            let cy = ClosedCurve::new(ty.core_polyline(256), 0..0)?;
            let (lk, _) = crossing_linking_retry(&cx, &cy, DEFAULT_PROJECTION, 17)?;
            total += lk as f64 * tx.flux() * ty.flux();
        }
    }
    Ok(total)
}
