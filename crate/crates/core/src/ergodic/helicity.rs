use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{FieldSpec, TubeSpec};
use crate::par;
use crate::quadrature::gauss_legendre;
use crate::vec3::Vec3;

const INV_4PI: f64 = 1.0 / (4.0 * PI);
const SINGULAR_R2: f64 = 1e-28;

/// Per-cell quadrature rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "order")]
pub enum CellRule {
    Midpoint,
    /// Tensor Gauss–Legendre with this many points per axis.
    Gauss(usize),
}

/// A Cartesian grid laid over each tube's support box. Cell counts per axis
/// are `⌈extent / spacing⌉`, so the cells tile the box exactly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureGrid {
    pub spacing: f64,
    pub rule: CellRule,
    /// Skip node pairs closer than two cell diagonals instead of failing.
    pub exclusion: bool,
}

impl Default for QuadratureGrid {
    fn default() -> Self {
        QuadratureGrid { spacing: 0.05, rule: CellRule::Midpoint, exclusion: true }
    }
}

impl QuadratureGrid {
    pub fn new(spacing: f64, rule: CellRule) -> Result<Self> {
        let g = QuadratureGrid { spacing, rule, exclusion: true };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::validation(format!("grid spacing must be positive (got {})", self.spacing)));
        }
        if let CellRule::Gauss(n) = self.rule {
            if !(1..=16).contains(&n) {
                return Err(Error::validation(format!("Gauss cell rule order must be in 1..=16 (got {n})")));
            }
        }
        Ok(())
    }

    pub fn coarsened(&self, factor: f64) -> QuadratureGrid {
        QuadratureGrid { spacing: self.spacing * factor, ..*self }
    }

    /// Cells per axis and cell size for a box extent.
    pub fn cells(&self, extent: Vec3) -> ([usize; 3], Vec3) {
        let mut n = [1usize; 3];
        let mut size = Vec3::ZERO;
        for (k, nk) in n.iter_mut().enumerate() {
            let e = extent.component(k);
            *nk = ((e / self.spacing).ceil() as usize).max(1);
            size = size.with_component(k, e / *nk as f64);
        }
        (n, size)
    }
}

/// Quadrature nodes of one tube: positions and weight-scaled field values.
/// Nodes where the field vanishes are dropped.
#[derive(Clone, Debug, Default)]
pub(crate) struct Nodes {
    pub pos: Vec<Vec3>,
    pub val: Vec<Vec3>,
    pub diagonal: f64,
}

impl Nodes {
    pub fn for_tube(tube: &TubeSpec, grid: &QuadratureGrid) -> Nodes {
        let b = tube.support_box();
        let (n, size) = grid.cells(b.extent());
        let (pts, wts): (Vec<f64>, Vec<f64>) = match grid.rule {
            CellRule::Midpoint => (vec![0.5], vec![1.0]),
            CellRule::Gauss(m) => {
                let r = gauss_legendre(m);
                (r.nodes.clone(), r.weights.clone())
            }
        };
        let vol = size.x * size.y * size.z;
        let mut out = Nodes { diagonal: size.norm(), ..Nodes::default() };
        for i in 0..n[0] {
            for j in 0..n[1] {
                for k in 0..n[2] {
                    for (a, wa) in pts.iter().zip(&wts) {
                        for (b2, wb) in pts.iter().zip(&wts) {
                            for (c, wc) in pts.iter().zip(&wts) {
                                let p = b.min_corner
                                    + Vec3::new(
                                        (i as f64 + a) * size.x,
                                        (j as f64 + b2) * size.y,
                                        (k as f64 + c) * size.z,
                                    );
                                let v = tube.eval(p);
                                if v != Vec3::ZERO {
                                    out.pos.push(p);
                                    out.val.push(v * (vol * wa * wb * wc));
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.pos.len()
    }
}

fn exclusion_sq(grid: &QuadratureGrid, a: &Nodes, b: &Nodes) -> f64 {
    if grid.exclusion {
        let r = 2.0 * a.diagonal.max(b.diagonal);
        r * r
    } else {
        0.0
    }
}

/// `Σ_a Σ_b (V_a × W_b)·(x_a − y_b) / (4π|x_a − y_b|³)`.
fn kernel_sum(a: &Nodes, b: &Nodes, excl_sq: f64) -> Result<f64> {
    if a.len() == 0 || b.len() == 0 {
        return Ok(0.0);
    }
    par::try_sum(a.len(), |i| {
        let x = a.pos[i];
        let mut acc = Vec3::ZERO;
        for (y, w) in b.pos.iter().zip(&b.val) {
            let d = x - *y;
            let r2 = d.norm_sq();
            if r2 < excl_sq {
                continue;
            }
            if r2 < SINGULAR_R2 {
                return Err(Error::Singular { distance: r2.sqrt() });
            }
            acc += w.cross(d) * (1.0 / (r2 * r2.sqrt()));
        }
        Ok(a.val[i].dot(acc) * INV_4PI)
    })
}

fn tube_key(t: &TubeSpec) -> [u64; 10] {
    let c = t.center();
    let n = t.axis();
    [
        c.x.to_bits(),
        c.y.to_bits(),
        c.z.to_bits(),
        n.x.to_bits(),
        n.y.to_bits(),
        n.z.to_bits(),
        t.major_radius().to_bits(),
        t.minor_radius().to_bits(),
        t.amplitude().to_bits(),
        t.sign() as u64,
    ]
}

/// Sum of per-item values in a canonical (value-sorted) order, so that the
/// result does not depend on how the items were enumerated.
fn canonical_sum(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    par::pairwise_sum(&values)
}

/// Helicity quadrature at one resolution plus a coarser one for an error
/// estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HelicityEstimate {
    pub value: f64,
    pub spacing: f64,
    /// Same quadrature at twice the spacing.
    pub coarse: f64,
    /// Richardson extrapolation assuming second-order convergence.
    pub extrapolated: f64,
    pub error_estimate: f64,
}

impl HelicityEstimate {
    fn from_pair(value: f64, coarse: f64, spacing: f64) -> Self {
        let delta = (value - coarse) / 3.0;
        HelicityEstimate { value, spacing, coarse, extrapolated: value + delta, error_estimate: delta.abs() }
    }
}

fn hopf_kernel_at(x: &FieldSpec, y: &FieldSpec, grid: &QuadratureGrid) -> Result<f64> {
    grid.validate()?;
    let xs: Vec<Nodes> = x.tubes.iter().map(|t| Nodes::for_tube(t, grid)).collect();
    let ys: Vec<Nodes> = y.tubes.iter().map(|t| Nodes::for_tube(t, grid)).collect();
    let mut parts = Vec::with_capacity(xs.len() * ys.len());
    for (tx, nx) in x.tubes.iter().zip(&xs) {
        for (ty, ny) in y.tubes.iter().zip(&ys) {
            let excl = exclusion_sq(grid, nx, ny);
            // Enumerate the pair in a fixed orientation so H(X,Y) and H(Y,X)
            // perform identical floating-point operations.
            let v = if tube_key(tx) <= tube_key(ty) { kernel_sum(nx, ny, excl)? } else { kernel_sum(ny, nx, excl)? };
            parts.push(v);
        }
    }
    Ok(canonical_sum(parts))
}

/// `H(X,Y) = ∫∫ L(X(x), Y(y)) dx dy` by grid quadrature over each pair of
/// tube supports, with a coarse-grid error estimate.
pub fn hopf_kernel(x: &FieldSpec, y: &FieldSpec, grid: &QuadratureGrid) -> Result<HelicityEstimate> {
    let fine = hopf_kernel_at(x, y, grid)?;
    let coarse = hopf_kernel_at(x, y, &grid.coarsened(2.0))?;
    Ok(HelicityEstimate::from_pair(fine, coarse, grid.spacing))
}

/// Biot–Savart potential `A(p) = (1/4π)∫ X(y) × (p − y)/|p − y|³ dy`.
pub fn vector_potential(x: &FieldSpec, p: Vec3, grid: &QuadratureGrid) -> Result<Vec3> {
    grid.validate()?;
    let mut parts = Vec::with_capacity(x.tubes.len());
    for t in &x.tubes {
        parts.push(potential_from_nodes(&Nodes::for_tube(t, grid), p, grid)?);
    }
    Ok(parts.into_iter().fold(Vec3::ZERO, |a, b| a + b))
}

fn potential_from_nodes(nodes: &Nodes, p: Vec3, grid: &QuadratureGrid) -> Result<Vec3> {
    let excl = if grid.exclusion { (2.0 * nodes.diagonal).powi(2) } else { 0.0 };
    let mut acc = Vec3::ZERO;
    for (y, v) in nodes.pos.iter().zip(&nodes.val) {
        let d = p - *y;
        let r2 = d.norm_sq();
        if r2 < excl {
            continue;
        }
        if r2 < SINGULAR_R2 {
            return Err(Error::Singular { distance: r2.sqrt() });
        }
        acc += v.cross(d) * (1.0 / (r2 * r2.sqrt()));
    }
    Ok(acc * INV_4PI)
}

/// Which primitive of `i_Xμ` is paired with `Y`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialGauge {
    /// Grid quadrature of the Biot–Savart integral.
    BiotSavart,
    /// Closed-form potential parallel to each tube axis.
    #[default]
    Axial,
}

/// `H = ∫ ⟨A_X(y), Y(y)⟩ dy` over the tube supports of `Y`.
pub fn hopf_potential(x: &FieldSpec, y: &FieldSpec, grid: &QuadratureGrid, gauge: PotentialGauge) -> Result<f64> {
    grid.validate()?;
    let xs: Vec<Nodes> = match gauge {
        PotentialGauge::BiotSavart => x.tubes.iter().map(|t| Nodes::for_tube(t, grid)).collect(),
        PotentialGauge::Axial => Vec::new(),
    };
    let mut parts = Vec::new();
    for ty in &y.tubes {
        let ny = Nodes::for_tube(ty, grid);
        let v = par::try_sum(ny.len(), |j| -> Result<f64> {
            let p = ny.pos[j];
            let a = match gauge {
                PotentialGauge::Axial => x.axial_potential(p),
                PotentialGauge::BiotSavart => {
                    let mut a = Vec3::ZERO;
                    for nx in &xs {
                        a += potential_from_nodes(nx, p, grid)?;
                    }
                    a
                }
            };
            Ok(a.dot(ny.val[j]))
        })?;
        parts.push(v);
    }
    Ok(canonical_sum(parts))
}

/// Kernel and potential helicities of one field pair with their
/// consistency checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HelicityReport {
    pub kernel: HelicityEstimate,
    /// `H(Y, X)` on the fine grid.
    pub kernel_swapped: f64,
    pub potential: f64,
    pub gauge: PotentialGauge,
    pub potential_spacing: f64,
    pub thin_tube_prediction: f64,
    /// `|Ĥ_kernel − H_potential| / reference_scale`, with `Ĥ_kernel` extrapolated.
    pub relative_difference: f64,
    /// `max(|H_potential|, 0.01·Σ|Φ_i||Φ_j|)`.
    pub reference_scale: f64,
    /// Relative to `max(|H|, 0.01·Σ|Φ_i||Φ_j|)`, like the bilinearity error.
    pub symmetry_error: f64,
    /// Largest relative defect of additivity over tubes and of homogeneity.
    pub bilinearity_error: f64,
    pub relative_tolerance: f64,
    pub pass: bool,
}

/// Relative tolerances of the symmetry and bilinearity checks.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;
pub const BILINEARITY_TOLERANCE: f64 = 1e-10;

pub fn helicity_report(
    x: &FieldSpec,
    y: &FieldSpec,
    grid: &QuadratureGrid,
    potential_grid: &QuadratureGrid,
    gauge: PotentialGauge,
    relative_tolerance: f64,
) -> Result<HelicityReport> {
    let kernel = hopf_kernel(x, y, grid)?;
    let kernel_swapped = hopf_kernel_at(y, x, grid)?;
    let potential = hopf_potential(x, y, potential_grid, gauge)?;
    let h = kernel.value;
    let flux_scale: f64 = x.tubes.iter().flat_map(|a| y.tubes.iter().map(move |b| (a.flux() * b.flux()).abs())).sum();
    let floor = (0.01 * flux_scale).max(f64::MIN_POSITIVE);
    let rel = |d: f64| d.abs() / h.abs().max(floor);
    let symmetry_error = rel(h - kernel_swapped);

    let mut defects = Vec::new();
    if y.tubes.len() > 1 {
        let parts = y.tubes.iter().map(|t| hopf_kernel_at(x, &FieldSpec::single(t.clone()), grid)).collect::<Result<Vec<_>>>()?;
        defects.push(rel(canonical_sum(parts) - h));
    }
    if x.tubes.len() > 1 {
        let parts = x.tubes.iter().map(|t| hopf_kernel_at(&FieldSpec::single(t.clone()), y, grid)).collect::<Result<Vec<_>>>()?;
        defects.push(rel(canonical_sum(parts) - h));
    }
    defects.push(rel(hopf_kernel_at(x, &y.scaled(2.5)?, grid)? - 2.5 * h));
    defects.push(rel(hopf_kernel_at(&x.scaled(-1.5)?, y, grid)? + 1.5 * h));
    let bilinearity_error = defects.into_iter().fold(0.0, f64::max);

    let reference_scale = potential.abs().max(floor);
    let relative_difference = (kernel.extrapolated - potential).abs() / reference_scale;
    let pass = relative_difference <= relative_tolerance
        && symmetry_error <= SYMMETRY_TOLERANCE
        && bilinearity_error <= BILINEARITY_TOLERANCE;
    Ok(HelicityReport {
        kernel,
        kernel_swapped,
        potential,
        gauge,
        potential_spacing: potential_grid.spacing,
        thin_tube_prediction: super::thin_tube_prediction(x, y)?,
        relative_difference,
        reference_scale,
        symmetry_error,
        bilinearity_error,
        relative_tolerance,
        pass,
    })
}
