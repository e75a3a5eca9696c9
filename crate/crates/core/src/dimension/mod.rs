//! Hausdorff content estimates, the rectangle content exponent `g_τ`, the
//! closed-form dimension predictions and the natural-cover critical exponent.

mod content;
mod critical;
mod formulas;

use std::fmt::Write as _;

use crate::error::{Error, Flag, Result};
use crate::geometry::{Aabb, OpenSet};
use crate::measure::SelfSimilarMeasure;

pub use content::{
    hausdorff_content_upper, hausdorff_content_upper_with_budget, ContentEstimate, DEFAULT_CONTENT_BUDGET,
};
pub use critical::{natural_cover_critical_exponent, CoverItem, CoverShape, CriticalOptions, DimensionReport, GridRow};
pub use formulas::{essential_rect_content, g_tau, predict_rect_dim, predict_shrunk_ball_dim, s0_solver};

/// Cap on the number of cylinders examined per depth.
const CYLINDER_BUDGET: usize = 1 << 20;

#[derive(Clone, Debug, PartialEq)]
pub struct EquivalenceRow {
    pub depth: u32,
    /// Cylinders meeting the region.
    pub pieces: usize,
    /// Upper estimate of `H^s_∞(region ∩ K_depth)`.
    pub content: f64,
    /// `content / |region|^s`
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EquivalenceReport {
    pub s: f64,
    pub region_diameter: f64,
    /// `s > dim μ`, when the dimension is available.
    pub above_dimension: Option<bool>,
    pub rows: Vec<EquivalenceRow>,
    /// Smallest and largest ratio over the depths.
    pub band: (f64, f64),
    pub flags: Vec<Flag>,
}

impl EquivalenceReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("depth,pieces,content,ratio\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{}", r.depth, r.pieces, r.content, r.ratio);
        }
        s
    }
}

/// Content of the region intersected with the depth-`m` cylinder cover of the
/// attractor, for the five depths ending at `depth`. Each value is the better
/// of the cylinder cover itself and the dyadic content estimate of the pieces.
pub fn content_equivalence_check(
    mu: &SelfSimilarMeasure,
    region: &Aabb,
    s: f64,
    depth: u32,
) -> Result<EquivalenceReport> {
    crate::geometry::check_dim(mu.dim(), region.dim())?;
    let diam = region.diameter();
    if !(diam > 0.0) || !(s >= 0.0) {
        return Err(Error::invalid("need a region of positive diameter and s >= 0"));
    }
    let mut flags = Vec::new();
    let above_dimension = mu.dimension().ok().map(|d| s > d);
    let c_min = mu.maps().iter().map(|m| m.ratio).fold(f64::INFINITY, f64::min);
    let mut rows = Vec::new();
    for m in depth.saturating_sub(4)..=depth {
        let cyl = match mu.cylinders(m, CYLINDER_BUDGET) {
            Ok(c) => c,
            Err(e) => {
                flags.push(Flag::BudgetExceeded(e.to_string()));
                break;
            }
        };
        let pieces: Vec<Aabb> = cyl.iter().filter_map(|(b, _)| b.intersect(region)).collect();
        let direct: f64 = pieces.iter().map(|p| p.diameter().powf(s)).sum();
        let content = match OpenSet::new(pieces.clone()) {
            Ok(set) if !set.boxes().is_empty() => {
                let refine = ((m as f64) * (1.0 / c_min).log2()).ceil() as u32 + 3;
                let est = hausdorff_content_upper(&set, s, None, refine)?;
                flags.extend(est.flags);
                est.value_upper.min(direct)
            }
            _ => direct,
        };
        rows.push(EquivalenceRow { depth: m, pieces: pieces.len(), content, ratio: content / diam.powf(s) });
    }
    let band = rows
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r.ratio), hi.max(r.ratio)));
    Ok(EquivalenceReport { s, region_diameter: diam, above_dimension, rows, band, flags })
}
