//! Observed FMM error against the direct sum: scalar metrics, per-target
//! records, spatial error maps and bound checks.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use crate::error::{FmmError, Result};
use crate::io::{fmt_opt, write_atomic};
use crate::model::{Domain, Velocity};
use crate::quadtree::grid_index;

/// Header of the error-map CSV.
pub const ERROR_MAP_CSV_HEADER: &str = "bin_ix,bin_iy,count,max_err,mean_err";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetError {
    /// Index into the evaluated particle set.
    pub index: usize,
    pub x: f64,
    pub y: f64,
    /// Euclidean norm of the velocity difference.
    pub abs_error: f64,
    /// `|f_fmm - f_direct|`, i.e. `2 pi` times `abs_error`.
    pub f_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub max_abs: f64,
    /// `max_abs / max |v_direct|`; `None` when the direct field vanishes.
    pub max_rel: Option<f64>,
    pub rms_abs: f64,
    pub rms_rel: Option<f64>,
    /// Largest direct speed over the targets, the normalizer of the
    /// relative metrics.
    pub max_direct: f64,
    pub per_target: Vec<TargetError>,
    pub bound_budget: Option<Vec<f64>>,
    pub worst_index: usize,
}

/// Compares FMM and direct velocities target by target.
///
/// Relative metrics divide by the single global `max |v_direct|` rather
/// than by each target's own speed, which can vanish at stagnation points.
pub fn compare(
    fmm: &[Velocity],
    direct: &[Velocity],
    positions: &[(f64, f64)],
    bound_budget: Option<&[f64]>,
) -> Result<ErrorReport> {
    let n = fmm.len();
    if n == 0 {
        return Err(FmmError::invalid("nothing to compare"));
    }
    if direct.len() != n || positions.len() != n {
        return Err(FmmError::invalid(format!(
            "length mismatch: fmm {n}, direct {}, positions {}",
            direct.len(),
            positions.len()
        )));
    }
    if let Some(b) = bound_budget {
        if b.len() != n {
            return Err(FmmError::invalid(format!("budget length {} != {n}", b.len())));
        }
    }

    let per_target: Vec<TargetError> = (0..n)
        .map(|i| {
            let abs_error = (fmm[i] - direct[i]).norm();
            TargetError {
                index: i,
                x: positions[i].0,
                y: positions[i].1,
                abs_error,
                f_error: 2.0 * PI * abs_error,
            }
        })
        .collect();

    let mut max_abs = 0.0;
    let mut worst_index = 0;
    let mut sum_sq = 0.0;
    for t in &per_target {
        if t.abs_error > max_abs {
            max_abs = t.abs_error;
            worst_index = t.index;
        }
        sum_sq += t.abs_error * t.abs_error;
    }
    let rms_abs = (sum_sq / n as f64).sqrt();
    let max_direct = direct.iter().map(Velocity::norm).fold(0.0, f64::max);
    let (max_rel, rms_rel) = if max_direct > 0.0 {
        (Some(max_abs / max_direct), Some(rms_abs / max_direct))
    } else {
        (None, None)
    };

    Ok(ErrorReport {
        max_abs,
        max_rel,
        rms_abs,
        rms_rel,
        max_direct,
        per_target,
        bound_budget: bound_budget.map(<[f64]>::to_vec),
        worst_index,
    })
}

impl ErrorReport {
    /// Renumbers targets when the report covers a subset of particles.
    pub fn with_indices(mut self, indices: &[usize]) -> Self {
        assert_eq!(indices.len(), self.per_target.len());
        for (t, &i) in self.per_target.iter_mut().zip(indices) {
            t.index = i;
        }
        self.worst_index = indices[self.worst_index];
        self
    }

    /// Writes the scalar metrics as `metric,value` rows.
    pub fn write_summary_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, |w| {
            writeln!(w, "metric,value")?;
            writeln!(w, "targets,{}", self.per_target.len())?;
            writeln!(w, "max_abs,{:e}", self.max_abs)?;
            writeln!(w, "max_rel,{}", fmt_opt(self.max_rel))?;
            writeln!(w, "rms_abs,{:e}", self.rms_abs)?;
            writeln!(w, "rms_rel,{}", fmt_opt(self.rms_rel))?;
            writeln!(w, "max_direct,{:e}", self.max_direct)?;
            writeln!(w, "worst_index,{}", self.worst_index)?;
            Ok(())
        })
    }
}

/// Slack added to truncation budgets so that round-off differences between
/// the FMM's near-field sum order and the direct sum's order never count as
/// bound violations: `64 eps n max|f_direct|`.
pub fn roundoff_floor(n_sources: usize, max_direct_speed: f64) -> f64 {
    64.0 * f64::EPSILON * n_sources as f64 * 2.0 * PI * max_direct_speed
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundViolation {
    pub index: usize,
    pub observed: f64,
    pub budget: f64,
}

/// Targets whose observed `f` error exceeds their budget. `budgets` is
/// aligned with `report.per_target`.
pub fn bound_check(report: &ErrorReport, budgets: &[f64]) -> Vec<BoundViolation> {
    report
        .per_target
        .iter()
        .zip(budgets)
        .filter(|(t, b)| t.f_error > **b)
        .map(|(t, b)| BoundViolation {
            index: t.index,
            observed: t.f_error,
            budget: *b,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapBin {
    pub count: usize,
    pub max_err: f64,
    pub mean_err: f64,
}

/// Per-bin error statistics on a `g x g` grid. Empty bins are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorMap {
    pub grid_dim: usize,
    /// Row-major (`iy` outer).
    pub bins: Vec<Option<MapBin>>,
}

impl ErrorMap {
    pub fn get(&self, ix: usize, iy: usize) -> Option<&MapBin> {
        self.bins[iy * self.grid_dim + ix].as_ref()
    }

    pub fn max(&self) -> f64 {
        self.bins.iter().flatten().map(|b| b.max_err).fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{ERROR_MAP_CSV_HEADER}")?;
        let g = self.grid_dim;
        for iy in 0..g {
            for ix in 0..g {
                match &self.bins[iy * g + ix] {
                    Some(b) => writeln!(w, "{ix},{iy},{},{:e},{:e}", b.count, b.max_err, b.mean_err)?,
                    None => writeln!(w, "{ix},{iy},0,NA,NA")?,
                }
            }
        }
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        write_atomic(path, |w| self.write_csv(w))
    }
}

/// Bins every target of `report` on a `g x g` grid over the domain. For
/// `g = 2^k` the bins coincide with the level-`k` quadtree cells.
pub fn spatial_map(report: &ErrorReport, domain: &Domain, g: usize) -> Result<ErrorMap> {
    if g == 0 {
        return Err(FmmError::invalid("map grid must be >= 1"));
    }
    let mut acc: Vec<(usize, f64, f64)> = vec![(0, 0.0, 0.0); g * g];
    for t in &report.per_target {
        let (ix, iy) = grid_index(t.x, t.y, g, domain)?;
        let slot = &mut acc[iy * g + ix];
        slot.0 += 1;
        slot.1 = slot.1.max(t.abs_error);
        slot.2 += t.abs_error;
    }
    let bins = acc
        .into_iter()
        .map(|(count, max_err, sum)| {
            (count > 0).then(|| MapBin {
                count,
                max_err,
                mean_err: sum / count as f64,
            })
        })
        .collect();
    Ok(ErrorMap { grid_dim: g, bins })
}
