//! Hierarchical local acoustic smoothness: boundary deltas at frame, phoneme
//! and word granularity on both sides of the masked span.

use std::ops::Range;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::alignment::AlignmentTable;
use crate::error::{Error, Result};
use crate::masking::MaskSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Level {
    Frame,
    Phoneme,
    Word,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Frame, Level::Phoneme, Level::Word];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];

    fn name(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

/// Per-bin `|θ(inside) − θ(outside)|` at one edge of the span.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryDelta {
    pub side: Side,
    pub level: Level,
    pub delta: Array1<f64>,
}

/// The two units meeting at one edge of the span, as frame ranges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct BoundaryUnits {
    pub inside: Range<usize>,
    pub outside: Range<usize>,
}

/// Locates the innermost fully-masked unit and its fully-unmasked neighbour.
pub(crate) fn boundary_units(
    table: &AlignmentTable,
    span: Range<usize>,
    level: Level,
    side: Side,
) -> Result<BoundaryUnits> {
    let n = table.n_frames();
    if span.start >= span.end || span.end > n {
        return Err(Error::EmptyRegion(span));
    }
    if level == Level::Frame {
        return match side {
            Side::Left if span.start > 0 => Ok(BoundaryUnits {
                inside: span.start..span.start + 1,
                outside: span.start - 1..span.start,
            }),
            Side::Right if span.end < n => Ok(BoundaryUnits {
                inside: span.end - 1..span.end,
                outside: span.end..span.end + 1,
            }),
            _ => Err(Error::MissingNeighbor(side.name())),
        };
    }
    let units = match level {
        Level::Phoneme => table.phoneme_ranges(),
        _ => table.word_ranges(),
    };
    let masked = |r: &&Range<usize>| r.start >= span.start && r.end <= span.end;
    let (inside, outside) = match side {
        Side::Left => (
            units.iter().find(masked),
            units.iter().rev().find(|r| r.end <= span.start),
        ),
        Side::Right => (
            units.iter().rev().find(masked),
            units.iter().find(|r| r.start >= span.end),
        ),
    };
    let inside = inside.ok_or_else(|| Error::EmptyRegion(span.clone()))?;
    let outside = outside.ok_or(Error::MissingNeighbor(side.name()))?;
    Ok(BoundaryUnits {
        inside: inside.clone(),
        outside: outside.clone(),
    })
}

/// θ: per-bin mean over the unit's frames, accumulated relative to the first
/// frame so that constant units reproduce their value exactly.
pub(crate) fn unit_mean(mel: ArrayView2<'_, f64>, frames: Range<usize>) -> Array1<f64> {
    let n = frames.len() as f64;
    let rows = mel.slice(s![frames, ..]);
    let first = rows.row(0).to_owned();
    let offsets = (&rows - &first).sum_axis(Axis(0)) / n;
    first + offsets
}

fn delta_of(mel: ArrayView2<'_, f64>, units: &BoundaryUnits) -> Array1<f64> {
    let inside = unit_mean(mel, units.inside.clone());
    let outside = unit_mean(mel, units.outside.clone());
    (&inside - &outside).mapv(f64::abs)
}

fn check_shapes(
    pred: ArrayView2<'_, f64>,
    gt: ArrayView2<'_, f64>,
    table: &AlignmentTable,
) -> Result<()> {
    if pred.dim() != gt.dim() {
        return Err(Error::Shape(format!(
            "prediction {:?} vs ground truth {:?}",
            pred.dim(),
            gt.dim()
        )));
    }
    if pred.nrows() != table.n_frames() {
        return Err(Error::Shape(format!(
            "{} frames but alignment covers {}",
            pred.nrows(),
            table.n_frames()
        )));
    }
    Ok(())
}

pub fn boundary_delta(
    mel: ArrayView2<'_, f64>,
    table: &AlignmentTable,
    spec: &MaskSpec,
    level: Level,
    side: Side,
) -> Result<BoundaryDelta> {
    if mel.nrows() != table.n_frames() {
        return Err(Error::Shape(format!(
            "{} frames but alignment covers {}",
            mel.nrows(),
            table.n_frames()
        )));
    }
    let units = boundary_units(table, spec.span(), level, side)?;
    Ok(BoundaryDelta {
        side,
        level,
        delta: delta_of(mel, &units),
    })
}

/// `MSE(Δ_pred, Δ_gt)` for one side, averaged over bins. A side with no
/// neighbouring unit contributes 0.
pub fn hlac_side_loss(
    pred: ArrayView2<'_, f64>,
    gt: ArrayView2<'_, f64>,
    table: &AlignmentTable,
    spec: &MaskSpec,
    level: Level,
    side: Side,
) -> Result<f64> {
    check_shapes(pred, gt, table)?;
    let units = match boundary_units(table, spec.span(), level, side) {
        Ok(u) => u,
        Err(Error::MissingNeighbor(_)) => return Ok(0.0),
        Err(e) => return Err(e),
    };
    let dp = delta_of(pred, &units);
    let dg = delta_of(gt, &units);
    Ok(dp.iter().zip(&dg).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / dp.len() as f64)
}

pub fn hlac_level_loss(
    pred: ArrayView2<'_, f64>,
    gt: ArrayView2<'_, f64>,
    table: &AlignmentTable,
    spec: &MaskSpec,
    level: Level,
) -> Result<f64> {
    Ok(hlac_side_loss(pred, gt, table, spec, level, Side::Left)?
        + hlac_side_loss(pred, gt, table, spec, level, Side::Right)?)
}

/// The six side/level components of the HLAC loss.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct HlacBreakdown {
    pub frame_left: f64,
    pub frame_right: f64,
    pub phoneme_left: f64,
    pub phoneme_right: f64,
    pub word_left: f64,
    pub word_right: f64,
}

impl HlacBreakdown {
    pub fn total(&self) -> f64 {
        self.frame_left
            + self.frame_right
            + self.phoneme_left
            + self.phoneme_right
            + self.word_left
            + self.word_right
    }

    fn slot(&mut self, level: Level, side: Side) -> &mut f64 {
        match (level, side) {
            (Level::Frame, Side::Left) => &mut self.frame_left,
            (Level::Frame, Side::Right) => &mut self.frame_right,
            (Level::Phoneme, Side::Left) => &mut self.phoneme_left,
            (Level::Phoneme, Side::Right) => &mut self.phoneme_right,
            (Level::Word, Side::Left) => &mut self.word_left,
            (Level::Word, Side::Right) => &mut self.word_right,
        }
    }
}

/// Frame + phoneme + word smoothness loss.
pub fn hlac_loss(
    pred: ArrayView2<'_, f64>,
    gt: ArrayView2<'_, f64>,
    table: &AlignmentTable,
    spec: &MaskSpec,
) -> Result<(f64, HlacBreakdown)> {
    let mut parts = HlacBreakdown::default();
    for level in Level::ALL {
        for side in Side::BOTH {
            *parts.slot(level, side) = hlac_side_loss(pred, gt, table, spec, level, side)?;
        }
    }
    Ok((parts.total(), parts))
}

/// Adds `scale · ∂L_HLAC/∂pred` into `grad`. Only frames of the in-span
/// units receive gradient; the neighbouring context is held fixed.
pub(crate) fn accumulate_hlac_gradient(
    pred: ArrayView2<'_, f64>,
    gt: ArrayView2<'_, f64>,
    table: &AlignmentTable,
    spec: &MaskSpec,
    scale: f64,
    grad: &mut Array2<f64>,
) -> Result<()> {
    check_shapes(pred, gt, table)?;
    let bins = pred.ncols() as f64;
    for level in Level::ALL {
        for side in Side::BOTH {
            let units = match boundary_units(table, spec.span(), level, side) {
                Ok(u) => u,
                Err(Error::MissingNeighbor(_)) => continue,
                Err(e) => return Err(e),
            };
            let inside = unit_mean(pred, units.inside.clone());
            let outside = unit_mean(pred, units.outside.clone());
            let dg = delta_of(gt, &units);
            let per_frame = scale / units.inside.len() as f64;
            let d_inside: Array1<f64> = inside
                .iter()
                .zip(&outside)
                .zip(&dg)
                .map(|((a, c), g)| {
                    let diff = a - c;
                    let sign = if diff > 0.0 { 1.0 } else if diff < 0.0 { -1.0 } else { 0.0 };
                    2.0 / bins * (diff.abs() - g) * sign * per_frame
                })
                .collect();
            for mut row in grad.slice_mut(s![units.inside.clone(), ..]).rows_mut() {
                row += &d_inside;
            }
        }
    }
    Ok(())
}
