//! Objective evaluation, the toy optimisation loop, and reports.

mod gradcheck;
mod metrics;
mod report;
mod toy;

use ndarray::ArrayView2;

use crate::alignment::AlignmentTable;
use crate::criteria::{total_loss, BatchContext, LossWeights};
use crate::error::Result;
use crate::masking::MaskSpec;

pub use gradcheck::{gradient_check, GradCheckSummary, GRADCHECK_FLOOR};
pub use metrics::{boundary_discontinuity, mcd, mcd_frames, DEFAULT_N_CEPS, MCD_SCALE};
pub use report::{emit_report, make_report, parse_report, Aggregate, ReportDoc, RunConfig, UtteranceRow};
pub use toy::{
    span_boundaries, surrogate_utterance, synthetic_utterance, toy_train, SyntheticUtterance,
    ToyRunResult, DEFAULT_LR, DEFAULT_STEPS,
};

/// One utterance to score.
#[derive(Debug, Clone, Copy)]
pub struct EvalItem<'a> {
    pub id: &'a str,
    pub pred: ArrayView2<'a, f64>,
    pub gt: ArrayView2<'a, f64>,
    pub table: &'a AlignmentTable,
    pub spec: &'a MaskSpec,
}

/// MCD and boundary discontinuity of `pred`, plus its loss breakdown when a
/// batch is supplied.
pub fn evaluate_utterance(
    item: &EvalItem<'_>,
    batch: Option<(&BatchContext, &LossWeights, f64)>,
) -> Result<UtteranceRow> {
    let boundaries = span_boundaries(item.spec, item.pred.nrows());
    let boundary = if boundaries.is_empty() {
        0.0
    } else {
        boundary_discontinuity(item.pred, &boundaries)?
    };
    let loss = batch
        .map(|(b, w, tau)| total_loss(item.pred, item.gt, item.table, item.spec, b, w, tau))
        .transpose()?;
    Ok(UtteranceRow {
        id: item.id.to_string(),
        mcd_db: mcd_frames(item.pred, item.gt, DEFAULT_N_CEPS)?,
        boundary_discontinuity: boundary,
        loss,
    })
}

/// Scores items in parallel; rows come back in input order.
pub fn evaluate_corpus(items: &[EvalItem<'_>]) -> Result<Vec<UtteranceRow>> {
    use rayon::prelude::*;
    items.par_iter().map(|item| evaluate_utterance(item, None)).collect()
}
