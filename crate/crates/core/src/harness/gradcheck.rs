//! Analytic gradient versus central differences on random synthetic instances.

use ndarray::ArrayView2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::toy::{surrogate_utterance, synthetic_utterance};
use crate::criteria::{finite_diff_oracle_rows, loss_gradient, total_loss, BatchContext, BatchItem, LossWeights};
use crate::error::{Error, Result};
use crate::masking::select_word_mask;

/// Coordinates with an analytic magnitude at or below this are not compared.
pub const GRADCHECK_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheckSummary {
    pub trials: usize,
    pub coordinates: usize,
    pub max_rel_err: f64,
    /// Entries outside the masked span with a nonzero analytic gradient.
    pub nonzero_outside_span: usize,
}

/// Runs `trials` random instances with all three loss terms active.
pub fn gradient_check(trials: usize, h: f64, seed: u64) -> Result<GradCheckSummary> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("step {h} must be positive")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = GradCheckSummary { trials, coordinates: 0, max_rel_err: 0.0, nonzero_outside_span: 0 };
    for _ in 0..trials {
        let u = synthetic_utterance(rng.random_range(2..=4), rng.random_range(4..=16), rng.random())?;
        let gt = u.mel.to_f64();
        let mut pred = gt.clone();
        for v in pred.iter_mut() {
            let d: f64 = rng.random_range(0.1..1.5);
            *v += if rng.random_bool(0.5) { d } else { -d };
        }
        let spec = select_word_mask(&u.table, rng.random_range(0.2..0.9), rng.random())?;
        let negative = surrogate_utterance(&gt, rng.random());
        let batch = BatchContext::new(vec![BatchItem::from_standin(negative.view(), spec.span())?]);
        let weights = LossWeights {
            alpha: rng.random_range(0.5..2.0),
            beta: rng.random_range(0.5..2.0),
            gamma: rng.random_range(0.5..2.0),
        };
        let tau = rng.random_range(0.1..1.0);

        let analytic = loss_gradient(pred.view(), gt.view(), &u.table, &spec, &batch, &weights, tau)?;
        let f = |p: ArrayView2<'_, f64>| {
            total_loss(p, gt.view(), &u.table, &spec, &batch, &weights, tau).map_or(f64::NAN, |l| l.total)
        };
        let numeric = finite_diff_oracle_rows(f, pred.view(), h, spec.span());
        for ((r, c), &a) in analytic.indexed_iter() {
            if !spec.span().contains(&r) {
                out.nonzero_outside_span += usize::from(a != 0.0);
            } else if a.abs() > GRADCHECK_FLOOR {
                let n = numeric[(r, c)];
                let err = (a - n).abs() / a.abs().max(n.abs());
                out.max_rel_err = if err.is_nan() { f64::INFINITY } else { out.max_rel_err.max(err) };
                out.coordinates += 1;
            }
        }
    }
    Ok(out)
}
