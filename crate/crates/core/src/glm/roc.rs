use serde::Serialize;

use crate::error::GlmError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocCurve {
    pub auc: f64,
    /// `(fpr, tpr)` from (0, 0) to (1, 1), one vertex per distinct score.
    pub points: Vec<(f64, f64)>,
}

impl RocCurve {
    /// TPR at false-positive rate `fpr`, interpolating linearly between
    /// vertices. On a vertical segment the highest TPR is returned.
    pub fn tpr_at_fpr(&self, fpr: f64) -> f64 {
        let fpr = fpr.clamp(0.0, 1.0);
        let mut best: f64 = 0.0;
        for w in self.points.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            if fpr < x0 || fpr > x1 {
                continue;
            }
            let y = if x1 > x0 {
                y0 + (y1 - y0) * (fpr - x0) / (x1 - x0)
            } else {
                y1.max(y0)
            };
            best = best.max(y);
        }
        best
    }
}

/// ROC curve and AUC of `scores` against binary `labels`. The AUC is the
/// Mann-Whitney statistic with mid-ranks, so tied scores count one half.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<RocCurve, GlmError> {
    if scores.len() != labels.len() {
        return Err(GlmError::InvalidDesign(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let n_pos = labels.iter().filter(|&&b| b).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(GlmError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    // pairs where the positive outranks the negative, ties count half
    let mut concordant = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (mut tie_pos, mut tie_neg) = (0usize, 0usize);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tie_pos += 1;
            } else {
                tie_neg += 1;
            }
            i += 1;
        }
        // positives in this tie block beat negatives still below them
        concordant += tie_pos as f64 * (n_neg - fp - tie_neg) as f64 + 0.5 * (tie_pos * tie_neg) as f64;
        tp += tie_pos;
        fp += tie_neg;
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
    }
    Ok(RocCurve {
        auc: concordant / (n_pos as f64 * n_neg as f64),
        points,
    })
}
