//! Logistic model of poor calls on problem-group indicators and the
//! counterfactual "fix a group" predictions built on it.
//!
//! Reductions are relative to the model's baseline poor call rate. Fixing a
//! group sets its indicator to 0 on every record and recomputes the
//! interaction columns; the model is not refit.

mod design;
mod logistic;
mod roc;

pub use design::{build_design, Design, DesignSpec};
pub use logistic::{fit_logistic, FitConfig, LogisticModel};

use logistic::{fit_patterns, Patterns};
pub use roc::{roc_curve, RocCurve};

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::GlmError;
use crate::rng;

const BOOTSTRAP_DOMAIN: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub seed: u64,
    /// Two-sided coverage of the percentile interval.
    pub level: f64,
    /// Refit the model on every resample. Without it only the prediction
    /// step is resampled, which ignores coefficient uncertainty and gives
    /// intervals that are too narrow.
    pub refit: bool,
    pub fit: FitConfig,
}

impl BootstrapConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            resamples: 200,
            seed,
            level: 0.95,
            refit: false,
            fit: FitConfig::default(),
        }
    }

    pub fn with_refit(mut self, fit: FitConfig) -> Self {
        self.refit = true;
        self.fit = fit;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupImpact {
    pub group: usize,
    pub name: String,
    /// Relative drop in predicted poor call rate when only this group is fixed.
    pub individual_reduction: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub pcr_fixed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CumulativeStep {
    pub group: usize,
    pub name: String,
    pub pcr: f64,
    pub cumulative_reduction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImpactReport {
    pub baseline_pcr: f64,
    pub observed_pcr: f64,
    pub groups: Vec<GroupImpact>,
    pub cumulative: Vec<CumulativeStep>,
    pub auc: f64,
    /// AUC of the single "any token reported" indicator.
    pub baseline_auc: f64,
    /// False-positive rate of the "any token reported" classifier.
    pub baseline_fpr: f64,
    pub baseline_tpr: f64,
    /// Model TPR at `baseline_fpr`.
    pub tpr_at_baseline_fpr: f64,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Predicted probabilities with the listed groups forced absent.
pub fn predict_fixed(model: &LogisticModel, design: &Design, fixed: &[usize]) -> Vec<f64> {
    let mut ind = vec![false; design.spec.n_groups()];
    design
        .indicators
        .iter()
        .map(|row| {
            ind.copy_from_slice(row);
            for &g in fixed {
                ind[g] = false;
            }
            model.predict_one(&ind)
        })
        .collect()
}

fn relative_reduction(orig: &[f64], fixed: &[f64]) -> f64 {
    let (a, b) = (orig.iter().sum::<f64>(), fixed.iter().sum::<f64>());
    if a > 0.0 {
        (a - b) / a
    } else {
        0.0
    }
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Relative reduction in predicted poor call rate from fixing one group,
/// with a percentile bootstrap interval over records.
pub fn group_fix_impact(
    model: &LogisticModel,
    design: &Design,
    group: usize,
    bootstrap: &BootstrapConfig,
) -> Result<GroupImpact, GlmError> {
    if group >= design.spec.n_groups() {
        return Err(GlmError::InvalidDesign(format!("no group index {group}")));
    }
    let orig = model.predict(design);
    let fixed = predict_fixed(model, design, &[group]);
    let reduction = relative_reduction(&orig, &fixed);
    let n = design.n_records();
    let (ci_lo, ci_hi) = if bootstrap.resamples == 0 || n == 0 {
        (reduction, reduction)
    } else {
        let pat = Patterns::collapse(design);
        let mut reps: Vec<f64> = (0..bootstrap.resamples)
            .into_par_iter()
            .map(|b| {
                let mut rng = rng::substream(bootstrap.seed, BOOTSTRAP_DOMAIN, (group as u64) << 32 | b as u64);
                let mut count = vec![0.0; pat.rows.len()];
                let mut positives = vec![0.0; pat.rows.len()];
                for _ in 0..n {
                    let i = rng.gen_range(0..n);
                    count[pat.id[i]] += 1.0;
                    if design.response[i] {
                        positives[pat.id[i]] += 1.0;
                    }
                }
                let refit;
                let m = if bootstrap.refit {
                    let resampled = pat.reweighted(count.clone(), positives);
                    refit = fit_patterns(&resampled, &design.spec, &bootstrap.fit)?;
                    &refit
                } else {
                    model
                };
                let (mut a, mut f) = (0.0, 0.0);
                let mut ind = vec![false; design.spec.n_groups()];
                for (row, c) in pat.rows.iter().zip(&count) {
                    ind.copy_from_slice(row);
                    a += c * m.predict_one(&ind);
                    ind[group] = false;
                    f += c * m.predict_one(&ind);
                }
                Ok(if a > 0.0 { (a - f) / a } else { 0.0 })
            })
            .collect::<Result<Vec<f64>, GlmError>>()?;
        reps.sort_by(f64::total_cmp);
        let alpha = (1.0 - bootstrap.level) / 2.0;
        (percentile(&reps, alpha), percentile(&reps, 1.0 - alpha))
    };
    Ok(GroupImpact {
        group,
        name: design.spec.grouping.groups[group].name.clone(),
        individual_reduction: reduction,
        ci_lo,
        ci_hi,
        pcr_fixed: mean(&fixed),
    })
}

/// Fixes groups one after another in `order`, reporting the running relative
/// reduction against the unfixed baseline.
pub fn cumulative_impact(model: &LogisticModel, design: &Design, order: &[usize]) -> Vec<CumulativeStep> {
    let orig = model.predict(design);
    let mut fixed = Vec::with_capacity(order.len());
    order
        .iter()
        .map(|&g| {
            fixed.push(g);
            let p = predict_fixed(model, design, &fixed);
            CumulativeStep {
                group: g,
                name: design.spec.grouping.groups[g].name.clone(),
                pcr: mean(&p),
                cumulative_reduction: relative_reduction(&orig, &p),
            }
        })
        .collect()
}

/// Full counterfactual report: individual impacts with intervals, the
/// cumulative sequence (ordered by descending individual reduction unless
/// `order` is given) and discrimination against the any-token baseline.
pub fn impact_report(
    model: &LogisticModel,
    design: &Design,
    any_token: &[bool],
    bootstrap: &BootstrapConfig,
    order: Option<&[usize]>,
) -> Result<ImpactReport, GlmError> {
    let groups = (0..design.spec.n_groups())
        .map(|g| group_fix_impact(model, design, g, bootstrap))
        .collect::<Result<Vec<_>, _>>()?;
    let order: Vec<usize> = match order {
        Some(o) => o.to_vec(),
        None => {
            let mut o: Vec<usize> = (0..groups.len()).collect();
            o.sort_by(|&a, &b| {
                groups[b]
                    .individual_reduction
                    .total_cmp(&groups[a].individual_reduction)
                    .then(a.cmp(&b))
            });
            o
        }
    };
    let cumulative = cumulative_impact(model, design, &order);
    let scores = model.predict(design);
    let roc = roc_curve(&scores, &design.response)?;
    let baseline_scores: Vec<f64> = any_token.iter().map(|&b| f64::from(u8::from(b))).collect();
    let baseline = roc_curve(&baseline_scores, &design.response)?;
    // a binary score has one interior vertex unless it is constant
    let (baseline_fpr, baseline_tpr) = if baseline.points.len() >= 3 {
        baseline.points[1]
    } else {
        baseline.points[baseline.points.len() - 1]
    };
    let observed = design.response.iter().filter(|&&b| b).count() as f64 / design.n_records() as f64;
    Ok(ImpactReport {
        baseline_pcr: mean(&scores),
        observed_pcr: observed,
        groups,
        cumulative,
        auc: roc.auc,
        baseline_auc: baseline.auc,
        baseline_fpr,
        baseline_tpr,
        tpr_at_baseline_fpr: roc.tpr_at_fpr(baseline_fpr),
    })
}

/// Greedy forward selection of interaction pairs by AIC. Starts from the
/// main-effects model and adds the pair with the largest AIC drop until no
/// pair improves it or `max_terms` pairs are in.
pub fn select_interactions_aic(
    design: &Design,
    fit: &FitConfig,
    max_terms: usize,
) -> Result<Vec<(usize, usize)>, GlmError> {
    let g = design.spec.n_groups();
    let mut chosen: Vec<(usize, usize)> = Vec::new();
    let with = |pairs: Vec<(usize, usize)>| -> Result<LogisticModel, GlmError> {
        let mut d = design.clone();
        d.spec = DesignSpec::new(design.spec.grouping.clone(), pairs)?;
        fit_logistic(&d, fit)
    };
    let mut best_aic = with(Vec::new())?.aic();
    while chosen.len() < max_terms {
        let candidates: Vec<(usize, usize)> = (0..g)
            .flat_map(|a| (a + 1..g).map(move |b| (a, b)))
            .filter(|p| !chosen.contains(p))
            .collect();
        let scored = candidates
            .par_iter()
            .map(|&p| {
                let mut pairs = chosen.clone();
                pairs.push(p);
                with(pairs).map(|m| (p, m.aic()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let Some(&(pair, aic)) = scored.iter().min_by(|a, b| a.1.total_cmp(&b.1)) else {
            break;
        };
        if aic >= best_aic {
            break;
        }
        best_aic = aic;
        chosen.push(pair);
    }
    Ok(chosen)
}
