//! Univariate token impact on a call-quality metric.
//!
//! The metric series is copied, entries on the problem set are overwritten
//! with a "fix value" representing a good experience, and the impact is the
//! absolute change of the mean. Uncertainty comes from propagation of
//! errors over the original and fixed series.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::StatsError;
use crate::survey::{CallRecord, SurveyDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    /// 1 for a poor call, else 0; its mean is the poor call rate.
    PoorIndicator,
    /// Call duration in seconds; its mean is the average call duration.
    DurationS,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricSpec {
    pub kind: MetricKind,
    pub fix_value: f64,
}

impl MetricSpec {
    /// Poor call rate with fix value 0 (the call would not have been poor).
    pub fn pcr() -> Self {
        Self {
            kind: MetricKind::PoorIndicator,
            fix_value: 0.0,
        }
    }

    /// Call duration, fixed to the mean duration of calls with no reported
    /// problem. Falls back to the overall mean when every call has a token.
    pub fn acd(ds: &SurveyDataset) -> Self {
        let clean: Vec<f64> = ds
            .records()
            .iter()
            .filter(|r| !r.any_token_reported())
            .map(|r| r.duration_s)
            .collect();
        let fix_value = if clean.is_empty() {
            mean(&ds.records().iter().map(|r| r.duration_s).collect::<Vec<_>>())
        } else {
            mean(&clean)
        };
        Self {
            kind: MetricKind::DurationS,
            fix_value,
        }
    }

    pub fn with_fix_value(mut self, fix_value: f64) -> Self {
        self.fix_value = fix_value;
        self
    }

    fn value(&self, r: &CallRecord) -> f64 {
        match self.kind {
            MetricKind::PoorIndicator => f64::from(u8::from(r.poor_call())),
            MetricKind::DurationS => r.duration_s,
        }
    }
}

/// How the variances of the original and fixed series are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceRule {
    /// `var + var_fix - cov`, as in the published procedure.
    #[default]
    SingleCovariance,
    /// `var + var_fix - 2 cov`, the variance of a difference.
    StrictDelta,
}

/// Which records form the problem set.
#[derive(Clone)]
pub enum Selector {
    Token(usize),
    /// Records carrying any of the listed tokens.
    AnyOf(Vec<usize>),
    Predicate {
        label: String,
        predicate: Arc<dyn Fn(&CallRecord) -> bool + Send + Sync>,
    },
}

impl fmt::Debug for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Selector::Token(t) => write!(f, "Token({t})"),
            Selector::AnyOf(ts) => write!(f, "AnyOf({ts:?})"),
            Selector::Predicate { label, .. } => write!(f, "Predicate({label})"),
        }
    }
}

impl Selector {
    pub fn predicate<F>(label: impl Into<String>, f: F) -> Self
    where
        F: Fn(&CallRecord) -> bool + Send + Sync + 'static,
    {
        Selector::Predicate {
            label: label.into(),
            predicate: Arc::new(f),
        }
    }

    pub fn matches(&self, r: &CallRecord) -> bool {
        match self {
            Selector::Token(t) => r.tokens[*t],
            Selector::AnyOf(ts) => ts.iter().any(|&t| r.tokens[t]),
            Selector::Predicate { predicate, .. } => predicate(r),
        }
    }

    pub fn label(&self, ds: &SurveyDataset) -> String {
        let names = ds.vocabulary().names();
        match self {
            Selector::Token(t) => names[*t].clone(),
            Selector::AnyOf(ts) => ts.iter().map(|&t| names[t].as_str()).collect::<Vec<_>>().join("|"),
            Selector::Predicate { label, .. } => label.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimuResult {
    pub selector: String,
    pub mean_impact: f64,
    pub ci95_halfwidth: f64,
    pub n: usize,
    pub n_selected: usize,
    pub metric_original: f64,
    pub metric_fixed: f64,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population covariance (divides by n).
fn covariance(xs: &[f64], ys: &[f64]) -> f64 {
    let (mx, my) = (mean(xs), mean(ys));
    xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / xs.len() as f64
}

pub fn timu(
    ds: &SurveyDataset,
    problem_set: &Selector,
    metric: &MetricSpec,
    rule: VarianceRule,
) -> Result<TimuResult, StatsError> {
    if ds.is_empty() {
        return Err(StatsError::Empty);
    }
    let original: Vec<f64> = ds.records().iter().map(|r| metric.value(r)).collect();
    let mut fixed = original.clone();
    let mut n_selected = 0;
    for (v, r) in fixed.iter_mut().zip(ds.records()) {
        if problem_set.matches(r) {
            *v = metric.fix_value;
            n_selected += 1;
        }
    }
    let metric_original = mean(&original);
    let metric_fixed = mean(&fixed);
    let var = covariance(&original, &original);
    let var_fix = covariance(&fixed, &fixed);
    let cov = covariance(&original, &fixed);
    let combined_var = match rule {
        VarianceRule::SingleCovariance => var + var_fix - cov,
        VarianceRule::StrictDelta => var + var_fix - 2.0 * cov,
    };
    let se = combined_var.max(0.0).sqrt() / (ds.len() as f64).sqrt();
    Ok(TimuResult {
        selector: problem_set.label(ds),
        // mean of per-record differences: exact for count-valued metrics
        mean_impact: (original.iter().zip(&fixed).map(|(o, f)| o - f).sum::<f64>() / ds.len() as f64).abs(),
        ci95_halfwidth: 1.96 * se,
        n: ds.len(),
        n_selected,
        metric_original,
        metric_fixed,
    })
}

/// One result per token, sorted by descending impact; ties keep vocabulary order.
pub fn rank_tokens(ds: &SurveyDataset, metric: &MetricSpec, rule: VarianceRule) -> Result<Vec<TimuResult>, StatsError> {
    if ds.n_tokens() == 0 {
        return Err(StatsError::Invalid("no tokens to rank".into()));
    }
    let results = (0..ds.n_tokens())
        .into_par_iter()
        .map(|t| timu(ds, &Selector::Token(t), metric, rule))
        .collect::<Result<Vec<_>, _>>()?;
    let mut order: Vec<usize> = (0..results.len()).collect();
    order.sort_by(|&a, &b| {
        results[b]
            .mean_impact
            .total_cmp(&results[a].mean_impact)
            .then(a.cmp(&b))
    });
    Ok(order.into_iter().map(|i| results[i].clone()).collect())
}
