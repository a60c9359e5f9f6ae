use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{Design, DesignSpec};
use crate::error::GlmError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitConfig {
    /// L2 penalty on every coefficient except the intercept.
    pub ridge: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            ridge: 1e-6,
            tol: 1e-8,
            max_iter: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogisticModel {
    pub terms: Vec<String>,
    pub coefficients: Vec<f64>,
    pub interactions: Vec<(usize, usize)>,
    pub ridge: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Unpenalised log-likelihood at the final coefficients.
    pub loglik: f64,
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(x))` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl LogisticModel {
    pub fn n_groups(&self) -> usize {
        self.coefficients.len() - 1 - self.interactions.len()
    }

    /// Linear predictor for one record's group indicators.
    pub fn linear_predictor(&self, indicators: &[bool]) -> f64 {
        let g = indicators.len();
        let mut eta = self.coefficients[0];
        for (j, &b) in indicators.iter().enumerate() {
            if b {
                eta += self.coefficients[1 + j];
            }
        }
        for (i, &(a, b)) in self.interactions.iter().enumerate() {
            if indicators[a] && indicators[b] {
                eta += self.coefficients[1 + g + i];
            }
        }
        eta
    }

    pub fn predict_one(&self, indicators: &[bool]) -> f64 {
        sigmoid(self.linear_predictor(indicators))
    }

    pub fn predict(&self, design: &Design) -> Vec<f64> {
        design.indicators.iter().map(|ind| self.predict_one(ind)).collect()
    }

    /// Akaike information criterion from the unpenalised log-likelihood.
    pub fn aic(&self) -> f64 {
        2.0 * self.coefficients.len() as f64 - 2.0 * self.loglik
    }
}

/// Distinct indicator rows with their record and positive counts. The
/// likelihood only depends on these, so fitting runs over at most 2^g rows.
#[derive(Debug, Clone)]
pub(crate) struct Patterns {
    pub rows: Vec<Vec<bool>>,
    /// Pattern index of every record.
    pub id: Vec<usize>,
    pub x: DMatrix<f64>,
    pub count: DVector<f64>,
    pub positives: DVector<f64>,
}

impl Patterns {
    pub fn collapse(design: &Design) -> Self {
        let mut index: BTreeMap<&[bool], usize> = BTreeMap::new();
        let mut rows: Vec<Vec<bool>> = Vec::new();
        let mut id = Vec::with_capacity(design.n_records());
        let mut count = Vec::new();
        let mut positives = Vec::new();
        for (ind, &y) in design.indicators.iter().zip(&design.response) {
            let k = *index.entry(ind.as_slice()).or_insert_with(|| {
                rows.push(ind.clone());
                count.push(0.0);
                positives.push(0.0);
                rows.len() - 1
            });
            id.push(k);
            count[k] += 1.0;
            if y {
                positives[k] += 1.0;
            }
        }
        let m = design.spec.n_terms();
        let mut x = DMatrix::zeros(rows.len(), m);
        let mut row = vec![0.0; m];
        for (i, ind) in rows.iter().enumerate() {
            design.row(ind, &mut row);
            for (j, v) in row.iter().enumerate() {
                x[(i, j)] = *v;
            }
        }
        Self {
            rows,
            id,
            x,
            count: DVector::from_vec(count),
            positives: DVector::from_vec(positives),
        }
    }

    /// Same patterns with new counts (e.g. from a bootstrap resample).
    pub fn reweighted(&self, count: Vec<f64>, positives: Vec<f64>) -> Self {
        Self {
            rows: self.rows.clone(),
            id: Vec::new(),
            x: self.x.clone(),
            count: DVector::from_vec(count),
            positives: DVector::from_vec(positives),
        }
    }
}

fn penalised_loglik(pat: &Patterns, beta: &DVector<f64>, ridge: f64) -> (f64, f64) {
    let eta = &pat.x * beta;
    let ll: f64 = (0..eta.len())
        .map(|i| pat.positives[i] * eta[i] - pat.count[i] * softplus(eta[i]))
        .sum();
    let penalty: f64 = beta.iter().skip(1).map(|b| b * b).sum::<f64>() * ridge / 2.0;
    (ll - penalty, ll)
}

/// Ridge-penalised logistic regression by iteratively reweighted least
/// squares (Newton steps with step halving; a step that lowers the penalised
/// likelihood is never accepted).
pub fn fit_logistic(design: &Design, config: &FitConfig) -> Result<LogisticModel, GlmError> {
    fit_patterns(&Patterns::collapse(design), &design.spec, config)
}

pub(crate) fn fit_patterns(pat: &Patterns, spec: &DesignSpec, config: &FitConfig) -> Result<LogisticModel, GlmError> {
    let n = pat.count.sum();
    let positives = pat.positives.sum();
    if positives == 0.0 || positives == n {
        return Err(GlmError::SingleClass);
    }
    let x = &pat.x;
    let m = x.ncols();
    let prevalence = positives / n;
    let mut beta = DVector::zeros(m);
    beta[0] = (prevalence / (1.0 - prevalence)).ln();
    let (mut obj, mut ll) = penalised_loglik(pat, &beta, config.ridge);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iter {
        iterations += 1;
        let p = (x * &beta).map(sigmoid);
        let resid = DVector::from_iterator(p.len(), (0..p.len()).map(|i| pat.positives[i] - pat.count[i] * p[i]));
        let mut grad = x.tr_mul(&resid);
        let mut wx = x.clone();
        for (i, mut row) in wx.row_iter_mut().enumerate() {
            row *= (pat.count[i] * p[i] * (1.0 - p[i])).max(1e-12);
        }
        let mut hess = x.tr_mul(&wx);
        for j in 1..m {
            grad[j] -= config.ridge * beta[j];
            hess[(j, j)] += config.ridge;
        }
        let step = hess.cholesky().ok_or(GlmError::Singular)?.solve(&grad);
        if step.iter().any(|s| !s.is_finite()) {
            return Err(GlmError::Singular);
        }
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let candidate = &beta + &step * scale;
            let (cand_obj, cand_ll) = penalised_loglik(pat, &candidate, config.ridge);
            if cand_obj >= obj - 1e-12 * obj.abs().max(1.0) {
                accepted = Some((candidate, cand_obj, cand_ll));
                break;
            }
            scale /= 2.0;
        }
        let Some((candidate, cand_obj, cand_ll)) = accepted else {
            // no ascent direction left: already at the optimum numerically
            converged = step.amax() < config.tol.sqrt();
            break;
        };
        let change = (&candidate - &beta).amax();
        beta = candidate;
        obj = cand_obj;
        ll = cand_ll;
        if change < config.tol {
            converged = true;
            break;
        }
    }
    Ok(LogisticModel {
        terms: spec.term_names(),
        coefficients: beta.iter().copied().collect(),
        interactions: spec.interactions.clone(),
        ridge: config.ridge,
        converged,
        iterations,
        loglik: ll,
    })
}
