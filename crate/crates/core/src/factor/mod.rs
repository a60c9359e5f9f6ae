//! Exploratory factor analysis on a polychoric matrix: factor count by
//! parallel analysis, principal-axis extraction, varimax rotation and
//! thresholded assignment of tokens to problem groups.

mod extract;
mod grouping;
mod parallel;
mod varimax;

pub use extract::extract_factors;
pub use grouping::{assign_groups, ProblemGroup, ProblemGrouping};
pub use parallel::{parallel_analysis, ParallelAnalysis, ParallelAnalysisConfig};
pub use varimax::{varimax, varimax_criterion};

use nalgebra::DMatrix;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rotation {
    None,
    Varimax,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    pub tokens: Vec<String>,
    /// Tokens x factors.
    pub loadings: DMatrix<f64>,
    pub communalities: Vec<f64>,
    /// Share of total token variance per factor.
    pub variance_explained: Vec<f64>,
    pub rotation: Rotation,
    /// Orthogonal k x k matrix with `loadings = unrotated * rotation_matrix`.
    pub rotation_matrix: DMatrix<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Tokens whose communality exceeded 1 and was clamped.
    pub heywood: Vec<usize>,
}

impl FactorModel {
    pub fn n_factors(&self) -> usize {
        self.loadings.ncols()
    }

    pub fn n_tokens(&self) -> usize {
        self.loadings.nrows()
    }

    pub fn total_variance_explained(&self) -> f64 {
        self.variance_explained.iter().sum()
    }
}

pub(crate) fn column_variance(loadings: &DMatrix<f64>) -> Vec<f64> {
    let p = loadings.nrows() as f64;
    loadings
        .column_iter()
        .map(|c| c.iter().map(|l| l * l).sum::<f64>() / p)
        .collect()
}

pub(crate) fn row_communalities(loadings: &DMatrix<f64>) -> Vec<f64> {
    loadings.row_iter().map(|r| r.iter().map(|l| l * l).sum()).collect()
}

/// Flips every column so its loadings sum to a non-negative value.
/// Returns the applied signs.
pub(crate) fn orient_columns(loadings: &mut DMatrix<f64>) -> Vec<f64> {
    let mut signs = Vec::with_capacity(loadings.ncols());
    for mut c in loadings.column_iter_mut() {
        let s = if c.sum() < 0.0 { -1.0 } else { 1.0 };
        c *= s;
        signs.push(s);
    }
    signs
}
