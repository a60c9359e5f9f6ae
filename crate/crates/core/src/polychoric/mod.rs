//! Latent (tetrachoric) correlation between binary tokens.
//!
//! Each token is treated as a thresholded standard-normal trait: the token is
//! set when the trait exceeds its threshold. Thresholds come from the
//! marginal proportions; the correlation maximises the multinomial
//! likelihood of the 2x2 table with the thresholds held fixed.

mod bvn;

pub use bvn::bvn_upper;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::bits::BitColumn;
use crate::error::PolychoricError;
use crate::normal;
use crate::optim::brent_minimize;
use crate::survey::SurveyDataset;

/// Smallest eigenvalue kept by the PSD repair.
pub const MIN_EIGENVALUE: f64 = 1e-8;
const RHO_BOUND: f64 = 1.0 - 1e-10;
const RHO_TOL: f64 = 1e-8;

/// Cross-tabulation of two binary variables; `nxy` counts records with
/// first variable `x` and second variable `y`. Counts may be fractional
/// (weighted tables, exact proportions).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContingencyTable2x2 {
    pub n00: f64,
    pub n01: f64,
    pub n10: f64,
    pub n11: f64,
}

impl ContingencyTable2x2 {
    pub fn new(n00: f64, n01: f64, n10: f64, n11: f64) -> Self {
        Self { n00, n01, n10, n11 }
    }

    pub fn from_columns(x: &BitColumn, y: &BitColumn) -> Self {
        let n = x.len() as f64;
        let n11 = x.and_count(y) as f64;
        let x1 = x.count_ones() as f64;
        let y1 = y.count_ones() as f64;
        Self {
            n00: n - x1 - y1 + n11,
            n01: y1 - n11,
            n10: x1 - n11,
            n11,
        }
    }

    pub fn total(&self) -> f64 {
        self.n00 + self.n01 + self.n10 + self.n11
    }

    /// Marginal proportion of the first variable being set.
    pub fn p_x(&self) -> f64 {
        (self.n10 + self.n11) / self.total()
    }

    pub fn p_y(&self) -> f64 {
        (self.n01 + self.n11) / self.total()
    }

    fn cells(&self) -> [f64; 4] {
        [self.n00, self.n01, self.n10, self.n11]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolychoricEstimate {
    pub rho: f64,
    pub tau_x: f64,
    pub tau_y: f64,
    pub loglik: f64,
    pub converged: bool,
    /// Zero cells were replaced by 0.5 before estimation.
    pub corrected: bool,
}

/// Model cell probabilities `[p00, p01, p10, p11]`.
fn cell_probabilities(tau_x: f64, tau_y: f64, rho: f64) -> [f64; 4] {
    let px = normal::sf(tau_x);
    let py = normal::sf(tau_y);
    let p11 = bvn_upper(tau_x, tau_y, rho);
    [1.0 - px - py + p11, py - p11, px - p11, p11]
}

fn loglik(cells: &[f64; 4], tau_x: f64, tau_y: f64, rho: f64) -> f64 {
    cell_probabilities(tau_x, tau_y, rho)
        .iter()
        .zip(cells)
        .map(|(p, n)| if *n > 0.0 { n * p.max(1e-300).ln() } else { 0.0 })
        .sum()
}

/// Two-step maximum-likelihood tetrachoric correlation of a 2x2 table.
pub fn estimate_polychoric(table: &ContingencyTable2x2) -> Result<PolychoricEstimate, PolychoricError> {
    let total = table.total();
    if table.cells().iter().any(|c| c.is_nan() || *c < 0.0) || total.is_nan() || total <= 0.0 {
        return Err(PolychoricError::EmptyTable);
    }
    // A constant variable carries no correlation information; the
    // continuity correction must not invent some.
    let (px, py) = (table.p_x(), table.p_y());
    if px <= 0.0 || px >= 1.0 || py <= 0.0 || py >= 1.0 {
        return Err(PolychoricError::DegenerateMarginal);
    }
    let corrected = table.cells().contains(&0.0);
    let t = if corrected {
        let fix = |c: f64| if c == 0.0 { 0.5 } else { c };
        ContingencyTable2x2::new(fix(table.n00), fix(table.n01), fix(table.n10), fix(table.n11))
    } else {
        *table
    };
    let tau_x = -normal::quantile(t.p_x());
    let tau_y = -normal::quantile(t.p_y());
    if !tau_x.is_finite() || !tau_y.is_finite() {
        return Err(PolychoricError::DegenerateMarginal);
    }
    let cells = t.cells();
    let best = brent_minimize(
        |rho| -loglik(&cells, tau_x, tau_y, rho),
        -RHO_BOUND,
        RHO_BOUND,
        RHO_TOL,
        500,
    );
    Ok(PolychoricEstimate {
        rho: best.x,
        tau_x,
        tau_y,
        loglik: -best.value,
        converged: best.converged,
        corrected,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolychoricMatrix {
    pub tokens: Vec<String>,
    /// Symmetric with unit diagonal.
    pub matrix: DMatrix<f64>,
    pub psd_repaired: bool,
    pub min_eigenvalue_before: f64,
    /// Pairs that needed the zero-cell continuity correction.
    pub corrected_pairs: Vec<(usize, usize)>,
    pub nonconverged_pairs: Vec<(usize, usize)>,
}

impl PolychoricMatrix {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.matrix)
    }
}

pub(crate) fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Clips eigenvalues below `floor`, reconstructs, and rescales to unit
/// diagonal. Rescaling can push the smallest eigenvalue slightly under the
/// floor again, so the clip is repeated with a raised floor until it holds.
pub fn repair_psd(m: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let mut current = m.clone();
    let mut clip = floor;
    for _ in 0..60 {
        let eig = SymmetricEigen::new(current.clone());
        if eig.eigenvalues.iter().all(|&l| l >= floor) {
            break;
        }
        let clipped = eig.eigenvalues.map(|l| l.max(clip));
        let rebuilt = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
        let scale: Vec<f64> = (0..rebuilt.nrows()).map(|i| rebuilt[(i, i)].sqrt()).collect();
        current = DMatrix::from_fn(rebuilt.nrows(), rebuilt.ncols(), |i, j| {
            if i == j {
                1.0
            } else {
                let v = rebuilt[(i, j)] / (scale[i] * scale[j]);
                v.clamp(-1.0, 1.0)
            }
        });
        current = (&current + current.transpose()) * 0.5;
        clip *= 2.0;
    }
    current
}

/// Polychoric matrix of the given binary columns.
pub fn polychoric_from_columns(names: &[String], columns: &[BitColumn]) -> Result<PolychoricMatrix, PolychoricError> {
    let p = columns.len();
    if p < 2 {
        return Err(PolychoricError::TooFewTokens(p));
    }
    let pairs: Vec<(usize, usize)> = (0..p).flat_map(|i| (i + 1..p).map(move |j| (i, j))).collect();
    let estimates = pairs
        .par_iter()
        .map(|&(i, j)| {
            estimate_polychoric(&ContingencyTable2x2::from_columns(&columns[i], &columns[j]))
                .map_err(|_| PolychoricError::DegeneratePair(names[i].clone(), names[j].clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut matrix = DMatrix::identity(p, p);
    let mut corrected_pairs = Vec::new();
    let mut nonconverged_pairs = Vec::new();
    for (&(i, j), est) in pairs.iter().zip(&estimates) {
        matrix[(i, j)] = est.rho;
        matrix[(j, i)] = est.rho;
        if est.corrected {
            corrected_pairs.push((i, j));
        }
        if !est.converged {
            nonconverged_pairs.push((i, j));
        }
    }
    let min_eigenvalue_before = min_eigenvalue(&matrix);
    let psd_repaired = min_eigenvalue_before < MIN_EIGENVALUE;
    if psd_repaired {
        matrix = repair_psd(&matrix, MIN_EIGENVALUE);
    }
    Ok(PolychoricMatrix {
        tokens: names.to_vec(),
        matrix,
        psd_repaired,
        min_eigenvalue_before,
        corrected_pairs,
        nonconverged_pairs,
    })
}

pub fn polychoric_matrix(ds: &SurveyDataset) -> Result<PolychoricMatrix, PolychoricError> {
    let columns: Vec<BitColumn> = (0..ds.n_tokens()).map(|j| ds.token_bits(j)).collect();
    polychoric_from_columns(ds.vocabulary().names(), &columns)
}
