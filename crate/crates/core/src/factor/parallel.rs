use nalgebra::SymmetricEigen;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bits::BitColumn;
use crate::error::FactorError;
use crate::polychoric::{polychoric_from_columns, PolychoricMatrix};
use crate::rng;
use crate::survey::SurveyDataset;

const PA_DOMAIN: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParallelAnalysisConfig {
    pub reps: usize,
    pub quantile: f64,
    pub seed: u64,
}

impl ParallelAnalysisConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            reps: 100,
            quantile: 0.95,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParallelAnalysis {
    pub k: usize,
    /// Observed eigenvalues, descending.
    pub observed: Vec<f64>,
    /// Per-rank quantile of the reference eigenvalues.
    pub reference: Vec<f64>,
}

fn sorted_eigenvalues(m: &nalgebra::DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// Linear-interpolation quantile of an ascending slice.
fn quantile_sorted(xs: &[f64], q: f64) -> f64 {
    let pos = q * (xs.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    xs[lo] + (xs[hi] - xs[lo]) * (pos - lo as f64)
}

/// Independent binary column with set-probability `p`; never constant, so the
/// pairwise estimator always has two levels to work with.
fn reference_column<R: Rng>(rng: &mut R, n: usize, p: f64) -> BitColumn {
    let mut col = BitColumn::zeros(n);
    let mut ones = 0;
    for i in 0..n {
        if rng.gen::<f64>() < p {
            col.set(i);
            ones += 1;
        }
    }
    if n >= 2 && ones == 0 {
        col.set(rng.gen_range(0..n));
    } else if n >= 2 && ones == n {
        let mut fresh = BitColumn::zeros(n);
        let skip = rng.gen_range(0..n);
        (0..n).filter(|&i| i != skip).for_each(|i| fresh.set(i));
        col = fresh;
    }
    col
}

/// Horn's parallel analysis on the polychoric matrix.
///
/// Reference data are independent binary columns with the observed
/// prevalences and the same number of records, passed through the same
/// polychoric estimator. `k` counts the leading observed eigenvalues that
/// exceed the per-rank `quantile` of the reference eigenvalues.
pub fn parallel_analysis(
    corr: &PolychoricMatrix,
    ds: &SurveyDataset,
    config: &ParallelAnalysisConfig,
) -> Result<ParallelAnalysis, FactorError> {
    if config.reps < 10 {
        return Err(FactorError::TooFewReplicates(config.reps));
    }
    let p = corr.len();
    let n = ds.len();
    let prevalence: Vec<f64> = (0..ds.n_tokens())
        .map(|j| ds.token_bits(j).count_ones() as f64 / n.max(1) as f64)
        .collect();
    let names = corr.tokens.clone();
    let reference_eigs = (0..config.reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = rng::substream(config.seed, PA_DOMAIN, rep as u64);
            let cols: Vec<BitColumn> = prevalence.iter().map(|&q| reference_column(&mut rng, n, q)).collect();
            polychoric_from_columns(&names, &cols).map(|m| sorted_eigenvalues(&m.matrix))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let reference: Vec<f64> = (0..p)
        .map(|rank| {
            let mut vals: Vec<f64> = reference_eigs.iter().map(|e| e[rank]).collect();
            vals.sort_by(f64::total_cmp);
            quantile_sorted(&vals, config.quantile)
        })
        .collect();
    let observed = sorted_eigenvalues(&corr.matrix);
    let k = observed.iter().zip(&reference).take_while(|(o, r)| o > r).count();
    if k == 0 {
        return Err(FactorError::NoFactors);
    }
    Ok(ParallelAnalysis { k, observed, reference })
}
