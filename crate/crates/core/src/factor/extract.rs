use nalgebra::{DMatrix, SymmetricEigen};

use super::{column_variance, orient_columns, row_communalities, FactorModel, Rotation};
use crate::error::FactorError;
use crate::polychoric::PolychoricMatrix;

/// Initial communalities: squared multiple correlations, or the largest
/// absolute off-diagonal correlation per row when `r` is singular.
fn initial_communalities(r: &DMatrix<f64>) -> Vec<f64> {
    let p = r.nrows();
    if let Some(inv) = r.clone().try_inverse() {
        let smc: Vec<f64> = (0..p).map(|i| 1.0 - 1.0 / inv[(i, i)]).collect();
        if smc.iter().all(|h| h.is_finite() && (0.0..=1.0).contains(h)) {
            return smc;
        }
    }
    (0..p)
        .map(|i| (0..p).filter(|&j| j != i).map(|j| r[(i, j)].abs()).fold(0.0, f64::max))
        .collect()
}

/// Top-`k` loadings of a symmetric matrix, eigenvalues sorted descending.
fn top_loadings(reduced: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(reduced.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let p = reduced.nrows();
    let mut l = DMatrix::zeros(p, k);
    for (f, &idx) in order.iter().take(k).enumerate() {
        let scale = eig.eigenvalues[idx].max(0.0).sqrt();
        for i in 0..p {
            l[(i, f)] = eig.eigenvectors[(i, idx)] * scale;
        }
    }
    l
}

/// Principal-axis factoring of `corr` with `k` factors.
///
/// Iterates communality estimates on the diagonal until the largest change
/// is below `tol`. Non-convergence is reported through `converged`, not as
/// an error.
pub fn extract_factors(
    corr: &PolychoricMatrix,
    k: usize,
    max_iter: usize,
    tol: f64,
) -> Result<FactorModel, FactorError> {
    let r = &corr.matrix;
    let p = r.nrows();
    if k == 0 || k >= p {
        return Err(FactorError::InvalidFactorCount { k, p });
    }
    let mut h2 = initial_communalities(r);
    let mut heywood = vec![false; p];
    let mut loadings = DMatrix::zeros(p, k);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut reduced = r.clone();
        for i in 0..p {
            reduced[(i, i)] = h2[i];
        }
        loadings = top_loadings(&reduced, k);
        let mut next = row_communalities(&loadings);
        for (i, h) in next.iter_mut().enumerate() {
            if *h > 1.0 {
                *h = 1.0;
                heywood[i] = true;
            }
        }
        let change = h2.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        h2 = next;
        if change < tol {
            converged = true;
            break;
        }
    }
    // clamp rows of Heywood tokens so reported loadings match communality
    for (i, flagged) in heywood.iter().enumerate() {
        let h = loadings.row(i).norm_squared();
        if *flagged && h > 1.0 {
            loadings.row_mut(i).scale_mut(1.0 / h.sqrt());
        }
    }
    orient_columns(&mut loadings);
    Ok(FactorModel {
        tokens: corr.tokens.clone(),
        communalities: row_communalities(&loadings),
        variance_explained: column_variance(&loadings),
        loadings,
        rotation: Rotation::None,
        rotation_matrix: DMatrix::identity(k, k),
        converged,
        iterations,
        heywood: (0..p).filter(|&i| heywood[i]).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn wrap(m: DMatrix<f64>) -> PolychoricMatrix {
        PolychoricMatrix {
            tokens: (0..m.nrows()).map(|i| format!("t{i}")).collect(),
            matrix: m,
            psd_repaired: false,
            min_eigenvalue_before: 0.0,
            corrected_pairs: vec![],
            nonconverged_pairs: vec![],
        }
    }

    #[test]
    fn recovers_rank_one_structure() {
        let p = 6;
        let lambda = 0.8;
        let r = DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { lambda * lambda });
        let m = extract_factors(&wrap(r), 1, 500, 1e-10).unwrap();
        assert!(m.converged);
        for i in 0..p {
            assert!(
                (m.loadings[(i, 0)].abs() - lambda).abs() < 1e-4,
                "{}",
                m.loadings[(i, 0)]
            );
        }
        assert!((m.total_variance_explained() - 0.64).abs() < 1e-3);
    }

    #[test]
    fn identity_matrix_does_not_crash() {
        let p = 5;
        let m = extract_factors(&wrap(DMatrix::identity(p, p)), p - 1, 100, 1e-6).unwrap();
        assert!(m.loadings.iter().all(|l| l.abs() < 1e-6) || !m.heywood.is_empty());
        assert!(m.communalities.iter().all(|h| *h <= 1.0 + 1e-6));
    }

    #[test]
    fn invalid_factor_count() {
        let r = DMatrix::identity(3, 3);
        assert!(matches!(
            extract_factors(&wrap(r.clone()), 0, 10, 1e-6),
            Err(FactorError::InvalidFactorCount { k: 0, p: 3 })
        ));
        assert!(extract_factors(&wrap(r), 3, 10, 1e-6).is_err());
    }

    #[test]
    fn two_block_structure() {
        // two independent blocks of 3 with loading 0.7
        let r = DMatrix::from_fn(6, 6, |i, j| {
            if i == j {
                1.0
            } else if i / 3 == j / 3 {
                0.49
            } else {
                0.0
            }
        });
        let m = extract_factors(&wrap(r), 2, 500, 1e-10).unwrap();
        let total: f64 = m.communalities.iter().sum::<f64>() / 6.0;
        assert!((total - 0.49).abs() < 1e-3);
        assert!((m.total_variance_explained() - total).abs() < 1e-12);
        assert!(m.variance_explained[0] >= m.variance_explained[1] - 1e-12);
    }
}
