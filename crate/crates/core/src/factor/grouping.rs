use serde::{Deserialize, Serialize};

use super::FactorModel;
use crate::error::FactorError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemGroup {
    pub name: String,
    /// Column of the rotated loading matrix this group comes from.
    pub factor: usize,
    pub tokens: Vec<String>,
    pub variance_explained: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemGrouping {
    /// Ordered by descending explained variance.
    pub groups: Vec<ProblemGroup>,
    pub unassigned: Vec<String>,
    pub threshold: f64,
}

impl ProblemGrouping {
    /// Group sizes in group order.
    pub fn sizes(&self) -> Vec<usize> {
        self.groups.iter().map(|g| g.tokens.len()).collect()
    }

    /// Partition as sorted sets of token names, ignoring group order.
    pub fn canonical_partition(&self) -> Vec<Vec<String>> {
        let mut parts: Vec<Vec<String>> = self
            .groups
            .iter()
            .map(|g| {
                let mut t = g.tokens.clone();
                t.sort();
                t
            })
            .collect();
        parts.sort();
        parts
    }

    pub fn group_of(&self, token: &str) -> Option<usize> {
        self.groups.iter().position(|g| g.tokens.iter().any(|t| t == token))
    }
}

/// Assigns each token to the factor with its largest absolute loading when
/// that loading reaches `threshold`. Ties go to the lower factor index.
/// Factors that dominate no token produce no group.
pub fn assign_groups(model: &FactorModel, threshold: f64) -> Result<ProblemGrouping, FactorError> {
    let k = model.n_factors();
    let mut members: Vec<Vec<String>> = vec![Vec::new(); k];
    let mut unassigned = Vec::new();
    for (i, token) in model.tokens.iter().enumerate() {
        let mut best = 0;
        for f in 1..k {
            if model.loadings[(i, f)].abs() > model.loadings[(i, best)].abs() {
                best = f;
            }
        }
        if k > 0 && model.loadings[(i, best)].abs() >= threshold {
            members[best].push(token.clone());
        } else {
            unassigned.push(token.clone());
        }
    }
    if unassigned.len() == model.tokens.len() {
        return Err(FactorError::AllUnassigned(threshold));
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        model.variance_explained[b]
            .total_cmp(&model.variance_explained[a])
            .then(a.cmp(&b))
    });
    let nonempty: Vec<usize> = order.into_iter().filter(|&f| !members[f].is_empty()).collect();
    let groups = nonempty
        .into_iter()
        .enumerate()
        .map(|(g, f)| ProblemGroup {
            name: format!("group_{}", g + 1),
            factor: f,
            tokens: std::mem::take(&mut members[f]),
            variance_explained: model.variance_explained[f],
        })
        .collect();
    Ok(ProblemGrouping {
        groups,
        unassigned,
        threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor::{column_variance, row_communalities, Rotation};
    use nalgebra::DMatrix;

    fn model(rows: &[&[f64]]) -> FactorModel {
        let k = rows[0].len();
        let l = DMatrix::from_fn(rows.len(), k, |i, j| rows[i][j]);
        FactorModel {
            tokens: (0..rows.len()).map(|i| format!("t{i}")).collect(),
            communalities: row_communalities(&l),
            variance_explained: column_variance(&l),
            loadings: l,
            rotation: Rotation::Varimax,
            rotation_matrix: DMatrix::identity(k, k),
            converged: true,
            iterations: 1,
            heywood: vec![],
        }
    }

    #[test]
    fn dominant_loading_wins() {
        let m = model(&[&[0.9, 0.1], &[0.2, 0.3], &[0.1, -0.7], &[0.6, 0.6]]);
        let g = assign_groups(&m, 0.5).unwrap();
        assert_eq!(g.groups[0].tokens, vec!["t0", "t3"]);
        assert_eq!(g.groups[1].tokens, vec!["t2"]);
        assert_eq!(g.unassigned, vec!["t1"]);
        assert_eq!(g.group_of("t2"), Some(1));
    }

    #[test]
    fn all_weak_is_error() {
        let m = model(&[&[0.3, 0.1], &[0.2, 0.4]]);
        assert_eq!(assign_groups(&m, 0.5).unwrap_err(), FactorError::AllUnassigned(0.5));
    }

    #[test]
    fn sign_flips_do_not_change_grouping() {
        let m = model(&[&[0.9, 0.1], &[0.2, 0.8], &[0.55, 0.3]]);
        let mut flipped = m.clone();
        flipped.loadings.column_mut(1).neg_mut();
        assert_eq!(assign_groups(&m, 0.5).unwrap(), assign_groups(&flipped, 0.5).unwrap());
    }

    #[test]
    fn groups_follow_variance_order() {
        let m = model(&[&[0.6, 0.0], &[0.0, 0.9], &[0.0, 0.9]]);
        let g = assign_groups(&m, 0.5).unwrap();
        assert_eq!(g.groups[0].factor, 1);
        assert_eq!(g.groups[0].name, "group_1");
        assert_eq!(g.sizes(), vec![2, 1]);
    }
}
