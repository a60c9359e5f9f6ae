use serde::Serialize;

use crate::error::GlmError;
use crate::factor::ProblemGrouping;
use crate::survey::SurveyDataset;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignSpec {
    pub grouping: ProblemGrouping,
    /// Group-index pairs; stored with the smaller index first.
    pub interactions: Vec<(usize, usize)>,
}

impl DesignSpec {
    pub fn new(grouping: ProblemGrouping, interactions: Vec<(usize, usize)>) -> Result<Self, GlmError> {
        let g = grouping.groups.len();
        if g == 0 {
            return Err(GlmError::InvalidDesign("grouping has no groups".into()));
        }
        let mut seen = Vec::new();
        for &(a, b) in &interactions {
            if a >= g || b >= g || a == b {
                return Err(GlmError::InvalidDesign(format!(
                    "interaction ({}, {}) does not reference two distinct groups of {g}",
                    a + 1,
                    b + 1
                )));
            }
            let pair = (a.min(b), a.max(b));
            if seen.contains(&pair) {
                return Err(GlmError::InvalidDesign(format!(
                    "duplicate interaction ({}, {})",
                    pair.0 + 1,
                    pair.1 + 1
                )));
            }
            seen.push(pair);
        }
        Ok(Self {
            grouping,
            interactions: seen,
        })
    }

    pub fn n_groups(&self) -> usize {
        self.grouping.groups.len()
    }

    pub fn n_terms(&self) -> usize {
        1 + self.n_groups() + self.interactions.len()
    }

    pub fn term_names(&self) -> Vec<String> {
        let names: Vec<&str> = self.grouping.groups.iter().map(|g| g.name.as_str()).collect();
        std::iter::once("intercept".to_string())
            .chain(names.iter().map(|n| n.to_string()))
            .chain(
                self.interactions
                    .iter()
                    .map(|&(a, b)| format!("{}:{}", names[a], names[b])),
            )
            .collect()
    }

    /// The two interaction pairs used for a questionnaire-shaped grouping
    /// (5 groups sized 5/5/2/2/1): group 1 with group 2 and group 1 with
    /// group 4. Empty otherwise.
    pub fn default_interactions(grouping: &ProblemGrouping) -> Vec<(usize, usize)> {
        if grouping.sizes() == crate::survey::DEFAULT_FAMILY_SIZES {
            vec![(0, 1), (0, 3)]
        } else {
            Vec::new()
        }
    }
}

/// Per-record group indicators plus the response. The model matrix is built
/// from the indicators on demand so counterfactual edits stay consistent with
/// the interaction columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub spec: DesignSpec,
    /// Records x groups.
    pub indicators: Vec<Vec<bool>>,
    /// Poor-call label per record.
    pub response: Vec<bool>,
}

impl Design {
    pub fn n_records(&self) -> usize {
        self.response.len()
    }

    /// Model-matrix row: intercept, group indicators, interaction products.
    pub fn row(&self, indicators: &[bool], out: &mut [f64]) {
        out[0] = 1.0;
        let g = indicators.len();
        for (j, &b) in indicators.iter().enumerate() {
            out[1 + j] = f64::from(u8::from(b));
        }
        for (i, &(a, b)) in self.spec.interactions.iter().enumerate() {
            out[1 + g + i] = f64::from(u8::from(indicators[a] && indicators[b]));
        }
    }

    /// Column means of the model matrix.
    pub fn column_means(&self) -> Vec<f64> {
        let m = self.spec.n_terms();
        let mut sums = vec![0.0; m];
        let mut row = vec![0.0; m];
        for ind in &self.indicators {
            self.row(ind, &mut row);
            for (s, v) in sums.iter_mut().zip(&row) {
                *s += v;
            }
        }
        let n = self.n_records().max(1) as f64;
        sums.into_iter().map(|s| s / n).collect()
    }
}

/// Group indicator = OR of the group's member tokens; response = poor call.
pub fn build_design(ds: &SurveyDataset, spec: &DesignSpec) -> Result<Design, GlmError> {
    let vocab = ds.vocabulary();
    let mut members = Vec::with_capacity(spec.n_groups());
    for group in &spec.grouping.groups {
        let idx: Vec<usize> = group.tokens.iter().filter_map(|t| vocab.index_of(t)).collect();
        if idx.is_empty() {
            return Err(GlmError::EmptyGroup(group.name.clone()));
        }
        members.push(idx);
    }
    let indicators = ds
        .records()
        .iter()
        .map(|r| members.iter().map(|m| m.iter().any(|&t| r.tokens[t])).collect())
        .collect();
    Ok(Design {
        spec: spec.clone(),
        indicators,
        response: ds.poor_labels(),
    })
}
