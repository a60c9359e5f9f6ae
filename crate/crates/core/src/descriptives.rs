//! Token response rates, information gain and token co-occurrence.

use serde::Serialize;

use crate::error::StatsError;
use crate::survey::SurveyDataset;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TokenFrequency {
    pub token: String,
    pub count_all: usize,
    pub rate_all_rated: f64,
    pub count_poor: usize,
    /// `None` when the dataset holds no poor calls.
    pub rate_poor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyReport {
    pub n_all: usize,
    pub n_poor: usize,
    pub tokens: Vec<TokenFrequency>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Population {
    AllRated,
    Poor,
}

impl FrequencyReport {
    /// Token order by descending rate in `population`; ties keep vocabulary order.
    pub fn order_by(&self, population: Population) -> Vec<usize> {
        let key = |i: usize| match population {
            Population::AllRated => self.tokens[i].rate_all_rated,
            Population::Poor => self.tokens[i].rate_poor.unwrap_or(0.0),
        };
        let mut idx: Vec<usize> = (0..self.tokens.len()).collect();
        idx.sort_by(|&a, &b| key(b).total_cmp(&key(a)).then(a.cmp(&b)));
        idx
    }
}

pub fn token_frequencies(ds: &SurveyDataset) -> Result<FrequencyReport, StatsError> {
    if ds.is_empty() {
        return Err(StatsError::Empty);
    }
    let n_all = ds.len();
    let n_poor = ds.poor_count();
    let tokens = ds
        .vocabulary()
        .names()
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let count_all = ds.records().iter().filter(|r| r.tokens[j]).count();
            let count_poor = ds.records().iter().filter(|r| r.poor_call() && r.tokens[j]).count();
            TokenFrequency {
                token: name.clone(),
                count_all,
                rate_all_rated: count_all as f64 / n_all as f64,
                count_poor,
                rate_poor: (n_poor > 0).then(|| count_poor as f64 / n_poor as f64),
            }
        })
        .collect();
    Ok(FrequencyReport { n_all, n_poor, tokens })
}

fn plogp(p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        p * p.log2()
    }
}

/// Shannon entropy in bits of a binary variable with `ones` of `n` set.
pub fn binary_entropy(ones: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = ones as f64 / n as f64;
    -(plogp(p) + plogp(1.0 - p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InformationGain {
    /// `H(y) - H(y|x)` in bits.
    pub bits: f64,
    pub entropy_y: f64,
    /// `bits / H(y)`; `None` when `y` is constant.
    pub fraction: Option<f64>,
}

/// Information gain of `y` from observing `x`.
pub fn information_gain(x: &[bool], y: &[bool]) -> Result<InformationGain, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.is_empty() {
        return Err(StatsError::Empty);
    }
    let n = x.len();
    let mut counts = [[0usize; 2]; 2];
    for (&a, &b) in x.iter().zip(y) {
        counts[a as usize][b as usize] += 1;
    }
    let h_y = binary_entropy(counts[0][1] + counts[1][1], n);
    let h_y_given_x: f64 = counts
        .iter()
        .map(|c| {
            let nx = c[0] + c[1];
            nx as f64 / n as f64 * binary_entropy(c[1], nx)
        })
        .sum();
    let bits = (h_y - h_y_given_x).max(0.0);
    Ok(InformationGain {
        bits,
        entropy_y: h_y,
        fraction: (h_y > 0.0).then(|| bits / h_y),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JaccardMatrix {
    pub tokens: Vec<String>,
    /// Row-major, symmetric, zero diagonal.
    pub values: Vec<Vec<f64>>,
    /// Pairs whose union was empty (reported as 0).
    pub undefined_pairs: Vec<(usize, usize)>,
}

impl JaccardMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }
}

pub fn jaccard_matrix(ds: &SurveyDataset) -> Result<JaccardMatrix, StatsError> {
    let p = ds.n_tokens();
    if p < 2 {
        return Err(StatsError::Invalid(format!("need at least 2 tokens, got {p}")));
    }
    let cols: Vec<_> = (0..p).map(|j| ds.token_bits(j)).collect();
    let mut values = vec![vec![0.0; p]; p];
    let mut undefined_pairs = Vec::new();
    for i in 0..p {
        for j in i + 1..p {
            let union = cols[i].or_count(&cols[j]);
            let v = if union == 0 {
                undefined_pairs.push((i, j));
                0.0
            } else {
                cols[i].and_count(&cols[j]) as f64 / union as f64
            };
            values[i][j] = v;
            values[j][i] = v;
        }
    }
    Ok(JaccardMatrix {
        tokens: ds.vocabulary().names().to_vec(),
        values,
        undefined_pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survey::{CallRecord, TokenVocabulary};

    fn ds_from_columns(cols: &[Vec<bool>], poor: &[bool]) -> SurveyDataset {
        let n = poor.len();
        let names: Vec<String> = (0..cols.len()).map(|i| format!("t{i}")).collect();
        let records = (0..n)
            .map(|r| CallRecord {
                call_id: format!("c{r}"),
                rating: if poor[r] { 1 } else { 4 },
                duration_s: 10.0,
                tokens: cols.iter().map(|c| c[r]).collect(),
                ptq_submitted: true,
            })
            .collect();
        SurveyDataset::new(TokenVocabulary::from_names(&names).unwrap(), records, vec![]).unwrap()
    }

    #[test]
    fn frequencies_hand_counts() {
        // 10 calls, 4 poor; token on 3 calls overall, 1 of them poor
        let poor: Vec<bool> = (0..10).map(|i| i < 4).collect();
        let t0: Vec<bool> = (0..10).map(|i| i == 0 || i == 5 || i == 6).collect();
        let all = vec![true; 10];
        let none = vec![false; 10];
        let rep = token_frequencies(&ds_from_columns(&[t0, all, none], &poor)).unwrap();
        assert_eq!(rep.n_poor, 4);
        assert!((rep.tokens[0].rate_all_rated - 0.3).abs() < 1e-15);
        assert!((rep.tokens[0].rate_poor.unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(rep.tokens[1].rate_all_rated, 1.0);
        assert_eq!(rep.tokens[2].rate_all_rated, 0.0);
        assert_eq!(rep.order_by(Population::AllRated), vec![1, 0, 2]);
    }

    #[test]
    fn frequencies_without_poor_calls_are_undefined() {
        let rep = token_frequencies(&ds_from_columns(&[vec![true, false]], &[false, false])).unwrap();
        assert_eq!(rep.tokens[0].rate_poor, None);
    }

    #[test]
    fn information_gain_examples() {
        let y = [true, true, false, false];
        let ig = information_gain(&y, &y).unwrap();
        assert!((ig.bits - 1.0).abs() < 1e-15);
        assert_eq!(ig.fraction, Some(1.0));

        let x = [true, false, true, false];
        assert!(information_gain(&x, &y).unwrap().bits.abs() < 1e-15);

        // y=[1,1,0,0], x=[1,0,0,0]: 1 - 0.75 * H(1/3)
        let x = [true, false, false, false];
        let h13 = -(1.0 / 3.0 * (1.0f64 / 3.0).log2() + 2.0 / 3.0 * (2.0f64 / 3.0).log2());
        let expected = 1.0 - 0.75 * h13;
        let got = information_gain(&x, &y).unwrap().bits;
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 0.3113).abs() < 1e-4);
    }

    #[test]
    fn information_gain_length_mismatch() {
        assert_eq!(
            information_gain(&[true], &[true, false]).unwrap_err(),
            StatsError::LengthMismatch(1, 2)
        );
    }

    #[test]
    fn constant_target_has_no_fraction() {
        let ig = information_gain(&[true, false], &[true, true]).unwrap();
        assert_eq!(ig.bits, 0.0);
        assert_eq!(ig.fraction, None);
    }

    #[test]
    fn jaccard_examples() {
        let a = vec![true, true, false, false];
        let b = vec![true, false, true, false];
        let d = vec![false, false, false, true];
        let e = vec![false; 4];
        let j = jaccard_matrix(&ds_from_columns(&[a.clone(), a, b, d, e.clone(), e], &[false; 4])).unwrap();
        assert_eq!(j.get(0, 1), 1.0);
        assert!((j.get(0, 2) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(j.get(0, 3), 0.0);
        assert_eq!(j.get(4, 5), 0.0);
        assert_eq!(j.undefined_pairs, vec![(4, 5)]);
        for i in 0..6 {
            assert_eq!(j.get(i, i), 0.0);
            for k in 0..6 {
                assert_eq!(j.get(i, k), j.get(k, i));
            }
        }
    }

    #[test]
    fn jaccard_needs_two_tokens() {
        assert!(jaccard_matrix(&ds_from_columns(&[vec![true]], &[true])).is_err());
    }
}
