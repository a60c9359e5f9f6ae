//! Latent-trait survey generator with planted ground truth.
//!
//! Each token is a thresholded latent trait `z = L f + e` with independent
//! standard-normal factors `f` and residual variance `1 - communality`.
//! Poor calls are drawn from a logistic model on problem-group indicators
//! (a group is active when any of its tokens is set). Ratings are synthesised
//! only to respect the survey conventions; they carry no extra signal.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::GeneratorError;
use crate::rng;
use crate::survey::{CallRecord, SurveyDataset, TokenVocabulary, DEFAULT_TOKENS};

const CHUNK: usize = 4096;
const GEN_DOMAIN: u64 = 1;
const MC_DOMAIN: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub a: usize,
    pub b: usize,
    pub coef: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmCoefficients {
    pub intercept: f64,
    pub groups: Vec<f64>,
    #[serde(default)]
    pub interactions: Vec<Interaction>,
}

impl GlmCoefficients {
    pub fn logit(&self, active: &[bool]) -> f64 {
        let mut eta = self.intercept;
        for (g, b) in active.iter().zip(&self.groups) {
            if *g {
                eta += b;
            }
        }
        for it in &self.interactions {
            if active[it.a] && active[it.b] {
                eta += it.coef;
            }
        }
        eta
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationModel {
    pub base_mean_s: f64,
    /// Log-scale standard deviation of the lognormal.
    pub sigma: f64,
    /// Multiplicative penalty on the mean for each active group.
    pub group_penalties: Vec<f64>,
}

fn default_response_rate() -> f64 {
    1.0
}

fn default_truth_mc() -> usize {
    200_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    /// Token slugs; defaults to the standard vocabulary when it has the
    /// right length, otherwise `t0, t1, ...`.
    #[serde(default)]
    pub tokens: Option<Vec<String>>,
    /// Tokens x factors.
    pub loadings: Vec<Vec<f64>>,
    pub thresholds: Vec<f64>,
    /// Planted group of each token (`None` = token belongs to no group).
    pub group_partition: Vec<Option<usize>>,
    pub glm: GlmCoefficients,
    pub duration: DurationModel,
    pub n: usize,
    pub seed: u64,
    /// Probability that a user shown the questionnaire submits it.
    #[serde(default = "default_response_rate")]
    pub ptq_response_rate: f64,
    /// Monte Carlo draws for the ground-truth group impacts.
    #[serde(default = "default_truth_mc")]
    pub truth_mc: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpactTruth {
    pub group: usize,
    pub pcr: f64,
    pub pcr_fixed: f64,
    pub reduction: f64,
    pub mc_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub tokens: Vec<String>,
    pub true_rho: Vec<Vec<f64>>,
    pub partition: Vec<Option<usize>>,
    /// Member token names per planted group.
    pub groups: Vec<Vec<String>>,
    pub factor_count: usize,
    pub prevalences: Vec<f64>,
    pub group_impacts: Vec<ImpactTruth>,
}

impl GeneratorSpec {
    pub fn n_tokens(&self) -> usize {
        self.loadings.len()
    }

    pub fn n_factors(&self) -> usize {
        self.loadings.first().map_or(0, Vec::len)
    }

    pub fn n_groups(&self) -> usize {
        self.glm.groups.len()
    }

    pub fn token_names(&self) -> Vec<String> {
        match &self.tokens {
            Some(t) => t.clone(),
            None if self.n_tokens() == DEFAULT_TOKENS.len() => {
                DEFAULT_TOKENS.iter().map(|(s, _)| s.to_string()).collect()
            }
            None => (0..self.n_tokens()).map(|i| format!("t{i}")).collect(),
        }
    }

    pub fn communalities(&self) -> Vec<f64> {
        self.loadings
            .iter()
            .map(|row| row.iter().map(|l| l * l).sum())
            .collect()
    }

    pub fn validate(&self) -> Result<(), GeneratorError> {
        let p = self.n_tokens();
        let k = self.n_factors();
        let bad = |m: String| Err(GeneratorError::Infeasible(m));
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if p == 0 {
            return bad("no tokens".into());
        }
        if self.loadings.iter().any(|r| r.len() != k) {
            return bad("ragged loading matrix".into());
        }
        if self.loadings.iter().flatten().any(|l| !l.is_finite()) {
            return bad("non-finite loading".into());
        }
        for (j, h) in self.communalities().iter().enumerate() {
            if *h > 1.0 {
                return bad(format!("communality {h:.4} > 1 for token {j}"));
            }
        }
        if self.thresholds.len() != p || self.group_partition.len() != p {
            return bad("thresholds and group_partition must have one entry per token".into());
        }
        if self.thresholds.iter().any(|t| t.is_nan()) {
            return bad("NaN threshold".into());
        }
        let g = self.n_groups();
        if self.group_partition.iter().flatten().any(|&x| x >= g) {
            return bad("group_partition references a missing group".into());
        }
        for it in &self.glm.interactions {
            if it.a >= g || it.b >= g || it.a == it.b {
                return bad(format!("invalid interaction ({}, {})", it.a, it.b));
            }
        }
        if self.duration.group_penalties.len() != g {
            return bad("one duration penalty per group required".into());
        }
        let d = &self.duration;
        if d.base_mean_s.is_nan() || d.base_mean_s <= 0.0 || d.sigma.is_nan() || d.sigma < 0.0 {
            return bad("duration model needs base_mean_s > 0 and sigma >= 0".into());
        }
        if self.duration.group_penalties.iter().any(|p| p.is_nan() || *p <= 0.0) {
            return bad("duration penalties must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.ptq_response_rate) {
            return bad("ptq_response_rate outside [0, 1]".into());
        }
        if let Some(t) = &self.tokens {
            if t.len() != p {
                return bad("token names do not match the loading matrix".into());
            }
        }
        Ok(())
    }

    pub fn true_rho(&self) -> Vec<Vec<f64>> {
        let p = self.n_tokens();
        (0..p)
            .map(|i| {
                (0..p)
                    .map(|j| {
                        if i == j {
                            1.0
                        } else {
                            self.loadings[i].iter().zip(&self.loadings[j]).map(|(a, b)| a * b).sum()
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Draws one token vector from the latent model.
    fn draw_tokens(&self, rng: &mut ChaCha8Rng, residual_sd: &[f64], factors: &mut [f64], out: &mut [bool]) {
        for f in factors.iter_mut() {
            *f = rng.sample(StandardNormal);
        }
        for (j, bit) in out.iter_mut().enumerate() {
            let common: f64 = self.loadings[j].iter().zip(factors.iter()).map(|(l, f)| l * f).sum();
            let e: f64 = rng.sample(StandardNormal);
            *bit = common + residual_sd[j] * e > self.thresholds[j];
        }
    }

    fn active_groups(&self, tokens: &[bool], out: &mut [bool]) {
        out.iter_mut().for_each(|g| *g = false);
        for (t, g) in tokens.iter().zip(&self.group_partition) {
            if let (true, Some(g)) = (*t, g) {
                out[*g] = true;
            }
        }
    }

    fn residual_sd(&self) -> Vec<f64> {
        self.communalities().iter().map(|h| (1.0 - h).max(0.0).sqrt()).collect()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn generate_chunk(spec: &GeneratorSpec, chunk: usize, residual_sd: &[f64]) -> Vec<CallRecord> {
    let start = chunk * CHUNK;
    let end = (start + CHUNK).min(spec.n);
    let mut rng = rng::substream(spec.seed, GEN_DOMAIN, chunk as u64);
    let mut factors = vec![0.0; spec.n_factors()];
    let mut active = vec![false; spec.n_groups()];
    let mut out = Vec::with_capacity(end - start);
    for i in start..end {
        let mut tokens = vec![false; spec.n_tokens()];
        spec.draw_tokens(&mut rng, residual_sd, &mut factors, &mut tokens);
        spec.active_groups(&tokens, &mut active);
        let poor = rng.gen::<f64>() < sigmoid(spec.glm.logit(&active));
        let any = tokens.iter().any(|&t| t);
        let rating: u8 = if poor {
            rng.gen_range(1..=2)
        } else if any {
            rng.gen_range(3..=4)
        } else {
            rng.gen_range(3..=5)
        };
        let responded = rng.gen::<f64>() < spec.ptq_response_rate;
        let ptq_submitted = rating < 5 && responded;
        let mean = active
            .iter()
            .zip(&spec.duration.group_penalties)
            .filter(|(a, _)| **a)
            .fold(spec.duration.base_mean_s, |m, (_, p)| m * p);
        let sigma = spec.duration.sigma;
        let duration_s = if sigma > 0.0 {
            LogNormal::new(mean.ln() - sigma * sigma / 2.0, sigma)
                .expect("validated duration model")
                .sample(&mut rng)
        } else {
            mean
        };
        if !ptq_submitted {
            tokens.iter_mut().for_each(|t| *t = false);
        }
        out.push(CallRecord {
            call_id: format!("c{i:08}"),
            rating,
            duration_s,
            tokens,
            ptq_submitted,
        });
    }
    out
}

/// Generates a dataset and its ground truth. Identical for a fixed spec
/// regardless of thread count.
pub fn generate(spec: &GeneratorSpec) -> Result<(SurveyDataset, GroundTruth), GeneratorError> {
    spec.validate()?;
    let residual_sd = spec.residual_sd();
    let chunks = spec.n.div_ceil(CHUNK);
    let records: Vec<CallRecord> = (0..chunks)
        .into_par_iter()
        .map(|c| generate_chunk(spec, c, &residual_sd))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    let names = spec.token_names();
    let vocabulary = TokenVocabulary::from_names(&names).map_err(|e| GeneratorError::Infeasible(e.to_string()))?;
    let ds = SurveyDataset::new(
        vocabulary,
        records,
        vec![format!("generate n={} seed={}", spec.n, spec.seed)],
    )
    .map_err(|e| GeneratorError::Infeasible(e.to_string()))?;
    let group_impacts = (0..spec.n_groups())
        .map(|g| ground_truth_impact(spec, g, spec.truth_mc, spec.seed))
        .collect::<Result<Vec<_>, _>>()?;
    let groups = (0..spec.n_groups())
        .map(|g| {
            spec.group_partition
                .iter()
                .enumerate()
                .filter(|(_, p)| **p == Some(g))
                .map(|(j, _)| names[j].clone())
                .collect()
        })
        .collect();
    let truth = GroundTruth {
        prevalences: spec.thresholds.iter().map(|t| crate::normal::sf(*t)).collect(),
        tokens: names,
        true_rho: spec.true_rho(),
        partition: spec.group_partition.clone(),
        groups,
        factor_count: spec.n_factors(),
        group_impacts,
    };
    Ok((ds, truth))
}

/// Monte Carlo relative reduction in poor call rate when `group`'s tokens
/// are forced absent. Uses the exact logistic probability per draw (rather
/// than a Bernoulli outcome) and common random numbers for both arms.
pub fn ground_truth_impact(
    spec: &GeneratorSpec,
    group: usize,
    n_mc: usize,
    seed: u64,
) -> Result<ImpactTruth, GeneratorError> {
    spec.validate()?;
    if group >= spec.n_groups() {
        return Err(GeneratorError::Infeasible(format!("no group {group}")));
    }
    let n_mc = n_mc.max(1);
    let residual_sd = spec.residual_sd();
    let chunks = n_mc.div_ceil(CHUNK);
    // per chunk: sum p, sum q, sum p^2, sum q^2, sum pq
    let sums: Vec<[f64; 5]> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng::substream(seed, MC_DOMAIN, c as u64);
            let mut factors = vec![0.0; spec.n_factors()];
            let mut tokens = vec![false; spec.n_tokens()];
            let mut active = vec![false; spec.n_groups()];
            let mut s = [0.0; 5];
            for _ in c * CHUNK..((c + 1) * CHUNK).min(n_mc) {
                spec.draw_tokens(&mut rng, &residual_sd, &mut factors, &mut tokens);
                spec.active_groups(&tokens, &mut active);
                let p = sigmoid(spec.glm.logit(&active));
                active[group] = false;
                let q = sigmoid(spec.glm.logit(&active));
                s[0] += p;
                s[1] += q;
                s[2] += p * p;
                s[3] += q * q;
                s[4] += p * q;
            }
            s
        })
        .collect();
    let mut t = [0.0; 5];
    for s in &sums {
        for (a, b) in t.iter_mut().zip(s) {
            *a += b;
        }
    }
    let n = n_mc as f64;
    let (mp, mq) = (t[0] / n, t[1] / n);
    let ratio = mq / mp;
    // delta method on 1 - mean(q)/mean(p)
    let var_q = t[3] / n - mq * mq;
    let var_p = t[2] / n - mp * mp;
    let cov = t[4] / n - mp * mq;
    let var_d = (var_q - 2.0 * ratio * cov + ratio * ratio * var_p).max(0.0);
    Ok(ImpactTruth {
        group,
        pcr: mp,
        pcr_fixed: mq,
        reduction: 1.0 - ratio,
        mc_se: (var_d / n).sqrt() / mp,
    })
}

fn table_one_partition() -> Vec<Option<usize>> {
    let mut part = Vec::new();
    for (g, size) in crate::survey::DEFAULT_FAMILY_SIZES.iter().enumerate() {
        part.extend(std::iter::repeat_n(Some(g), *size));
    }
    part
}

/// A 15-token world shaped like the standard questionnaire: five latent
/// factors driving groups of 5/5/2/2/1 tokens with dominant loadings in
/// 0.65..0.85.
///
/// A factor with a single indicator produces no token correlation and is
/// invisible to any correlation-based method, so the reliability factor
/// also carries secondary loadings (0.4) on interruptions, distorted speech,
/// stopped video and frozen video. Those tokens stay dominated by their own
/// factor.
pub fn table_one_world(n: usize, seed: u64) -> GeneratorSpec {
    table_one_world_with(
        n,
        seed,
        &[
            0.80, 0.70, 0.65, 0.75, 0.85, // audio quality
            0.85, 0.75, 0.65, 0.80, 0.70, // video quality
            0.80, 0.75, // one-way video
            0.80, 0.75, // one-way audio
            0.80, // reliability
        ],
    )
}

/// Tokens carrying a secondary loading on the reliability factor.
pub const RELIABILITY_SECONDARY: [(usize, f64); 4] = [(0, 0.4), (1, 0.4), (6, 0.4), (9, 0.4)];

/// [`table_one_world`] with caller-chosen dominant loadings.
pub fn table_one_world_with(n: usize, seed: u64, dominant: &[f64; 15]) -> GeneratorSpec {
    let partition = table_one_partition();
    let mut loadings = vec![vec![0.0; 5]; 15];
    for (j, row) in loadings.iter_mut().enumerate() {
        row[partition[j].unwrap()] = dominant[j];
    }
    for (j, l) in RELIABILITY_SECONDARY {
        loadings[j][4] = l;
    }
    GeneratorSpec {
        tokens: None,
        loadings,
        thresholds: vec![
            1.2, 1.0, 1.3, 1.4, 0.9, // audio
            1.3, 1.1, 1.5, 1.0, 0.9, // video
            1.3, 1.4, // one-way video
            1.2, 1.4, // one-way audio
            1.3, // reliability
        ],
        group_partition: partition,
        glm: GlmCoefficients {
            intercept: -2.5,
            groups: vec![1.2, 0.9, 1.4, 1.9, 1.0],
            interactions: vec![
                Interaction { a: 0, b: 1, coef: -0.6 },
                Interaction { a: 0, b: 3, coef: -0.5 },
            ],
        },
        duration: DurationModel {
            base_mean_s: 300.0,
            sigma: 0.8,
            group_penalties: vec![0.95, 0.9, 0.7, 0.6, 0.5],
        },
        n,
        seed,
        ptq_response_rate: 1.0,
        truth_mc: 200_000,
    }
}

/// One latent factor driving all `p` tokens with the same loading and threshold.
pub fn single_factor_world(p: usize, loading: f64, threshold: f64, n: usize, seed: u64) -> GeneratorSpec {
    GeneratorSpec {
        tokens: None,
        loadings: vec![vec![loading]; p],
        thresholds: vec![threshold; p],
        group_partition: vec![Some(0); p],
        glm: GlmCoefficients {
            intercept: -2.0,
            groups: vec![1.5],
            interactions: vec![],
        },
        duration: DurationModel {
            base_mean_s: 300.0,
            sigma: 0.5,
            group_penalties: vec![0.8],
        },
        n,
        seed,
        ptq_response_rate: 1.0,
        truth_mc: 20_000,
    }
}
