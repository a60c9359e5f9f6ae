use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{io_err, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Pcr,
    Acd,
    Both,
}

/// Settings shared by every analysis command. Loaded from a JSON file and
/// overridden field by field by command-line flags. Fields that cannot
/// change results (output directory, threads, verbosity) are left out of
/// the serialized form embedded in reports.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub metric: Option<Metric>,
    pub fix_value_pcr: Option<f64>,
    pub fix_value_acd: Option<f64>,
    pub strict_delta: bool,
    pub balanced: bool,
    pub min_positives: Option<usize>,
    pub pa_reps: Option<usize>,
    pub pa_quantile: Option<f64>,
    pub loading_threshold: Option<f64>,
    pub n_factors: Option<usize>,
    /// 1-based group pairs.
    pub interactions: Option<Vec<[usize; 2]>>,
    /// Forward AIC selection of at most this many interaction pairs.
    pub select_interactions: Option<usize>,
    pub bootstrap: Option<usize>,
    pub bootstrap_refit: bool,
    #[serde(skip_serializing)]
    pub threads: Option<usize>,
    #[serde(skip_serializing)]
    pub verbosity: u8,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
    }

    /// `over` wins wherever it sets a value.
    pub fn merge(self, over: RunConfig) -> Self {
        Self {
            input: over.input.or(self.input),
            out: over.out.or(self.out),
            seed: over.seed.or(self.seed),
            metric: over.metric.or(self.metric),
            fix_value_pcr: over.fix_value_pcr.or(self.fix_value_pcr),
            fix_value_acd: over.fix_value_acd.or(self.fix_value_acd),
            strict_delta: over.strict_delta || self.strict_delta,
            balanced: over.balanced || self.balanced,
            min_positives: over.min_positives.or(self.min_positives),
            pa_reps: over.pa_reps.or(self.pa_reps),
            pa_quantile: over.pa_quantile.or(self.pa_quantile),
            loading_threshold: over.loading_threshold.or(self.loading_threshold),
            n_factors: over.n_factors.or(self.n_factors),
            interactions: over.interactions.or(self.interactions),
            select_interactions: over.select_interactions.or(self.select_interactions),
            bootstrap: over.bootstrap.or(self.bootstrap),
            bootstrap_refit: over.bootstrap_refit || self.bootstrap_refit,
            threads: over.threads.or(self.threads),
            verbosity: over.verbosity.max(self.verbosity),
        }
    }

    pub fn input(&self) -> Result<&Path, CliError> {
        self.input
            .as_deref()
            .ok_or_else(|| CliError::Validation("missing input path".into()))
    }

    pub fn out(&self) -> Result<&Path, CliError> {
        self.out
            .as_deref()
            .ok_or_else(|| CliError::Validation("missing output directory".into()))
    }

    /// The seed, or an error naming the step that needs it.
    pub fn seed_for(&self, step: &str) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| CliError::Validation(format!("a seed is required for {step}")))
    }

    pub fn metric(&self) -> Metric {
        self.metric.unwrap_or(Metric::Both)
    }

    pub fn bootstrap(&self) -> usize {
        self.bootstrap.unwrap_or(200)
    }

    /// Checks ranges that the library would otherwise reject deep inside a stage.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Validation(m));
        if let Some(q) = self.pa_quantile {
            if !(q > 0.0 && q < 1.0) {
                return bad(format!("pa_quantile must lie in (0, 1), got {q}"));
            }
        }
        if let Some(t) = self.loading_threshold {
            if !(t > 0.0 && t <= 1.0) {
                return bad(format!("loading_threshold must lie in (0, 1], got {t}"));
            }
        }
        if let Some(pairs) = &self.interactions {
            if pairs.iter().any(|p| p[0] == 0 || p[1] == 0) {
                return bad("interaction groups are numbered from 1".into());
            }
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1".into());
        }
        Ok(())
    }
}

/// Parses `1:2,1:4` into group pairs.
pub fn parse_pairs(s: &str) -> Result<Vec<[usize; 2]>, String> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (a, b) = p.split_once(':').ok_or_else(|| format!("expected a:b, got `{p}`"))?;
            let a = a.trim().parse().map_err(|e| format!("`{p}`: {e}"))?;
            let b = b.trim().parse().map_err(|e| format!("`{p}`: {e}"))?;
            Ok([a, b])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file: RunConfig = serde_json::from_str(r#"{"seed": 3, "pa_reps": 50, "strict_delta": true}"#).unwrap();
        let flags = RunConfig {
            seed: Some(9),
            ..Default::default()
        };
        let merged = file.merge(flags);
        assert_eq!(merged.seed, Some(9));
        assert_eq!(merged.pa_reps, Some(50));
        assert!(merged.strict_delta);
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"sede": 3}"#).is_err());
    }

    #[test]
    fn missing_seed_is_an_error() {
        let err = RunConfig::default().seed_for("parallel analysis").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("parallel analysis"));
    }

    #[test]
    fn pairs() {
        assert_eq!(parse_pairs("1:2, 1:4").unwrap(), vec![[1, 2], [1, 4]]);
        assert!(parse_pairs("1-2").is_err());
    }

    #[test]
    fn serialized_form_skips_runtime_fields() {
        let cfg = RunConfig {
            out: Some("x".into()),
            threads: Some(4),
            seed: Some(1),
            ..Default::default()
        };
        let v = serde_json::to_value(&cfg).unwrap();
        assert!(v.get("threads").is_none());
        assert!(v.get("out").is_none());
        assert_eq!(v["seed"], 1);
    }
}
