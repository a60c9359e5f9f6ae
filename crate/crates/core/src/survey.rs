//! Survey data model: token vocabulary, call records, CSV ingestion and the
//! resampling conventions used by the analyses.
//!
//! A call is *poor* when it was rated 1 or 2. That label and
//! `any_token_reported` are always derived from the record, never stored.

use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::bits::BitColumn;
use crate::error::SurveyError;
use crate::rng;

const TOKEN_PREFIX: &str = "token_";
const BASE_COLUMNS: [&str; 4] = ["call_id", "rating", "duration_s", "ptq_submitted"];

/// The 15 problem tokens of the end-of-call questionnaire, grouped as
/// audio quality (5), video quality (5), one-way video (2), one-way audio (2)
/// and reliability (1).
pub const DEFAULT_TOKENS: [(&str, &str); 15] = [
    ("audio.interrupting", "We kept interrupting each other"),
    ("audio.distorted_speech", "Speech was not natural or sounded distorted"),
    ("audio.low_volume", "Volume was low"),
    ("audio.echo", "I heard echo in the call"),
    ("audio.noise", "I heard noise in the call"),
    ("video.too_dark", "The other side was too dark"),
    ("video.stopped", "Video stopped unexpectedly"),
    ("video.av_sync", "Video was ahead or behind audio"),
    ("video.poor_quality", "Image quality is poor"),
    ("video.freeze", "Video kept freezing"),
    ("oneway.no_video_recv", "I could not see any video"),
    ("oneway.no_video_sent", "The other side could not see my video"),
    ("oneway.no_audio_recv", "I could not hear any sound"),
    ("oneway.no_audio_sent", "The other side could not hear my sound"),
    ("reliability.drop", "The call ended unexpectedly"),
];

/// Sizes of the default token families, in vocabulary order.
pub const DEFAULT_FAMILY_SIZES: [usize; 5] = [5, 5, 2, 2, 1];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenVocabulary {
    names: Vec<String>,
    display_text: Vec<String>,
}

impl TokenVocabulary {
    pub fn new(names: Vec<String>, display_text: Vec<String>) -> Result<Self, SurveyError> {
        if names.len() != display_text.len() {
            return Err(SurveyError::Vocabulary(
                "names and display text differ in length".into(),
            ));
        }
        let mut seen = HashSet::new();
        for n in &names {
            if n.is_empty() {
                return Err(SurveyError::Vocabulary("empty token name".into()));
            }
            if !seen.insert(n.as_str()) {
                return Err(SurveyError::Vocabulary(format!("duplicate token `{n}`")));
            }
        }
        Ok(Self { names, display_text })
    }

    /// Vocabulary whose display text is the slug itself, or the default
    /// questionnaire text when the slug is a known token.
    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self, SurveyError> {
        let display = names
            .iter()
            .map(|n| {
                let n = n.as_ref();
                DEFAULT_TOKENS
                    .iter()
                    .find(|(slug, _)| *slug == n)
                    .map_or_else(|| n.to_string(), |(_, text)| text.to_string())
            })
            .collect();
        Self::new(names.iter().map(|n| n.as_ref().to_string()).collect(), display)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn display_text(&self) -> &[String] {
        &self.display_text
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    fn retain(&self, keep: &[usize]) -> Self {
        Self {
            names: keep.iter().map(|&i| self.names[i].clone()).collect(),
            display_text: keep.iter().map(|&i| self.display_text[i].clone()).collect(),
        }
    }
}

impl Default for TokenVocabulary {
    fn default() -> Self {
        Self {
            names: DEFAULT_TOKENS.iter().map(|(s, _)| s.to_string()).collect(),
            display_text: DEFAULT_TOKENS.iter().map(|(_, t)| t.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub call_id: String,
    pub rating: u8,
    pub duration_s: f64,
    pub tokens: Vec<bool>,
    pub ptq_submitted: bool,
}

impl CallRecord {
    pub fn poor_call(&self) -> bool {
        self.rating <= 2
    }

    pub fn any_token_reported(&self) -> bool {
        self.tokens.iter().any(|&t| t)
    }

    /// Checks the record-level invariants; `line` is used for error reporting.
    pub fn validate(&self, line: u64) -> Result<(), SurveyError> {
        if !(1..=5).contains(&self.rating) {
            return Err(SurveyError::RatingOutOfRange {
                line,
                rating: self.rating as i64,
            });
        }
        if !self.duration_s.is_finite() || self.duration_s < 0.0 {
            return Err(SurveyError::NegativeDuration {
                line,
                duration: self.duration_s,
            });
        }
        if self.rating == 5 && self.any_token_reported() {
            return Err(SurveyError::TokensOnRatingFive { line });
        }
        if self.rating == 5 && self.ptq_submitted {
            return Err(SurveyError::Invariant {
                line,
                message: "ptq_submitted on rating 5".into(),
            });
        }
        if self.any_token_reported() && !self.ptq_submitted {
            return Err(SurveyError::Invariant {
                line,
                message: "tokens present without ptq_submitted".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyDataset {
    vocabulary: TokenVocabulary,
    records: Vec<CallRecord>,
    /// Lineage entries, oldest first.
    provenance: Vec<String>,
}

impl SurveyDataset {
    pub fn new(
        vocabulary: TokenVocabulary,
        records: Vec<CallRecord>,
        provenance: Vec<String>,
    ) -> Result<Self, SurveyError> {
        for (i, r) in records.iter().enumerate() {
            let line = i as u64 + 1;
            if r.tokens.len() != vocabulary.len() {
                return Err(SurveyError::Invariant {
                    line,
                    message: format!(
                        "record has {} tokens, vocabulary has {}",
                        r.tokens.len(),
                        vocabulary.len()
                    ),
                });
            }
            r.validate(line)?;
        }
        Ok(Self {
            vocabulary,
            records,
            provenance,
        })
    }

    pub fn vocabulary(&self) -> &TokenVocabulary {
        &self.vocabulary
    }

    pub fn records(&self) -> &[CallRecord] {
        &self.records
    }

    pub fn provenance(&self) -> &[String] {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_tokens(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn poor_count(&self) -> usize {
        self.records.iter().filter(|r| r.poor_call()).count()
    }

    /// Poor call rate; `None` for an empty dataset.
    pub fn pcr(&self) -> Option<f64> {
        (!self.is_empty()).then(|| self.poor_count() as f64 / self.len() as f64)
    }

    pub fn poor_labels(&self) -> Vec<bool> {
        self.records.iter().map(CallRecord::poor_call).collect()
    }

    pub fn any_token_labels(&self) -> Vec<bool> {
        self.records.iter().map(CallRecord::any_token_reported).collect()
    }

    pub fn token_column(&self, token: usize) -> Vec<bool> {
        self.records.iter().map(|r| r.tokens[token]).collect()
    }

    pub fn token_bits(&self, token: usize) -> BitColumn {
        BitColumn::from_bools(self.records.iter().map(|r| r.tokens[token]))
    }

    /// New dataset holding the records at `indices` (in the given order)
    /// with one lineage entry appended.
    pub fn select(&self, indices: &[usize], note: String) -> Self {
        let mut provenance = self.provenance.clone();
        provenance.push(note);
        Self {
            vocabulary: self.vocabulary.clone(),
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
            provenance,
        }
    }

    pub fn with_note(mut self, note: String) -> Self {
        self.provenance.push(note);
        self
    }
}

fn parse_bool(field: &str, line: u64, column: &str) -> Result<bool, SurveyError> {
    match field.trim() {
        "1" | "true" | "TRUE" | "True" => Ok(true),
        "0" | "false" | "FALSE" | "False" => Ok(false),
        other => Err(SurveyError::Malformed {
            line,
            message: format!("column `{column}`: expected 0/1, got `{other}`"),
        }),
    }
}

/// Reads a survey CSV from `reader`. `source` is recorded in provenance.
///
/// Without a vocabulary, the token columns of the header define one. With a
/// vocabulary, token columns it does not contain are rejected and absent
/// ones are only accepted on rows where the questionnaire was not submitted.
pub fn read_csv<R: Read>(
    reader: R,
    source: &str,
    vocabulary: Option<&TokenVocabulary>,
) -> Result<SurveyDataset, SurveyError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| SurveyError::Malformed {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let cols: Vec<&str> = header.iter().map(str::trim).collect();
    for (i, name) in BASE_COLUMNS.iter().enumerate() {
        if cols.get(i) != Some(name) {
            return Err(SurveyError::Malformed {
                line: 1,
                message: format!("expected column {} to be `{name}`", i + 1),
            });
        }
    }
    let mut header_tokens = Vec::new();
    for c in &cols[BASE_COLUMNS.len()..] {
        match c.strip_prefix(TOKEN_PREFIX) {
            Some(slug) if !slug.is_empty() => header_tokens.push(slug.to_string()),
            _ => {
                return Err(SurveyError::Malformed {
                    line: 1,
                    message: format!("unexpected column `{c}`"),
                })
            }
        }
    }
    let vocabulary = match vocabulary {
        Some(v) => {
            if let Some(unknown) = header_tokens.iter().find(|t| v.index_of(t).is_none()) {
                return Err(SurveyError::UnknownToken(unknown.clone()));
            }
            v.clone()
        }
        None => TokenVocabulary::from_names(&header_tokens)?,
    };
    let mut seen = HashSet::new();
    if let Some(dup) = header_tokens.iter().find(|t| !seen.insert(t.as_str())) {
        return Err(SurveyError::Malformed {
            line: 1,
            message: format!("duplicate token column `{dup}`"),
        });
    }
    // vocabulary index -> csv column index
    let column_of: Vec<Option<usize>> = vocabulary
        .names()
        .iter()
        .map(|n| {
            header_tokens
                .iter()
                .position(|t| t == n)
                .map(|p| p + BASE_COLUMNS.len())
        })
        .collect();

    let mut records = Vec::new();
    let mut ids = HashMap::new();
    for row in rdr.records() {
        let row = row.map_err(|e| SurveyError::Malformed {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != cols.len() {
            return Err(SurveyError::Malformed {
                line,
                message: format!("expected {} fields, got {}", cols.len(), row.len()),
            });
        }
        let call_id = row[0].to_string();
        if call_id.is_empty() {
            return Err(SurveyError::Malformed {
                line,
                message: "empty call_id".into(),
            });
        }
        let rating: i64 = row[1].trim().parse().map_err(|_| SurveyError::Malformed {
            line,
            message: format!("column `rating`: not an integer: `{}`", &row[1]),
        })?;
        if !(1..=5).contains(&rating) {
            return Err(SurveyError::RatingOutOfRange { line, rating });
        }
        let duration_s: f64 = row[2].trim().parse().map_err(|_| SurveyError::Malformed {
            line,
            message: format!("column `duration_s`: not a number: `{}`", &row[2]),
        })?;
        let ptq_submitted = parse_bool(&row[3], line, "ptq_submitted")?;
        let mut tokens = Vec::with_capacity(vocabulary.len());
        for (j, col) in column_of.iter().enumerate() {
            let bit = match col {
                Some(c) if !row[*c].trim().is_empty() => parse_bool(&row[*c], line, cols[*c])?,
                _ if !ptq_submitted => false,
                _ => {
                    return Err(SurveyError::Malformed {
                        line,
                        message: format!(
                            "missing value for token `{}` on a submitted questionnaire",
                            vocabulary.names()[j]
                        ),
                    })
                }
            };
            tokens.push(bit);
        }
        let record = CallRecord {
            call_id,
            rating: rating as u8,
            duration_s,
            tokens,
            ptq_submitted,
        };
        record.validate(line)?;
        if let Some(prev) = ids.insert(record.call_id.clone(), line) {
            return Err(SurveyError::Malformed {
                line,
                message: format!("duplicate call_id `{}` (first on line {prev})", record.call_id),
            });
        }
        records.push(record);
    }
    Ok(SurveyDataset {
        vocabulary,
        records,
        provenance: vec![format!("load_csv {source}")],
    })
}

pub fn load_csv(path: &Path, vocabulary: Option<&TokenVocabulary>) -> Result<SurveyDataset, SurveyError> {
    let file = std::fs::File::open(path).map_err(|e| SurveyError::Io(format!("{}: {e}", path.display())))?;
    read_csv(file, &path.display().to_string(), vocabulary)
}

pub fn write_csv_to<W: Write>(ds: &SurveyDataset, writer: W) -> Result<(), SurveyError> {
    let io = |e: csv::Error| SurveyError::Io(e.to_string());
    let mut w = csv::WriterBuilder::new()
        .quote_style(csv::QuoteStyle::Necessary)
        .from_writer(writer);
    let mut header: Vec<String> = BASE_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend(ds.vocabulary.names().iter().map(|n| format!("{TOKEN_PREFIX}{n}")));
    w.write_record(&header).map_err(io)?;
    let bit = |b: bool| if b { "1" } else { "0" };
    for r in &ds.records {
        let mut row = vec![
            r.call_id.clone(),
            r.rating.to_string(),
            r.duration_s.to_string(),
            bit(r.ptq_submitted).to_string(),
        ];
        row.extend(r.tokens.iter().map(|&t| bit(t).to_string()));
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| SurveyError::Io(e.to_string()))
}

pub fn write_csv(ds: &SurveyDataset, path: &Path) -> Result<(), SurveyError> {
    let file = std::fs::File::create(path).map_err(|e| SurveyError::Io(format!("{}: {e}", path.display())))?;
    write_csv_to(ds, std::io::BufWriter::new(file))
}

/// Drops tokens set on fewer than `min_positives` records or with zero
/// variance. Returns the cleaned dataset and the removed token names.
pub fn clean_uninformative(
    ds: &SurveyDataset,
    min_positives: usize,
) -> Result<(SurveyDataset, Vec<String>), SurveyError> {
    let n = ds.len();
    let mut keep = Vec::new();
    let mut removed = Vec::new();
    for j in 0..ds.n_tokens() {
        let ones = ds.records.iter().filter(|r| r.tokens[j]).count();
        if ones < min_positives || ones == 0 || ones == n {
            removed.push(ds.vocabulary.names()[j].clone());
        } else {
            keep.push(j);
        }
    }
    if keep.is_empty() {
        return Err(SurveyError::NoInformativeTokens);
    }
    let records = ds
        .records
        .iter()
        .map(|r| CallRecord {
            tokens: keep.iter().map(|&j| r.tokens[j]).collect(),
            ..r.clone()
        })
        .collect();
    let mut provenance = ds.provenance.clone();
    provenance.push(format!(
        "clean_uninformative min_positives={min_positives} removed=[{}]",
        removed.join(",")
    ));
    Ok((
        SurveyDataset {
            vocabulary: ds.vocabulary.retain(&keep),
            records,
            provenance,
        },
        removed,
    ))
}

fn sorted_sample(rng: &mut rand_chacha::ChaCha8Rng, pool: &[usize], amount: usize) -> Vec<usize> {
    let mut picked: Vec<usize> = sample(rng, pool.len(), amount).into_iter().map(|i| pool[i]).collect();
    picked.sort_unstable();
    picked
}

/// Downsamples the majority class so poor and good calls are equally many.
/// Selected records keep their original order.
pub fn balance_resample(ds: &SurveyDataset, seed: u64) -> Result<SurveyDataset, SurveyError> {
    let (poor, good): (Vec<usize>, Vec<usize>) = (0..ds.len()).partition(|&i| ds.records[i].poor_call());
    if poor.is_empty() || good.is_empty() {
        return Err(SurveyError::EmptyClass(format!(
            "balance_resample needs both classes (poor={}, good={})",
            poor.len(),
            good.len()
        )));
    }
    let target = poor.len().min(good.len());
    let mut rng = rng::stream(seed, 0);
    let mut keep = if poor.len() > target {
        sorted_sample(&mut rng, &poor, target)
    } else {
        poor
    };
    keep.extend(if good.len() > target {
        sorted_sample(&mut rng, &good, target)
    } else {
        good
    });
    keep.sort_unstable();
    Ok(ds.select(&keep, format!("balance_resample seed={seed} per_class={target}")))
}

/// Keeps only poor calls with a submitted questionnaire and downsamples good
/// calls by the same retention fraction, so the poor call rate is preserved
/// up to rounding.
pub fn restrict_tokened_poor(ds: &SurveyDataset, seed: u64) -> Result<SurveyDataset, SurveyError> {
    let poor_total = ds.poor_count();
    let tokened: Vec<usize> = (0..ds.len())
        .filter(|&i| ds.records[i].poor_call() && ds.records[i].ptq_submitted)
        .collect();
    if tokened.is_empty() {
        return Err(SurveyError::NoTokenedPoorCalls);
    }
    let good: Vec<usize> = (0..ds.len()).filter(|&i| !ds.records[i].poor_call()).collect();
    let keep_good = if tokened.len() == poor_total {
        good.len()
    } else {
        ((good.len() * tokened.len()) as f64 / poor_total as f64).round() as usize
    };
    let mut rng = rng::stream(seed, 1);
    let mut keep = tokened;
    keep.extend(if keep_good < good.len() {
        sorted_sample(&mut rng, &good, keep_good)
    } else {
        good
    });
    keep.sort_unstable();
    Ok(ds.select(
        &keep,
        format!("restrict_tokened_poor seed={seed} good_kept={keep_good}"),
    ))
}
