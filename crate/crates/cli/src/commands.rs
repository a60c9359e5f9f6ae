use std::path::{Path, PathBuf};

use ptq_impact::descriptives::{information_gain, jaccard_matrix, token_frequencies, FrequencyReport, InformationGain};
use ptq_impact::factor::{FactorModel, ParallelAnalysis, ProblemGrouping};
use ptq_impact::glm::{BootstrapConfig, FitConfig, ImpactReport, LogisticModel};
use ptq_impact::pipeline::{self, FactorOptions, FactorStage, ImpactOptions, InteractionChoice};
use ptq_impact::survey::{balance_resample, load_csv, write_csv as write_dataset, SurveyDataset};
use ptq_impact::synthetic::{self, GeneratorSpec, GroundTruth};
use ptq_impact::timu::{rank_tokens, timu, MetricSpec, Selector, TimuResult, VarianceRule};
use serde::Serialize;
use tracing::info;

use crate::config::{Metric, RunConfig};
use crate::error::{io_err, CliError};
use crate::output::{ensure_dir, num, write_csv, write_json, Provenance};

fn load(cfg: &RunConfig) -> Result<SurveyDataset, CliError> {
    let path = cfg.input()?;
    let ds = load_csv(path, None)?;
    info!(records = ds.len(), tokens = ds.n_tokens(), "loaded {}", path.display());
    Ok(ds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    /// 15 questionnaire tokens in five planted groups.
    TableOne,
    /// Six tokens driven by one factor.
    SingleFactor,
}

#[derive(Debug, Clone)]
pub struct SimulateArgs {
    pub spec: Option<PathBuf>,
    pub preset: Option<Preset>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub truth_mc: Option<usize>,
    pub out: PathBuf,
    pub truth: Option<PathBuf>,
}

#[derive(Serialize)]
struct TruthFile<'a> {
    spec: &'a GeneratorSpec,
    truth: &'a GroundTruth,
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let mut spec = match (&args.spec, args.preset) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            serde_json::from_str::<GeneratorSpec>(&text)
                .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?
        }
        (None, Some(preset)) => {
            let seed = args
                .seed
                .ok_or_else(|| CliError::Validation("a seed is required for simulate".into()))?;
            let n = args.n.unwrap_or(20_000);
            match preset {
                Preset::TableOne => synthetic::table_one_world(n, seed),
                Preset::SingleFactor => synthetic::single_factor_world(6, 0.7, 1.0, n, seed),
            }
        }
        _ => return Err(CliError::Validation("give exactly one of --spec or --preset".into())),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(n) = args.n {
        spec.n = n;
    }
    if let Some(mc) = args.truth_mc {
        spec.truth_mc = mc;
    }
    let (ds, truth) = synthetic::generate(&spec)?;
    info!(records = ds.len(), "generated");
    write_dataset(&ds, &args.out)?;
    if let Some(path) = &args.truth {
        write_json(
            path,
            &TruthFile {
                spec: &spec,
                truth: &truth,
            },
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct TokenGain {
    token: String,
    gain: InformationGain,
}

#[derive(Serialize)]
struct DescribeReport {
    provenance: Provenance,
    frequencies: FrequencyReport,
    /// Any token reported vs poor call, on all records.
    any_token_gain: InformationGain,
    /// Same on a poor/good balanced resample, when requested.
    any_token_gain_balanced: Option<InformationGain>,
    /// True when either variable is constant, so no information can be gained.
    gain_undefined: bool,
    token_gains: Vec<TokenGain>,
    jaccard: ptq_impact::descriptives::JaccardMatrix,
}

pub fn describe(cfg: &RunConfig) -> Result<(), CliError> {
    let ds = load(cfg)?;
    let out = cfg.out()?;
    ensure_dir(out)?;
    let poor = ds.poor_labels();
    let any = ds.any_token_labels();
    let frequencies = token_frequencies(&ds)?;
    let any_token_gain = information_gain(&any, &poor)?;
    let gain_undefined = any.iter().all(|&b| b == any[0]) || poor.iter().all(|&b| b == poor[0]);
    let any_token_gain_balanced = if cfg.balanced {
        let bal = balance_resample(&ds, cfg.seed_for("the balanced resample")?)?;
        Some(information_gain(&bal.any_token_labels(), &bal.poor_labels())?)
    } else {
        None
    };
    let token_gains = (0..ds.n_tokens())
        .map(|t| {
            Ok(TokenGain {
                token: ds.vocabulary().names()[t].clone(),
                gain: information_gain(&ds.token_column(t), &poor)?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let jaccard = jaccard_matrix(&ds)?;

    let rates = frequencies.tokens.iter().flat_map(|t| {
        [
            vec![t.token.clone(), "all_rated".into(), num(t.rate_all_rated)],
            vec![t.token.clone(), "poor".into(), t.rate_poor.map(num).unwrap_or_default()],
        ]
    });
    write_csv(&out.join("token_rates.csv"), &["token", "population", "rate"], rates)?;
    let names = &jaccard.tokens;
    let pairs = (0..names.len()).flat_map(|i| (0..names.len()).map(move |j| (i, j)));
    write_csv(
        &out.join("jaccard.csv"),
        &["token_a", "token_b", "similarity"],
        pairs.map(|(i, j)| vec![names[i].clone(), names[j].clone(), num(jaccard.get(i, j))]),
    )?;
    let report = DescribeReport {
        provenance: Provenance::new("describe", cfg)?,
        frequencies,
        any_token_gain,
        any_token_gain_balanced,
        gain_undefined,
        token_gains,
        jaccard,
    };
    write_json(&out.join("describe.json"), &report)
}

#[derive(Serialize)]
struct TimuSection {
    fix_value: f64,
    ranking: Vec<TimuResult>,
    any_token: TimuResult,
}

#[derive(Serialize)]
struct TimuReport {
    provenance: Provenance,
    variance_rule: VarianceRule,
    pcr: Option<TimuSection>,
    acd: Option<TimuSection>,
}

fn timu_section(ds: &SurveyDataset, metric: MetricSpec, rule: VarianceRule) -> Result<TimuSection, CliError> {
    let all: Vec<usize> = (0..ds.n_tokens()).collect();
    Ok(TimuSection {
        fix_value: metric.fix_value,
        ranking: rank_tokens(ds, &metric, rule)?,
        any_token: timu(ds, &Selector::AnyOf(all), &metric, rule)?,
    })
}

fn write_ranking(path: &Path, section: &TimuSection) -> Result<(), CliError> {
    write_csv(
        path,
        &["token", "impact", "ci"],
        section
            .ranking
            .iter()
            .map(|r| vec![r.selector.clone(), num(r.mean_impact), num(r.ci95_halfwidth)]),
    )
}

pub fn timu_cmd(cfg: &RunConfig) -> Result<(), CliError> {
    let ds = load(cfg)?;
    let out = cfg.out()?;
    ensure_dir(out)?;
    let rule = if cfg.strict_delta {
        VarianceRule::StrictDelta
    } else {
        VarianceRule::SingleCovariance
    };
    let metric = cfg.metric();
    let pcr = if metric != Metric::Acd {
        let mut spec = MetricSpec::pcr();
        if let Some(v) = cfg.fix_value_pcr {
            spec = spec.with_fix_value(v);
        }
        Some(timu_section(&ds, spec, rule)?)
    } else {
        None
    };
    let acd = if metric != Metric::Pcr {
        let spec = match cfg.fix_value_acd {
            Some(v) => MetricSpec::acd(&ds).with_fix_value(v),
            None => MetricSpec::acd(&ds),
        };
        if !spec.fix_value.is_finite() {
            return Err(CliError::Validation(
                "no call without tokens to take the duration fix value from; pass --fix-value-acd".into(),
            ));
        }
        Some(timu_section(&ds, spec, rule)?)
    } else {
        None
    };
    if let Some(s) = &pcr {
        write_ranking(&out.join("timu_pcr.csv"), s)?;
    }
    if let Some(s) = &acd {
        write_ranking(&out.join("timu_acd.csv"), s)?;
    }
    let report = TimuReport {
        provenance: Provenance::new("timu", cfg)?,
        variance_rule: rule,
        pcr,
        acd,
    };
    write_json(&out.join("timu.json"), &report)
}

fn factor_options(cfg: &RunConfig) -> Result<FactorOptions, CliError> {
    let seed = match cfg.n_factors {
        Some(_) => cfg.seed.unwrap_or(0),
        None => cfg.seed_for("parallel analysis")?,
    };
    let mut opts = FactorOptions::new(seed);
    if let Some(m) = cfg.min_positives {
        opts.min_positives = m;
    }
    if let Some(r) = cfg.pa_reps {
        opts.parallel.reps = r;
    }
    if let Some(q) = cfg.pa_quantile {
        opts.parallel.quantile = q;
    }
    if let Some(t) = cfg.loading_threshold {
        opts.loading_threshold = t;
    }
    opts.n_factors = cfg.n_factors;
    Ok(opts)
}

#[derive(Serialize)]
struct FactorSummary<'a> {
    provenance: Provenance,
    removed_tokens: &'a [String],
    psd_repaired: bool,
    min_eigenvalue_before_repair: f64,
    corrected_pairs: Vec<[&'a str; 2]>,
    nonconverged_pairs: Vec<[&'a str; 2]>,
    parallel_analysis: Option<&'a ParallelAnalysis>,
    n_factors: usize,
    variance_explained: &'a [f64],
    total_variance_explained: f64,
    extraction_converged: bool,
    extraction_iterations: usize,
    heywood_tokens: Vec<&'a str>,
    grouping: &'a ProblemGrouping,
}

fn write_factor_outputs(out: &Path, stage: &FactorStage, provenance: Provenance) -> Result<(), CliError> {
    let names = &stage.correlation.tokens;
    let corr = &stage.correlation.matrix;
    let header: Vec<&str> = names.iter().map(String::as_str).collect();
    write_csv(
        &out.join("polychoric.csv"),
        &header,
        (0..names.len()).map(|i| (0..names.len()).map(|j| num(corr[(i, j)])).collect()),
    )?;
    let model: &FactorModel = &stage.rotated;
    let factor_names: Vec<String> = (1..=model.n_factors()).map(|f| format!("factor_{f}")).collect();
    let mut header = vec!["token"];
    header.extend(factor_names.iter().map(String::as_str));
    header.push("communality");
    write_csv(
        &out.join("loadings.csv"),
        &header,
        model.tokens.iter().enumerate().map(|(i, t)| {
            let mut row = vec![t.clone()];
            row.extend((0..model.n_factors()).map(|f| num(model.loadings[(i, f)])));
            row.push(num(model.communalities[i]));
            row
        }),
    )?;
    write_json(&out.join("grouping.json"), &stage.grouping)?;
    let pair_names = |pairs: &[(usize, usize)]| -> Vec<[&str; 2]> {
        pairs
            .iter()
            .map(|&(a, b)| [names[a].as_str(), names[b].as_str()])
            .collect()
    };
    let summary = FactorSummary {
        provenance,
        removed_tokens: &stage.removed,
        psd_repaired: stage.correlation.psd_repaired,
        min_eigenvalue_before_repair: stage.correlation.min_eigenvalue_before,
        corrected_pairs: pair_names(&stage.correlation.corrected_pairs),
        nonconverged_pairs: pair_names(&stage.correlation.nonconverged_pairs),
        parallel_analysis: stage.parallel.as_ref(),
        n_factors: model.n_factors(),
        variance_explained: &model.variance_explained,
        total_variance_explained: model.total_variance_explained(),
        extraction_converged: stage.unrotated.converged,
        extraction_iterations: stage.unrotated.iterations,
        heywood_tokens: model.heywood.iter().map(|&i| model.tokens[i].as_str()).collect(),
        grouping: &stage.grouping,
    };
    write_json(&out.join("factors.json"), &summary)
}

fn run_factors(cfg: &RunConfig, ds: &SurveyDataset, command: &str) -> Result<FactorStage, CliError> {
    let stage = pipeline::factor_stage(ds, &factor_options(cfg)?)?;
    info!(
        k = stage.rotated.n_factors(),
        groups = stage.grouping.groups.len(),
        "factor stage done"
    );
    let out = cfg.out()?;
    ensure_dir(out)?;
    write_factor_outputs(out, &stage, Provenance::new(command, cfg)?)?;
    Ok(stage)
}

pub fn timm_factors(cfg: &RunConfig) -> Result<(), CliError> {
    let ds = load(cfg)?;
    run_factors(cfg, &ds, "timm factors").map(|_| ())
}

#[derive(Serialize)]
struct ImpactFile<'a> {
    provenance: Provenance,
    model: &'a LogisticModel,
    grouping: &'a ProblemGrouping,
    bootstrap: BootstrapConfig,
    report: &'a ImpactReport,
}

fn impact_options(cfg: &RunConfig, n_groups: usize) -> Result<ImpactOptions, CliError> {
    let resamples = cfg.bootstrap();
    let seed = if resamples == 0 {
        cfg.seed.unwrap_or(0)
    } else {
        cfg.seed_for("the bootstrap")?
    };
    let mut opts = ImpactOptions::new(seed);
    opts.bootstrap.resamples = resamples;
    if cfg.bootstrap_refit {
        opts.bootstrap = opts.bootstrap.with_refit(FitConfig::default());
    }
    opts.interactions = match (&cfg.interactions, cfg.select_interactions) {
        (Some(_), Some(_)) => {
            return Err(CliError::Validation(
                "give either explicit interactions or interaction selection, not both".into(),
            ))
        }
        (Some(pairs), None) => {
            if let Some(p) = pairs.iter().find(|p| p[0] > n_groups || p[1] > n_groups) {
                return Err(CliError::Validation(format!(
                    "interaction {}:{} references a group beyond the {n_groups} found",
                    p[0], p[1]
                )));
            }
            InteractionChoice::Explicit(pairs.iter().map(|p| (p[0] - 1, p[1] - 1)).collect())
        }
        (None, Some(max)) => InteractionChoice::Aic(max),
        (None, None) => InteractionChoice::Default,
    };
    Ok(opts)
}

/// Runs the factor stage unless `grouping` points at a saved grouping.
pub fn timm_impact(cfg: &RunConfig, grouping: Option<&Path>) -> Result<(), CliError> {
    let ds = load(cfg)?;
    let out = cfg.out()?;
    ensure_dir(out)?;
    let grouping = match grouping {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            serde_json::from_str::<ProblemGrouping>(&text)
                .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?
        }
        None => run_factors(cfg, &ds, "timm impact")?.grouping,
    };
    let opts = impact_options(cfg, grouping.groups.len())?;
    let stage = pipeline::impact_stage(&ds, &grouping, &opts)?;
    let report = &stage.report;
    info!(
        auc = report.auc,
        baseline_auc = report.baseline_auc,
        "impact stage done"
    );
    let cumulative_of = |g: usize| {
        report
            .cumulative
            .iter()
            .find(|s| s.group == g)
            .map(|s| s.cumulative_reduction)
            .unwrap_or(f64::NAN)
    };
    write_csv(
        &out.join("impact.csv"),
        &["group", "individual", "cumulative", "ci_lo", "ci_hi"],
        report.cumulative.iter().map(|step| {
            let g = &report.groups[step.group];
            vec![
                g.name.clone(),
                num(g.individual_reduction),
                num(cumulative_of(step.group)),
                num(g.ci_lo),
                num(g.ci_hi),
            ]
        }),
    )?;
    write_json(
        &out.join("impact.json"),
        &ImpactFile {
            provenance: Provenance::new("timm impact", cfg)?,
            model: &stage.model,
            grouping: &grouping,
            bootstrap: opts.bootstrap,
            report,
        },
    )
}

#[derive(Serialize)]
struct ReportIndex {
    provenance: Provenance,
    files: Vec<&'static str>,
}

/// Every analysis into one directory.
pub fn report(cfg: &RunConfig) -> Result<(), CliError> {
    describe(cfg)?;
    timu_cmd(cfg)?;
    timm_impact(cfg, None)?;
    let files = vec![
        "describe.json",
        "token_rates.csv",
        "jaccard.csv",
        "timu.json",
        "timu_pcr.csv",
        "timu_acd.csv",
        "polychoric.csv",
        "loadings.csv",
        "grouping.json",
        "factors.json",
        "impact.json",
        "impact.csv",
    ];
    let out = cfg.out()?;
    let files = files.into_iter().filter(|f| out.join(f).exists()).collect();
    write_json(
        &out.join("report.json"),
        &ReportIndex {
            provenance: Provenance::new("report", cfg)?,
            files,
        },
    )
}
