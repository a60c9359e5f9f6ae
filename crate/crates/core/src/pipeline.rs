//! The multivariate procedure end to end: clean tokens, tetrachoric matrix,
//! factor count, rotated loadings, problem groups, then the logistic model
//! and its counterfactual reductions.

use serde::Serialize;

use crate::error::Result;
use crate::factor::{
    assign_groups, extract_factors, parallel_analysis, varimax, FactorModel, ParallelAnalysis, ParallelAnalysisConfig,
    ProblemGrouping,
};
use crate::glm::{
    build_design, fit_logistic, impact_report, select_interactions_aic, BootstrapConfig, Design, DesignSpec, FitConfig,
    ImpactReport, LogisticModel,
};
use crate::polychoric::{polychoric_matrix, PolychoricMatrix};
use crate::survey::{clean_uninformative, SurveyDataset};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorOptions {
    pub min_positives: usize,
    pub parallel: ParallelAnalysisConfig,
    /// Skip parallel analysis and extract this many factors.
    pub n_factors: Option<usize>,
    pub loading_threshold: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl FactorOptions {
    pub fn new(seed: u64) -> Self {
        Self {
            min_positives: 10,
            parallel: ParallelAnalysisConfig::new(seed),
            n_factors: None,
            loading_threshold: 0.5,
            max_iter: 100,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FactorStage {
    pub cleaned: SurveyDataset,
    pub removed: Vec<String>,
    pub correlation: PolychoricMatrix,
    pub parallel: Option<ParallelAnalysis>,
    pub unrotated: FactorModel,
    pub rotated: FactorModel,
    pub grouping: ProblemGrouping,
}

pub fn factor_stage(ds: &SurveyDataset, opts: &FactorOptions) -> Result<FactorStage> {
    let (cleaned, removed) = clean_uninformative(ds, opts.min_positives)?;
    let correlation = polychoric_matrix(&cleaned)?;
    let (k, parallel) = match opts.n_factors {
        Some(k) => (k, None),
        None => {
            let pa = parallel_analysis(&correlation, &cleaned, &opts.parallel)?;
            (pa.k, Some(pa))
        }
    };
    let unrotated = extract_factors(&correlation, k, opts.max_iter, opts.tol)?;
    let rotated = varimax(&unrotated, 1e-8, 1000);
    let grouping = assign_groups(&rotated, opts.loading_threshold)?;
    Ok(FactorStage {
        cleaned,
        removed,
        correlation,
        parallel,
        unrotated,
        rotated,
        grouping,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum InteractionChoice {
    /// The questionnaire default when the grouping has its shape, else none.
    Default,
    Explicit(Vec<(usize, usize)>),
    /// Forward selection by AIC, at most this many pairs.
    Aic(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImpactOptions {
    pub interactions: InteractionChoice,
    pub fit: FitConfig,
    pub bootstrap: BootstrapConfig,
}

impl ImpactOptions {
    pub fn new(seed: u64) -> Self {
        Self {
            interactions: InteractionChoice::Default,
            fit: FitConfig::default(),
            bootstrap: BootstrapConfig::new(seed),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ImpactStage {
    pub design: Design,
    pub model: LogisticModel,
    pub report: ImpactReport,
}

pub fn impact_stage(ds: &SurveyDataset, grouping: &ProblemGrouping, opts: &ImpactOptions) -> Result<ImpactStage> {
    let pairs = match &opts.interactions {
        InteractionChoice::Default => DesignSpec::default_interactions(grouping),
        InteractionChoice::Explicit(p) => p.clone(),
        InteractionChoice::Aic(max) => {
            let main = build_design(ds, &DesignSpec::new(grouping.clone(), Vec::new())?)?;
            select_interactions_aic(&main, &opts.fit, *max)?
        }
    };
    let design = build_design(ds, &DesignSpec::new(grouping.clone(), pairs)?)?;
    let model = fit_logistic(&design, &opts.fit)?;
    let report = impact_report(&model, &design, &ds.any_token_labels(), &opts.bootstrap, None)?;
    Ok(ImpactStage { design, model, report })
}
