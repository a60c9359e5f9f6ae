use ptq_impact::error::FactorError;
use ptq_impact::pipeline::{factor_stage, impact_stage, FactorOptions, ImpactOptions};
use ptq_impact::synthetic::{generate, single_factor_world, table_one_world, table_one_world_with, GroundTruth};
use ptq_impact::Error;

fn planted(truth: &GroundTruth) -> Vec<Vec<String>> {
    let mut groups: Vec<Vec<String>> = truth
        .groups
        .iter()
        .map(|g| {
            let mut g = g.clone();
            g.sort();
            g
        })
        .collect();
    groups.sort();
    groups
}

#[test]
fn table_one_world_partition_recovered() {
    for seed in 0..3 {
        let mut spec = table_one_world(20_000, seed);
        spec.truth_mc = 1000;
        let (ds, truth) = generate(&spec).unwrap();
        let stage = factor_stage(&ds, &FactorOptions::new(seed)).unwrap();
        assert_eq!(stage.parallel.as_ref().unwrap().k, 5, "seed {seed}");
        assert_eq!(stage.grouping.canonical_partition(), planted(&truth), "seed {seed}");
        assert!(stage.removed.is_empty());
        let ve = &stage.rotated.variance_explained;
        assert!(ve.windows(2).all(|w| w[0] >= w[1] - 1e-12), "{ve:?}");
    }
}

#[test]
fn uniform_loadings_also_recovered() {
    let mut spec = table_one_world_with(20_000, 11, &[0.7; 15]);
    spec.truth_mc = 1000;
    let (ds, truth) = generate(&spec).unwrap();
    let stage = factor_stage(&ds, &FactorOptions::new(11)).unwrap();
    assert_eq!(stage.rotated.n_factors(), 5);
    assert_eq!(stage.grouping.canonical_partition(), planted(&truth));
}

#[test]
fn variance_explained_close_to_planted_total() {
    let mut spec = table_one_world(20_000, 4);
    spec.truth_mc = 1000;
    let planted_total = spec.communalities().iter().sum::<f64>() / 15.0;
    let (ds, _) = generate(&spec).unwrap();
    let stage = factor_stage(&ds, &FactorOptions::new(4)).unwrap();
    let total = stage.rotated.total_variance_explained();
    assert!((total - planted_total).abs() < 0.05, "{total} vs {planted_total}");
}

#[test]
fn single_factor_world_gives_one_group() {
    let (ds, _) = generate(&single_factor_world(6, 0.7, 1.0, 20_000, 2)).unwrap();
    let stage = factor_stage(&ds, &FactorOptions::new(2)).unwrap();
    assert_eq!(stage.parallel.unwrap().k, 1);
    assert_eq!(stage.grouping.groups.len(), 1);
    assert_eq!(stage.grouping.groups[0].tokens.len(), 6);
}

#[test]
fn independent_tokens_have_no_factor() {
    let (ds, _) = generate(&single_factor_world(6, 0.0, 1.0, 20_000, 5)).unwrap();
    let err = factor_stage(&ds, &FactorOptions::new(5)).unwrap_err();
    assert_eq!(err, Error::Factor(FactorError::NoFactors));
}

#[test]
fn forced_factor_count_skips_parallel_analysis() {
    let (ds, _) = generate(&single_factor_world(6, 0.7, 1.0, 5_000, 2)).unwrap();
    let mut opts = FactorOptions::new(0);
    opts.n_factors = Some(2);
    let stage = factor_stage(&ds, &opts).unwrap();
    assert!(stage.parallel.is_none());
    assert_eq!(stage.rotated.n_factors(), 2);
}

#[test]
fn impact_stage_on_recovered_groups() {
    let mut spec = table_one_world(20_000, 8);
    spec.truth_mc = 1000;
    let (ds, _) = generate(&spec).unwrap();
    let factors = factor_stage(&ds, &FactorOptions::new(8)).unwrap();
    let mut opts = ImpactOptions::new(8);
    opts.bootstrap.resamples = 50;
    let stage = impact_stage(&ds, &factors.grouping, &opts).unwrap();
    let report = &stage.report;
    // questionnaire-shaped grouping gets the two default interaction terms
    assert_eq!(stage.model.interactions.len(), 2);
    assert!(report.auc > report.baseline_auc);
    assert!(report.tpr_at_baseline_fpr >= report.baseline_tpr - 0.02);
    assert!((report.baseline_pcr - report.observed_pcr).abs() < 1e-3);
    let steps = &report.cumulative;
    assert!(steps
        .windows(2)
        .all(|w| w[0].cumulative_reduction <= w[1].cumulative_reduction));
    let sum: f64 = report.groups.iter().map(|g| g.individual_reduction).sum();
    assert!((sum - steps.last().unwrap().cumulative_reduction).abs() > 0.01);
}
