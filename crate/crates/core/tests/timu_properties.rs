use proptest::prelude::*;
use ptq_impact::survey::{CallRecord, SurveyDataset, TokenVocabulary};
use ptq_impact::synthetic::{generate, table_one_world};
use ptq_impact::timu::{rank_tokens, timu, MetricSpec, Selector, VarianceRule};

fn dataset(rows: Vec<(u8, f64, Vec<bool>)>, p: usize) -> SurveyDataset {
    let names: Vec<String> = (0..p).map(|j| format!("t{j}")).collect();
    let records = rows
        .into_iter()
        .enumerate()
        .map(|(i, (rating, duration_s, tokens))| {
            // rating 5 cannot carry tokens
            let rating = if rating == 5 && tokens.iter().any(|&t| t) {
                4
            } else {
                rating
            };
            CallRecord {
                call_id: format!("c{i}"),
                rating,
                duration_s,
                ptq_submitted: tokens.iter().any(|&t| t),
                tokens,
            }
        })
        .collect();
    SurveyDataset::new(TokenVocabulary::from_names(&names).unwrap(), records, vec![]).unwrap()
}

fn rows(p: usize) -> impl Strategy<Value = Vec<(u8, f64, Vec<bool>)>> {
    prop::collection::vec(
        (1u8..=5, 1.0f64..3000.0, prop::collection::vec(any::<bool>(), p)),
        1..80,
    )
}

proptest! {
    #[test]
    fn pcr_single_token_impacts_overestimate_union(rows in rows(4)) {
        let ds = dataset(rows, 4);
        let metric = MetricSpec::pcr();
        let singles: f64 = (0..4)
            .map(|t| timu(&ds, &Selector::Token(t), &metric, VarianceRule::default()).unwrap().mean_impact)
            .sum();
        let union = timu(&ds, &Selector::AnyOf(vec![0, 1, 2, 3]), &metric, VarianceRule::default()).unwrap();
        prop_assert!(singles >= union.mean_impact - 1e-12);
    }

    #[test]
    fn duration_impact_scales_with_units(rows in rows(3), scale in 0.01f64..100.0) {
        let ds = dataset(rows.clone(), 3);
        let scaled = dataset(rows.into_iter().map(|(r, d, t)| (r, d * scale, t)).collect(), 3);
        for t in 0..3 {
            let a = timu(&ds, &Selector::Token(t), &MetricSpec::acd(&ds).with_fix_value(500.0), VarianceRule::default()).unwrap();
            let b = timu(&scaled, &Selector::Token(t), &MetricSpec::acd(&scaled).with_fix_value(500.0 * scale), VarianceRule::default()).unwrap();
            prop_assert!((b.mean_impact - scale * a.mean_impact).abs() <= 1e-9 * (1.0 + b.mean_impact));
            prop_assert!((b.ci95_halfwidth - scale * a.ci95_halfwidth).abs() <= 1e-9 * (1.0 + b.ci95_halfwidth));
        }
    }

    #[test]
    fn strict_delta_never_wider(rows in rows(2)) {
        let ds = dataset(rows, 2);
        let m = MetricSpec::pcr();
        let single = timu(&ds, &Selector::Token(0), &m, VarianceRule::SingleCovariance).unwrap();
        let strict = timu(&ds, &Selector::Token(0), &m, VarianceRule::StrictDelta).unwrap();
        // cov(x, fixed) >= 0 for PCR since fixing only lowers ones to zero
        prop_assert!(strict.ci95_halfwidth <= single.ci95_halfwidth + 1e-12);
        prop_assert_eq!(single.mean_impact, strict.mean_impact);
    }

    #[test]
    fn ranking_is_sorted(rows in rows(5)) {
        let ds = dataset(rows, 5);
        let r = rank_tokens(&ds, &MetricSpec::pcr(), VarianceRule::default()).unwrap();
        prop_assert_eq!(r.len(), 5);
        prop_assert!(r.windows(2).all(|w| w[0].mean_impact >= w[1].mean_impact));
    }
}

#[test]
fn interval_shrinks_with_four_times_the_data() {
    let mut ratios = Vec::new();
    for seed in 0..20 {
        let mut small = table_one_world(5_000, seed);
        small.truth_mc = 1;
        let mut large = small.clone();
        large.n = 20_000;
        large.seed = seed + 1000;
        let (a, _) = generate(&small).unwrap();
        let (b, _) = generate(&large).unwrap();
        let sel = Selector::Token(4);
        let ha = timu(&a, &sel, &MetricSpec::pcr(), VarianceRule::default())
            .unwrap()
            .ci95_halfwidth;
        let hb = timu(&b, &sel, &MetricSpec::pcr(), VarianceRule::default())
            .unwrap()
            .ci95_halfwidth;
        ratios.push(hb / ha);
    }
    ratios.sort_by(f64::total_cmp);
    let median = (ratios[9] + ratios[10]) / 2.0;
    assert!((0.4..=0.6).contains(&median), "{ratios:?}");
}
