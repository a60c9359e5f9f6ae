use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn ptq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ptq")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_str(String::from_utf8_lossy(&out.stderr).lines().last().unwrap()).unwrap()
}

const HEADER: &str = "call_id,rating,duration_s,ptq_submitted,token_a,token_b";

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn describe_without_any_tokens() {
    let tmp = tempfile::tempdir().unwrap();
    let body = format!("{HEADER}\nc1,1,30,0,0,0\nc2,4,60,0,0,0\nc3,5,90,0,0,0\n");
    let input = write(tmp.path(), "d.csv", &body);
    let out = tmp.path().join("out");
    let o = ptq(&["describe", "--input", s(&input), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(out.join("describe.json"));
    assert_eq!(report["gain_undefined"], true);
    assert_eq!(report["any_token_gain"]["bits"], 0.0);
    for t in report["frequencies"]["tokens"].as_array().unwrap() {
        assert_eq!(t["rate_all_rated"], 0.0);
    }
    let rates = std::fs::read_to_string(out.join("token_rates.csv")).unwrap();
    assert!(
        rates.starts_with("token,population,rate\na,all_rated,0\na,poor,0\n"),
        "{rates}"
    );
    assert_eq!(report["provenance"]["input_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn describe_rates_match_generator_prevalence() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d.csv");
    let truth = tmp.path().join("t.json");
    let sim = ptq(&[
        "simulate",
        "--preset",
        "table-one",
        "--n",
        "20000",
        "--seed",
        "5",
        "--truth-mc",
        "1000",
        "--out",
        s(&data),
        "--truth",
        s(&truth),
    ]);
    assert!(sim.status.success(), "{}", String::from_utf8_lossy(&sim.stderr));
    let out = tmp.path().join("out");
    assert!(ptq(&["describe", "--input", s(&data), "--out", s(&out)])
        .status
        .success());
    let prevalences = read_json(truth)["truth"]["prevalences"].clone();
    let report = read_json(out.join("describe.json"));
    let tokens = report["frequencies"]["tokens"].as_array().unwrap();
    assert_eq!(tokens.len(), 15);
    for (t, p) in tokens.iter().zip(prevalences.as_array().unwrap()) {
        let p = p.as_f64().unwrap();
        let rate = t["rate_all_rated"].as_f64().unwrap();
        let se = (p * (1.0 - p) / 20_000.0).sqrt();
        assert!((rate - p).abs() < 3.0 * se + 1e-12, "{}: {rate} vs {p}", t["token"]);
    }
}

#[test]
fn timu_hand_fixture_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let mut body = String::from("call_id,rating,duration_s,ptq_submitted,token_t\n");
    for i in 0..10 {
        let rating = if i < 4 { 1 } else { 4 };
        let tok = u8::from(i < 3 || i == 4);
        body.push_str(&format!("c{i},{rating},{},{tok},{tok}\n", 100 + i));
    }
    let input = write(tmp.path(), "d.csv", &body);
    let out = tmp.path().join("out");
    let o = ptq(&["timu", "--input", s(&input), "--out", s(&out), "--metric", "pcr"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("timu_pcr.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].starts_with("t,0.3,"), "{csv}");
    assert!(!out.join("timu_acd.csv").exists());
}

#[test]
fn timu_orders_differ_between_metrics() {
    // a sits on poor calls of ordinary length; b on one good but very short call
    let tmp = tempfile::tempdir().unwrap();
    let mut body = format!("{HEADER}\n");
    for i in 0..3 {
        body.push_str(&format!("p{i},1,100,1,1,0\n"));
    }
    body.push_str("s0,4,1,1,0,1\n");
    for i in 0..6 {
        body.push_str(&format!("g{i},4,100,0,0,0\n"));
    }
    let input = write(tmp.path(), "d.csv", &body);
    let out = tmp.path().join("out");
    assert!(ptq(&["timu", "--input", s(&input), "--out", s(&out)]).status.success());
    let report = read_json(out.join("timu.json"));
    let order = |m: &str| -> Vec<String> {
        report[m]["ranking"]
            .as_array()
            .unwrap()
            .iter()
            .map(|r| r["selector"].as_str().unwrap().to_string())
            .collect()
    };
    assert_eq!(order("pcr"), vec!["a", "b"]);
    assert_eq!(order("acd"), vec!["b", "a"]);
    assert_eq!(report["acd"]["fix_value"], 100.0);
}

#[test]
fn validation_errors_exit_2_with_line_numbers() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write(
        tmp.path(),
        "d.csv",
        &format!("{HEADER}\nc1,4,60,1,1,0\nc2,5,60,1,1,0\n"),
    );
    let o = ptq(&["describe", "--input", s(&input), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr_json(&o);
    assert_eq!(err["error"]["stage"], "validation");
    assert_eq!(err["error"]["message"], "line 3: tokens present on rating 5");
}

#[test]
fn stochastic_steps_need_a_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write(tmp.path(), "d.csv", &format!("{HEADER}\nc1,4,60,1,1,0\n"));
    let o = ptq(&[
        "timm",
        "factors",
        "--input",
        s(&input),
        "--out",
        s(&tmp.path().join("o")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr_json(&o)["error"]["message"].as_str().unwrap().contains("seed"));
    let o = ptq(&[
        "simulate",
        "--preset",
        "table-one",
        "--out",
        s(&tmp.path().join("x.csv")),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn independent_tokens_exit_4() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = serde_json::json!({
        "tokens": null,
        "loadings": vec![vec![0.0]; 6],
        "thresholds": vec![1.0; 6],
        "group_partition": vec![0; 6],
        "glm": {"intercept": -2.0, "groups": [1.0], "interactions": []},
        "duration": {"base_mean_s": 300.0, "sigma": 0.5, "group_penalties": [0.9]},
        "n": 20000,
        // parallel analysis calls a factor on about 1 in 100 null datasets
        "seed": 5,
        "truth_mc": 1000
    });
    let spec_path = write(tmp.path(), "spec.json", &spec.to_string());
    let data = tmp.path().join("d.csv");
    let o = ptq(&["simulate", "--spec", s(&spec_path), "--out", s(&data)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = ptq(&[
        "timm",
        "factors",
        "--input",
        s(&data),
        "--out",
        s(&tmp.path().join("o")),
        "--seed",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(stderr_json(&o)["error"]["message"], "no factor exceeds noise floor");
}

#[test]
fn planted_partition_and_grouping_reuse() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d.csv");
    let truth = tmp.path().join("t.json");
    assert!(ptq(&[
        "simulate",
        "--preset",
        "table-one",
        "--n",
        "20000",
        "--seed",
        "2",
        "--truth-mc",
        "1000",
        "--out",
        s(&data),
        "--truth",
        s(&truth)
    ])
    .status
    .success());
    let cfg = write(tmp.path(), "cfg.json", r#"{"seed": 2, "pa_reps": 50, "bootstrap": 20}"#);
    let out = tmp.path().join("f");
    let o = ptq(&[
        "timm",
        "factors",
        "--config",
        s(&cfg),
        "--input",
        s(&data),
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let sorted = |v: &Value| -> Vec<Vec<String>> {
        let mut groups: Vec<Vec<String>> = v
            .as_array()
            .unwrap()
            .iter()
            .map(|g| {
                let mut g: Vec<String> = g
                    .as_array()
                    .unwrap()
                    .iter()
                    .map(|t| t.as_str().unwrap().into())
                    .collect();
                g.sort();
                g
            })
            .collect();
        groups.sort();
        groups
    };
    let grouping = read_json(out.join("grouping.json"));
    let found: Vec<Value> = grouping["groups"]
        .as_array()
        .unwrap()
        .iter()
        .map(|g| g["tokens"].clone())
        .collect();
    assert_eq!(
        sorted(&Value::Array(found)),
        sorted(&read_json(truth)["truth"]["groups"])
    );
    let factors = read_json(out.join("factors.json"));
    assert_eq!(factors["n_factors"], 5);
    assert_eq!(factors["provenance"]["config"]["pa_reps"], 50);

    let loadings = std::fs::read_to_string(out.join("loadings.csv")).unwrap();
    assert!(loadings.starts_with("token,factor_1,factor_2,factor_3,factor_4,factor_5,communality\n"));
    let poly = std::fs::read_to_string(out.join("polychoric.csv")).unwrap();
    assert_eq!(poly.lines().count(), 16);

    let imp = tmp.path().join("i");
    let o = ptq(&[
        "timm",
        "impact",
        "--config",
        s(&cfg),
        "--input",
        s(&data),
        "--out",
        s(&imp),
        "--grouping",
        s(&out.join("grouping.json")),
        "--interactions",
        "1:2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!imp.join("factors.json").exists());
    let report = read_json(imp.join("impact.json"));
    assert_eq!(report["model"]["interactions"], serde_json::json!([[0, 1]]));
    assert!(report["report"]["auc"].as_f64().unwrap() > report["report"]["baseline_auc"].as_f64().unwrap());
    let csv = std::fs::read_to_string(imp.join("impact.csv")).unwrap();
    assert!(csv.starts_with("group,individual,cumulative,ci_lo,ci_hi\n"));
    assert_eq!(csv.lines().count(), 6);

    let o = ptq(&[
        "timm",
        "impact",
        "--config",
        s(&cfg),
        "--input",
        s(&data),
        "--out",
        s(&imp),
        "--grouping",
        s(&out.join("grouping.json")),
        "--interactions",
        "1:9",
    ]);
    assert_eq!(o.status.code(), Some(2));
}
