//! End-to-end tests of the command-line interface and CSV/report IO.

use std::path::Path;
use std::process::Command;

use rct_auroc::harness::{ExperimentReport, MethodSummary, ReportRow};
use rct_auroc_cli::io::{
    load_csv, parse_report_csv, render_report, DatasetWriter, Format, PiSource,
};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rct-auroc"))
}

fn write(path: &Path, content: &str) {
    std::fs::write(path, content).unwrap();
}

#[test]
fn small_csv_loads_with_scores() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    write(&path, "t,y,score__m1\n0,1,0.9\n1,0,0.2\n0,0,0.4\n");
    let loaded = load_csv(&path, PiSource::Fixed(0.5)).unwrap();
    assert_eq!(loaded.dataset.len(), 3);
    assert_eq!(loaded.scores.len(), 1);
    assert_eq!(loaded.scores[0].model_name, "m1");
    assert!(loaded.nuisance.is_none());
}

#[test]
fn non_binary_outcome_reports_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    write(&path, "t,y,score__m1\n0,2,0.9\n");
    let err = load_csv(&path, PiSource::Fixed(0.5)).unwrap_err();
    assert_eq!(err.exit_code, 2);
    assert!(err.message.contains("line 2"), "{}", err.message);
    assert!(err.message.contains("non-binary outcome"), "{}", err.message);
}

#[test]
fn unknown_column_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    write(&path, "t,y,weird\n0,1,3\n");
    let err = load_csv(&path, PiSource::Fixed(0.5)).unwrap_err();
    assert!(err.message.contains("unknown column `weird`"), "{}", err.message);
}

#[test]
fn nuisance_columns_must_come_in_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    write(&path, "t,y,omega_hat\n0,1,0.4\n");
    let err = load_csv(&path, PiSource::Fixed(0.5)).unwrap_err();
    assert!(err.message.contains("together"), "{}", err.message);
}

#[test]
fn nuisance_columns_skip_cross_fitting() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    write(
        &path,
        "t,y,score__m1,omega_hat,tau_hat\n0,1,0.9,0.5,0.1\n1,0,0.2,0.4,0.0\n0,0,0.4,0.3,-0.1\n1,1,0.7,0.6,0.2\n",
    );
    let loaded = load_csv(&path, PiSource::Fixed(0.5)).unwrap();
    assert!(loaded.nuisance.is_some());
    let out = bin()
        .args(["estimate", path.to_str().unwrap(), "--method", "npw", "--pi", "0.5"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"nuisance_source\": \"columns\""), "{text}");
}

#[test]
fn empirical_pi_is_the_treated_fraction() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    write(&path, "t,y,score__m1\n0,1,0.9\n1,0,0.2\n1,0,0.4\n1,1,0.8\n");
    let loaded = load_csv(&path, PiSource::Empirical).unwrap();
    assert_eq!(loaded.dataset.randomization_prob, 0.75);
}

#[test]
fn dataset_round_trip_is_lossless() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rct.csv");
    let status = bin()
        .args([
            "simulate",
            "--out",
            path.to_str().unwrap(),
            "--n",
            "40",
            "--pool-size",
            "500",
            "--delta",
            "0.15",
            "--seed",
            "3",
            "--spectrum",
            "20,80",
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let loaded = load_csv(&path, PiSource::Fixed(0.5)).unwrap();
    let mut writer = DatasetWriter::new(&loaded.dataset, &loaded.scores);
    let y0 = loaded.y0.clone().unwrap();
    let y1 = loaded.y1.clone().unwrap();
    let ot = loaded.omega_true.clone().unwrap();
    let tt = loaded.tau_true.clone().unwrap();
    writer.y0 = Some(&y0);
    writer.y1 = Some(&y1);
    writer.omega_true = Some(&ot);
    writer.tau_true = Some(&tt);
    let rendered = writer.render();
    let original = std::fs::read_to_string(&path).unwrap();
    assert_eq!(rendered, original, "re-rendered CSV differs from the original");
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = bin().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.to_lowercase().contains("usage") || err.contains("unrecognized"), "{err}");
}

#[test]
fn unknown_method_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    write(&path, "t,y,score__m1\n0,1,0.9\n1,0,0.2\n");
    let out = bin()
        .args(["estimate", path.to_str().unwrap(), "--method", "nope"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_file_is_a_data_error() {
    let out = bin().args(["estimate", "/nonexistent/x.csv"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn single_class_control_is_a_degenerate_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    write(&path, "t,y,score__m1\n0,1,0.9\n0,1,0.8\n1,0,0.2\n1,1,0.6\n");
    let out = bin()
        .args(["estimate", path.to_str().unwrap(), "--method", "standard", "--pi", "0.5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unknown_config_key_is_rejected_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    write(&cfg, "pool_sizee = 100\n");
    let out = bin()
        .args(["sweep-mae", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("pool_sizee"));
}

fn sample_report() -> ExperimentReport {
    ExperimentReport {
        metric: "mae".into(),
        provenance: serde_json::json!({"kind": "test", "base_seed": 7}),
        rows: vec![
            ReportRow {
                setting: "model=a;v=0.01".into(),
                methods: vec![
                    MethodSummary {
                        method: "standard".into(),
                        mean: 1.0 / 7.0,
                        ci_lo: 0.1,
                        ci_hi: 0.2,
                        used: 100,
                        skipped: 0,
                    },
                    MethodSummary {
                        method: "npw".into(),
                        mean: 1.0 / 3.0,
                        ci_lo: 0.3,
                        ci_hi: 0.4,
                        used: 99,
                        skipped: 1,
                    },
                ],
            },
            ReportRow { setting: "model=b;v=0.01".into(), methods: vec![] },
        ],
    }
}

#[test]
fn report_json_round_trip_is_exact() {
    let report = sample_report();
    let rendered = render_report(&report, Format::Json).unwrap();
    let parsed: ExperimentReport = serde_json::from_str(&rendered).unwrap();
    assert_eq!(parsed, report);
}

#[test]
fn report_csv_shape_and_precision() {
    let report = sample_report();
    let rendered = render_report(&report, Format::Csv).unwrap();
    let rows = parse_report_csv(&rendered).unwrap();
    // settings x methods x 3 stats; the empty row contributes none.
    assert_eq!(rows.len(), 2 * 3);
    let mean_row = rows.iter().find(|r| r.1 == "npw" && r.2 == "mean").unwrap();
    assert_eq!(mean_row.3, 1.0 / 3.0, "full-precision round trip");
    let empty_report = ExperimentReport {
        metric: "mae".into(),
        provenance: serde_json::json!({}),
        rows: vec![],
    };
    let rendered = render_report(&empty_report, Format::Csv).unwrap();
    assert_eq!(rendered, "setting,method,stat,value\n");
}

#[test]
fn select_flags_match_theory_on_constructed_file() {
    // Two models over the same samples with tau_hat provided. beta uses
    // the treated outcome rate; sigma comes from tau_hat and each
    // model's in-sample CDF. The flag must equal a direct evaluation of
    // the misselection condition.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    let mut content = String::from("t,y,score__f1,score__f2,omega_hat,tau_hat\n");
    // 8 samples, both arms two-class.
    let rows = [
        (0, 1, 0.90, 0.20, 0.7, 0.30),
        (0, 0, 0.80, 0.60, 0.3, -0.10),
        (0, 1, 0.30, 0.50, 0.6, 0.25),
        (0, 0, 0.10, 0.40, 0.4, 0.00),
        (1, 1, 0.85, 0.55, 0.7, 0.28),
        (1, 0, 0.20, 0.35, 0.3, -0.05),
        (1, 1, 0.75, 0.65, 0.6, 0.22),
        (1, 0, 0.40, 0.45, 0.4, 0.05),
    ];
    for (t, y, f1, f2, om, ta) in rows {
        content.push_str(&format!("{t},{y},{f1},{f2},{om},{ta}\n"));
    }
    write(&path, &content);
    let out = bin()
        .args(["select", path.to_str().unwrap(), "--method", "naive", "--pi", "0.5", "--tie", "half"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let parsed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let pair = &parsed["misselection"][0];

    // Independent evaluation through the library.
    let loaded = load_csv(&path, PiSource::Fixed(0.5)).unwrap();
    let nu = loaded.nuisance.unwrap();
    let tie = rct_auroc::TiePolicy::Half;
    let est = |idx: usize| {
        rct_auroc::estimators::auc_naive(&loaded.dataset, &loaded.scores[idx], tie)
            .unwrap()
            .value
    };
    let (e1, e2) = (est(0), est(1));
    let (hi, lo) = if e1 > e2 { (0, 1) } else { (1, 0) };
    let sigma = |idx: usize| {
        let cdf = rct_auroc::metrics::empirical_cdf(
            &loaded.scores[idx].scores,
            &loaded.scores[idx].scores,
            tie,
        )
        .unwrap();
        rct_auroc::theory::sigma_f(&nu.tau_hat, &cdf).unwrap()
    };
    let mu1 = 0.5; // two of four treated have y=1
    let beta = 0.5 / (mu1 * (1.0 - mu1));
    let expected = rct_auroc::theory::misselection_condition(
        e1.max(e2),
        e1.min(e2),
        beta,
        sigma(hi),
        sigma(lo),
    )
    .unwrap();
    assert_eq!(pair["flagged"].as_bool().unwrap(), expected);
    assert!((pair["beta"].as_f64().unwrap() - beta).abs() < 1e-12);
}

#[test]
fn estimate_output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rct.csv");
    assert!(bin()
        .args([
            "simulate", "--out", path.to_str().unwrap(), "--n", "80", "--pool-size", "1000",
            "--seed", "11", "--spectrum", "30,90",
        ])
        .status()
        .unwrap()
        .success());
    let run = || {
        bin()
            .args([
                "estimate",
                path.to_str().unwrap(),
                "--method",
                "all",
                "--pi",
                "0.5",
                "--oracle-nuisance",
            ])
            .output()
            .unwrap()
    };
    let a = run();
    let b = run();
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
}
