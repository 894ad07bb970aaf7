use std::path::Path;
use std::process::{Command, Output};

use osde::basis::fit_scaling;
use osde::design::WeightedSample;
use osde::estimator::{iid_coefficients, ht_coefficients, search_cap};
use osde::io::CoefficientExport;

fn osde(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_osde")).args(args).output().unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write_survey(path: &Path, with_weights: bool) -> Vec<f64> {
    let xs: Vec<f64> = (0..100).map(|i| ((i * 37) % 100) as f64 / 25.0 + (i as f64 * 0.7).sin()).collect();
    let mut body = String::from(if with_weights { "x,weight\n" } else { "x\n" });
    for x in &xs {
        if with_weights {
            body.push_str(&format!("{x},10\n"));
        } else {
            body.push_str(&format!("{x}\n"));
        }
    }
    std::fs::write(path, body).unwrap();
    xs
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn estimate_uses_weight_total_and_default_delta() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("s.csv");
    let coeffs = dir.path().join("c.json");
    write_survey(&input, true);
    ok(&osde(&["estimate", "--input", path_str(&input), "--out-coeffs", path_str(&coeffs)]));
    let export = CoefficientExport::from_json(&std::fs::read_to_string(&coeffs).unwrap()).unwrap();
    assert_eq!(export.population_size, 1000);
    assert_eq!(export.n, 100);
    assert_eq!(export.delta, -0.01);
    assert_eq!(export.cutoff_cap, search_cap(100));
    assert!(export.cutoff <= export.cutoff_cap);
}

#[test]
fn eval_grid_reproduces_density_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("s.csv");
    let coeffs = dir.path().join("c.json");
    let density = dir.path().join("d.csv");
    write_survey(&input, true);
    ok(&osde(&[
        "estimate",
        "--input",
        path_str(&input),
        "--method",
        "smoothed",
        "--grid",
        "512",
        "--out-coeffs",
        path_str(&coeffs),
        "--out-density",
        path_str(&density),
    ]));
    let written = std::fs::read_to_string(&density).unwrap();
    let evaluated = ok(&osde(&["eval", "--coeffs", path_str(&coeffs), "--grid", "512"]));
    assert_eq!(written.lines().next().unwrap(), "u,x,density,design_sd");
    assert_eq!(written.lines().count(), 513);
    let parse = |s: &str| -> Vec<Vec<f64>> {
        s.lines()
            .skip(1)
            .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
            .collect()
    };
    for (a, b) in parse(&written).iter().zip(parse(&evaluated)) {
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-15);
        }
    }
}

#[test]
fn missing_weights_reduce_to_unweighted_fit() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("s.csv");
    let coeffs = dir.path().join("c.json");
    let xs = write_survey(&input, false);
    ok(&osde(&["estimate", "--input", path_str(&input), "--out-coeffs", path_str(&coeffs)]));
    let export = CoefficientExport::from_json(&std::fs::read_to_string(&coeffs).unwrap()).unwrap();
    assert_eq!(export.population_size, 100);

    let scaling = fit_scaling(&xs, 0.01).unwrap();
    let sample = WeightedSample::new(xs, vec![1.0; 100], 100, -0.01).unwrap();
    let j_max = 2 * search_cap(100);
    let ht = ht_coefficients(&sample, &scaling, j_max).unwrap();
    let iid = iid_coefficients(&sample, &scaling, j_max).unwrap();
    for j in 0..=j_max {
        assert!((export.theta[j] - iid.theta[j]).abs() <= 1e-12);
        assert!((ht.theta[j] - iid.theta[j]).abs() <= 1e-12);
    }
}

#[test]
fn eval_uniform_export_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let coeffs = dir.path().join("u.json");
    let json = r#"{"format_version": 1, "method": "truncated", "N": 1000, "n": 100, "delta": -0.01,
        "J": 0, "J_cap": 6, "scaling": {"a": 0.0, "b": 1.0}, "theta": [1.0, 0.01, 0.02], "w": []}"#;
    std::fs::write(&coeffs, json).unwrap();
    let out = ok(&osde(&["eval", "--coeffs", path_str(&coeffs), "--at", "0", "0.37", "1"]));
    for line in out.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[2], "1");
        assert_eq!(fields[3], "0");
    }
    let out = ok(&osde(&["eval", "--coeffs", path_str(&coeffs), "--at-x", "0.5", "2"]));
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert!(rows[0].starts_with("0.5,0.5,1,"));
    assert!(rows[1].starts_with("2,2,0,"));
}

#[test]
fn theory_table() {
    let out = ok(&osde(&["theory", "--k", "1", "--q", "1", "--b", "2", "--n", "1000"]));
    let row = out.lines().find(|l| l.starts_with("1000,")).unwrap();
    let bound: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    let expected = (1.0 / (4.0 * std::f64::consts::PI)).powf(2.0 / 3.0) / 100.0;
    assert!((bound - expected).abs() / expected < 1e-6);
}

#[test]
fn benchmark_writes_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cfg.json");
    let csv = dir.path().join("r.csv");
    let json = dir.path().join("r.json");
    std::fs::write(
        &config,
        r#"{"superpopulation": {"components": [[0.4, -1.0, 0.5], [0.6, 1.0, 1.0]]},
            "superpopulation_label": "bimodal",
            "design": {"type": "poisson", "rule": "log-shift"},
            "population_size": 300, "sample_sizes": [20, 40],
            "populations": 2, "replicates": 10, "grid": 256}"#,
    )
    .unwrap();
    let run = |threads: &str| {
        let out = osde(&[
            "benchmark",
            "--config",
            path_str(&config),
            "--out-csv",
            path_str(&csv),
            "--out-json",
            path_str(&json),
            "--seed",
            "3",
            "--threads",
            threads,
        ]);
        ok(&out);
        assert!(String::from_utf8_lossy(&out.stderr).contains("n = 40"));
        let report: osde::harness::MiseReport =
            serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
        report
    };
    let a = run("1");
    let b = run("4");
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 3);
    assert!(text.lines().nth(1).unwrap().starts_with("poisson,bimodal,truncated,20,"));
    assert_eq!(a.provenance.seed, 3);
    assert_eq!(a.to_csv(false).unwrap(), b.to_csv(false).unwrap());
}

#[test]
fn errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    std::fs::write(&input, "x,weight\n1,NaN\n2,3\n").unwrap();
    let out = osde(&["estimate", "--input", path_str(&input), "--out-coeffs", "/dev/null"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));

    let out = osde(&["estimate", "--input", "/nonexistent.csv", "--out-coeffs", "/dev/null"]);
    assert!(!out.status.success());

    let coeffs = dir.path().join("u.json");
    std::fs::write(&coeffs, r#"{"format_version": 1}"#).unwrap();
    assert!(!osde(&["eval", "--coeffs", path_str(&coeffs), "--at", "0.5"]).status.success());
}
