//! Black-box tests of the `qanneal` binary: exit codes, output headers,
//! byte-level reproducibility, and the bundled parameter presets.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn qanneal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qanneal"))
        .args(args)
        .output()
        .expect("binary runs")
}

/// Fresh scratch directory under the target-adjacent temp root.
fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("qanneal-cli-test-{name}"));
    let _ = fs::remove_dir_all(&dir);
    dir
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

fn assert_same_tree(a: &Path, b: &Path) {
    let mut names: Vec<String> = fs::read_dir(a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert!(!names.is_empty(), "no artifacts in {}", a.display());
    for name in names {
        let left = fs::read(a.join(&name)).unwrap();
        let right = fs::read(b.join(&name))
            .unwrap_or_else(|e| panic!("{name} missing from {}: {e}", b.display()));
        assert_eq!(left, right, "{name} differs between runs");
    }
}

#[test]
fn usage_errors_exit_2() {
    let cases: &[&[&str]] = &[
        // An empty scan grid has no output to produce.
        &["gap-scan", "--n", "10", "--grid", "0"],
        // Size is mandatory for instance-driven commands.
        &["min-gap"],
        &["dos", "--n", "10", "--model", "heisenberg"],
        &["gap-scan", "--n", "10", "--preset", "n15"],
        &["evolve", "--n", "8"],
        &["tstar", "--n", "10", "--target-p", "1.5"],
        &["dos", "--n", "10", "--require-sat", "--allow-unsat"],
    ];
    for args in cases {
        let out = qanneal(args);
        assert_eq!(
            out.status.code(),
            Some(2),
            "{args:?} should be a usage error; stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    // Unknown flags are usage errors too (clap's own exit code).
    let out = qanneal(&["min-gap", "--n", "10", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn module_errors_exit_1_with_error_json() {
    // 2^40 states cannot be enumerated; the failure must surface as a
    // machine-readable error on stderr.
    let dir = scratch("module-error");
    let out = qanneal(&["dos", "--n", "40", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    let doc: serde_json::Value =
        serde_json::from_str(stderr.trim()).unwrap_or_else(|e| panic!("stderr not JSON ({e}): {stderr}"));
    assert_eq!(doc["error"]["kind"], "EnumerationLimit");
    assert!(doc["error"]["message"].as_str().unwrap().contains("2^40"));
}

#[test]
fn outputs_are_byte_reproducible() {
    let a = scratch("repro-a");
    let b = scratch("repro-b");
    let args = |dir: &Path| {
        vec![
            "min-gap".to_string(),
            "--n".into(),
            "10".into(),
            "--seed".into(),
            "3".into(),
            "--out".into(),
            dir.to_str().unwrap().into(),
        ]
    };
    let run_a = qanneal(&args(&a).iter().map(String::as_str).collect::<Vec<_>>());
    assert!(run_a.status.success(), "{}", String::from_utf8_lossy(&run_a.stderr));
    // Second run with an explicit thread count: bytes must not depend on
    // parallelism or on the output location.
    let mut argv = args(&b);
    argv.extend(["--jobs".into(), "1".into()]);
    let run_b = qanneal(&argv.iter().map(String::as_str).collect::<Vec<_>>());
    assert!(run_b.status.success(), "{}", String::from_utf8_lossy(&run_b.stderr));
    assert_same_tree(&a, &b);
}

#[test]
fn headers_carry_version_and_config_hash() {
    let dir = scratch("headers");
    let out = qanneal(&[
        "dos", "--n", "8", "--seed", "1", "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let csv = read(&dir.join("shells.csv"));
    let mut lines = csv.lines();
    let version = env!("CARGO_PKG_VERSION");
    assert_eq!(lines.next(), Some(format!("# qanneal {version}").as_str()));
    assert_eq!(lines.next(), Some("# command: dos"));
    let sha_line = lines.next().unwrap();
    let sha = sha_line.strip_prefix("# config-sha256: ").expect("hash header");
    assert_eq!(sha.len(), 64);
    assert!(sha.chars().all(|c| c.is_ascii_hexdigit()));

    for file in ["dos.json", "config.json"] {
        let doc: serde_json::Value = serde_json::from_str(&read(&dir.join(file))).unwrap();
        assert_eq!(doc["tool"]["version"], version, "{file}");
        assert_eq!(doc["tool"]["config_sha256"], sha, "{file}");
    }
}

#[test]
fn gen_and_dos_agree_on_the_instance() {
    let dir = scratch("gen");
    let out = qanneal(&["gen", "--model", "sat3", "--n", "8", "--m", "34", "--seed", "9", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_str(&read(&dir.join("instance.json"))).unwrap();
    assert_eq!(doc["info"]["n"], 8);
    assert_eq!(doc["instance"]["clauses"].as_array().unwrap().len(), 34);
    let child = doc["seeding"]["child_seed"].as_u64().unwrap();

    let dir2 = scratch("gen-dos");
    let out = qanneal(&["dos", "--n", "8", "--m", "34", "--seed", "9", "--allow-unsat", "--out", dir2.to_str().unwrap()]);
    assert!(out.status.success());
    let doc2: serde_json::Value = serde_json::from_str(&read(&dir2.join("dos.json"))).unwrap();
    // Same master seed, same child: the analyzed density belongs to the
    // generated instance.
    assert_eq!(doc2["seeding"]["child_seed"].as_u64().unwrap(), child);

    let shells = read(&dir2.join("shells.csv"));
    let total: u64 = shells
        .lines()
        .skip(4)
        .map(|l| l.split(',').nth(1).unwrap().parse::<u64>().unwrap())
        .sum();
    assert_eq!(total, 256, "shell counts must cover all 2^8 states");
}

/// The reference accuracy scan: at n = 20, clause density 4.2 and
/// delta = 0.01, the closed-form gap must track the exact gap to 1%
/// everywhere inside the validity window.
#[test]
fn fig3_preset_meets_gap_accuracy() {
    let dir = scratch("fig3");
    let out = qanneal(&[
        "gap-scan", "--preset", "reproduce-fig3", "--seed", "1", "--grid", "128",
        "--out", dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let summary: serde_json::Value = serde_json::from_str(&read(&dir.join("summary.json"))).unwrap();
    assert_eq!(summary["n"], 20);
    assert_eq!(summary["delta"], 0.01);
    let max_err = summary["max_rel_gap_error_in_window"].as_f64().unwrap();
    assert!(summary["in_window_points"].as_u64().unwrap() > 10);
    assert!(max_err <= 0.01, "in-window gap error {max_err} exceeds delta");

    // Independent check straight from the CSV.
    let csv = read(&dir.join("gap_scan.csv"));
    let mut worst = 0.0f64;
    let mut in_window = 0;
    for line in csv.lines().skip(4) {
        let f: Vec<&str> = line.split(',').collect();
        if f[5] == "1" && f[6] == "0" {
            let exact: f64 = f[3].parse().unwrap();
            let approx: f64 = f[4].parse().unwrap();
            worst = worst.max((approx - exact).abs() / exact);
            in_window += 1;
        }
    }
    assert!(in_window > 10);
    assert!(worst <= 0.01, "CSV-recomputed in-window error {worst} exceeds delta");

    // The alias command is the same experiment: same hash, same bytes.
    let alias = scratch("fig3-alias");
    let out = qanneal(&["fig3", "--seed", "1", "--grid", "128", "--out", alias.to_str().unwrap()]);
    assert!(out.status.success());
    assert_same_tree(&dir, &alias);
}

#[test]
fn run_replays_a_saved_config() {
    let first = scratch("replay-first");
    let out = qanneal(&[
        "schedule", "--n", "10", "--seed", "4", "--grid", "48",
        "--out", first.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let second = scratch("replay-second");
    let cfg = first.join("config.json");
    let out = qanneal(&[
        "run", "--config", cfg.to_str().unwrap(), "--out", second.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_same_tree(&first, &second);
}

#[test]
fn schedule_table_is_monotone() {
    let dir = scratch("schedule");
    let out = qanneal(&["schedule", "--n", "8", "--seed", "2", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(&dir.join("schedule.csv"));
    let rows: Vec<(f64, f64, f64)> = csv
        .lines()
        .skip(4)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    assert!(rows.len() >= 96);
    assert_eq!(rows.first().unwrap().0, 0.0);
    assert_eq!(rows.last().unwrap().0, 1.0);
    for w in rows.windows(2) {
        assert!(w[1].0 > w[0].0, "beta must increase");
        assert!(w[1].1 >= w[0].1, "z must not decrease");
    }
    for &(_, _, zd) in &rows {
        assert!(zd > 0.0, "the optimized schedule never stalls");
    }
}

#[test]
fn evolve_reports_a_success_probability() {
    let dir = scratch("evolve");
    let out = qanneal(&[
        "evolve", "--n", "8", "--seed", "2", "--t", "30", "--log-points", "16",
        "--out", dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_str(&read(&dir.join("run.json"))).unwrap();
    let p_final = doc["p_final"].as_f64().unwrap();
    let p_init = doc["p_initial"].as_f64().unwrap();
    assert!(p_final > p_init, "annealing should concentrate weight on solutions");
    assert!(p_final <= 1.0 + 1e-12);
    assert!(doc["max_norm_error"].as_f64().unwrap() < 1e-8);
    // 16 sampling intervals plus the initial point.
    let csv = read(&dir.join("run.csv"));
    assert_eq!(csv.lines().count(), 4 + 17);
}

/// Closed-form single-solution model: T* by bisection, and the sweep's
/// fitted exponent close to the square-root scaling.
#[test]
fn grover_tstar_sweep_shows_square_root_exponent() {
    let dir = scratch("tstar-grover");
    let out = qanneal(&[
        "tstar", "--model", "grover", "--n-min", "8", "--n-max", "12",
        "--out", dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_str(&read(&dir.join("tstar.json"))).unwrap();
    let slope = doc["fit_log2_t_vs_n"]["slope"].as_f64().unwrap();
    assert!((slope - 0.5).abs() < 0.1, "T* exponent {slope} far from 0.5");

    let csv = read(&dir.join("tstar.csv"));
    for line in csv.lines().skip(4) {
        let f: Vec<&str> = line.split(',').collect();
        let t_star: f64 = f[2].parse().unwrap();
        let bound: f64 = f[5].parse().unwrap();
        assert!(t_star >= bound, "T* {t_star} below the algebraic floor {bound}");
    }
}

#[test]
fn transverse_batch_reports_instances_and_sizes() {
    let dir = scratch("transverse");
    let out = qanneal(&[
        "transverse", "--model", "sat3", "--n", "8", "--count", "3", "--seed", "5",
        "--out", dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let inst = read(&dir.join("instances.csv"));
    assert_eq!(inst.lines().count(), 4 + 3);
    for line in inst.lines().skip(4) {
        let f: Vec<&str> = line.split(',').collect();
        let a_star: f64 = f[2].parse().unwrap();
        let g_star: f64 = f[3].parse().unwrap();
        assert!(a_star > 0.0 && a_star < 1.0);
        assert!(g_star > 0.0);
    }
    let sizes = read(&dir.join("sizes.csv"));
    let row: Vec<&str> = sizes.lines().nth(4).unwrap().split(',').collect();
    assert_eq!(row[0], "8");
    assert_eq!(row[2], "3");
}

#[test]
fn satstats_reports_partition_sum_variances() {
    let dir = scratch("satstats");
    let out = qanneal(&[
        "satstats", "--n", "12", "--count", "400", "--seed", "7",
        "--out", dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_str(&read(&dir.join("satstats.json"))).unwrap();
    assert_eq!(doc["m"], 50);
    assert!(doc["var_z1"].as_f64().unwrap() > 0.0);
    assert!(doc["var_z2"].as_f64().unwrap() > 0.0);
    // 400 instances only smoke-test the Monte Carlo path; the tight
    // comparison lives in the n15 preset and the core tests.
    let err = doc["monte_carlo"]["max_abs_cov_error"].as_f64().unwrap();
    assert!(err > 0.0 && err < 1e-2);
}

/// Sampled large-n landscapes: every minimum sits in the same narrow gap
/// band while the locations scatter over thousands of widths.
#[test]
fn fig1_minima_are_isolated_and_uniform() {
    let dir = scratch("fig1");
    let out = qanneal(&[
        "fig1", "--count", "8", "--seed", "2", "--out", dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_str(&read(&dir.join("fig1.json"))).unwrap();
    assert_eq!(doc["n"], 100);
    let ratio = doc["spread_to_width_ratio"].as_f64().unwrap();
    assert!(ratio > 1e3, "spread ratio {ratio} too small");
    let g_min = doc["g_star_min"].as_f64().unwrap();
    let g_max = doc["g_star_max"].as_f64().unwrap();
    assert!(g_min >= 1e-16 && g_max <= 1e-14, "band [{g_min}, {g_max}]");

    let curves = read(&dir.join("curves.csv"));
    assert!(curves.lines().count() > 4 + 8 * 9);
}

#[test]
fn fig16b_tail_slopes_approach_references() {
    let dir = scratch("fig16b");
    let out = qanneal(&["fig16b", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_str(&read(&dir.join("scaling.json"))).unwrap();
    let t1 = doc["sd_z1_tail_slope"].as_f64().unwrap();
    let t2 = doc["sd_z2_tail_slope"].as_f64().unwrap();
    assert!((t1 + 2.5).abs() < 0.4, "sd(Z1) tail slope {t1}");
    assert!((t2 + 3.5).abs() < 0.4, "sd(Z2) tail slope {t2}");
    let csv = read(&dir.join("variance.csv"));
    assert_eq!(csv.lines().count(), 4 + 5);
}
