use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn covsel(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_covsel"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn h_of(out: &str) -> f64 {
    out.lines()
        .find_map(|l| l.strip_prefix("h = "))
        .expect("h line")
        .parse()
        .unwrap()
}

const QUIET: &str = r#"
seed = 4
replications = 1
test_points = 500

[procedure]
mode = "hom"
form = "expectation"
h = 3.0

[problem]
kind = "linear"
beta = [[1.0, 1.0, 1.0, 1.0], [0.0, 1.0, 1.0, 1.0], [0.0, 1.0, 1.0, 1.0]]
noise = { kind = "hom", sigma = [1e-9, 1e-9, 1e-9] }
distribution = [
  { kind = "uniform", lo = 0.0, hi = 1.0 },
  { kind = "uniform", lo = 0.0, hi = 1.0 },
  { kind = "uniform", lo = 0.0, hi = 1.0 },
]
design = [[0.0, 0.0, 0.0], [0.0, 0.0, 0.5], [0.0, 0.5, 0.0], [0.0, 0.5, 0.5],
          [0.5, 0.0, 0.0], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0], [0.5, 0.5, 0.5]]
"#;

#[test]
fn solve_h_benchmark_forms() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let cache = cache.to_str().unwrap();
    let hom = write(dir.path(), "hom.toml", "[problem]\nkind = \"builtin\"\nid = 0\n");
    let o = covsel(&["--config", hom.to_str().unwrap(), "--cache-dir", cache, "solve-h"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    // independently computed root of the expectation-form bound
    assert!((h_of(&text) - 3.3903).abs() < 2e-3, "{text}");
    assert!(text.contains("dof = 396"));
    assert!(text.contains("h = 3.3903"), "four decimals: {text}");

    let het = write(
        dir.path(),
        "het.toml",
        "[procedure]\nmode = \"het\"\nform = \"minimum\"\n[problem]\nkind = \"builtin\"\nid = 0\n",
    );
    let o = covsel(&["--config", het.to_str().unwrap(), "--cache-dir", cache, "solve-h"], dir.path());
    let text = stdout(&o);
    assert!((h_of(&text) - 6.990).abs() < 0.01, "{text}");
    assert!(text.contains("dof = 49"));
    assert!(text.contains("x0 = (1, 1, 1)"));
    // the cache now holds both constants and reproduces them
    assert_eq!(std::fs::read_dir(dir.path().join("cache")).unwrap().count(), 2);
    let again = covsel(&["--config", het.to_str().unwrap(), "--cache-dir", cache, "solve-h"], dir.path());
    assert_eq!(stdout(&again), text);
}

#[test]
fn infeasible_alpha_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    // k = 2 needs alpha < 1/2
    let cfg = write(
        dir.path(),
        "a.toml",
        "[procedure]\nalpha = 0.6\n[problem]\nkind = \"builtin\"\nid = 1\n",
    );
    let o = covsel(&["--config", cfg.to_str().unwrap(), "--no-cache", "solve-h"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("alpha"), "{}", stderr(&o));
}

#[test]
fn zero_noise_run_is_perfect_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "quiet.toml", QUIET);
    let out1 = dir.path().join("a.csv");
    let o = covsel(
        &["--config", cfg.to_str().unwrap(), "--out", out1.to_str().unwrap(), "run"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(&out1).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "Problem,Procedure,h,Sample,PCS_E,PCS_min");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[3], "1200", "k·m·n₀ = 3·8·50");
    assert_eq!(row[4], "1.0000");
    assert_eq!(row[5], "1.0000");
    assert!(dir.path().join("a-records.csv").exists());
}

#[test]
fn run_output_identical_across_reruns_and_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "b.toml",
        "seed = 11\nreplications = 16\ntest_points = 300\n[procedure]\nmode = \"het\"\nh = 4.0\n[problem]\nkind = \"builtin\"\nid = 6\n",
    );
    let mut outputs = Vec::new();
    for (i, workers) in ["1", "1", "3"].iter().enumerate() {
        let out = dir.path().join(format!("r{i}.csv"));
        let o = covsel(
            &["--config", cfg.to_str().unwrap(), "--workers", workers, "--out", out.to_str().unwrap(), "run"],
            dir.path(),
        );
        assert!(o.status.success(), "{}", stderr(&o));
        outputs.push((
            std::fs::read(&out).unwrap(),
            std::fs::read(dir.path().join(format!("r{i}-records.csv"))).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
    // a different seed changes the records
    let out = dir.path().join("s.csv");
    covsel(
        &["--config", cfg.to_str().unwrap(), "--seed", "12", "--out", out.to_str().unwrap(), "run"],
        dir.path(),
    );
    assert_ne!(std::fs::read(dir.path().join("s-records.csv")).unwrap(), outputs[0].1);
}

#[test]
fn missing_config_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let o = covsel(&["--config", "no/such/file.toml", "run"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no/such/file.toml"));
    let o = covsel(&["run"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unknown_config_key_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "replicashuns = 3\n");
    let o = covsel(&["--config", cfg.to_str().unwrap(), "run"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("replicashuns"), "{}", stderr(&o));
}

#[test]
fn numerical_failure_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "inf.toml",
        r#"
replications = 1
test_points = 1
[procedure]
h = 2.0
n0 = 5
[problem]
kind = "linear"
beta = [[0.0, 1.0], [0.5, 0.0]]
noise = { kind = "hom", sigma = [1e300, 1.0] }
distribution = [{ kind = "uniform", lo = 0.0, hi = 1.0 }]
design = [[0.0], [1.0]]
"#,
    );
    let o = covsel(&["--config", cfg.to_str().unwrap(), "run"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn reproduce_rejects_bad_scale_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = covsel(&["reproduce", "--table", "1", "--scale", "0"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = covsel(&["reproduce", "--table", "1", "--scale", "1.5"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = covsel(&["reproduce", "--table", "3", "--scale", "0.01"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn reproduce_minimum_table_het_problem() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t2.csv");
    let cache = dir.path().join("cache");
    let o = covsel(
        &[
            "--seed",
            "5",
            "--cache-dir",
            cache.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "reproduce",
            "--table",
            "2",
            "--scale",
            "0.02",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 18);
    let het = rows.iter().find(|r| r[0] == "(6) Het" && r[1] == "FDHet").unwrap();
    let pcs_min: f64 = het[5].parse().unwrap();
    assert!(pcs_min >= 0.95, "FDHet PCS_min on the heteroscedastic problem: {pcs_min}");
    // every minimum-form h for a d = 3 row matches the published constant
    for r in rows.iter().filter(|r| r[0] != "(7) d=1" && r[0] != "(8) d=5") {
        let (h, reference): (f64, f64) = (r[2].parse().unwrap(), r[6].parse().unwrap());
        assert!((h - reference).abs() <= 0.01, "{r:?}");
    }
}

#[test]
fn case_study_without_drug_effects_flags_ties() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "params.toml",
        r#"
[[regimens]]
name = "surveillance"
utility = 1.0
effect = { fixed = 0.0 }

[[regimens]]
name = "aspirin"
utility = 0.995
effect = { fixed = 0.0 }

[[regimens]]
name = "statin"
utility = 0.995
effect = { fixed = 0.0 }
"#,
    );
    let cfg = write(
        dir.path(),
        "cs.toml",
        "seed = 2\nreplications = 2\ntest_points = 200\n[procedure]\nn0 = 20\ndelta = 0.5\n[problem]\nkind = \"markov\"\nparams_file = \"params.toml\"\n",
    );
    let o = covsel(&["--config", cfg.to_str().unwrap(), "--no-cache", "case-study"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("near ties: surveillance, aspirin, statin"), "{text}");
    assert!(text.contains("personalized"));
}

#[test]
fn shipped_configs_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_str().unwrap();
        // parameter files are referenced from run configs, not run directly
        if path.extension().is_none_or(|e| e != "toml") || name == "markov_params.toml" {
            continue;
        }
        let cfg = covsel_cli::config::RunConfig::load(&path).unwrap();
        cfg.validate().unwrap();
        cfg.problem(&dir).unwrap_or_else(|e| panic!("{name}: {e}"));
        seen += 1;
    }
    assert!(seen >= 4);
}
