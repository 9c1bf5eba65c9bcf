//! End-to-end tests of the `lipbatch` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lipbatch::cli::record::parse_rows;

fn lipbatch(args: &[&str], seed_env: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lipbatch"));
    cmd.args(args).env_remove(lipbatch::cli::SEED_ENV);
    if let Some(s) = seed_env {
        cmd.env(lipbatch::cli::SEED_ENV, s);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn experiment(dir: &Path, name: &str, strategy: &str, seed: u64) -> (String, String) {
    let out = dir.join(format!("{name}.csv"));
    let body = format!(
        "# small forrester run\nbenchmark = forrester\nstrategy = {strategy}\nacquisition = ucb\nkappa = 2\nbatch_size = 3\niterations = 3\nreplicates = 2\ninit_size = 4\nseed = {seed}\nrecord_timing = false\noutput = {}\n",
        out.display()
    );
    (write_config(dir, &format!("{name}.cfg"), &body), out.to_str().unwrap().to_string())
}

#[test]
fn run_writes_rows_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, out) = experiment(dir.path(), "lp", "lp", 3);
    let o = lipbatch(&["run", &cfg], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (dim, rows) = parse_rows(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(dim, 1);
    // per replicate: 4 initial points + 3 rounds of 3
    assert_eq!(rows.len(), 2 * (4 + 3 * 3));
    assert_eq!(rows.iter().filter(|r| r.iteration == 0).count(), 2 * 4);
    let summary = fs::read_to_string(format!("{out}.summary.csv")).unwrap();
    assert!(summary.starts_with("method,benchmark,batch_size,replicates,completed,mean_final_best,std_final_best"));
    assert!(summary.lines().nth(1).unwrap().starts_with("lp-ucb,forrester,3,2,2,"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, out) = experiment(dir.path(), "a", "lp", 5);
    assert!(lipbatch(&["run", &cfg], None).status.success());
    let first = fs::read(&out).unwrap();
    assert!(lipbatch(&["run", &cfg], None).status.success());
    assert_eq!(first, fs::read(&out).unwrap());
}

#[test]
fn environment_seed_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, out) = experiment(dir.path(), "s", "rand", 1);
    assert!(lipbatch(&["run", &cfg], None).status.success());
    let from_config = fs::read(&out).unwrap();
    assert!(lipbatch(&["run", &cfg], Some("99")).status.success());
    let from_env = fs::read(&out).unwrap();
    assert_ne!(from_config, from_env);
    // the override is equivalent to writing the seed into the config
    let (cfg99, out99) = experiment(dir.path(), "s99", "rand", 99);
    let _ = fs::rename(&out, format!("{out}.env"));
    assert!(lipbatch(&["run", &cfg99], None).status.success());
    assert_eq!(from_env, fs::read(&out99).unwrap());
    assert_eq!(lipbatch(&["run", &cfg], Some("not-a-number")).status.code(), Some(2));
}

#[test]
fn summarize_recomputes_best_so_far_curves() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg_lp, out_lp) = experiment(dir.path(), "lp", "lp", 7);
    let (cfg_rand, out_rand) = experiment(dir.path(), "rand", "rand", 7);
    assert!(lipbatch(&["run", &cfg_lp], None).status.success());
    assert!(lipbatch(&["run", &cfg_rand], None).status.success());
    let series = dir.path().join("series.csv");
    let o = lipbatch(&["summarize", &out_lp, &out_rand, "-o", series.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&series).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), lipbatch::cli::summarize::SERIES_HEADER);

    // independent recomputation of the final mean best for the lp file
    let (_, rows) = parse_rows(&fs::read_to_string(&out_lp).unwrap()).unwrap();
    let finals: Vec<f64> = (0..2).map(|r| rows.iter().filter(|x| x.replicate == r).map(|x| x.y).fold(f64::INFINITY, f64::min)).collect();
    let expected = (finals[0] + finals[1]) / 2.0;
    let last_lp = text.lines().rfind(|l| l.starts_with("lp,")).unwrap();
    let fields: Vec<&str> = last_lp.split(',').collect();
    assert_eq!(fields[1], "3");
    assert_eq!(fields[2], "13");
    let mean_best: f64 = fields[4].parse().unwrap();
    assert!((mean_best - expected).abs() < 1e-12, "{mean_best} vs {expected}");
    assert_eq!(text.lines().filter(|l| l.starts_with("rand,")).count(), 4);
}

#[test]
fn summarize_rejects_mixed_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, out) = experiment(dir.path(), "one", "lp", 1);
    assert!(lipbatch(&["run", &cfg], None).status.success());
    let two = dir.path().join("two.csv");
    fs::write(&two, "replicate,iteration,batch_index,x0,x1,y,best_so_far,design_time_s,eval_time_s,wall_clock_s\n0,0,0,0.1,0.2,1.0,1.0,0,0,0\n").unwrap();
    let o = lipbatch(&["summarize", &out, two.to_str().unwrap(), "-o", dir.path().join("s.csv").to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("schema"), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("unknown_key.cfg", "benchmark = cosines\nbogus = 1\noutput = x.csv\n"),
        ("bad_strategy.cfg", "benchmark = cosines\nstrategy = qei\noutput = x.csv\n"),
        ("bad_number.cfg", "benchmark = cosines\nbatch_size = many\noutput = x.csv\n"),
        ("dup.cfg", "benchmark = cosines\nbenchmark = forrester\noutput = x.csv\n"),
        ("identity_ucb.cfg", "benchmark = cosines\nacquisition = ucb\ntransform = identity\noutput = x.csv\n"),
    ];
    for (name, body) in cases {
        let cfg = write_config(dir.path(), name, body);
        let o = lipbatch(&["run", &cfg], None);
        assert_eq!(o.status.code(), Some(2), "{name}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(lipbatch(&["run", dir.path().join("missing.cfg").to_str().unwrap()], None).status.code(), Some(2));
    assert_eq!(lipbatch(&["frobnicate"], None).status.code(), Some(2));
}

#[test]
fn lipschitz_study_reports_each_cell() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("study.csv");
    let cfg = write_config(
        dir.path(),
        "study.cfg",
        &format!("benchmark = cosines\nsample_sizes = 10, 30\nnoise_levels = 0, 0.1\nreplicates = 3\nrestarts = 3\nseed = 4\noutput = {}\n", out.display()),
    );
    let o = lipbatch(&["lipschitz-study", &cfg], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next().unwrap(), lipbatch::cli::study::STUDY_HEADER);
    assert_eq!(text.lines().count(), 1 + 4);
    for line in text.lines().skip(1) {
        let mean_l: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
        assert!(mean_l > 0.0 && mean_l < 30.0, "{line}");
    }
}

#[test]
fn selftest_passes() {
    let o = lipbatch(&["selftest"], None);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{stdout}");
    assert_eq!(stdout.lines().filter(|l| l.starts_with("[PASS]")).count(), 4);
}
