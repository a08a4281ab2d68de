use std::fs;
use std::path::Path;

use genedrift::diagnostics::RECORD_HEADER;
use genedrift::experiment::{run_experiment, ExperimentConfig};

fn config(dir: &Path, body: &str) -> ExperimentConfig {
    ExperimentConfig::parse(&format!("output_dir = {}\n{body}", dir.display())).unwrap()
}

fn lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(String::from).collect()
}

#[test]
fn run_writes_record_and_final_map() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let report = run_experiment(&config(&out, "mode = run\ndensity = 2x\nn = 30\ntau = 0.01\nt_final = 0.2\nstride = 5")).unwrap();
    assert_eq!(report.files, vec![out.join("record.csv"), out.join("final_map.csv")]);
    let record = lines(&out.join("record.csv"));
    assert_eq!(record[0], RECORD_HEADER.join(","));
    assert_eq!(record.len(), 1 + 5);
    let map = lines(&out.join("final_map.csv"));
    assert_eq!(map[0], "i,eta,phi");
    assert_eq!(map.len(), 1 + 31);
    assert!(map[1].starts_with("0,0.000000000000000e0,"));
}

#[test]
fn decay_reports_a_rate_for_diffusion() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment(&config(dir.path(), "mode = decay\ndensity = 2x\nn = 60\ntau = 0.005\nt_final = 4")).unwrap();
    let summary = report.summary.join("\n");
    let rate: f64 = summary.rsplit(": ").next().unwrap().parse().unwrap();
    assert!((1.6..2.4).contains(&rate), "{summary}");
    assert!(dir.path().join("steady_map.csv").exists());
}

#[test]
fn eoc_tables_have_one_row_per_level() {
    let dir = tempfile::tempdir().unwrap();
    let body = "density = sine\nt_final = 0.032\nspace_levels = 10, 20, 40\nreference_n = 80\nreference_tau = 0.002\ntime_levels = 0.016, 0.008, 0.004";
    run_experiment(&config(dir.path(), &format!("mode = eoc-space\n{body}"))).unwrap();
    run_experiment(&config(dir.path(), &format!("mode = eoc-time\n{body}"))).unwrap();
    let space = lines(&dir.path().join("eoc_space.csv"));
    assert_eq!(space[0], "h,error,eoc");
    assert_eq!(space.len(), 4);
    assert!(space[1].ends_with(','));
    let time = lines(&dir.path().join("eoc_time.csv"));
    assert_eq!(time[0], "tau,error,eoc");
    assert_eq!(time.len(), 4);
}

#[test]
fn jump_table_lists_every_case() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment(&config(
        dir.path(),
        "mode = jump-table\nn = 40\ntau = 0.01\nt_final = 1\ncases = x^2:0:2; indicator:-3:1",
    ))
    .unwrap();
    let table = lines(&dir.path().join("jump_table.csv"));
    assert_eq!(table[0], "density,potential,theoretical,numerical,error");
    assert_eq!(table.len(), 3);
    assert!(table[1].starts_with("x^2,2,4.0651"), "{}", table[1]);
    assert_eq!(report.summary.len(), 2);
}

#[test]
fn identical_configs_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let body = "mode = run\ndensity = bimodal\nalpha = -3\nbeta = 1\nn = 25\ntau = 0.01\nt_final = 0.3";
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run_experiment(&config(&a, body)).unwrap();
    run_experiment(&config(&b, body)).unwrap();
    for name in ["record.csv", "final_map.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap());
    }
}
