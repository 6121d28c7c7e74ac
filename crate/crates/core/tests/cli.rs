use std::path::Path;
use std::process::{Command, Output};

use arna::bench::{read_csv_path, summary_path, CSV_HEADER};
use arna::synth::read_scene;

fn arna(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_arna"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn small_run<'a>(extra: &[&'a str]) -> Vec<&'a str> {
    let mut args = vec![
        "run",
        "--pes",
        "4",
        "--particles-per-pe",
        "10",
        "--frames",
        "6",
        "--size",
        "48",
        "--replicates",
        "2",
    ];
    args.extend_from_slice(extra);
    args
}

#[test]
fn run_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = arna(&small_run(&["--algo", "rna", "--ratio", "0.5", "--out", "r.csv"]), dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = dir.path().join("r.csv");
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
    assert_eq!(text.lines().count(), 1 + 2 * 5);
    let rows = read_csv_path(&csv).unwrap();
    assert!(rows.iter().all(|r| r.run_id.starts_with("rna50-r")));
    assert!(summary_path(&csv).exists());
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("c.toml"),
        "algo = \"sir_independent\"\npes = 3\nparticles_per_pe = 8\nframes = 4\nreplicates = 1\n\n[scene.observation]\nwidth = 40\nheight = 40\n",
    )
    .unwrap();
    let out = arna(&["run", "--config", "c.toml", "--pes", "2", "--out", "o.csv"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_csv_path(&dir.path().join("o.csv")).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.run_id == "sir-r0" && r.pe_eff <= 2.0));
}

#[test]
fn parallel_backend_output_matches_sequential() {
    let dir = tempfile::tempdir().unwrap();
    for backend in ["sequential", "parallel"] {
        let out_name = format!("{backend}.csv");
        let out = arna(&small_run(&["--backend", backend, "--out", &out_name]), dir.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = std::fs::read(dir.path().join("sequential.csv")).unwrap();
    let b = std::fs::read(dir.path().join("parallel.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn gen_scene_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = arna(&["gen-scene", "--frames", "3", "--size", "32", "--seed", "9", "--out", "s.bin"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let scene = read_scene(&dir.path().join("s.bin")).unwrap();
    assert_eq!((scene.width(), scene.height(), scene.frames.len()), (32, 32, 3));
    assert_eq!(scene.seed, 9);
}

#[test]
fn report_reads_csvs() {
    let dir = tempfile::tempdir().unwrap();
    assert!(arna(&small_run(&["--out", "a.csv"]), dir.path()).status.success());
    let out = arna(&["report", "a.csv"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("arna-r0") && text.contains("arna-r1"));
    let json = arna(&["report", "--json", "a.csv"], dir.path());
    let v: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(v["runs"].as_array().unwrap().len(), 2);
}

#[test]
fn zero_replicates_succeeds_and_bad_input_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = arna(&["run", "--replicates", "0", "--out", "z.csv"], dir.path());
    assert!(out.status.success());
    assert!(!dir.path().join("z.csv").exists());
    assert!(!arna(&["run", "--pes", "0"], dir.path()).status.success());
    assert!(!arna(&["run", "--algo", "rna", "--ratio", "0.9"], dir.path()).status.success());
    assert!(!arna(&["report", "missing.csv"], dir.path()).status.success());
}
