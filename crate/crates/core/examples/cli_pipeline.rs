//! The full command-line pipeline, driven in-process:
//! synth -> build -> locate (three methods) -> report.

use std::path::PathBuf;

fn run(args: &[&str]) {
    let code = rfmpos::cli::run(std::iter::once("rfmpos").chain(args.iter().copied()));
    assert_eq!(code, 0, "rfmpos {}", args.join(" "));
}

fn main() {
    let dir: PathBuf = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("rfmpos-demo"));
    let p = |s: &str| dir.join(s).to_string_lossy().into_owned();
    std::fs::create_dir_all(dir.join("runs")).expect("output directory");

    run(&["synth", "--seed", "7", "--out-dir", &p("data")]);
    run(&["build", "--raw", &p("data/raw.jsonl"), "--out", &p("rfm.json")]);
    for m in ["knn", "cdm", "iterative"] {
        let out = p(&format!("runs/{m}.jsonl"));
        run(&["locate", "--rfm", &p("rfm.json"), "--obs", &p("data/test.jsonl"), "--method", m, "--out", &out]);
    }
    run(&["report", "--runs", &p("runs"), "--truth", &p("data/test.jsonl")]);

    print!("{}", std::fs::read_to_string(dir.join("runs/report.csv")).expect("report written"));
    println!("artifacts in {}", dir.display());
}
