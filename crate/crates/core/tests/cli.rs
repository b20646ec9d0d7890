use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qpcd::pipeline::DetectReport;

const BIN: &str = env!("CARGO_BIN_EXE_qpcd");

/// Small beats so a corpus runs in seconds.
const SMALL: &[&str] = &[
    "--exact-ot",
    "--set",
    "synth.sample_rate=100",
    "--set",
    "embed={\"m\":49,\"s\":2,\"dt\":2}",
    "--set",
    "detector.stride=10",
    "--set",
    "bootstrap.replications=100",
];

fn run(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).env_remove("QPCD_THREADS");
    if let Some(t) = threads {
        cmd.env("QPCD_THREADS", t);
    }
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn generate(dir: &Path, count: usize, seed: u64, extra: &[&str]) -> Output {
    let count = count.to_string();
    let seed = seed.to_string();
    let mut args = vec!["generate", "--count", &count, "--seed", &seed, "--out", p(dir)];
    args.extend_from_slice(SMALL);
    args.extend_from_slice(extra);
    run(&args, None)
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    files
        .into_iter()
        .map(|f| (f.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&f).unwrap()))
        .collect()
}

fn write_series(path: &Path, values: impl Iterator<Item = f64>) {
    let text: String = values.map(|v| format!("{v}\n")).collect();
    fs::write(path, text).unwrap();
}

#[test]
fn empty_corpus_has_empty_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("c");
    let o = generate(&out, 0, 1, &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["entries"].as_array().unwrap().len(), 0);
}

#[test]
fn same_seed_gives_identical_corpus() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    for (d, seed) in [(&a, 9), (&b, 9), (&c, 10)] {
        assert_eq!(code(&generate(d, 7, seed, &[])), 0);
    }
    let (da, db, dc) = (dir_bytes(&a), dir_bytes(&b), dir_bytes(&c));
    assert_eq!(da.len(), 7 * 2 + 1);
    assert_eq!(da, db);
    assert_ne!(da, dc);
}

#[test]
fn constant_input_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let f = tmp.path().join("flat.csv");
    write_series(&f, std::iter::repeat_n(1.5, 600));
    let args = [
        "detect",
        p(&f),
        "--exact-ot",
        "--set",
        "detector.period_samples=20",
        "--set",
        "embed={\"m\":19,\"s\":1,\"dt\":1}",
    ];
    let o = run(&args, None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("change=false"));
    assert!(stdout.contains("flagged=[]"));
}

#[test]
fn clear_change_exits_two_and_plots() {
    let tmp = tempfile::tempdir().unwrap();
    let f = tmp.path().join("step.csv");
    let tau = std::f64::consts::TAU;
    write_series(
        &f,
        (0..800).map(|i| {
            let t = i as f64;
            if i < 400 { (tau * t / 20.0).sin() } else { 3.0 * (tau * t / 7.0).sin() }
        }),
    );
    let out = tmp.path().join("res");
    let args = [
        "detect",
        p(&f),
        "--out",
        p(&out),
        "--svg",
        "--exact-ot",
        "--set",
        "detector.period_samples=20",
        "--set",
        "embed={\"m\":19,\"s\":1,\"dt\":1}",
    ];
    let o = run(&args, None);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("step.svg").exists());
    let result = out.join("step.result.json");
    let report = DetectReport::load(&result).unwrap();
    assert!(report.result.change_detected);
    assert!(!report.result.flagged.is_empty());

    let plots = tmp.path().join("plots");
    let o = run(&["plot", p(&result), "--out", p(&plots)], None);
    assert_eq!(code(&o), 0);
    assert!(fs::read_to_string(plots.join("step.svg")).unwrap().contains("<polyline"));
}

#[test]
fn malformed_input_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let f = tmp.path().join("bad.csv");
    fs::write(&f, "1.0\n2.0\nnot-a-number\n").unwrap();
    let o = run(&["detect", p(&f)], None);
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.starts_with("error:"), "{err}");
    assert!(err.contains("row 3"), "{err}");

    assert_eq!(code(&run(&["detect", p(&tmp.path().join("nope.csv"))], None)), 1);
    assert_eq!(code(&run(&["detect", p(&f), "--set", "detector.bogus=1"], None)), 1);
    assert_eq!(code(&run(&["detect", p(&f)], Some("0"))), 1);
}

#[test]
fn eval_requires_every_result() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("c");
    assert_eq!(code(&generate(&corpus, 2, 3, &[])), 0);
    let empty = tmp.path().join("r");
    fs::create_dir(&empty).unwrap();
    let o = run(&["eval", p(&corpus), "--results", p(&empty)], None);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing result for manifest entry"));
}

#[test]
fn perfect_detections_score_one() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("c");
    let mix = [
        "--set", "synth.mix.AFIB=0", "--set", "synth.mix.SVTA=0", "--set", "synth.mix.PAC=0",
        "--set", "synth.mix.VR=0", "--set", "synth.mix.RAND=0", "--set", "synth.mix.normal=1",
        "--set", "synth.mix.AFL=1",
    ];
    assert_eq!(code(&generate(&corpus, 4, 5, &mix)), 0);
    let results = tmp.path().join("r");
    let mut args = vec!["detect", p(&corpus), "--out", p(&results)];
    args.extend_from_slice(SMALL);
    let o = run(&args, None);
    assert!(matches!(code(&o), 0 | 2), "{}", String::from_utf8_lossy(&o.stderr));

    // rewrite each result to agree with the annotations
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(corpus.join("manifest.json")).unwrap()).unwrap();
    let mut positives = 0;
    for e in manifest["entries"].as_array().unwrap() {
        let name = e["name"].as_str().unwrap();
        let path = results.join(format!("{name}.result.json"));
        let mut r: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        let anns = e["annotations"].as_array().unwrap();
        let flagged: Vec<serde_json::Value> = anns.iter().map(|a| serde_json::json!([a["start"], a["end"]])).collect();
        positives += usize::from(!anns.is_empty());
        r["result"]["change_detected"] = serde_json::Value::Bool(!anns.is_empty());
        r["result"]["flagged"] = serde_json::Value::Array(flagged);
        fs::write(&path, serde_json::to_string(&r).unwrap()).unwrap();
    }
    assert_eq!(positives, 2);

    let eval_out = tmp.path().join("e");
    let o = run(&["eval", p(&corpus), "--results", p(&results), "--out", p(&eval_out)], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("sensitivity % 100.0"), "{stdout}");
    assert!(stdout.contains("specificity % 100.0"), "{stdout}");
    let e: serde_json::Value = serde_json::from_str(&fs::read_to_string(eval_out.join("eval.json")).unwrap()).unwrap();
    assert_eq!(e["sensitivity"], 1.0);
    assert_eq!(e["specificity"], 1.0);
    assert_eq!(e["counts"]["tp"], 2);
    assert_eq!(e["counts"]["tn"], 2);
}

#[test]
fn detection_identical_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("c");
    assert_eq!(code(&generate(&corpus, 3, 12, &[])), 0);
    let mut canon = Vec::new();
    for threads in ["1", "3"] {
        let out = tmp.path().join(format!("r{threads}"));
        let mut args = vec!["detect", p(&corpus), "--out", p(&out)];
        args.extend_from_slice(SMALL);
        let o = run(&args, Some(threads));
        assert!(matches!(code(&o), 0 | 2), "{}", String::from_utf8_lossy(&o.stderr));
        let mut files: Vec<PathBuf> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().path()).collect();
        files.sort();
        canon.push(
            files
                .iter()
                .map(|f| DetectReport::load(f).unwrap().canonical_json())
                .collect::<Vec<_>>(),
        );
    }
    assert_eq!(canon[0].len(), 3);
    assert_eq!(canon[0], canon[1]);
}
