use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;

use egomfv::classify::eval::EvalReport;
use egomfv::cli::run_cli;
use egomfv::data::{generate_synthetic, write_dataset, DatasetManifest, SyntheticSpec};
use egomfv::pipeline::EncodedMatrix;

fn cli(args: &[&str]) -> i32 {
    let mut full = vec!["egomfv"];
    full.extend_from_slice(args);
    run_cli(full)
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for sub in ["", "sensor", "trajectories"] {
        for entry in std::fs::read_dir(dir.join(sub)).unwrap() {
            let p = entry.unwrap().path();
            if p.is_file() {
                out.insert(p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn synth_writes_dataset_reproducibly() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(cli(&["synth", "--seed", "4", "--out", path_str(&a)]), 0);
    assert_eq!(cli(&["synth", "--seed", "4", "--out", path_str(&b)]), 0);
    let sa = snapshot(&a);
    assert_eq!(sa.keys().filter(|k| k.starts_with("sensor")).count(), 20);
    assert_eq!(sa.keys().filter(|k| k.starts_with("trajectories")).count(), 20);
    assert!(sa.contains_key("manifest.json"));
    assert_eq!(sa, snapshot(&b));

    let manifest = DatasetManifest::load(a.join("manifest.json")).unwrap();
    let notes = manifest.notes.unwrap();
    assert!(notes.contains("order-only"), "{notes}");
    assert!(notes.contains("seed 4"));
    assert!(!a.join(".egomfv.lock").exists());
}

#[test]
fn run_writes_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let out = tmp.path().join("out");
    assert_eq!(cli(&["synth", "--out", path_str(&data)]), 0);
    let manifest = data.join("manifest.json");
    let code = cli(&[
        "run",
        "--manifest",
        path_str(&manifest),
        "--method",
        "tfvs,fvv+tfvs",
        "--gaussians",
        "4",
        "--folds",
        "5",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code, 0);
    let tfvs: EvalReport =
        serde_json::from_str(&std::fs::read_to_string(out.join("report-tfvs.json")).unwrap()).unwrap();
    assert!((0.0..=1.0).contains(&tfvs.overall_accuracy));
    assert_eq!(tfvs.split.folds, 5);
    assert!(tfvs.split.config_hash.is_some());

    let fused: EvalReport =
        serde_json::from_str(&std::fs::read_to_string(out.join("report-fvv+tfvs.json")).unwrap()).unwrap();
    assert!(fused.notes.iter().any(|n| n.starts_with("video:")));
    assert!(fused.notes.iter().any(|n| n.starts_with("sensor: TFVS")));

    let table = std::fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(table.contains("TFVS") && table.contains("FVV+TFVS") && table.contains('%'));
    let confusion = std::fs::read_to_string(out.join("confusion-tfvs.csv")).unwrap();
    assert_eq!(confusion.lines().count(), 3);
}

#[test]
fn equal_configs_give_equal_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    assert_eq!(cli(&["synth", "--out", path_str(&data)]), 0);
    let config = tmp.path().join("config.json");
    std::fs::write(&config, r#"{"method": "fvs", "classifier": {"folds": 4}, "sensor": {"clusters": 3}}"#).unwrap();
    let mut reports = Vec::new();
    for name in ["r1", "r2"] {
        let out = tmp.path().join(name);
        let code = cli(&[
            "run",
            "--config",
            path_str(&config),
            "--manifest",
            path_str(&data.join("manifest.json")),
            "--folds",
            "5",
            "--out",
            path_str(&out),
        ]);
        assert_eq!(code, 0);
        reports.push(std::fs::read_to_string(out.join("report-fvs.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    let r: EvalReport = serde_json::from_str(&reports[0]).unwrap();
    // The flag wins over the file.
    assert_eq!(r.split.folds, 5);
}

#[test]
fn encode_full_size_mfv() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let mut spec = SyntheticSpec::joint_fusion().with_descriptor_dim(426);
    spec.clips_per_class = 5;
    let clips = generate_synthetic(&spec, 0).unwrap();
    write_dataset(&spec, &clips, &data, None).unwrap();

    let config = tmp.path().join("config.json");
    std::fs::write(&config, r#"{"method": "mfv", "sensor": {"pca_dim": 18}}"#).unwrap();
    let out = tmp.path().join("out");
    let manifest = data.join("manifest.json");
    let base = ["--config", path_str(&config), "--manifest", path_str(&manifest), "--out", path_str(&out)];
    assert_eq!(cli(&[&["fit"][..], &base].concat()), 0);
    assert_eq!(cli(&[&["encode"][..], &base].concat()), 0);

    let first = std::fs::read(out.join("encoded.json")).unwrap();
    let matrix: EncodedMatrix = serde_json::from_slice(&first).unwrap();
    assert_eq!(matrix.clips.len(), 20);
    assert!(matrix.clips.iter().all(|c| c.values.len() == 11625));
    assert_eq!(matrix.dim, 11625);
    let csv = std::fs::read_to_string(out.join("encoded.csv")).unwrap();
    assert_eq!(csv.lines().count(), 21);
    assert_eq!(csv.lines().next().unwrap().split(',').count(), 11627);

    assert_eq!(cli(&[&["encode"][..], &base].concat()), 0);
    assert_eq!(std::fs::read(out.join("encoded.json")).unwrap(), first);

    // A different codebook-relevant setting is refused.
    assert_eq!(cli(&[&["encode"][..], &base, &["--window", "4"]].concat()), 1);
    // The classifier cost does not touch the codebook.
    assert_eq!(cli(&[&["encode"][..], &base, &["--cost", "1"]].concat()), 0);
}

#[test]
fn exit_codes() {
    let bin = env!("CARGO_BIN_EXE_egomfv");
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.json");
    let run = |args: &[&str]| Command::new(bin).args(args).output().unwrap();

    let o = run(&["run", "--manifest", path_str(&missing)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("load"));

    let o = run(&["run", "--manifest", path_str(&missing), "--method", "bogus"]);
    assert_eq!(o.status.code(), Some(1));

    let o = run(&["encode", "--codebook", path_str(&missing)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.json"));

    let o = run(&["fit", "--window", "1..5"]);
    assert_eq!(o.status.code(), Some(1));

    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn locked_output_directory_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    std::fs::create_dir_all(&out).unwrap();
    std::fs::write(out.join(".egomfv.lock"), "").unwrap();
    assert_eq!(cli(&["synth", "--out", path_str(&out)]), 1);
    assert!(!out.join("manifest.json").exists());
}

#[test]
fn mfv_excludes_clips_without_trajectories() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = SyntheticSpec::joint_fusion();
    let mut clips = generate_synthetic(&spec, 1).unwrap();
    // One extra clip per class keeps every class above the fold count.
    let extra: Vec<_> = clips
        .iter()
        .filter(|c| c.clip_id.ends_with("_00"))
        .map(|c| {
            let mut c = c.clone();
            c.clip_id = c.clip_id.replace("_00", "_xx");
            c.trajectories.clear();
            c
        })
        .collect();
    clips.extend(extra);
    let data = tmp.path().join("data");
    write_dataset(&spec, &clips, &data, None).unwrap();
    let out = tmp.path().join("out");
    let code = cli(&[
        "run",
        "--manifest",
        path_str(&data.join("manifest.json")),
        "--method",
        "mfv",
        "--gaussians",
        "4",
        "--folds",
        "5",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code, 0);
    let r: EvalReport =
        serde_json::from_str(&std::fs::read_to_string(out.join("report-mfv.json")).unwrap()).unwrap();
    assert_eq!(r.confusion.iter().flatten().sum::<usize>(), 40);
    assert!(r.notes.iter().any(|n| n.contains("c01_xx")));
}
