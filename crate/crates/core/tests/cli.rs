use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

fn whisperline(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_whisperline"))
        .args(args)
        .env_remove("WHISPERLINE_SEED")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = whisperline(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                files.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    files
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        ok(&["synth", "--out", s(out), "--n", "10", "--seed", "7", "--duration", "0.6", "--pad", "0.05"]);
    }
    let (ta, tb) = (tree(&a), tree(&b));
    assert_eq!(ta.len(), 20 + 2);
    assert_eq!(ta, tb);
}

#[test]
fn full_chain_produces_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let feats = dir.path().join("feats");
    let ckpt = dir.path().join("model.ckpt");
    let report = dir.path().join("report.csv");
    ok(&["synth", "--out", s(&corpus), "--n", "20", "--seed", "3", "--duration", "0.8", "--pad", "0.05"]);
    let manifest = corpus.join("manifest.csv");
    ok(&["extract", "--manifest", s(&manifest), "--feature", "qse", "--quarter", "q1", "--out", s(&feats), "--jobs", "1"]);
    ok(&[
        "train", "--features", s(&feats), "--arch", "arch1", "--seed", "1", "--out", s(&ckpt),
        "--epochs", "3", "--frames-per-utterance", "8", "--val-fraction", "0.2",
    ]);
    assert!(dir.path().join("model.log.csv").exists());
    assert!(dir.path().join("model.config.json").exists());
    ok(&["eval", "--ckpt", s(&ckpt), "--features", s(&feats), "--report", s(&report)]);

    let csv = std::fs::read_to_string(&report).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "class,precision,recall,f1");
    assert!(lines[1].starts_with("normal,") && lines[2].starts_with("whisper,"));
    let acc: f64 = lines[3].strip_prefix("accuracy,").unwrap().parse().unwrap();
    assert!((0.0..=100.0).contains(&acc));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(report.with_extension("json")).unwrap()).unwrap();
    let confusion = json["confusion"].as_array().unwrap();
    let total: u64 = confusion.iter().flat_map(|r| r.as_array().unwrap()).map(|v| v.as_u64().unwrap()).sum();
    assert_eq!(total, 8);

    let info = ok(&["inspect", "--ckpt", s(&ckpt)]);
    assert!(info.contains("model: arch1"), "{info}");
    assert!(info.contains("flops/frame:"), "{info}");

    // a second identical eval refuses to clobber the report
    let again = whisperline(&["eval", "--ckpt", s(&ckpt), "--features", s(&feats), "--report", s(&report)]);
    assert_eq!(again.status.code(), Some(1));
}

#[test]
fn noise_command_audits_snr() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let noisy = dir.path().join("noisy");
    ok(&["synth", "--out", s(&corpus), "--n", "3", "--duration", "0.5", "--pad", "0.05"]);
    ok(&["noise", "--manifest", s(&corpus.join("manifest.csv")), "--snr", "-5", "--seed", "2", "--out", s(&noisy)]);
    let mut rows = csv::Reader::from_path(noisy.join("snr_audit.csv")).unwrap();
    let mut n = 0;
    for row in rows.records() {
        let row = row.unwrap();
        let (target, measured): (f64, f64) = (row[2].parse().unwrap(), row[3].parse().unwrap());
        assert_eq!(target, -5.0);
        assert!((measured - target).abs() <= 0.1, "{measured}");
        n += 1;
    }
    assert_eq!(n, 6);
    assert!(noisy.join("manifest.csv").exists());
}

#[test]
fn exit_codes() {
    assert_eq!(whisperline(&["nope"]).status.code(), Some(1));
    assert_eq!(whisperline(&["train", "--arch", "arch9"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let out = whisperline(&["inspect", "--ckpt", s(&dir.path().join("absent.ckpt"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}
