use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use label_cyclegan::data::DatasetManifest;
use label_cyclegan::eval::{read_summary_csv, EvalReport};
use label_cyclegan::pipeline::ExperimentConfig;
use label_cyclegan::training::Architecture;

fn lcgan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lcgan"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// A config small enough that a whole pipeline runs in well under a second.
fn tiny_config(dir: &Path) -> PathBuf {
    let mut c = ExperimentConfig::desk();
    c.out_dir = dir.join("out");
    for m in [&mut c.data.real, &mut c.data.sim] {
        m.item_count_per_class = vec![8; 3];
    }
    c.data.validation_per_class = 3;
    c.data.test_per_class = 3;
    c.grid_items_per_class = 1;
    let arch = Architecture {
        generator_channels: 4,
        down_stages: 1,
        res_blocks: 1,
        discriminator_channels: 4,
        discriminator_stages: 2,
        classifier_channels: [4, 4],
        ..Default::default()
    };
    for t in [&mut c.pretrain_r, &mut c.pretrain_s, &mut c.gan, &mut c.retrain] {
        t.epochs = 1;
        t.batch_size = 4;
        t.arch = arch.clone();
    }
    let path = dir.join("tiny.toml");
    std::fs::write(&path, c.to_toml()).unwrap();
    path
}

#[test]
fn data_build_writes_six_corpora_then_is_a_no_op() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let cfg = cfg.to_str().unwrap();
    let first = lcgan(&["--config", cfg, "data", "build"]);
    assert!(first.status.success(), "{}", stderr(&first));
    let data = dir.path().join("out/data");
    let count = |ext: &str| {
        std::fs::read_dir(&data)
            .unwrap()
            .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().ends_with(ext))
            .count()
    };
    assert_eq!(count(".corpus"), 6);
    assert_eq!(count(".manifest.json"), 6);
    let again = lcgan(&["--config", cfg, "data", "build"]);
    assert!(again.status.success());
    assert!(stdout(&again).contains("up to date"));
}

#[test]
fn corrupt_manifest_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let c = ExperimentConfig::desk();
    let bad = c
        .data
        .real
        .to_json()
        .replace("\"split\": \"train\"", "\"split\": \"training\"");
    assert!(DatasetManifest::from_json(&bad).is_err());
    std::fs::write(dir.path().join("real.json"), bad).unwrap();
    // replace the inline [data.real] table by a reference to the file
    let mut text = String::new();
    let mut skipping = false;
    for line in c.to_toml().lines() {
        if line.starts_with('[') {
            skipping = line == "[data.real]";
        }
        if !skipping {
            text.push_str(line);
            text.push('\n');
        }
        if line == "[data]" {
            text.push_str("real_manifest = \"real.json\"\n");
        }
    }
    let path = dir.path().join("c.toml");
    std::fs::write(&path, text).unwrap();
    let out = lcgan(&["--config", path.to_str().unwrap(), "data", "build"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("split"), "{}", stderr(&out));
}

#[test]
fn pipeline_modes_and_seed_rosters() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let cfg = cfg.to_str().unwrap();
    let out = dir.path().join("out");

    let missing = lcgan(&["--config", cfg, "--mode", "cyclegan", "--seeds", "1", "pipeline"]);
    assert!(!missing.status.success());
    assert!(stderr(&missing).contains("data build"), "{}", stderr(&missing));

    assert!(lcgan(&["--config", cfg, "data", "build"]).status.success());
    let run = lcgan(&["--config", cfg, "--mode", "cyclegan", "--seeds", "1", "pipeline"]);
    assert!(run.status.success(), "{}", stderr(&run));
    let log = std::fs::read_to_string(out.join("cyclegan/seed-1/logs/train.jsonl")).unwrap();
    for line in log.lines().filter(|l| !l.contains("\"record\"")) {
        assert!(
            line.contains("\"lab_r\":0.0") && line.contains("\"lab_s\":0.0"),
            "{line}"
        );
    }
    let report = EvalReport::load(&out.join("cyclegan/seed-1/reports/eval.json")).unwrap();
    assert_eq!(report.metadata.seed, 1);
    assert!(report.label_preservation_rate.is_some());

    let run = lcgan(&[
        "--config",
        cfg,
        "--mode",
        "label_cyclegan",
        "--seeds",
        "1,2,3",
        "pipeline",
    ]);
    assert!(run.status.success(), "{}", stderr(&run));
    for s in 1..=3 {
        for sub in ["checkpoints", "logs", "reports", "grids"] {
            assert!(out.join(format!("label_cyclegan/seed-{s}/{sub}")).is_dir());
        }
    }
    let rows = read_summary_csv(&out.join("summary.csv")).unwrap();
    for class in 0..3 {
        let n = rows
            .iter()
            .filter(|r| r.method == "label_cyclegan" && r.class == class)
            .count();
        assert_eq!(n, 3);
    }

    let run = lcgan(&["--config", cfg, "--mode", "simgan", "--seed", "1", "pipeline"]);
    assert!(run.status.success(), "{}", stderr(&run));
    assert!(!out.join("simgan/seed-1/checkpoints/g_r2s.lcgan").exists());
    let log = std::fs::read_to_string(out.join("simgan/seed-1/logs/train.jsonl")).unwrap();
    assert!(log
        .lines()
        .filter(|l| !l.contains("\"record\""))
        .all(|l| l.contains("\"cycle\":0.0")));
}

#[test]
fn report_is_deterministic_and_refuses_empty_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let cfg = cfg.to_str().unwrap();
    let empty = lcgan(&["--config", cfg, "report"]);
    assert!(!empty.status.success());
    assert!(stderr(&empty).contains("pipeline"), "{}", stderr(&empty));

    assert!(lcgan(&["--config", cfg, "data", "build"]).status.success());
    let run = lcgan(&[
        "--config",
        cfg,
        "--mode",
        "label_cyclegan,cyclegan",
        "--seeds",
        "1,2,3",
        "pipeline",
    ]);
    assert!(run.status.success(), "{}", stderr(&run));
    let report_dir = dir.path().join("out/report");
    assert!(lcgan(&["--config", cfg, "report"]).status.success());
    let grids: Vec<_> = (1..=3).map(|s| report_dir.join(format!("grid-seed-{s}.png"))).collect();
    let snapshot: Vec<Vec<u8>> = grids
        .iter()
        .chain([&report_dir.join("summary.md")])
        .map(|p| std::fs::read(p).unwrap())
        .collect();
    assert!(lcgan(&["--config", cfg, "report"]).status.success());
    let again: Vec<Vec<u8>> = grids
        .iter()
        .chain([&report_dir.join("summary.md")])
        .map(|p| std::fs::read(p).unwrap())
        .collect();
    assert_eq!(snapshot, again);
    let table = String::from_utf8(snapshot[3].clone()).unwrap();
    assert!(table.contains("| baseline |") && table.contains("| label_cyclegan |"));
}

#[test]
fn phase_commands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let cfg = cfg.to_str().unwrap();
    let out = dir.path().join("out");
    let base = ["--config", cfg, "--mode", "label_cyclegan", "--seed", "2"];
    let step = |cmd: &[&str]| {
        let args: Vec<&str> = base.iter().chain(cmd).copied().collect();
        let o = lcgan(&args);
        assert!(o.status.success(), "{cmd:?}: {}", stderr(&o));
        o
    };
    let early = lcgan(&[&base[..], &["transform"]].concat());
    assert!(!early.status.success());
    assert!(stderr(&early).contains("train"), "{}", stderr(&early));

    step(&["data", "build"]);
    step(&["pretrain"]);
    step(&["train"]);
    step(&["transform"]);
    step(&["retrain"]);
    step(&["retrain", "--baseline"]);
    let run = out.join("label_cyclegan/seed-2");
    let eval = step(&[
        "eval",
        "--classifier",
        run.join("checkpoints/classifier.lcgan").to_str().unwrap(),
        "--corpus",
        out.join("data/real-test.corpus").to_str().unwrap(),
    ]);
    let report: EvalReport = serde_json::from_str(&stdout(&eval)).unwrap();
    assert_eq!(report.per_class_accuracy.len(), 3);
    assert_eq!(read_summary_csv(&out.join("summary.csv")).unwrap().len(), 6);
}
