use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use levelforge_core::corpus::{CorpusSplit, SegmentArchive};
use levelforge_core::fixtures::{overfit_segments, overfit_table};
use levelforge_core::tiles::TileCatalog;
use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_levelforge"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Exit code and the parsed single-line error.
fn failure(dir: &Path, args: &[&str]) -> (i32, Value) {
    let out = run(dir, args);
    let stderr = String::from_utf8(out.stderr).unwrap();
    let lines: Vec<&str> = stderr.lines().collect();
    assert_eq!(lines.len(), 1, "{stderr}");
    (out.status.code().unwrap(), serde_json::from_str(lines[0]).unwrap())
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

/// Fixture archive and table under `fx/`.
fn fixture_inputs(dir: &Path) {
    let fx = dir.join("fx");
    std::fs::create_dir_all(&fx).unwrap();
    let segs = overfit_segments();
    SegmentArchive::new(&segs, &CorpusSplit::train_only(segs.clone(), 0))
        .save(fx.join("archive.json"))
        .unwrap();
    overfit_table(&TileCatalog::default(), 0)
        .unwrap()
        .save(fx.join("table.json"))
        .unwrap();
}

/// Fixture inputs plus a trained scaled model under `fx/`.
fn fixture_run(dir: &Path) {
    fixture_inputs(dir);
    std::fs::write(
        dir.join("run.toml"),
        "out = \"fx\"\n[train]\ncycle_length = 20\nbeta_step = 0.001\nlearning_rate = 0.001\nbatch_size = 4\n",
    )
    .unwrap();
    ok(
        dir,
        &[
            "--config", "run.toml", "train", "--widths", "32,16", "--latent", "8", "--epochs", "200",
        ],
    );
}

fn schedule(epoch: usize) -> f64 {
    let (cycle, step, max) = (20, 0.001, 0.01);
    if epoch < cycle {
        return 0.0;
    }
    let ramp = (epoch % cycle + 1).min(cycle / 2) as f64 * step;
    ramp.min(max)
}

#[test]
fn train_generate_blend_contract() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fixture_run(d);
    assert!(d.join("fx/model.json").exists());
    let history = std::fs::read_to_string(d.join("fx/history.csv")).unwrap();
    let mut lines = history.lines();
    assert_eq!(lines.next(), Some("epoch,recon,kl,beta,total"));
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 200);
    for (e, row) in rows.iter().enumerate() {
        assert_eq!(row[0], e.to_string());
        let beta: f64 = row[3].parse().unwrap();
        assert!((beta - schedule(e)).abs() < 1e-12, "epoch {e}: {beta}");
    }

    ok(
        d,
        &[
            "--out", "fx", "generate", "-n", "1000", "--seed", "6", "--render", "none",
        ],
    );
    let manifest = json(d.join("fx/manifest.json"));
    let entries = manifest.as_array().unwrap();
    assert_eq!(entries.len(), 1000);
    assert!(entries.iter().all(|e| e["seed"] == 6 && e["t"] == "random"));

    let a = overfit_segments()[2].id();
    ok(
        d,
        &[
            "--out",
            "same",
            "blend",
            "--checkpoint",
            "fx/model.json",
            "--table",
            "fx/table.json",
            "--archive",
            "fx/archive.json",
            "--a",
            &a,
            "--b",
            &a,
            "--steps",
            "5",
        ],
    );
    let same = json(d.join("same/manifest.json"));
    let grids: Vec<&Value> = same.as_array().unwrap().iter().map(|e| &e["tiles"]).collect();
    assert_eq!(grids.len(), 5);
    assert!(grids.iter().all(|g| *g == grids[0]));
    assert_eq!(std::fs::read_dir(d.join("same/renders")).unwrap().count(), 5);

    let b = overfit_segments()[5].id();
    ok(
        d,
        &[
            "--out",
            "eleven",
            "blend",
            "--checkpoint",
            "fx/model.json",
            "--table",
            "fx/table.json",
            "--archive",
            "fx/archive.json",
            "--a",
            &a,
            "--b",
            &b,
            "--steps",
            "11",
        ],
    );
    let ts: Vec<f64> = json(d.join("eleven/manifest.json"))
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["t"].as_f64().unwrap())
        .collect();
    let expected: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    assert_eq!(ts, expected);

    let (code, err) = failure(d, &["--out", "fx", "blend", "--a", &a, "--b", "LR-999-TL"]);
    assert_eq!(code, 2);
    assert!(err["message"].as_str().unwrap().contains("LR-999-TL"));

    // the training archive scored against itself
    let train_manifest: Vec<Value> = overfit_segments()
        .iter()
        .map(|s| serde_json::json!({"id": s.id(), "t": "random", "tiles": s.to_lines(), "seed": 0}))
        .collect();
    std::fs::write(
        d.join("train_manifest.json"),
        serde_json::to_string(&train_manifest).unwrap(),
    )
    .unwrap();
    ok(d, &["--out", "fx", "eval", "--manifest", "train_manifest.json"]);
    assert_eq!(json(d.join("fx/summary.json"))["e_distance"], 0.0);
}

#[test]
fn table_dimension_mismatch_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fixture_inputs(d);
    std::fs::write(d.join("bad.toml"), "out = \"fx\"\n[network]\ntile_dim = 5\n").unwrap();
    let (code, err) = failure(d, &["--config", "bad.toml", "train", "--epochs", "1"]);
    assert_eq!(code, 2);
    assert_eq!(err["kind"], "DimensionMismatch");
}

#[test]
fn eval_matches_audited_report() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let manifest = data("eval_manifest.json");
    ok(d, &["--out", "ev", "eval", "--manifest", manifest.to_str().unwrap()]);
    let expected = json(data("eval_expected.json"));
    let summary = json(d.join("ev/summary.json"));
    for key in [
        "n",
        "lr_like",
        "loz_like",
        "lr_astar_pct",
        "loz_astar_pct",
        "e_distance",
    ] {
        assert_eq!(summary[key], expected[key], "{key}");
    }
    for (name, want) in expected["metrics"].as_object().unwrap() {
        let got = &summary["metrics"][name];
        assert_eq!(got["mean"], want["mean"], "{name}");
        let std = want["var"].as_f64().unwrap().sqrt();
        assert!((got["std"].as_f64().unwrap() - std).abs() < 1e-12, "{name}");
    }
    let report = json(d.join("ev/playability.json"));
    assert_eq!(report["per_segment"], expected["per_segment"]);
    let csv = std::fs::read_to_string(d.join("ev/metrics.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    let want: Vec<&str> = expected["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r.as_str().unwrap())
        .collect();
    assert_eq!(rows, want);
}

#[test]
fn unknown_tile_in_manifest_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let mut m = json(data("eval_manifest.json"));
    m[1]["tiles"][4] = Value::from("......X.........");
    std::fs::write(d.join("m.json"), m.to_string()).unwrap();
    let (code, err) = failure(d, &["--out", "ev", "eval", "--manifest", "m.json"]);
    assert_eq!(code, 2);
    assert_eq!(err["kind"], "UnknownTile");
    assert_eq!(err["level"], "error");
}

#[test]
fn empty_corpus_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::create_dir(tmp.path().join("empty")).unwrap();
    let (code, err) = failure(tmp.path(), &["prepare", "--corpus", "empty"]);
    assert_eq!(code, 2);
    assert_eq!(err["kind"], "EmptyInput");
    let (code, _) = failure(tmp.path(), &["prepare", "--corpus", "missing"]);
    assert_eq!(code, 2);
}

#[test]
fn prepare_reference_corpus() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["make-corpus", "--out", "corpus"]);
    ok(d, &["prepare", "--corpus", "corpus", "--seed", "3"]);
    let archive = json(d.join("out/archive.json"));
    assert_eq!(archive["segments"].as_array().unwrap().len(), 1059);
    assert_eq!(archive["seed"], 3);
    let split = &archive["split"];
    let sizes: Vec<usize> = ["train", "test", "validation"]
        .iter()
        .map(|k| split[k].as_array().unwrap().len())
        .collect();
    assert_eq!(sizes, vec![900, 105, 54]);
}

#[test]
fn render_text_and_image() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let manifest = data("eval_manifest.json");
    let m = manifest.to_str().unwrap();
    ok(
        d,
        &[
            "--out",
            "txt",
            "render",
            "--manifest",
            m,
            "--id",
            "fixture-blank",
            "--id",
            "fixture-floor",
        ],
    );
    let blank = std::fs::read_to_string(d.join("txt/renders/fixture-blank.txt")).unwrap();
    assert_eq!(blank, format!("{}\n", "................").repeat(16));
    assert_eq!(std::fs::read_dir(d.join("txt/renders")).unwrap().count(), 2);
    let floor = std::fs::read_to_string(d.join("txt/renders/fixture-floor.txt")).unwrap();
    let cat = TileCatalog::default();
    let level = levelforge_core::corpus::parse_level(&floor, "LR", &cat).unwrap();
    assert_eq!(level.rows()[15], b"BBBBBBBBBBBBBBBB".to_vec());

    ok(d, &["table", "--out", "img"]);
    ok(
        d,
        &[
            "--out",
            "img",
            "render",
            "--manifest",
            m,
            "--render",
            "image",
            "--scale",
            "3",
        ],
    );
    let png = std::fs::read(d.join("img/renders/fixture-walls.png")).unwrap();
    let w = u32::from_be_bytes(png[16..20].try_into().unwrap());
    let h = u32::from_be_bytes(png[20..24].try_into().unwrap());
    assert_eq!((w, h), (48, 48));

    let (code, _) = failure(d, &["render", "--manifest", m, "--id", "nope"]);
    assert_eq!(code, 2);
}

#[test]
fn unknown_config_keys_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fixture_inputs(d);
    std::fs::write(d.join("c.toml"), "out = \"fx\"\n[train]\nepoch = 3\n").unwrap();
    let (code, err) = failure(d, &["--config", "c.toml", "train"]);
    assert_eq!(code, 2);
    assert!(err["message"].as_str().unwrap().contains("epoch"));
}
