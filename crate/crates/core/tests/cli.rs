mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::*;
use ovcd::cli::{InstanceRecord, REPORT_JSON, REPORT_TEXT};
use ovcd::geometry::decode_rle;
use ovcd::ingest::{load_class_map, save_class_map};
use ovcd::model::{BBox, ClassMap};

fn ovcd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ovcd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn run_writes_planted_footprint_and_instances() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_pairs(&data, &[planted_pair()]);
    let cfg = write_config(tmp.path(), "mci.toml", MCI_TOML);
    let out = tmp.path().join("out");

    let o = ovcd(&[
        "run",
        "--config",
        s(&cfg),
        "--t1",
        s(&data.join("A")),
        "--t2",
        s(&data.join("B")),
        "--out",
        s(&out),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );

    let map = load_class_map(&out.join("planted.png")).unwrap();
    assert_eq!(map, footprint(SIZE, SIZE, &[(PLANTED, 1)]));

    let text = fs::read_to_string(out.join("planted.jsonl")).unwrap();
    let records: Vec<InstanceRecord> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(records.len(), 1);
    let r = &records[0];
    assert_eq!(
        (r.pair_id.as_str(), r.class.as_str()),
        ("planted", "building")
    );
    assert_eq!(r.bbox, PLANTED);
    assert!(r.change_score > 0.0);
    let mask = decode_rle(&r.rle).unwrap();
    assert_eq!(mask.area(), PLANTED.area());
    assert!(mask.foreground().all(|(x, y)| PLANTED.contains(x, y)));
}

#[test]
fn imc_on_identical_pair_writes_empty_map() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_pairs(&data, &[identical_pair()]);
    let cfg = write_config(tmp.path(), "imc.toml", IMC_TOML);
    let out = tmp.path().join("out");
    let o = ovcd(&[
        "run",
        "--config",
        s(&cfg),
        "--t1",
        s(&data.join("A/identical.png")),
        "--t2",
        s(&data.join("B/identical.png")),
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(load_class_map(&out.join("identical.png"))
        .unwrap()
        .is_all_zero());
    assert_eq!(fs::read_to_string(out.join("identical.jsonl")).unwrap(), "");
}

#[test]
fn dataset_root_and_seed_override() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_pairs(&data, &fixture_suite());
    let cfg = write_config(tmp.path(), "mci.toml", MCI_TOML);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for (out, seed) in [(&a, "7"), (&b, "12345")] {
        let o = ovcd(&[
            "run",
            "--config",
            s(&cfg),
            "--t1",
            s(&data),
            "--out",
            s(out),
            "--seed",
            seed,
            "--workers",
            "2",
        ]);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    // the synthetic backends see a different projection, but the detections hold
    for pair in fixture_suite() {
        let name = format!("{}.png", pair.pair_id);
        assert_eq!(
            load_class_map(&a.join(&name)).unwrap(),
            load_class_map(&b.join(&name)).unwrap()
        );
    }
}

#[test]
fn multi_class_maps_use_vocabulary_order() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let t1 = grass(SIZE, SIZE);
    let t2 = t1
        .with_rect(PLANTED, &BUILDING)
        .unwrap()
        .with_rect(BBox::new(40, 40, 56, 56), &RED)
        .unwrap();
    write_pairs(
        &data,
        &[ovcd::model::BiTemporalPair::new("both", t1, t2).unwrap()],
    );
    let multi = MCI_TOML
        .replace(
            "foreground = [{ name = \"building\", synonyms = [\"house\"] }]",
            "foreground = [{ name = \"building\", synonyms = [\"house\"] }, { name = \"vehicle\" }]",
        )
        .replace("grass = { min", "vehicle = { min = [200, 0, 0], max = [255, 40, 40] }\ngrass = { min");
    let cfg = write_config(tmp.path(), "multi.toml", &multi);
    let out = tmp.path().join("out");
    let o = ovcd(&[
        "run",
        "--config",
        s(&cfg),
        "--t1",
        s(&data),
        "--out",
        s(&out),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert_eq!(
        load_class_map(&out.join("both.png")).unwrap(),
        footprint(SIZE, SIZE, &[(PLANTED, 1), (BBox::new(40, 40, 56, 56), 2)])
    );
    let classes: Vec<String> = fs::read_to_string(out.join("both.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<InstanceRecord>(l).unwrap().class)
        .collect();
    assert_eq!(classes, ["building", "vehicle"]);
}

#[test]
fn malformed_config_exits_2_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_pairs(&data, &[planted_pair()]);
    let out = tmp.path().join("out");
    for (name, text) in [
        ("syntax.toml", "[pipeline\nframework = \"mci\""),
        (
            "unknown_key.toml",
            &MCI_TOML.replace("nms_iou = 0.5", "nms_iou = 0.5\nnms_iuo = 0.4"),
        ),
        (
            "bad_backend.toml",
            &MCI_TOML.replace(
                "[pipeline.components.proposer]\nbackend = \"synthetic\"",
                "[pipeline.components.proposer]\nbackend = \"sam-vit-h\"",
            ),
        ),
    ] {
        let cfg = write_config(tmp.path(), name, text);
        let o = ovcd(&[
            "run",
            "--config",
            s(&cfg),
            "--t1",
            s(&data),
            "--out",
            s(&out),
        ]);
        assert_eq!(
            o.status.code(),
            Some(2),
            "{name}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert!(!out.exists(), "{name} left outputs behind");
    }
}

#[test]
fn failed_run_removes_partial_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_pairs(&data, &fixture_suite());
    // one unreadable pair makes the whole run fail
    fs::write(data.join("A/zzz.png"), b"not a png").unwrap();
    fs::write(data.join("B/zzz.png"), b"not a png").unwrap();
    let cfg = write_config(tmp.path(), "mci.toml", MCI_TOML);
    let out = tmp.path().join("out");
    let o = ovcd(&[
        "run",
        "--config",
        s(&cfg),
        "--t1",
        s(&data),
        "--out",
        s(&out),
        "--workers",
        "1",
    ]);
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(!out.exists());
}

#[test]
fn missing_inputs_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "mci.toml", MCI_TOML);
    let out = tmp.path().join("out");
    let o = ovcd(&[
        "run",
        "--config",
        s(&cfg),
        "--t1",
        "/nonexistent/a.png",
        "--t2",
        "/nonexistent/b.png",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(3));
    let o = ovcd(&[
        "run",
        "--config",
        "/nonexistent.toml",
        "--t1",
        "a",
        "--t2",
        "b",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!out.exists());
}

fn map(data: &[u8]) -> ClassMap {
    ClassMap::from_data(2, data.len() / 2, data.to_vec()).unwrap()
}

#[test]
fn eval_perfect_and_counted_scores() {
    let tmp = tempfile::tempdir().unwrap();
    let (pred, gt) = (tmp.path().join("pred"), tmp.path().join("gt"));
    fs::create_dir_all(&pred).unwrap();
    fs::create_dir_all(&gt).unwrap();

    let g = map(&[1, 1, 1, 0, 0, 0, 2, 2]);
    save_class_map(&g, &gt.join("x.png")).unwrap();
    save_class_map(&g, &pred.join("x.png")).unwrap();
    let o = ovcd(&[
        "eval",
        "--pred",
        s(&pred),
        "--gt",
        s(&gt),
        "--classes",
        "building,water,tree",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let table = String::from_utf8(o.stdout).unwrap();
    let fields = |name: &str| -> Vec<String> {
        let line = table.lines().find(|l| l.starts_with(name)).unwrap();
        line.split_whitespace().map(str::to_string).collect()
    };
    assert_eq!(fields("building")[1..3], ["100.00", "100.00"]);
    assert_eq!(fields("water")[1..3], ["100.00", "100.00"]);
    let tree = fields("tree");
    assert_eq!(tree[1..3], ["0.00", "0.00"]);
    assert_eq!(tree.last().unwrap(), "(absent)");

    // building: tp 2, fp 1, fn 1 -> IoU 50, F1 66.67; water: tp 1, fp 0, fn 1
    save_class_map(&map(&[1, 1, 0, 1, 0, 0, 2, 0]), &pred.join("x.png")).unwrap();
    let o = ovcd(&[
        "eval",
        "--pred",
        s(&pred),
        "--gt",
        s(&gt),
        "--classes",
        "building,water",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(pred.join(REPORT_JSON)).unwrap()).unwrap();
    let b = &report["classes"][0];
    assert_eq!(
        (b["tp"].as_u64(), b["fp"].as_u64(), b["fn"].as_u64()),
        (Some(2), Some(1), Some(1))
    );
    assert!((b["iou"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!((b["f1"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);
    let w = &report["classes"][1];
    assert!((w["iou"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(report["images"].as_u64(), Some(1));
    assert!(fs::read_to_string(pred.join(REPORT_TEXT))
        .unwrap()
        .contains("66.67"));
}

#[test]
fn eval_sums_counts_over_images() {
    let tmp = tempfile::tempdir().unwrap();
    let (pred, gt, out) = (
        tmp.path().join("pred"),
        tmp.path().join("gt"),
        tmp.path().join("report"),
    );
    fs::create_dir_all(&pred).unwrap();
    fs::create_dir_all(&gt).unwrap();
    // image a: tp 1, fn 3 (IoU 0.25); image b: tp 1 (IoU 1.0)
    // summed counts give 2/5, the per-image mean would be 0.625
    save_class_map(&map(&[1, 0, 0, 0]), &pred.join("a.png")).unwrap();
    save_class_map(&map(&[1, 1, 1, 1]), &gt.join("a.png")).unwrap();
    save_class_map(&map(&[1, 0, 0, 0]), &pred.join("b.png")).unwrap();
    save_class_map(&map(&[1, 0, 0, 0]), &gt.join("b.png")).unwrap();
    let o = ovcd(&[
        "eval",
        "--pred",
        s(&pred),
        "--gt",
        s(&gt),
        "--classes",
        "building",
        "--out",
        s(&out),
        "--workers",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join(REPORT_JSON)).unwrap()).unwrap();
    assert_eq!(report["classes"][0]["tp"].as_u64(), Some(2));
    assert_eq!(report["classes"][0]["fn"].as_u64(), Some(3));
    assert!((report["classes"][0]["iou"].as_f64().unwrap() - 0.4).abs() < 1e-12);
}

#[test]
fn eval_missing_files_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let (pred, gt) = (tmp.path().join("pred"), tmp.path().join("gt"));
    fs::create_dir_all(&pred).unwrap();
    fs::create_dir_all(&gt).unwrap();
    save_class_map(&map(&[0, 1]), &gt.join("a.png")).unwrap();
    save_class_map(&map(&[0, 1]), &gt.join("b.png")).unwrap();
    save_class_map(&map(&[0, 1]), &pred.join("a.png")).unwrap();
    let o = ovcd(&[
        "eval",
        "--pred",
        s(&pred),
        "--gt",
        s(&gt),
        "--classes",
        "building",
    ]);
    assert_eq!(o.status.code(), Some(3));
    let o = ovcd(&[
        "eval",
        "--pred",
        "/nonexistent",
        "--gt",
        s(&gt),
        "--classes",
        "building",
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn eval_of_run_output_is_stable() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let suite = fixture_suite();
    write_pairs(&data, &suite);
    let labels = data.join("label");
    fs::create_dir_all(&labels).unwrap();
    for p in &suite {
        let gt = match p.pair_id.as_str() {
            "planted" => footprint(SIZE, SIZE, &[(PLANTED, 1)]),
            _ => ClassMap::zeros(SIZE, SIZE),
        };
        save_class_map(&gt, &labels.join(format!("{}.png", p.pair_id))).unwrap();
    }
    let cfg = write_config(tmp.path(), "mci.toml", MCI_TOML);
    let mut reports = Vec::new();
    for run in 0..2 {
        let out = tmp.path().join(format!("out{run}"));
        let o = ovcd(&[
            "run",
            "--config",
            s(&cfg),
            "--t1",
            s(&data),
            "--out",
            s(&out),
        ]);
        assert_eq!(o.status.code(), Some(0));
        let o = ovcd(&[
            "eval",
            "--pred",
            s(&out),
            "--gt",
            s(&labels),
            "--classes",
            "building",
        ]);
        assert_eq!(o.status.code(), Some(0));
        reports.push(fs::read_to_string(out.join(REPORT_JSON)).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn list_backends_lists_synthetic_components() {
    let o = ovcd(&["list-backends"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    for kind in [
        "proposer",
        "features",
        "text_encoder",
        "identifier",
        "promoter",
    ] {
        assert!(text.contains(&format!("{kind}\tsynthetic")), "{text}");
    }
}
