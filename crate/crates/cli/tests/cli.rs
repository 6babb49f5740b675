use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
regime = "framework_balanced"
seeds = [3]

[data]
source = "synthetic"
per_class = 20

[model]
scale = 0.1

[training]
global_epochs = 2
learning_rate = 0.01

[federation]
participants = 3
local_epochs = 2
local_batch = 8
"#;

fn fedtransfer(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fedtransfer"))
        .args(args)
        .current_dir(cwd)
        .env_remove("FEDTRANSFER_OUT")
        .output()
        .unwrap()
}

fn strip_wall_clock(json: &str) -> String {
    json.lines().filter(|l| !l.contains("wall_clock_seconds")).collect::<Vec<_>>().join("\n")
}

#[test]
fn run_writes_reproducible_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
    for out in ["a", "b"] {
        let o = fedtransfer(&["run", "tiny.toml", "--out", out], dir.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = dir.path().join("a");
    for f in ["report.json", "curves.csv", "confusion_image.csv", "confusion_audio.csv", "confusion_audio_normalized.csv"] {
        assert!(a.join(f).exists(), "missing {f}");
    }
    assert!(!a.join("confusion_multimodal.csv").exists());
    let ra = fs::read_to_string(a.join("report.json")).unwrap();
    let rb = fs::read_to_string(dir.path().join("b/report.json")).unwrap();
    assert_eq!(strip_wall_clock(&ra), strip_wall_clock(&rb));

    let curves = fs::read_to_string(a.join("curves.csv")).unwrap();
    let mut lines = curves.lines();
    assert_eq!(lines.next(), Some("seed,epoch,series,value"));
    assert!(lines.any(|l| l.starts_with("3,2,audio.val_accuracy,")));

    let confusion = fs::read_to_string(a.join("confusion_image.csv")).unwrap();
    assert_eq!(confusion.lines().count(), 10);
    let total: u64 = confusion
        .lines()
        .skip(1)
        .flat_map(|l| l.split(',').skip(1).map(|c| c.parse::<u64>().unwrap()))
        .sum();
    assert_eq!(total, 18);
}

#[test]
fn seed_flag_and_env_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_fedtransfer"))
        .args(["run", "tiny.toml", "--seed", "11"])
        .current_dir(dir.path())
        .env("FEDTRANSFER_OUT", "from_env")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("from_env/report.json")).unwrap()).unwrap();
    assert_eq!(report["seeds"][0]["seed"], 11);
    assert_eq!(report["seeds"].as_array().unwrap().len(), 1);
}

#[test]
fn invalid_config_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        TINY.replace("scale = 0.1", "scale = 0.01"),
        TINY.replace("learning_rate = 0.01", "learning_rate = -1.0"),
        TINY.replace("per_class = 20", "per_class = 20\nbogus = 1"),
        "regime = \"no_such_regime\"".to_string(),
    ];
    for (i, text) in cases.iter().enumerate() {
        let name = format!("bad{i}.toml");
        fs::write(dir.path().join(&name), text).unwrap();
        let o = fedtransfer(&["run", &name, "--out", "out"], dir.path());
        assert_eq!(o.status.code(), Some(2), "case {i}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!dir.path().join("out").exists());
    }
    let o = fedtransfer(&["run", "missing.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn data_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("all.csv"), "label,img_0,aud_0\n0,1,oops\n1,2,3\n").unwrap();
    let cfg = "regime = \"fl_baseline\"\n[data]\nsource = \"csv\"\ncombined_path = \"all.csv\"\nclass_count = 2\n";
    fs::write(dir.path().join("csv.toml"), cfg).unwrap();
    let o = fedtransfer(&["run", "csv.toml", "--out", "out"], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("row 2"));

    let cfg = cfg.replace("all.csv", "absent.csv");
    fs::write(dir.path().join("absent.toml"), cfg).unwrap();
    let o = fedtransfer(&["run", "absent.toml", "--out", "out"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn compare_prints_accuracies_and_gaps() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("fw.toml"), TINY).unwrap();
    fs::write(dir.path().join("fl.toml"), TINY.replace("framework_balanced", "fl_baseline")).unwrap();
    for (cfg, out) in [("fw.toml", "fw"), ("fl.toml", "fl")] {
        assert!(fedtransfer(&["run", cfg, "--out", out], dir.path()).status.success());
    }
    let o = fedtransfer(&["compare", "fl/report.json", "fw/report.json"], dir.path());
    assert!(o.status.success());
    let table = String::from_utf8_lossy(&o.stdout);
    assert!(table.contains("fl_baseline") && table.contains("framework_balanced"));
    assert!(table.lines().any(|l| l.starts_with("audio")));
    assert!(table.lines().any(|l| l.starts_with("multimodal") && l.contains(" - ")));

    let o = fedtransfer(&["compare", "fl/report.json", "nope.json"], dir.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn reference_report_fills_delta_gaps() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), TINY.replace("framework_balanced", "centralized_baseline")).unwrap();
    assert!(fedtransfer(&["run", "c.toml", "--out", "central"], dir.path()).status.success());
    let with_ref = TINY.replace("seeds = [3]", "seeds = [3]\nreference_report = \"central/report.json\"");
    fs::write(dir.path().join("f.toml"), with_ref).unwrap();
    let o = fedtransfer(&["run", "f.toml", "--out", "fw"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("fw/report.json")).unwrap()).unwrap();
    let gaps = report["delta_gaps"].as_object().unwrap();
    assert_eq!(gaps.keys().collect::<Vec<_>>(), ["audio", "image"]);

    let missing = TINY.replace("seeds = [3]", "seeds = [3]\nreference_report = \"nowhere.json\"");
    fs::write(dir.path().join("m.toml"), missing).unwrap();
    assert_eq!(fedtransfer(&["run", "m.toml", "--out", "x"], dir.path()).status.code(), Some(3));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        fedtransfer_cli::load_config(&path, None).unwrap_or_else(|f| panic!("{}: {}", path.display(), f.message));
        seen += 1;
    }
    assert_eq!(seen, 6);
}
